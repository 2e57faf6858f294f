import math

import numpy as np
import pytest

from fashionista.prng import PCG32
from fashionista.tsne import (
    DegenerateRow,
    Embedding2D,
    NonFiniteInput,
    ShapeMismatch,
    TooFewPoints,
    TsneParams,
    effective_perplexity,
    joint_probabilities,
    kl_divergence,
    pairwise_sq_distances,
    perplexity_calibrate,
    tsne_embed,
    tsne_gradient,
)


def random_joint_p(n, seed):
    rng = PCG32(seed)
    a = np.abs(rng.normal_array(n * n).reshape(n, n)) + 0.1
    p = (a + a.T) / 2.0
    np.fill_diagonal(p, 0.0)
    return p / p.sum()


def two_clusters(n_per=10, dim=10, sep=6.0, seed=5):
    rng = PCG32(seed)
    a = rng.normal_array(n_per * dim).reshape(n_per, dim) * 0.5
    b = rng.normal_array(n_per * dim).reshape(n_per, dim) * 0.5
    b[:, 0] += sep
    labels = np.array([0] * n_per + [1] * n_per)
    return np.vstack([a, b]), labels


def test_three_equidistant_points_uniform_rows():
    sq = np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]])
    P = perplexity_calibrate(sq, 1.5)
    off = P[~np.eye(3, dtype=bool)]
    assert np.allclose(off, 0.5, atol=1e-12)


def test_conditional_rows_sum_to_one():
    rng = PCG32(8)
    pts = rng.normal_array(40 * 5).reshape(40, 5)
    P = perplexity_calibrate(pairwise_sq_distances(pts), 10.0)
    assert np.allclose(P.sum(axis=1), 1.0, atol=1e-9)
    assert np.all(np.diag(P) == 0.0)


def test_achieved_perplexity_close_to_target():
    rng = PCG32(9)
    pts = rng.normal_array(100 * 8).reshape(100, 8)
    target = 25.0
    P = perplexity_calibrate(pairwise_sq_distances(pts), target)
    for i in range(100):
        row = P[i][P[i] > 0]
        achieved = 2.0 ** (-np.sum(row * np.log2(row)))
        assert abs(achieved - target) < 1e-4


def test_degenerate_rows_warn_and_fall_back_to_uniform():
    sq = np.zeros((5, 5))
    with pytest.warns(DegenerateRow):
        P = perplexity_calibrate(sq, 3.0)
    assert np.allclose(P[0], [0, 0.25, 0.25, 0.25, 0.25])


def test_joint_probabilities_is_valid_distribution():
    rng = PCG32(10)
    pts = rng.normal_array(30 * 4).reshape(30, 4)
    P = joint_probabilities(perplexity_calibrate(pairwise_sq_distances(pts), 8.0))
    assert P.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(P, P.T)
    assert np.all(np.diag(P) == 0.0)


def test_kl_zero_when_equal():
    P = random_joint_p(12, 3)
    assert kl_divergence(P, P) == pytest.approx(0.0, abs=1e-15)


def test_kl_non_negative():
    for seed in range(5):
        P = random_joint_p(10, seed)
        Q = random_joint_p(10, seed + 100)
        assert kl_divergence(P, Q) >= 0.0


def test_kl_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        kl_divergence(np.zeros((3, 3)), np.zeros((4, 4)))


def test_kl_matches_compensated_summation_oracle():
    for seed in range(5):
        P = random_joint_p(15, seed)
        Q = random_joint_p(15, seed + 50)
        got = kl_divergence(P, Q)
        terms = []
        for i in range(15):
            for j in range(15):
                p, q = P[i, j], max(Q[i, j], 1e-12)
                if p > 0:
                    terms.append(p * math.log(p / q))
        assert abs(got - math.fsum(terms)) < 1e-10


def test_gradient_matches_finite_differences():
    n = 20
    P = random_joint_p(n, 17)
    rng = PCG32(18)
    Y = rng.normal_array(n * 2).reshape(n, 2)
    analytic = tsne_gradient(P, Y)
    h = 1e-6
    numeric = np.zeros_like(Y)
    for i in range(n):
        for d in range(2):
            up = Y.copy()
            up[i, d] += h
            down = Y.copy()
            down[i, d] -= h
            from fashionista.tsne import _q_matrix

            numeric[i, d] = (
                kl_divergence(P, _q_matrix(up)[0]) - kl_divergence(P, _q_matrix(down)[0])
            ) / (2 * h)
    rel = np.max(np.abs(analytic - numeric)) / max(np.max(np.abs(numeric)), 1e-12)
    assert rel < 1e-4


def test_objective_translation_invariance():
    n = 15
    P = random_joint_p(n, 21)
    rng = PCG32(22)
    Y = rng.normal_array(n * 2).reshape(n, 2)
    from fashionista.tsne import _q_matrix

    before = kl_divergence(P, _q_matrix(Y)[0])
    after = kl_divergence(P, _q_matrix(Y + np.array([3.7, -1.2]))[0])
    assert abs(before - after) < 1e-12


def test_embed_determinism():
    pts, _ = two_clusters()
    params = TsneParams(iterations=120, seed=9)
    a = tsne_embed(pts, params)
    b = tsne_embed(pts, params)
    assert a.coords.tobytes() == b.coords.tobytes()
    assert a.kl_trace.tobytes() == b.kl_trace.tobytes()


def test_embed_separates_two_planted_clusters():
    pts, labels = two_clusters(n_per=10, dim=10)
    emb = tsne_embed(pts, TsneParams(iterations=600, seed=3))
    from sklearn.metrics import silhouette_score

    assert emb.coords.shape == (20, 2)
    assert silhouette_score(emb.coords, labels) > 0.5


def test_duplicated_rows_land_together():
    base, _ = two_clusters(n_per=8, dim=6, sep=8.0, seed=30)
    doubled = np.vstack([base, base])
    n = base.shape[0]

    # identical input rows get identical conditional distributions
    P = perplexity_calibrate(pairwise_sq_distances(doubled), 5.0)
    for i in range(n):
        twin = n + i
        mask = np.ones(2 * n, dtype=bool)
        mask[[i, twin]] = False
        assert np.allclose(P[i][mask], P[twin][mask], atol=1e-9)

    emb = tsne_embed(doubled, TsneParams(iterations=500, seed=4))
    coords = emb.coords
    spread = np.mean(np.sqrt(pairwise_sq_distances(coords)))
    for i in range(n):
        gap = np.linalg.norm(coords[i] - coords[n + i])
        assert gap < spread


def test_kl_trace_descends_after_exaggeration():
    rng = PCG32(31)
    pts = rng.normal_array(100 * 10).reshape(100, 10)
    emb = tsne_embed(pts, TsneParams(iterations=600, seed=6))
    assert len(emb.kl_trace) == 600
    assert emb.kl_trace[-1] < emb.kl_trace[250]
    rises = np.diff(emb.kl_trace[-100:])
    assert np.all(rises <= 1e-3)


def test_embed_rejects_too_few_points():
    with pytest.raises(TooFewPoints):
        tsne_embed(np.zeros((3, 5)), TsneParams(iterations=10))


def test_embed_rejects_non_finite():
    pts = np.zeros((6, 4))
    pts[2, 1] = np.inf
    with pytest.raises(NonFiniteInput):
        tsne_embed(pts, TsneParams(iterations=10))


def test_effective_perplexity_clamp():
    assert effective_perplexity(30.0, 20) == pytest.approx(19 / 3)
    assert effective_perplexity(30.0, 200) == 30.0
    assert effective_perplexity(1.0, 200) == 2.0


def test_export_coords(tmp_path):
    from fashionista.tsne import export_coords

    coords = np.array([[1.5, -2.25], [0.0, 3.0]])
    path = tmp_path / "coords.tsv"
    export_coords(["A1", "B2"], coords, path)
    lines = path.read_text().splitlines()
    assert lines[0].split("\t") == ["A1", "1.5", "-2.25"]
