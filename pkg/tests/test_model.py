import numpy as np
import pytest

from fashionista.data import EpochTable, Interaction, segment_epochs, split_holdout
from fashionista.model import (
    DimensionMismatch,
    DivergedTraining,
    EmptyHeldout,
    EmptyTrainingSet,
    EpochOutOfRange,
    FashionModel,
    Hyperparams,
    ModelFormatError,
    UnknownItem,
    auc_evaluate,
    bpr_pair_gradients,
    bpr_pair_objective,
    fashionability,
    fashionability_series,
    init_model,
    load_model,
    predict_preference,
    save_model,
    style_position,
    train,
)
from fashionista.prng import PCG32
from fashionista.synth import SyntheticSpec, generate_synthetic


def test_style_position_zero_features(toy_model):
    model, catalog = toy_model
    item = catalog[0]
    item = type(item)(**{**item.__dict__, "features": np.zeros_like(item.features)})
    assert np.array_equal(style_position(model, item), np.zeros(model.E.shape[0]))


def test_style_position_zero_embedding(toy_model):
    model, catalog = toy_model
    model.E[:] = 0.0
    for item in catalog[:5]:
        assert np.array_equal(style_position(model, item), np.zeros(model.E.shape[0]))


def test_style_position_matches_triple_loop_oracle(toy_model):
    model, catalog = toy_model
    rng = PCG32(44)
    model.E[:] = rng.normal_array(model.E.size).reshape(model.E.shape)
    for item in catalog[:10]:
        got = style_position(model, item)
        expected = np.zeros(model.E.shape[0])
        for k in range(model.E.shape[0]):
            acc = 0.0
            for f in range(model.E.shape[1]):
                acc += model.E[k, f] * item.features[f]
            expected[k] = acc
        assert np.max(np.abs(got - expected)) <= 1e-12 * max(1.0, np.max(np.abs(expected)))


def test_style_position_dim_mismatch(toy_model):
    model, catalog = toy_model
    bad = type(catalog[0])(**{**catalog[0].__dict__, "features": np.zeros(3)})
    with pytest.raises(DimensionMismatch):
        style_position(model, bad)


def test_fashionability_zero_model(toy_model):
    model, catalog = toy_model
    model.E[:] = 0.0
    model.eta_bar[:] = 0.0
    model.bias_base[:] = 0.0
    model.bias_epoch[:] = 0.0
    assert fashionability(model, catalog[0], 0) == 0.0


def test_fashionability_shared_bias(toy_model):
    model, catalog = toy_model
    model.eta_bar[:] = 0.0
    model.bias_base[:] = 0.75
    model.bias_epoch[:] = 0.0
    scores = {fashionability(model, it, 1) for it in catalog}
    assert scores == {0.75}


def test_fashionability_epoch_range(toy_model):
    model, catalog = toy_model
    with pytest.raises(EpochOutOfRange):
        fashionability(model, catalog[0], model.n_epochs)
    with pytest.raises(EpochOutOfRange):
        fashionability(model, catalog[0], -1)


def test_fashionability_unknown_item(toy_model):
    model, catalog = toy_model
    ghost = type(catalog[0])(**{**catalog[0].__dict__, "id": "NOPE"})
    with pytest.raises(UnknownItem):
        fashionability(model, ghost, 0)


def test_predict_matches_fashionability_when_personal_terms_zero(toy_model):
    model, catalog = toy_model
    uid = model.user_ids[0]
    u = model.user_index[uid]
    model.gamma_user[u] = 0.0
    model.delta_user[u] = 0.0
    for it in catalog[:5]:
        assert predict_preference(model, uid, it, 1) == fashionability(model, it, 1)


def test_predict_identical_items_identical_scores(toy_model):
    model, catalog = toy_model
    a, b = catalog[0], catalog[1]
    clone = type(b)(**{**b.__dict__, "features": a.features.copy()})
    ia, ib = model.item_index[a.id], model.item_index[b.id]
    model.bias_base[ib] = model.bias_base[ia]
    model.bias_epoch[ib] = model.bias_epoch[ia]
    model.gamma_item[ib] = model.gamma_item[ia]
    for uid in model.user_ids[:4]:
        assert predict_preference(model, uid, a, 0) == predict_preference(model, uid, clone, 0)


def test_predict_unknown_user_falls_back_to_fashionability(toy_model):
    model, catalog = toy_model
    it = catalog[0]
    assert predict_preference(model, "nobody", it, 1) == fashionability(model, it, 1)


def test_predict_matches_recomputation_from_saved_parameters(tmp_path, small_trained):
    model, catalog, *_ = small_trained
    save_model(model, tmp_path / "m.bin")
    loaded = load_model(tmp_path / "m.bin")
    rng = PCG32(17)
    for _ in range(50):
        it = catalog[rng.bounded(len(catalog))]
        uid = model.user_ids[rng.bounded(len(model.user_ids))]
        e = rng.bounded(model.n_epochs)
        got = predict_preference(model, uid, it, e)
        idx = loaded.item_index[it.id]
        u = loaded.user_index[uid]
        theta = loaded.E @ it.features
        expected = (
            loaded.bias_base[idx]
            + loaded.bias_epoch[idx, e]
            + float(loaded.eta_bar[e] @ theta)
            + float(loaded.gamma_user[u] @ loaded.gamma_item[idx])
            + float(loaded.delta_user[u] @ theta)
        )
        assert got == pytest.approx(expected, rel=1e-12, abs=1e-15)


def test_train_zero_iterations_equals_init(toy_model):
    model, catalog = toy_model
    # toy_model is built with train(iterations=0); rebuild init directly
    hp = Hyperparams(K=4, L=3, iterations=0, seed=99)
    users = sorted(model.user_ids)
    rng = PCG32(hp.seed)
    init = init_model(catalog, users, model.epoch_table, hp, rng)
    for name, block in model.parameter_blocks().items():
        assert np.array_equal(block, init.parameter_blocks()[name])


def test_train_determinism_same_seed():
    catalog, interactions, _ = generate_synthetic(SyntheticSpec(60, 12, 240, seed=5))
    table = segment_epochs(interactions, "calendar_year")
    hp = Hyperparams(K=4, L=2, iterations=3000, seed=12)
    a = train(catalog, interactions, table, hp)
    b = train(catalog, interactions, table, hp)
    for name, block in a.parameter_blocks().items():
        assert block.tobytes() == b.parameter_blocks()[name].tobytes()


def test_train_empty_set():
    catalog, _, _ = generate_synthetic(SyntheticSpec(10, 2, 4, seed=5))
    with pytest.raises(EmptyTrainingSet):
        train(catalog, [], EpochTable([0, 10], ["a"]), Hyperparams(iterations=10))


def test_train_rejects_unknown_item():
    catalog, interactions, _ = generate_synthetic(SyntheticSpec(10, 2, 8, seed=5))
    table = segment_epochs(interactions, "calendar_year")
    rogue = interactions + [Interaction("u", "GHOST", interactions[0].timestamp)]
    with pytest.raises(UnknownItem):
        train(catalog, rogue, table, Hyperparams(iterations=10))


def test_train_diverged_detection(toy_model):
    model, _ = toy_model
    model.E[0, 0] = np.nan
    from fashionista.model import _check_finite

    with pytest.raises(DivergedTraining):
        _check_finite(model, 1)


def test_bpr_gradient_matches_finite_differences():
    # small random instance: F=8, K=3, L=2
    rng = PCG32(31)
    F, K, L = 8, 3, 2
    blocks = {
        "E": rng.normal_array(K * F).reshape(K, F) * 0.3,
        "eta_t": rng.normal_array(K) * 0.3,
        "bias_i": float(rng.normal() * 0.3),
        "bias_j": float(rng.normal() * 0.3),
        "gamma_u": rng.normal_array(L) * 0.3,
        "gamma_i": rng.normal_array(L) * 0.3,
        "gamma_j": rng.normal_array(L) * 0.3,
        "delta_u": rng.normal_array(K) * 0.3,
    }
    f_i = rng.normal_array(F)
    f_j = rng.normal_array(F)

    def objective(bl):
        return bpr_pair_objective(
            bl["E"], bl["eta_t"], bl["bias_i"], bl["bias_j"], bl["gamma_u"],
            bl["gamma_i"], bl["gamma_j"], bl["delta_u"], f_i, f_j,
        )

    analytic = bpr_pair_gradients(
        blocks["E"], blocks["eta_t"], blocks["bias_i"], blocks["bias_j"],
        blocks["gamma_u"], blocks["gamma_i"], blocks["gamma_j"], blocks["delta_u"],
        f_i, f_j,
    )
    h = 1e-5
    for name in blocks:
        grad = np.atleast_1d(np.asarray(analytic[name], dtype=np.float64))
        flat_shape = grad.shape
        numeric = np.zeros_like(grad)
        for pos in np.ndindex(*flat_shape):
            perturbed = {
                k: (v.copy() if isinstance(v, np.ndarray) else v) for k, v in blocks.items()
            }
            ref = np.atleast_1d(np.asarray(perturbed[name], dtype=np.float64)).copy()
            ref[pos] += h
            perturbed[name] = ref if isinstance(blocks[name], np.ndarray) else float(ref[0])
            up = objective(perturbed)
            ref[pos] -= 2 * h
            perturbed[name] = ref if isinstance(blocks[name], np.ndarray) else float(ref[0])
            down = objective(perturbed)
            numeric[pos] = (up - down) / (2 * h)
        denom = max(np.max(np.abs(numeric)), 1e-12)
        rel = np.max(np.abs(grad - numeric)) / denom
        assert rel < 1e-4, f"block {name}: rel error {rel}"


def test_single_sgd_step_applies_pair_gradient():
    # with regularization off, one step moves each touched block by lr * grad
    catalog, interactions, _ = generate_synthetic(SyntheticSpec(30, 6, 60, seed=9))
    table = segment_epochs(interactions, "calendar_year")
    hp = Hyperparams(K=3, L=2, learning_rate=0.1, reg_lambda=0.0, reg_embed=0.0,
                     iterations=1, seed=21)
    before = train(catalog, interactions, table, Hyperparams(**{**hp.__dict__, "iterations": 0}))
    after = train(catalog, interactions, table, hp)

    # replay the single sampled step with the same stream
    rng = PCG32(hp.seed)
    users = sorted({x.user for x in interactions})
    init_model(catalog, users, table, hp, rng)  # consume init draws
    k = rng.bounded(len(interactions))
    x = interactions[k]
    u = users.index(x.user)
    item_ids = [it.id for it in catalog]
    i = item_ids.index(x.item)
    t = table.epoch_of(x.timestamp)
    purchased = {item_ids.index(y.item) for y in interactions if y.user == x.user}
    while True:
        j = rng.bounded(len(catalog))
        if j not in purchased:
            break
    grads = bpr_pair_gradients(
        before.E, before.eta_bar[t],
        float(before.bias_base[i] + before.bias_epoch[i, t]),
        float(before.bias_base[j] + before.bias_epoch[j, t]),
        before.gamma_user[u], before.gamma_item[i], before.gamma_item[j],
        before.delta_user[u], catalog[i].features, catalog[j].features,
    )
    lr = hp.learning_rate
    assert np.allclose(after.E, before.E + lr * grads["E"], atol=1e-12)
    assert np.allclose(after.eta_bar[t], before.eta_bar[t] + lr * grads["eta_t"], atol=1e-12)
    assert after.bias_base[i] == pytest.approx(before.bias_base[i] + lr * grads["bias_i"])
    assert after.bias_epoch[j, t] == pytest.approx(before.bias_epoch[j, t] + lr * grads["bias_j"])
    assert np.allclose(after.gamma_user[u], before.gamma_user[u] + lr * grads["gamma_u"], atol=1e-12)
    assert np.allclose(after.delta_user[u], before.delta_user[u] + lr * grads["delta_u"], atol=1e-12)


def test_scale_consistency(toy_model):
    model, catalog = toy_model
    item = catalog[3]
    c = 2.0
    scaled_item = type(item)(**{**item.__dict__, "features": item.features * c})
    scaled_model = FashionModel(
        E=model.E / c,
        eta_bar=model.eta_bar,
        bias_base=model.bias_base,
        bias_epoch=model.bias_epoch,
        gamma_user=model.gamma_user,
        gamma_item=model.gamma_item,
        delta_user=model.delta_user,
        epoch_table=model.epoch_table,
        item_ids=model.item_ids,
        user_ids=model.user_ids,
    )
    theta_a = style_position(model, item)
    theta_b = style_position(scaled_model, scaled_item)
    rel = np.max(np.abs(theta_a - theta_b)) / max(1e-30, np.max(np.abs(theta_a)))
    assert rel < 1e-9
    for e in range(model.n_epochs):
        a = fashionability(model, item, e)
        b = fashionability(scaled_model, scaled_item, e)
        assert abs(a - b) <= 1e-9 * max(1.0, abs(a))


def test_uniform_bias_shift_preserves_ordering(toy_model):
    model, catalog = toy_model
    rng = PCG32(3)
    model.bias_base[:] = rng.normal_array(len(catalog))
    e = 1

    def ordering(m):
        scored = sorted(
            ((fashionability(m, it, e), it.id) for it in catalog),
            key=lambda p: (-p[0], p[1]),
        )
        return [iid for _, iid in scored]

    before = ordering(model)
    model.bias_base += 0.5
    assert ordering(model) == before


def test_fashionability_series_shape_and_exactness(small_trained):
    model, catalog, *_ = small_trained
    item = catalog[7]
    series = fashionability_series(model, item)
    assert len(series) == model.n_epochs
    assert [label for label, _ in series] == list(model.epoch_table.labels)
    for e, (_, score) in enumerate(series):
        assert score == fashionability(model, item, e)


def test_fashionability_series_flat_for_constant_model(toy_model):
    model, catalog = toy_model
    model.eta_bar[:] = model.eta_bar[0]
    model.bias_epoch[:] = 0.0
    series = [s for _, s in fashionability_series(model, catalog[2])]
    assert max(series) - min(series) == 0.0


def test_auc_zero_model_is_half(toy_model):
    model, catalog = toy_model
    for block in model.parameter_blocks().values():
        block[:] = 0.0
    rng = PCG32(2)
    heldout = [
        Interaction(
            model.user_ids[rng.bounded(len(model.user_ids))],
            catalog[rng.bounded(len(catalog))].id,
            model.epoch_table.boundaries[0] + rng.bounded(1000),
        )
        for _ in range(50)
    ]
    auc = auc_evaluate(model, heldout, catalog, seed=2)
    assert abs(auc - 0.5) <= 0.02  # all pairs tie, so this is exactly 0.5


def test_auc_single_winning_pair(toy_model):
    model, catalog = toy_model
    for block in model.parameter_blocks().values():
        block[:] = 0.0
    winner = model.item_index[catalog[0].id]
    model.bias_base[winner] = 10.0
    heldout = [Interaction(model.user_ids[0], catalog[0].id, model.epoch_table.boundaries[0])]
    assert auc_evaluate(model, heldout, catalog, seed=4) == 1.0


def test_auc_empty_heldout(toy_model):
    model, catalog = toy_model
    with pytest.raises(EmptyHeldout):
        auc_evaluate(model, [], catalog)


def test_auc_matches_full_ranking_oracle_small_corpus():
    catalog, interactions, _ = generate_synthetic(SyntheticSpec(50, 10, 500, seed=19))
    train_set, heldout = split_holdout(interactions, 0.15, seed=4)
    table = segment_epochs(train_set, "calendar_year")
    hp = Hyperparams(K=4, L=4, iterations=20000, seed=6)
    model = train(catalog, train_set, table, hp)
    sampled = auc_evaluate(model, heldout, catalog, train_interactions=train_set, seed=8)

    # exact AUC over every non-interacted negative
    from fashionista.model import scores_for_user, _features_by_model_order

    features = _features_by_model_order(model, catalog)
    banned = {}
    for x in list(train_set) + list(heldout):
        banned.setdefault(x.user, set()).add(model.item_index[x.item])
    wins = 0.0
    pairs = 0
    for x in heldout:
        t = model.epoch_table.epoch_of_clamped(x.timestamp)
        scores = scores_for_user(model, features, x.user, t)
        i = model.item_index[x.item]
        for j in range(len(catalog)):
            if j == i or j in banned[x.user]:
                continue
            if scores[i] > scores[j]:
                wins += 1
            elif scores[i] == scores[j]:
                wins += 0.5
            pairs += 1
    exact = wins / pairs
    assert abs(sampled - exact) < 0.03


def test_save_load_bit_identical_predictions(tmp_path, small_trained):
    model, catalog, *_ = small_trained
    path = tmp_path / "model.bin"
    save_model(model, path)
    loaded = load_model(path)
    for name, block in model.parameter_blocks().items():
        assert block.tobytes() == loaded.parameter_blocks()[name].tobytes()
    rng = PCG32(23)
    for _ in range(1000):
        it = catalog[rng.bounded(len(catalog))]
        uid = model.user_ids[rng.bounded(len(model.user_ids))]
        e = rng.bounded(model.n_epochs)
        a = predict_preference(model, uid, it, e)
        b = predict_preference(loaded, uid, it, e)
        assert a == b


def test_load_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOTMAGIC" + b"\x00" * 64)
    with pytest.raises(ModelFormatError):
        load_model(path)


def test_load_rejects_trailing_bytes(tmp_path, small_trained):
    model, *_ = small_trained
    path = tmp_path / "model.bin"
    save_model(model, path)
    path.write_bytes(path.read_bytes() + b"x")
    with pytest.raises(ModelFormatError):
        load_model(path)
