"""Exact t-SNE for projecting style positions to the 2D explorer map.

O(n^2) gradient descent on KL(P || Q) with a Student-t low-dimensional
kernel, early exaggeration, and a two-phase momentum schedule. No
Barnes-Hut: the map only ever embeds a capped sample, and the exact
gradient stays checkable against finite differences.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .prng import PCG32


class TooFewPoints(ValueError):
    pass


class NonFiniteInput(ValueError):
    pass


class ShapeMismatch(ValueError):
    pass


class DegenerateRow(UserWarning):
    pass


@dataclass
class TsneParams:
    perplexity: float = 30.0
    learning_rate: float = 200.0
    iterations: int = 1000
    early_exaggeration: float = 12.0
    exaggeration_iters: int = 250
    momentum_initial: float = 0.5
    momentum_final: float = 0.8
    seed: int = 0

    def validate(self) -> None:
        if self.perplexity < 2:
            raise ValueError("perplexity must be >= 2")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass
class Embedding2D:
    coords: np.ndarray    # n x 2
    kl_trace: np.ndarray  # KL divergence entering each iteration


def pairwise_sq_distances(X: np.ndarray) -> np.ndarray:
    sq = np.sum(X * X, axis=1, keepdims=True)
    d = sq + sq.T - 2.0 * (X @ X.T)
    np.fill_diagonal(d, 0.0)
    return np.maximum(d, 0.0)


def _row_distribution(sq_row: np.ndarray, beta: float, i: int):
    """Gaussian row conditionals at precision beta, shifted for stability."""
    d = np.delete(sq_row, i)
    shifted = d - d.min()
    p = np.exp(-beta * shifted)
    total = p.sum()
    p /= total
    return p


def _perplexity_bits(p: np.ndarray) -> float:
    nz = p[p > 0]
    h = -np.sum(nz * np.log2(nz))
    return float(2.0 ** h)


def perplexity_calibrate(sq_distances: np.ndarray, perplexity: float,
                         tol: float = 1e-5, max_steps: int = 50) -> np.ndarray:
    """Per-row bandwidth search so each row's Shannon perplexity hits the target.

    Returns the conditional matrix P[j|i]: zero diagonal, rows sum to 1.
    Rows whose distances are all zero cannot be calibrated; they fall back
    to a uniform row with a DegenerateRow warning.
    """
    n = sq_distances.shape[0]
    if sq_distances.shape != (n, n):
        raise ShapeMismatch("sq_distances must be square")
    P = np.zeros((n, n))
    for i in range(n):
        row = sq_distances[i]
        off = np.delete(row, i)
        if np.all(off == 0.0):
            warnings.warn(f"row {i}: all pairwise distances zero, using uniform row",
                          DegenerateRow)
            P[i] = 1.0 / (n - 1)
            P[i, i] = 0.0
            continue
        beta, beta_min, beta_max = 1.0, 0.0, np.inf
        p = _row_distribution(row, beta, i)
        for _ in range(max_steps):
            achieved = _perplexity_bits(p)
            if abs(achieved - perplexity) < tol:
                break
            if achieved > perplexity:  # too flat: narrow the kernel
                beta_min = beta
                beta = beta * 2.0 if beta_max == np.inf else (beta + beta_max) / 2.0
            else:
                beta_max = beta
                beta = (beta + beta_min) / 2.0
            p = _row_distribution(row, beta, i)
        P[i, :i] = p[:i]
        P[i, i + 1:] = p[i:]
    return P


def joint_probabilities(conditional: np.ndarray) -> np.ndarray:
    """Symmetrized pair distribution P = (P[j|i] + P[i|j]) / 2n."""
    n = conditional.shape[0]
    return (conditional + conditional.T) / (2.0 * n)


def kl_divergence(P: np.ndarray, Q: np.ndarray) -> float:
    """Sum of p ln(p/q) with 0 ln 0 = 0 and q clamped to >= 1e-12."""
    if P.shape != Q.shape:
        raise ShapeMismatch(f"{P.shape} vs {Q.shape}")
    mask = P > 0
    p = P[mask]
    q = np.maximum(Q[mask], 1e-12)
    return float(np.sum(p * np.log(p / q)))


def _q_matrix(Y: np.ndarray):
    num = 1.0 / (1.0 + pairwise_sq_distances(Y))
    np.fill_diagonal(num, 0.0)
    Q = num / num.sum()
    return Q, num


def tsne_gradient(P: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """dKL/dY = 4 sum_j (p_ij - q_ij)(1 + |y_i - y_j|^2)^-1 (y_i - y_j)."""
    Q, num = _q_matrix(Y)
    PQ = (P - Q) * num
    return 4.0 * (PQ.sum(axis=1)[:, None] * Y - PQ @ Y)


def effective_perplexity(perplexity: float, n: int) -> float:
    """Clamp to < (n-1)/3 so the bandwidth search stays solvable."""
    return max(2.0, min(perplexity, (n - 1) / 3.0))


def tsne_embed(points: np.ndarray, params: TsneParams) -> Embedding2D:
    """Embed n x K points into 2D; deterministic for a given seed."""
    params.validate()
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if n < 4:
        raise TooFewPoints(f"need at least 4 points, got {n}")
    if not np.all(np.isfinite(points)):
        raise NonFiniteInput("input contains non-finite values")

    perp = effective_perplexity(params.perplexity, n)
    conditional = perplexity_calibrate(pairwise_sq_distances(points), perp)
    P = joint_probabilities(conditional)

    rng = PCG32(params.seed)
    Y = rng.normal_array(2 * n).reshape(n, 2) * 1e-4
    velocity = np.zeros_like(Y)
    # per-coordinate adaptive gains, the reference implementation's scheme:
    # grow when gradient and velocity agree in direction, shrink otherwise
    gains = np.ones_like(Y)
    kl_trace = np.empty(params.iterations)

    for it in range(params.iterations):
        exaggerating = it < params.exaggeration_iters
        P_eff = P * params.early_exaggeration if exaggerating else P
        Q, num = _q_matrix(Y)
        kl_trace[it] = kl_divergence(P, Q)
        PQ = (P_eff - Q) * num
        grad = 4.0 * (PQ.sum(axis=1)[:, None] * Y - PQ @ Y)
        descending = np.sign(grad) != np.sign(velocity)
        gains = np.where(descending, gains + 0.2, gains * 0.8)
        np.maximum(gains, 0.01, out=gains)
        momentum = params.momentum_initial if exaggerating else params.momentum_final
        velocity = momentum * velocity - params.learning_rate * (gains * grad)
        Y = Y + velocity
        Y = Y - Y.mean(axis=0)

    return Embedding2D(coords=Y, kl_trace=kl_trace)


def export_coords(item_ids: Sequence[str], coords: np.ndarray, path) -> None:
    """Tab-separated item_id, x, y."""
    with open(path, "w", encoding="utf-8") as fh:
        for iid, (x, y) in zip(item_ids, coords):
            fh.write(f"{iid}\t{float(x)!r}\t{float(y)!r}\n")
