"""Fashion-aware preference model over purchase triplets.

The learned predictor extends matrix factorization with visual dimensions
and community-level temporal dynamics:

    theta_i   = E f_i                       (style-space position, K dims)
    fash(i,t) = beta_i(t) + <eta_t, theta_i>            (community score)
    x(u,i,t)  = fash(i,t) + <gamma_u, gamma_i> + <delta_u, theta_i>

beta_i(t) is stored as a per-item base bias plus a per-epoch offset. The
per-epoch community weights eta_t capture taste drift; delta_u is a static
personal visual offset. Training is pairwise ranking on positive-only
feedback: repeatedly sample an observed (u, i, t), sample a j the user
never purchased, and ascend ln sigma(x(u,i,t) - x(u,j,t)) with L2 decay
(reg_lambda on biases and factors, reg_embed on E and eta). Single
threaded; the SGD sample order is part of the determinism contract.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .data import EpochTable, Interaction, Item
from .prng import PCG32

MODEL_MAGIC = b"FSHM0001"


class DimensionMismatch(ValueError):
    pass


class EpochOutOfRange(IndexError):
    pass


class UnknownItem(KeyError):
    pass


class EmptyTrainingSet(ValueError):
    pass


class DivergedTraining(RuntimeError):
    pass


class EmptyHeldout(ValueError):
    pass


class ModelFormatError(ValueError):
    pass


@dataclass
class Hyperparams:
    K: int = 10
    L: int = 10
    learning_rate: float = 0.05
    reg_lambda: float = 0.01
    reg_embed: float = 0.001
    iterations: int = 2_000_000
    seed: int = 0

    def validate(self) -> None:
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.L < 0:
            raise ValueError("L must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.reg_lambda < 0 or self.reg_embed < 0:
            raise ValueError("regularization must be non-negative")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")


@dataclass
class FashionModel:
    E: np.ndarray            # K x F
    eta_bar: np.ndarray      # N x K per-epoch community visual weights
    bias_base: np.ndarray    # n_items
    bias_epoch: np.ndarray   # n_items x N
    gamma_user: np.ndarray   # n_users x L
    gamma_item: np.ndarray   # n_items x L
    delta_user: np.ndarray   # n_users x K
    epoch_table: EpochTable
    item_ids: list
    user_ids: list
    item_index: dict = field(default_factory=dict, repr=False)
    user_index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.item_index:
            self.item_index = {iid: i for i, iid in enumerate(self.item_ids)}
        if not self.user_index:
            self.user_index = {uid: u for u, uid in enumerate(self.user_ids)}

    @property
    def n_epochs(self) -> int:
        return self.eta_bar.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.E.shape[1]

    def parameter_blocks(self):
        return {
            "E": self.E,
            "eta_bar": self.eta_bar,
            "bias_base": self.bias_base,
            "bias_epoch": self.bias_epoch,
            "gamma_user": self.gamma_user,
            "gamma_item": self.gamma_item,
            "delta_user": self.delta_user,
        }


def log_sigmoid(z: float) -> float:
    """ln sigma(z), branch on sign so neither exp overflows."""
    if z >= 0:
        return -math.log1p(math.exp(-z))
    return z - math.log1p(math.exp(z))


def sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def style_position(model: FashionModel, item: Item) -> np.ndarray:
    """theta_i = E f_i."""
    if item.features.shape[0] != model.feature_dim:
        raise DimensionMismatch(
            f"item {item.id}: {item.features.shape[0]} features, model expects {model.feature_dim}"
        )
    return model.E @ item.features


def _item_idx(model: FashionModel, item: Item) -> int:
    idx = model.item_index.get(item.id)
    if idx is None:
        raise UnknownItem(item.id)
    return idx


def _check_epoch(model: FashionModel, epoch: int) -> None:
    if not 0 <= epoch < model.n_epochs:
        raise EpochOutOfRange(f"epoch {epoch} not in [0, {model.n_epochs})")


def fashionability(model: FashionModel, item: Item, epoch: int) -> float:
    """Community-level score fash(i,t) = beta_i(t) + <eta_t, theta_i>."""
    _check_epoch(model, epoch)
    idx = _item_idx(model, item)
    theta = style_position(model, item)
    return float(
        model.bias_base[idx] + model.bias_epoch[idx, epoch] + model.eta_bar[epoch] @ theta
    )


def predict_preference(model: FashionModel, user: str, item: Item, epoch: int) -> float:
    """Personalized score; unknown users fall back to the community score."""
    base = fashionability(model, item, epoch)
    u = model.user_index.get(user)
    if u is None:
        return base
    idx = model.item_index[item.id]
    theta = style_position(model, item)
    return float(
        base + model.gamma_user[u] @ model.gamma_item[idx] + model.delta_user[u] @ theta
    )


def fashionability_series(model: FashionModel, item: Item) -> list:
    """One (epoch_label, score) per epoch, chronological."""
    return [
        (model.epoch_table.labels[e], fashionability(model, item, e))
        for e in range(model.n_epochs)
    ]


def bpr_pair_objective(E, eta_t, bias_i, bias_j, gamma_u, gamma_i, gamma_j,
                       delta_u, f_i, f_j) -> float:
    """ln sigma(x_ui - x_uj) for one sampled pair (regularization excluded)."""
    theta_i = E @ f_i
    theta_j = E @ f_j
    common = eta_t + delta_u
    z = (bias_i - bias_j) + float(gamma_u @ (gamma_i - gamma_j)) + float(common @ (theta_i - theta_j))
    return log_sigmoid(z)


def bpr_pair_gradients(E, eta_t, bias_i, bias_j, gamma_u, gamma_i, gamma_j,
                       delta_u, f_i, f_j) -> dict:
    """Analytic gradient of ln sigma(x_ui - x_uj) w.r.t. every block."""
    theta_i = E @ f_i
    theta_j = E @ f_j
    common = eta_t + delta_u
    dtheta = theta_i - theta_j
    z = (bias_i - bias_j) + float(gamma_u @ (gamma_i - gamma_j)) + float(common @ dtheta)
    s = sigmoid(-z)  # d/dz ln sigma(z)
    return {
        "bias_i": s,
        "bias_j": -s,
        "gamma_u": s * (gamma_i - gamma_j),
        "gamma_i": s * gamma_u,
        "gamma_j": -s * gamma_u,
        "delta_u": s * dtheta,
        "eta_t": s * dtheta,
        "E": s * np.outer(common, f_i - f_j),
    }


def init_model(catalog: Sequence[Item], users: Sequence[str], epoch_table: EpochTable,
               hp: Hyperparams, rng: PCG32) -> FashionModel:
    """Biases zero; E, eta, gamma, delta i.i.d. uniform in [-0.01, 0.01].

    Draw order (contractual): E row-major, then eta_bar, gamma_user,
    gamma_item, delta_user.
    """
    n = len(catalog)
    u_count = len(users)
    feature_dim = catalog[0].features.shape[0]
    n_epochs = epoch_table.n_epochs
    w = 0.01
    E = rng.symmetric_uniform_array(hp.K * feature_dim, w).reshape(hp.K, feature_dim)
    eta = rng.symmetric_uniform_array(n_epochs * hp.K, w).reshape(n_epochs, hp.K)
    gamma_user = rng.symmetric_uniform_array(u_count * hp.L, w).reshape(u_count, hp.L)
    gamma_item = rng.symmetric_uniform_array(n * hp.L, w).reshape(n, hp.L)
    delta_user = rng.symmetric_uniform_array(u_count * hp.K, w).reshape(u_count, hp.K)
    return FashionModel(
        E=E,
        eta_bar=eta,
        bias_base=np.zeros(n),
        bias_epoch=np.zeros((n, n_epochs)),
        gamma_user=gamma_user,
        gamma_item=gamma_item,
        delta_user=delta_user,
        epoch_table=epoch_table,
        item_ids=[it.id for it in catalog],
        user_ids=list(users),
    )


def train(catalog: Sequence[Item], interactions: Sequence[Interaction],
          epoch_table: EpochTable, hp: Hyperparams) -> FashionModel:
    """Pairwise-ranking SGD over purchase triplets; deterministic per seed."""
    hp.validate()
    if not interactions:
        raise EmptyTrainingSet("no interactions to train on")
    item_index = {it.id: i for i, it in enumerate(catalog)}
    for x in interactions:
        if x.item not in item_index:
            raise UnknownItem(x.item)
    users = sorted({x.user for x in interactions})
    user_index = {uid: u for u, uid in enumerate(users)}

    rng = PCG32(hp.seed)
    model = init_model(catalog, users, epoch_table, hp, rng)

    n = len(catalog)
    features = np.stack([it.features for it in catalog])
    obs_u = np.array([user_index[x.user] for x in interactions], dtype=np.int64)
    obs_i = np.array([item_index[x.item] for x in interactions], dtype=np.int64)
    obs_t = np.array([epoch_table.epoch_of(x.timestamp) for x in interactions], dtype=np.int64)
    purchased = [set() for _ in users]
    for k in range(len(interactions)):
        purchased[obs_u[k]].add(int(obs_i[k]))

    E = model.E
    eta = model.eta_bar
    bias_base = model.bias_base
    bias_epoch = model.bias_epoch
    gamma_user = model.gamma_user
    gamma_item = model.gamma_item
    delta_user = model.delta_user
    lr = hp.learning_rate
    lam = hp.reg_lambda
    lam_e = hp.reg_embed
    n_obs = len(interactions)
    bounded = rng.bounded

    for step in range(hp.iterations):
        k = bounded(n_obs)
        u, i, t = int(obs_u[k]), int(obs_i[k]), int(obs_t[k])
        mine = purchased[u]
        # negatives exclude anything the user purchased in any epoch
        if len(mine) < n:
            while True:
                j = bounded(n)
                if j not in mine:
                    break
        else:
            j = bounded(n)

        f_i = features[i]
        f_j = features[j]
        theta_i = E @ f_i
        theta_j = E @ f_j
        # snapshots: every update below reads pre-step values
        eta_t = eta[t].copy()
        d_u = delta_user[u].copy()
        common = eta_t + d_u
        g_u = gamma_user[u].copy()
        g_i = gamma_item[i].copy()
        g_j = gamma_item[j].copy()
        z = (
            bias_base[i] - bias_base[j]
            + bias_epoch[i, t] - bias_epoch[j, t]
            + float(g_u @ (g_i - g_j))
            + float(common @ (theta_i - theta_j))
        )
        s = sigmoid(-z)

        dtheta = theta_i - theta_j
        bias_base[i] += lr * (s - lam * bias_base[i])
        bias_base[j] += lr * (-s - lam * bias_base[j])
        bias_epoch[i, t] += lr * (s - lam * bias_epoch[i, t])
        bias_epoch[j, t] += lr * (-s - lam * bias_epoch[j, t])
        if hp.L:
            gamma_user[u] = g_u + lr * (s * (g_i - g_j) - lam * g_u)
            gamma_item[i] = g_i + lr * (s * g_u - lam * g_i)
            gamma_item[j] = g_j + lr * (-s * g_u - lam * g_j)
        delta_user[u] = d_u + lr * (s * dtheta - lam * d_u)
        eta[t] = eta_t + lr * (s * dtheta - lam_e * eta_t)
        E += lr * (s * np.outer(common, f_i - f_j) - lam_e * E)

        if step % 250_000 == 249_999:
            _check_finite(model, step)

    _check_finite(model, hp.iterations)
    return model


def _check_finite(model: FashionModel, step: int) -> None:
    for name, block in model.parameter_blocks().items():
        if block.size and not np.all(np.isfinite(block)):
            raise DivergedTraining(f"non-finite values in {name} after {step} SGD steps")


def scores_for_user(model: FashionModel, features: np.ndarray, user: Optional[str],
                    epoch: int) -> np.ndarray:
    """x(u, ., t) over all model items; features aligned to model item order."""
    _check_epoch(model, epoch)
    theta = features @ model.E.T
    fash = model.bias_base + model.bias_epoch[:, epoch] + theta @ model.eta_bar[epoch]
    u = model.user_index.get(user) if user is not None else None
    if u is None:
        return fash
    return fash + model.gamma_item @ model.gamma_user[u] + theta @ model.delta_user[u]


def auc_evaluate(model: FashionModel, heldout: Sequence[Interaction],
                 catalog: Sequence[Item], train_interactions: Optional[Sequence[Interaction]] = None,
                 num_negatives: int = 100, seed: int = 0) -> float:
    """Sampled pairwise AUC on held-out triplets.

    For each held-out (u, i, t), the observed item is compared against
    num_negatives sampled items the user never interacted with (training
    interactions when given, plus the user's held-out items); ties count
    half. Deterministic for a given seed.
    """
    if not heldout:
        raise EmptyHeldout("no held-out interactions")
    features = _features_by_model_order(model, catalog)
    excluded = {}
    if train_interactions:
        for x in train_interactions:
            excluded.setdefault(x.user, set()).add(model.item_index[x.item])
    for x in heldout:
        excluded.setdefault(x.user, set()).add(model.item_index[x.item])

    rng = PCG32(seed)
    n = len(model.item_ids)
    wins = 0.0
    pairs = 0
    for x in heldout:
        t = model.epoch_table.epoch_of_clamped(x.timestamp)
        scores = scores_for_user(model, features, x.user, t)
        i = model.item_index[x.item]
        banned = excluded[x.user]
        if len(banned) >= n:
            continue
        x_pos = scores[i]
        for _ in range(num_negatives):
            while True:
                j = rng.bounded(n)
                if j not in banned:
                    break
            x_neg = scores[j]
            if x_pos > x_neg:
                wins += 1.0
            elif x_pos == x_neg:
                wins += 0.5
            pairs += 1
    if pairs == 0:
        raise EmptyHeldout("no evaluable held-out pairs")
    return wins / pairs


def _features_by_model_order(model: FashionModel, catalog: Sequence[Item]) -> np.ndarray:
    by_id = {it.id: it.features for it in catalog}
    try:
        return np.stack([by_id[iid] for iid in model.item_ids])
    except KeyError as exc:
        raise UnknownItem(str(exc)) from None


def _write_str(fh, s: str) -> None:
    raw = s.encode("utf-8")
    fh.write(struct.pack("<I", len(raw)))
    fh.write(raw)


def _read_str(fh) -> str:
    (length,) = struct.unpack("<I", fh.read(4))
    return fh.read(length).decode("utf-8")


def save_model(model: FashionModel, path) -> None:
    """Binary little-endian format, magic FSHM0001; bit-exact round trip."""
    K, F = model.E.shape
    L = model.gamma_user.shape[1]
    N = model.n_epochs
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<6I", F, K, L, N, len(model.item_ids), len(model.user_ids)))
        fh.write(np.asarray(model.epoch_table.boundaries, dtype="<i8").tobytes())
        for label in model.epoch_table.labels:
            _write_str(fh, label)
        for iid in model.item_ids:
            _write_str(fh, iid)
        for uid in model.user_ids:
            _write_str(fh, uid)
        for _, block in model.parameter_blocks().items():
            fh.write(np.ascontiguousarray(block, dtype="<f8").tobytes())


def load_model(path) -> FashionModel:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MODEL_MAGIC:
            raise ModelFormatError(f"bad magic header: {magic!r}")
        F, K, L, N, n_items, n_users = struct.unpack("<6I", fh.read(24))
        boundaries = np.frombuffer(fh.read(8 * (N + 1)), dtype="<i8").tolist()
        labels = [_read_str(fh) for _ in range(N)]
        item_ids = [_read_str(fh) for _ in range(n_items)]
        user_ids = [_read_str(fh) for _ in range(n_users)]

        def block(shape):
            count = int(np.prod(shape)) if shape else 0
            raw = fh.read(8 * count)
            if len(raw) != 8 * count:
                raise ModelFormatError("truncated parameter block")
            return np.frombuffer(raw, dtype="<f8").reshape(shape).copy()

        E = block((K, F))
        eta_bar = block((N, K))
        bias_base = block((n_items,))
        bias_epoch = block((n_items, N))
        gamma_user = block((n_users, L))
        gamma_item = block((n_items, L))
        delta_user = block((n_users, K))
        trailing = fh.read(1)
        if trailing:
            raise ModelFormatError("trailing bytes after parameter blocks")
    return FashionModel(
        E=E,
        eta_bar=eta_bar,
        bias_base=bias_base,
        bias_epoch=bias_epoch,
        gamma_user=gamma_user,
        gamma_item=gamma_item,
        delta_user=delta_user,
        epoch_table=EpochTable(boundaries=boundaries, labels=labels),
        item_ids=item_ids,
        user_ids=user_ids,
    )
