"""Desk-scale synthetic corpus generator with planted structure.

Items get raw features f_i = B s_i + noise, where s_i is a low-dimensional
planted style vector and B a random mixing matrix. Users carry planted
style preferences, and community taste drifts linearly per epoch along
configurable per-dimension slopes. Interactions are drawn from per-(user,
epoch) softmax distributions over items, so the generator knows the exact
per-item per-epoch popularity it planted — recorded in PlantedTruth for
recovery tests.

All randomness flows through one PCG32 stream in a fixed, documented draw
order, so a (spec, seed) pair reproduces byte-identical corpora.
"""

from __future__ import annotations

import colorsys
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .data import EpochTable, Interaction, Item, year_start_ts
from .prng import PCG32

CATEGORY_NAMES = [
    "dresses", "shoes", "tops", "pants", "coats", "bags",
    "jewelry", "skirts", "sweaters", "accessories", "scarves", "boots",
]

_BASE36 = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ"


class InvalidSpec(ValueError):
    pass


@dataclass
class SyntheticSpec:
    num_items: int
    num_users: int
    num_interactions: int
    F: int = 64
    K_true: int = 10
    trend_slopes: Optional[Sequence[float]] = None
    seed: int = 0
    num_epochs: int = 4
    start_year: int = 2006
    feature_noise: float = 0.1
    pref_scale: float = 1.0
    community_scale: float = 0.8
    temperature: float = 1.0

    def resolved_slopes(self) -> np.ndarray:
        # default: a third of the style dimensions rise, a third fall, a
        # third stay flat, strongly enough that trends are recoverable
        if self.trend_slopes is None:
            cycle = [1.2, -1.2, 0.0]
            return np.array([cycle[d % 3] for d in range(self.K_true)], dtype=np.float64)
        return np.asarray(self.trend_slopes, dtype=np.float64)

    def validate(self) -> None:
        if min(self.num_items, self.num_users, self.num_interactions) <= 0:
            raise InvalidSpec("num_items, num_users, num_interactions must be positive")
        if self.num_interactions < self.num_users:
            raise InvalidSpec("need at least one interaction per user")
        if not (1 <= self.K_true <= self.F):
            raise InvalidSpec("require 1 <= K_true <= F")
        if self.num_epochs < 1:
            raise InvalidSpec("num_epochs must be >= 1")
        if len(self.resolved_slopes()) != self.K_true:
            raise InvalidSpec("trend_slopes must have K_true entries")
        if self.temperature <= 0:
            raise InvalidSpec("temperature must be positive")


@dataclass
class PlantedTruth:
    item_ids: list
    user_ids: list
    item_styles: np.ndarray      # num_items x K_true
    user_prefs: np.ndarray       # num_users x K_true
    popularity: np.ndarray       # num_items x num_epochs, exact selection shares
    trend_slopes: np.ndarray
    community_base: np.ndarray
    epoch_table: EpochTable


def _epoch_offsets(num_epochs: int) -> np.ndarray:
    """Centered epoch indices so the middle of the corpus is drift-neutral."""
    return np.arange(num_epochs, dtype=np.float64) - (num_epochs - 1) / 2.0


def generate_synthetic(spec: SyntheticSpec):
    """Build (catalog, interactions, PlantedTruth) for a spec; deterministic per seed."""
    spec.validate()
    rng = PCG32(spec.seed)
    n, u_count, k = spec.num_items, spec.num_users, spec.K_true
    slopes = spec.resolved_slopes()

    # Draw order is part of the reproducibility contract:
    # mixing matrix, item styles, feature noise, item ids, categories and
    # metadata, user preferences, community base, then interaction draws.
    # Mixing columns are scaled so feature vectors come out near unit norm,
    # keeping downstream gradient magnitudes sane at any F.
    mixing = rng.normal_array(spec.F * k).reshape(spec.F, k) / np.sqrt(spec.F)
    styles = rng.normal_array(n * k).reshape(n, k) / np.sqrt(k)
    noise = rng.normal_array(n * spec.F).reshape(n, spec.F) * (spec.feature_noise / np.sqrt(spec.F))
    features = styles @ mixing.T + noise

    item_ids = []
    taken = set()
    for _ in range(n):
        while True:
            iid = "B" + "".join(_BASE36[rng.bounded(36)] for _ in range(9))
            if iid not in taken:
                taken.add(iid)
                item_ids.append(iid)
                break

    items = []
    for i in range(n):
        primary = int(np.argmax(styles[i]))
        cats = {CATEGORY_NAMES[primary % len(CATEGORY_NAMES)]}
        if rng.uniform() < 0.3:
            extra = rng.bounded(k)
            cats.add(CATEGORY_NAMES[extra % len(CATEGORY_NAMES)])
        brand = f"brand{rng.bounded(25):02d}" if rng.uniform() < 0.7 else None
        price = round(5.0 + rng.uniform() * 195.0, 2)
        rating = 1.0 + rng.bounded(9) * 0.5 if rng.uniform() < 0.8 else None
        items.append(
            Item(
                id=item_ids[i],
                categories=frozenset(cats),
                brand=brand,
                price=price,
                rating=rating,
                image_ref=f"thumbs/{item_ids[i]}.png",
                features=features[i],
            )
        )

    user_ids = [f"U{idx:06d}" for idx in range(u_count)]
    prefs = rng.normal_array(u_count * k).reshape(u_count, k) * spec.pref_scale
    community_base = rng.normal_array(k) * spec.community_scale

    offsets = _epoch_offsets(spec.num_epochs)
    epoch_weights = community_base[None, :] + offsets[:, None] * slopes[None, :]
    community_scores = styles @ epoch_weights.T  # num_items x num_epochs

    boundaries = [year_start_ts(spec.start_year + e) for e in range(spec.num_epochs + 1)]
    labels = [str(spec.start_year + e) for e in range(spec.num_epochs)]
    epoch_table = EpochTable(boundaries=boundaries, labels=labels)

    # Interaction draws: first (user, epoch) per interaction, then the item
    # selector uniform and the timestamp offset per interaction.
    drawn_users = [rng.bounded(u_count) for _ in range(spec.num_interactions)]
    drawn_epochs = [rng.bounded(spec.num_epochs) for _ in range(spec.num_interactions)]
    selectors = np.empty(spec.num_interactions)
    timestamps = np.empty(spec.num_interactions, dtype=np.int64)
    for idx in range(spec.num_interactions):
        selectors[idx] = rng.uniform()
        e = drawn_epochs[idx]
        span = boundaries[e + 1] - boundaries[e]
        timestamps[idx] = boundaries[e] + rng.bounded(span)

    # Group draws by (user, epoch) so each softmax distribution is built once.
    groups = {}
    for idx in range(spec.num_interactions):
        groups.setdefault((drawn_users[idx], drawn_epochs[idx]), []).append(idx)
    chosen = np.empty(spec.num_interactions, dtype=np.int64)
    for (u, e), idxs in groups.items():
        logits = (styles @ prefs[u] + community_scores[:, e]) / spec.temperature
        logits -= logits.max()
        probs = np.exp(logits)
        cum = np.cumsum(probs)
        cum /= cum[-1]
        picks = np.searchsorted(cum, [selectors[i] for i in idxs], side="right")
        chosen[idxs] = np.minimum(picks, n - 1)

    interactions = [
        Interaction(user=user_ids[drawn_users[idx]], item=item_ids[chosen[idx]],
                    timestamp=int(timestamps[idx]))
        for idx in range(spec.num_interactions)
    ]
    interactions.sort(key=lambda x: (x.timestamp, x.user, x.item))

    # Exact planted popularity: the mean selection probability over users,
    # accumulated in user blocks to keep memory flat at large item counts.
    popularity = np.zeros((n, spec.num_epochs))
    block = 64
    for e in range(spec.num_epochs):
        for lo in range(0, u_count, block):
            hi = min(lo + block, u_count)
            logits = (styles @ prefs[lo:hi].T + community_scores[:, e : e + 1]) / spec.temperature
            logits -= logits.max(axis=0, keepdims=True)
            probs = np.exp(logits)
            probs /= probs.sum(axis=0, keepdims=True)
            popularity[:, e] += probs.sum(axis=1)
    popularity /= u_count

    truth = PlantedTruth(
        item_ids=item_ids,
        user_ids=user_ids,
        item_styles=styles,
        user_prefs=prefs,
        popularity=popularity,
        trend_slopes=slopes,
        community_base=community_base,
        epoch_table=epoch_table,
    )
    return items, interactions, truth


def _join_floats(vals) -> str:
    return ",".join(repr(float(v)) for v in vals)


def write_planted_truth(truth: PlantedTruth, path) -> None:
    et = truth.epoch_table
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("#planted-truth v1\n")
        fh.write(
            f"#dims\t{len(truth.item_ids)}\t{len(truth.user_ids)}"
            f"\t{truth.item_styles.shape[1]}\t{et.n_epochs}\n"
        )
        fh.write("#epochs\t" + ",".join(str(b) for b in et.boundaries) + "\t" + ",".join(et.labels) + "\n")
        fh.write("#slopes\t" + _join_floats(truth.trend_slopes) + "\n")
        fh.write("#community-base\t" + _join_floats(truth.community_base) + "\n")
        for i, iid in enumerate(truth.item_ids):
            fh.write(f"item\t{iid}\t{_join_floats(truth.item_styles[i])}\t{_join_floats(truth.popularity[i])}\n")
        for u, uid in enumerate(truth.user_ids):
            fh.write(f"user\t{uid}\t{_join_floats(truth.user_prefs[u])}\n")


def load_planted_truth(path) -> PlantedTruth:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != "#planted-truth v1":
            raise ValueError(f"unsupported planted-truth header: {header!r}")
        _, n, u, k, n_epochs = fh.readline().rstrip("\n").split("\t")
        n, u, k, n_epochs = int(n), int(u), int(k), int(n_epochs)
        _, bounds_raw, labels_raw = fh.readline().rstrip("\n").split("\t")
        epoch_table = EpochTable(
            boundaries=[int(b) for b in bounds_raw.split(",")],
            labels=labels_raw.split(","),
        )
        slopes = np.array([float(x) for x in fh.readline().rstrip("\n").split("\t")[1].split(",")])
        base = np.array([float(x) for x in fh.readline().rstrip("\n").split("\t")[1].split(",")])
        item_ids, user_ids = [], []
        styles = np.empty((n, k))
        popularity = np.empty((n, n_epochs))
        prefs = np.empty((u, k))
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            if parts[0] == "item":
                idx = len(item_ids)
                item_ids.append(parts[1])
                styles[idx] = [float(x) for x in parts[2].split(",")]
                popularity[idx] = [float(x) for x in parts[3].split(",")]
            elif parts[0] == "user":
                idx = len(user_ids)
                user_ids.append(parts[1])
                prefs[idx] = [float(x) for x in parts[2].split(",")]
    return PlantedTruth(
        item_ids=item_ids,
        user_ids=user_ids,
        item_styles=styles,
        user_prefs=prefs,
        popularity=popularity,
        trend_slopes=slopes,
        community_base=base,
        epoch_table=epoch_table,
    )


def write_thumbnails(catalog: Sequence[Item], truth: PlantedTruth, out_dir) -> None:
    """Solid-color square placeholders keyed by each item's dominant planted style."""
    from PIL import Image

    os.makedirs(out_dir, exist_ok=True)
    k = truth.item_styles.shape[1]
    index_of = {iid: i for i, iid in enumerate(truth.item_ids)}
    for item in catalog:
        s = truth.item_styles[index_of[item.id]]
        hue = int(np.argmax(s)) / k
        strength = min(1.0, float(np.abs(s).max()) * 1.5)
        r, g, b = colorsys.hsv_to_rgb(hue, 0.7, 0.35 + 0.6 * strength)
        img = Image.new("RGB", (24, 24), (int(r * 255), int(g * 255), int(b * 255)))
        img.save(os.path.join(out_dir, f"{item.id}.png"))
