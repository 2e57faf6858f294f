"""Catalog and interaction ingestion, plus epoch segmentation.

File formats are line-oriented UTF-8 text so desk-scale corpora stay
inspectable and diff-able:

    catalog:      id<TAB>cat1|cat2<TAB>brand<TAB>price<TAB>rating<TAB>image_ref<TAB>f1,f2,...
    interactions: user<TAB>item<TAB>unix_ts

Missing optionals are empty strings. Feature values use '.' decimals and
round-trip exactly (written with Python's shortest repr).
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Optional, Sequence, Union

import numpy as np


class MalformedRecord(ValueError):
    def __init__(self, path, line_no, reason):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.line_no = line_no


class DuplicateId(ValueError):
    pass


class InconsistentFeatureDim(ValueError):
    pass


class UnknownItem(KeyError):
    pass


class EmptyInput(ValueError):
    pass


@dataclass
class Item:
    id: str
    categories: frozenset
    brand: Optional[str]
    price: Optional[float]
    rating: Optional[float]
    image_ref: Optional[str]
    features: np.ndarray

    def metadata(self) -> dict:
        return {
            "brand": self.brand,
            "price": self.price,
            "rating": self.rating,
            "categories": sorted(self.categories),
            "image_ref": self.image_ref,
        }


@dataclass(frozen=True, order=True)
class Interaction:
    user: str
    item: str
    timestamp: int


@dataclass
class EpochTable:
    """N contiguous time buckets given by N+1 strictly increasing boundaries."""

    boundaries: list  # unix seconds, length N+1
    labels: list      # display strings, length N

    def __post_init__(self):
        if len(self.boundaries) != len(self.labels) + 1:
            raise ValueError("boundaries must have exactly one more entry than labels")
        if any(b >= a for b, a in zip(self.boundaries, self.boundaries[1:])):
            raise ValueError("boundaries must be strictly increasing")

    @property
    def n_epochs(self) -> int:
        return len(self.labels)

    def epoch_of(self, ts: int) -> int:
        """Index e with boundaries[e] <= ts < boundaries[e+1]."""
        if ts < self.boundaries[0] or ts >= self.boundaries[-1]:
            raise ValueError(f"timestamp {ts} outside epoch range")
        return bisect.bisect_right(self.boundaries, ts) - 1

    def epoch_of_clamped(self, ts: int) -> int:
        """Like epoch_of but out-of-range timestamps clamp to the nearest epoch."""
        if ts < self.boundaries[0]:
            return 0
        if ts >= self.boundaries[-1]:
            return self.n_epochs - 1
        return bisect.bisect_right(self.boundaries, ts) - 1


def _fmt_float(x: float) -> str:
    return repr(float(x))


def _parse_float(text: str, path, line_no, what: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise MalformedRecord(path, line_no, f"bad {what}: {text!r}") from None
    if not np.isfinite(v):
        raise MalformedRecord(path, line_no, f"non-finite {what}: {text!r}")
    return v


def load_catalog(path) -> list:
    """Parse a catalog file into a list of Items.

    Feature dimension is inferred from the first record and enforced for
    the rest. Raises MalformedRecord (with line number), DuplicateId, or
    InconsistentFeatureDim.
    """
    items = []
    seen = set()
    feature_dim = None
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 7:
                raise MalformedRecord(path, line_no, f"expected 7 tab-separated fields, got {len(fields)}")
            item_id, cats_raw, brand, price_raw, rating_raw, image_ref, feats_raw = fields
            if not item_id or not item_id.isalnum():
                raise MalformedRecord(path, line_no, f"bad item id: {item_id!r}")
            if item_id in seen:
                raise DuplicateId(f"{path}:{line_no}: duplicate item id {item_id!r}")
            categories = frozenset(c for c in cats_raw.split("|") if c)
            if not categories:
                raise MalformedRecord(path, line_no, "item has no categories")
            price = _parse_float(price_raw, path, line_no, "price") if price_raw else None
            if price is not None and price < 0:
                raise MalformedRecord(path, line_no, f"negative price: {price}")
            rating = _parse_float(rating_raw, path, line_no, "rating") if rating_raw else None
            if rating is not None and not (1.0 <= rating <= 5.0):
                raise MalformedRecord(path, line_no, f"rating out of [1,5]: {rating}")
            feats = feats_raw.split(",") if feats_raw else []
            features = np.array(
                [_parse_float(f, path, line_no, "feature") for f in feats], dtype=np.float64
            )
            if feature_dim is None:
                feature_dim = features.shape[0]
                if feature_dim == 0:
                    raise MalformedRecord(path, line_no, "empty feature vector")
            elif features.shape[0] != feature_dim:
                raise InconsistentFeatureDim(
                    f"{path}:{line_no}: expected {feature_dim} features, got {features.shape[0]}"
                )
            seen.add(item_id)
            items.append(
                Item(
                    id=item_id,
                    categories=categories,
                    brand=brand or None,
                    price=price,
                    rating=rating,
                    image_ref=image_ref or None,
                    features=features,
                )
            )
    return items


def write_catalog(items: Sequence[Item], path) -> None:
    """Write the canonical catalog form (inverse of load_catalog)."""
    with open(path, "w", encoding="utf-8") as fh:
        for it in items:
            fh.write(
                "\t".join(
                    [
                        it.id,
                        "|".join(sorted(it.categories)),
                        it.brand or "",
                        _fmt_float(it.price) if it.price is not None else "",
                        _fmt_float(it.rating) if it.rating is not None else "",
                        it.image_ref or "",
                        ",".join(_fmt_float(f) for f in it.features),
                    ]
                )
                + "\n"
            )


def load_interactions(path, catalog: Sequence[Item]) -> list:
    """Parse purchase triplets; every item must exist in the catalog.

    Output is sorted by timestamp ascending, ties broken by (user, item).
    """
    known = {it.id for it in catalog}
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise MalformedRecord(path, line_no, f"expected 3 tab-separated fields, got {len(fields)}")
            user, item, ts_raw = fields
            if not user:
                raise MalformedRecord(path, line_no, "empty user id")
            if item not in known:
                raise UnknownItem(f"{path}:{line_no}: unknown item {item!r}")
            try:
                ts = int(ts_raw)
            except ValueError:
                raise MalformedRecord(path, line_no, f"bad timestamp: {ts_raw!r}") from None
            out.append(Interaction(user=user, item=item, timestamp=ts))
    out.sort(key=lambda x: (x.timestamp, x.user, x.item))
    return out


def write_interactions(interactions: Sequence[Interaction], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for x in interactions:
            fh.write(f"{x.user}\t{x.item}\t{x.timestamp}\n")


def year_start_ts(year: int) -> int:
    """Unix seconds at Jan 1 00:00:00 UTC of the given year."""
    return int(datetime(year, 1, 1, tzinfo=timezone.utc).timestamp())


def segment_epochs(interactions: Sequence[Interaction], granularity: Union[str, int]) -> EpochTable:
    """Partition the data's time range into epochs.

    granularity "calendar_year" yields one epoch per UTC calendar year
    touched by the data; an integer N yields N equal-duration epochs
    spanning [min_ts, max_ts + 1).
    """
    if not interactions:
        raise EmptyInput("cannot segment epochs of an empty interaction set")
    timestamps = [x.timestamp for x in interactions]
    lo, hi = min(timestamps), max(timestamps)
    if granularity == "calendar_year":
        first_year = datetime.fromtimestamp(lo, tz=timezone.utc).year
        last_year = datetime.fromtimestamp(hi, tz=timezone.utc).year
        boundaries = [year_start_ts(y) for y in range(first_year, last_year + 2)]
        labels = [str(y) for y in range(first_year, last_year + 1)]
        return EpochTable(boundaries=boundaries, labels=labels)
    if isinstance(granularity, int) and not isinstance(granularity, bool):
        n = granularity
        if n < 1:
            raise ValueError("fixed_count granularity must be >= 1")
        span = hi + 1 - lo
        if span < n:
            raise ValueError(f"cannot split a span of {span} seconds into {n} epochs")
        boundaries = [lo + (span * e) // n for e in range(n + 1)]
        labels = [
            datetime.fromtimestamp(b, tz=timezone.utc).strftime("%Y-%m-%d") for b in boundaries[:-1]
        ]
        return EpochTable(boundaries=boundaries, labels=labels)
    raise ValueError(f"unsupported granularity: {granularity!r}")


def split_holdout(interactions: Sequence[Interaction], fraction: float, seed: int):
    """Deterministic train/held-out split; both halves stay timestamp-sorted."""
    from .prng import PCG32

    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must be in (0, 1)")
    rng = PCG32(seed)
    train, heldout = [], []
    for x in interactions:
        (heldout if rng.uniform() < fraction else train).append(x)
    return train, heldout
