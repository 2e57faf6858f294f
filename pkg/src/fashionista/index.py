"""Immutable in-memory indices and the query operations over them.

An IndexSet bundles everything the service reads at query time: a
character trie over item ids for autocompletion, a category inverted
index, per-item per-epoch fashionability scores with global percentile
cut-points, style-space positions, and the frozen 2D map. Build once,
then query from any number of threads; nothing here mutates after build.

Filtered k-NN follows a single pass over the candidate postings with a
bounded max-heap of size k: candidates below the fashionability
percentile threshold are dropped, the rest ranked by Euclidean distance
between style positions with ties broken by item id ascending.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .data import Item
from .model import FashionModel, fashionability
from .prng import PCG32
from .tsne import Embedding2D


class InconsistentInputs(ValueError):
    pass


class UnknownItem(KeyError):
    pass


class NoCandidates(LookupError):
    pass


class InvalidQuery(ValueError):
    pass


class InvalidViewport(ValueError):
    pass


class _TrieNode:
    __slots__ = ("children", "item_index", "image_ref")

    def __init__(self):
        self.children = {}
        self.item_index = None
        self.image_ref = None


class Trie:
    """Character trie over item ids; terminals carry index and thumbnail ref."""

    def __init__(self):
        self.root = _TrieNode()

    def insert(self, item_id: str, item_index: int, image_ref: Optional[str]) -> None:
        node = self.root
        for ch in item_id:
            node = node.children.setdefault(ch, _TrieNode())
        node.item_index = item_index
        node.image_ref = image_ref

    def lookup(self, item_id: str) -> Optional[int]:
        node = self._walk(item_id)
        return node.item_index if node is not None else None

    def _walk(self, prefix: str) -> Optional[_TrieNode]:
        node = self.root
        for ch in prefix:
            node = node.children.get(ch)
            if node is None:
                return None
        return node

    def complete(self, prefix: str, limit: int):
        """Up to limit (id, index, image_ref) with the prefix, lexicographic.

        Preorder DFS with children visited in character order; since an id
        sorts before its extensions, emission order is ascending.
        """
        start = self._walk(prefix)
        if start is None:
            return []
        out = []
        stack = [(start, prefix)]
        while stack and len(out) < limit:
            node, word = stack.pop()
            if node.item_index is not None:
                out.append((word, node.item_index, node.image_ref))
            # reverse-sorted push so the stack pops ascending
            for ch in sorted(node.children, reverse=True):
                stack.append((node.children[ch], word + ch))
        return out


@dataclass
class Query:
    item_id: str
    k: int = 10
    alpha: float = 0.0
    categories: frozenset = field(default_factory=frozenset)
    epoch: Optional[int] = None  # None = latest

    def validate(self, n_epochs: int) -> None:
        if self.k < 1:
            raise InvalidQuery("k must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidQuery("alpha must be in [0, 1]")
        if self.epoch is not None and not 0 <= self.epoch < n_epochs:
            raise InvalidQuery(f"epoch {self.epoch} not in [0, {n_epochs})")


@dataclass
class ResultEntry:
    item_id: str
    distance: float
    fash_score: float
    fash_rank: int
    x: float
    y: float
    approx_coords: bool
    metadata: dict


@dataclass
class QueryResult:
    query_item: str
    epoch: int
    threshold: float
    entries: list


class IndexSet:
    """Immutable bundle of catalog indices; see build_indices."""

    def __init__(self, items, trie, postings, theta, trend, quantiles,
                 sorted_scores, epoch_labels, map_indices, coords, approx_flags):
        self.items = items
        self.id_to_index = {it.id: i for i, it in enumerate(items)}
        self.id_array = np.array([it.id for it in items], dtype=object)
        self.trie = trie
        self.postings = postings
        self.theta = theta
        self.trend = trend
        self.quantiles = quantiles
        self.sorted_scores = sorted_scores
        self.epoch_labels = epoch_labels
        self.map_indices = map_indices
        self.map_index_set = frozenset(int(i) for i in map_indices)
        self.coords = coords
        self.approx_flags = approx_flags

    @property
    def n_items(self) -> int:
        return len(self.items)

    @property
    def n_epochs(self) -> int:
        return len(self.epoch_labels)

    @property
    def latest_epoch(self) -> int:
        return self.n_epochs - 1

    def score_at_percentile(self, alpha: float, epoch: int) -> float:
        """Cut-point for the alpha slider: nearest integer percentile."""
        return float(self.quantiles[epoch][int(round(alpha * 100))])

    def percentile_of(self, score: float, epoch: int) -> float:
        """Share of items scoring <= score at that epoch, as 0..100."""
        pos = np.searchsorted(self.sorted_scores[epoch], score, side="right")
        return 100.0 * float(pos) / self.n_items


def select_map_sample(catalog: Sequence[Item], cap: int, seed: int = 0) -> np.ndarray:
    """Stratified proportional sample of item indices for the 2D map.

    Each item counts toward its lexicographically first category; strata
    get floor-proportional allocations with remainders by largest
    fractional part. Deterministic for a given seed.
    """
    n = len(catalog)
    if n <= cap:
        return np.arange(n, dtype=np.int64)
    strata = {}
    for i, it in enumerate(catalog):
        strata.setdefault(min(it.categories), []).append(i)
    names = sorted(strata)
    fractions = [(name, cap * len(strata[name]) / n) for name in names]
    alloc = {name: int(f) for name, f in fractions}
    leftover = cap - sum(alloc.values())
    by_remainder = sorted(fractions, key=lambda nf: (-(nf[1] - int(nf[1])), nf[0]))
    for name, _ in by_remainder[:leftover]:
        alloc[name] += 1
    rng = PCG32(seed)
    chosen = []
    for name in names:
        members = list(strata[name])
        take = min(alloc[name], len(members))
        # partial Fisher-Yates: first `take` entries become the sample
        for pos in range(take):
            swap = pos + rng.bounded(len(members) - pos)
            members[pos], members[swap] = members[swap], members[pos]
        chosen.extend(members[:take])
    return np.array(sorted(chosen), dtype=np.int64)


def build_indices(catalog: Sequence[Item], model: FashionModel,
                  embedding: Embedding2D, map_indices: Optional[np.ndarray] = None,
                  jitter_seed: int = 7) -> IndexSet:
    """Assemble the immutable IndexSet; idempotent for identical inputs.

    embedding rows correspond to map_indices (all items when omitted).
    Items outside the map sample inherit their nearest sampled neighbor's
    coordinates plus a small deterministic jitter and are flagged approx.
    """
    ids = [it.id for it in catalog]
    if ids != list(model.item_ids):
        raise InconsistentInputs("catalog and model item ids differ")
    n = len(catalog)
    if map_indices is None:
        map_indices = np.arange(n, dtype=np.int64)
    map_indices = np.asarray(map_indices, dtype=np.int64)
    if embedding.coords.shape[0] != map_indices.shape[0]:
        raise InconsistentInputs("embedding does not cover the map sample")

    trie = Trie()
    for i, it in enumerate(catalog):
        trie.insert(it.id, i, it.image_ref)

    postings_lists = {}
    for i, it in enumerate(catalog):
        for cat in it.categories:
            postings_lists.setdefault(cat, []).append(i)
    postings = {cat: np.array(lst, dtype=np.int64) for cat, lst in postings_lists.items()}

    # exact per-item scores: same dot-product path as model.fashionability
    theta = np.empty((n, model.E.shape[0]))
    n_epochs = model.n_epochs
    trend = np.empty((n, n_epochs))
    for i, it in enumerate(catalog):
        theta[i] = model.E @ it.features
        for e in range(n_epochs):
            trend[i, e] = (
                model.bias_base[i] + model.bias_epoch[i, e] + float(model.eta_bar[e] @ theta[i])
            )

    quantiles = np.stack([np.percentile(trend[:, e], np.arange(101)) for e in range(n_epochs)])
    sorted_scores = np.stack([np.sort(trend[:, e]) for e in range(n_epochs)])

    coords = np.empty((n, 2))
    approx = np.ones(n, dtype=bool)
    coords[map_indices] = embedding.coords
    approx[map_indices] = False
    missing = np.flatnonzero(approx)
    if missing.size:
        span = embedding.coords.max(axis=0) - embedding.coords.min(axis=0)
        jitter_scale = 0.005 * float(np.hypot(span[0], span[1])) or 1e-3
        rng = PCG32(jitter_seed)
        sample_theta = theta[map_indices]
        sq_norms = np.sum(sample_theta * sample_theta, axis=1)
        for lo in range(0, missing.size, 1024):
            block = missing[lo : lo + 1024]
            d = sq_norms[None, :] - 2.0 * (theta[block] @ sample_theta.T)
            nearest = np.argmin(d, axis=1)
            coords[block] = embedding.coords[nearest]
        for i in missing:
            jx = (rng.uniform() * 2.0 - 1.0) * jitter_scale
            jy = (rng.uniform() * 2.0 - 1.0) * jitter_scale
            coords[i, 0] += jx
            coords[i, 1] += jy

    return IndexSet(
        items=list(catalog),
        trie=trie,
        postings=postings,
        theta=theta,
        trend=trend,
        quantiles=quantiles,
        sorted_scores=sorted_scores,
        epoch_labels=list(model.epoch_table.labels),
        map_indices=map_indices,
        coords=coords,
        approx_flags=approx,
    )


def autocomplete(trie: Trie, prefix: str, limit: int) -> list:
    """Up to limit {item_id, image_ref} whose id starts with prefix."""
    if limit < 1:
        raise InvalidQuery("limit must be >= 1")
    return [
        {"item_id": word, "image_ref": ref}
        for word, _, ref in trie.complete(prefix, limit)
    ]


class _MaxEntry:
    """Heap wrapper ordering by (distance, id) descending, so heapq's root
    is the worst element currently kept."""

    __slots__ = ("d", "iid", "pos")

    def __init__(self, d, iid, pos):
        self.d = d
        self.iid = iid
        self.pos = pos

    def __lt__(self, other):
        return (self.d, self.iid) > (other.d, other.iid)


def top_k_by_distance_heap(sq_dists: np.ndarray, ids: Sequence[str], k: int) -> list:
    """Single pass with a bounded max-heap of size k; O(C log k).

    Returns [(sq_dist, item_id, position)] ascending by (distance, id).
    """
    heap = []
    d_list = sq_dists.tolist()
    root = None
    for pos, d in enumerate(d_list):
        if root is not None:
            if d > root.d:
                continue
            iid = ids[pos]
            if d == root.d and iid > root.iid:
                continue
            heapq.heappushpop(heap, _MaxEntry(d, iid, pos))
            root = heap[0]
        else:
            heapq.heappush(heap, _MaxEntry(d, ids[pos], pos))
            if len(heap) == k:
                root = heap[0]
    out = [(e.d, e.iid, e.pos) for e in heap]
    out.sort()
    return out


def top_k_by_distance_sort(sq_dists: np.ndarray, ids: Sequence[str], k: int) -> list:
    """Full-sort reference path; must match the heap path exactly."""
    order = sorted(range(len(ids)), key=lambda pos: (sq_dists[pos], ids[pos]))
    return [(float(sq_dists[pos]), ids[pos], pos) for pos in order[:k]]


def _candidate_indices(index_set: IndexSet, categories) -> np.ndarray:
    if not categories:
        return np.arange(index_set.n_items, dtype=np.int64)
    parts = [index_set.postings[c] for c in categories if c in index_set.postings]
    if not parts:
        return np.empty(0, dtype=np.int64)
    return np.unique(np.concatenate(parts))


def knn_query(index_set: IndexSet, query: Query, use_heap: bool = True) -> QueryResult:
    """Fashionability-filtered nearest neighbors of the query item."""
    query.validate(index_set.n_epochs)
    q_idx = index_set.id_to_index.get(query.item_id)
    if q_idx is None:
        raise UnknownItem(query.item_id)
    epoch = index_set.latest_epoch if query.epoch is None else query.epoch
    threshold = index_set.score_at_percentile(query.alpha, epoch)

    cand = _candidate_indices(index_set, query.categories)
    cand = cand[cand != q_idx]
    if cand.size:
        cand = cand[index_set.trend[cand, epoch] >= threshold]
    if cand.size == 0:
        return QueryResult(query_item=query.item_id, epoch=epoch, threshold=threshold, entries=[])

    diffs = index_set.theta[cand] - index_set.theta[q_idx]
    sq_dists = np.einsum("ij,ij->i", diffs, diffs)
    ids = index_set.id_array[cand]
    select = top_k_by_distance_heap if use_heap else top_k_by_distance_sort
    top = select(sq_dists, ids, query.k)

    by_fash = sorted(
        range(len(top)),
        key=lambda r: (-index_set.trend[cand[top[r][2]], epoch], top[r][1]),
    )
    ranks = [0] * len(top)
    for rank, r in enumerate(by_fash, start=1):
        ranks[r] = rank

    entries = []
    for r, (sq_d, iid, pos) in enumerate(top):
        idx = int(cand[pos])
        item = index_set.items[idx]
        entries.append(
            ResultEntry(
                item_id=iid,
                distance=float(np.sqrt(sq_d)),
                fash_score=float(index_set.trend[idx, epoch]),
                fash_rank=ranks[r],
                x=float(index_set.coords[idx, 0]),
                y=float(index_set.coords[idx, 1]),
                approx_coords=bool(index_set.approx_flags[idx]),
                metadata=item.metadata(),
            )
        )
    return QueryResult(query_item=query.item_id, epoch=epoch, threshold=threshold, entries=entries)


def trend_lookup(index_set: IndexSet, item_id: str) -> list:
    """Chronological (epoch_label, score, percentile) for one item."""
    idx = index_set.id_to_index.get(item_id)
    if idx is None:
        raise UnknownItem(item_id)
    return [
        (
            index_set.epoch_labels[e],
            float(index_set.trend[idx, e]),
            index_set.percentile_of(float(index_set.trend[idx, e]), e),
        )
        for e in range(index_set.n_epochs)
    ]


def random_hotspot(index_set: IndexSet, categories=frozenset(), quantile: float = 0.9,
                   seed: int = 0, k: int = 20):
    """Uniformly sample a currently-fashionable item and return its neighborhood."""
    if not 0.0 <= quantile <= 1.0:
        raise InvalidQuery("quantile must be in [0, 1]")
    epoch = index_set.latest_epoch
    threshold = index_set.score_at_percentile(quantile, epoch)
    cand = _candidate_indices(index_set, categories)
    if cand.size:
        cand = cand[index_set.trend[cand, epoch] >= threshold]
    if cand.size == 0:
        raise NoCandidates("no items above the fashionability quantile")
    rng = PCG32(seed)
    pick = int(cand[rng.bounded(cand.size)])
    item_id = index_set.items[pick].id
    neighborhood = knn_query(
        index_set,
        Query(item_id=item_id, k=k, alpha=quantile, categories=frozenset(categories), epoch=epoch),
    )
    return {"item_id": item_id, "neighborhood": neighborhood}


def map_slice(index_set: IndexSet, x_min: float, x_max: float, y_min: float,
              y_max: float, epoch: Optional[int] = None) -> list:
    """Mapped (backdrop) items inside the viewport, with epoch percentiles."""
    if x_min > x_max or y_min > y_max:
        raise InvalidViewport("viewport min exceeds max")
    e = index_set.latest_epoch if epoch is None else epoch
    if not 0 <= e < index_set.n_epochs:
        raise InvalidQuery(f"epoch {e} not in [0, {index_set.n_epochs})")
    out = []
    for i in index_set.map_indices:
        x, y = index_set.coords[i]
        if x_min <= x <= x_max and y_min <= y <= y_max:
            out.append(
                {
                    "item_id": index_set.items[i].id,
                    "x": float(x),
                    "y": float(y),
                    "fash_percentile": index_set.percentile_of(float(index_set.trend[i, e]), e),
                }
            )
    return out
