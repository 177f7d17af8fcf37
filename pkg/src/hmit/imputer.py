"""Hybrid imputation: rules fired by partial matching first, kNN for the rest.

Rules are mined once from the corrupted table. For each missing cell the
rules whose consequent lies on the cell's attribute are compared against the
row's known items; those matching enough of their antecedent form the fired
set, which votes (categorical) or takes a median of bin midpoints
(continuous). Cells with an empty fired set go to a k-nearest-neighbour
imputer over the heterogeneous Euclidean-overlap distance, and cells with no
donor at all get the attribute's global mode or mean.

Every decision reads only originally known cells, so the result does not
depend on the order in which cells are visited.
"""

from __future__ import annotations

import math
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset import (
    CATEGORICAL,
    Dataset,
    ItemCodebook,
    build_codebook,
    discretize,
    to_transactions,
)
from .mining import (
    AssociationRule,
    MiningParams,
    generate_rules,
    index_by_consequent,
    mine_frequent,
)

__all__ = [
    "HmitConfig",
    "FiredSet",
    "ImputationOutcome",
    "EmptyFiredSetError",
    "NoDonorError",
    "match_fraction",
    "fire_rules",
    "aggregate_categorical",
    "aggregate_continuous",
    "KnnIndex",
    "knn_impute",
    "HybridImputer",
    "impute_all",
    "knn_impute_all",
]

RULE, KNN, GLOBAL_FALLBACK = "rule", "knn", "global_fallback"
PARTIAL, FULL = "partial", "full"
ANTECEDENT, KNOWN_ATTRIBUTES = "antecedent", "known_attributes"


class EmptyFiredSetError(ValueError):
    pass


class NoDonorError(LookupError):
    pass


@dataclass(frozen=True)
class HmitConfig:
    params: MiningParams = field(default_factory=MiningParams)
    p: float = 0.8
    matching: str = PARTIAL
    k: int = 10
    p_denominator: str = ANTECEDENT
    bins: int = 5
    bin_strategy: str = "equal_frequency"

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"p must lie in (0, 1], got {self.p}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.matching not in (PARTIAL, FULL):
            raise ValueError(f"matching must be 'partial' or 'full', got {self.matching!r}")
        if self.p_denominator not in (ANTECEDENT, KNOWN_ATTRIBUTES):
            raise ValueError(f"unknown p_denominator {self.p_denominator!r}")


@dataclass(frozen=True)
class FiredSet:
    target: tuple[int, int] | None
    entries: tuple[tuple[AssociationRule, float], ...] = ()

    def __len__(self) -> int:
        return len(self.entries)

    def __bool__(self) -> bool:
        return bool(self.entries)

    @property
    def rules(self) -> list[AssociationRule]:
        return [r for r, _ in self.entries]


@dataclass(frozen=True)
class ImputationOutcome:
    cell: tuple[int, int]
    value: object
    method: str
    fired_count: int
    elapsed: float = field(default=0.0, compare=False)

    def to_record(self) -> dict:
        return {
            "row": self.cell[0],
            "attribute": self.cell[1],
            "method": self.method,
            "value": self.value,
            "fired_count": self.fired_count,
            "elapsed_us": int(round(self.elapsed * 1e6)),
        }


# --------------------------------------------------------------------------- rule firing


def match_fraction(rule: AssociationRule, known_items, mode: str = ANTECEDENT) -> float:
    ante = rule.antecedent.items
    if not ante:
        raise ValueError("match fraction is undefined for an empty antecedent")
    if not known_items:
        return 0.0
    hits = sum(1 for i in ante if i in known_items)
    denom = len(ante) if mode == ANTECEDENT else len(known_items)
    return hits / denom


def fire_rules(
    rules_for_attr: Sequence[AssociationRule],
    known_items,
    cfg: HmitConfig,
    target: tuple[int, int] | None = None,
) -> FiredSet:
    known = frozenset(known_items)
    entries = []
    for r in rules_for_attr:
        if cfg.matching == FULL:
            if all(i in known for i in r.antecedent.items):
                entries.append((r, 1.0))
            continue
        f = match_fraction(r, known, cfg.p_denominator)
        if f >= cfg.p:
            entries.append((r, f))
    return FiredSet(target, tuple(entries))


def _vote(consequents: np.ndarray, conf: np.ndarray, sup: np.ndarray) -> int:
    """Mode of consequents; ties by summed confidence, summed support, lower id."""
    ids, inverse = np.unique(consequents, return_inverse=True)
    counts = np.bincount(inverse)
    conf_sum = np.bincount(inverse, weights=conf)
    sup_sum = np.bincount(inverse, weights=sup)
    # lexsort: last key is primary
    order = np.lexsort((ids, -sup_sum, -conf_sum, -counts))
    return int(ids[order[0]])


def aggregate_categorical(f: FiredSet) -> int:
    if not f:
        raise EmptyFiredSetError("cannot aggregate an empty fired set")
    rules = f.rules
    return _vote(
        np.array([r.consequent for r in rules]),
        np.array([r.confidence for r in rules], dtype=float),
        np.array([r.support_count for r in rules], dtype=float),
    )


def aggregate_continuous(f: FiredSet, bin_edges: Sequence[float], codebook: ItemCodebook | None = None) -> float:
    """Median of the fired consequents' bin midpoints.

    Consequent items are mapped to bin indices through ``codebook`` when
    given, otherwise the item id is taken to be the bin index.
    """
    if not f:
        raise EmptyFiredSetError("cannot aggregate an empty fired set")
    bins = [codebook.decode(r.consequent)[1] if codebook else r.consequent for r in f.rules]
    mids = [(bin_edges[b] + bin_edges[b + 1]) / 2.0 for b in bins]
    return float(np.median(mids))


# --------------------------------------------------------------------------- kNN


class KnnIndex:
    """Distance computations over the non-class attributes of a dataset.

    Per-attribute distance: categorical 0/1 overlap; continuous absolute
    difference scaled by the observed range and clamped to 1; 1 whenever
    either side is missing. Attribute distances combine Euclidean-style.
    """

    def __init__(self, ds: Dataset):
        self.ds = ds
        self.features = [j for j, a in enumerate(ds.schema) if not a.is_class]
        self._known = [np.array([v is not None for v in ds.column(j)]) for j in range(ds.n_attributes)]
        self._cols = []
        for j in self.features:
            attr = ds.schema[j]
            col = ds.column(j)
            if attr.kind == CATEGORICAL:
                code = {c: k for k, c in enumerate(attr.categories)}
                arr = np.array([-1 if v is None else code[v] for v in col], dtype=np.int64)
                self._cols.append((True, arr, None))
            else:
                arr = np.array([np.nan if v is None else float(v) for v in col], dtype=float)
                known = arr[~np.isnan(arr)]
                span = float(known.max() - known.min()) if known.size else 0.0
                self._cols.append((False, arr, span))

    def squared_distances(self, i: int) -> np.ndarray:
        """Sum of squared per-attribute distances from row ``i`` to every row."""
        n = self.ds.n_rows
        acc = np.zeros(n)
        for categorical, arr, span in self._cols:
            if categorical:
                x = arr[i]
                if x < 0:
                    d = np.ones(n)
                else:
                    d = np.where(arr < 0, 1.0, (arr != x).astype(float))
            else:
                x = arr[i]
                if math.isnan(x):
                    d = np.ones(n)
                else:
                    diff = np.abs(arr - x)
                    if span > 0:
                        diff = np.minimum(diff / span, 1.0)
                    else:
                        diff = np.zeros(n)
                    d = np.where(np.isnan(arr), 1.0, diff)
            acc += d * d
        return acc

    def distance(self, a: int, b: int) -> float:
        return math.sqrt(self.squared_distances(a)[b])

    def neighbours(self, i: int, j: int, k: int, d2: np.ndarray | None = None) -> np.ndarray:
        """Up to ``k`` donor rows for cell (i, j), nearest first, ties by row index."""
        known = self._known[j].copy()
        known[i] = False
        donors = np.flatnonzero(known)
        if donors.size == 0:
            raise NoDonorError(f"no donor row has attribute {j} known")
        if d2 is None:
            d2 = self.squared_distances(i)
        dd = d2[donors]
        if donors.size > k:
            # keep everything tied with the k-th distance so row-order tie-breaks stay exact
            cut = np.partition(dd, k - 1)[k - 1]
            keep = dd <= cut
            donors, dd = donors[keep], dd[keep]
        order = np.argsort(dd, kind="stable")
        return donors[order[:k]]

    def impute(self, i: int, j: int, k: int, d2: np.ndarray | None = None):
        top = self.neighbours(i, j, k, d2)
        attr = self.ds.schema[j]
        values = [self.ds.cells[r][j] for r in top]
        if attr.kind != CATEGORICAL:
            return math.fsum(values) / len(values)
        counts = Counter(values)
        inv_rank = {}
        for rank, v in enumerate(values, start=1):
            inv_rank[v] = inv_rank.get(v, 0.0) + 1.0 / rank
        position = {c: k for k, c in enumerate(attr.categories)}
        return min(counts, key=lambda v: (-counts[v], -inv_rank[v], position[v]))


def knn_impute(target: tuple[int, int], ds: Dataset, cfg: HmitConfig | int, index: KnnIndex | None = None):
    """kNN estimate for one missing cell; raises :class:`NoDonorError` without donors."""
    k = cfg if isinstance(cfg, int) else cfg.k
    index = index or KnnIndex(ds)
    return index.impute(target[0], target[1], k)


def global_fallback(ds: Dataset, j: int):
    attr = ds.schema[j]
    known = [v for v in ds.column(j) if v is not None]
    if attr.kind != CATEGORICAL:
        return math.fsum(known) / len(known) if known else 0.0
    if not known:
        return attr.categories[0]
    counts = Counter(known)
    position = {c: k for k, c in enumerate(attr.categories)}
    return min(counts, key=lambda v: (-counts[v], position[v]))


# --------------------------------------------------------------------------- pipeline


@dataclass
class _Bucket:
    """Rules of one target attribute in array form."""

    rules: list[AssociationRule]
    ante: np.ndarray  # items x rules incidence, float32 so hit counts come from one matmul
    ante_len: np.ndarray
    local: np.ndarray  # consequent token index within the attribute
    n_tokens: int
    midpoint: np.ndarray  # continuous targets only
    confidence: np.ndarray
    support: np.ndarray


class HybridImputer:
    """Mine once with :meth:`fit`, then :meth:`impute` under one or more configs."""

    def __init__(self, cfg: HmitConfig | None = None):
        self.cfg = cfg or HmitConfig()

    def fit(self, corrupted: Dataset) -> "HybridImputer":
        t0 = time.perf_counter()
        self.corrupted = corrupted
        self.discretized, self.bin_edges = discretize(corrupted, self.cfg.bins, self.cfg.bin_strategy)
        self.codebook = build_codebook(self.discretized)
        self.transactions = to_transactions(self.discretized, self.codebook)
        self.frequent = mine_frequent(self.transactions, self.cfg.params, self.codebook)
        self.rules = generate_rules(self.frequent, self.cfg.params, self.codebook)
        self.index = index_by_consequent(self.rules, self.codebook)
        self._incidence = np.zeros((len(self.transactions), len(self.codebook)), dtype=np.float32)
        for t, items in enumerate(self.transactions):
            self._incidence[t, list(items)] = 1.0
        self._n_known = self._incidence.sum(axis=1).astype(np.int64)
        self._buckets = {j: self._bucket(j, rs) for j, rs in self.index.items()}
        self.mine_seconds = time.perf_counter() - t0
        return self

    def _bucket(self, j: int, rules: list[AssociationRule]) -> _Bucket:
        first = self.codebook.items_of(j)
        attr = self.discretized.schema[j]
        ante = np.zeros((len(self.codebook), len(rules)), dtype=np.float32)
        for r, rule in enumerate(rules):
            ante[list(rule.antecedent.items), r] = 1.0
        local = np.array([r.consequent - first.start for r in rules], dtype=np.int64)
        if attr.kind == CATEGORICAL:
            midpoint = np.full(len(rules), np.nan)
        else:
            midpoint = np.array([attr.midpoint(int(b)) for b in local])
        return _Bucket(
            rules=rules,
            ante=ante,
            ante_len=np.array([len(r.antecedent.items) for r in rules], dtype=np.int64),
            local=local,
            n_tokens=len(first),
            midpoint=midpoint,
            confidence=np.array([r.confidence for r in rules], dtype=float),
            support=np.array([r.support_count for r in rules], dtype=float),
        )

    def _fire(self, bucket: _Bucket, rows: np.ndarray, cfg: HmitConfig) -> np.ndarray:
        """Boolean rows x rules matrix of fired rules for one target attribute."""
        # counts are small integers, exact in float32
        hits = (self._incidence[rows] @ bucket.ante).astype(np.int64)
        if cfg.matching == FULL:
            return hits == bucket.ante_len
        if cfg.p_denominator == ANTECEDENT:
            return hits / bucket.ante_len >= cfg.p
        n_known = self._n_known[rows][:, None]
        frac = np.divide(hits, n_known, out=np.zeros(hits.shape), where=n_known > 0)
        return frac >= cfg.p

    def _vote(self, bucket: _Bucket, fired: np.ndarray) -> int:
        local = bucket.local[fired]
        counts = np.bincount(local, minlength=bucket.n_tokens)
        top = np.flatnonzero(counts == counts.max())
        if len(top) == 1:
            return int(top[0])
        conf_sum = np.bincount(local, weights=bucket.confidence[fired], minlength=bucket.n_tokens)
        sup_sum = np.bincount(local, weights=bucket.support[fired], minlength=bucket.n_tokens)
        order = np.lexsort((np.arange(bucket.n_tokens), -sup_sum, -conf_sum, -counts))
        return int(order[0])

    def fired_set(self, cell: tuple[int, int], cfg: HmitConfig | None = None) -> FiredSet:
        """Fired set for one cell, built through the reference :func:`fire_rules`."""
        cfg = cfg or self.cfg
        i, j = cell
        known = {
            self.codebook.encode(a, v)
            for a, v in enumerate(self.discretized.cells[i])
            if v is not None and a != j
        }
        return fire_rules(self.index.get(j, []), known, cfg, cell)

    def _check(self, cfg: HmitConfig):
        if (cfg.params, cfg.bins, cfg.bin_strategy) != (self.cfg.params, self.cfg.bins, self.cfg.bin_strategy):
            raise ValueError("config differs from the fitted mining parameters; refit instead")

    def impute(self, cfg: HmitConfig | None = None) -> tuple[Dataset, list[ImputationOutcome]]:
        cfg = cfg or self.cfg
        self._check(cfg)
        t0 = time.perf_counter()
        ds, schema = self.corrupted, self.corrupted.schema
        cells = ds.missing_cells()
        by_attr: dict[int, list[int]] = {}
        for i, j in cells:
            by_attr.setdefault(j, []).append(i)
        fired_of = {}
        for j, rows in by_attr.items():
            bucket = self._buckets.get(j)
            if bucket is None:
                continue
            chunk = max(1, (1 << 21) // len(bucket.rules))  # bounds the hits matrix
            for lo in range(0, len(rows), chunk):
                part = rows[lo:lo + chunk]
                mask = self._fire(bucket, np.array(part), cfg)
                for r in np.flatnonzero(mask.any(axis=1)):
                    fired_of[(part[r], j)] = np.flatnonzero(mask[r])

        knn, last_row, d2 = None, None, None
        updates, outcomes = {}, []
        for i, j in cells:
            start = time.perf_counter()
            fired = fired_of.get((i, j))
            if fired is not None:
                bucket = self._buckets[j]
                if schema[j].kind == CATEGORICAL:
                    value = schema[j].categories[self._vote(bucket, fired)]
                else:
                    value = float(np.median(bucket.midpoint[fired]))
                method, n_fired = RULE, len(fired)
            else:
                if knn is None:
                    knn = KnnIndex(ds)
                if i != last_row:
                    d2, last_row = knn.squared_distances(i), i
                try:
                    value, method = knn.impute(i, j, cfg.k, d2), KNN
                except NoDonorError:
                    value, method = global_fallback(ds, j), GLOBAL_FALLBACK
                n_fired = 0
            updates[(i, j)] = value
            outcomes.append(ImputationOutcome((i, j), value, method, n_fired, time.perf_counter() - start))
        imputed = ds.with_cells(updates, provenance=f"{ds.provenance} [hmit {cfg.matching}]")
        self.impute_seconds = time.perf_counter() - t0
        return imputed, outcomes


def impute_all(corrupted: Dataset, cfg: HmitConfig | None = None) -> tuple[Dataset, list[ImputationOutcome]]:
    """Run the full hybrid pipeline on every missing cell of ``corrupted``."""
    return HybridImputer(cfg).fit(corrupted).impute()


def knn_impute_all(corrupted: Dataset, k: int = 10) -> tuple[Dataset, list[ImputationOutcome]]:
    """Baseline: kNN (with global fallback) for every missing cell."""
    index = KnnIndex(corrupted)
    updates, outcomes = {}, []
    last_row, d2 = None, None
    for i, j in corrupted.missing_cells():
        start = time.perf_counter()
        if i != last_row:
            d2, last_row = index.squared_distances(i), i
        try:
            value, method = index.impute(i, j, k, d2), KNN
        except NoDonorError:
            value, method = global_fallback(corrupted, j), GLOBAL_FALLBACK
        updates[(i, j)] = value
        outcomes.append(ImputationOutcome((i, j), value, method, 0, time.perf_counter() - start))
    return corrupted.with_cells(updates, provenance=f"{corrupted.provenance} [knn k={k}]"), outcomes
