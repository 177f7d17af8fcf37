"""Frequent itemsets and single-consequent association rules.

Mining is vertical: each item owns a bitset of the transactions containing
it (a Python ``int``), and the support of an itemset is the population count
of the intersection of its members' bitsets. The search is a depth-first
prefix extension in ascending item order (Eclat).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .dataset import ItemCodebook

__all__ = [
    "Itemset",
    "AssociationRule",
    "MiningParams",
    "ClosureError",
    "count_threshold",
    "mine_frequent",
    "generate_rules",
    "index_by_consequent",
    "format_rule",
    "write_rules",
]


class ClosureError(ValueError):
    """A rule needed the support of a subset the frequent list lacks."""


@dataclass(frozen=True, order=True)
class Itemset:
    items: tuple[int, ...]
    support_count: int

    def __len__(self) -> int:
        return len(self.items)


@dataclass(frozen=True)
class AssociationRule:
    antecedent: Itemset
    consequent: int
    support_count: int
    confidence: float

    @property
    def antecedent_items(self) -> tuple[int, ...]:
        return self.antecedent.items


@dataclass(frozen=True)
class MiningParams:
    min_sup: float = 0.02
    min_conf: float = 0.60
    max_len: int | None = None

    def __post_init__(self):
        if not 0.0 < self.min_sup <= 1.0:
            raise ValueError(f"min_sup must lie in (0, 1], got {self.min_sup}")
        if not 0.0 < self.min_conf <= 1.0:
            raise ValueError(f"min_conf must lie in (0, 1], got {self.min_conf}")
        if self.max_len is not None and self.max_len < 1:
            raise ValueError("max_len must be positive")


def count_threshold(min_sup: float, n_transactions: int) -> int:
    """Smallest support count meeting ``min_sup``: ``ceil(min_sup * n)``."""
    # 0.1 * 30 == 3.0000000000000004 must still give 3
    return max(1, math.ceil(round(min_sup * n_transactions, 9)))


def _vertical(transactions: Sequence[Iterable[int]]) -> dict[int, int]:
    bits: dict[int, int] = {}
    for t, items in enumerate(transactions):
        mask = 1 << t
        for i in items:
            bits[i] = bits.get(i, 0) | mask
    return bits


def mine_frequent(
    transactions: Sequence[Iterable[int]],
    params: MiningParams,
    codebook: ItemCodebook | None = None,
) -> list[Itemset]:
    """All itemsets with support count >= ``ceil(min_sup * |transactions|)``.

    With a codebook, extensions that would put two items of one attribute in
    the same itemset are never generated. Output is sorted by item tuple.
    """
    n = len(transactions)
    if n == 0:
        return []
    threshold = count_threshold(params.min_sup, n)
    max_len = params.max_len or math.inf
    attr = codebook.attribute_of if codebook is not None else None

    frequent = sorted(
        (i, b) for i, b in _vertical(transactions).items() if b.bit_count() >= threshold
    )
    out: list[Itemset] = []

    def expand(prefix: tuple[int, ...], prefix_attrs: frozenset, tail: list[tuple[int, int]]):
        for pos, (item, bits) in enumerate(tail):
            items = prefix + (item,)
            out.append(Itemset(items, bits.bit_count()))
            if len(items) >= max_len:
                continue
            attrs = prefix_attrs | {attr[item]} if attr is not None else prefix_attrs
            ext = []
            for other, obits in tail[pos + 1:]:
                if attr is not None and attr[other] in attrs:
                    continue
                both = bits & obits
                if both.bit_count() >= threshold:
                    ext.append((other, both))
            if ext:
                expand(items, attrs, ext)

    expand((), frozenset(), frequent)
    out.sort()
    return out


def generate_rules(
    frequent: Sequence[Itemset],
    params: MiningParams,
    codebook: ItemCodebook | None = None,
) -> list[AssociationRule]:
    """Single-consequent rules ``Z - {c} -> c`` with confidence >= ``min_conf``.

    Rules whose consequent shares an attribute with the antecedent are not
    emitted. Sorted by ``(consequent, antecedent items)``.
    """
    support = {s.items: s.support_count for s in frequent}
    attr = codebook.attribute_of if codebook is not None else None
    rules = []
    for z in frequent:
        if len(z.items) < 2:
            continue
        for k, c in enumerate(z.items):
            ante = z.items[:k] + z.items[k + 1:]
            if attr is not None and attr[c] in {attr[a] for a in ante}:
                continue
            try:
                ante_sup = support[ante]
            except KeyError:
                raise ClosureError(f"support of subset {ante} is missing from the frequent list") from None
            conf = z.support_count / ante_sup
            if conf >= params.min_conf:
                rules.append(AssociationRule(Itemset(ante, ante_sup), c, z.support_count, conf))
    rules.sort(key=lambda r: (r.consequent, r.antecedent.items))
    return rules


def index_by_consequent(
    rules: Sequence[AssociationRule], codebook: ItemCodebook
) -> dict[int, list[AssociationRule]]:
    """Bucket rules by the attribute of their consequent, keeping input order."""
    buckets: dict[int, list[AssociationRule]] = {}
    for r in rules:
        buckets.setdefault(codebook.attribute_of[r.consequent], []).append(r)
    return buckets


def format_rule(rule: AssociationRule) -> str:
    ante = ",".join(str(i) for i in rule.antecedent.items)
    return f"{ante} => {rule.consequent}  sup={rule.support_count} conf={rule.confidence:.6f}"


def write_rules(rules: Iterable[AssociationRule], fh) -> None:
    for r in rules:
        fh.write(format_rule(r) + "\n")
