"""Tabular datasets: loading, discretization, item encoding and MCAR corruption.

A :class:`Dataset` is an immutable grid of cells. A cell holds a ``str`` token
(categorical attribute), a ``float`` (continuous attribute), an ``int`` bin
index (continuous attribute after :func:`discretize`), or ``None`` when the
value is missing.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import BinaryIO, Sequence, Union

import numpy as np

__all__ = [
    "CATEGORICAL",
    "CONTINUOUS",
    "MISSING_TOKENS",
    "AttributeSchema",
    "Dataset",
    "ItemCodebook",
    "CorruptionMask",
    "DatasetError",
    "ParseError",
    "EmptyDatasetError",
    "SchemaError",
    "CodebookMissError",
    "InfeasibleRateError",
    "load_table",
    "discretize",
    "apply_bins",
    "build_codebook",
    "to_transactions",
    "inject_missing",
]

CATEGORICAL = "categorical"
CONTINUOUS = "continuous"
MISSING_TOKENS = frozenset({"?", ""})

Source = Union[bytes, str, os.PathLike, BinaryIO]


class DatasetError(ValueError):
    pass


class ParseError(DatasetError):
    pass


class EmptyDatasetError(DatasetError):
    pass


class SchemaError(DatasetError):
    pass


class CodebookMissError(DatasetError, KeyError):
    pass


class InfeasibleRateError(DatasetError):
    pass


@dataclass(frozen=True)
class AttributeSchema:
    """One column of a dataset.

    ``bin_edges`` is only set on continuous attributes of a discretized
    dataset. In a schema *hint* passed to :func:`load_table`, an empty
    ``categories`` tuple means "infer from the data".
    """

    name: str
    kind: str = CATEGORICAL
    is_class: bool = False
    categories: tuple[str, ...] = ()
    bin_edges: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in (CATEGORICAL, CONTINUOUS):
            raise SchemaError(f"unknown attribute kind {self.kind!r}")
        object.__setattr__(self, "categories", tuple(self.categories))
        if self.bin_edges is not None:
            if self.kind != CONTINUOUS:
                raise SchemaError(f"{self.name}: bin edges on a categorical attribute")
            edges = tuple(float(e) for e in self.bin_edges)
            if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
                raise SchemaError(f"{self.name}: bin edges must be strictly ascending")
            object.__setattr__(self, "bin_edges", edges)

    @property
    def n_bins(self) -> int:
        return 0 if self.bin_edges is None else len(self.bin_edges) - 1

    @property
    def tokens(self) -> tuple:
        """Discrete tokens of this attribute: categories, or bin indices."""
        if self.kind == CATEGORICAL:
            return self.categories
        if self.bin_edges is None:
            raise SchemaError(f"{self.name}: continuous attribute is not discretized")
        return tuple(range(self.n_bins))

    def midpoint(self, b: int) -> float:
        return (self.bin_edges[b] + self.bin_edges[b + 1]) / 2.0

    def to_dict(self) -> dict:
        d = {"name": self.name, "kind": self.kind, "is_class": self.is_class}
        if self.categories:
            d["categories"] = list(self.categories)
        if self.bin_edges is not None:
            d["bin_edges"] = list(self.bin_edges)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AttributeSchema":
        return cls(
            name=d["name"],
            kind=d.get("kind", CATEGORICAL),
            is_class=bool(d.get("is_class", False)),
            categories=tuple(d.get("categories", ())),
            bin_edges=tuple(d["bin_edges"]) if d.get("bin_edges") is not None else None,
        )


@dataclass(frozen=True)
class Dataset:
    schema: tuple[AttributeSchema, ...]
    cells: tuple[tuple, ...]
    provenance: str = ""

    def __post_init__(self):
        object.__setattr__(self, "schema", tuple(self.schema))
        object.__setattr__(self, "cells", tuple(tuple(r) for r in self.cells))
        m = len(self.schema)
        if sum(a.is_class for a in self.schema) > 1:
            raise SchemaError("at most one class attribute is allowed")
        for i, row in enumerate(self.cells):
            if len(row) != m:
                raise SchemaError(f"row {i} has {len(row)} cells, expected {m}")
        for j, attr in enumerate(self.schema):
            if attr.kind == CATEGORICAL:
                if not attr.categories or len(set(attr.categories)) != len(attr.categories):
                    raise SchemaError(f"{attr.name}: categories must be non-empty and unique")
                allowed = set(attr.categories)
                for i, row in enumerate(self.cells):
                    if row[j] is not None and row[j] not in allowed:
                        raise SchemaError(f"row {i}: {row[j]!r} is not a category of {attr.name}")
            else:
                for i, row in enumerate(self.cells):
                    v = row[j]
                    if v is None:
                        continue
                    if attr.bin_edges is not None:
                        if not (isinstance(v, (int, np.integer)) and 0 <= v < attr.n_bins):
                            raise SchemaError(f"row {i}: {v!r} is not a bin of {attr.name}")
                    elif not math.isfinite(v):
                        raise SchemaError(f"row {i}: non-finite value in {attr.name}")

    @property
    def n_rows(self) -> int:
        return len(self.cells)

    @property
    def n_attributes(self) -> int:
        return len(self.schema)

    @property
    def class_index(self) -> int | None:
        for j, a in enumerate(self.schema):
            if a.is_class:
                return j
        return None

    @property
    def is_discretized(self) -> bool:
        return all(a.kind == CATEGORICAL or a.bin_edges is not None for a in self.schema)

    def column(self, j: int) -> list:
        return [row[j] for row in self.cells]

    def missing_cells(self) -> list[tuple[int, int]]:
        return [(i, j) for i, row in enumerate(self.cells) for j, v in enumerate(row) if v is None]

    def count_missing(self) -> int:
        return sum(v is None for row in self.cells for v in row)

    def with_cells(self, updates: dict[tuple[int, int], object], provenance: str | None = None) -> "Dataset":
        rows = [list(r) for r in self.cells]
        for (i, j), v in updates.items():
            rows[i][j] = v
        return Dataset(self.schema, rows, self.provenance if provenance is None else provenance)


# --------------------------------------------------------------------------- loading


def _read_source(source: Source) -> str:
    if isinstance(source, bytes):
        data = source
    elif isinstance(source, (str, os.PathLike)):
        data = Path(source).read_bytes()
    else:
        data = source.read()
    if isinstance(data, str):
        return data
    return data.decode("utf-8-sig")


def _as_number(token: str) -> float | None:
    try:
        v = float(token)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def _looks_like_header(first: list[str], rest: list[list[str]]) -> bool:
    if any(t in MISSING_TOKENS for t in first) or len(set(first)) != len(first):
        return False
    if not rest:
        return all(_as_number(t) is None for t in first)
    for j, tok in enumerate(first):
        column = {r[j] for r in rest if j < len(r)}
        if tok in column:
            return False
    return all(_as_number(t) is None for t in first)


def _infer_schema(names, columns, hint):
    schema = []
    for j, (name, col) in enumerate(zip(names, columns)):
        known = [t for t in col if t not in MISSING_TOKENS]
        h = hint[j] if hint is not None else None
        if h is not None:
            kind = h.kind
        else:
            kind = CONTINUOUS if known and all(_as_number(t) is not None for t in known) else CATEGORICAL
        if kind == CATEGORICAL:
            cats = tuple(h.categories) if h is not None and h.categories else tuple(sorted(set(known)))
        else:
            cats = ()
        is_class = h.is_class if h is not None else j == len(names) - 1
        schema.append(AttributeSchema(h.name if h is not None else name, kind, is_class, cats))
    return schema


def _convert(schema, rows, row_offset):
    out = []
    for i, row in enumerate(rows):
        conv = []
        for attr, tok in zip(schema, row):
            if tok in MISSING_TOKENS:
                conv.append(None)
            elif attr.kind == CONTINUOUS:
                v = _as_number(tok)
                if v is None:
                    raise ParseError(f"row {i + row_offset}: {tok!r} is not numeric for {attr.name}")
                conv.append(v)
            else:
                conv.append(tok)
        out.append(conv)
    return out


def _parse_csv(text: str, delimiter: str, header: bool | None, hint):
    whitespace = delimiter.isspace() if delimiter else False
    if whitespace:
        rows = [line.split() for line in text.splitlines()]
    else:
        rows = list(csv.reader(io.StringIO(text), delimiter=delimiter))
    numbered = [(n + 1, [t.strip() for t in r]) for n, r in enumerate(rows) if any(t.strip() for t in r)]
    if not numbered:
        raise EmptyDatasetError("input contains no rows")
    width = len(numbered[0][1])
    for lineno, r in numbered:
        if len(r) != width:
            raise ParseError(f"row {lineno}: {len(r)} fields, expected {width}")
    first = numbered[0][1]
    if header is None:
        if hint is not None:
            header = first == [h.name for h in hint]
        else:
            header = _looks_like_header(first, [r for _, r in numbered[1:]])
    data = numbered[1:] if header else numbered
    if not data:
        raise EmptyDatasetError("input contains a header but no data rows")
    if hint is not None and len(hint) != width:
        raise SchemaError(f"schema hint has {len(hint)} attributes, data has {width}")
    names = first if header else [f"A{j + 1}" for j in range(width)]
    body = [r for _, r in data]
    schema = _infer_schema(names, list(zip(*body)), hint)
    return schema, body, data[0][0]


_ARFF_ATTRIBUTE = re.compile(r"""@attribute\s+('(?:[^']|'')*'|"[^"]*"|[^\s{]+)\s*(.*)$""", re.IGNORECASE)


def _split_arff_values(line: str) -> list[str]:
    reader = csv.reader([line], delimiter=",", quotechar="'", skipinitialspace=True)
    return [t.strip().strip('"') for t in next(reader)]


def _parse_arff(text: str, hint):
    names, kinds, cats = [], [], []
    body, first_data_line = [], None
    in_data = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        low = line.lower()
        if in_data:
            if line.startswith("{"):
                raise ParseError(f"row {lineno}: sparse ARFF rows are not supported")
            values = _split_arff_values(line)
            if len(values) != len(names):
                raise ParseError(f"row {lineno}: {len(values)} fields, expected {len(names)}")
            if first_data_line is None:
                first_data_line = lineno
            body.append(values)
        elif low.startswith("@attribute"):
            m = _ARFF_ATTRIBUTE.match(line)
            if m is None:
                raise ParseError(f"row {lineno}: malformed attribute line")
            name, spec = m.group(1), m.group(2).strip()
            if name[0] in "'\"":
                name = name[1:-1].replace(name[0] * 2, name[0])
            names.append(name)
            if spec.startswith("{"):
                inner = spec[1 : spec.rindex("}")]
                kinds.append(CATEGORICAL)
                cats.append(tuple(_split_arff_values(inner)) if inner.strip() else ())
            elif spec.lower() in ("numeric", "real", "integer"):
                kinds.append(CONTINUOUS)
                cats.append(())
            else:
                raise ParseError(f"row {lineno}: unsupported ARFF type {spec!r}")
        elif low.startswith("@data"):
            in_data = True
        elif low.startswith("@relation"):
            continue
        else:
            raise ParseError(f"row {lineno}: unexpected line {line[:40]!r}")
    if not names or not body:
        raise EmptyDatasetError("ARFF input has no attributes or no data")
    if hint is None:
        hint = [
            AttributeSchema(n, k, j == len(names) - 1, c)
            for j, (n, k, c) in enumerate(zip(names, kinds, cats))
        ]
    schema = _infer_schema(names, list(zip(*body)), hint)
    return schema, body, first_data_line


def load_table(
    source: Source,
    format: str = "csv",
    schema_hint: Sequence[AttributeSchema] | None = None,
    *,
    header: bool | None = None,
    delimiter: str = ",",
    provenance: str | None = None,
) -> Dataset:
    """Parse a CSV or ARFF table into a :class:`Dataset`.

    ``'?'`` and empty fields are missing. Without a schema hint a column is
    continuous iff every non-missing token parses as a finite number, and the
    last column is the class. CSV header rows are auto-detected unless
    ``header`` is given; ``delimiter=" "`` splits on runs of whitespace.
    """
    text = _read_source(source)
    if not text.strip():
        raise EmptyDatasetError("input is empty")
    hint = list(schema_hint) if schema_hint is not None else None
    if format == "csv":
        schema, body, offset = _parse_csv(text, delimiter, header, hint)
    elif format == "arff":
        schema, body, offset = _parse_arff(text, hint)
    else:
        raise ValueError(f"unknown format {format!r}")
    rows = _convert(schema, body, offset)
    if provenance is None:
        provenance = str(source) if isinstance(source, (str, os.PathLike)) else f"<{format} stream>"
    return Dataset(tuple(schema), rows, provenance)


# --------------------------------------------------------------------------- discretization


def _edges_for(values: np.ndarray, bins: int, strategy: str) -> tuple[float, ...]:
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        return (lo - 0.5, hi + 0.5)
    if strategy == "equal_width":
        edges = np.linspace(lo, hi, bins + 1)
    elif strategy == "equal_frequency":
        edges = np.quantile(values, np.linspace(0.0, 1.0, bins + 1))
        edges[0], edges[-1] = lo, hi
    else:
        raise ValueError(f"unknown binning strategy {strategy!r}")
    return tuple(float(e) for e in np.unique(edges))


def bin_index(edges: Sequence[float], v: float) -> int:
    """Index of the bin holding ``v``; the last bin is closed, outliers clamp."""
    b = int(np.searchsorted(np.asarray(edges), v, side="right")) - 1
    return min(max(b, 0), len(edges) - 2)


def apply_bins(ds: Dataset, edges: dict[int, tuple[float, ...]]) -> Dataset:
    """Replace continuous values with bin indices under precomputed edges."""
    schema = list(ds.schema)
    for j, e in edges.items():
        schema[j] = replace(schema[j], bin_edges=tuple(e))
    rows = []
    for row in ds.cells:
        new = list(row)
        for j, e in edges.items():
            if new[j] is not None:
                new[j] = bin_index(e, new[j])
        rows.append(new)
    return Dataset(tuple(schema), rows, ds.provenance)


def discretize(
    ds: Dataset, bins: int = 5, strategy: str = "equal_frequency"
) -> tuple[Dataset, dict[int, tuple[float, ...]]]:
    """Bin every continuous attribute; returns the binned dataset and the edges used.

    Edges come from the observed Known values. Equal-frequency edges that
    coincide (heavy ties) are merged, so an attribute may end up with fewer
    than ``bins`` bins. A constant column gets one bin centred on the constant.
    """
    if bins < 1:
        raise ValueError("bins must be >= 1")
    if ds.n_rows == 0:
        raise EmptyDatasetError("cannot discretize an empty dataset")
    edges = {}
    for j, attr in enumerate(ds.schema):
        if attr.kind != CONTINUOUS:
            continue
        if attr.bin_edges is not None:
            raise SchemaError(f"{attr.name} is already discretized")
        known = np.array([v for v in ds.column(j) if v is not None], dtype=float)
        edges[j] = _edges_for(known, bins, strategy) if known.size else (-0.5, 0.5)
    return apply_bins(ds, edges), edges


# --------------------------------------------------------------------------- items


@dataclass(frozen=True)
class ItemCodebook:
    """Dense integer ids for (attribute, token) pairs, assigned attribute-major."""

    items: tuple[tuple[int, object], ...]
    attribute_of: tuple[int, ...] = field(init=False, repr=False)
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        object.__setattr__(self, "attribute_of", tuple(a for a, _ in self.items))
        object.__setattr__(self, "_index", {it: i for i, it in enumerate(self.items)})

    def __len__(self) -> int:
        return len(self.items)

    def encode(self, attribute: int, token) -> int:
        try:
            return self._index[(attribute, token)]
        except KeyError:
            raise CodebookMissError(f"no item for attribute {attribute} token {token!r}") from None

    def decode(self, item: int) -> tuple[int, object]:
        return self.items[item]

    def items_of(self, attribute: int) -> range:
        ids = [i for i, a in enumerate(self.attribute_of) if a == attribute]
        return range(ids[0], ids[-1] + 1) if ids else range(0)

    def label(self, item: int, schema: Sequence[AttributeSchema] | None = None) -> str:
        a, tok = self.items[item]
        name = schema[a].name if schema is not None else str(a)
        return f"{name}={tok}"


def build_codebook(ds: Dataset) -> ItemCodebook:
    if not ds.is_discretized:
        raise SchemaError("dataset must be discretized before item encoding")
    return ItemCodebook(tuple((j, tok) for j, attr in enumerate(ds.schema) for tok in attr.tokens))


def to_transactions(ds: Dataset, cb: ItemCodebook) -> list[frozenset[int]]:
    return [
        frozenset(cb.encode(j, v) for j, v in enumerate(row) if v is not None)
        for row in ds.cells
    ]


# --------------------------------------------------------------------------- corruption


@dataclass(frozen=True)
class CorruptionMask:
    cells: tuple[tuple[int, int], ...]
    truth: dict
    seed: int
    rate: float

    def __len__(self) -> int:
        return len(self.cells)

    def restore(self, ds: Dataset) -> Dataset:
        """Put the ground-truth values back into ``ds``."""
        return ds.with_cells({c: self.truth[c] for c in self.cells})

    def to_json(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "rate": self.rate,
                "cells": [[i, j, self.truth[(i, j)]] for i, j in self.cells],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "CorruptionMask":
        d = json.loads(text)
        cells = tuple((int(i), int(j)) for i, j, _ in d["cells"])
        truth = {(int(i), int(j)): v for i, j, v in d["cells"]}
        return cls(cells, truth, int(d["seed"]), float(d["rate"]))


def _floor_count(rate: float, n: int) -> int:
    # absorb representation error, e.g. 0.29 * 100 == 28.999999999999996
    return int(math.floor(round(rate * n, 9)))


def inject_missing(
    ds: Dataset, rate: float, seed: int, protect_class: bool = True
) -> tuple[Dataset, CorruptionMask]:
    """Blank exactly ``floor(rate * eligible)`` Known cells uniformly at random.

    Cells are visited in a seeded random order; a draw that would leave its
    row without any Known non-class cell is skipped and the next one taken.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError("rate must lie in [0, 1)")
    cls = ds.class_index
    eligible = [
        (i, j)
        for i, row in enumerate(ds.cells)
        for j, v in enumerate(row)
        if v is not None and not (protect_class and j == cls)
    ]
    n_target = _floor_count(rate, len(eligible))
    if n_target == 0:
        return ds, CorruptionMask((), {}, seed, rate)

    known_features = [sum(v is not None for j, v in enumerate(row) if j != cls) for row in ds.cells]
    order = np.random.default_rng(seed).permutation(len(eligible))
    chosen = []
    for idx in order:
        i, j = eligible[idx]
        if j != cls:
            if known_features[i] <= 1:
                continue
            known_features[i] -= 1
        chosen.append((i, j))
        if len(chosen) == n_target:
            break
    else:
        raise InfeasibleRateError(
            f"rate {rate} cannot be met while keeping one known cell per row "
            f"({len(chosen)} of {n_target} cells placed)"
        )
    chosen.sort()
    truth = {c: ds.cells[c[0]][c[1]] for c in chosen}
    corrupted = ds.with_cells({c: None for c in chosen}, provenance=f"{ds.provenance} [mcar {rate} seed {seed}]")
    return corrupted, CorruptionMask(tuple(chosen), truth, seed, rate)
