"""Sweep experiments over the benchmark tables.

A sweep corrupts each dataset at each missing rate with several seeds,
imputes with the requested methods, and scores the result against the
ground truth. The corruption depends only on (master seed, dataset, rate,
replicate), so every method and threshold sees the same holes.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
import statistics
import time
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .benchmarks import BENCHMARK_NAMES, fetch_benchmarks, load_benchmark
from .dataset import CATEGORICAL, CorruptionMask, Dataset, discretize, inject_missing
from .dataset import bin_index
from .imputer import FULL, PARTIAL, GLOBAL_FALLBACK, KNN, RULE, HmitConfig, HybridImputer, knn_impute_all
from .mining import MiningParams

log = logging.getLogger(__name__)

METHODS = ("partial_hmit", "full_hmit", "knn_only")
REPORT_COLUMNS = (
    "dataset", "method", "min_sup", "min_conf", "p", "k", "missing_rate", "seeds",
    "accuracy_mean", "accuracy_sd", "ar_coverage_mean", "nrmse_mean", "mine_ms", "impute_ms",
)


class IncompleteImputationError(ValueError):
    pass


class EmptyMetricsError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    datasets: tuple[str, ...] = BENCHMARK_NAMES
    methods: tuple[str, ...] = METHODS
    min_sup: tuple[float, ...] = (0.02,)
    min_conf: tuple[float, ...] = (0.60,)
    p: tuple[float, ...] = (0.8,)
    k: tuple[int, ...] = (10,)
    missing_rate: tuple[float, ...] = (0.20,)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    master_seed: int = 0
    bins: int = 5
    bin_strategy: str = "equal_frequency"
    protect_class: bool = True

    def __post_init__(self):
        for name in ("datasets", "methods", "min_sup", "min_conf", "p", "k", "missing_rate", "seeds"):
            values = tuple(getattr(self, name))
            if not values:
                raise ValueError(f"axis {name!r} must not be empty")
            object.__setattr__(self, name, values)
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}")

    def points(self):
        """Run coordinates in a fixed order."""
        return itertools.product(
            self.datasets, self.missing_rate, self.seeds, self.min_sup, self.min_conf,
            self.p, self.k, self.methods,
        )

    def n_runs(self) -> int:
        return math.prod(
            len(getattr(self, a))
            for a in ("datasets", "methods", "min_sup", "min_conf", "p", "k", "missing_rate", "seeds")
        )


def standard_sweeps(**overrides) -> dict[str, ExperimentSpec]:
    """The three standard sweeps: support 2-10%, confidence 0.2-1.0, missing rate 10-40%."""
    return {
        "support": ExperimentSpec(min_sup=(0.02, 0.04, 0.06, 0.08, 0.10), **overrides),
        "confidence": ExperimentSpec(min_conf=(0.2, 0.4, 0.6, 0.8, 1.0), **overrides),
        "missing_rate": ExperimentSpec(missing_rate=(0.1, 0.2, 0.3, 0.4), **overrides),
    }


@dataclass
class RunMetrics:
    dataset: str
    method: str
    min_sup: float
    min_conf: float
    p: float
    k: int
    missing_rate: float
    seed: int
    accuracy: float = math.nan
    per_attribute: dict = field(default_factory=dict)
    ar_coverage: float = math.nan
    method_counts: dict = field(default_factory=dict)
    nrmse: float | None = None
    n_missing: int = 0
    mine_ms: float = 0.0
    impute_ms: float = 0.0
    error: str | None = None

    @property
    def coordinates(self) -> tuple:
        return (self.dataset, self.method, self.min_sup, self.min_conf, self.p, self.k, self.missing_rate)


@dataclass(frozen=True)
class Score:
    accuracy: float
    per_attribute: dict
    nrmse: float | None
    n_cells: int


def score(imputed: Dataset, mask: CorruptionMask, bin_edges: Mapping[int, Sequence[float]]) -> Score:
    """Fraction of masked cells recovered.

    Categorical cells must match the original token; continuous cells must
    land in the same bin as the original value. NRMSE is computed over the
    continuous cells, each error scaled by its attribute's binned range.
    """
    if not mask.cells:
        return Score(math.nan, {}, None, 0)
    correct = 0
    per_attr: dict[str, list[int]] = {}
    sq_errors = []
    for i, j in mask.cells:
        value, truth = imputed.cells[i][j], mask.truth[(i, j)]
        if value is None:
            raise IncompleteImputationError(f"masked cell ({i}, {j}) was not imputed")
        attr = imputed.schema[j]
        if attr.kind == CATEGORICAL:
            ok = value == truth
        else:
            edges = bin_edges.get(j)
            ok = bin_index(edges, value) == bin_index(edges, truth) if edges else value == truth
            span = (edges[-1] - edges[0]) if edges else 1.0
            sq_errors.append(((value - truth) / span) ** 2)
        correct += ok
        tally = per_attr.setdefault(attr.name, [0, 0])
        tally[0] += ok
        tally[1] += 1
    nrmse = math.sqrt(math.fsum(sq_errors) / len(sq_errors)) if sq_errors else None
    return Score(
        correct / len(mask.cells),
        {name: c / n for name, (c, n) in per_attr.items()},
        nrmse,
        len(mask.cells),
    )


def run_seed(master_seed: int, dataset: str, rate: float, replicate: int) -> int:
    """Corruption seed for one (dataset, rate, replicate) coordinate."""
    ss = np.random.SeedSequence([master_seed, zlib.crc32(dataset.encode()), round(rate * 1_000_000), replicate])
    return int(ss.generate_state(1)[0])


def _load_all(spec: ExperimentSpec, datasets, manifest, cache_dir) -> dict[str, Dataset]:
    loaded = dict(datasets or {})
    wanted = [d for d in spec.datasets if d not in loaded]
    if wanted:
        paths = fetch_benchmarks(manifest, cache_dir, names=wanted)
        for name in wanted:
            loaded[name] = load_benchmark(name, paths[name])
    return loaded


def _metrics(base: RunMetrics, imputed, outcomes, mask, edges, mine_s, impute_s) -> RunMetrics:
    s = score(imputed, mask, edges)
    masked = set(mask.cells)
    counts = {RULE: 0, KNN: 0, GLOBAL_FALLBACK: 0}
    for o in outcomes:
        if o.cell in masked:
            counts[o.method] += 1
    base.accuracy = s.accuracy
    base.per_attribute = s.per_attribute
    base.nrmse = s.nrmse
    base.n_missing = len(mask.cells)
    base.method_counts = counts
    base.ar_coverage = counts[RULE] / len(mask.cells) if mask.cells else math.nan
    base.mine_ms = mine_s * 1000.0
    base.impute_ms = impute_s * 1000.0
    return base


def run_sweep(
    spec: ExperimentSpec,
    datasets: Mapping[str, Dataset] | None = None,
    manifest=None,
    cache_dir=None,
) -> list[RunMetrics]:
    """Execute every run of ``spec``; failed runs carry ``error`` and are skipped on export."""
    tables = _load_all(spec, datasets, manifest, cache_dir)
    results = []
    corrupted_cache: dict = {}
    fitted: dict = {}
    knn_cache: dict = {}
    for name, rate, rep, sup, conf, p, k, method in spec.points():
        m = RunMetrics(name, method, sup, conf, p, k, rate, rep)
        try:
            ckey = (name, rate, rep)
            if ckey not in corrupted_cache:
                seed = run_seed(spec.master_seed, name, rate, rep)
                corrupted, mask = inject_missing(tables[name], rate, seed, spec.protect_class)
                edges = discretize(corrupted, spec.bins, spec.bin_strategy)[1]
                corrupted_cache = {ckey: (corrupted, mask, edges)}
                fitted.clear()
                knn_cache.clear()
            corrupted, mask, edges = corrupted_cache[ckey]
            if method == "knn_only":
                if k not in knn_cache:
                    t0 = time.perf_counter()
                    imputed, outcomes = knn_impute_all(corrupted, k)
                    knn_cache[k] = (imputed, outcomes, time.perf_counter() - t0)
                imputed, outcomes, elapsed = knn_cache[k]
                results.append(_metrics(m, imputed, outcomes, mask, edges, 0.0, elapsed))
                continue
            cfg = HmitConfig(
                MiningParams(sup, conf),
                p=p if method == "partial_hmit" else 1.0,
                matching=PARTIAL if method == "partial_hmit" else FULL,
                k=k,
                bins=spec.bins,
                bin_strategy=spec.bin_strategy,
            )
            if (sup, conf) not in fitted:
                fitted[(sup, conf)] = HybridImputer(cfg).fit(corrupted)
            imp = fitted[(sup, conf)]
            imputed, outcomes = imp.impute(cfg)
            results.append(_metrics(m, imputed, outcomes, mask, imp.bin_edges, imp.mine_seconds, imp.impute_seconds))
        except Exception as exc:  # recorded, sweep continues
            log.warning("run %s failed: %s", m.coordinates + (rep,), exc)
            m.error = f"{type(exc).__name__}: {exc}"
            results.append(m)
    return results


# --------------------------------------------------------------------------- reporting


def aggregate(metrics: Sequence[RunMetrics], timings: bool = True) -> list[dict]:
    """Seed-average successful runs per coordinate, in first-seen order."""
    groups: dict[tuple, list[RunMetrics]] = {}
    for m in metrics:
        if m.error is None:
            groups.setdefault(m.coordinates, []).append(m)
    rows = []
    for coord, runs in groups.items():
        acc = [r.accuracy for r in runs]
        nrmse = [r.nrmse for r in runs if r.nrmse is not None]
        row = dict(zip(REPORT_COLUMNS[:7], coord))
        row["seeds"] = len(runs)
        row["accuracy_mean"] = statistics.fmean(acc)
        row["accuracy_sd"] = statistics.stdev(acc) if len(acc) > 1 else 0.0
        row["ar_coverage_mean"] = statistics.fmean(r.ar_coverage for r in runs)
        row["nrmse_mean"] = statistics.fmean(nrmse) if nrmse else None
        row["mine_ms"] = statistics.fmean(r.mine_ms for r in runs) if timings else None
        row["impute_ms"] = statistics.fmean(r.impute_ms for r in runs) if timings else None
        rows.append(row)
    return rows


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def export_report(metrics: Sequence[RunMetrics], format: str, out, timings: bool = True) -> Path:
    """Write seed-averaged metrics as CSV (columns :data:`REPORT_COLUMNS`) or JSON.

    With ``timings=False`` the two wall-time columns are left blank, which
    makes the file byte-identical across repeated invocations.
    """
    if not metrics:
        raise EmptyMetricsError("no metrics to export")
    rows = aggregate(metrics, timings)
    if not rows:
        raise EmptyMetricsError("every run failed; nothing to export")
    out = Path(out)
    if format == "csv":
        with open(out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(REPORT_COLUMNS)
            for row in rows:
                w.writerow([_cell(row[c]) for c in REPORT_COLUMNS])
    elif format == "json":
        with open(out, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=1)
            fh.write("\n")
    else:
        raise ValueError(f"unknown report format {format!r}")
    return out


def write_runs_jsonl(metrics: Sequence[RunMetrics], out) -> Path:
    """Per-run metrics, one JSON object per line (includes failed runs)."""
    out = Path(out)
    with open(out, "w", encoding="utf-8") as fh:
        for m in metrics:
            fh.write(json.dumps(asdict(m)) + "\n")
    return out


# --------------------------------------------------------------------------- imputed data


def _arff_token(tok: str) -> str:
    if tok == "" or any(c in tok for c in " ,'\"%{}\t?"):
        return "'" + tok.replace("'", "''") + "'"
    return tok


def _text(v) -> str:
    if v is None:
        return "?"
    return repr(float(v)) if isinstance(v, (float, int, np.floating)) and not isinstance(v, bool) else str(v)


def export_imputed(imputed: Dataset, format: str, out) -> Path:
    """Write a dataset as CSV (with header row) or ARFF for external tools."""
    out = Path(out)
    if format == "csv":
        with open(out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([a.name for a in imputed.schema])
            for row in imputed.cells:
                w.writerow([_text(v) for v in row])
    elif format == "arff":
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(f"@relation {_arff_token(imputed.provenance or 'hmit')}\n\n")
            for a in imputed.schema:
                if a.kind == CATEGORICAL:
                    spec = "{" + ",".join(_arff_token(c) for c in a.categories) + "}"
                else:
                    spec = "numeric"
                fh.write(f"@attribute {_arff_token(a.name)} {spec}\n")
            fh.write("\n@data\n")
            for row in imputed.cells:
                fh.write(",".join("?" if v is None else _arff_token(_text(v)) for v in row) + "\n")
    else:
        raise ValueError(f"unknown export format {format!r}")
    return out


# --------------------------------------------------------------------------- timing


def compare_timing(ds: Dataset, rate: float = 0.2, seed: int = 0, cfg: HmitConfig | None = None, repeats: int = 5) -> dict:
    """Best-of-``repeats`` wall times (ms) for HMiT mining, HMiT imputation and kNN only."""
    cfg = cfg or HmitConfig()
    corrupted, _ = inject_missing(ds, rate, seed)
    mine, hmit, knn = [], [], []
    for _ in range(repeats):
        imp = HybridImputer(cfg).fit(corrupted)
        imp.impute()
        mine.append(imp.mine_seconds)
        hmit.append(imp.impute_seconds)
        t0 = time.perf_counter()
        knn_impute_all(corrupted, cfg.k)
        knn.append(time.perf_counter() - t0)
    best = {"mine_ms": min(mine) * 1e3, "hmit_impute_ms": min(hmit) * 1e3, "knn_ms": min(knn) * 1e3}
    best["hmit_total_ms"] = best["mine_ms"] + best["hmit_impute_ms"]
    return best
