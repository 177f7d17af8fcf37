"""Command-line interface: ``hmit {fetch-data,inject,mine,impute,bench}``.

Every option can also come from a flat JSON object given with ``--config``;
keys are flag names without the leading dashes (``min-sup`` or ``min_sup``).
Precedence is flag > config file > built-in default.

Exit status: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .bench import ExperimentSpec, export_imputed, export_report, run_sweep, score, write_runs_jsonl
from .benchmarks import BENCHMARK_NAMES, SCHEMAS, fetch_benchmarks, load_benchmark
from .dataset import AttributeSchema, CorruptionMask, discretize, inject_missing, load_table, build_codebook, to_transactions
from .imputer import HmitConfig, HybridImputer
from .mining import MiningParams, generate_rules, mine_frequent, write_rules

log = logging.getLogger("hmit")

DEFAULTS = {
    "format": "csv",
    "schema": None,
    "min-sup": "2%",
    "min-conf": "60%",
    "p": "0.8",
    "p-denominator": "antecedent",
    "matching": "partial",
    "k": "10",
    "bins": "5",
    "bin-strategy": "freq",
    "rate": "20%",
    "seed": "0",
    "seeds": "5",
    "protect-class": "true",
    "manifest": None,
    "cache-dir": None,
    "report": "csv",
    "timings": "true",
    "datasets": ",".join(BENCHMARK_NAMES),
    "methods": "partial_hmit,full_hmit,knn_only",
    "log": None,
    "mask": None,
    "runs": None,
}

BIN_STRATEGIES = {"width": "equal_width", "freq": "equal_frequency"}
P_DENOMINATORS = {"antecedent": "antecedent", "known": "known_attributes"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def parse_fraction(text) -> float:
    """``0.02`` or ``2%`` -> 0.02."""
    s = str(text).strip()
    try:
        return float(s[:-1]) / 100.0 if s.endswith("%") else float(s)
    except ValueError:
        raise UsageError(f"not a fraction: {text!r}") from None


def _list(text, convert):
    if isinstance(text, (list, tuple)):
        items = list(text)
    else:
        items = [t for t in str(text).split(",") if t.strip()]
    if not items:
        raise UsageError("empty list")
    return tuple(convert(t) for t in items)


def _int(text) -> int:
    try:
        return int(str(text).strip())
    except ValueError:
        raise UsageError(f"not an integer: {text!r}") from None


def _bool(text) -> bool:
    s = str(text).strip().lower()
    if s in ("true", "1", "yes"):
        return True
    if s in ("false", "0", "no"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def _choice(text, mapping, flag):
    if text not in mapping:
        raise UsageError(f"--{flag} must be one of {', '.join(mapping)}")
    return mapping[text]


_COMMON = ("config",)
_DATA_FLAGS = ("in", "format", "schema")
_MINING_FLAGS = ("min-sup", "min-conf", "bins", "bin-strategy")
SUBCOMMANDS = {
    "fetch-data": ("manifest", "cache-dir"),
    "inject": _DATA_FLAGS + ("out", "rate", "seed", "protect-class", "mask"),
    "mine": _DATA_FLAGS + _MINING_FLAGS + ("out",),
    "impute": _DATA_FLAGS + _MINING_FLAGS
    + ("p", "p-denominator", "matching", "k", "out", "log", "mask"),
    "bench": _MINING_FLAGS
    + ("datasets", "methods", "p", "k", "rate", "seed", "seeds", "protect-class",
       "manifest", "cache-dir", "report", "out", "timings", "runs"),
}

HELP = {
    "in": "input table (path, or a benchmark name: heart, tictac, car, crx)",
    "out": "output path",
    "format": "input table format {csv,arff}",
    "schema": "JSON file with a list of attribute objects {name, kind, is_class, categories}; "
    "defaults to <in>.schema.json when that file exists",
    "min-sup": "minimum support, 0.02 or 2%% (bench: comma list)",
    "min-conf": "minimum confidence, 0.6 or 60%% (bench: comma list)",
    "p": "partial-matching threshold in (0,1] (bench: comma list)",
    "p-denominator": "{antecedent,known}: what the matched-item count is divided by",
    "matching": "{partial,full}",
    "k": "neighbours for the kNN fallback (bench: comma list)",
    "bins": "bins per continuous attribute",
    "bin-strategy": "{width,freq}",
    "rate": "fraction of eligible cells to blank (bench: comma list)",
    "seed": "random seed (bench: master seed)",
    "seeds": "bench replicates: a count N (0..N-1) or a comma list",
    "protect-class": "{true,false}: never blank the class attribute",
    "manifest": "dataset manifest JSON (default: bundled)",
    "cache-dir": "download cache (default: $HMIT_CACHE_DIR or ~/.cache/hmit)",
    "report": "{csv,json} report format",
    "timings": "{true,false}: include wall-time columns in the report",
    "datasets": "comma list of benchmark names",
    "methods": "comma list of partial_hmit, full_hmit, knn_only",
    "log": "outcome log path (JSON lines; default <out>.outcomes.jsonl)",
    "mask": "corruption mask JSON (inject: written; impute: read to score)",
    "runs": "optional per-run metrics JSON-lines path",
    "config": "flat JSON config file; flags override it",
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hmit", description="Hybrid association-rule / kNN missing-value imputation.")
    parser.add_argument("--version", action="version", version=f"hmit {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, flags in SUBCOMMANDS.items():
        sp = sub.add_parser(name)
        for flag in flags + _COMMON:
            default = DEFAULTS.get(flag)
            suffix = f" (default: {default})" if default is not None else ""
            sp.add_argument(f"--{flag}", dest=flag.replace("-", "_"), default=None, help=HELP[flag] + suffix)
    return parser


def resolve(ns: argparse.Namespace, command: str) -> dict:
    """Merge flags, config file and defaults for ``command``."""
    allowed = SUBCOMMANDS[command]
    config = {}
    if ns.config:
        try:
            raw = json.loads(Path(ns.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {ns.config}: {exc}") from None
        if not isinstance(raw, dict):
            raise UsageError("config file must hold one JSON object")
        for key, value in raw.items():
            flag = key.replace("_", "-")
            if flag not in allowed:
                raise UsageError(f"config key {key!r} is not an option of {command}")
            config[flag] = value
    opts = {}
    for flag in allowed:
        value = getattr(ns, flag.replace("-", "_"))
        if value is None:
            value = config.get(flag, DEFAULTS.get(flag))
        opts[flag] = value
    return opts


def _schema(path):
    if path is None:
        return None
    entries = json.loads(Path(path).read_text(encoding="utf-8"))
    return [AttributeSchema.from_dict(e) for e in entries]


def _sidecar(path) -> Path:
    return Path(path).with_suffix(".schema.json")


def _load(opts):
    src = opts["in"]
    if src is None:
        raise UsageError("--in is required")
    if not Path(src).exists() and src in SCHEMAS:
        return load_benchmark(src, fetch_benchmarks(names=[src])[src])
    fmt = _choice(opts["format"], {"csv": "csv", "arff": "arff"}, "format")
    schema = opts["schema"]
    if schema is None and _sidecar(src).is_file():
        schema = _sidecar(src)
    return load_table(src, fmt, _schema(schema))


def _config(opts) -> HmitConfig:
    return HmitConfig(
        MiningParams(parse_fraction(opts["min-sup"]), parse_fraction(opts["min-conf"])),
        p=parse_fraction(opts.get("p") or DEFAULTS["p"]),
        matching=_choice(opts.get("matching") or "partial", {"partial": "partial", "full": "full"}, "matching"),
        k=_int(opts.get("k") or DEFAULTS["k"]),
        p_denominator=_choice(opts.get("p-denominator") or "antecedent", P_DENOMINATORS, "p-denominator"),
        bins=_int(opts["bins"]),
        bin_strategy=_choice(opts["bin-strategy"], BIN_STRATEGIES, "bin-strategy"),
    )


def _out_format(path) -> str:
    return "arff" if str(path).lower().endswith(".arff") else "csv"


def cmd_fetch(opts, out) -> int:
    paths = fetch_benchmarks(opts["manifest"], opts["cache-dir"])
    for name, path in paths.items():
        print(f"{name}\t{path}", file=out)
    return 0


def cmd_inject(opts, out) -> int:
    if not opts["out"]:
        raise UsageError("--out is required")
    ds = _load(opts)
    corrupted, mask = inject_missing(ds, parse_fraction(opts["rate"]), _int(opts["seed"]), _bool(opts["protect-class"]))
    export_imputed(corrupted, _out_format(opts["out"]), opts["out"])
    # CSV cannot carry kinds or category order; keep them next to the table
    schema = [a.to_dict() for a in corrupted.schema]
    _sidecar(opts["out"]).write_text(json.dumps(schema, indent=1) + "\n", encoding="utf-8")
    mask_path = opts["mask"] or str(Path(opts["out"]).with_suffix(".mask.json"))
    Path(mask_path).write_text(mask.to_json() + "\n", encoding="utf-8")
    log.info("blanked %d cells; mask written to %s", len(mask), mask_path)
    return 0


def cmd_mine(opts, out) -> int:
    cfg = _config(opts)
    ds, _ = discretize(_load(opts), cfg.bins, cfg.bin_strategy)
    cb = build_codebook(ds)
    frequent = mine_frequent(to_transactions(ds, cb), cfg.params, cb)
    rules = generate_rules(frequent, cfg.params, cb)
    log.info("%d frequent itemsets, %d rules", len(frequent), len(rules))
    if opts["out"]:
        with open(opts["out"], "w", encoding="utf-8") as fh:
            write_rules(rules, fh)
    else:
        write_rules(rules, out)
    return 0


def cmd_impute(opts, out) -> int:
    if not opts["out"]:
        raise UsageError("--out is required")
    cfg = _config(opts)
    corrupted = _load(opts)
    imp = HybridImputer(cfg).fit(corrupted)
    imputed, outcomes = imp.impute()
    export_imputed(imputed, _out_format(opts["out"]), opts["out"])
    log_path = opts["log"] or str(Path(opts["out"]).with_suffix(".outcomes.jsonl"))
    with open(log_path, "w", encoding="utf-8") as fh:
        for o in outcomes:
            fh.write(json.dumps(o.to_record()) + "\n")
    n_rule = sum(o.method == "rule" for o in outcomes)
    log.info("%d cells imputed, %d by rules, %d rules mined", len(outcomes), n_rule, len(imp.rules))
    if opts["mask"]:
        mask = CorruptionMask.from_json(Path(opts["mask"]).read_text(encoding="utf-8"))
        s = score(imputed, mask, imp.bin_edges)
        print(f"accuracy\t{s.accuracy:.6f}\nmasked_cells\t{s.n_cells}", file=out)
    return 0


def cmd_bench(opts, out) -> int:
    seeds = opts["seeds"]
    seeds = tuple(range(_int(seeds))) if "," not in str(seeds) and not isinstance(seeds, list) else _list(seeds, _int)
    spec = ExperimentSpec(
        datasets=_list(opts["datasets"], str.strip),
        methods=_list(opts["methods"], str.strip),
        min_sup=_list(opts["min-sup"], parse_fraction),
        min_conf=_list(opts["min-conf"], parse_fraction),
        p=_list(opts["p"], parse_fraction),
        k=_list(opts["k"], _int),
        missing_rate=_list(opts["rate"], parse_fraction),
        seeds=seeds,
        master_seed=_int(opts["seed"]),
        bins=_int(opts["bins"]),
        bin_strategy=_choice(opts["bin-strategy"], BIN_STRATEGIES, "bin-strategy"),
        protect_class=_bool(opts["protect-class"]),
    )
    fmt = _choice(opts["report"], {"csv": "csv", "json": "json"}, "report")
    log.info("running %d runs", spec.n_runs())
    metrics = run_sweep(spec, manifest=opts["manifest"], cache_dir=opts["cache-dir"])
    failed = [m for m in metrics if m.error]
    for m in failed:
        log.error("run failed %s: %s", m.coordinates, m.error)
    target = opts["out"] or f"report.{fmt}"
    export_report(metrics, fmt, target, timings=_bool(opts["timings"]))
    if opts["runs"]:
        write_runs_jsonl(metrics, opts["runs"])
    print(target, file=out)
    return 0


COMMANDS = {"fetch-data": cmd_fetch, "inject": cmd_inject, "mine": cmd_mine, "impute": cmd_impute, "bench": cmd_bench}


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.command is None:
            raise UsageError(parser.format_usage().rstrip() + "\nsubcommands: " + ", ".join(SUBCOMMANDS))
        logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, stream=err, format="%(levelname)s %(message)s")
        opts = resolve(ns, ns.command)
        return COMMANDS[ns.command](opts, out)
    except UsageError as exc:
        print(str(exc).rstrip(), file=err)
        return 1
    except Exception as exc:
        print(f"hmit: error: {exc}", file=err)
        return 2


if __name__ == "__main__":
    sys.exit(main())
