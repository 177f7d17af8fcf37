"""The four UCI benchmark tables: manifest-driven fetching and loading.

A copy of each table ships with the package (``hmit/data``); when its digest
matches the manifest entry it seeds the cache and no network call is made.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import shutil
import tempfile
import urllib.error
import urllib.request
from importlib import resources
from pathlib import Path

from .dataset import CATEGORICAL, CONTINUOUS, AttributeSchema, Dataset, load_table

log = logging.getLogger(__name__)

BENCHMARK_NAMES = ("heart", "tictac", "car", "crx")


class FetchError(RuntimeError):
    pass


class IntegrityError(FetchError):
    pass


def _cat(name, categories=(), is_class=False):
    return AttributeSchema(name, CATEGORICAL, is_class, tuple(categories))


def _num(name):
    return AttributeSchema(name, CONTINUOUS)


_XOB = ("x", "o", "b")

SCHEMAS: dict[str, tuple[AttributeSchema, ...]] = {
    "heart": (
        _num("age"), _cat("sex"), _cat("chest_pain"), _num("rest_bp"),
        _num("cholesterol"), _cat("fasting_sugar"), _cat("rest_ecg"),
        _num("max_hr"), _cat("exercise_angina"), _num("st_depression"),
        _cat("st_slope"), _num("major_vessels"), _cat("thal"),
        _cat("class", ("1", "2"), is_class=True),
    ),
    "tictac": tuple(
        _cat(n, _XOB) for n in ("tl", "tm", "tr", "ml", "mm", "mr", "bl", "bm", "br")
    ) + (_cat("class", ("positive", "negative"), is_class=True),),
    "car": (
        _cat("buying", ("vhigh", "high", "med", "low")),
        _cat("maint", ("vhigh", "high", "med", "low")),
        _cat("doors", ("2", "3", "4", "5more")),
        _cat("persons", ("2", "4", "more")),
        _cat("lug_boot", ("small", "med", "big")),
        _cat("safety", ("low", "med", "high")),
        _cat("class", ("unacc", "acc", "good", "vgood"), is_class=True),
    ),
    "crx": tuple(
        _num(f"A{j}") if j in (2, 3, 8, 11, 14, 15) else _cat(f"A{j}", ("+", "-") if j == 16 else (), j == 16)
        for j in range(1, 17)
    ),
}

DELIMITERS = {"heart": " "}


def default_cache_dir() -> Path:
    env = os.environ.get("HMIT_CACHE_DIR")
    if env:
        return Path(env)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "hmit"


def bundled_manifest_path() -> Path:
    return Path(str(resources.files("hmit") / "data" / "manifest.json"))


def bundled_path(filename: str) -> Path:
    return Path(str(resources.files("hmit") / "data" / filename))


def read_manifest(manifest: str | os.PathLike | None = None) -> dict:
    path = bundled_manifest_path() if manifest is None else Path(manifest)
    with open(path, encoding="utf-8") as fh:
        entries = json.load(fh)
    for name, entry in entries.items():
        if "url" not in entry or "sha256" not in entry:
            raise ValueError(f"manifest entry {name!r} needs 'url' and 'sha256'")
    return entries


def sha256_of(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _download(name: str, url: str, dest: Path, timeout: float) -> None:
    tmp = tempfile.NamedTemporaryFile(dir=dest.parent, delete=False, suffix=".part")
    try:
        with tmp, urllib.request.urlopen(url, timeout=timeout) as resp:
            shutil.copyfileobj(resp, tmp)
    except (urllib.error.URLError, OSError, ValueError) as exc:
        Path(tmp.name).unlink(missing_ok=True)
        raise FetchError(f"{name}: download from {url} failed: {exc}") from exc
    os.replace(tmp.name, dest)


def fetch_benchmarks(
    manifest: str | os.PathLike | None = None,
    cache_dir: str | os.PathLike | None = None,
    names=None,
    *,
    use_bundled: bool = True,
    timeout: float = 30.0,
) -> dict[str, Path]:
    """Make every manifest dataset available locally and return its path.

    Lookup order per dataset: verified cache entry, bundled copy with a
    matching digest, HTTP(S) download. Downloads are checksum-verified; a bad
    file is deleted and :class:`IntegrityError` raised.
    """
    entries = read_manifest(manifest)
    cache = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    cache.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name in names or list(entries):
        if name not in entries:
            raise FetchError(f"{name}: not listed in manifest")
        entry = entries[name]
        filename = entry.get("filename") or entry["url"].rstrip("/").rsplit("/", 1)[-1]
        dest = cache / f"{name}-{filename}"
        want = entry["sha256"].lower()
        if dest.exists():
            if sha256_of(dest) == want:
                paths[name] = dest
                continue
            log.warning("%s: cached file has a stale digest, refetching", name)
            dest.unlink()
        bundled = bundled_path(filename)
        if use_bundled and bundled.is_file() and sha256_of(bundled) == want:
            shutil.copyfile(bundled, dest)
        else:
            log.info("%s: downloading %s", name, entry["url"])
            _download(name, entry["url"], dest, timeout)
        got = sha256_of(dest)
        if got != want:
            dest.unlink()
            raise IntegrityError(f"{name}: sha256 {got} does not match manifest {want}")
        paths[name] = dest
    return paths


def load_benchmark(name: str, path: str | os.PathLike | None = None) -> Dataset:
    """Load one of the benchmark tables with its typed schema."""
    if name not in SCHEMAS:
        raise KeyError(f"unknown benchmark {name!r}; choose from {', '.join(BENCHMARK_NAMES)}")
    if path is None:
        path = fetch_benchmarks(names=[name])[name]
    return load_table(
        path,
        "csv",
        SCHEMAS[name],
        header=False,
        delimiter=DELIMITERS.get(name, ","),
        provenance=name,
    )
