"""Rebuild the bundled benchmark files in UCI layout from PyPI redistributions.

The UCI archive is not always reachable, so the four benchmark tables are
reconstructed from copies shipped inside two PyPI source distributions:

    Orange-2.7.8.tar.gz   Orange/datasets/{car,tic_tac_toe,crx}.tab
    keel_ds-0.2.5 wheel   keel_ds/data/balanced/raw/heart.dat  (Statlog heart)

Usage::

    python tools/rebuild_benchmarks.py ORANGE_TARBALL KEEL_WHEEL OUT_DIR

Writes car.data, tic-tac-toe.data, crx.data, heart.dat and prints SHA-256
digests for the manifest.
"""

import hashlib
import sys
import tarfile
import zipfile
from pathlib import Path

CAR_TOKENS = {"v-high": "vhigh", "5-more": "5more", "v-good": "vgood"}
TICTAC_CLASS = {"p": "positive", "n": "negative"}
CRX_CLASS = {"+": "+", "-": "-"}


def _orange_rows(tar, name):
    member = tar.getmember(f"Orange-2.7.8/Orange/datasets/{name}.tab")
    lines = tar.extractfile(member).read().decode("utf-8").splitlines()
    # three header lines: names, types, flags
    return [line.split("\t") for line in lines[3:] if line.strip()]


def build(orange_tarball, keel_wheel, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tar = tarfile.open(orange_tarball)

    car = [[CAR_TOKENS.get(v, v) for v in row] for row in _orange_rows(tar, "car")]
    tictac = [row[:-1] + [TICTAC_CLASS[row[-1]]] for row in _orange_rows(tar, "tic_tac_toe")]
    crx = [row[:-1] + [CRX_CLASS[row[-1]]] for row in _orange_rows(tar, "crx")]

    keel = zipfile.ZipFile(keel_wheel).read("keel_ds/data/balanced/raw/heart.dat")
    heart = []
    for line in keel.decode("utf-8").splitlines():
        if not line.strip() or line.startswith("@"):
            continue
        vals = [float(v) for v in line.split(",")]
        vals[9] /= 10.0  # KEEL stores ST depression x10
        heart.append(" ".join(f"{v:.1f}" for v in vals[:-1]) + f" {int(vals[-1])}")

    files = {
        "car.data": "\n".join(",".join(r) for r in car) + "\n",
        "tic-tac-toe.data": "\n".join(",".join(r) for r in tictac) + "\n",
        "crx.data": "\n".join(",".join(r) for r in crx) + "\n",
        "heart.dat": "\n".join(heart) + "\n",
    }
    for name, text in files.items():
        data = text.encode("utf-8")
        (out / name).write_bytes(data)
        print(name, len(text.splitlines()), hashlib.sha256(data).hexdigest())


if __name__ == "__main__":
    build(*sys.argv[1:4])
