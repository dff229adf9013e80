"""Snapshots, CSV tables and the run manifest.

ELAX1 snapshot layout
---------------------
One ASCII header line terminated by ``\\n``::

    ELAX1 dim=<2|3> n=<int> components=<int> real=<0|1> t=<%.17g> norm=forward

followed by ``components * n**dim`` complex coefficients, each stored as two
little-endian IEEE-754 doubles (real part, imaginary part).  Coefficients are
ordered component first, then the grid axes in C (row-major) order, each
axis in FFT order ``0, 1, ..., n/2-1, -n/2, ..., -1``.  ``norm=forward``
means ``exp(i k.x)`` has coefficient exactly 1.
"""

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .spectral import FourierField, GridSpec

MAGIC = "ELAX1"
FLOAT_FORMAT = "%.17g"


def format_float(value):
    return FLOAT_FORMAT % value


def write_snapshot(path, field, t):
    grid = field.grid
    header = (
        f"{MAGIC} dim={grid.dim} n={grid.n} components={field.components} "
        f"real={int(field.real)} t={format_float(t)} norm=forward\n"
    )
    data = np.ascontiguousarray(field.coeffs, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(data.tobytes(order="C"))


def read_snapshot(path):
    """Return ``(field, t)`` from an ELAX1 file."""
    raw = Path(path).read_bytes()
    end = raw.find(b"\n")
    if end < 0:
        raise ConfigurationError(f"{path}: missing ELAX1 header line")
    parts = raw[:end].decode("ascii").split()
    if not parts or parts[0] != MAGIC:
        raise ConfigurationError(f"{path}: not an ELAX1 snapshot")
    meta = dict(p.split("=", 1) for p in parts[1:])
    if meta.get("norm") != "forward":
        raise ConfigurationError(f"{path}: unsupported normalization {meta.get('norm')!r}")
    grid = GridSpec(int(meta["dim"]), int(meta["n"]))
    comps = int(meta["components"])
    data = np.frombuffer(raw[end + 1 :], dtype="<c16")
    if data.size != comps * grid.size:
        raise ConfigurationError(f"{path}: expected {comps * grid.size} coefficients, found {data.size}")
    coeffs = data.reshape((comps,) + grid.shape).astype(np.complex128)
    return FourierField(grid, coeffs, bool(int(meta["real"]))), float(meta["t"])


def write_csv(path, header, rows):
    """Write rows of numbers (or strings) with floats at 17 significant digits."""

    def cell(v):
        if isinstance(v, (float, np.floating)):
            return format_float(v)
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        return str(v)

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([cell(v) for v in row])


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], [[float(v) if _is_number(v) else v for v in row] for row in rows[1:]]


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def sha256_of(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, kind, files):
    """``manifest.json`` with sorted relative paths, sizes and SHA-256 digests."""
    out_dir = Path(out_dir)
    entries = []
    for name in sorted(files):
        p = out_dir / name
        entries.append({"path": name, "bytes": p.stat().st_size, "sha256": sha256_of(p)})
    manifest = {"format": "elax-manifest-1", "kind": kind, "files": entries}
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def verify_manifest(out_dir):
    """Names of manifest entries whose hash no longer matches the file."""
    out_dir = Path(out_dir)
    manifest = json.loads((out_dir / "manifest.json").read_text())
    return [e["path"] for e in manifest["files"] if sha256_of(out_dir / e["path"]) != e["sha256"]]
