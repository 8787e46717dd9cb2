"""Deterministic persistence: CSV/JSON writers, state snapshots, and run manifests.

All floating output uses 17 significant digits so re-reading is lossless and
identical configs produce bit-identical files.  Writers stage to a ".partial"
path and rename on completion, so an interrupted run never leaves a clean-named
file behind.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field as dc_field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import GridMismatchError, OutputLockError

FLOAT_FMT = "%.17g"


def _fmt(x) -> str:
    return FLOAT_FMT % float(x)


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    tmp = path.with_name(path.name + ".partial")
    with open(tmp, "w") as fh:
        fh.write(text)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)
    return path


def write_fields_csv(path, history) -> Path:
    """fields.csv: one row per (t, k) with the spectral field and density."""
    lines = ["t,k,Re,Im,abs,rho_re,rho_im"]
    for i, t in enumerate(history.times):
        for j, k in enumerate(history.modes):
            e = history.e_hat[i, j]
            r = history.rho_hat[i, j]
            lines.append(",".join([_fmt(t), str(int(k)), _fmt(e.real), _fmt(e.imag),
                                   _fmt(abs(e)), _fmt(r.real), _fmt(r.imag)]))
    return atomic_write_text(path, "\n".join(lines) + "\n")


def write_norms_csv(path, times, lambda_t, f_values, gen0, gen1, gronwall) -> Path:
    """norms.csv on the checkpoint grid; absent diagnostics are written as nan."""
    lines = ["t,lambda_t,F,Gen_alpha0,Gen_alpha1,gronwall_residual"]
    for i, t in enumerate(times):
        row = [_fmt(t), _fmt(lambda_t[i]), _fmt(f_values[i]), _fmt(gen0[i]),
               _fmt(gen1[i]), _fmt(gronwall[i])]
        lines.append(",".join(row))
    return atomic_write_text(path, "\n".join(lines) + "\n")


def write_kernel_csv(path, kernel) -> Path:
    """Green kernel trace: t, Re, Im, fitted envelope."""
    env = kernel.envelope(kernel.times)
    lines = ["t,Re,Im,envelope"]
    for t, v, e in zip(kernel.times, kernel.values, env):
        lines.append(",".join([_fmt(t), _fmt(v.real), _fmt(v.imag), _fmt(e)]))
    return atomic_write_text(path, "\n".join(lines) + "\n")


def write_json(path, payload) -> Path:
    return atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_csv_columns(path) -> dict:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    cols = {name: np.array([float(r[i]) for r in rows]) for i, name in enumerate(header)}
    return cols


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    """Ledger of one run: config identity, produced files, certificate flags."""

    config_hash: str
    code_version: str
    started: str
    finished: str = ""
    files: list = dc_field(default_factory=list)
    flags: dict = dc_field(default_factory=dict)
    exit_status: int = 0

    def add_file(self, path):
        path = Path(path)
        self.files.append({"path": path.name, "size": path.stat().st_size,
                           "sha256": sha256_file(path)})

    def finish(self, status: int = 0):
        self.finished = _now()
        self.exit_status = status

    def to_dict(self):
        return {"config_hash": self.config_hash, "code_version": self.code_version,
                "started": self.started, "finished": self.finished,
                "files": self.files, "flags": self.flags,
                "exit_status": self.exit_status}

    def write(self, path) -> Path:
        return write_json(path, self.to_dict())


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def new_manifest(config_bytes: bytes, code_version: str) -> RunManifest:
    return RunManifest(config_hash=hashlib.sha256(config_bytes).hexdigest(),
                       code_version=code_version, started=_now())


def load_manifest(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def verify_manifest(path) -> list:
    """Check that every listed file exists with a matching checksum."""
    man = load_manifest(path)
    base = Path(path).parent
    problems = []
    for entry in man["files"]:
        p = base / entry["path"]
        if not p.exists():
            problems.append(f"missing file {entry['path']}")
        elif sha256_file(p) != entry["sha256"]:
            problems.append(f"checksum mismatch for {entry['path']}")
    return problems


class OutputLock:
    """Exclusive marker so concurrent runs cannot share an output directory."""

    def __init__(self, directory):
        self.path = Path(directory) / ".lock"

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise OutputLockError(
                f"output directory is locked by another run ({self.path})") from None
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        return self

    def __exit__(self, *exc):
        try:
            self.path.unlink()
        except FileNotFoundError:
            pass
        return False


def compare_histories(cols_a: dict, cols_b: dict, key: str) -> float:
    """Relative sup-norm difference of one CSV column over the common (t, k) grid."""
    for cols in (cols_a, cols_b):
        if key not in cols:
            raise GridMismatchError(f"column {key!r} missing from a compared file")
    def grid_key(cols):
        t_key = np.round(cols["t"] * 1e9).astype(np.int64)
        if "k" in cols:
            return t_key * 10000 + (cols["k"].astype(np.int64) + 5000)
        return t_key

    key_a = grid_key(cols_a)
    key_b = grid_key(cols_b)
    common, ia, ib = np.intersect1d(key_a, key_b, return_indices=True)
    if common.size == 0:
        raise GridMismatchError("compared files share no common grid points")
    va, vb = cols_a[key][ia], cols_b[key][ib]
    scale = max(float(np.max(np.abs(va))), float(np.max(np.abs(vb))), 1e-300)
    return float(np.max(np.abs(va - vb)) / scale)
