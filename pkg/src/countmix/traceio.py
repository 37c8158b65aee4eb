"""Columnar text persistence for sampled traces.

One file per chain, long format ``param,iteration,value`` with full
binary64 reprs, plus a sha256 checksum manifest so corrupted files are
caught at report time.
"""
from __future__ import annotations

import hashlib
import os

import numpy as np

__all__ = [
    "save_trace",
    "load_trace",
    "write_checksums",
    "verify_checksums",
    "ChecksumError",
]

CHECKSUM_FILE = "checksums.txt"


class ChecksumError(RuntimeError):
    """A persisted trace file fails its recorded checksum."""


def _param_names(k: int, d: int, column_names, zero_inflated: bool):
    names = [f"c[{j}]" for j in range(k)]
    names += [f"beta[{j}].{column_names[dd]}" for j in range(k) for dd in range(d)]
    names += [f"psi[{j}]" for j in range(k)]
    if zero_inflated:
        names += [f"pi[{j}]" for j in range(k)]
    return names


def save_trace(trace, path: str):
    """Write one chain's scalar parameters in long format.

    The per-observation assignment vector z is not persisted (it would
    dwarf the scalar parameters in a text format); reports that need
    assignments use the assignments file written at fit time.
    """
    s_count, k = trace.c.shape
    d = trace.beta.shape[2]
    cols = trace.column_names or tuple(f"x{j}" for j in range(d))
    blocks = [trace.c, trace.beta.reshape(s_count, k * d), trace.psi]
    if trace.pi is not None:
        blocks.append(trace.pi)
    values = np.concatenate(blocks, axis=1)
    names = _param_names(k, d, cols, trace.pi is not None)
    with open(path, "w", newline="\n") as fh:
        fh.write("param,iteration,value\n")
        for j, name in enumerate(names):
            col = values[:, j]
            for it in range(s_count):
                fh.write(f"{name},{it},{float(col[it])!r}\n")


def load_trace(path: str):
    """Read a persisted chain back into arrays keyed c/beta/psi/pi.

    Returns (arrays, column_names); beta has shape (S, K, D).
    """
    per_param: dict[str, list[float]] = {}
    order: list[str] = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "param,iteration,value":
            raise ChecksumError(f"unrecognized trace header in {path}")
        for line in fh:
            name, _, value = line.rstrip("\n").split(",", 2)
            if name not in per_param:
                per_param[name] = []
                order.append(name)
            per_param[name].append(float(value))
    ks = sorted(int(n[2:-1]) for n in order if n.startswith("c["))
    k = len(ks)
    beta_names = [n for n in order if n.startswith("beta[")]
    col_names = []
    for n in beta_names:
        if n.startswith("beta[0]."):
            col_names.append(n.split(".", 1)[1])
    d = len(col_names)
    s_count = len(per_param["c[0]"])
    c = np.column_stack([per_param[f"c[{j}]"] for j in range(k)])
    beta = np.empty((s_count, k, d))
    for j in range(k):
        for dd, col in enumerate(col_names):
            beta[:, j, dd] = per_param[f"beta[{j}].{col}"]
    psi = np.column_stack([per_param[f"psi[{j}]"] for j in range(k)])
    pi = None
    if f"pi[0]" in per_param:
        pi = np.column_stack([per_param[f"pi[{j}]"] for j in range(k)])
    return {"c": c, "beta": beta, "psi": psi, "pi": pi}, tuple(col_names)


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_checksums(directory: str, filenames):
    with open(os.path.join(directory, CHECKSUM_FILE), "w", newline="\n") as fh:
        for name in sorted(filenames):
            fh.write(f"{_sha256(os.path.join(directory, name))}  {name}\n")


def verify_checksums(directory: str):
    manifest = os.path.join(directory, CHECKSUM_FILE)
    if not os.path.exists(manifest):
        raise ChecksumError(f"missing checksum manifest in {directory}")
    with open(manifest) as fh:
        for line in fh:
            digest, name = line.strip().split("  ", 1)
            target = os.path.join(directory, name)
            if not os.path.exists(target):
                raise ChecksumError(f"missing trace file {name}")
            if _sha256(target) != digest:
                raise ChecksumError(f"checksum mismatch for {name}")
