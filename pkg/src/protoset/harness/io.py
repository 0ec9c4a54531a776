"""JSON Lines pattern files, coreset and prototype sidecars, atomic writes.

Floats are written with Python's shortest round-trip repr, so a write/read
cycle reproduces every coordinate bit for bit.
"""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from ..coreset import Coreset
from ..errors import DataError
from ..prototype import Instance, Prototype

_COMPACT = {"separators": (",", ":")}


def atomic_write(path, data) -> None:
    """Write to a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps_lines(records) -> str:
    return "".join(json.dumps(r, **_COMPACT) + "\n" for r in records)


def _read_lines(path) -> list[dict]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            out.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
    if not out or "meta" not in out[0]:
        raise DataError(f"{path}: first line must be a meta record")
    return out


def write_patterns(path, inst: Instance) -> None:
    atomic_write(path, inst.canonical_bytes())


def read_patterns(path) -> Instance:
    lines = _read_lines(path)
    meta, recs = lines[0]["meta"], lines[1:]
    try:
        n, k, d = int(meta["n"]), int(meta["k"]), int(meta["d"])
    except (KeyError, TypeError, ValueError):
        raise DataError(f"{path}: meta line needs integer n, k, d") from None
    if len(recs) != n:
        raise DataError(f"{path}: meta says n={n} but found {len(recs)} patterns")
    recs = sorted(recs, key=lambda r: r.get("id", -1))
    if [r.get("id") for r in recs] != list(range(n)):
        raise DataError(f"{path}: pattern ids must be 0..{n - 1}")
    points = np.array([r["points"] for r in recs], dtype=np.float64)
    if points.shape != (n, k, d):
        raise DataError(f"{path}: points have shape {points.shape}, meta says {(n, k, d)}")
    weights = None
    if "W" in meta:
        if any("weights" not in r for r in recs):
            raise DataError(f"{path}: weighted file with a pattern lacking weights")
        weights = np.array([r["weights"] for r in recs], dtype=np.int64)
        if np.any(weights.sum(axis=1) != int(meta["W"])):
            raise DataError(f"{path}: pattern weights do not sum to W={meta['W']}")
    return Instance(points, weights)


def write_coreset(path, cs: Coreset) -> None:
    meta = {
        "r": cs.sample_size,
        "T": cs.t_sum,
        "alpha": cs.alpha,
        "pivot": cs.pivot_index,
        "delta_tilde": cs.delta_tilde,
        "seed": cs.seed,
        "fingerprint": cs.fingerprint,
    }
    recs = [{"meta": meta}] + [{"index": i, "weight": w} for i, w in cs.entries]
    atomic_write(path, dumps_lines(recs))


def read_coreset(path) -> Coreset:
    lines = _read_lines(path)
    meta, recs = lines[0]["meta"], lines[1:]
    if len(recs) != meta.get("r"):
        raise DataError(f"{path}: meta says r={meta.get('r')} but found {len(recs)} entries")
    try:
        return Coreset(
            indices=np.array([r["index"] for r in recs], dtype=np.int64),
            weights=np.array([r["weight"] for r in recs], dtype=np.float64),
            fingerprint=str(meta["fingerprint"]),
            t_sum=float(meta["T"]),
            alpha=float(meta["alpha"]),
            pivot_index=int(meta["pivot"]),
            delta_tilde=float(meta.get("delta_tilde", 0.0)),
            seed=meta.get("seed"),
        )
    except KeyError as exc:
        raise DataError(f"{path}: missing field {exc}") from None


def prototype_record(q: Prototype, **extra) -> dict:
    rec = dict(extra)
    rec["points"] = q.points.tolist()
    if q.weights is not None:
        rec["weights"] = q.weights.tolist()
    return rec


def write_prototypes(path, prototypes, meta: dict) -> None:
    """``prototypes`` is a sequence of ``(label_fields, Prototype)`` pairs."""
    recs = [{"meta": meta}] + [prototype_record(q, **fields) for fields, q in prototypes]
    atomic_write(path, dumps_lines(recs))


def read_prototypes(path) -> tuple[dict, list[tuple[dict, Prototype]]]:
    lines = _read_lines(path)
    out = []
    for rec in lines[1:]:
        rec = dict(rec)
        points, weights = rec.pop("points"), rec.pop("weights", None)
        out.append((rec, Prototype(points, weights)))
    return lines[0]["meta"], out
