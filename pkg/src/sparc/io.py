"""Serialization: canonical JSON, CSV tables, matrix and message blobs."""
from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .code import CodingMatrix, Message, pm_modulate


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if not math.isfinite(v):
            raise ValueError("non-finite number in serialized output")
        return v
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj))


def read_json(path):
    return json.loads(Path(path).read_text())


def config_hash(cfg: dict) -> str:
    canon = json.dumps(_plain(cfg), sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(canon.encode()).hexdigest()


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def write_trace_csv(path, trace):
    write_csv(path, ["t", "mse", "ser"], trace.rows())


def write_profiles_csv(path, traj):
    traj = np.atleast_2d(np.asarray(traj, dtype=float))
    header = ["t"] + [f"E_{r + 1}" for r in range(traj.shape[1])]
    write_csv(path, header, ([t, *row] for t, row in enumerate(traj)))


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def save_matrix(stem, cm: CodingMatrix):
    """Write ``stem.bin`` (little-endian float64, row-major) and ``stem.json``."""
    stem = Path(stem)
    np.ascontiguousarray(cm.F, dtype="<f8").tofile(stem.with_suffix(".bin"))
    write_json(stem.with_suffix(".json"), cm.header())


def load_matrix(stem) -> CodingMatrix:
    stem = Path(stem)
    h = read_json(stem.with_suffix(".json"))
    F = np.fromfile(stem.with_suffix(".bin"), dtype="<f8").reshape(h["M"], h["N"])
    return CodingMatrix(F.astype(float), h["ensemble"], h["gamma"], h["w"], h["seed"])


def save_message(stem, msg: Message):
    """Packed information bits in ``stem.bin`` plus ``stem.json`` metadata."""
    stem = Path(stem)
    np.packbits(msg.u).tofile(stem.with_suffix(".bin"))
    write_json(stem.with_suffix(".json"), {
        "L": msg.L, "B": msg.B, "n_bits": int(msg.u.size),
        "known": np.flatnonzero(msg.known).tolist(),
    })


def load_message(stem) -> Message:
    stem = Path(stem)
    h = read_json(stem.with_suffix(".json"))
    bits = np.unpackbits(np.fromfile(stem.with_suffix(".bin"), dtype=np.uint8))[: h["n_bits"]]
    msg = pm_modulate(bits, h["B"], h["L"])
    msg.known[h["known"]] = True
    return msg
