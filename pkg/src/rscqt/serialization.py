"""JSON interchange for gate sets.

Schema::

    {"dim": 2,
     "rho": [[re, im], ...],                 # d*d entries, row-major
     "povm": {"0": [[re, im], ...], ...},
     "gates": [{"name": "Gx", "hs": [[...], ...]}, ...]}

The reader also accepts matrices nested as ``d x d`` lists of ``[re, im]``
pairs or of real numbers.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .qops import GateSet, validate


def matrix_to_json(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=complex)
    return [[float(z.real), float(z.imag)] for z in m.ravel()]


def matrix_from_json(obj, dim: int, what: str) -> np.ndarray:
    try:
        arr = np.array(obj, dtype=float)
    except (TypeError, ValueError):
        raise ValueError(f"{what}: matrix entries must be numbers or [re, im] pairs") from None
    if arr.shape == (dim * dim, 2):
        z = arr[:, 0] + 1j * arr[:, 1]
    elif arr.shape == (dim, dim, 2):
        z = arr[..., 0] + 1j * arr[..., 1]
    elif arr.shape == (dim, dim):
        z = arr.astype(complex)
    else:
        raise ValueError(f"{what}: expected a {dim}x{dim} matrix, got array of shape {arr.shape}")
    return z.reshape(dim, dim)


def gateset_to_json(s: GateSet) -> dict:
    return {
        "dim": s.dim,
        "rho": matrix_to_json(s.rho),
        "povm": {w: matrix_to_json(e) for w, e in s.povm.items()},
        "gates": [{"name": n, "hs": g.tolist()} for n, g in zip(s.gate_names, s.gates)],
    }


def gateset_from_json(obj: dict, require_physical: bool = False) -> GateSet:
    """Parse the gate-set schema; ``ValueError`` names the first broken invariant."""
    if not isinstance(obj, dict):
        raise ValueError("gate set JSON must be an object")
    for key in ("dim", "rho", "povm", "gates"):
        if key not in obj:
            raise ValueError(f"gate set JSON is missing '{key}'")
    dim = obj["dim"]
    if not isinstance(dim, int) or dim < 2:
        raise ValueError("'dim' must be an integer >= 2")
    rho = matrix_from_json(obj["rho"], dim, "rho")
    if not isinstance(obj["povm"], dict) or not obj["povm"]:
        raise ValueError("'povm' must be a non-empty object mapping outcome labels to matrices")
    povm = {str(k): matrix_from_json(v, dim, f"povm[{k}]") for k, v in obj["povm"].items()}
    if not isinstance(obj["gates"], list) or not obj["gates"]:
        raise ValueError("'gates' must be a non-empty list")
    names, hs = [], []
    for k, g in enumerate(obj["gates"]):
        if not isinstance(g, dict) or "hs" not in g:
            raise ValueError(f"gates[{k}] must be an object with an 'hs' matrix")
        m = np.array(g["hs"], dtype=float)
        if m.shape != (dim * dim, dim * dim):
            raise ValueError(f"gates[{k}].hs must be {dim * dim}x{dim * dim}, got shape {m.shape}")
        names.append(str(g.get("name", f"G{k + 1}")))
        hs.append(m)
    for label, m in [("rho", rho)] + [(f"povm[{k}]", v) for k, v in povm.items()]:
        if np.max(np.abs(m - m.conj().T)) > 1e-10:
            raise ValueError(f"{label} is not Hermitian")
    s = GateSet.from_matrices(rho, povm, hs, names)
    if require_physical:
        report = validate(s)
        if not report.ok:
            raise ValueError(f"gate set is not physical: {report.summary()}")
    return s


def load_gateset(path, require_physical: bool = False) -> GateSet:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON ({exc})") from None
    return gateset_from_json(obj, require_physical)


def save_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


def load_json(path):
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON ({exc})") from None
