"""File formats: CSV data interchange, the versioned model file, reports.

CSV uses a mandatory header and '.' decimal points, no locale handling.
Model files are YAML with an explicit format/version pair; unknown fields
are rejected loudly so stale tooling cannot silently misread newer files.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import yaml

from .identify import DataSet
from .poly import AffineScaler, BasisTerm, PolyModel

MODEL_FORMAT = "nic-model"
MODEL_VERSION = 1

_MODEL_KEYS = {
    "format", "version", "order", "degree", "scaler", "terms",
    "rho_y", "rho_u", "eta", "gamma_y", "rho",
}


class FileFormatError(ValueError):
    pass


def write_dataset_csv(path, data: DataSet) -> None:
    """Rows t,u,y with t increasing; the newest sample is t = 0."""
    path = Path(path)
    L = data.length
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "u", "y"])
        for i in range(L):
            w.writerow([i - (L - 1), repr(float(data.u[i])), repr(float(data.y[i]))])


def load_dataset_csv(path, sample_time: float = 1.0) -> DataSet:
    path = Path(path)
    u, y = [], []
    with path.open("r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise FileFormatError(f"{path}:1: empty file, expected header t,u,y")
        if [h.strip() for h in header] != ["t", "u", "y"]:
            raise FileFormatError(f"{path}:1: expected header t,u,y, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise FileFormatError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
            try:
                u.append(float(row[1]))
                y.append(float(row[2]))
            except ValueError as exc:
                raise FileFormatError(f"{path}:{lineno}: non-numeric value ({exc})") from None
    if len(u) < 2:
        raise FileFormatError(f"{path}: need at least two data rows, found {len(u)}")
    return DataSet(u=np.asarray(u), y=np.asarray(y), sample_time=sample_time)


def _plain(value):
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def write_yaml(path, payload: dict) -> None:
    with Path(path).open("w") as fh:
        yaml.safe_dump(_plain(payload), fh, sort_keys=False)


def save_model(path, model: PolyModel, eta: float = float("nan"),
               gamma_y: float = float("nan"), rho: float = float("nan")) -> None:
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "order": model.order,
        "degree": model.degree,
        "scaler": {
            "offsets": model.scaler.offsets,
            "gains": model.scaler.gains,
        },
        "terms": [
            {"exponents": list(t.exponents), "coeff": float(a)}
            for t, a in zip(model.terms, model.alpha)
        ],
        "rho_y": model.rho_y,
        "rho_u": model.rho_u,
        "eta": eta,
        "gamma_y": gamma_y,
        "rho": rho,
    }
    write_yaml(path, payload)


def load_model(path) -> tuple[PolyModel, dict]:
    """Read a model file; returns the model and the diagnostic fields."""
    path = Path(path)
    with path.open("r") as fh:
        payload = yaml.safe_load(fh)
    if not isinstance(payload, dict):
        raise FileFormatError(f"{path}: not a mapping")
    unknown = set(payload) - _MODEL_KEYS
    if unknown:
        raise FileFormatError(f"{path}: unknown fields {sorted(unknown)}")
    missing = _MODEL_KEYS - set(payload)
    if missing:
        raise FileFormatError(f"{path}: missing fields {sorted(missing)}")
    if payload["format"] != MODEL_FORMAT:
        raise FileFormatError(f"{path}: not a {MODEL_FORMAT} file")
    if payload["version"] != MODEL_VERSION:
        raise FileFormatError(
            f"{path}: unsupported version {payload['version']} (expected {MODEL_VERSION})")
    scaler = AffineScaler(np.asarray(payload["scaler"]["offsets"], dtype=float),
                          np.asarray(payload["scaler"]["gains"], dtype=float))
    terms = [BasisTerm(tuple(int(e) for e in t["exponents"])) for t in payload["terms"]]
    alpha = np.asarray([t["coeff"] for t in payload["terms"]], dtype=float)
    model = PolyModel(order=int(payload["order"]), degree=int(payload["degree"]),
                      terms=terms, alpha=alpha, scaler=scaler,
                      rho_y=float(payload["rho_y"]), rho_u=float(payload["rho_u"]))
    diag = {k: payload[k] for k in ("eta", "gamma_y", "rho")}
    return model, diag


def write_trajectory_csv(path, traj) -> None:
    """Columns t,r,y,u,xi,J,saturated with t = 1..steps."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "r", "y", "u", "xi", "J", "saturated"])
        for t in range(traj.steps):
            w.writerow([t + 1, repr(float(traj.r[t])), repr(float(traj.y[t])),
                        repr(float(traj.u[t])), repr(float(traj.xi[t])),
                        repr(float(traj.J[t])), int(traj.saturated[t])])
