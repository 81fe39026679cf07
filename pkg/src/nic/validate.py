"""Set membership validation of the controller-model cascade gain.

Replays the recorded trajectory through the closed loop in prediction: at
every step the controller is asked to reproduce the measured next output
from the measured output history and its own past commands, and the model
prediction under that command is logged against the measured output window.
The smallest Lipschitz constant consistent with those pairs (within the
noise ball of radius eps) estimates the cascade gain Gamma_y; comparing a
slightly inflated estimate against 1 - gamma_y yields the stability
verdict and the admissible command-activity weight.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .identify import DataSet
from .invert import ControllerConfig, control
from .poly import PolyModel

log = logging.getLogger(__name__)

GAMMA_HAT_DELTA = 1e-6   # reported estimate is gamma_min * (1 + delta)
STRICT_TOL = 1e-12       # slack applied to the strict validation inequality


@dataclass(frozen=True)
class GammaDataSet:
    """Pairs of measured output windows and closed-loop model predictions."""

    windows: np.ndarray   # (P, m), newest entry first in each row
    yhat: np.ndarray      # (P,)
    eps: float

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.windows, dtype=float))
        yh = np.atleast_1d(np.asarray(self.yhat, dtype=float))
        if w.shape[0] != yh.size or w.shape[0] == 0:
            raise ValueError("windows/yhat size mismatch or empty data")
        if self.eps < 0:
            raise ValueError("eps must be non-negative")
        object.__setattr__(self, "windows", w)
        object.__setattr__(self, "yhat", yh)

    @property
    def m(self) -> int:
        return self.windows.shape[1]

    @property
    def n_pairs(self) -> int:
        return self.windows.shape[0]


def closed_loop_prediction_data(model: PolyModel, cfg: ControllerConfig,
                                data: DataSet, m: int,
                                eps: float) -> GammaDataSet:
    """Run the prediction recursion along the measured trajectory.

    The controller sees the measured next output as its reference and a
    mixed regressor (measured outputs, its own past commands); the model
    prediction is evaluated at the measured output regressor and the
    controller-generated input regressor.  The first ``order`` commands are
    seeded with the measured inputs so the recursion is defined; they fall
    before the emitted window range whenever m > 2 * order - 2.
    """
    n = model.order
    L = data.length
    if m <= n:
        raise ValueError("window length m must exceed the model order")
    if L <= m + 1:
        raise ValueError("not enough data for the requested window length")
    y, u = data.y, data.u
    unl = np.empty(L - 1)
    unl[:n] = u[:n]
    q = np.empty(2 * n - 1)
    for i in range(n, L - 1):
        q[:n] = y[i - n + 1:i + 1][::-1]
        for j in range(n - 1):
            q[n + j] = unl[i - 1 - j]
        unl[i] = control(model, q, float(y[i + 1]), cfg)
    pairs = range(m, L - 1)
    windows = np.empty((len(pairs), m))
    yhat = np.empty(len(pairs))
    point = np.empty(2 * n)
    for row, i in enumerate(pairs):
        windows[row] = y[i - m + 1:i + 1][::-1]
        point[:n] = y[i - n + 1:i + 1][::-1]
        point[n:] = unl[i - n + 1:i + 1][::-1]
        yhat[row] = model.predict(point)
    return GammaDataSet(windows=windows, yhat=yhat, eps=eps)


def _pairwise_linf(w: np.ndarray) -> np.ndarray:
    P = w.shape[0]
    out = np.zeros((P, P))
    for v in range(w.shape[1]):
        np.maximum(out, np.abs(w[:, v:v + 1] - w[None, :, v]), out=out)
    return out


def f_bar(gamma: float, w, ds: GammaDataSet) -> float:
    """Upper envelope of the feasible function set at the query window."""
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if w.size != ds.m:
        raise ValueError("query window length mismatch")
    dist = np.abs(ds.windows - w).max(axis=1)
    return float((ds.yhat + ds.eps + gamma * dist).min())


def check_validated(gamma: float, ds: GammaDataSet,
                    strict_tol: float = STRICT_TOL) -> bool:
    """True when the envelope clears y - eps at every data point.

    The strict inequality is applied with a small slack so that the
    self-pair equality arising at eps = 0 does not spuriously invalidate.
    """
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    dist = _pairwise_linf(ds.windows)
    envelope = (ds.yhat[None, :] + ds.eps + gamma * dist).min(axis=1)
    return bool((envelope > ds.yhat - ds.eps - strict_tol).all())


def gamma_min(ds: GammaDataSet) -> float:
    """Smallest validated Lipschitz constant (closed form for the
    infinity-norm window distance).

    Returns inf when two identical windows carry predictions further apart
    than the noise ball allows (no finite constant is consistent).  The
    closed form is cross-checked against the direct validation test just
    above and below the returned value.
    """
    dist = _pairwise_linf(ds.windows)
    dy = np.abs(ds.yhat[:, None] - ds.yhat[None, :])
    same = dist == 0.0
    if (dy[same] > 2.0 * ds.eps + STRICT_TOL).any():
        return float("inf")
    np.fill_diagonal(dist, np.inf)
    dist[same] = np.inf
    value = float(max(((dy - 2.0 * ds.eps) / dist).max(initial=0.0), 0.0))
    if not check_validated(value * (1.0 + GAMMA_HAT_DELTA), ds):
        raise RuntimeError("closed-form estimate failed its own validation check")
    return value


@dataclass(frozen=True)
class MuGridEntry:
    mu: float
    gamma_min: float
    gamma_hat: float
    margin: float
    admissible: bool


@dataclass(frozen=True)
class ValidationReport:
    gamma_min: float
    gamma_hat: float
    eps: float
    gamma_y: float
    margin: float
    verdict: str                      # validated-stable | validated-unstable | invalidated
    mu: float
    m: int
    grid: tuple[MuGridEntry, ...] = ()


def _verdict(entry: MuGridEntry) -> str:
    if not np.isfinite(entry.gamma_min):
        return "invalidated"
    return "validated-stable" if entry.margin > 0.0 else "validated-unstable"


def select_mu(model: PolyModel, data: DataSet, cfg: ControllerConfig,
              gamma_y: float, m: int | None = None,
              mu_grid=(0.0, 0.001, 0.01, 0.1, 1.0),
              eps: float = 0.0) -> tuple[float, ValidationReport]:
    """Pick the largest command-activity weight passing the margin test.

    Every grid weight gets its own closed-loop replay and gain estimate
    gamma_hat = gamma_min * (1 + delta); admissible means
    gamma_hat < 1 - gamma_y.  When no weight is admissible the report is
    issued at the smallest grid weight with the failing verdict.
    """
    if not gamma_y < 1.0:
        raise ValueError("gamma_y must be below 1 for any margin to exist")
    if m is None:
        m = 4 * model.order
    grid = sorted(float(v) for v in mu_grid)
    if not grid:
        raise ValueError("mu grid must be non-empty")
    entries: list[MuGridEntry] = []
    for mu in grid:
        ds = closed_loop_prediction_data(model, replace(cfg, mu=mu), data, m, eps)
        gmin = gamma_min(ds)
        ghat = gmin * (1.0 + GAMMA_HAT_DELTA)
        margin = 1.0 - gamma_y - ghat
        entries.append(MuGridEntry(mu=mu, gamma_min=gmin, gamma_hat=ghat,
                                   margin=margin,
                                   admissible=bool(np.isfinite(gmin) and margin > 0.0)))
    admissible = [e for e in entries if e.admissible]
    chosen = admissible[-1] if admissible else entries[0]
    report = ValidationReport(gamma_min=chosen.gamma_min,
                              gamma_hat=chosen.gamma_hat, eps=eps,
                              gamma_y=gamma_y, margin=chosen.margin,
                              verdict=_verdict(chosen), mu=chosen.mu, m=m,
                              grid=tuple(entries))
    return chosen.mu, report
