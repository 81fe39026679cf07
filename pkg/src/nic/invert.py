"""Input synthesis by fast exact inversion of the polynomial model.

For a reference r and regressor q the tracking objective
    J(u) = (r - f(q, u))^2 / rho_y + mu * u^2 / rho_u
is itself a polynomial in u, so its minimum over the saturation interval
is attained either at a stationary point (a real root of dJ/du) or at an
endpoint.  The controller evaluates J over that finite candidate set and
returns the argmin, which makes each call a root extraction plus a handful
of polynomial evaluations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .poly import PolyModel, UniPoly, real_roots, restrict_to_u

if TYPE_CHECKING:  # pragma: no cover
    from .identify import DataSet

TIE_RTOL = 1e-12  # objective values this close (relative) count as tied


@dataclass(frozen=True)
class ControllerConfig:
    """Saturation interval, command-activity weight and tie tolerances."""

    u_min: float
    u_max: float
    mu: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.u_min) and np.isfinite(self.u_max)):
            raise ValueError("saturation bounds must be finite")
        if self.u_min >= self.u_max:
            raise ValueError("u_min must be strictly below u_max")
        if self.mu < 0:
            raise ValueError("mu must be non-negative")


@dataclass(frozen=True)
class NormalizationConstants:
    rho_y: float
    rho_u: float
    rho_y_degenerate: bool = False
    rho_u_degenerate: bool = False


def normalization_constants(data: "DataSet") -> NormalizationConstants:
    """Squared 2-norms of the recorded outputs and inputs.

    A zero sum (all-zero signal) is replaced by 1 and flagged so the
    objective stays well defined.
    """
    rho_y = float(np.sum(np.square(data.y)))
    rho_u = float(np.sum(np.square(data.u)))
    y_deg = rho_y == 0.0
    u_deg = rho_u == 0.0
    return NormalizationConstants(rho_y=1.0 if y_deg else rho_y,
                                  rho_u=1.0 if u_deg else rho_u,
                                  rho_y_degenerate=y_deg,
                                  rho_u_degenerate=u_deg)


def build_objective(model: PolyModel, q, r: float, cfg: ControllerConfig) -> UniPoly:
    """Tracking objective as an explicit polynomial in the raw input."""
    p = restrict_to_u(model, q).coeffs
    t = -p
    t[0] += r
    J = np.convolve(t, t) / model.rho_y
    if cfg.mu > 0.0:
        if J.size < 3:
            J = np.concatenate([J, np.zeros(3 - J.size)])
        J[2] += cfg.mu / model.rho_u
    return UniPoly(J)


def _stationary_candidates(dJ: UniPoly, cfg: ControllerConfig) -> np.ndarray:
    lo, hi = cfg.u_min, cfg.u_max
    roots = real_roots(dJ, lo, hi)
    cand = np.concatenate([roots, [lo, hi]])
    # snap near-endpoint candidates onto the endpoints, then merge
    tol = max(1e-9 * (hi - lo), 1e-15)
    cand[np.abs(cand - lo) <= tol] = lo
    cand[np.abs(cand - hi) <= tol] = hi
    cand = np.sort(cand)
    out = [cand[0]]
    for v in cand[1:]:
        if v - out[-1] > tol:
            out.append(v)
    return np.asarray(out)


def candidate_set(J: UniPoly, cfg: ControllerConfig) -> np.ndarray:
    """Stationary points of J inside the saturation interval plus both
    endpoints, sorted and deduplicated.  An identically-zero derivative
    (flat objective) degenerates to the endpoints alone."""
    dJ = J.derivative()
    if dJ.is_zero:
        return np.array([cfg.u_min, cfg.u_max])
    return _stationary_candidates(dJ, cfg)


@dataclass(frozen=True)
class ControlResult:
    u: float
    objective_value: float
    candidates: np.ndarray
    objective: UniPoly
    degenerate: bool
    saturated: bool


def control_details(model: PolyModel, q, r: float,
                    cfg: ControllerConfig) -> ControlResult:
    q = np.asarray(q, dtype=float)
    if not np.isfinite(r) or not np.isfinite(q).all():
        raise ValueError("reference and regressor must be finite")
    J = build_objective(model, q, r, cfg)
    dJ = J.derivative()
    degenerate = dJ.is_zero
    if degenerate:
        # flat objective: any input is optimal, prefer the least activity
        cand = [cfg.u_min, cfg.u_max]
        if cfg.u_min < 0.0 < cfg.u_max:
            cand.append(0.0)
        cand = np.asarray(cand)
    else:
        cand = _stationary_candidates(dJ, cfg)
    vals = J(cand)
    jmin = float(vals.min())
    tied = cand[vals <= jmin + TIE_RTOL * (1.0 + abs(jmin))]
    # tie-break: smallest activity first, then smallest value
    u = float(min(tied, key=lambda v: (abs(v), v)))
    u = min(max(u, cfg.u_min), cfg.u_max)
    edge = 1e-12 * (1.0 + max(abs(cfg.u_min), abs(cfg.u_max)))
    saturated = u <= cfg.u_min + edge or u >= cfg.u_max - edge
    return ControlResult(u=u, objective_value=float(J(u)), candidates=cand,
                         objective=J, degenerate=degenerate, saturated=saturated)


def control(model: PolyModel, q, r: float, cfg: ControllerConfig) -> float:
    """The inversion control law: argmin of J over the candidate set."""
    return control_details(model, q, r, cfg).u
