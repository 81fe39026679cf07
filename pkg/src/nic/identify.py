"""Sparse polynomial one-step-model identification.

The pipeline: build the regression table for a candidate order, fit the
minimum infinity-norm residual eta, then search for the smallest Lipschitz
bound gamma_y at which the stability constraint set intersects the
eta*rho residual tube, taking the l1-minimal coefficient vector there.
Outer loops sweep the model order (stop when gamma_y stops improving) and
the relaxation factor rho (stop once gamma_y drops below one).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .invert import normalization_constants
from .optim import (FEAS_TOL, LinearInequalities, LPStatus, min_l1_constrained,
                    min_linf)
from .poly import AffineScaler, BasisTerm, PolyModel, basis_matrix, generate_basis

log = logging.getLogger(__name__)

# Coefficients at or below DROP_RTOL * max(1, |alpha|_inf) are removed from
# the stored model; REPORT_RTOL is the (looser) threshold used when counting
# active terms for diagnostics.
DROP_RTOL = 1e-12
REPORT_RTOL = 1e-6


class IdentificationError(RuntimeError):
    pass


@dataclass(frozen=True)
class DataSet:
    """Time-indexed input/output record, newest sample last."""

    u: np.ndarray
    y: np.ndarray
    sample_time: float = 1.0

    def __post_init__(self):
        u = np.atleast_1d(np.asarray(self.u, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if u.shape != y.shape or u.ndim != 1:
            raise ValueError("u and y must be 1-D arrays of equal length")
        if u.size < 2:
            raise ValueError("need at least two samples")
        if not (np.isfinite(u).all() and np.isfinite(y).all()):
            raise ValueError("samples must be finite")
        if not (self.sample_time > 0):
            raise ValueError("sample_time must be positive")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "y", y)

    @property
    def length(self) -> int:
        return self.u.size


@dataclass(frozen=True)
class RegressionTable:
    """One-step regression data: target y_{t+1} against the regressor pair.

    Row k corresponds to time index ``times[k]``; ``y_regs``/``u_regs`` hold
    the raw (unscaled) regressors with the newest entry first, and ``phi``
    the basis evaluations of the scaled joint regressor.
    """

    targets: np.ndarray
    phi: np.ndarray
    y_regs: np.ndarray
    u_regs: np.ndarray
    times: np.ndarray
    order: int
    basis: list[BasisTerm]
    scaler: AffineScaler

    @property
    def n_rows(self) -> int:
        return self.targets.size


def build_scaler(data: DataSet, n: int) -> AffineScaler:
    ylo, yhi = float(data.y.min()), float(data.y.max())
    ulo, uhi = float(data.u.min()), float(data.u.max())
    lows = np.concatenate([np.full(n, ylo), np.full(n, ulo)])
    highs = np.concatenate([np.full(n, yhi), np.full(n, uhi)])
    return AffineScaler.from_ranges(lows, highs)


def _lagged(x: np.ndarray, n: int) -> np.ndarray:
    """Rows (x_t, x_{t-1}, ..., x_{t-n+1}) for t = n-1 .. len(x)-2."""
    rows = x.size - n
    out = np.empty((rows, n))
    for j in range(n):
        out[:, j] = x[n - 1 - j:x.size - 1 - j]
    return out


def build_regression(data: DataSet, n: int, basis: list[BasisTerm],
                     scaler: AffineScaler) -> RegressionTable:
    if data.length <= n:
        raise IdentificationError(
            f"need more than {n} samples to fit an order-{n} model")
    y_regs = _lagged(data.y, n)
    u_regs = _lagged(data.u, n)
    targets = data.y[n:]
    phi = basis_matrix(basis, scaler, np.hstack([y_regs, u_regs]))
    # times follow the convention that the newest sample sits at t = 0
    times = np.arange(n - 1, data.length - 1) - (data.length - 1)
    return RegressionTable(targets=targets, phi=phi, y_regs=y_regs,
                           u_regs=u_regs, times=times, order=n, basis=basis,
                           scaler=scaler)


def neighbor_sets(table: RegressionTable) -> tuple[float, list[np.ndarray]]:
    """Per-row index sets of input-regressor neighbors.

    The radius zeta is the smallest value for which every row has at least
    one other row within infinity-norm distance zeta of its input regressor
    (each row trivially belongs to its own set).
    """
    R = table.n_rows
    if R < 2:
        raise IdentificationError("neighbor sets need at least two rows")
    diff = np.abs(table.u_regs[:, None, :] - table.u_regs[None, :, :]).max(axis=2)
    off = diff + np.diag(np.full(R, np.inf))
    zeta = float(off.min(axis=1).max())
    sets = [np.nonzero(diff[k] <= zeta)[0] for k in range(R)]
    return zeta, sets


def sc_constraints(table: RegressionTable, neighbors: list[np.ndarray],
                   gamma_y: float, eta: float, rho: float) -> LinearInequalities:
    """Linear inequalities bounding the model-mismatch Lipschitz constant.

    For every neighbor pair (k, l):
        |y_{l+1} - y_{k+1} + (Phi_k - Phi_l) beta|
            <= gamma_y * rho * ||yreg_l - yreg_k||_inf + 2 * eta * rho
    Pairs are symmetric, so each unordered pair is emitted once (two rows,
    one per sign of the absolute value); k = l pairs are vacuous and skipped.
    """
    if gamma_y < 0 or eta < 0 or rho < 1.0:
        raise ValueError("require gamma_y >= 0, eta >= 0, rho >= 1")
    ks, ls = [], []
    for k, idx in enumerate(neighbors):
        for l in idx:
            if l > k:
                ks.append(k)
                ls.append(int(l))
    if not ks:
        return LinearInequalities.empty(table.phi.shape[1])
    ks = np.asarray(ks)
    ls = np.asarray(ls)
    dphi = table.phi[ks] - table.phi[ls]
    dt = table.targets[ls] - table.targets[ks]
    dy = np.abs(table.y_regs[ls] - table.y_regs[ks]).max(axis=1)
    radius = gamma_y * rho * dy + 2.0 * eta * rho
    a = np.vstack([dphi, -dphi])
    b = np.concatenate([radius - dt, radius + dt])
    return LinearInequalities(a, b)


@dataclass
class GammaSearch:
    gamma: float
    solution: object  # LPSolution at the returned gamma (None when infeasible)
    feasible: bool
    probes: list[tuple[float, str]] = field(default_factory=list)


def min_feasible_gamma(table: RegressionTable, neighbors: list[np.ndarray],
                       eta: float, rho: float, gamma_tol: float = 1e-3,
                       gamma_cap: float = float(2 ** 16)) -> GammaSearch:
    """Bisect for the smallest gamma_y making the constraint set feasible.

    Returns the feasible upper end of the final bracket together with the
    l1-minimal coefficients found there.  When even ``gamma_cap`` is
    infeasible the search reports failure (data inconsistent with the model
    class at this eta * rho).
    """
    probes: list[tuple[float, str]] = []

    def probe(g: float):
        sol = min_l1_constrained(table.phi, table.targets,
                                 sc_constraints(table, neighbors, g, eta, rho),
                                 eta, rho)
        if sol.status not in (LPStatus.OPTIMAL, LPStatus.INFEASIBLE):
            raise IdentificationError(f"solver failure at gamma={g}: {sol.status.value}")
        probes.append((g, sol.status.value))
        return sol

    sol0 = probe(0.0)
    if sol0.status is LPStatus.OPTIMAL:
        return GammaSearch(0.0, sol0, True, probes)
    hi = 1.0
    sol_hi = probe(hi)
    while sol_hi.status is LPStatus.INFEASIBLE:
        hi *= 2.0
        if hi > gamma_cap:
            return GammaSearch(float("inf"), None, False, probes)
        sol_hi = probe(hi)
    lo = 0.0 if hi == 1.0 else hi / 2.0
    while hi - lo > gamma_tol:
        mid = 0.5 * (lo + hi)
        sol_mid = probe(mid)
        if sol_mid.status is LPStatus.OPTIMAL:
            hi, sol_hi = mid, sol_mid
        else:
            lo = mid
    return GammaSearch(hi, sol_hi, True, probes)


@dataclass(frozen=True)
class IdentConfig:
    degree: int = 3
    n_max: int = 4
    rho_init: float = 1.05
    rho_growth: float = 1.25
    rho_max: float = 4.0
    gamma_tol: float = 1e-3
    order_improvement: float = 0.05
    eta_floor_rel: float = 1e-9
    gamma_cap: float = float(2 ** 16)
    holdout_fraction: float = 0.2

    def __post_init__(self):
        if not (1 <= self.degree <= 8):
            raise ValueError("degree must be in 1..8")
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        if not (self.rho_init > 1.0 and self.rho_growth > 1.0):
            raise ValueError("rho_init and rho_growth must exceed 1")
        if self.rho_max < self.rho_init:
            raise ValueError("rho_max must be >= rho_init")
        if not (0.0 <= self.holdout_fraction < 1.0):
            raise ValueError("holdout_fraction must be in [0, 1)")


@dataclass(frozen=True)
class TraceEntry:
    n: int
    rho: float
    eta: float
    gamma_y: float
    nnz: int
    feasible: bool


@dataclass
class IdentResult:
    model: PolyModel | None
    eta: float
    gamma_y: float
    rho: float
    success: bool
    trace: list[TraceEntry]
    residual_linf: float = float("nan")
    holdout_linf: float = float("nan")
    notes: list[str] = field(default_factory=list)


def count_active(alpha: np.ndarray, rel_tol: float = REPORT_RTOL) -> int:
    alpha = np.asarray(alpha, dtype=float)
    if alpha.size == 0:
        return 0
    return int((np.abs(alpha) > rel_tol * max(1.0, np.abs(alpha).max())).sum())


def _sparsify(alpha: np.ndarray) -> np.ndarray:
    out = alpha.copy()
    out[np.abs(out) <= DROP_RTOL * max(1.0, np.abs(out).max())] = 0.0
    return out


def identify_model(data: DataSet, cfg: IdentConfig = IdentConfig()) -> IdentResult:
    """Run the full self-tuning identification loop.

    Order sweep per rho pass: keep increasing the order while either
    gamma_y or eta still drops by at least ``order_improvement`` relative
    (quantities already at their resolution floors cannot improve; note
    that gamma_y alone cannot rank orders, since the optimal
    infinity-norm fit always satisfies the pair constraints with slack
    2*eta*(rho - 1), so eta carries the model-quality signal).  The pass
    keeps the order with the lexicographically smallest
    (gamma_y, eta, n).  Rho passes multiply the relaxation until
    gamma_y < 1 or rho_max is exhausted.
    """
    norm = normalization_constants(data)
    tables: dict[int, RegressionTable] = {}
    nbs: dict[int, tuple[float, list[np.ndarray]]] = {}
    etas: dict[int, float] = {}
    trace: list[TraceEntry] = []
    notes: list[str] = []

    n_max = min(cfg.n_max, data.length - 1)
    if n_max < cfg.n_max:
        notes.append(f"n_max clipped to {n_max} by data length")
    eta_floor = cfg.eta_floor_rel * max(1.0, float(np.abs(data.y).max()))

    best = None  # (gamma, eta, n, rho, alpha)
    rho = cfg.rho_init
    while rho <= cfg.rho_max * (1 + 1e-12):
        pass_entries = []  # (gamma, eta, n, alpha), feasible orders only
        for n in range(1, n_max + 1):
            if n not in tables:
                basis = generate_basis(2 * n, cfg.degree)
                scaler = build_scaler(data, n)
                tables[n] = build_regression(data, n, basis, scaler)
                nbs[n] = neighbor_sets(tables[n])
                etas[n] = min_linf(tables[n].phi, tables[n].targets)[0]
            table = tables[n]
            eta = etas[n]
            search = min_feasible_gamma(table, nbs[n][1], eta, rho,
                                        gamma_tol=cfg.gamma_tol,
                                        gamma_cap=cfg.gamma_cap)
            if not search.feasible:
                trace.append(TraceEntry(n, rho, eta, float("inf"), 0, False))
                log.info("order %d rho %.4f: infeasible at gamma cap", n, rho)
                continue
            gamma = search.gamma
            alpha = search.solution.x
            trace.append(TraceEntry(n, rho, eta, gamma, count_active(alpha), True))
            log.info("order %d rho %.4f: eta=%.3e gamma_y=%.4f nnz=%d",
                     n, rho, eta, gamma, count_active(alpha))
            pass_entries.append((gamma, eta, n, alpha))
            if gamma <= cfg.gamma_tol and eta <= eta_floor:
                break  # both quantities at their floors, nothing left to gain
            if len(pass_entries) >= 2:
                pg, pe = pass_entries[-2][0], pass_entries[-2][1]
                g_improved = pg > cfg.gamma_tol and \
                    (pg - gamma) >= cfg.order_improvement * pg
                e_improved = pe > eta_floor and \
                    (pe - eta) >= cfg.order_improvement * pe
                if not (g_improved or e_improved):
                    break  # no significant reduction from the extra order
        else:
            notes.append(f"order sweep exhausted n_max={n_max} at rho={rho:.4f}")
        if pass_entries:
            gamma, eta, n, alpha = min(
                pass_entries,
                key=lambda e: (max(e[0], cfg.gamma_tol), max(e[1], eta_floor), e[2]))
            if best is None or (gamma, eta) < (best[0], best[1]):
                best = (gamma, eta, n, rho, alpha)
            if gamma < 1.0:
                break
        rho *= cfg.rho_growth

    if best is None:
        return IdentResult(model=None, eta=float("nan"), gamma_y=float("inf"),
                           rho=float("nan"), success=False, trace=trace,
                           notes=notes + ["no feasible fit at any (order, rho)"])

    gamma, eta, n, rho, alpha = best
    table = tables[n]
    alpha = _sparsify(alpha)
    residual = np.abs(table.targets - table.phi @ alpha)
    residual_linf = float(residual.max())
    holdout = int(np.ceil(cfg.holdout_fraction * table.n_rows))
    holdout_linf = float(residual[-holdout:].max()) if holdout else float("nan")
    # store only the active coefficients
    keep = np.nonzero(alpha)[0]
    if keep.size:
        terms = [table.basis[i] for i in keep]
        coeffs = alpha[keep]
    else:
        terms = [table.basis[0]]
        coeffs = np.zeros(1)
    model = PolyModel(order=n, degree=cfg.degree, terms=terms, alpha=coeffs,
                      scaler=table.scaler, rho_y=norm.rho_y, rho_u=norm.rho_u)
    success = gamma < 1.0
    if not success:
        notes.append(f"gamma_y={gamma:.4f} never dropped below 1 up to rho_max")
    return IdentResult(model=model, eta=eta, gamma_y=gamma, rho=rho,
                       success=success, trace=trace,
                       residual_linf=residual_linf, holdout_linf=holdout_linf,
                       notes=notes)
