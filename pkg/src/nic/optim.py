"""Dense linear programming core and the two fitting reformulations.

The solver is a self-contained two-phase tableau simplex (Dantzig pricing
with a Bland fallback once stalling is detected), which keeps the package
dependency-light and bit-deterministic.  The minimum-infinity-norm fit and
the l1-minimization under linear constraints are solved through their LP
duals: both duals have only a handful of rows (one or two per coefficient),
so they stay fast even when the constraint count runs into the thousands,
and the coefficient vector is recovered from the optimal dual multipliers.

Tolerance constants (every floating comparison in this module goes through
one of these):
    FEAS_TOL   absolute primal feasibility slack on A x <= b
    OPT_TOL    objective agreement demanded from the test oracles
    COST_TOL   reduced cost must be below -COST_TOL to enter the basis
    PIVOT_TOL  tableau entries at or below this cannot serve as pivots
    STALL_EPS  objective progress below this counts as a stalled iteration
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

FEAS_TOL = 1e-8
OPT_TOL = 1e-8
COST_TOL = 1e-9
PIVOT_TOL = 1e-9
STALL_EPS = 1e-12
STALL_LIMIT = 80


class LPStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


@dataclass(frozen=True)
class LinearProgram:
    """min c @ x  subject to  A @ x <= b  and optional per-variable bounds."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    bounds: list[tuple[float | None, float | None]] | None = None

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        A = np.asarray(self.A, dtype=float)
        if A.size == 0:
            A = A.reshape(0, c.size)
        b = np.atleast_1d(np.asarray(self.b, dtype=float)) if np.size(self.b) else \
            np.zeros(A.shape[0])
        if A.ndim != 2 or A.shape[1] != c.size:
            raise ValueError("A column count must equal objective length")
        if b.shape != (A.shape[0],):
            raise ValueError("b length must equal A row count")
        if not (np.isfinite(c).all() and np.isfinite(A).all() and np.isfinite(b).all()):
            raise ValueError("linear program entries must be finite")
        if self.bounds is not None and len(self.bounds) != c.size:
            raise ValueError("bounds length must equal objective length")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def n_vars(self) -> int:
        return self.c.size


@dataclass(frozen=True)
class LPSolution:
    status: LPStatus
    x: np.ndarray | None
    objective_value: float


@dataclass(frozen=True)
class LinearInequalities:
    """A stack of rows a_i @ x <= b_i over a fixed variable count."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.atleast_1d(np.asarray(self.b, dtype=float)) if np.size(self.b) else \
            np.zeros(a.shape[0] if a.ndim == 2 else 0)
        if a.ndim != 2:
            raise ValueError("coefficient block must be 2-D")
        if b.shape != (a.shape[0],):
            raise ValueError("right-hand side length mismatch")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def empty(cls, n_vars: int) -> "LinearInequalities":
        return cls(np.zeros((0, n_vars)), np.zeros(0))

    def __len__(self) -> int:
        return self.a.shape[0]


@dataclass
class _CoreResult:
    status: LPStatus
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    objective: float = np.nan
    iterations: int = 0
    infeasibility: float = 0.0


def _pivot(T: np.ndarray, z: np.ndarray, basis: np.ndarray, i: int, j: int) -> None:
    T[i] = T[i] / T[i, j]
    col = T[:, j].copy()
    col[i] = 0.0
    T -= np.outer(col, T[i])
    z -= z[j] * T[i]
    T[:, j] = 0.0
    T[i, j] = 1.0
    z[j] = 0.0
    basis[i] = j


def _pivot_loop(T: np.ndarray, z: np.ndarray, basis: np.ndarray,
                max_iter: int) -> tuple[LPStatus, int]:
    """Run simplex pivots in place; z[-1] tracks minus the objective.

    Pricing is Dantzig's rule, switching to Bland's rule while the
    objective stalls (anti-cycling) and back once progress resumes.
    """
    ncols = T.shape[1] - 1
    bland = False
    stall = 0
    best = z[-1]
    for it in range(max_iter):
        r = z[:ncols]
        if bland:
            entering = np.nonzero(r < -COST_TOL)[0]
            if entering.size == 0:
                return LPStatus.OPTIMAL, it
            j = int(entering[0])
        else:
            j = int(np.argmin(r))
            if r[j] >= -COST_TOL:
                return LPStatus.OPTIMAL, it
        col = T[:, j]
        pos = np.nonzero(col > PIVOT_TOL)[0]
        if pos.size == 0:
            return LPStatus.UNBOUNDED, it
        ratios = T[pos, -1] / col[pos]
        rmin = ratios.min()
        # exact ties only; the rhs perturbation keeps them rare
        ties = pos[ratios == rmin]
        i = int(ties[np.argmin(basis[ties])]) if ties.size > 1 else int(ties[0])
        _pivot(T, z, basis, i, j)
        if z[-1] > best + STALL_EPS * (1.0 + abs(best)):
            best = z[-1]
            stall = 0
            bland = False
        else:
            stall += 1
            if stall >= STALL_LIMIT:
                bland = True
    return LPStatus.ITERATION_LIMIT, max_iter


def _perturb_rhs(b: np.ndarray) -> np.ndarray:
    """Charnes-style anti-degeneracy perturbation of the right-hand side.

    Breaking ratio-test ties keeps Dantzig pricing off degenerate plateaus.
    Only the pivot path is affected: solutions are re-extracted from the
    final basis against the true data, and the dual multipliers (which the
    fitting routines report) are certified by reduced costs alone.
    """
    m = b.size
    if m == 0:
        return b
    scale = max(1.0, float(np.abs(b).max()))
    # deterministic, distinct, tiny offsets
    mix = (np.arange(1, m + 1) * 0.6180339887498949) % 1.0
    return b + (1e-10 * scale / m) * (1.0 + mix)


def solve_standard_form(A, b, c, initial_basis=None, max_iter: int | None = None
                        ) -> _CoreResult:
    """min c @ x  s.t.  A @ x = b, x >= 0.

    ``initial_basis`` may name columns that already form an identity block
    with b >= 0 (phase 1 is skipped then).  ``duals`` holds one multiplier
    per input row, zero for rows dropped as redundant during phase 1.
    """
    A = np.array(A, dtype=float)
    b = np.array(np.atleast_1d(b), dtype=float)
    c = np.array(np.atleast_1d(c), dtype=float)
    if A.ndim != 2 or b.shape != (A.shape[0],) or c.shape != (A.shape[1],):
        raise ValueError("inconsistent standard-form dimensions")
    if not (np.isfinite(A).all() and np.isfinite(b).all() and np.isfinite(c).all()):
        raise ValueError("standard-form entries must be finite")
    m, n = A.shape
    if max_iter is None:
        max_iter = min(60000, 2000 + 50 * (m + n))

    flip = b < 0
    if flip.any():
        A = A.copy()
        A[flip] *= -1.0
        b = np.abs(b)
    row_keep = np.arange(m)
    iterations = 0
    bw = _perturb_rhs(b)

    if initial_basis is not None:
        basis = np.array(initial_basis, dtype=np.int64)
        T = np.hstack([A, bw[:, None]])
        if not np.allclose(T[:, basis], np.eye(m), atol=1e-12):
            for i, col in enumerate(basis):
                if abs(T[i, col] - 1.0) > 1e-12 or np.abs(np.delete(T[:, col], i)).max() > 1e-12:
                    _pivot(T, np.zeros(T.shape[1]), basis.copy(), i, col)
        z = np.append(c, 0.0) - c[basis] @ T
    else:
        T = np.hstack([A, np.eye(m), bw[:, None]])
        basis = np.arange(n, n + m, dtype=np.int64)
        z = np.concatenate([-A.sum(axis=0), np.zeros(m), [-bw.sum()]])
        status1, it1 = _pivot_loop(T, z, basis, max_iter)
        iterations += it1
        if status1 is LPStatus.ITERATION_LIMIT:
            return _CoreResult(LPStatus.ITERATION_LIMIT, iterations=iterations)
        residual = -z[-1]
        if residual > FEAS_TOL:
            return _CoreResult(LPStatus.INFEASIBLE, iterations=iterations,
                               infeasibility=float(residual))
        # Drive leftover artificial basics out; rows that cannot pivot on a
        # structural column are redundant and get dropped.
        redundant = []
        for i in range(m):
            if basis[i] < n:
                continue
            row = T[i, :n]
            j = int(np.argmax(np.abs(row)))
            if abs(row[j]) > PIVOT_TOL:
                _pivot(T, z, basis, i, j)
            else:
                redundant.append(i)
        if redundant:
            keep = np.setdiff1d(np.arange(T.shape[0]), redundant)
            T = T[keep]
            basis = basis[keep]
            row_keep = row_keep[keep]
        T = np.hstack([T[:, :n], T[:, -1:]])
        z = np.append(c, 0.0) - c[basis] @ T

    status, it2 = _pivot_loop(T, z, basis, max_iter - iterations)
    iterations += it2
    if status is not LPStatus.OPTIMAL:
        return _CoreResult(status, iterations=iterations)

    # Recompute the answer from a fresh factorization of the final basis to
    # shed accumulated tableau round-off.
    Bmat = A[row_keep][:, basis]
    try:
        xb = np.linalg.solve(Bmat, b[row_keep])
        w = np.linalg.solve(Bmat.T, c[basis])
    except np.linalg.LinAlgError:
        xb = np.linalg.lstsq(Bmat, b[row_keep], rcond=None)[0]
        w = np.linalg.lstsq(Bmat.T, c[basis], rcond=None)[0]
    x = np.zeros(n)
    x[basis] = xb
    duals = np.zeros(m)
    duals[row_keep] = w
    duals[flip] *= -1.0
    return _CoreResult(LPStatus.OPTIMAL, x=x, duals=duals,
                       objective=float(c @ x), iterations=iterations)


def solve_lp(lp: LinearProgram, max_iter: int | None = None) -> LPSolution:
    """General inequality-form solve; bounds become extra rows, variables
    are split into positive parts, and the two-phase core does the rest."""
    rows = [lp.A]
    rhs = [lp.b]
    n = lp.n_vars
    if lp.bounds is not None:
        for i, (lo, hi) in enumerate(lp.bounds):
            if lo is not None:
                if not np.isfinite(lo):
                    raise ValueError("bounds must be finite or None")
                e = np.zeros(n)
                e[i] = -1.0
                rows.append(e[None, :])
                rhs.append(np.array([-lo]))
            if hi is not None:
                if not np.isfinite(hi):
                    raise ValueError("bounds must be finite or None")
                e = np.zeros(n)
                e[i] = 1.0
                rows.append(e[None, :])
                rhs.append(np.array([hi]))
    A2 = np.vstack(rows)
    b2 = np.concatenate(rhs)
    m2 = A2.shape[0]
    Astd = np.hstack([A2, -A2, np.eye(m2)])
    cstd = np.concatenate([lp.c, -lp.c, np.zeros(m2)])
    res = solve_standard_form(Astd, b2, cstd, max_iter=max_iter)
    if res.status is not LPStatus.OPTIMAL:
        return LPSolution(res.status, None, np.nan)
    x = res.x[:n] - res.x[n:2 * n]
    return LPSolution(LPStatus.OPTIMAL, x, float(lp.c @ x))


def min_linf(Phi, y) -> tuple[float, np.ndarray]:
    """Minimum infinity-norm residual fit: eta = min_beta ||y - Phi beta||_inf.

    The underlying LP bounds every residual by one slack t
    (-t <= y_k - Phi_k beta <= t, minimize t); it is solved through its
    dual, whose row count is just the coefficient count plus one.
    """
    Phi = np.asarray(Phi, dtype=float)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if Phi.ndim != 2 or Phi.shape[0] != y.size:
        raise ValueError("Phi rows must match y length")
    if not (np.isfinite(Phi).all() and np.isfinite(y).all()):
        raise ValueError("fit inputs must be finite")
    m, N = Phi.shape
    if np.abs(Phi).max(initial=0.0) == 0.0:
        return float(np.abs(y).max(initial=0.0)), np.zeros(N)
    # dual rows: Phi' (lam+ - lam-) = 0 and 1'(lam+ + lam-) = 1, lam >= 0
    A = np.zeros((N + 1, 2 * m))
    A[:N, :m] = Phi.T
    A[:N, m:] = -Phi.T
    A[N, :] = 1.0
    b = np.zeros(N + 1)
    b[N] = 1.0
    c = np.concatenate([y, -y])
    res = solve_standard_form(A, b, c)
    if res.status is not LPStatus.OPTIMAL:
        raise RuntimeError(f"infinity-norm fit solver failed: {res.status.value}")
    beta = res.duals[:N]
    eta = float(-res.duals[N])
    if eta <= 0.0:
        eta = 0.0
    return eta, beta


def min_l1_constrained(Phi, y, sc: LinearInequalities, eta: float, rho: float,
                       max_iter: int | None = None) -> LPSolution:
    """min ||beta||_1 subject to sc.a @ beta <= sc.b and
    ||y - Phi beta||_inf <= eta * rho.

    The split formulation (beta = beta+ - beta-, minimize the sum of parts)
    is solved through its dual, which starts feasible at zero; an unbounded
    dual certifies that the constraints conflict and the primal is
    infeasible.
    """
    Phi = np.asarray(Phi, dtype=float)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if eta < 0 or rho < 1.0:
        raise ValueError("require eta >= 0 and rho >= 1")
    N = Phi.shape[1]
    if len(sc) and sc.a.shape[1] != N:
        raise ValueError("constraint arity does not match coefficient count")
    bound = eta * rho
    G = np.vstack([sc.a, Phi, -Phi])
    h = np.concatenate([sc.b, y + bound, bound - y])
    m = G.shape[0]
    A = np.zeros((2 * N, m + 2 * N))
    A[:N, :m] = -G.T
    A[N:, :m] = G.T
    A[:, m:] = np.eye(2 * N)
    b = np.ones(2 * N)
    c = np.concatenate([h, np.zeros(2 * N)])
    res = solve_standard_form(A, b, c, initial_basis=list(range(m, m + 2 * N)),
                              max_iter=max_iter)
    if res.status is LPStatus.UNBOUNDED:
        return LPSolution(LPStatus.INFEASIBLE, None, np.nan)
    if res.status is not LPStatus.OPTIMAL:
        return LPSolution(res.status, None, np.nan)
    w = res.duals
    beta = w[N:] - w[:N]
    violation = float((G @ beta - h).max(initial=0.0))
    if violation > 1e-6:
        raise RuntimeError(f"l1 solve returned infeasible point (violation {violation:.2e})")
    return LPSolution(LPStatus.OPTIMAL, beta, float(np.abs(beta).sum()))
