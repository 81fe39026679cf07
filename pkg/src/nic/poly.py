"""Scaled monomial bases and univariate polynomial utilities.

The model class used throughout the package is a sparse polynomial in
affinely scaled regressor variables.  This module owns basis generation and
evaluation, the model container, restriction of a model to a univariate
polynomial in the current input, exact differentiation, and real root
extraction on an interval.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

# Root-finding tolerances.
LEAD_STRIP_RTOL = 1e-12   # leading coefficients below this * max|coeff| are dead
REAL_IMAG_RTOL = 1e-8     # eigenvalue accepted as real when |im| <= rtol * (1 + |re|)
DEDUP_WIDTH_RTOL = 1e-9   # root dedup tolerance, relative to interval width


@dataclass(frozen=True)
class AffineScaler:
    """Per-variable affine map ``x -> (x - offset) * gain``.

    Built from data ranges so that in-range raw values land in [-1, 1].
    A variable with zero range gets gain 1 and offset equal to its constant
    value; terms touching such a variable with exponent >= 1 then evaluate
    to zero and only constants survive.
    """

    offsets: np.ndarray
    gains: np.ndarray

    def __post_init__(self):
        offsets = np.atleast_1d(np.asarray(self.offsets, dtype=float))
        gains = np.atleast_1d(np.asarray(self.gains, dtype=float))
        if offsets.shape != gains.shape or offsets.ndim != 1:
            raise ValueError("offsets and gains must be 1-D arrays of equal length")
        if not (np.isfinite(offsets).all() and np.isfinite(gains).all()):
            raise ValueError("scaler parameters must be finite")
        if (gains <= 0).any():
            raise ValueError("scaler gains must be positive")
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "gains", gains)

    @property
    def n_vars(self) -> int:
        return self.offsets.size

    @classmethod
    def identity(cls, n_vars: int) -> "AffineScaler":
        return cls(np.zeros(n_vars), np.ones(n_vars))

    @classmethod
    def from_ranges(cls, lows, highs) -> "AffineScaler":
        lows = np.atleast_1d(np.asarray(lows, dtype=float))
        highs = np.atleast_1d(np.asarray(highs, dtype=float))
        if lows.shape != highs.shape:
            raise ValueError("lows/highs length mismatch")
        if (highs < lows).any():
            raise ValueError("range upper bound below lower bound")
        span = highs - lows
        offsets = 0.5 * (lows + highs)
        gains = np.where(span > 0.0, 2.0 / np.where(span > 0.0, span, 1.0), 1.0)
        return cls(offsets, gains)

    def scale(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.shape[-1] != self.n_vars:
            raise ValueError(
                f"point has {pts.shape[-1]} variables, scaler expects {self.n_vars}"
            )
        return (pts - self.offsets) * self.gains


@dataclass(frozen=True)
class BasisTerm:
    """Monomial exponent vector over the regressor variables."""

    exponents: tuple[int, ...]

    def __post_init__(self):
        if any(e < 0 for e in self.exponents):
            raise ValueError("exponents must be non-negative")

    @property
    def degree(self) -> int:
        return sum(self.exponents)


def generate_basis(n_vars: int, degree: int) -> list[BasisTerm]:
    """All monomials of total degree <= ``degree`` in ``n_vars`` variables.

    Terms come out in graded order (total degree ascending) and, within each
    grade, lexicographically by variable index, so the listing starts
    1, x0, x1, ..., x0^2, x0*x1, ...  The count equals C(n_vars + degree,
    degree).
    """
    if n_vars < 1:
        raise ValueError("n_vars must be >= 1")
    if degree < 0:
        raise ValueError("degree must be >= 0")
    terms = []
    for total in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(n_vars), total):
            exps = [0] * n_vars
            for v in combo:
                exps[v] += 1
            terms.append(BasisTerm(tuple(exps)))
    return terms


def exponent_matrix(terms: list[BasisTerm]) -> np.ndarray:
    if not terms:
        raise ValueError("empty basis")
    return np.array([t.exponents for t in terms], dtype=np.int64)


def basis_matrix(terms: list[BasisTerm], scaler: AffineScaler, points) -> np.ndarray:
    """Evaluate every basis term at every (raw) point; returns (n_points, N)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    exps = exponent_matrix(terms)
    if pts.shape[1] != exps.shape[1]:
        raise ValueError(
            f"points have {pts.shape[1]} variables, basis expects {exps.shape[1]}"
        )
    scaled = scaler.scale(pts)
    out = np.ones((pts.shape[0], exps.shape[0]))
    for v in range(exps.shape[1]):
        emax = int(exps[:, v].max())
        if emax == 0:
            continue
        powers = np.ones((pts.shape[0], emax + 1))
        np.cumprod(np.broadcast_to(scaled[:, v:v + 1], (pts.shape[0], emax)),
                   axis=1, out=powers[:, 1:])
        out *= powers[:, exps[:, v]]
    return out


def eval_basis(terms: list[BasisTerm], scaler: AffineScaler, point) -> np.ndarray:
    """Evaluate every basis term at one raw point; returns a length-N vector."""
    pt = np.asarray(point, dtype=float)
    if pt.ndim != 1:
        raise ValueError("point must be a 1-D vector")
    return basis_matrix(terms, scaler, pt[None, :])[0]


def _horner(coeffs: np.ndarray, x):
    """Polynomial evaluation, ascending coefficients; x scalar or array."""
    if np.isscalar(x) or getattr(x, "ndim", 1) == 0:
        acc = 0.0
        for c in coeffs[::-1]:
            acc = acc * x + c
        return float(acc)
    acc = np.zeros_like(x, dtype=float)
    for c in coeffs[::-1]:
        acc *= x
        acc += c
    return acc


@dataclass(frozen=True)
class UniPoly:
    """Dense univariate polynomial, coefficients in ascending degree."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must form a non-empty 1-D vector")
        if not np.isfinite(c).all():
            raise ValueError("non-finite polynomial coefficients")
        object.__setattr__(self, "coeffs", c)

    @property
    def is_zero(self) -> bool:
        return bool((self.coeffs == 0.0).all())

    @property
    def degree(self) -> int:
        """Degree after stripping dead leading coefficients; -1 for the zero poly."""
        scale = np.abs(self.coeffs).max()
        if scale == 0.0:
            return -1
        alive = np.nonzero(np.abs(self.coeffs) > LEAD_STRIP_RTOL * scale)[0]
        return int(alive[-1]) if alive.size else -1

    def __call__(self, x):
        return _horner(self.coeffs, x)

    def derivative(self) -> "UniPoly":
        c = self.coeffs
        if c.size <= 1:
            return UniPoly(np.zeros(1))
        return UniPoly(c[1:] * np.arange(1, c.size))


def differentiate(p: UniPoly) -> UniPoly:
    """Exact coefficient-wise derivative (degree drops by one)."""
    return p.derivative()


def _newton_polish(coeffs: np.ndarray, dcoeffs: np.ndarray, roots: np.ndarray,
                   steps: int = 2) -> np.ndarray:
    out = roots.copy()
    for _ in range(steps):
        pv = _horner(coeffs, out)
        dv = _horner(dcoeffs, out)
        ok = np.abs(dv) > 1e-30
        step = np.zeros_like(out)
        step[ok] = pv[ok] / dv[ok]
        cand = out - step
        better = np.abs(_horner(coeffs, cand)) <= np.abs(pv)
        out = np.where(better, cand, out)
    return out


def real_roots(p: UniPoly, lo: float, hi: float) -> np.ndarray:
    """Sorted real roots of ``p`` inside [lo, hi].

    Leading coefficients with magnitude below 1e-12 * max|coeff| are
    stripped, the remainder is made monic, and roots come from the
    companion-matrix eigenvalues, lightly polished with Newton steps.
    Roots just outside the interval (within a width-relative tolerance)
    are clamped onto it; near-coincident roots are merged.  The zero
    polynomial yields an empty list; degenerate handling is the caller's
    business.
    """
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise ValueError("interval bounds must be finite")
    if lo > hi:
        raise ValueError("interval lower bound exceeds upper bound")
    c = p.coeffs
    scale = np.abs(c).max()
    if scale == 0.0:
        return np.empty(0)
    alive = np.nonzero(np.abs(c) > LEAD_STRIP_RTOL * scale)[0]
    if alive.size == 0:
        return np.empty(0)
    deg = int(alive[-1])
    if deg == 0:
        return np.empty(0)
    c = c[:deg + 1]
    if deg == 1:
        cand = np.array([-c[0] / c[1]])
    else:
        monic = c / c[-1]
        comp = np.zeros((deg, deg))
        comp[0, :] = -monic[-2::-1]
        idx = np.arange(deg - 1)
        comp[idx + 1, idx] = 1.0
        eig = np.linalg.eigvals(comp)
        re, im = eig.real, eig.imag
        cand = re[np.abs(im) <= REAL_IMAG_RTOL * (1.0 + np.abs(re))]
        if cand.size == 0:
            return np.empty(0)
        cand = _newton_polish(c, c[1:] * np.arange(1, c.size), cand)
    width = hi - lo
    edge = max(DEDUP_WIDTH_RTOL * width, 1e-12 * (1.0 + max(abs(lo), abs(hi))))
    cand = cand[(cand >= lo - edge) & (cand <= hi + edge)]
    if cand.size == 0:
        return np.empty(0)
    cand = np.clip(np.sort(cand), lo, hi)
    tol = max(DEDUP_WIDTH_RTOL * width, 1e-15)
    merged = [cand[0]]
    for r in cand[1:]:
        if r - merged[-1] <= tol:
            merged[-1] = 0.5 * (merged[-1] + r)
        else:
            merged.append(r)
    return np.clip(np.asarray(merged), lo, hi)


@dataclass
class PolyModel:
    """One-step-ahead polynomial predictor over scaled regressor variables.

    Variables are ordered (y_t, ..., y_{t-n+1}, u_t, ..., u_{t-n+1}), so the
    current input sits at index ``order``.  ``terms``/``alpha`` list only the
    active monomials.  ``rho_y``/``rho_u`` are the squared-norm normalization
    constants of the data the model was fitted on, consumed by the inversion
    objective.
    """

    order: int
    degree: int
    terms: list[BasisTerm]
    alpha: np.ndarray
    scaler: AffineScaler
    rho_y: float = 1.0
    rho_u: float = 1.0

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("model order must be >= 1")
        self.alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        if len(self.terms) != self.alpha.size:
            raise ValueError("terms/alpha length mismatch")
        if self.scaler.n_vars != 2 * self.order:
            raise ValueError("scaler must cover 2 * order variables")
        if not (self.rho_y > 0 and self.rho_u > 0):
            raise ValueError("normalization constants must be positive")
        for t in self.terms:
            if len(t.exponents) != 2 * self.order:
                raise ValueError("basis term arity does not match model order")

    @property
    def n_vars(self) -> int:
        return 2 * self.order

    @cached_property
    def _exps(self) -> np.ndarray:
        return exponent_matrix(self.terms)

    @cached_property
    def _q_exps(self) -> np.ndarray:
        # exponents of everything except the current input
        return np.delete(self._exps, self.order, axis=1)

    @cached_property
    def _u_exps(self) -> np.ndarray:
        return self._exps[:, self.order]

    @cached_property
    def _q_scaling(self) -> tuple[np.ndarray, np.ndarray]:
        keep = np.delete(np.arange(2 * self.order), self.order)
        return self.scaler.offsets[keep], self.scaler.gains[keep]

    @cached_property
    def _u_expand(self) -> np.ndarray:
        # row e maps (scaled u)^e onto raw-u monomial coefficients:
        # (g*(u - o))^e = sum_j C(e,j) g^e (-o)^(e-j) u^j
        o = self.scaler.offsets[self.order]
        g = self.scaler.gains[self.order]
        emax = int(self._u_exps.max()) if self._u_exps.size else 0
        T = np.zeros((emax + 1, emax + 1))
        binom = np.zeros((emax + 1, emax + 1))
        binom[:, 0] = 1.0
        for e in range(1, emax + 1):
            binom[e, 1:e + 1] = binom[e - 1, 1:e + 1] + binom[e - 1, 0:e]
        for e in range(emax + 1):
            for j in range(e + 1):
                T[e, j] = binom[e, j] * (g ** e) * ((-o) ** (e - j))
        return T

    def predict_many(self, points) -> np.ndarray:
        phi = basis_matrix(self.terms, self.scaler, points)
        return phi @ self.alpha

    def predict(self, point) -> float:
        return float(self.predict_many(np.asarray(point, dtype=float)[None, :])[0])


def restrict_to_u(model: PolyModel, q) -> UniPoly:
    """Collapse the model onto a polynomial in the current input.

    ``q`` carries the remaining 2n-1 regressor entries
    (y_t, ..., y_{t-n+1}, u_{t-1}, ..., u_{t-n+1}).  The returned
    polynomial is in the raw (unscaled) input.
    """
    q = np.asarray(q, dtype=float)
    n = model.order
    if q.shape != (2 * n - 1,):
        raise ValueError(f"regressor must have {2 * n - 1} entries")
    q_off, q_gain = model._q_scaling
    sq = (q - q_off) * q_gain
    exps = model._q_exps
    vals = np.ones(exps.shape[0])
    for v in range(exps.shape[1]):
        emax = int(exps[:, v].max())
        if emax == 0:
            continue
        powers = np.empty(emax + 1)
        powers[0] = 1.0
        np.cumprod(np.full(emax, sq[v]), out=powers[1:])
        vals *= powers[exps[:, v]]
    T = model._u_expand
    weights = np.bincount(model._u_exps, weights=model.alpha * vals,
                          minlength=T.shape[0])
    return UniPoly(weights @ T)
