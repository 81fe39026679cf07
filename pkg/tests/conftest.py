"""Shared builders for the test suite."""

import numpy as np
import pytest

from nic.poly import AffineScaler, BasisTerm, PolyModel, generate_basis


def make_model(order, degree, terms, alpha, scaler=None, rho_y=1.0, rho_u=1.0):
    """Assemble a model from explicit exponent tuples and coefficients."""
    if scaler is None:
        scaler = AffineScaler.identity(2 * order)
    return PolyModel(order=order, degree=degree,
                     terms=[BasisTerm(tuple(t)) for t in terms],
                     alpha=np.asarray(alpha, dtype=float), scaler=scaler,
                     rho_y=rho_y, rho_u=rho_u)


def identity_model(rho_y=1.0, rho_u=1.0):
    """The one-term model f(q, u) = u."""
    return make_model(1, 1, [(0, 1)], [1.0], rho_y=rho_y, rho_u=rho_u)


def random_sparse_model(rng, order, degree, n_active, input_dependent=True):
    """Random sparse model with optional guaranteed input dependence."""
    basis = generate_basis(2 * order, degree)
    idx = rng.choice(len(basis), size=min(n_active, len(basis)), replace=False)
    terms = [basis[i] for i in idx]
    if input_dependent and not any(t.exponents[order] >= 1 for t in terms):
        linear_u = next(t for t in basis
                        if t.degree == 1 and t.exponents[order] == 1)
        terms[0] = linear_u
    alpha = rng.normal(size=len(terms))
    scaler = AffineScaler(rng.uniform(-0.2, 0.2, size=2 * order),
                          rng.uniform(0.6, 1.8, size=2 * order))
    return PolyModel(order=order, degree=degree, terms=terms, alpha=alpha,
                     scaler=scaler, rho_y=float(rng.uniform(0.5, 5.0)),
                     rho_u=float(rng.uniform(0.5, 5.0)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
