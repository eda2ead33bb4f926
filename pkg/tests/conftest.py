"""Shared objective factories for the test suite."""

import numpy as np
import pytest

from egmin import Objective


def quadratic_objective(a, scale=1.0):
    """f(x) = scale/2 * ||x - a||^2 with analytic Hessian."""
    a = np.asarray(a, dtype=float)

    def vg(x):
        diff = x - a
        return 0.5 * scale * float(np.dot(diff, diff)), scale * diff

    return Objective(value_and_grad=vg, hess_vec=lambda x, v: scale * np.asarray(v))


def general_quadratic_objective(q, a):
    """f(x) = 1/2 (x-a)^T Q (x-a) for a symmetric matrix Q."""
    q = np.asarray(q, dtype=float)
    a = np.asarray(a, dtype=float)

    def vg(x):
        diff = x - a
        qd = q @ diff
        return 0.5 * float(diff @ qd), qd

    return Objective(value_and_grad=vg, hess_vec=lambda x, v: q @ np.asarray(v))


def quartic_objective(c4, c2, c1):
    """Separable quartic sum(c4*x^4 + c2*x^2 + c1*x); nonconvex for c4 or c2 < 0."""
    c4 = np.asarray(c4, dtype=float)
    c2 = np.asarray(c2, dtype=float)
    c1 = np.asarray(c1, dtype=float)

    def vg(x):
        value = float(np.sum(c4 * x**4 + c2 * x**2 + c1 * x))
        grad = 4.0 * c4 * x**3 + 2.0 * c2 * x + c1
        return value, grad

    return Objective(
        value_and_grad=vg,
        hess_vec=lambda x, v: (12.0 * c4 * x**2 + 2.0 * c2) * np.asarray(v),
    )


def dense_kl_objective(a_matrix, b):
    """f(x) = KL(b, Ax) for a dense nonnegative matrix; no operator counting."""
    a_matrix = np.asarray(a_matrix, dtype=float)
    b = np.asarray(b, dtype=float)

    def vg(x):
        ax = a_matrix @ x
        value = float(np.sum(b * np.log(b / ax)) - np.sum(b) + np.sum(ax))
        grad = a_matrix.T @ (1.0 - b / ax)
        return value, grad

    return Objective(value_and_grad=vg)


@pytest.fixture
def rng():
    return np.random.default_rng(20250810)
