"""Kernel machinery: RBF evaluation, kernel ridge regression, and the
one-class SMO solver checked against an independent dense-grid dual
oracle on tiny problems."""

import itertools
import math

import numpy as np
import pytest

from ethsentinel import _hot, _hot_py
from ethsentinel.errors import DataError
from ethsentinel.kernels import (
    KernelSpec,
    gram,
    kernel_eval,
    kernel_matrix,
    kernel_ridge_fit,
    kernel_ridge_predict,
    one_class_decision,
    one_class_fit,
    resolve_gamma,
)


def dual_objective(G, a):
    return 0.5 * float(a @ G @ a)


def test_kernel_eval_matches_closed_form():
    spec = KernelSpec(gamma=0.3)
    x = np.array([1.0, 2.0])
    y = np.array([-1.0, 0.5])
    expected = math.exp(-0.3 * ((1 + 1) ** 2 + 1.5**2))
    assert kernel_eval(spec, x, y) == pytest.approx(expected, rel=1e-15)
    assert kernel_eval(spec, x, x) == 1.0


def test_gram_symmetry_and_unit_diagonal():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((20, 3))
    G = gram(KernelSpec(), X)
    assert np.allclose(G, G.T)
    assert np.allclose(np.diag(G), 1.0)
    assert np.all(G > 0)


def test_resolve_gamma_libsvm_default():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((50, 4)) * 2.0
    gamma = resolve_gamma(KernelSpec(), X)
    mean_var = float(np.mean(np.var(X, axis=0)))
    assert gamma == pytest.approx(1.0 / (4 * mean_var), rel=1e-12)
    assert resolve_gamma(KernelSpec(gamma=2.5), X) == 2.5


def test_kernel_ridge_matches_linear_solve_oracle():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((30, 2))
    y = rng.standard_normal(30)
    spec = KernelSpec(gamma=0.5)
    lam = 0.1
    model = kernel_ridge_fit(X, y, spec, lam)
    # oracle: alpha = (G + lam I)^-1 y via numpy
    G = gram(spec, X)
    alpha = np.linalg.solve(G + lam * np.eye(30), y)
    preds = np.array([kernel_ridge_predict(model, x) for x in X])
    assert np.allclose(preds, G @ alpha, atol=1e-8)


def test_kernel_ridge_interpolates_at_tiny_lambda():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((15, 2))
    y = rng.standard_normal(15)
    model = kernel_ridge_fit(X, y, KernelSpec(gamma=1.0), 1e-10)
    preds = kernel_ridge_predict(model, X)
    assert np.allclose(preds, y, atol=1e-5)


def test_smo_matches_dense_grid_oracle_n3():
    # n=3, nu=1/2 -> C=2/3; exhaustive grid over the constrained simplex
    rng = np.random.default_rng(4)
    X = rng.standard_normal((3, 2))
    spec = KernelSpec()
    model = one_class_fit(X, spec, nu=0.5)
    G = gram(spec, X, gamma=model.gamma)
    C = 1.0 / (0.5 * 3)
    best = None
    steps = 2000
    for i in range(steps + 1):
        a0 = C * i / steps
        for j in range(steps + 1):
            a1 = C * j / steps
            a2 = 1.0 - a0 - a1
            if not (0.0 <= a2 <= C):
                continue
            val = dual_objective(G, np.array([a0, a1, a2]))
            if best is None or val < best:
                best = val
    assert dual_objective(G, model.alphas) <= best + 1e-6


def test_smo_dual_feasibility_exact():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((40, 3))
    for nu in (0.05, 0.2, 0.5):
        model = one_class_fit(X, KernelSpec(), nu=max(nu, 1.0 / 40))
        C = 1.0 / (max(nu, 1.0 / 40) * 40)
        assert abs(model.alphas.sum() - 1.0) < 1e-12
        assert np.all(model.alphas >= -1e-15)
        assert np.all(model.alphas <= C + 1e-15)
        assert model.converged


def test_nu_property_quick():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((100, 2))
    nu = 0.1
    model = one_class_fit(X, KernelSpec(), nu)
    decisions = one_class_decision(model, X)
    outlier_fraction = float(np.mean(decisions < 0.0))
    assert outlier_fraction <= nu + 2.0 / 100


def test_decision_single_vs_batch():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((30, 2))
    model = one_class_fit(X, KernelSpec(), 0.1)
    batch = one_class_decision(model, X[:5])
    singles = [one_class_decision(model, x) for x in X[:5]]
    assert np.allclose(batch, singles)


def test_one_class_rejects_bad_nu():
    X = np.zeros((10, 2))
    with pytest.raises(DataError):
        one_class_fit(X, KernelSpec(), 0.01)  # below 1/n
    with pytest.raises(DataError):
        one_class_fit(X, KernelSpec(), 1.5)


def test_hot_backends_agree_smo():
    if _hot.smo_solve is _hot_py.smo_solve:
        pytest.skip("compiled extension not available")
    rng = np.random.default_rng(8)
    X = rng.standard_normal((60, 3))
    G = gram(KernelSpec(), X)
    C = 1.0 / (0.1 * 60)

    def run(backend):
        a = np.zeros(60)
        a[: int(1.0 / C)] = C
        a[int(1.0 / C)] = 1.0 - int(1.0 / C) * C
        iters, converged, _ = backend(np.ascontiguousarray(G), a, C, 1e-6, 100000, False)
        return a, iters, converged

    a_c, it_c, conv_c = run(_hot.smo_solve)
    a_py, it_py, conv_py = run(_hot_py.smo_solve)
    assert conv_c and conv_py
    assert it_c == it_py
    assert np.allclose(a_c, a_py, atol=1e-12)


def test_hot_backends_agree_css():
    if _hot.css_residuals is _hot_py.css_residuals:
        pytest.skip("compiled extension not available")
    rng = np.random.default_rng(9)
    w = rng.standard_normal(500)
    args = (w, 0.1, np.array([0.5]), np.array([0.2]), np.array([-0.3]), np.array([0.1]), 7, 14)
    res_c = _hot.css_residuals(*args)
    res_py = _hot_py.css_residuals(*args)
    assert np.allclose(res_c, res_py, atol=1e-12)
