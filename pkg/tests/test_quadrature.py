import math

import numpy as np
import pytest
from scipy import integrate, special

from fraccyl.constants import theta_np
from fraccyl.quadrature import (
    QuadratureSpec,
    axial_near_rule,
    axial_tail_weight,
    axial_weight,
    discrete_gauss,
    exterior_kappa,
    exterior_rule_1d,
    gauss_jacobi,
    gauss_legendre,
    kernel_line_integral,
    kernel_tail,
    transverse_rule,
)


def test_gauss_legendre_exact_degree():
    t, w = gauss_legendre(4)
    for k in range(8):
        assert np.dot(w, t ** k) == pytest.approx(1.0 / (k + 1), rel=1e-13)


@pytest.mark.parametrize("a, b", [(0.0, 0.25), (1.0, 0.5), (1.0, -0.5), (0.0, 1.75)])
def test_gauss_jacobi_moments(a, b):
    t, w = gauss_jacobi(4, a, b)
    for k in range(8):
        assert np.dot(w, t ** k) == pytest.approx(special.beta(b + k + 1, a + 1), rel=1e-12)


def test_discrete_gauss_reproduces_moments(rng):
    x = rng.uniform(0.3, 2.0, 400)
    w = rng.uniform(0.1, 1.0, 400)
    nodes, weights = discrete_gauss(x, w, 4)
    assert np.all(weights > 0)
    for k in range(8):
        assert np.dot(weights, nodes ** k) == pytest.approx(np.dot(w, x ** k), rel=1e-10)


def test_discrete_gauss_matches_legendre():
    t, w = gauss_legendre(40)
    nodes, weights = discrete_gauss(t, w, 3)
    t3, w3 = gauss_legendre(3)
    assert np.allclose(nodes, t3, atol=1e-12) and np.allclose(weights, w3, atol=1e-12)


def test_quadrature_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(near_split=1)
    with pytest.raises(ValueError):
        QuadratureSpec(far_order=0)
    with pytest.raises(ValueError):
        QuadratureSpec(tail_radius=-1.0)
    assert QuadratureSpec().radius(2.0) == 8.0
    with pytest.raises(ValueError):
        QuadratureSpec(tail_radius=1.0).radius(2.0)


@pytest.mark.parametrize("s, p", [(0.5, 2.0), (0.9, 2.5), (0.8, 3.0)])
def test_transverse_rule_exact_on_power(s, p):
    # sum nu r^beta integrates |x - y|^beta over the cell pair
    h = 0.25
    beta = p - 1 - s * p
    q = QuadratureSpec()
    r0 = transverse_rule(0, h, s, p, q)
    exact0 = 2 * h ** (beta + 2) / ((beta + 1) * (beta + 2))
    assert np.dot(r0.nu, r0.r ** beta) == pytest.approx(exact0, rel=1e-12)
    # the touching pair is exact for the near piece only; the far piece is a
    # smooth Gauss approximation
    r1 = transverse_rule(1, h, s, p, q)
    exact1 = h ** (beta + 2) * (2 ** (beta + 2) - 2) / ((beta + 1) * (beta + 2))
    assert np.dot(r1.nu, r1.r ** beta) == pytest.approx(exact1, rel=1e-6)
    # the rule points lie inside the unit cells
    for rule in (r0, r1):
        assert np.all((rule.xi_x >= 0) & (rule.xi_x <= 1))
        assert np.all((rule.xi_y >= 0) & (rule.xi_y <= 1))


def test_far_pair_uses_exact_cell_integral():
    h, s, p = 0.25, 0.9, 2.5
    rule = transverse_rule(20, h, s, p, QuadratureSpec())
    sigma = s * p
    ref = integrate.dblquad(lambda y, x: abs(x - y) ** (-1 - sigma), 0, h,
                            lambda x: 20 * h, lambda x: 21 * h)[0]
    assert rule.weights(sigma).sum() == pytest.approx(ref, rel=1e-10)
    assert kernel_line_integral(20, h, sigma) == pytest.approx(ref, rel=1e-10)


def test_exterior_kappa_and_rule():
    lo, hi, sigma = -1.0, 1.0, 2.25
    X = 0.3
    ref = (integrate.quad(lambda y: (X - y) ** (-1 - sigma), -np.inf, lo)[0]
           + integrate.quad(lambda y: (y - X) ** (-1 - sigma), hi, np.inf)[0])
    assert exterior_kappa(X, lo, hi, sigma) == pytest.approx(ref, rel=1e-10)
    # boundary cell rule: int_0^h (t/h)^p kappa(lo + t) dt
    h, s, p = 0.25, 0.9, 2.5
    xi, wt = exterior_rule_1d(8, h, lo, s, p, QuadratureSpec())
    ref0 = integrate.quad(lambda t: (t / h) ** p * exterior_kappa(lo + t, lo, hi, sigma),
                          0, h, limit=200)[0]
    assert np.dot(wt[0], xi[0] ** p) == pytest.approx(ref0, rel=1e-6)


@pytest.mark.parametrize("z, r, alpha", [(0.0, 0.3, 2.125), (0.7, 0.25, 2.125),
                                         (3.0, 1.0, 1.5)])
def test_kernel_tail(z, r, alpha):
    ref = integrate.quad(lambda t: (r * r + t * t) ** (-alpha), z, np.inf, epsabs=0)[0]
    assert kernel_tail(z, r, alpha) == pytest.approx(ref, rel=1e-10)


@pytest.mark.parametrize("r", [0.05, 0.25, 1.0])
def test_axial_weights_add_up(r):
    # tents of all offsets add to the constant h1, so the weights must add to
    # h1 times the line integral of the kernel
    h1, s, p = 0.25, 0.9, 2.5
    sigma = s * p
    alpha = 1 + sigma / 2
    w0 = axial_near_rule(0, r, h1, alpha, 4)[2].sum()
    w1 = axial_near_rule(1, r, h1, alpha, 4)[2].sum()
    mid = sum(axial_weight(d, r, h1, alpha) for d in range(2, 12))
    total = w0 + 2 * (w1 + mid + axial_tail_weight(12, r, h1, alpha))
    assert total == pytest.approx(h1 * theta_np(2, s, p) * r ** (-1 - sigma), rel=1e-10)


def test_axial_near_rule_rejects_far_offsets():
    with pytest.raises(ValueError):
        axial_near_rule(2, 0.3, 0.25, 2.0, 4)
