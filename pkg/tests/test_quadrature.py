from math import factorial

import numpy as np
import pytest

from porofem.quadrature import barycentric, gauss_legendre_01, quadrature_rule


def moment_oracle(a, b):
    """int over the reference triangle of x^a y^b, by the factorial formula."""
    return factorial(a) * factorial(b) / factorial(a + b + 2)


def test_degree_one_is_centroid():
    pts, wts = quadrature_rule(1)
    assert pts.shape == (1, 2)
    assert np.allclose(pts[0], [1.0 / 3.0, 1.0 / 3.0])
    assert wts[0] == pytest.approx(0.5)


@pytest.mark.parametrize("degree", range(1, 13))
def test_weights_sum_to_reference_area(degree):
    _, wts = quadrature_rule(degree)
    assert wts.sum() == pytest.approx(0.5, abs=1e-14)


@pytest.mark.parametrize("degree", range(1, 13))
def test_exact_for_all_monomials_up_to_degree(degree):
    pts, wts = quadrature_rule(degree)
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            approx = float(wts @ (pts[:, 0] ** a * pts[:, 1] ** b))
            assert approx == pytest.approx(moment_oracle(a, b), rel=1e-13, abs=1e-15)


def test_product_of_barycentrics_example():
    pts, wts = quadrature_rule(2)
    lam = barycentric(pts)
    assert float(wts @ (lam[:, 0] * lam[:, 1])) == pytest.approx(1.0 / 24.0, abs=1e-15)


@pytest.mark.parametrize("degree", [0, 13, -2])
def test_unsupported_degree_rejected(degree):
    with pytest.raises(ValueError):
        quadrature_rule(degree)


def test_edge_rule_exactness():
    x, w = gauss_legendre_01(5)
    for a in range(10):
        assert float(w @ x**a) == pytest.approx(1.0 / (a + 1), rel=1e-13)
