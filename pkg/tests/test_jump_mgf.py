import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from hawkesvol.jump_mgf import DomainExceeded, MgfProfile, epsilon, mean, mgf, mgf_inverse
from hawkesvol.model import Constant, Exponential, Gamma

LAWS = [Exponential(2.0), Gamma(2.0, 2.0), Constant(0.1), Exponential(10.0), Gamma(0.5, 3.0)]


def test_exponential_value():
    assert mgf(Exponential(2.0), 1.0) == 2.0


def test_gamma_value():
    assert mgf(Gamma(2.0, 2.0), 1.0) == 4.0


def test_exponential_against_quadrature():
    lam, t = 2.0, 1.0
    val, _ = integrate.quad(lambda x: lam * math.exp((t - lam) * x), 0, math.inf)
    assert math.isclose(mgf(Exponential(lam), t), val, rel_tol=1e-9)


def test_constant_is_entire():
    assert epsilon(Constant(0.3)) == math.inf
    assert math.isclose(mgf(Constant(0.3), 100.0), math.exp(30.0))


@pytest.mark.parametrize("law", [Exponential(2.0), Gamma(3.0, 2.0)])
def test_domain_edge_raises(law):
    with pytest.raises(DomainExceeded):
        mgf(law, 2.0)


@pytest.mark.parametrize("law", LAWS)
@pytest.mark.parametrize("y", [0.5, 1.0, 2.0, 10.0])
def test_inverse_round_trip(law, y):
    assert math.isclose(mgf(law, mgf_inverse(law, y)), y, rel_tol=1e-12)


@pytest.mark.parametrize("law", LAWS)
def test_mean_is_derivative_at_zero(law):
    h = 1e-5
    fd = (mgf(law, h) - mgf(law, -h)) / (2 * h)
    assert math.isclose(fd, mean(law), rel_tol=1e-8)


@given(st.floats(-50.0, 9.99), st.floats(-50.0, 9.99))
def test_mgf_increasing(s, t):
    law = Exponential(10.0)
    if s < t:
        assert mgf(law, s) <= mgf(law, t)


def test_vectorised():
    out = mgf(Exponential(10.0), np.array([0.0, 5.0]))
    assert np.allclose(out, [1.0, 2.0])


def test_profile():
    p = MgfProfile.of(Gamma(2.0, 20.0))
    assert p.epsilon_J == 20.0 and math.isclose(p.mean, 0.1)
    assert math.isclose(p(p.inverse(3.0)), 3.0)
