import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from hyperoep.errors import DomainError, NoZeroError
from hyperoep.spectral import (
    RadialODEParams,
    c1_constant,
    c1_radius_report,
    cheng_check,
    eigen_bounds,
    lambda1_ball,
    radius_for_lambda,
    savo_constant,
    shoot_first_zero,
)


def euclidean_first_zero(n: int, lam: float) -> float:
    """First zero of v'' + (n-1) v'/t + lam v = 0, v(0) = 1, by plain shooting."""
    t0 = 1e-6
    v0 = 1 - lam * t0**2 / (2 * n)

    def rhs(t, y):
        return [y[1], -(n - 1) / t * y[1] - lam * y[0]]

    def zero(t, y):
        return y[0]
    zero.terminal = True

    sol = solve_ivp(rhs, (t0, 50.0), [v0, -lam * t0 / n], method="LSODA", rtol=1e-12,
                    atol=1e-14, events=zero)
    return float(sol.t_events[0][0])


def test_euclidean_oracle_reproduces_bessel_zero():
    assert euclidean_first_zero(2, 1.0) == pytest.approx(2.404825557695773, abs=1e-8)


def test_exact_three_dimensional_values():
    assert lambda1_ball(3, 1, 1).lam == pytest.approx(1 + math.pi**2, abs=1e-6)
    assert lambda1_ball(3, 1, 2).lam == pytest.approx(1 + math.pi**2 / 4, abs=1e-6)


def test_large_radius_approaches_threshold():
    assert abs(lambda1_ball(2, 1, 50).lam - 0.25) < 0.01


def test_lambda1_rejects_bad_radius():
    for R in (0.0, -1.0, math.inf):
        with pytest.raises(DomainError):
            lambda1_ball(2, 1, R)


def test_shooting_examples():
    assert shoot_first_zero(n=3, k=1, lam=1 + math.pi**2).R == pytest.approx(1.0, abs=1e-6)
    R = shoot_first_zero(n=2, k=1, lam=1).R
    assert math.pi / math.sqrt(3) <= R <= 2 * math.pi / math.sqrt(3)
    assert shoot_first_zero(RadialODEParams(2, 1.0, 1.0)).R == R


def test_shooting_residual_and_profile():
    shot = shoot_first_zero(n=2, k=1, lam=3.0)
    assert shot.residual < 1e-10
    assert shot.profile.vs[0] == 1.0
    assert np.all(shot.profile.vs[:-1] > 0)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_euclidean_limit_against_oracle(n):
    R = shoot_first_zero(n=n, k=1e-12, lam=1.0).R
    assert R == pytest.approx(euclidean_first_zero(n, 1.0), abs=1e-5)


def test_no_zero_below_threshold():
    with pytest.raises(NoZeroError):
        shoot_first_zero(n=3, k=1, lam=1.0)
    with pytest.raises(NoZeroError):
        shoot_first_zero(n=2, k=1, lam=0.2)


def test_radius_for_lambda_is_shooting():
    assert radius_for_lambda(2, 1, 2.0) == shoot_first_zero(n=2, k=1, lam=2.0).R


def test_c1_examples():
    c = c1_constant(2, 1)
    assert math.pi / math.sqrt(3) <= c <= 2 * math.pi / math.sqrt(3)
    with pytest.raises(NoZeroError):
        c1_constant(3, 1)
    c = c1_constant(3, 0.5)
    assert lambda1_ball(3, 0.5, c).lam == pytest.approx(1.0, rel=1e-8)


def test_c1_radius_report_scaling():
    rep = c1_radius_report(2, 1.0, 1.0)
    assert rep["discrepancy"] == pytest.approx(0.0, abs=1e-12)
    rep = c1_radius_report(2, 1.0, 2.0)
    # c1/sqrt(lambda) and R_{lambda} differ once lambda != 1
    assert abs(rep["discrepancy"]) > 0.1


def test_savo_constant_closed_form():
    # int_0^inf t^2 / sinh^2 t dt = pi^2 / 6
    for n in (2, 3, 5):
        assert savo_constant(n) == pytest.approx(math.pi**4 * (n - 1) * (n + 1) / 12, rel=1e-10)


def test_bounds_examples():
    b = eigen_bounds(3, 1, 1)
    assert b.exact == pytest.approx(1 + math.pi**2)
    assert abs(b.computed - b.exact) < 1e-6
    b = eigen_bounds(2, 1, 2)
    assert 0.25 + (math.pi / 4) ** 2 <= b.computed <= 0.25 + (math.pi / 2) ** 2
    assert b.artamoshin_holds
    b = eigen_bounds(4, 1, 1)
    assert b.computed > 9 / 4 + math.pi**2
    d = b.to_dict()
    for key in ("mckean_holds", "artamoshin_holds", "savo_printed_holds", "savo_corrected_holds"):
        assert key in d


def test_bounds_without_computation():
    b = eigen_bounds(2, 0.5, 1, compute=False)
    assert b.computed is None and b.mckean_holds is None
    assert b.savo_constant is None


def test_cheng_examples():
    assert cheng_check(2, 1, 1, 1.3).margin == 0.0
    rep = cheng_check(2, 2, 1, 1)
    assert rep.holds and rep.lambda_k1 >= rep.lambda_k2
    rep = cheng_check(3, 4, 1, 1)
    assert rep.lambda_k1 == pytest.approx(4 + math.pi**2, abs=1e-6)
    assert rep.lambda_k2 == pytest.approx(1 + math.pi**2, abs=1e-6)
    with pytest.raises(DomainError):
        cheng_check(2, 1, 2, 1)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 4), st.floats(0.1, 2.0), st.floats(0.3, 5.0), st.floats(1.05, 2.0))
def test_domain_monotonicity(n, k, R, factor):
    assert lambda1_ball(n, k, R * factor).lam < lambda1_ball(n, k, R).lam


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 4), st.floats(0.1, 2.0), st.floats(0.3, 5.0))
def test_shoot_inverts_lambda1(n, k, R):
    lam = lambda1_ball(n, k, R).lam
    assert shoot_first_zero(n=n, k=k, lam=lam).R == pytest.approx(R, rel=1e-8)
