import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lvpop import errors
from lvpop.continuous import (d_infty, d_U, estimate_period, linear_approx_rps, rhs,
                              rk4_integrate)
from lvpop.engine import fixed_steps_batch
from lvpop.potential import nett_matrix
from lvpop.protocol import builtin
from lvpop.states import AggregateState

A = nett_matrix(builtin("rps"))
X0 = np.array([0.5, 0.3, 0.2])
simplex = st.lists(st.floats(0.01, 1.0), min_size=3, max_size=3).map(
    lambda v: np.array(v) / sum(v))


def test_rhs_examples():
    np.testing.assert_allclose(rhs([1 / 3] * 3, A), 0, atol=1e-16)
    np.testing.assert_allclose(rhs(X0, A), [0.05, -0.09, 0.04], atol=1e-15)
    np.testing.assert_array_equal(rhs(X0, np.zeros((3, 3))), 0)


@given(simplex)
def test_rhs_sums_to_zero(x):
    assert abs(rhs(x, A).sum()) < 1e-14


def test_duration_zero():
    o = rk4_integrate(X0, A, 0.0, 1e-3)
    assert len(o.t) == 1
    np.testing.assert_array_equal(o.x[0], X0)


def test_orbit_ends_at_duration():
    o = rk4_integrate(X0, A, 1.2345, 0.1)
    assert o.t[-1] == 1.2345
    assert o.simplex_drift < 1e-10


def test_conservation_one_period():
    T = estimate_period(X0, A)
    o = rk4_integrate(X0, A, T, 1e-3, b=[1, 1, 1])
    assert o.max_potential_drift() < 1e-8
    assert d_infty(o.final, X0) < 1e-6
    assert np.abs(o.x.sum(axis=1) - 1).max() < 1e-10


def test_rk4_fourth_order():
    T = estimate_period(X0, A)
    errs = [d_infty(rk4_integrate(X0, A, T, h).final, X0) for h in (0.1, 0.05, 0.025)]
    for e1, e2 in zip(errs, errs[1:]):
        assert 14 < e1 / e2 < 18


def test_step_too_large():
    with pytest.raises(errors.StepSizeTooLarge):
        rk4_integrate([0.98, 0.01, 0.01], A, 10, 5.0)


def test_boundary_is_invariant():
    o = rk4_integrate([1, 0, 0], A, 2.0, 0.1, b=[1, 1, 1])
    assert o.U is None
    np.testing.assert_array_equal(o.final, [1, 0, 0])
    o = rk4_integrate([0.6, 0.4, 0], A, 3.0, 0.01)
    assert o.final[2] == 0 and o.final[0] > 0.6


def test_period_near_center_matches_linearisation():
    # the Jacobian at the centre is A/3 with eigenvalues +-i/sqrt(3)
    eig = np.linalg.eigvals(A / 3)
    assert np.allclose(np.abs(eig.imag).max(), 1 / math.sqrt(3))
    T = estimate_period([1 / 3 + 1e-4, 1 / 3 - 1e-4, 1 / 3], A)
    assert T == pytest.approx(2 * math.pi * math.sqrt(3), rel=1e-6)


def test_period_rotations_equal():
    Ts = [estimate_period(np.roll(X0, r), A) for r in range(3)]
    assert max(Ts) - min(Ts) < 1e-8


def test_period_errors():
    with pytest.raises(errors.FixedPoint):
        estimate_period([1 / 3] * 3, A)
    with pytest.raises(errors.NoReturnWithinBound):
        estimate_period(X0, A, max_time=5.0)


def test_distances():
    assert d_infty([0.4, 0.3, 0.3], [0.3, 0.4, 0.3]) == pytest.approx(0.1)
    assert d_U(X0, X0, [1, 1, 1]) == 0
    assert d_U(X0, [1 / 3] * 3, [1, 1, 1]) == pytest.approx(abs(math.log(0.03) - math.log(1 / 27)))
    assert d_U(X0, [1 / 3] * 3, [1, 1, 1]) == pytest.approx(0.21072, abs=1e-5)
    with pytest.raises(errors.ZeroPopulation):
        d_U([1, 0, 0], X0, [1, 1, 1])


@given(simplex, simplex, simplex)
def test_d_infty_metric(x, y, z):
    assert d_infty(x, y) == d_infty(y, x) >= 0
    assert d_infty(x, x) == 0
    assert d_infty(x, z) <= d_infty(x, y) + d_infty(y, z) + 1e-15


def test_linear_approx():
    np.testing.assert_array_equal(linear_approx_rps([1 / 3] * 3, 50, 100), [1 / 3] * 3)
    np.testing.assert_array_equal(linear_approx_rps(X0, 0, 100), X0)
    np.testing.assert_allclose(linear_approx_rps(X0, 10, 100),
                               X0 * (1 + 0.1 * np.array([0.1, -0.3, 0.2])))


def test_linear_approx_tracks_simulation_mean():
    n = 10**4
    T = round(n ** (2 / 3))
    runs = fixed_steps_batch(AggregateState.from_fractions(X0, n), builtin("rps"), 3, T, 10**4,
                             "paper")
    mean = runs.mean(axis=0) / n
    assert d_infty(mean, linear_approx_rps(X0, T, n)) < 0.01


def test_simulation_tracks_ode():
    n = 10**4
    T = round(n ** (2 / 3))
    runs = fixed_steps_batch(AggregateState.from_fractions(X0, n), builtin("rps"), 4, T, 1000,
                             "paper")
    xc = rk4_integrate(X0, A, T / n, (T / n) / 100).final
    dev = np.abs(runs / n - xc).max(axis=1)
    assert np.quantile(dev, 0.95) < 10 * math.sqrt(T) / n
