import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog as scipy_linprog

from lvpop import errors
from lvpop.engine import sample_transitions
from lvpop.lp import linprog
from lvpop.potential import (compute_b, delta_U_of_transitions, expected_delta_U, nett_matrix,
                             potential_for, potential_U, star_product_potential)
from lvpop.protocol import ProtocolSpec, builtin, validate
from lvpop.states import AggregateState


def lv(matrix):
    k = len(matrix)
    return ProtocolSpec(k, [str(i) for i in range(k)], "lv", matrix=matrix)


@st.composite
def skew(draw, kmax=8):
    k = draw(st.integers(2, kmax))
    vals = st.sampled_from([-1.0, -0.5, 0.0, 0.0, 0.25, 0.5, 1.0])
    M = np.array([[draw(vals) for _ in range(k)] for _ in range(k)])
    A = np.triu(M, 1)
    return A - A.T


@st.composite
def random_lv(draw, kmax=5):
    k = draw(st.integers(2, kmax))
    vals = st.sampled_from([0.0, 0.3, 0.5, 1.0])
    P = np.array([[0.0 if i == j else draw(vals) for j in range(k)] for i in range(k)])
    for i in range(k):  # keep every species interacting
        if not (P[i].any() or P[:, i].any()):
            P[i, (i + 1) % k] = 0.5
    return P


# ---- LP solver ------------------------------------------------------------


def test_lp_textbook():
    # max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
    r = linprog([-3, -5], A_ub=[[1, 0], [0, 2], [3, 2]], b_ub=[4, 12, 18])
    assert r.status == "optimal"
    np.testing.assert_allclose(r.x, [2, 6], atol=1e-12)
    assert r.fun == pytest.approx(-36)


def test_lp_infeasible_and_unbounded():
    assert linprog([1], A_ub=[[1]], b_ub=[-1]).status == "infeasible"
    assert linprog([-1], A_ub=[[-1]], b_ub=[0]).status == "unbounded"


def test_lp_degenerate_equalities():
    # redundant equality rows must not break phase 2
    r = linprog([1, 1], A_eq=[[1, 1], [2, 2]], b_eq=[1, 2])
    assert r.status == "optimal" and r.fun == pytest.approx(1)


@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_lp_matches_scipy(n, m, seed):
    g = np.random.default_rng(seed)
    c = g.normal(size=n)
    A = g.normal(size=(m, n))
    b = g.uniform(0.5, 2.0, size=m)
    bounds_rows = np.eye(n)
    A_ub = np.vstack([A, bounds_rows])
    b_ub = np.concatenate([b, np.full(n, 3.0)])
    ours = linprog(c, A_ub=A_ub, b_ub=b_ub)
    ref = scipy_linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=[(0, None)] * n, method="highs")
    assert ours.status == "optimal" and ref.status == 0
    assert ours.fun == pytest.approx(ref.fun, abs=1e-8)


# ---- nett matrix and b ----------------------------------------------------


def test_nett_matrix_examples():
    np.testing.assert_array_equal(nett_matrix(builtin("rps")),
                                  [[0, 1, -1], [-1, 0, 1], [1, -1, 0]])
    np.testing.assert_array_equal(nett_matrix(builtin("life_death")), np.zeros((2, 2)))
    np.testing.assert_array_equal(nett_matrix(lv([[0, 1], [0, 0]])), [[0, 1], [-1, 0]])


def test_nett_matrix_rejects_general():
    with pytest.raises(errors.NotLvKind):
        nett_matrix(builtin("counterexample"))


@given(random_lv())
def test_nett_matrix_skew(P):
    A = nett_matrix(lv(P.tolist()))
    np.testing.assert_allclose(A, -A.T, atol=1e-12)


def test_compute_b_rps():
    A = nett_matrix(builtin("rps"))
    assert np.allclose(np.ones(3) @ A, 0)  # oracle: (1,1,1) is in the left kernel
    pv = compute_b(A)
    assert pv.case == "i"
    np.testing.assert_allclose(pv.b, [1, 1, 1], atol=1e-9)
    assert pv.residual < 1e-9


def test_compute_b_zero_matrix():
    pv = compute_b(np.zeros((2, 2)))
    assert pv.case == "i"
    np.testing.assert_allclose(pv.b, [1, 1])


def test_compute_b_dominant_pair():
    pv = compute_b(np.array([[0.0, 1.0], [-1.0, 0.0]]))
    assert pv.case == "ii"
    np.testing.assert_allclose(pv.b, [1, -1], atol=1e-12)
    np.testing.assert_allclose(pv.b @ np.array([[0, 1], [-1, 0]]), [1, 1])


def test_compute_b_ws_case_ii():
    pv = potential_for(builtin("ws"))
    A = nett_matrix(builtin("ws"))
    assert pv.case == "ii"
    assert (pv.b @ A).min() >= 1e-9


def test_compute_b_rejects_non_skew():
    with pytest.raises(ValueError):
        compute_b(np.array([[0, 1], [1, 0]]))


@given(skew())
def test_compute_b_postconditions(A):
    pv = compute_b(A)
    b = pv.b
    assert np.abs(b).max() == pytest.approx(1.0, abs=1e-12)
    h = b @ A
    if pv.case == "i":
        assert b.min() >= 0 and np.abs(h).max() <= 1e-9
    else:
        assert h.min() >= 1e-9
        # case (ii) only when no non-negative kernel vector exists
        ref = scipy_linprog(-np.ones(len(A)), A_eq=A.T, b_eq=np.zeros(len(A)),
                            bounds=[(0, 1)] * len(A), method="highs")
        assert -ref.fun <= 1e-9


# ---- potential values ------------------------------------------------------


def test_potential_values():
    assert potential_U([1, 1, 1], [1 / 3] * 3) == pytest.approx(3 * math.log(1 / 3))
    assert potential_U([1, 1, 1], [0.5, 0.3, 0.2]) == pytest.approx(math.log(0.03))
    assert potential_U([1, 0], [1, 0]) == 0.0
    with pytest.raises(errors.ZeroPopulation):
        potential_U([1, 1], [1, 0])


@given(st.integers(2, 6), st.integers(0, 2**31 - 1))
def test_potential_permutation_invariant(k, seed):
    g = np.random.default_rng(seed)
    b = g.normal(size=k)
    x = g.dirichlet(np.ones(k))
    perm = g.permutation(k)
    assert potential_U(b[perm], x[perm]) == pytest.approx(potential_U(b, x), rel=1e-12, abs=1e-12)


def test_star_product_potential():
    assert star_product_potential((100, 100, 100)) == (10**6, 0)
    assert star_product_potential((7, 0, 0)) == (0, 7)
    assert star_product_potential((99, 100, 101)) == (999900, 2)


# ---- drift ----------------------------------------------------------------


def test_expected_delta_absorbing_zero():
    for spec in (builtin("rps"), builtin("ws")):
        vp = validate(spec)
        b = potential_for(vp)
        c = [0] * vp.k
        c[0] = 10
        assert expected_delta_U(c, vp, b) == 0.0


def test_expected_delta_rps_balanced_closed_form():
    # every firing moves one agent: n_j -> n_j - 1, n_i -> n_i + 1 at n_i = n_j = m
    m = 200
    n = 3 * m
    per = math.log1p(1 / m) + math.log1p(-1 / m)
    expect = 3 * (m * m / n**2) * per
    got = expected_delta_U([m, m, m], builtin("rps"), [1, 1, 1])
    assert got == pytest.approx(expect, rel=1e-12)
    assert got < 0


def _mc_check(counts, spec, b, mode, size, z, seed):
    vp = validate(spec)
    lost, gained = sample_transitions(AggregateState(counts), vp, seed, size, mode)
    d = delta_U_of_transitions(counts, b, lost, gained)
    exp = expected_delta_U(counts, vp, b, mode)
    se = d.std(ddof=1) / math.sqrt(size)
    assert abs(d.mean() - exp) <= z * se, (d.mean(), exp, se)
    return exp


def test_drift_monte_carlo_222():
    exp = _mc_check([2, 2, 2], builtin("rps"), [1, 1, 1], "paper", 10**6, 3, 7)
    assert exp < 0


@pytest.mark.parametrize("mode", ["paper", "exact"])
def test_drift_mode_flag(mode):
    _mc_check([5, 9, 4], builtin("rps"), [1, 1, 1], mode, 10**6, 4, 11)


@given(random_lv(), st.integers(0, 2**31 - 1))
def test_drift_random_interior(P, seed):
    vp = validate(lv(P.tolist()))
    b = potential_for(vp)
    g = np.random.default_rng(seed)
    counts = list(g.integers(3, 40, size=vp.k))
    _mc_check(counts, vp, b, "paper", 10**6, 4, seed)


def test_expected_delta_zero_population():
    with pytest.raises(errors.ZeroPopulation):
        expected_delta_U([1, 3, 3], builtin("rps"), [1, 1, 1])
