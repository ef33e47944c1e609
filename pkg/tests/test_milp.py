import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from dayahead.lp import LinearProgram, solve_lp
from dayahead.milp import (
    MilpStatus,
    MixedIntegerProgram,
    NodeLimitError,
    UnboundedRelaxationError,
    solve_milp,
)


def brute_force(lp: LinearProgram, binaries) -> float | None:
    best = None
    for bits in itertools.product((0.0, 1.0), repeat=len(binaries)):
        lo, hi = lp.lower.copy(), lp.upper.copy()
        lo[list(binaries)] = hi[list(binaries)] = bits
        res = linprog(lp.cost, A_ub=lp.A_ub if lp.A_ub.size else None, b_ub=lp.b_ub if lp.b_ub.size else None,
                      A_eq=lp.A_eq if lp.A_eq.size else None, b_eq=lp.b_eq if lp.b_eq.size else None,
                      bounds=list(zip(lo, hi)), method="highs")
        if res.status == 0 and (best is None or res.fun < best):
            best = float(res.fun)
    return best


def brute_force_pure(lp: LinearProgram) -> float | None:
    """All-binary problems: check every 0/1 point at once."""
    X = np.array(list(itertools.product((0.0, 1.0), repeat=lp.n)))
    ok = np.all(X @ lp.A_ub.T <= lp.b_ub + 1e-9, axis=1)
    if lp.A_eq.size:
        ok &= np.all(np.abs(X @ lp.A_eq.T - lp.b_eq) <= 1e-9, axis=1)
    return float((X[ok] @ lp.cost).min()) if ok.any() else None


def random_mip(rng, n_bin, n_cont):
    n = n_bin + n_cont
    m = int(rng.integers(1, 6))
    A = rng.integers(-5, 6, (m, n)).astype(float)
    x0 = np.concatenate([rng.integers(0, 2, n_bin), rng.uniform(0, 5, n_cont)])
    b = A @ x0 + rng.integers(0, 3, m)
    lower = np.zeros(n)
    upper = np.concatenate([np.ones(n_bin), rng.integers(1, 8, n_cont)])
    A_eq = np.zeros((0, n))
    b_eq = np.zeros(0)
    if rng.random() < 0.3 and n_cont:
        A_eq = rng.integers(-3, 4, (1, n)).astype(float)
        b_eq = A_eq @ np.clip(x0, lower, upper)
    lp = LinearProgram(cost=rng.integers(-9, 10, n).astype(float), A_eq=A_eq, b_eq=b_eq,
                       A_ub=A, b_ub=b, lower=lower, upper=upper)
    return MixedIntegerProgram(lp, tuple(range(n_bin)))


def test_no_binaries_equals_lp():
    lp = LinearProgram.build([1.0, -2.0], A_ub=[[1.0, 1.0]], b_ub=[3.5], bounds=[(0, 2), (0, 2)])
    mip = solve_milp(MixedIntegerProgram(lp, ()))
    sol = solve_lp(lp)
    assert mip.objective == pytest.approx(sol.objective)
    np.testing.assert_allclose(mip.x, sol.x)
    assert mip.nodes_explored == 1


def test_two_binaries_knapsack():
    lp = LinearProgram.build([-1.0, -1.0], A_ub=[[1.0, 1.0]], b_ub=[1.0], bounds=[(0, 1), (0, 1)])
    sol = solve_milp(MixedIntegerProgram(lp, (0, 1)))
    assert sol.status is MilpStatus.OPTIMAL
    assert sol.objective == pytest.approx(-1.0)
    assert sorted(sol.x) == [0.0, 1.0]


def test_fractional_root_needs_branching():
    # relaxation optimum is x = (0.5, 0.5, 0.5)
    lp = LinearProgram.build([-2.0, -2.0, -2.0], A_ub=[[1, 1, 0], [0, 1, 1], [1, 0, 1]], b_ub=[1, 1, 1],
                             bounds=[(0, 1)] * 3)
    sol = solve_milp(MixedIntegerProgram(lp, (0, 1, 2)))
    assert sol.root_bound == pytest.approx(-3.0)
    assert sol.objective == pytest.approx(-2.0)
    assert sol.nodes_explored > 1


def test_infeasible():
    lp = LinearProgram.build([1.0, 1.0], A_eq=[[1.0, 1.0]], b_eq=[1.5], bounds=[(0, 1), (0, 1)])
    sol = solve_milp(MixedIntegerProgram(lp, (0, 1)))
    assert sol.status is MilpStatus.INFEASIBLE
    assert not sol.optimal


def test_infeasible_relaxation():
    lp = LinearProgram.build([1.0], A_ub=[[1.0]], b_ub=[-1.0], bounds=[(0, 1)])
    assert solve_milp(MixedIntegerProgram(lp, (0,))).status is MilpStatus.INFEASIBLE


def test_node_limit_is_an_error():
    lp = LinearProgram.build([-2.0, -2.0, -2.0], A_ub=[[1, 1, 0], [0, 1, 1], [1, 0, 1]], b_ub=[1, 1, 1],
                             bounds=[(0, 1)] * 3)
    with pytest.raises(NodeLimitError):
        solve_milp(MixedIntegerProgram(lp, (0, 1, 2)), max_nodes=2)


def test_unbounded_relaxation():
    lp = LinearProgram.build([0.0, -1.0], bounds=[(0, 1), (0, None)])
    with pytest.raises(UnboundedRelaxationError):
        solve_milp(MixedIntegerProgram(lp, (0,)))


def test_binary_validation():
    lp = LinearProgram.build([1.0, 1.0], bounds=[(0, 1), (0, 5)])
    with pytest.raises(ValueError):
        MixedIntegerProgram(lp, (1,))
    with pytest.raises(ValueError):
        MixedIntegerProgram(lp, (2,))
    assert MixedIntegerProgram(lp, (0, 0)).binary_vars == (0,)


def test_deterministic_repeat():
    mip = random_mip(np.random.default_rng(7), 8, 3)
    a, b = solve_milp(mip), solve_milp(mip)
    np.testing.assert_array_equal(a.x, b.x)
    assert a.objective == b.objective and a.nodes_explored == b.nodes_explored


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.integers(0, 4))
def test_matches_brute_force(seed, n_bin, n_cont):
    mip = random_mip(np.random.default_rng(seed), n_bin, n_cont)
    sol = solve_milp(mip)
    best = brute_force(mip.lp, mip.binary_vars)
    if best is None:
        assert sol.status is MilpStatus.INFEASIBLE
        return
    assert sol.optimal
    assert sol.objective == pytest.approx(best, rel=1e-6, abs=1e-6)
    xb = sol.x[list(mip.binary_vars)]
    assert np.all(np.minimum(np.abs(xb), np.abs(xb - 1)) <= 1e-6)
    lp = mip.lp
    assert np.all(lp.A_ub @ sol.x <= lp.b_ub + 1e-7)
    assert np.all(np.abs(lp.A_eq @ sol.x - lp.b_eq) <= 1e-7)
    assert sol.root_bound <= sol.objective + 1e-7


@pytest.mark.parametrize("seed", range(10))
def test_fourteen_binaries(seed):
    mip = random_mip(np.random.default_rng(1000 + seed), 14, 0)
    sol = solve_milp(mip)
    best = brute_force_pure(mip.lp)
    assert (best is None) == (not sol.optimal)
    if best is not None:
        assert sol.objective == pytest.approx(best, rel=1e-6, abs=1e-6)
