"""Hourly economic dispatch over a committed set, and nodal (locational) prices.

Three independent routes to the same answer:

* ``economic_dispatch`` + ``nodal_prices``: LP solve, prices from duals.
* ``merit_order_dispatch``: stack units by cost, back off at congested
  lines, then trade output between units until no cheaper exchange exists.
* ``marginal_redispatch_price``: price one extra MW at a bus by shifting the
  marginal units so that every congested line keeps its flow.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .grid import GridCase, load_vector
from .lp import LinearProgram, LpSolution, solve_lp
from .network import DcNetwork, build_network

BINDING_TOL = 1e-5
MARGINAL_TOL = 1e-6


class DispatchInfeasible(RuntimeError):
    def __init__(self, hour: int, committed: Iterable[str], reason: str = "no feasible dispatch"):
        self.hour = hour
        self.committed = tuple(committed)
        super().__init__(f"hour {hour}, committed {list(self.committed)}: {reason}")


class DegenerateRedispatchError(ValueError):
    """Marginal units and binding lines do not pin down a unique redispatch."""


@dataclass(frozen=True)
class DispatchResult:
    hour: int
    committed: tuple[str, ...]
    output: np.ndarray
    flows: np.ndarray
    objective: float
    binding_lines: tuple[int, ...]
    load: np.ndarray
    steps: tuple["MeritStep", ...] = field(default=(), repr=False)


@dataclass(frozen=True)
class DualBundle:
    hour: int
    lam: float
    mu_forward: np.ndarray
    mu_backward: np.ndarray
    tau_upper: np.ndarray
    tau_lower: np.ndarray
    lp: LinearProgram | None = field(default=None, repr=False)
    solution: LpSolution | None = field(default=None, repr=False)


@dataclass(frozen=True)
class NodalPriceVector:
    hour: int
    prices: np.ndarray
    source: str


@dataclass(frozen=True)
class RedispatchPrice:
    bus: int
    price: float
    shifts: dict[str, float]


@dataclass(frozen=True)
class MeritStep:
    """One state visited by the merit-order procedure."""

    label: str
    output: np.ndarray
    flows: np.ndarray
    violated_lines: tuple[int, ...]


def _committed_indices(case: GridCase, committed) -> list[int]:
    out = set()
    for c in committed:
        out.add(case.generator_index(c) if isinstance(c, str) else int(c))
    if not out:
        raise ValueError("committed set must not be empty")
    return sorted(out)


def _incidence(case: GridCase, gens: list[int]) -> np.ndarray:
    inc = np.zeros((case.bus_count, len(gens)))
    for col, g in enumerate(gens):
        inc[case.bus_index(case.generators[g].bus), col] = 1.0
    return inc


def _binding(flows: np.ndarray, limits: np.ndarray, ids) -> tuple[int, ...]:
    return tuple(i for i, f, lim in zip(ids, flows, limits) if abs(f) >= lim - BINDING_TOL)


def _injection(case: GridCase, output: np.ndarray, load: np.ndarray) -> np.ndarray:
    inj = -load.copy()
    for g, p in zip(case.generators, output):
        inj[case.bus_index(g.bus)] += p
    return inj


def dispatch_lp(case: GridCase, hour: int, gens: list[int], net: DcNetwork) -> LinearProgram:
    load = load_vector(case, hour)
    TG = net.T @ _incidence(case, gens)
    TL = net.T @ load
    return LinearProgram(
        cost=[case.generators[g].marginal_cost for g in gens],
        A_eq=np.ones((1, len(gens))),
        b_eq=[load.sum()],
        A_ub=np.vstack([TG, -TG]),
        b_ub=np.concatenate([net.limits + TL, net.limits - TL]),
        lower=[case.generators[g].p_min for g in gens],
        upper=[case.generators[g].p_max for g in gens],
    )


def economic_dispatch(case: GridCase, hour: int, committed, net: DcNetwork | None = None):
    """Least-cost dispatch of the committed units at ``hour``.

    Returns ``(DispatchResult, DualBundle)``; raises :class:`DispatchInfeasible`.
    """
    net = net or build_network(case)
    gens = _committed_indices(case, committed)
    names = tuple(case.generators[g].name for g in gens)
    lp = dispatch_lp(case, hour, gens, net)
    sol = solve_lp(lp)
    if not sol.optimal:
        raise DispatchInfeasible(hour, names, sol.status.value)

    G = len(case.generators)
    nl = len(case.lines)
    output = np.zeros(G)
    tau_up = np.zeros(G)
    tau_lo = np.zeros(G)
    output[gens] = sol.x
    tau_up[gens] = sol.upper_duals
    tau_lo[gens] = sol.lower_duals
    load = load_vector(case, hour)
    flows = net.T @ _injection(case, output, load)
    result = DispatchResult(
        hour=hour,
        committed=names,
        output=output,
        flows=flows,
        objective=sol.objective,
        binding_lines=_binding(flows, net.limits, net.line_ids),
        load=load,
    )
    duals = DualBundle(
        hour=hour,
        lam=float(sol.eq_duals[0]),
        mu_forward=sol.ineq_duals[:nl].copy(),
        mu_backward=sol.ineq_duals[nl:].copy(),
        tau_upper=tau_up,
        tau_lower=tau_lo,
        lp=lp,
        solution=sol,
    )
    return result, duals


def nodal_prices(duals: DualBundle, T: np.ndarray) -> NodalPriceVector:
    """rho_i = -lam - sum_k (mu_fwd_k - mu_bwd_k) T[k, i]."""
    prices = -duals.lam - T.T @ (duals.mu_forward - duals.mu_backward)
    return NodalPriceVector(hour=duals.hour, prices=prices, source="dual")


def congestion_rent(case: GridCase, prices: NodalPriceVector, dispatch: DispatchResult) -> float:
    """Load payments minus generator revenue; nonnegative at an optimum."""
    withdrawal = -_injection(case, dispatch.output, dispatch.load)
    return float(prices.prices @ withdrawal)


# --- merit-order (logical) method -----------------------------------------

def _exchange_directions(n_units: int, sens: np.ndarray, binding: list[int]):
    """Elementary output exchanges: pairs, and triples neutral on one binding line."""
    for i, j in itertools.permutations(range(n_units), 2):
        d = np.zeros(n_units)
        d[i], d[j] = 1.0, -1.0
        yield d
    for l in binding:
        for i, j, k in itertools.combinations(range(n_units), 3):
            a, b, c = sens[l, i], sens[l, j], sens[l, k]
            d = np.zeros(n_units)
            d[i], d[j], d[k] = c - b, a - c, b - a
            scale = np.abs(d).max()
            if scale < 1e-12:
                continue
            d /= scale
            yield d
            yield -d


def merit_order_dispatch(case: GridCase, hour: int, committed, net: DcNetwork | None = None) -> DispatchResult:
    """Dispatch by the logical method, without an LP solver.

    While stacking, unserved demand is assumed to come from the slack bus, so
    the flows of every intermediate state are well defined. The exchange phase
    is exact when at most one line ends up congested.
    """
    net = net or build_network(case)
    gens = _committed_indices(case, committed)
    names = tuple(case.generators[g].name for g in gens)
    load = load_vector(case, hour)
    demand = float(load.sum())
    T, limits = net.T, net.limits
    tol = 1e-9 * max(1.0, demand)

    G = len(case.generators)
    lo = np.array([case.generators[g].p_min for g in gens])
    hi = np.array([case.generators[g].p_max for g in gens])
    cost = np.array([case.generators[g].marginal_cost for g in gens])
    sens = T @ _incidence(case, gens)  # line flow per MW from each unit (slack supplies the rest)
    base_flow = -(T @ load)
    if lo.sum() > demand + tol:
        raise DispatchInfeasible(hour, names, f"minimum outputs {lo.sum():.6g} MW exceed demand {demand:.6g} MW")
    P = lo.copy()
    steps: list[MeritStep] = []

    def flows_of(p):
        return base_flow + sens @ p

    def record(label, p):
        full = np.zeros(G)
        full[gens] = p
        f = flows_of(p)
        bad = tuple(i for i, fl, lim in zip(net.line_ids, f, limits) if abs(fl) > lim + 1e-6)
        steps.append(MeritStep(label, full, f, bad))

    def max_step(p, d_units, f, allowed):
        g = sens @ d_units
        t = np.inf
        for fl, gl, lim in zip(f, g, allowed):
            if gl > 1e-12:
                t = min(t, (lim - fl) / gl)
            elif gl < -1e-12:
                t = min(t, (fl + lim) / -gl)
        return max(t, 0.0)

    record("minimum output", P)
    order = sorted(range(len(gens)), key=lambda u: (cost[u], gens[u]))
    for u in order:
        unserved = demand - P.sum()
        target = min(hi[u], P[u] + unserved)
        if target <= P[u] + tol:
            continue
        f0 = flows_of(P)
        allowed = np.maximum(limits, np.abs(f0))
        trial = P.copy()
        trial[u] = target
        name = case.generators[gens[u]].name
        record(f"raise {name} to {target:.6g} MW", trial)
        d = np.zeros(len(gens))
        d[u] = 1.0
        P[u] += min(target - P[u], max_step(P, d, f0, allowed))
        if P[u] < target - tol:
            record(f"back off {name} to {P[u]:.6g} MW", P)

    # exchange phase; index len(gens) is the unserved demand, priced prohibitively,
    # and flow above a line limit carries the same penalty per MW
    big = 1e3 * (1.0 + cost.max())
    ext_cost = np.append(cost, big)
    ext_lo = np.append(lo, 0.0)
    ext_hi = np.append(hi, np.inf)
    ext_sens = np.hstack([sens, np.zeros((len(limits), 1))])
    state = np.append(P, demand - P.sum())
    for _ in range(10_000):
        p = state[:-1]
        f = flows_of(p)
        allowed = np.maximum(limits, np.abs(f))
        over = np.abs(f) > limits + 1e-6
        binding = [l for l in range(len(limits)) if abs(abs(f[l]) - limits[l]) <= 1e-6]
        best = None
        for d in _exchange_directions(len(state), ext_sens, binding):
            g = ext_sens @ d
            rate = (ext_cost @ d + big * np.sign(f[over]) @ g[over]) / d[d > 0].sum()
            if rate > -1e-12 or (best is not None and rate >= best[0] - 1e-12):
                continue
            t = np.inf
            for val, dv, l_, h_ in zip(state, d, ext_lo, ext_hi):
                if dv > 0:
                    t = min(t, (h_ - val) / dv)
                elif dv < 0:
                    t = min(t, (val - l_) / -dv)
            for fl, gl, lim in zip(f, g, allowed):
                if gl > 1e-12:
                    t = min(t, (lim - fl) / gl)
                elif gl < -1e-12:
                    t = min(t, (fl + lim) / -gl)
            for fl, gl, lim in zip(f[over], g[over], limits[over]):
                if np.sign(fl) * gl < -1e-12:  # overload shrinks; stop where it vanishes
                    t = min(t, (abs(fl) - lim) / abs(gl))
            if t > 1e-9:
                best = (rate, d, t)
        if best is None:
            break
        _, d, t = best
        state = state + t * d
        state = np.clip(state, ext_lo, ext_hi)
        record("exchange", state[:-1])
    P = state[:-1]

    if state[-1] > 1e-6:
        raise DispatchInfeasible(hour, names, f"{state[-1]:.6g} MW cannot be served")
    flows = flows_of(P)
    if np.any(np.abs(flows) > limits + 1e-6):
        raise DispatchInfeasible(hour, names, "line limits cannot be met")
    output = np.zeros(G)
    output[gens] = P
    return DispatchResult(
        hour=hour,
        committed=names,
        output=output,
        flows=flows,
        objective=float(cost @ P),
        binding_lines=_binding(flows, limits, net.line_ids),
        load=load,
        steps=tuple(steps),
    )


# --- marginal redispatch pricing ------------------------------------------

def marginal_units(case: GridCase, dispatch: DispatchResult) -> list[int]:
    out = []
    for name in dispatch.committed:
        g = case.generator_index(name)
        spec = case.generators[g]
        p = dispatch.output[g]
        if spec.p_min + MARGINAL_TOL < p < spec.p_max - MARGINAL_TOL:
            out.append(g)
    return out


def marginal_redispatch_price(case: GridCase, dispatch: DispatchResult, net: DcNetwork | None, bus: int) -> RedispatchPrice:
    """Cost of serving one more MW at ``bus`` with the marginal units alone.

    The shifts dP of the marginal units must add up to 1 MW and leave the
    flow on every binding line unchanged.
    """
    net = net or build_network(case)
    M = marginal_units(case, dispatch)
    C = [net.line_ids.index(lid) for lid in dispatch.binding_lines]
    if len(M) != len(C) + 1:
        raise DegenerateRedispatchError(
            f"{len(M)} marginal units and {len(C)} binding lines; need exactly one more unit than lines"
        )
    k = case.bus_index(bus)
    A = np.zeros((len(M), len(M)))
    rhs = np.zeros(len(M))
    A[0, :] = 1.0
    rhs[0] = 1.0
    for row, l in enumerate(C, start=1):
        for col, g in enumerate(M):
            A[row, col] = net.T[l, case.bus_index(case.generators[g].bus)] - net.T[l, k]
    if abs(np.linalg.det(A)) < 1e-12:
        raise DegenerateRedispatchError("redispatch system is singular")
    shifts = np.linalg.solve(A, rhs)
    costs = np.array([case.generators[g].marginal_cost for g in M])
    return RedispatchPrice(
        bus=bus,
        price=float(costs @ shifts),
        shifts={case.generators[g].name: float(s) for g, s in zip(M, shifts)},
    )


def redispatch_prices(case: GridCase, dispatch: DispatchResult, net: DcNetwork | None = None) -> NodalPriceVector:
    net = net or build_network(case)
    prices = np.array([marginal_redispatch_price(case, dispatch, net, b).price for b in case.buses])
    return NodalPriceVector(hour=dispatch.hour, prices=prices, source="redispatch")
