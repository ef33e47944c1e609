"""24-hour unit commitment, solved two ways: MILP branch-and-bound and DP over on/off states."""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dispatch import DispatchInfeasible, economic_dispatch
from .grid import GridCase, load_vector
from .lp import LinearProgram
from .milp import DEFAULT_MAX_NODES, MixedIntegerProgram, solve_milp
from .network import DcNetwork, build_network

IDLE_TOL = 1e-9


class CommitmentInfeasible(RuntimeError):
    pass


@dataclass(frozen=True)
class CommitmentSchedule:
    generators: tuple[str, ...]
    on: np.ndarray          # (G, H) bool
    output: np.ndarray      # (G, H) MW
    startup: np.ndarray     # (G, H) bool
    total_cost: float
    method: str = ""
    nodes_explored: int = field(default=0, compare=False)

    @property
    def hours(self) -> int:
        return self.on.shape[1]

    def committed(self, hour: int) -> list[str]:
        return [g for g, on in zip(self.generators, self.on[:, hour - 1]) if on]


@dataclass(frozen=True)
class GeneratorCombination:
    mask: tuple[bool, ...]
    p_min_sum: float
    p_max_sum: float
    capacity_feasible: bool = False
    line_feasible: bool = False
    dispatch_cost: float = float("inf")


@dataclass(frozen=True)
class UcLayout:
    """Column positions of P, U and startup variables in the MILP."""

    generators: int
    hours: int

    def p(self, g: int, t: int) -> int:
        return g * self.hours + t

    def u(self, g: int, t: int) -> int:
        return (self.generators + g) * self.hours + t

    def s(self, g: int, t: int) -> int:
        return (2 * self.generators + g) * self.hours + t

    @property
    def size(self) -> int:
        return 3 * self.generators * self.hours


def _initial(case: GridCase, initial_on) -> np.ndarray:
    if initial_on is None:
        return np.zeros(len(case.generators), dtype=bool)
    init = np.asarray(initial_on, dtype=bool)
    if init.shape != (len(case.generators),):
        raise ValueError("initial_on needs one flag per generator")
    return init


def startup_flags(on: np.ndarray, initial_on: np.ndarray) -> np.ndarray:
    prev = np.column_stack([initial_on, on[:, :-1]])
    return on & ~prev


def schedule_cost(case: GridCase, on, output, initial_on, free_first_hour_startup=False) -> float:
    c = np.array([g.marginal_cost for g in case.generators])
    S = np.array([g.startup_cost for g in case.generators])
    starts = startup_flags(np.asarray(on, dtype=bool), _initial(case, initial_on)).astype(float)
    if free_first_hour_startup:
        starts[:, 0] = 0.0
    return float(c @ np.asarray(output).sum(axis=1) + S @ starts.sum(axis=1))


def build_uc_milp(case: GridCase, initial_on=None, *, free_first_hour_startup: bool = False,
                  net: DcNetwork | None = None) -> MixedIntegerProgram:
    """MILP over output P, commitment U (binary) and startup indicators s.

    s is continuous in [0, 1] with s >= U_t - U_(t-1); minimisation pushes it
    to the indicator value. ``U * p_min <= P <= U * p_max`` is written as two
    linear rows per generator and hour.
    """
    net = net or build_network(case)
    init = _initial(case, initial_on)
    G, H = len(case.generators), len(case.demand)
    lay = UcLayout(G, H)
    n = lay.size
    nl = len(case.lines)

    cost = np.zeros(n)
    lower = np.zeros(n)
    upper = np.ones(n)
    for g, spec in enumerate(case.generators):
        for t in range(H):
            cost[lay.p(g, t)] = spec.marginal_cost
            cost[lay.s(g, t)] = spec.startup_cost
            upper[lay.p(g, t)] = spec.p_max

    bus_cols = [case.bus_index(spec.bus) for spec in case.generators]
    A_eq = np.zeros((H, n))
    b_eq = np.zeros(H)
    flow_rows, flow_rhs = [], []
    link_rows, link_rhs = [], []
    start_rows, start_rhs = [], []
    for t in range(H):
        load = load_vector(case, t + 1)
        TL = net.T @ load
        for g in range(G):
            A_eq[t, lay.p(g, t)] = 1.0
        b_eq[t] = load.sum()
        for sign in (1.0, -1.0):
            for l in range(nl):
                row = np.zeros(n)
                for g in range(G):
                    row[lay.p(g, t)] = sign * net.T[l, bus_cols[g]]
                flow_rows.append(row)
                flow_rhs.append(net.limits[l] + sign * TL[l])
        for g, spec in enumerate(case.generators):
            row = np.zeros(n)
            row[lay.p(g, t)] = -1.0
            row[lay.u(g, t)] = spec.p_min
            link_rows.append(row)
            link_rhs.append(0.0)
            row = np.zeros(n)
            row[lay.p(g, t)] = 1.0
            row[lay.u(g, t)] = -spec.p_max
            link_rows.append(row)
            link_rhs.append(0.0)
            if t == 0 and free_first_hour_startup:
                continue
            row = np.zeros(n)
            row[lay.s(g, t)] = -1.0
            row[lay.u(g, t)] = 1.0
            if t > 0:
                row[lay.u(g, t - 1)] = -1.0
                start_rhs.append(0.0)
            else:
                start_rhs.append(1.0 if init[g] else 0.0)
            start_rows.append(row)

    A_ub = np.array(flow_rows + link_rows + start_rows)
    b_ub = np.array(flow_rhs + link_rhs + start_rhs)
    lp = LinearProgram(cost, A_eq, b_eq, A_ub, b_ub, lower, upper)
    binaries = tuple(lay.u(g, t) for g in range(G) for t in range(H))
    return MixedIntegerProgram(lp, binaries)


def release_idle_units(case: GridCase, on: np.ndarray, output: np.ndarray, initial_on,
                       free_first_hour_startup: bool = False) -> np.ndarray:
    """Switch off committed units idling at zero output when that costs nothing.

    Both solvers can leave a zero-minimum unit on at 0 MW in a cost tie; this
    picks the same representative schedule for either method.
    """
    on = on.copy()
    init = _initial(case, initial_on)
    changed = True
    while changed:
        changed = False
        for g, spec in enumerate(case.generators):
            if spec.p_min > IDLE_TOL:
                continue
            for t in reversed(range(on.shape[1])):
                if not on[g, t] or output[g, t] > IDLE_TOL:
                    continue
                before = schedule_cost(case, on, output, init, free_first_hour_startup)
                on[g, t] = False
                after = schedule_cost(case, on, output, init, free_first_hour_startup)
                if after > before + 1e-9 * max(1.0, abs(before)):
                    on[g, t] = True
                else:
                    changed = True
    return on


def _schedule(case, on, output, initial_on, free_first_hour_startup, method, nodes=0) -> CommitmentSchedule:
    init = _initial(case, initial_on)
    output = np.where(on, output, 0.0)
    on = release_idle_units(case, on, output, init, free_first_hour_startup)
    return CommitmentSchedule(
        generators=tuple(case.generator_names),
        on=on,
        output=output,
        startup=startup_flags(on, init),
        total_cost=schedule_cost(case, on, output, init, free_first_hour_startup),
        method=method,
        nodes_explored=nodes,
    )


def solve_uc_milp(case: GridCase, initial_on=None, *, free_first_hour_startup: bool = False,
                  net: DcNetwork | None = None, max_nodes: int = DEFAULT_MAX_NODES) -> CommitmentSchedule:
    net = net or build_network(case)
    mip = build_uc_milp(case, initial_on, free_first_hour_startup=free_first_hour_startup, net=net)
    sol = solve_milp(mip, max_nodes=max_nodes)
    if not sol.optimal:
        raise CommitmentInfeasible("no commitment meets demand within line limits")
    G, H = len(case.generators), len(case.demand)
    lay = UcLayout(G, H)
    on = np.array([[sol.x[lay.u(g, t)] > 0.5 for t in range(H)] for g in range(G)])
    output = np.array([[sol.x[lay.p(g, t)] for t in range(H)] for g in range(G)])
    return _schedule(case, on, output, initial_on, free_first_hour_startup, "milp", sol.nodes_explored)


def combinations(case: GridCase) -> list[tuple[bool, ...]]:
    """All on/off masks, all-on first and all-off last."""
    return [tuple(bool(v) for v in m) for m in itertools.product((1, 0), repeat=len(case.generators))]


def _stage(case, hour, mask, net, cache):
    key = (hour, mask)
    if key not in cache:
        names = [g.name for g, on in zip(case.generators, mask) if on]
        if not names:
            load = load_vector(case, hour)
            ok = load.sum() <= 1e-9 and np.all(np.abs(net.T @ load) <= net.limits)
            cache[key] = (0.0, np.zeros(len(case.generators))) if ok else None
        else:
            try:
                res, _ = economic_dispatch(case, hour, names, net)
                cache[key] = (res.objective, res.output)
            except DispatchInfeasible:
                cache[key] = None
    return cache[key]


def enumerate_feasible_states(case: GridCase, hour: int, net: DcNetwork | None = None) -> list[GeneratorCombination]:
    net = net or build_network(case)
    demand = case.demand[hour - 1]
    cache: dict = {}
    out = []
    for mask in combinations(case):
        pmin = float(sum(g.p_min for g, on in zip(case.generators, mask) if on))
        pmax = float(sum(g.p_max for g, on in zip(case.generators, mask) if on))
        cap = pmin <= demand <= pmax
        stage = _stage(case, hour, mask, net, cache) if cap else None
        out.append(GeneratorCombination(
            mask=mask, p_min_sum=pmin, p_max_sum=pmax,
            capacity_feasible=cap, line_feasible=stage is not None,
            dispatch_cost=stage[0] if stage is not None else float("inf"),
        ))
    return out


def solve_uc_dp(case: GridCase, initial_on=None, *, free_first_hour_startup: bool = False,
                net: DcNetwork | None = None) -> CommitmentSchedule:
    """Exact forward DP over (hour, on/off mask) states.

    Stage cost is the dispatch LP cost of the mask at that hour; moving
    between masks costs the startups of units switching on. Cost ties go to
    the state with fewer units on, then to the earlier mask in
    :func:`combinations` order.
    """
    net = net or build_network(case)
    init = tuple(bool(v) for v in _initial(case, initial_on))
    masks = combinations(case)
    S = [g.startup_cost for g in case.generators]
    H = len(case.demand)
    cache: dict = {}

    def transition(prev, cur, t):
        if t == 0 and free_first_hour_startup:
            return 0.0
        return sum(s for s, a, b in zip(S, prev, cur) if b and not a)

    def tie_key(mask):
        return (sum(mask), masks.index(mask))

    def better(cand, best, cand_mask, best_mask):
        if best is None:
            return True
        scale = 1e-9 * max(1.0, abs(best))
        if cand < best - scale:
            return True
        if cand > best + scale:
            return False
        return tie_key(cand_mask) < tie_key(best_mask)

    frontier = {init: 0.0}
    back: list[dict] = []
    for t in range(H):
        nxt: dict = {}
        ptr: dict = {}
        for mask in masks:
            stage = _stage(case, t + 1, mask, net, cache)
            if stage is None:
                continue
            best, arg = None, None
            for prev, acc in frontier.items():
                total = acc + transition(prev, mask, t)
                if better(total, best, prev, arg):
                    best, arg = total, prev
            if best is not None:
                nxt[mask] = best + stage[0]
                ptr[mask] = arg
        if not nxt:
            raise CommitmentInfeasible(f"no feasible generator combination at hour {t + 1}")
        frontier = nxt
        back.append(ptr)

    last = None
    for mask, val in frontier.items():
        if last is None or better(val, frontier[last], mask, last):
            last = mask
    path = [last]
    for t in range(H - 1, 0, -1):
        path.append(back[t][path[-1]])
    path.reverse()

    G = len(case.generators)
    on = np.zeros((G, H), dtype=bool)
    output = np.zeros((G, H))
    for t, mask in enumerate(path):
        on[:, t] = mask
        output[:, t] = _stage(case, t + 1, mask, net, cache)[1]
    return _schedule(case, on, output, init, free_first_hour_startup, "dp")


def solve_uc(case: GridCase, method: str = "milp", **kwargs) -> CommitmentSchedule:
    if method == "milp":
        return solve_uc_milp(case, **kwargs)
    if method == "dp":
        kwargs.pop("max_nodes", None)
        return solve_uc_dp(case, **kwargs)
    raise ValueError(f"unknown unit commitment method {method!r}")


def write_schedule_csv(schedule: CommitmentSchedule, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["hour", "generator", "on", "output_mw", "startup"])
        for t in range(schedule.hours):
            for g, name in enumerate(schedule.generators):
                w.writerow([t + 1, name, int(schedule.on[g, t]), f"{schedule.output[g, t]:.6f}",
                            int(schedule.startup[g, t])])
