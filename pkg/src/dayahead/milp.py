"""Branch-and-bound for linear programs with binary variables."""

from __future__ import annotations

import enum
import heapq
import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from .lp import LinearProgram, LpStatus, solve_lp

INT_TOL = 1e-6
FATHOM_TOL = 1e-9
DEFAULT_MAX_NODES = 100_000


class MilpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"


class NodeLimitError(RuntimeError):
    """The search hit ``max_nodes`` before proving optimality."""


class UnboundedRelaxationError(RuntimeError):
    pass


@dataclass(frozen=True)
class MixedIntegerProgram:
    lp: LinearProgram
    binary_vars: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(sorted(set(int(j) for j in self.binary_vars)))
        for j in idx:
            if not 0 <= j < self.lp.n:
                raise ValueError(f"binary variable index {j} out of range")
            if self.lp.lower[j] < 0 or self.lp.upper[j] > 1:
                raise ValueError(f"binary variable {j} has bounds outside [0, 1]")
        object.__setattr__(self, "binary_vars", idx)


@dataclass(frozen=True)
class MilpSolution:
    status: MilpStatus
    x: np.ndarray
    objective: float
    nodes_explored: int
    root_bound: float = field(default=float("nan"))

    @property
    def optimal(self) -> bool:
        return self.status is MilpStatus.OPTIMAL


def _branch_variable(x: np.ndarray, binaries: np.ndarray) -> int | None:
    """Most fractional binary, lowest index on ties; None when integral."""
    vals = x[binaries]
    frac = np.minimum(vals - np.floor(vals), np.ceil(vals) - vals)
    best = int(np.argmax(frac))
    if frac[best] <= INT_TOL:
        return None
    return int(binaries[best])


def solve_milp(mip: MixedIntegerProgram, *, max_nodes: int = DEFAULT_MAX_NODES) -> MilpSolution:
    """Exact best-first branch-and-bound.

    Nodes are expanded in order of relaxation bound, ties by creation order.
    Exceeding ``max_nodes`` raises :class:`NodeLimitError` rather than
    returning a possibly suboptimal incumbent.
    """
    base = mip.lp
    binaries = np.array(mip.binary_vars, dtype=int)
    counter = itertools.count()

    root = solve_lp(base)
    nodes = 1
    if root.status is LpStatus.UNBOUNDED:
        raise UnboundedRelaxationError("LP relaxation is unbounded")
    if root.status is LpStatus.INFEASIBLE:
        return MilpSolution(MilpStatus.INFEASIBLE, root.x, float("nan"), nodes)

    incumbent_x = None
    incumbent = np.inf
    heap = [(root.objective, next(counter), base.lower, base.upper, root)]

    def fathomed(bound: float) -> bool:
        return bound >= incumbent - FATHOM_TOL * max(1.0, abs(incumbent))

    while heap:
        bound, _, lower, upper, sol = heapq.heappop(heap)
        if fathomed(bound):
            continue
        j = _branch_variable(sol.x, binaries) if binaries.size else None
        if j is None:
            incumbent, incumbent_x = bound, sol.x
            continue
        for value in (0.0, 1.0):
            lo, hi = lower.copy(), upper.copy()
            lo[j] = hi[j] = value
            if nodes >= max_nodes:
                raise NodeLimitError(f"branch-and-bound exceeded {max_nodes} nodes")
            child = solve_lp(replace(base, lower=lo, upper=hi), warm_start=sol.warm)
            nodes += 1
            if child.optimal and not fathomed(child.objective):
                heapq.heappush(heap, (child.objective, next(counter), lo, hi, child))

    if incumbent_x is None:
        return MilpSolution(MilpStatus.INFEASIBLE, root.x, float("nan"), nodes, root.objective)
    x = incumbent_x.copy()
    x[binaries] = np.round(x[binaries])
    return MilpSolution(MilpStatus.OPTIMAL, x, float(base.cost @ x), nodes, root.objective)
