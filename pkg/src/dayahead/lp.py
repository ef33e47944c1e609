"""Bounded-variable revised simplex with full dual extraction.

Problems have the form::

    min  c @ x
    s.t. A_eq @ x == b_eq
         A_ub @ x <= b_ub
         lower <= x <= upper        (either bound may be infinite)

Duals follow the Lagrangian sign convention used for nodal pricing::

    c + A_eq.T @ lam + A_ub.T @ mu + tau_upper - tau_lower == 0

with ``mu``, ``tau_upper`` and ``tau_lower`` all nonnegative. Under this
convention the price of serving one more MW at bus i is
``-lam - sum_k mu_k T[k, i]``.
"""

from __future__ import annotations

import enum
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve
from scipy.sparse.linalg import splu

log = logging.getLogger(__name__)

FEAS_TOL = 1e-7
PIVOT_TOL = 1e-9
DUAL_TOL = 1e-9
DEGENERATE_LIMIT = 50
REFACTOR_EVERY = 64
SPARSE_MIN_ROWS = 64  # smaller problems stay dense

_BASIC, _AT_LOWER, _AT_UPPER, _FREE = range(4)


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LinearProgram:
    cost: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.cost).shape[0]
        object.__setattr__(self, "cost", np.asarray(self.cost, dtype=float).reshape(n))
        for mat, vec in (("A_eq", "b_eq"), ("A_ub", "b_ub")):
            A = np.asarray(getattr(self, mat), dtype=float)
            if A.size == 0:
                A = A.reshape(0, n)
            b = np.asarray(getattr(self, vec), dtype=float).reshape(-1)
            if A.ndim != 2 or A.shape[1] != n:
                raise ValueError(f"{mat} must have {n} columns")
            if A.shape[0] != b.shape[0]:
                raise ValueError(f"{mat} and {vec} row counts differ")
            object.__setattr__(self, mat, A)
            object.__setattr__(self, vec, b)
        lo = np.broadcast_to(np.asarray(self.lower, dtype=float), (n,)).copy()
        hi = np.broadcast_to(np.asarray(self.upper, dtype=float), (n,)).copy()
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def build(cls, cost, A_eq=None, b_eq=None, A_ub=None, b_ub=None, bounds=None) -> "LinearProgram":
        """Convenience constructor; ``bounds`` is a list of (lower, upper) with None for infinite."""
        cost = np.asarray(cost, dtype=float)
        n = cost.shape[0]
        empty = np.zeros((0, n))
        if bounds is None:
            bounds = [(0.0, None)] * n
        lower = [-np.inf if lo is None else lo for lo, _ in bounds]
        upper = [np.inf if hi is None else hi for _, hi in bounds]
        return cls(
            cost=cost,
            A_eq=empty if A_eq is None else A_eq,
            b_eq=np.zeros(0) if b_eq is None else b_eq,
            A_ub=empty if A_ub is None else A_ub,
            b_ub=np.zeros(0) if b_ub is None else b_ub,
            lower=lower,
            upper=upper,
        )

    @property
    def n(self) -> int:
        return self.cost.shape[0]


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    x: np.ndarray
    objective: float
    eq_duals: np.ndarray
    ineq_duals: np.ndarray
    lower_duals: np.ndarray
    upper_duals: np.ndarray
    iterations: int = 0
    warm: "WarmStart | None" = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


class SimplexError(RuntimeError):
    pass


@dataclass(frozen=True)
class WarmStart:
    """Final basis of a solve, reusable after bound changes."""

    basis: tuple[int, ...]
    status: np.ndarray
    # augmented constraint matrix shared by every re-solve with the same rows
    rows: tuple | None = field(default=None, repr=False, compare=False)


class _Factor:
    """LU of a starting basis followed by product-form (eta) updates.

    ``B`` is factored with SuperLU when sparse and with LAPACK when dense.
    """

    def __init__(self, B):
        self.m = B.shape[0]
        self.etas: list[tuple[int, np.ndarray]] = []
        self.lu = None
        if not self.m:
            return
        if sparse.issparse(B):
            try:
                lu = splu(sparse.csc_matrix(B))
            except RuntimeError:
                raise SimplexError("basis matrix is singular") from None
            self._solve = lambda v, trans: lu.solve(v, trans="T" if trans else "N")
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", LinAlgWarning)
                lu = lu_factor(B, check_finite=False)
            if not np.all(np.diag(lu[0])):
                raise SimplexError("basis matrix is singular")
            self._solve = lambda v, trans: lu_solve(lu, v, trans=int(trans), check_finite=False)
        self.lu = lu
        # zero pivots can survive factoring as infinities
        if not np.all(np.isfinite(self._solve(np.ones(self.m), False))):
            raise SimplexError("basis matrix is singular")

    def ftran(self, a: np.ndarray) -> np.ndarray:
        """Solve ``B x = a``."""
        if not self.m:
            return np.zeros(0)
        x = self._solve(np.asarray(a, dtype=float), False)
        for r, alpha in self.etas:
            xr = x[r] / alpha[r]
            x -= alpha * xr
            x[r] = xr
        return x

    def btran(self, c: np.ndarray) -> np.ndarray:
        """Solve ``y B = c``."""
        if not self.m:
            return np.zeros(0)
        v = np.array(c, dtype=float)
        for r, alpha in reversed(self.etas):
            v[r] -= (v @ alpha - v[r]) / alpha[r]
        return self._solve(v, True)

    def update(self, r: int, alpha: np.ndarray) -> None:
        self.etas.append((r, alpha.copy()))


class _Simplex:
    """Revised simplex over ``A x = b, lo <= x <= hi``."""

    def __init__(self, A, b, lo, hi, basis, x, status, trace=False, A_work=None):
        self.A, self.b, self.lo, self.hi = A, b, lo, hi
        self.A_work = _as_working(A) if A_work is None else A_work
        self.AT = self.A_work.T
        self.basis = np.array(basis, dtype=int)
        self.x = x
        self.status = status
        self.trace = trace
        self.iterations = 0
        self.refactor()

    def refactor(self):
        self.factor = _Factor(self.A_work[:, self.basis])
        self.since_refactor = 0
        self.recompute_basic()

    def recompute_basic(self):
        """Reset x_B from the nonbasic values, clearing accumulated update drift."""
        xn = self.x.copy()
        xn[self.basis] = 0.0
        self.x[self.basis] = self.factor.ftran(self.b - self.A_work @ xn)

    def _pivot(self, r, q, alpha):
        self.factor.update(r, alpha)
        self.status[q] = _BASIC
        self.basis[r] = q
        self.since_refactor += 1

    def _row(self, r) -> np.ndarray:
        e = np.zeros(len(self.basis))
        e[r] = 1.0
        return self.AT @ self.factor.btran(e)

    def reduced_costs(self, cost):
        y = self.factor.btran(cost[self.basis])
        return y, cost - self.AT @ y

    def run(self, cost, max_iter):
        cost_tol = DUAL_TOL * max(1.0, float(np.max(np.abs(cost))) if cost.size else 1.0)
        degenerate_run = 0
        movable = self.lo < self.hi
        while True:
            if self.iterations >= max_iter:
                raise SimplexError(f"simplex iteration limit ({max_iter}) reached")
            if self.since_refactor >= REFACTOR_EVERY:
                self.refactor()
            _, d = self.reduced_costs(cost)

            up = movable & (((self.status == _AT_LOWER) | (self.status == _FREE)) & (d < -cost_tol))
            down = movable & (((self.status == _AT_UPPER) | (self.status == _FREE)) & (d > cost_tol))
            eligible = np.flatnonzero(up | down)
            if eligible.size == 0:
                return LpStatus.OPTIMAL

            bland = degenerate_run >= DEGENERATE_LIMIT
            if bland:
                q = int(eligible[0])
            else:
                q = int(eligible[np.argmax(np.abs(d[eligible]))])
            direction = 1.0 if up[q] else -1.0

            alpha = self.factor.ftran(self.A[:, q])
            delta = -direction * alpha  # change of x_B per unit step
            xb = self.x[self.basis]
            lob, hib = self.lo[self.basis], self.hi[self.basis]
            ratios = np.full(len(self.basis), np.inf)
            dec = (delta < -PIVOT_TOL) & np.isfinite(lob)
            inc = (delta > PIVOT_TOL) & np.isfinite(hib)
            ratios[dec] = (xb[dec] - lob[dec]) / -delta[dec]
            ratios[inc] = (hib[inc] - xb[inc]) / delta[inc]
            ratios = np.maximum(ratios, 0.0)

            theta = float(ratios.min()) if ratios.size else np.inf
            flip = self.hi[q] - self.lo[q]
            if not np.isfinite(theta) and not np.isfinite(flip):
                return LpStatus.UNBOUNDED

            self.iterations += 1
            if flip <= theta:
                # entering variable reaches its opposite bound before any basic one
                self.x[q] = self.hi[q] if direction > 0 else self.lo[q]
                self.x[self.basis] = xb + flip * delta
                self.status[q] = _AT_UPPER if direction > 0 else _AT_LOWER
                degenerate_run = 0
                if self.trace:
                    log.debug("iter %d: bound flip of x%d", self.iterations, q)
                continue

            ties = np.flatnonzero(ratios <= theta + 1e-12 * max(1.0, theta))
            if bland:
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(ties[np.argmax(np.abs(alpha[ties]))])
            leaving = int(self.basis[r])

            self.x[self.basis] = xb + theta * delta
            self.x[q] += direction * theta
            if delta[r] < 0:
                self.x[leaving] = self.lo[leaving]
                self.status[leaving] = _AT_LOWER
            else:
                self.x[leaving] = self.hi[leaving]
                self.status[leaving] = _AT_UPPER
            self._pivot(r, q, alpha)

            degenerate_run = degenerate_run + 1 if theta <= 1e-12 else 0
            if self.trace:
                log.debug("iter %d: x%d enters, x%d leaves, step %.6g%s",
                          self.iterations, q, leaving, theta, " (bland)" if bland else "")

    def dual_feasible(self, cost) -> bool:
        _, d = self.reduced_costs(cost)
        tol = 1e-7 * max(1.0, float(np.max(np.abs(cost))) if cost.size else 1.0)
        movable = self.lo < self.hi
        bad = movable & (
            ((self.status == _AT_LOWER) & (d < -tol))
            | ((self.status == _AT_UPPER) & (d > tol))
            | ((self.status == _FREE) & (np.abs(d) > tol))
        )
        return not bad.any()

    def run_dual(self, cost, max_iter):
        """Dual simplex from a dual-feasible basis until the primal is feasible."""
        movable = self.lo < self.hi
        if not len(self.basis):
            return LpStatus.OPTIMAL
        while True:
            if self.iterations >= max_iter:
                raise SimplexError(f"dual simplex iteration limit ({max_iter}) reached")
            if self.since_refactor >= REFACTOR_EVERY:
                self.refactor()
            xb = self.x[self.basis]
            lob, hib = self.lo[self.basis], self.hi[self.basis]
            below = lob - xb
            above = xb - hib
            infeas = np.maximum(below, above)
            r = int(np.argmax(infeas))
            if infeas[r] <= 1e-9 * max(1.0, abs(xb[r])):
                return LpStatus.OPTIMAL
            raise_r = below[r] > 0
            target = lob[r] if raise_r else hib[r]

            _, d = self.reduced_costs(cost)
            rho = self._row(r)
            # x_r moves by -rho_j per unit increase of nonbasic x_j
            sign = 1.0 if raise_r else -1.0
            at_lo = movable & (self.status == _AT_LOWER) & (sign * rho < -PIVOT_TOL)
            at_hi = movable & (self.status == _AT_UPPER) & (sign * rho > PIVOT_TOL)
            free = movable & (self.status == _FREE) & (np.abs(rho) > PIVOT_TOL)
            cand = np.flatnonzero(at_lo | at_hi | free)
            if cand.size == 0:
                return LpStatus.INFEASIBLE
            ratios = np.abs(d[cand]) / np.abs(rho[cand])
            best = ratios.min()
            ties = cand[ratios <= best + 1e-12 * max(1.0, best)]
            q = int(ties[np.argmax(np.abs(rho[ties]))])

            alpha = self.factor.ftran(self.A[:, q])
            step = (xb[r] - target) / alpha[r]
            leaving = int(self.basis[r])
            self.x[self.basis] = xb - alpha * step
            self.x[q] += step
            self.x[leaving] = target
            self.status[leaving] = _AT_LOWER if raise_r else _AT_UPPER
            self._pivot(r, q, alpha)
            self.iterations += 1
            if self.trace:
                log.debug("dual iter %d: x%d enters, x%d leaves", self.iterations, q, leaving)

    def drive_out(self, artificial):
        """Pivot zero-level artificial variables out of the basis where possible."""
        for r in range(len(self.basis)):
            if not artificial[self.basis[r]]:
                continue
            row = self._row(r)
            cand = np.flatnonzero((self.status != _BASIC) & ~artificial & (np.abs(row) > 1e-7))
            if cand.size == 0:
                continue  # redundant row: artificial stays basic, fixed at zero
            q = int(cand[np.argmax(np.abs(row[cand]))])
            leaving = int(self.basis[r])
            alpha = self.factor.ftran(self.A[:, q])
            self.status[leaving] = _AT_LOWER
            self.x[leaving] = 0.0
            self._pivot(r, q, alpha)
        self.refactor()


def _place_nonbasic(x, status, lo, hi, idx, prefer_upper):
    """Put nonbasic columns ``idx`` at a finite bound (upper where preferred), else free at zero."""
    fin_lo, fin_hi = np.isfinite(lo[idx]), np.isfinite(hi[idx])
    up = fin_hi & (prefer_upper | ~fin_lo)
    status[idx] = np.where(up, _AT_UPPER, np.where(fin_lo, _AT_LOWER, _FREE))
    x[idx] = np.where(up, hi[idx], np.where(fin_lo, lo[idx], 0.0))


def _as_working(A: np.ndarray):
    """Matrix used for column slices and products: CSC when large, else ``A`` itself."""
    return sparse.csc_matrix(A) if A.shape[0] >= SPARSE_MIN_ROWS else A


def _augment(lp: LinearProgram, rows=None):
    """``[A_eq; A_ub | 0; I]`` with slack bounds, reusing ``rows`` when it matches ``lp``."""
    n, m_eq, m_ub = lp.n, lp.A_eq.shape[0], lp.A_ub.shape[0]
    if rows is not None and rows[0] is lp.A_eq and rows[1] is lp.A_ub:
        A, A_work = rows[2], rows[3]
    else:
        A = np.zeros((m_eq + m_ub, n + m_ub))
        A[:m_eq, :n] = lp.A_eq
        A[m_eq:, :n] = lp.A_ub
        A[m_eq:, n:] = np.eye(m_ub)
        A_work = _as_working(A)
    b = np.concatenate([lp.b_eq, lp.b_ub])
    lo = np.concatenate([lp.lower, np.zeros(m_ub)])
    hi = np.concatenate([lp.upper, np.full(m_ub, np.inf)])
    return A, A_work, b, lo, hi


def _warm_simplex(lp, warm, trace, max_iter):
    """Re-solve from a previous basis with the dual simplex; None means start cold."""
    A, A_work, b, lo, hi = _augment(lp, warm.rows)
    m, N = A.shape
    if len(warm.basis) != m or warm.status.shape != (N,) or max(warm.basis, default=-1) >= N:
        return None
    status = warm.status.copy()
    x = np.zeros(N)
    nb = np.flatnonzero(status != _BASIC)
    _place_nonbasic(x, status, lo, hi, nb, status[nb] == _AT_UPPER)
    cost = np.zeros(N)
    cost[:lp.n] = lp.cost
    try:
        sx = _Simplex(A, b, lo, hi, warm.basis, x, status, trace=trace, A_work=A_work)
        if not sx.dual_feasible(cost):
            return None
        if sx.run_dual(cost, max_iter) is LpStatus.INFEASIBLE:
            return sx, cost, LpStatus.INFEASIBLE
        return sx, cost, sx.run(cost, max_iter)
    except SimplexError:
        return None


def _cold_simplex(lp, trace, max_iter):
    A, A_work, b, lo, hi = _augment(lp)
    n, m_eq = lp.n, lp.A_eq.shape[0]
    m, N = A.shape

    x = np.zeros(N)
    status = np.full(N, _AT_LOWER)
    _place_nonbasic(x, status, lo, hi, np.arange(n), np.zeros(n, dtype=bool))

    residual = b - A[:, :n] @ x[:n]
    basis = []
    art_cols = []
    for r in range(m):
        if r >= m_eq and residual[r] >= 0:
            basis.append(n + (r - m_eq))
            continue
        col = np.zeros(m)
        col[r] = 1.0 if residual[r] >= 0 else -1.0
        art_cols.append(col)
        basis.append(N + len(art_cols) - 1)

    k = len(art_cols)
    if k:
        art = np.column_stack(art_cols)
        A = np.hstack([A, art])
        if sparse.issparse(A_work):
            A_work = sparse.hstack([A_work, sparse.csc_matrix(art)], format="csc")
        else:
            A_work = A
        lo = np.concatenate([lo, np.zeros(k)])
        hi = np.concatenate([hi, np.full(k, np.inf)])
        x = np.concatenate([x, np.zeros(k)])
        status = np.concatenate([status, np.full(k, _AT_LOWER)])
    artificial = np.zeros(N + k, dtype=bool)
    artificial[N:] = True
    status[np.array(basis, dtype=int)] = _BASIC

    sx = _Simplex(A, b, lo, hi, basis, x, status, trace=trace, A_work=A_work)
    if k:
        sx.run(artificial.astype(float), max_iter)
        sx.refactor()
        if float(sx.x[artificial].sum()) > FEAS_TOL:
            return sx, None, LpStatus.INFEASIBLE
        sx.hi[artificial] = 0.0
        sx.x[artificial] = np.where(sx.status[artificial] == _BASIC, sx.x[artificial], 0.0)
        sx.drive_out(artificial)

    cost = np.zeros(N + k)
    cost[:n] = lp.cost
    return sx, cost, sx.run(cost, max_iter)


def solve_lp(lp: LinearProgram, *, warm_start: WarmStart | None = None,
             trace: bool = False, max_iter: int | None = None) -> LpSolution:
    """Solve ``lp`` with a two-phase bounded revised simplex.

    Entering variables are chosen by largest reduced cost (lowest index on
    ties); after ``DEGENERATE_LIMIT`` consecutive degenerate pivots Bland's
    rule takes over until a pivot makes progress. Infeasible and unbounded
    problems are reported through ``status``.

    ``warm_start`` (from an earlier solution of the same rows with different
    bounds) is tried first with the dual simplex.
    """
    n, m_eq, m_ub = lp.n, lp.A_eq.shape[0], lp.A_ub.shape[0]
    m = m_eq + m_ub
    if max_iter is None:
        max_iter = 50 * (2 * m + n) + 1000

    run = _warm_simplex(lp, warm_start, trace, max_iter) if warm_start is not None else None
    if run is None:
        run = _cold_simplex(lp, trace, max_iter)
    sx, cost, outcome = run

    if outcome is not LpStatus.OPTIMAL:
        return LpSolution(
            status=outcome, x=sx.x[:n].copy(), objective=float("nan"),
            eq_duals=np.full(m_eq, np.nan), ineq_duals=np.full(m_ub, np.nan),
            lower_duals=np.full(n, np.nan), upper_duals=np.full(n, np.nan),
            iterations=sx.iterations,
        )
    if sx.since_refactor:
        sx.recompute_basic()

    y, d = sx.reduced_costs(cost)
    d[sx.status == _BASIC] = 0.0

    xs = sx.x[:n].copy()
    st, dn = sx.status[:n], d[:n]
    bounded = (st == _AT_LOWER) | (st == _AT_UPPER)
    fixed = bounded & (lp.lower == lp.upper)
    # a fixed variable takes whichever sign its reduced cost has
    lower_duals = np.where((fixed | (st == _AT_LOWER)) & bounded, np.maximum(dn, 0.0), 0.0)
    upper_duals = np.where((fixed | (st == _AT_UPPER)) & bounded, np.maximum(-dn, 0.0), 0.0)

    ineq = -y[m_eq:m]
    ineq[np.abs(ineq) < 1e-12] = 0.0
    ineq = np.maximum(ineq, 0.0)
    N = n + m_ub
    warm = None
    if sx.basis.size == 0 or sx.basis.max() < N:
        rows = (lp.A_eq, lp.A_ub, sx.A[:, :N], sx.A_work[:, :N] if sx.A.shape[1] > N else sx.A_work)
        warm = WarmStart(tuple(sx.basis.tolist()), sx.status[:N].copy(), rows)
    return LpSolution(
        status=LpStatus.OPTIMAL,
        x=xs,
        objective=float(lp.cost @ xs),
        eq_duals=-y[:m_eq],
        ineq_duals=ineq,
        lower_duals=lower_duals,
        upper_duals=upper_duals,
        iterations=sx.iterations,
        warm=warm,
    )


def dual_objective(lp: LinearProgram, sol: LpSolution) -> float:
    """Lagrangian dual value; equals the primal objective at an optimum."""
    val = -float(lp.b_eq @ sol.eq_duals) - float(lp.b_ub @ sol.ineq_duals)
    fin_lo = np.isfinite(lp.lower)
    fin_hi = np.isfinite(lp.upper)
    val += float(lp.lower[fin_lo] @ sol.lower_duals[fin_lo])
    val -= float(lp.upper[fin_hi] @ sol.upper_duals[fin_hi])
    return val


def _bound_product(dual: np.ndarray, gap: np.ndarray) -> np.ndarray:
    out = np.zeros_like(dual)
    active = dual != 0
    out[active] = np.abs(dual[active] * gap[active])
    return np.nan_to_num(out, nan=np.inf, posinf=np.inf)


def check_kkt(lp: LinearProgram, sol: LpSolution) -> float:
    """Largest violation of stationarity, feasibility, sign and complementarity."""
    if not sol.optimal:
        raise ValueError("KKT check needs an optimal solution")
    x = sol.x
    stationarity = (lp.cost + lp.A_eq.T @ sol.eq_duals + lp.A_ub.T @ sol.ineq_duals
                    + sol.upper_duals - sol.lower_duals)
    slack = lp.b_ub - lp.A_ub @ x
    terms = [
        np.abs(stationarity),
        np.abs(lp.A_eq @ x - lp.b_eq),
        np.maximum(-slack, 0.0),
        np.maximum(lp.lower - x, 0.0),
        np.maximum(x - lp.upper, 0.0),
        np.maximum(-sol.ineq_duals, 0.0),
        np.maximum(-sol.lower_duals, 0.0),
        np.maximum(-sol.upper_duals, 0.0),
        np.abs(sol.ineq_duals * slack),
        _bound_product(sol.lower_duals, x - lp.lower),
        _bound_product(sol.upper_duals, lp.upper - x),
    ]
    return max((float(t.max()) for t in terms if t.size), default=0.0)
