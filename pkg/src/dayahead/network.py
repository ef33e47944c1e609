"""DC network matrices: bus susceptance B, reduced B', line matrix X and PTDF T.

Line flows are positive in the case file's from -> to direction. With
injections P (generation minus load, MW) the flows are ``T @ P``; the slack
bus absorbs any imbalance, which is why its PTDF column is zero.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import linalg

from .grid import GridCase, _connected

COND_LIMIT = 1e12


class DisconnectedNetworkError(ValueError):
    pass


def line_susceptances(case: GridCase) -> np.ndarray:
    if case.susceptance_mode == "table_b":
        return np.array([ln.susceptance_b for ln in case.lines], dtype=float)
    return np.array([1.0 / ln.reactance for ln in case.lines], dtype=float)


def build_susceptance(case: GridCase) -> np.ndarray:
    n = case.bus_count
    B = np.zeros((n, n))
    for ln, b in zip(case.lines, line_susceptances(case)):
        i, j = case.bus_index(ln.from_bus), case.bus_index(ln.to_bus)
        B[i, i] += b
        B[j, j] += b
        B[i, j] -= b
        B[j, i] -= b
    return B


def reduce_slack(B: np.ndarray, slack_index: int) -> np.ndarray:
    """Drop the slack row and column; raises if what remains is singular."""
    keep = [k for k in range(B.shape[0]) if k != slack_index]
    reduced = B[np.ix_(keep, keep)]
    if reduced.size and np.linalg.cond(reduced) > COND_LIMIT:
        raise DisconnectedNetworkError("reduced susceptance matrix is singular; network is disconnected")
    return reduced


def build_line_matrix(case: GridCase) -> np.ndarray:
    """Row l maps bus angles to the flow on line l: b_l (theta_from - theta_to)."""
    X = np.zeros((len(case.lines), case.bus_count))
    for row, (ln, b) in enumerate(zip(case.lines, line_susceptances(case))):
        X[row, case.bus_index(ln.from_bus)] = b
        X[row, case.bus_index(ln.to_bus)] = -b
    return X


def compute_ptdf(X: np.ndarray, B_reduced: np.ndarray, slack_index: int) -> np.ndarray:
    n = X.shape[1]
    keep = [k for k in range(n) if k != slack_index]
    M = np.zeros((n, n))
    if keep:
        try:
            factor = linalg.cho_factor(B_reduced)
        except linalg.LinAlgError:
            raise DisconnectedNetworkError("reduced susceptance matrix is not positive definite") from None
        M[np.ix_(keep, keep)] = linalg.cho_solve(factor, np.eye(len(keep)))
    T = X @ M
    T[:, slack_index] = 0.0
    return T


def line_flows(T: np.ndarray, injection: np.ndarray) -> np.ndarray:
    injection = np.asarray(injection, dtype=float)
    if injection.shape != (T.shape[1],):
        raise ValueError(f"injection must have length {T.shape[1]}")
    return T @ injection


@dataclass(frozen=True)
class DcNetwork:
    """All DC matrices of one case, built once and shared read-only."""

    B: np.ndarray
    B_reduced: np.ndarray
    X: np.ndarray
    T: np.ndarray
    slack_index: int
    limits: np.ndarray
    line_ids: tuple[int, ...]

    def flows(self, injection: np.ndarray) -> np.ndarray:
        return line_flows(self.T, injection)


def build_network(case: GridCase) -> DcNetwork:
    if not _connected(case.buses, case.lines):
        raise DisconnectedNetworkError("network graph is disconnected")
    slack = case.bus_index(case.slack_bus)
    B = build_susceptance(case)
    B_red = reduce_slack(B, slack)
    X = build_line_matrix(case)
    return DcNetwork(
        B=B,
        B_reduced=B_red,
        X=X,
        T=compute_ptdf(X, B_red, slack),
        slack_index=slack,
        limits=np.array([ln.flow_limit for ln in case.lines], dtype=float),
        line_ids=tuple(ln.id for ln in case.lines),
    )


def write_matrix_csv(path: str | Path, matrix: np.ndarray, row_label: str, row_names, col_names) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([row_label, *col_names])
        for name, row in zip(row_names, matrix):
            w.writerow([name, *(f"{v:.12g}" for v in row)])


def dump_matrices(case: GridCase, out_dir: str | Path) -> list[Path]:
    """Write B, B' and T as CSV files for debugging."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    net = build_network(case)
    buses = [f"bus{b}" for b in case.buses]
    reduced = [b for k, b in enumerate(buses) if k != net.slack_index]
    paths = [out / "B.csv", out / "B_reduced.csv", out / "T.csv"]
    write_matrix_csv(paths[0], net.B, "bus", buses, buses)
    write_matrix_csv(paths[1], net.B_reduced, "bus", reduced, reduced)
    write_matrix_csv(paths[2], net.T, "line", [f"line{i}" for i in net.line_ids], buses)
    return paths
