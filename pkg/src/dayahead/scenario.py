"""Day-ahead pipeline: commitment, hourly dispatch, nodal prices and CSV reports."""

from __future__ import annotations

import csv
import logging
from contextlib import contextmanager
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .commitment import CommitmentSchedule, solve_uc, write_schedule_csv
from .dispatch import DispatchResult, NodalPriceVector, economic_dispatch, nodal_prices
from .grid import GridCase, load_case, load_vector
from .network import DcNetwork, build_network, dump_matrices

log = logging.getLogger(__name__)

PEAK_HOURS = tuple(range(13, 22))
PRICE_TOL = 1e-6


class TopologyMismatchError(ValueError):
    pass


class OutputError(OSError):
    pass


@dataclass(frozen=True)
class DayAheadResult:
    label: str
    case: GridCase
    schedule: CommitmentSchedule
    dispatches: tuple[DispatchResult, ...]
    hourly_prices: tuple[NodalPriceVector, ...]
    hourly_social_cost: np.ndarray
    hourly_startup_cost: np.ndarray
    total_cost: float

    @property
    def hours(self) -> int:
        return len(self.hourly_prices)

    def price_matrix(self) -> np.ndarray:
        """(hours, buses) array of nodal prices."""
        return np.array([p.prices for p in self.hourly_prices])


@dataclass(frozen=True)
class PeakPriceRow:
    bus: int
    base_peak_price: float
    variant_peak_price: float
    delta: float
    base_constant: bool
    variant_constant: bool
    fractional: bool


@dataclass(frozen=True)
class ComparisonReport:
    base: DayAheadResult
    variant: DayAheadResult
    peak_hour: int
    rows: tuple[PeakPriceRow, ...]
    hourly_cost_delta: np.ndarray
    total_cost_delta: float


def format_value(value: float) -> str:
    """Six decimals, no negative zero, "nan" for undefined values."""
    if not np.isfinite(value):
        return "nan"
    text = f"{value:.6f}"
    return "0.000000" if text == "-0.000000" else text


@contextmanager
def _csv_out(path: Path):
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            yield csv.writer(fh, lineterminator="\n")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _out_dir(out_dir) -> Path:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create {out}: {exc.strerror or exc}") from exc
    return out


def _idle_hour(case: GridCase, hour: int, net: DcNetwork) -> tuple[DispatchResult, NodalPriceVector]:
    load = load_vector(case, hour)
    flows = net.T @ (-load)
    dispatch = DispatchResult(
        hour=hour, committed=(), output=np.zeros(len(case.generators)), flows=flows,
        objective=0.0, binding_lines=(), load=load,
    )
    prices = NodalPriceVector(hour=hour, prices=np.full(case.bus_count, np.nan), source="degenerate")
    return dispatch, prices


def _resolve_case(case, susceptance: str | None) -> GridCase:
    if not isinstance(case, GridCase):
        case = load_case(case)
    if susceptance is not None and susceptance != case.susceptance_mode:
        case = case.with_susceptance_mode(susceptance)
    return case


def run_day_ahead(case, uc_method: str = "milp", out_dir=None, *,
                  susceptance: str | None = None, free_first_hour_startup: bool = False,
                  dump_network: bool = False) -> DayAheadResult:
    """Commit units for the whole horizon, then dispatch and price every hour.

    ``case`` is a path, a bundled case name or a :class:`GridCase`. Each
    hour is re-dispatched over the committed set and those outputs replace
    the commitment solver's, so schedule, prices and flows always come from
    the same solve. With ``out_dir`` the four report files are written.
    """
    case = _resolve_case(case, susceptance)
    net = build_network(case)
    schedule = solve_uc(case, uc_method, net=net, free_first_hour_startup=free_first_hour_startup)
    log.info("%s: %s commitment cost %.2f", case.name, uc_method, schedule.total_cost)

    dispatches, prices = [], []
    output = np.zeros_like(schedule.output)
    for hour in range(1, schedule.hours + 1):
        committed = schedule.committed(hour)
        if committed:
            result, duals = economic_dispatch(case, hour, committed, net)
            price = nodal_prices(duals, net.T)
        else:
            result, price = _idle_hour(case, hour, net)
        output[:, hour - 1] = result.output
        dispatches.append(result)
        prices.append(price)

    marginal = np.array([g.marginal_cost for g in case.generators])
    social = marginal @ output
    startup = np.array([g.startup_cost for g in case.generators]) @ schedule.startup.astype(float)
    if free_first_hour_startup and startup.size:
        startup[0] = 0.0
    total = float(social.sum() + startup.sum())
    schedule = replace(schedule, output=output, total_cost=total)

    result = DayAheadResult(
        label=case.name,
        case=case,
        schedule=schedule,
        dispatches=tuple(dispatches),
        hourly_prices=tuple(prices),
        hourly_social_cost=social,
        hourly_startup_cost=startup,
        total_cost=total,
    )
    if out_dir is not None:
        write_day_ahead(result, out_dir)
        if dump_network:
            dump_matrices(case, out_dir)
    return result


def write_day_ahead(result: DayAheadResult, out_dir) -> list[Path]:
    out = _out_dir(out_dir)
    case = result.case
    paths = [out / "schedule.csv", out / "prices.csv", out / "costs.csv", out / "flows.csv"]

    try:
        write_schedule_csv(result.schedule, paths[0])
    except OSError as exc:
        raise OutputError(f"cannot write {paths[0]}: {exc.strerror or exc}") from exc

    with _csv_out(paths[1]) as w:
        w.writerow(["hour", "bus", "price", "source"])
        for pv in result.hourly_prices:
            for bus, rho in zip(case.buses, pv.prices):
                w.writerow([pv.hour, bus, format_value(rho), pv.source])

    with _csv_out(paths[2]) as w:
        w.writerow(["hour", "social_cost", "startup_cost"])
        for t, (soc, st) in enumerate(zip(result.hourly_social_cost, result.hourly_startup_cost), start=1):
            w.writerow([t, format_value(soc), format_value(st)])

    with _csv_out(paths[3]) as w:
        w.writerow(["hour", "line", "flow_mw", "limit_mw", "binding"])
        for d in result.dispatches:
            for ln, f in zip(case.lines, d.flows):
                w.writerow([d.hour, ln.id, format_value(f), format_value(ln.flow_limit), int(ln.id in d.binding_lines)])
    return paths


def _same_topology(a: GridCase, b: GridCase) -> bool:
    def shape(c: GridCase):
        return tuple(c.buses), tuple((ln.id, ln.from_bus, ln.to_bus) for ln in c.lines)
    return shape(a) == shape(b)


def _constant(values: np.ndarray) -> bool:
    if not values.size:
        return True
    return bool(np.all(np.isfinite(values)) and np.ptp(values) <= PRICE_TOL)


def compare_scenarios(base, variant, out_dir=None, *, uc_method: str = "milp",
                      susceptance: str | None = None) -> ComparisonReport:
    """Side-by-side prices and costs of two cases on the same network.

    ``base`` and ``variant`` are :class:`DayAheadResult` objects or anything
    :func:`run_day_ahead` accepts. Peak prices are taken at the first hour
    of maximum base demand; constancy is reported over hours 13 to 21.
    """
    items = [item if isinstance(item, DayAheadResult) else _resolve_case(item, susceptance)
             for item in (base, variant)]
    cases = [item.case if isinstance(item, DayAheadResult) else item for item in items]
    if not _same_topology(*cases):
        raise TopologyMismatchError(
            f"cases {cases[0].name!r} and {cases[1].name!r} do not share bus and line topology"
        )
    base_r, var_r = [item if isinstance(item, DayAheadResult) else run_day_ahead(item, uc_method)
                     for item in items]

    demand = np.asarray(base_r.case.demand)
    peak = int(np.argmax(demand)) + 1
    window = [h - 1 for h in PEAK_HOURS if h <= base_r.hours]
    bp, vp = base_r.price_matrix(), var_r.price_matrix()
    rows = []
    for k, bus in enumerate(base_r.case.buses):
        b, v = float(bp[peak - 1, k]), float(vp[peak - 1, k])
        rows.append(PeakPriceRow(
            bus=bus,
            base_peak_price=b,
            variant_peak_price=v,
            delta=v - b,
            base_constant=_constant(bp[window, k]),
            variant_constant=_constant(vp[window, k]),
            fractional=any(abs(p - round(p)) > PRICE_TOL for p in (b, v) if np.isfinite(p)),
        ))

    base_hourly = base_r.hourly_social_cost + base_r.hourly_startup_cost
    var_hourly = var_r.hourly_social_cost + var_r.hourly_startup_cost
    report = ComparisonReport(
        base=base_r,
        variant=var_r,
        peak_hour=peak,
        rows=tuple(rows),
        hourly_cost_delta=var_hourly - base_hourly,
        total_cost_delta=var_r.total_cost - base_r.total_cost,
    )
    if out_dir is not None:
        write_comparison(report, out_dir)
    return report


def write_comparison(report: ComparisonReport, out_dir) -> list[Path]:
    out = _out_dir(out_dir)
    paths = [out / "comparison.csv", out / "cost_comparison.csv"]
    with _csv_out(paths[0]) as w:
        w.writerow(["bus", "base_peak_price", "variant_peak_price", "delta",
                    "base_constant", "variant_constant", "fractional"])
        for r in report.rows:
            w.writerow([r.bus, format_value(r.base_peak_price), format_value(r.variant_peak_price), format_value(r.delta),
                        int(r.base_constant), int(r.variant_constant), int(r.fractional)])

    base_hourly = report.base.hourly_social_cost + report.base.hourly_startup_cost
    var_hourly = report.variant.hourly_social_cost + report.variant.hourly_startup_cost
    with _csv_out(paths[1]) as w:
        w.writerow(["hour", "base_cost", "variant_cost", "delta"])
        for t, (b, v, d) in enumerate(zip(base_hourly, var_hourly, report.hourly_cost_delta), start=1):
            w.writerow([t, format_value(b), format_value(v), format_value(d)])
        w.writerow(["total", format_value(report.base.total_cost), format_value(report.variant.total_cost),
                    format_value(report.total_cost_delta)])
    return paths


def emit_plot_data(result: DayAheadResult, out_dir) -> list[Path]:
    """Write wide per-hour series; ``t_start``/``t_end`` give the step edges."""
    out = _out_dir(out_dir)
    gens = result.schedule.generators
    H = result.hours
    paths = [out / name for name in ("generator_output_by_hour.csv", "onoff_by_hour.csv",
                                     "social_cost_by_hour.csv", "price_by_bus_by_hour.csv")]

    def stair(w, header, rows):
        w.writerow(["hour", "t_start", "t_end", *header])
        for t in range(H):
            w.writerow([t + 1, t, t + 1, *rows(t)])

    with _csv_out(paths[0]) as w:
        stair(w, gens, lambda t: [format_value(v) for v in result.schedule.output[:, t]])
    with _csv_out(paths[1]) as w:
        stair(w, gens, lambda t: [int(v) for v in result.schedule.on[:, t]])
    with _csv_out(paths[2]) as w:
        stair(w, ["social_cost", "startup_cost"],
              lambda t: [format_value(result.hourly_social_cost[t]), format_value(result.hourly_startup_cost[t])])
    prices = result.price_matrix()
    with _csv_out(paths[3]) as w:
        stair(w, [f"bus{b}" for b in result.case.buses], lambda t: [format_value(v) for v in prices[t]])
    return paths
