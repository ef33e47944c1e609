import csv
from dataclasses import replace

import numpy as np
import pytest

from dayahead.commitment import CommitmentInfeasible
from dayahead.grid import LineSpec, load_case, serialize_case
from dayahead.scenario import (
    PEAK_HOURS,
    OutputError,
    TopologyMismatchError,
    compare_scenarios,
    emit_plot_data,
    run_day_ahead,
    write_day_ahead,
)

CONV_PEAK = [30, 35, 25, 40, 20, 45, 50]
SOLAR_PEAK = [20, 27.5, 12.5, 35, 5, 42.5, 50]


def read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def conv_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("conv")
    return run_day_ahead("case7_conventional", "milp", out), out


@pytest.fixture(scope="module")
def solar_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("solar")
    return run_day_ahead("case7_solar", "milp", out), out


@pytest.fixture(scope="module")
def report(conv_run, solar_run, tmp_path_factory):
    out = tmp_path_factory.mktemp("cmp")
    return compare_scenarios(conv_run[0], solar_run[0], out), out


def test_run_writes_four_files(conv_run):
    _, out = conv_run
    assert sorted(p.name for p in out.iterdir()) == ["costs.csv", "flows.csv", "prices.csv", "schedule.csv"]


def test_totals(conv_run, solar_run):
    assert conv_run[0].total_cost == pytest.approx(281850.0, abs=1e-6)
    assert solar_run[0].total_cost == pytest.approx(161340.0, abs=1e-6)


def test_cost_closure_from_csv(conv_run, solar_run):
    for result, out in (conv_run, solar_run):
        rows = read(out / "costs.csv")
        assert len(rows) == 24
        total = sum(float(r["social_cost"]) + float(r["startup_cost"]) for r in rows)
        assert total == pytest.approx(result.total_cost, abs=1e-6)
        sched = read(out / "schedule.csv")
        marginal = {g.name: g.marginal_cost for g in result.case.generators}
        startup = {g.name: g.startup_cost for g in result.case.generators}
        rebuilt = sum(marginal[r["generator"]] * float(r["output_mw"]) + startup[r["generator"]] * int(r["startup"])
                      for r in sched)
        # output_mw carries 6 decimals, so each row may be off by 5e-7 MW times its cost
        bound = sum(5e-7 * marginal[r["generator"]] for r in sched)
        assert abs(rebuilt - result.total_cost) <= bound


def test_prices_csv(conv_run):
    rows = read(conv_run[1] / "prices.csv")
    assert len(rows) == 24 * 7
    assert {r["source"] for r in rows} == {"dual"}
    peak = [float(r["price"]) for r in rows if r["hour"] == "16"]
    np.testing.assert_allclose(peak, CONV_PEAK, atol=1e-6)


def test_flows_csv_binding_flags(conv_run):
    result, out = conv_run
    rows = read(out / "flows.csv")
    assert len(rows) == 24 * 7
    for r in rows:
        binding = abs(abs(float(r["flow_mw"])) - float(r["limit_mw"])) <= 1e-5
        assert int(r["binding"]) == int(binding)
        assert abs(float(r["flow_mw"])) <= float(r["limit_mw"]) + 1e-6
    peak = [r for r in rows if r["hour"] == "16" and r["line"] == "3"][0]
    assert peak["binding"] == "1" and float(peak["flow_mw"]) == pytest.approx(300.0)


def test_schedule_matches_redispatch(conv_run):
    result, _ = conv_run
    for d in result.dispatches:
        np.testing.assert_array_equal(result.schedule.output[:, d.hour - 1], d.output)


def test_csv_byte_identical_across_runs(conv_run, tmp_path):
    run_day_ahead("case7_conventional", "milp", tmp_path)
    for name in ("schedule.csv", "prices.csv", "costs.csv", "flows.csv"):
        assert (tmp_path / name).read_bytes() == (conv_run[1] / name).read_bytes()


def test_dp_and_milp_pipelines_agree(solar_run, tmp_path):
    dp = run_day_ahead("case7_solar", "dp", tmp_path)
    assert dp.total_cost == pytest.approx(solar_run[0].total_cost, abs=1e-6)
    for name in ("prices.csv", "costs.csv"):
        assert (tmp_path / name).read_bytes() == (solar_run[1] / name).read_bytes()


def test_case_path_and_object_inputs(tmp_path):
    case = load_case("case7_conventional")
    path = tmp_path / "c.json"
    path.write_text(serialize_case(case))
    a = run_day_ahead(str(path), "dp")
    b = run_day_ahead(case, "dp")
    assert a.total_cost == b.total_cost
    np.testing.assert_array_equal(a.price_matrix(), b.price_matrix())


def test_table_b_susceptance_override():
    # with the printed b column line 3 cannot carry the top demand hours
    with pytest.raises(CommitmentInfeasible):
        run_day_ahead("case7_conventional", "dp", susceptance="table_b")
    case = load_case("case7_conventional")
    light = replace(case, demand=tuple(min(d, 1000.0) for d in case.demand))
    result = run_day_ahead(light, "dp", susceptance="table_b")
    assert result.case.susceptance_mode == "table_b"
    assert result.total_cost != run_day_ahead(light, "dp").total_cost


def test_social_cost_solar_never_above_conventional(conv_run, solar_run):
    assert np.all(solar_run[0].hourly_social_cost <= conv_run[0].hourly_social_cost + 1e-9)


def test_comparison_rows(report):
    rep, out = report
    assert rep.peak_hour == 16
    rows = read(out / "comparison.csv")
    assert [int(r["bus"]) for r in rows] == list(range(1, 8))
    np.testing.assert_allclose([float(r["base_peak_price"]) for r in rows], CONV_PEAK, atol=1e-6)
    np.testing.assert_allclose([float(r["variant_peak_price"]) for r in rows], SOLAR_PEAK, atol=1e-6)
    np.testing.assert_allclose([float(r["delta"]) for r in rows],
                               np.subtract(SOLAR_PEAK, CONV_PEAK), atol=1e-6)
    assert [r["fractional"] for r in rows] == ["0", "1", "1", "0", "0", "1", "0"]
    assert rows[6]["delta"] == "0.000000"


def test_comparison_constancy_flags(report):
    rep, _ = report
    # hours 13-20 repeat the peak prices; hour 21 has lower demand and prices
    # drop everywhere except bus 5, whose unit stays marginal in both cases
    assert [r.base_constant for r in rep.rows] == [False] * 4 + [True] + [False] * 2
    assert [r.variant_constant for r in rep.rows] == [False] * 4 + [True] + [False] * 2
    for res in (rep.base, rep.variant):
        block = res.price_matrix()[[h - 1 for h in PEAK_HOURS[:-1]]]
        assert np.ptp(block, axis=0).max() <= 1e-6


def test_cost_comparison(report, conv_run, solar_run):
    rep, out = report
    rows = read(out / "cost_comparison.csv")
    assert len(rows) == 25 and rows[-1]["hour"] == "total"
    assert float(rows[-1]["delta"]) == pytest.approx(161340.0 - 281850.0)
    assert sum(float(r["delta"]) for r in rows[:-1]) == pytest.approx(rep.total_cost_delta, abs=1e-4)
    assert rep.total_cost_delta < 0


def test_compare_case_with_itself(conv_run, tmp_path):
    rep = compare_scenarios(conv_run[0], conv_run[0], tmp_path)
    assert all(r.delta == 0 for r in rep.rows)
    assert not rep.hourly_cost_delta.any() and rep.total_cost_delta == 0


def test_compare_from_case_names():
    rep = compare_scenarios("case7_conventional", "case7_solar", uc_method="dp")
    assert rep.total_cost_delta == pytest.approx(-120510.0)


def test_topology_mismatch(conv_run):
    case = load_case("case7_conventional")
    lines = case.lines[:-1] + (LineSpec(id=7, from_bus=6, to_bus=5, reactance=0.05,
                                        susceptance_b=20.0, flow_limit=500.0),)
    other = replace(case, lines=lines, name="rewired")
    with pytest.raises(TopologyMismatchError):
        compare_scenarios(conv_run[0], other)


def test_zero_demand_day(tmp_path):
    case = replace(load_case("case7_conventional"), demand=(0.0,) * 24)
    result = run_day_ahead(case, "milp", tmp_path)
    assert result.total_cost == 0.0
    assert not result.schedule.on.any()
    rows = read(tmp_path / "prices.csv")
    assert {r["source"] for r in rows} == {"degenerate"}
    assert {r["price"] for r in rows} == {"nan"}
    assert all(float(r["flow_mw"]) == 0.0 for r in read(tmp_path / "flows.csv"))


def test_free_first_hour_startup():
    charged = run_day_ahead("case7_conventional", "dp")
    free = run_day_ahead("case7_conventional", "dp", free_first_hour_startup=True)
    assert free.hourly_startup_cost[0] == 0.0
    # waiving the first-hour charge can also change which units start at hour 1
    assert free.total_cost <= charged.total_cost - charged.hourly_startup_cost[0] + 1e-9
    assert free.total_cost == pytest.approx(free.hourly_social_cost.sum() + free.hourly_startup_cost.sum())


def test_dump_network(tmp_path):
    run_day_ahead("case7_conventional", "dp", tmp_path, dump_network=True)
    assert (tmp_path / "T.csv").exists() and (tmp_path / "B_reduced.csv").exists()


def test_plot_data(solar_run, tmp_path):
    result, _ = solar_run
    paths = emit_plot_data(result, tmp_path)
    assert [p.name for p in paths] == ["generator_output_by_hour.csv", "onoff_by_hour.csv",
                                       "social_cost_by_hour.csv", "price_by_bus_by_hour.csv"]
    onoff = read(tmp_path / "onoff_by_hour.csv")
    assert len(onoff) == 24
    assert onoff[0]["t_start"] == "0" and onoff[0]["t_end"] == "1"
    assert all(r["Gx"] == "1" for r in onoff)
    prices = read(tmp_path / "price_by_bus_by_hour.csv")
    assert list(prices[0])[3:] == [f"bus{b}" for b in range(1, 8)]
    assert float(prices[15]["bus7"]) == 50.0


def test_unwritable_output(conv_run, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OutputError):
        write_day_ahead(conv_run[0], blocker)
    with pytest.raises(OutputError):
        write_day_ahead(conv_run[0], blocker / "sub")
