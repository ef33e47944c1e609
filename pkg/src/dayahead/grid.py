"""Grid case data: buses, generators, loads, lines and the daily demand forecast.

Cases are stored as JSON documents and parsed into immutable dataclasses.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import numpy as np

HOURS = 24
SHARE_TOL = 1e-9
SUSCEPTANCE_MODES = ("reactance", "table_b")


class CaseFormatError(ValueError):
    """Raised when a case document is malformed or missing fields."""


class CaseValidationError(ValueError):
    """Raised when a parsed case breaks one or more invariants."""

    def __init__(self, violations: Sequence["Violation"]):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


@dataclass(frozen=True)
class GeneratorSpec:
    name: str
    bus: int
    p_min: float
    p_max: float
    startup_cost: float
    marginal_cost: float


@dataclass(frozen=True)
class LoadSpec:
    name: str
    bus: int
    share: float
    base_mw: float | None = None


@dataclass(frozen=True)
class LineSpec:
    id: int
    from_bus: int
    to_bus: int
    reactance: float
    susceptance_b: float
    flow_limit: float


@dataclass(frozen=True)
class GridCase:
    buses: tuple[int, ...]
    generators: tuple[GeneratorSpec, ...]
    loads: tuple[LoadSpec, ...]
    lines: tuple[LineSpec, ...]
    demand: tuple[float, ...]
    slack_bus: int
    susceptance_mode: str = "reactance"
    name: str = field(default="", compare=False)

    @property
    def bus_count(self) -> int:
        return len(self.buses)

    @property
    def generator_names(self) -> list[str]:
        return [g.name for g in self.generators]

    def bus_index(self, bus: int) -> int:
        """Zero-based column of ``bus`` in network matrices."""
        return self.buses.index(bus)

    def generator_index(self, name: str) -> int:
        for i, g in enumerate(self.generators):
            if g.name == name:
                return i
        raise KeyError(f"unknown generator {name!r}")

    def with_susceptance_mode(self, mode: str) -> "GridCase":
        if mode not in SUSCEPTANCE_MODES:
            raise ValueError(f"susceptance_mode must be one of {SUSCEPTANCE_MODES}")
        return replace(self, susceptance_mode=mode)


@dataclass(frozen=True, order=True)
class Violation:
    severity: int
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.field}: {self.message}"


# severities, most severe first
_STRUCTURE, _TOPOLOGY, _VALUE, _CAPACITY = range(4)


def _require(obj: dict, key: str, where: str) -> Any:
    if key not in obj:
        raise CaseFormatError(f"missing required field {key!r} in {where}")
    return obj[key]


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CaseFormatError(f"{where} must be a number, got {value!r}")
    return float(value)


def _integer(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise CaseFormatError(f"{where} must be an integer, got {value!r}")
    return value


def _check_unique(keys: list, what: str) -> None:
    seen = set()
    for k in keys:
        if k in seen:
            raise CaseFormatError(f"duplicate {what} {k!r}")
        seen.add(k)


def case_from_dict(doc: dict, name: str = "") -> GridCase:
    """Build a case from an already-decoded JSON object (no validation)."""
    if not isinstance(doc, dict):
        raise CaseFormatError("case document must be a JSON object")
    buses = [_integer(b, "buses[]") for b in _require(doc, "buses", "case")]
    _check_unique(buses, "bus")

    gens = []
    for i, g in enumerate(_require(doc, "generators", "case")):
        where = f"generators[{i}]"
        gens.append(GeneratorSpec(
            name=str(_require(g, "name", where)),
            bus=_integer(_require(g, "bus", where), f"{where}.bus"),
            p_min=_number(_require(g, "p_min_mw", where), f"{where}.p_min_mw"),
            p_max=_number(_require(g, "p_max_mw", where), f"{where}.p_max_mw"),
            startup_cost=_number(_require(g, "startup_cost", where), f"{where}.startup_cost"),
            marginal_cost=_number(_require(g, "marginal_cost", where), f"{where}.marginal_cost"),
        ))
    _check_unique([g.name for g in gens], "generator name")

    loads = []
    for i, ld in enumerate(_require(doc, "loads", "case")):
        where = f"loads[{i}]"
        base = ld.get("base_mw")
        loads.append(LoadSpec(
            name=str(_require(ld, "name", where)),
            bus=_integer(_require(ld, "bus", where), f"{where}.bus"),
            share=_number(_require(ld, "share", where), f"{where}.share"),
            base_mw=None if base is None else _number(base, f"{where}.base_mw"),
        ))
    _check_unique([ld.name for ld in loads], "load name")

    lines = []
    for i, ln in enumerate(_require(doc, "lines", "case")):
        where = f"lines[{i}]"
        x = _number(_require(ln, "reactance_pu", where), f"{where}.reactance_pu")
        b = ln.get("susceptance_b")
        lines.append(LineSpec(
            id=_integer(_require(ln, "id", where), f"{where}.id"),
            from_bus=_integer(_require(ln, "from_bus", where), f"{where}.from_bus"),
            to_bus=_integer(_require(ln, "to_bus", where), f"{where}.to_bus"),
            reactance=x,
            susceptance_b=(1.0 / x if x else 0.0) if b is None else _number(b, f"{where}.susceptance_b"),
            flow_limit=_number(_require(ln, "flow_limit_mw", where), f"{where}.flow_limit_mw"),
        ))
    _check_unique([ln.id for ln in lines], "line id")
    lines.sort(key=lambda ln: ln.id)

    demand = tuple(_number(d, "demand_mw[]") for d in _require(doc, "demand_mw", "case"))
    slack = doc.get("slack_bus")
    slack = max(buses) if slack is None and buses else slack
    mode = doc.get("susceptance_mode", "reactance")
    if mode not in SUSCEPTANCE_MODES:
        raise CaseFormatError(f"susceptance_mode must be one of {SUSCEPTANCE_MODES}, got {mode!r}")

    return GridCase(
        buses=tuple(buses),
        generators=tuple(gens),
        loads=tuple(loads),
        lines=tuple(lines),
        demand=demand,
        slack_bus=_integer(slack, "slack_bus") if slack is not None else 0,
        susceptance_mode=mode,
        name=str(doc.get("name", name)),
    )


def parse_case(text: str, *, validate: bool = True, name: str = "") -> GridCase:
    """Parse a JSON case document.

    Defaults: ``susceptance_mode`` is ``reactance`` and the slack bus is the
    highest-numbered bus. With ``validate`` set, any invariant violation
    raises :class:`CaseValidationError`.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseFormatError(
            f"syntax error at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from None
    case = case_from_dict(doc, name=name)
    if validate:
        violations = validate_case(case)
        if violations:
            raise CaseValidationError(violations)
    return case


def case_to_dict(case: GridCase) -> dict:
    doc: dict[str, Any] = {}
    if case.name:
        doc["name"] = case.name
    doc["buses"] = list(case.buses)
    doc["slack_bus"] = case.slack_bus
    doc["susceptance_mode"] = case.susceptance_mode
    doc["generators"] = [
        {"name": g.name, "bus": g.bus, "p_min_mw": g.p_min, "p_max_mw": g.p_max,
         "startup_cost": g.startup_cost, "marginal_cost": g.marginal_cost}
        for g in case.generators
    ]
    doc["loads"] = []
    for ld in case.loads:
        entry: dict[str, Any] = {"name": ld.name, "bus": ld.bus, "share": ld.share}
        if ld.base_mw is not None:
            entry["base_mw"] = ld.base_mw
        doc["loads"].append(entry)
    doc["lines"] = [
        {"id": ln.id, "from_bus": ln.from_bus, "to_bus": ln.to_bus,
         "reactance_pu": ln.reactance, "susceptance_b": ln.susceptance_b,
         "flow_limit_mw": ln.flow_limit}
        for ln in case.lines
    ]
    doc["demand_mw"] = list(case.demand)
    return doc


def serialize_case(case: GridCase) -> str:
    return json.dumps(case_to_dict(case), indent=2) + "\n"


def _connected(buses: Sequence[int], lines: Sequence[LineSpec]) -> bool:
    if not buses:
        return False
    adj: dict[int, set[int]] = {b: set() for b in buses}
    for ln in lines:
        if ln.from_bus in adj and ln.to_bus in adj:
            adj[ln.from_bus].add(ln.to_bus)
            adj[ln.to_bus].add(ln.from_bus)
    seen = {buses[0]}
    queue = deque([buses[0]])
    while queue:
        for nb in adj[queue.popleft()]:
            if nb not in seen:
                seen.add(nb)
                queue.append(nb)
    return len(seen) == len(buses)


def validate_case(case: GridCase) -> list[Violation]:
    """Return every invariant violation, ordered by severity then field."""
    out: list[Violation] = []
    n = len(case.buses)
    bus_set = set(case.buses)

    if sorted(case.buses) != list(range(1, n + 1)):
        out.append(Violation(_STRUCTURE, "buses", f"bus numbers must be exactly 1..{n}"))
    if case.slack_bus not in bus_set:
        out.append(Violation(_STRUCTURE, "slack_bus", f"slack bus {case.slack_bus} does not exist"))
    if case.susceptance_mode not in SUSCEPTANCE_MODES:
        out.append(Violation(_STRUCTURE, "susceptance_mode", f"unknown mode {case.susceptance_mode!r}"))
    if len(case.demand) != HOURS:
        out.append(Violation(_STRUCTURE, "demand_mw", f"expected {HOURS} hourly values, got {len(case.demand)}"))
    if not case.generators:
        out.append(Violation(_STRUCTURE, "generators", "case has no generators"))

    for g in case.generators:
        f = f"generators.{g.name}"
        if g.bus not in bus_set:
            out.append(Violation(_STRUCTURE, f, f"bus {g.bus} does not exist"))
        if g.p_min < 0:
            out.append(Violation(_VALUE, f, "p_min must be >= 0"))
        if g.p_min > g.p_max:
            out.append(Violation(_VALUE, f, f"p_min {g.p_min} exceeds p_max {g.p_max}"))
        if g.startup_cost < 0:
            out.append(Violation(_VALUE, f, "startup_cost must be >= 0"))
        if g.marginal_cost < 0:
            out.append(Violation(_VALUE, f, "marginal_cost must be >= 0"))

    for ld in case.loads:
        f = f"loads.{ld.name}"
        if ld.bus not in bus_set:
            out.append(Violation(_STRUCTURE, f, f"bus {ld.bus} does not exist"))
        if ld.share < 0:
            out.append(Violation(_VALUE, f, "share must be >= 0"))
        if ld.base_mw is not None and ld.base_mw < 0:
            out.append(Violation(_VALUE, f, "base_mw must be >= 0"))
    share_sum = sum(ld.share for ld in case.loads)
    if abs(share_sum - 1.0) > SHARE_TOL:
        out.append(Violation(_VALUE, "loads", f"load shares sum to {share_sum:.12g}, expected 1"))

    for ln in case.lines:
        f = f"lines.{ln.id}"
        if ln.from_bus not in bus_set or ln.to_bus not in bus_set:
            out.append(Violation(_STRUCTURE, f, "line endpoint bus does not exist"))
        if ln.from_bus == ln.to_bus:
            out.append(Violation(_STRUCTURE, f, "from_bus equals to_bus"))
        if ln.reactance <= 0:
            out.append(Violation(_VALUE, f, "reactance must be > 0"))
        if ln.susceptance_b <= 0:
            out.append(Violation(_VALUE, f, "susceptance_b must be > 0"))
        if ln.flow_limit <= 0:
            out.append(Violation(_VALUE, f, "flow_limit must be > 0"))

    if n and not _connected(case.buses, case.lines):
        out.append(Violation(_TOPOLOGY, "lines", "network graph is disconnected"))

    for h, d in enumerate(case.demand, start=1):
        if d < 0:
            out.append(Violation(_VALUE, f"demand_mw.{h:02d}", "demand must be >= 0"))
    capacity = sum(g.p_max for g in case.generators)
    for h, d in enumerate(case.demand, start=1):
        if d > capacity:
            out.append(Violation(
                _CAPACITY, f"demand_mw.{h:02d}",
                f"demand {d:g} MW exceeds total capacity {capacity:g} MW",
            ))
    return sorted(out)


def load_vector(case: GridCase, hour: int) -> np.ndarray:
    """Per-bus load (MW) at ``hour`` (1-based), each load a fixed share of demand."""
    if not 1 <= hour <= len(case.demand):
        raise ValueError(f"hour must be in 1..{len(case.demand)}, got {hour}")
    total = case.demand[hour - 1]
    vec = np.zeros(case.bus_count)
    for ld in case.loads:
        vec[case.bus_index(ld.bus)] += ld.share * total
    return vec


def load_case(source: str | Path, *, validate: bool = True) -> GridCase:
    """Load a case from a path, or by bundled name (``case7_conventional``)."""
    path = Path(source)
    if path.exists():
        return parse_case(path.read_text(), validate=validate, name=path.stem)
    name = str(source)
    if not name.endswith(".json"):
        name += ".json"
    ref = resources.files("dayahead.data").joinpath(name)
    if not ref.is_file():
        raise FileNotFoundError(f"no case file or bundled case named {source!r}")
    return parse_case(ref.read_text(), validate=validate, name=Path(name).stem)


def bundled_cases() -> list[str]:
    return sorted(
        Path(p.name).stem for p in resources.files("dayahead.data").iterdir()
        if p.name.endswith(".json")
    )
