"""Serialization: canonical JSON for models and scenarios, CSV for runs.

Canonical form: keys sorted, two-space indent, trailing newline. Floats
are written with repr round-tripping, so save -> load -> save is
byte-identical and diffs stay minimal. Optional blocks (exciter,
governor, controllers) are omitted when absent, never written as null.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import controllers as ctl
from . import hvdc
from . import machines as mach
from .engine import ControllerBank, Event, SimConfig, SystemModel, TimeSeries
from .errors import ValidationError
from .grid import Branch, Bus, NetworkModel
from .segmentation import LinkTemplate, SegmentationPlan

CASES = ("AcBase", "DcsConstPQ", "DcsFcPodLF", "DcsFcPodFCOI")


@dataclass
class Scenario:
    """One runnable study: a system file plus events, sim config, outputs.

    `system` is stored as written in the file; resolve it against the
    scenario's own directory (see load_scenario). A `controllers` block
    here overrides whatever the system file carries, which is how a
    designed damper file is injected without editing the system.
    """

    system: str
    case: str = "AcBase"
    events: list[Event] = field(default_factory=list)
    sim: SimConfig = field(default_factory=SimConfig)
    controllers: ControllerBank | None = None
    plan: SegmentationPlan | None = None
    out_dir: str | None = None


# --------------------------------------------------------------- primitives

def _row(obj, skip: tuple[str, ...] = ()) -> dict:
    """Dataclass -> plain dict; drops private, None and skipped fields."""
    out = {}
    for f in dataclasses.fields(obj):
        if not f.init or f.name.startswith("_") or f.name in skip:
            continue
        val = getattr(obj, f.name)
        if val is None:
            continue
        out[f.name] = val
    return out


def _build(cls, row: dict, where: str):
    if not isinstance(row, dict):
        raise ValidationError(f"{where}: expected an object, got {type(row).__name__}")
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    extra = sorted(set(row) - names)
    if extra:
        raise ValidationError(f"{where}: unknown field(s) {extra}")
    try:
        return cls(**row)
    except TypeError as exc:
        raise ValidationError(f"{where}: {exc}") from None


def dumps_canonical(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def save_json(payload: dict, path) -> None:
    Path(path).write_text(dumps_canonical(payload))


def load_json(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ValidationError(f"file not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{p}: invalid JSON ({exc})") from None


# ------------------------------------------------------------------ network

def network_to_dict(net: NetworkModel) -> dict:
    return {
        "system_base_mva": net.system_base_mva,
        "buses": [_row(b) for b in net.buses],
        "branches": [_row(br) for br in net.branches],
    }


def network_from_dict(d: dict) -> NetworkModel:
    for key in ("buses", "branches", "system_base_mva"):
        if key not in d:
            raise ValidationError(f"network: missing required key '{key}'")
    buses = [_build(Bus, row, f"bus[{i}]") for i, row in enumerate(d["buses"])]
    branches = [_build(Branch, row, f"branch[{i}]")
                for i, row in enumerate(d["branches"])]
    return NetworkModel(buses=buses, branches=branches,
                        system_base_mva=d["system_base_mva"])


# ----------------------------------------------------------------- machines

def _machine_to_dict(m: mach.SynchronousMachine) -> dict:
    out = _row(m, skip=("exciter", "governor"))
    if m.exciter is not None:
        out["exciter"] = _row(m.exciter)
    if m.governor is not None:
        out["governor"] = _row(m.governor)
    return out


def _machine_from_dict(row: dict, where: str) -> mach.SynchronousMachine:
    row = dict(row)
    exc = row.pop("exciter", None)
    gov = row.pop("governor", None)
    m = _build(mach.SynchronousMachine, row, where)
    if exc is not None:
        m.exciter = _build(mach.Exciter, exc, f"{where}.exciter")
    if gov is not None:
        m.governor = _build(mach.Governor, gov, f"{where}.governor")
    return m


# --------------------------------------------------------------------- HVDC

def _link_to_dict(lk: hvdc.HvdcLink) -> dict:
    return {
        "name": lk.name,
        "station_1": _row(lk.station_1),
        "station_2": _row(lk.station_2),
        "line": _row(lk.line),
    }


def _link_from_dict(row: dict, where: str) -> hvdc.HvdcLink:
    for key in ("name", "station_1", "station_2", "line"):
        if key not in row:
            raise ValidationError(f"{where}: missing required key '{key}'")
    return hvdc.HvdcLink(
        name=row["name"],
        station_1=_build(hvdc.VscStation, row["station_1"], f"{where}.station_1"),
        station_2=_build(hvdc.VscStation, row["station_2"], f"{where}.station_2"),
        line=_build(hvdc.DcLine, row["line"], f"{where}.line"),
    )


# -------------------------------------------------------------- controllers

def controllers_to_dict(bank: ControllerBank) -> dict:
    out: dict = {}
    if bank.fc:
        out["fc"] = {name: _row(p) for name, p in sorted(bank.fc.items())}
    if bank.podq:
        out["podq"] = {name: _row(p) for name, p in sorted(bank.podq.items())}
    if bank.delay.tau:
        out["delay_tau_s"] = bank.delay.tau
    return out


def controllers_from_dict(d: dict) -> ControllerBank:
    known = {"fc", "podq", "delay_tau_s"}
    extra = sorted(set(d) - known)
    if extra:
        raise ValidationError(f"controllers: unknown key(s) {extra}")
    fc = {name: _build(ctl.FcParams, row, f"fc[{name}]")
          for name, row in d.get("fc", {}).items()}
    podq = {}
    for name, row in d.get("podq", {}).items():
        p = _build(ctl.PodQParams, row, f"podq[{name}]")
        if p.variant not in (ctl.POD_LF, ctl.POD_FCOI):
            raise ValidationError(f"podq[{name}]: variant must be "
                                  f"'{ctl.POD_LF}' or '{ctl.POD_FCOI}'")
        podq[name] = p
    delay = ctl.DelayParams(tau=float(d.get("delay_tau_s", 0.0)))
    return ControllerBank(fc=fc, podq=podq, delay=delay)


# --------------------------------------------------------------------- plan

def plan_to_dict(plan: SegmentationPlan) -> dict:
    links = []
    for t in plan.links:
        row = _row(t, skip=("circuits", "station_kwargs"))
        if t.circuits is not None:
            row["circuits"] = list(t.circuits)
        if t.station_kwargs:
            row["station_kwargs"] = t.station_kwargs
        links.append(row)
    return {"links": links, "setpoint_rule": plan.setpoint_rule}


def plan_from_dict(d: dict) -> SegmentationPlan:
    if "links" not in d:
        raise ValidationError("plan: missing required key 'links'")
    links = []
    for i, row in enumerate(d["links"]):
        row = dict(row)
        if "circuits" in row and row["circuits"] is not None:
            row["circuits"] = tuple(row["circuits"])
        links.append(_build(LinkTemplate, row, f"plan.links[{i}]"))
    extra = sorted(set(d) - {"links", "setpoint_rule"})
    if extra:
        raise ValidationError(f"plan: unknown key(s) {extra}")
    kwargs = {"links": links}
    if "setpoint_rule" in d:
        kwargs["setpoint_rule"] = d["setpoint_rule"]
    return SegmentationPlan(**kwargs)


# ------------------------------------------------------------- whole system

def system_to_dict(model: SystemModel) -> dict:
    d = network_to_dict(model.network)
    d["f_hz"] = model.f_hz
    d["machines"] = [_machine_to_dict(m) for m in model.machines]
    if model.hvdc_links:
        d["hvdc_links"] = [_link_to_dict(lk) for lk in model.hvdc_links]
    cb = controllers_to_dict(model.controllers)
    if cb:
        d["controllers"] = cb
    return d


def system_from_dict(d: dict) -> SystemModel:
    known = {"buses", "branches", "system_base_mva", "f_hz", "machines",
             "hvdc_links", "controllers"}
    extra = sorted(set(d) - known)
    if extra:
        raise ValidationError(f"system: unknown key(s) {extra}")
    net = network_from_dict(d)
    machines = [_machine_from_dict(row, f"machine[{i}]")
                for i, row in enumerate(d.get("machines", []))]
    links = [_link_from_dict(row, f"hvdc_links[{i}]")
             for i, row in enumerate(d.get("hvdc_links", []))]
    bank = controllers_from_dict(d.get("controllers", {}))
    return SystemModel(network=net, machines=machines, hvdc_links=links,
                       controllers=bank, f_hz=d.get("f_hz", 50.0))


def save_system(model: SystemModel, path) -> None:
    save_json(system_to_dict(model), path)


def load_system(path) -> SystemModel:
    return system_from_dict(load_json(path))


# ----------------------------------------------------------------- scenario

def scenario_to_dict(sc: Scenario) -> dict:
    d: dict = {
        "system": sc.system,
        "case": sc.case,
        "events": [_row(ev) for ev in sc.events],
        "sim": _row(sc.sim, skip=("record",)),
        "record": list(sc.sim.record),
    }
    if sc.controllers is not None:
        d["controllers"] = controllers_to_dict(sc.controllers)
    if sc.plan is not None:
        d["plan"] = plan_to_dict(sc.plan)
    if sc.out_dir is not None:
        d["out_dir"] = sc.out_dir
    return d


def scenario_from_dict(d: dict) -> Scenario:
    known = {"system", "case", "events", "sim", "record", "controllers",
             "plan", "out_dir"}
    extra = sorted(set(d) - known)
    if extra:
        raise ValidationError(f"scenario: unknown key(s) {extra}")
    if "system" not in d:
        raise ValidationError("scenario: missing required key 'system'")
    case = d.get("case", "AcBase")
    if case not in CASES:
        raise ValidationError(f"scenario: case '{case}' not one of {CASES}")
    sim_row = dict(d.get("sim", {}))
    if "record" in d:
        sim_row["record"] = tuple(d["record"])
    sim = _build(SimConfig, sim_row, "scenario.sim")
    events = [_build(Event, row, f"event[{i}]")
              for i, row in enumerate(d.get("events", []))]
    bank = controllers_from_dict(d["controllers"]) if "controllers" in d else None
    plan = plan_from_dict(d["plan"]) if "plan" in d else None
    return Scenario(system=d["system"], case=case, events=events, sim=sim,
                    controllers=bank, plan=plan, out_dir=d.get("out_dir"))


def save_scenario(sc: Scenario, path) -> None:
    save_json(scenario_to_dict(sc), path)


def load_scenario(path) -> tuple[Scenario, Path]:
    """Returns the scenario and the directory its file refs resolve against."""
    p = Path(path)
    return scenario_from_dict(load_json(p)), p.parent


def resolve_system(sc: Scenario, base_dir) -> SystemModel:
    sp = Path(sc.system)
    if not sp.is_absolute():
        sp = Path(base_dir) / sp
    model = load_system(sp)
    if sc.controllers is not None:
        model.controllers = sc.controllers
    return model


# ---------------------------------------------------------------------- CSV

def write_csv(ts: TimeSeries, path) -> None:
    """time_s first, then every channel, 9 significant digits."""
    cols = list(ts.data)
    with open(path, "w") as fh:
        fh.write(",".join(["time_s"] + cols) + "\n")
        for k, t in enumerate(ts.time):
            vals = [f"{t:.9g}"] + [f"{ts.data[c][k]:.9g}" for c in cols]
            fh.write(",".join(vals) + "\n")
