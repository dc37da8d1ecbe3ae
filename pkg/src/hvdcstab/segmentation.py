"""DC segmentation: replace AC tie corridors with point-to-point links.

Each corridor in the plan (one or more parallel circuits between the
same pair of buses) becomes a single link whose set points copy the
pre-removal AC corridor flows, so the surrounding power flow barely
moves. One converter sits at each terminal bus; the sending station
holds active power, the receiving one regulates DC voltage. Every
resulting island gets a slack bus at its heaviest machine.
"""

from dataclasses import dataclass, field

from . import hvdc
from .engine import SystemModel, initial_power_flow
from .errors import (
    AlreadyOut,
    NotASeparator,
    RatingExceeded,
    TargetNotFound,
    ValidationError,
)
from .grid import branch_flow

MATCH_AC_FLOW = "MatchAcFlow"


@dataclass
class LinkTemplate:
    """One corridor to convert plus the hardware of its replacement."""
    name: str
    from_bus: int
    to_bus: int
    circuits: tuple[int, ...] | None = None     # None: every parallel circuit
    s_rated_mva: float = 0.0
    v_base_dc_kv: float = 360.0
    r_dc_ohm: float = 1.6
    l_dc_h: float = 0.25
    c_dc_f: float = 3000e-6
    vdc_side: str = "to"        # which terminal regulates DC voltage
    station_kwargs: dict = field(default_factory=dict)


@dataclass
class SegmentationPlan:
    links: list[LinkTemplate]
    setpoint_rule: str = MATCH_AC_FLOW

    def __post_init__(self):
        if self.setpoint_rule != MATCH_AC_FLOW:
            raise ValidationError(
                f"unknown set-point rule {self.setpoint_rule!r}")


def _corridor_branches(net, tpl: LinkTemplate):
    ends = {tpl.from_bus, tpl.to_bus}
    found = [br for br in net.branches
             if {br.from_bus, br.to_bus} == ends
             and (tpl.circuits is None or br.circuit in tpl.circuits)]
    if not found:
        raise TargetNotFound(
            f"plan corridor {tpl.from_bus}-{tpl.to_bus}: no such branch")
    dead = [br for br in found if not br.status]
    if dead:
        raise AlreadyOut(
            f"plan corridor {tpl.from_bus}-{tpl.to_bus}: circuit already out")
    return found


def segment(model: SystemModel, plan: SegmentationPlan) -> SystemModel:
    """Replace the planned corridors with HVDC links; returns a new model.

    The AC case is solved first to harvest corridor flows; removal must
    split the network into exactly the bus-tagged regions.
    """
    out = model.copy()
    net = out.network
    sol = initial_power_flow(model)
    bix = {bid: i for i, bid in enumerate(sol.bus_ids)}

    flows = []
    for tpl in plan.links:
        s_from = 0j
        s_to = 0j
        for br in _corridor_branches(net, tpl):
            sf, st = branch_flow(net, br, sol)
            if br.from_bus == tpl.from_bus:
                s_from += sf
                s_to += st
            else:
                s_from += st
                s_to += sf
            br.status = False
        flows.append((tpl, s_from, s_to))

    comps = net.components()
    declared = {b.region for b in net.buses}
    seen_regions = []
    for comp in comps:
        tags = {net.bus(b).region for b in comp}
        if len(tags) > 1:
            raise NotASeparator(
                f"removing the planned corridors leaves regions "
                f"{sorted(tags)} connected"
            )
        seen_regions.append(tags.pop())
    if len(comps) != len(declared) or set(seen_regions) != declared:
        raise NotASeparator(
            f"plan yields {len(comps)} islands for regions {sorted(declared)}"
        )

    s_sys = net.system_base_mva
    for tpl, s_from, s_to in flows:
        if tpl.s_rated_mva <= 0.0:
            raise ValidationError(f"link {tpl.name}: rating must be positive")
        need = max(abs(s_from), abs(s_to)) * s_sys
        if need > tpl.s_rated_mva:
            raise RatingExceeded(
                f"link {tpl.name}: corridor carries {need:.1f} MVA, "
                f"rating {tpl.s_rated_mva:.1f} MVA"
            )
        k = s_sys / tpl.s_rated_mva
        common = dict(s_rated=tpl.s_rated_mva, c_dc=tpl.c_dc_f)
        common.update(tpl.station_kwargs)
        # The terminal opposite the DC-voltage regulator holds scheduled
        # current exactly, so disturbances near the regulating terminal
        # cannot leak across the link into the far region.
        if tpl.vdc_side not in ("from", "to"):
            raise ValidationError(
                f"link {tpl.name}: vdc_side must be 'from' or 'to'")
        m1, m2 = ((hvdc.VDC_CONTROL, hvdc.P_CONTROL)
                  if tpl.vdc_side == "from"
                  else (hvdc.P_CONTROL, hvdc.VDC_CONTROL))
        st1 = hvdc.VscStation(
            name=f"{tpl.name}_{tpl.from_bus}", bus=tpl.from_bus, mode=m1,
            p_set0=-s_from.real * k if m1 == hvdc.P_CONTROL else 0.0,
            q_set0=-s_from.imag * k, **common)
        st2 = hvdc.VscStation(
            name=f"{tpl.name}_{tpl.to_bus}", bus=tpl.to_bus, mode=m2,
            p_set0=-s_to.real * k if m2 == hvdc.P_CONTROL else 0.0,
            q_set0=-s_to.imag * k, **common)
        line = hvdc.DcLine(r_dc=tpl.r_dc_ohm, l_dc=tpl.l_dc_h,
                           v_base_dc=tpl.v_base_dc_kv)
        out.hvdc_links.append(
            hvdc.HvdcLink(name=tpl.name, station_1=st1, station_2=st2,
                          line=line))

    _assign_island_slacks(out)
    out.validate()
    return out


def _assign_island_slacks(model: SystemModel) -> None:
    """Give every island exactly one slack, at its heaviest machine bus.

    Weight is stored kinetic energy H*S. An island that already has one
    slack keeps it; surplus slacks (none arise from a valid plan) are
    demoted to PV.
    """
    net = model.network
    for comp in net.components():
        slacks = [b for b in comp if net.bus(b).kind == "Slack"]
        if len(slacks) == 1:
            continue
        members = [m for m in model.machines if m.bus in comp]
        if not members:
            continue
        best = max(members, key=lambda m: (m.h * m.s_rated, -m.bus))
        for b in slacks:
            net.bus(b).kind = "PV"
        net.bus(best.bus).kind = "Slack"
