"""Point-to-point VSC-HVDC link for RMS studies.

Each converter station tracks dq current references through a first-order
lag, with the d axis locked to its AC bus voltage phasor (ideal PLL), so
p = v*i_d and q = -v*i_q on the converter base. One station of every link
schedules active power, the other regulates the DC voltage with a PI.
The DC circuit is a capacitor per station bus joined by a series R-L line;
converters appear on the DC side as power-conserving current injections.

Station quantities are per-unit on the converter rating; the DC circuit is
per-unit on the same MVA base and the pole-to-pole voltage base, which
turns capacitances and inductances into time constants in seconds.
"""

import math
from dataclasses import dataclass

from .errors import DcOvervoltage, DcUndervoltage, ValidationError, VoltageCollapse

P_CONTROL = "PControl"
VDC_CONTROL = "VdcControl"

# voltage floor below which current references are meaningless
V_AC_FLOOR = 0.1
# abort bands around the steady-state DC voltage limits
DC_GUARD_LOW = 0.5
DC_GUARD_HIGH = 1.5


@dataclass
class VscStation:
    name: str
    bus: int
    s_rated: float              # MVA, base for everything below
    mode: str = P_CONTROL
    rs: float = 0.004           # connection impedance, informational for RMS
    xs: float = 0.2
    tau_i: float = 0.02         # closed-loop current lag, s
    kp_vdc: float = 10.0
    ki_vdc: float = 20.0
    loss_a: float = 0.0         # converter loss polynomial a + b*i + c*i^2
    loss_b: float = 0.0
    loss_c: float = 0.0
    i_max: float = 1.0
    p_max: float = 1.0
    q_max: float = 0.4
    vdc_min: float = 0.9
    vdc_max: float = 1.1
    c_dc: float = 3000e-6       # station DC capacitor, F
    p_set0: float = 0.0         # scheduled AC injection, converter pu
    q_set0: float = 0.0
    vdc_ref: float = 1.0

    def __post_init__(self):
        if self.mode not in (P_CONTROL, VDC_CONTROL):
            raise ValidationError(f"station {self.name}: bad mode {self.mode!r}")

    def c_pu(self, v_base_dc_kv: float) -> float:
        """Capacitor charge time constant, s, on (s_rated, v_base_dc)."""
        return self.c_dc * (v_base_dc_kv * 1e3) ** 2 / (self.s_rated * 1e6)


@dataclass
class DcLine:
    r_dc: float                 # ohm
    l_dc: float                 # H
    v_base_dc: float            # pole-to-pole kV

    def pu(self, s_base_mva: float) -> tuple[float, float]:
        """(r, l) per unit; l comes out in seconds."""
        z_base = (self.v_base_dc * 1e3) ** 2 / (s_base_mva * 1e6)
        return self.r_dc / z_base, self.l_dc / z_base


@dataclass
class HvdcLink:
    name: str
    station_1: VscStation
    station_2: VscStation
    line: DcLine

    def __post_init__(self):
        modes = {self.station_1.mode, self.station_2.mode}
        if modes != {P_CONTROL, VDC_CONTROL}:
            raise ValidationError(
                f"link {self.name}: need exactly one {P_CONTROL} and one "
                f"{VDC_CONTROL} station"
            )
        if self.station_1.s_rated != self.station_2.s_rated:
            raise ValidationError(
                f"link {self.name}: stations must share one MVA rating"
            )

    @property
    def s_rated(self) -> float:
        return self.station_1.s_rated

    def stations(self) -> tuple[VscStation, VscStation]:
        return self.station_1, self.station_2

    def p_station(self) -> VscStation:
        return self.station_1 if self.station_1.mode == P_CONTROL else self.station_2

    def vdc_station(self) -> VscStation:
        return self.station_1 if self.station_1.mode == VDC_CONTROL else self.station_2


@dataclass
class VscState:
    p_ord: float                # delivered AC active power, converter pu
    q_ord: float
    v_dc: float                 # DC bus voltage, pu


def current_references(
    p_ref: float,
    q_ref: float,
    v_ac: float,
    i_max: float,
) -> tuple[float, float]:
    """dq current orders with hard active-priority limiting.

    i_d = p/v gets the full circle first; i_q = -q/v keeps what is left of
    the rating. Raises VoltageCollapse below the AC voltage floor.
    """
    if v_ac <= V_AC_FLOOR:
        raise VoltageCollapse(None, f"AC voltage {v_ac:.3f} pu at converter bus")
    i_d = p_ref / v_ac
    i_q = -q_ref / v_ac
    if abs(i_d) > i_max:
        i_d = math.copysign(i_max, i_d)
    head = math.sqrt(max(i_max * i_max - i_d * i_d, 0.0))
    if abs(i_q) > head:
        i_q = math.copysign(head, i_q)
    return i_d, i_q


def power_commands(
    p_ref: float,
    q_ref: float,
    v_ac: float,
    i_max: float,
) -> tuple[float, float]:
    """References clipped to the current circle, expressed as powers."""
    i_d, i_q = current_references(p_ref, q_ref, v_ac, i_max)
    return i_d * v_ac, -i_q * v_ac


def vsc_order_derivatives(
    st: VscStation,
    p_ord: float,
    q_ord: float,
    p_cmd: float,
    q_cmd: float,
) -> tuple[float, float]:
    """First-order tracking of the (already limited) power orders.

    The lag models the converter's order-processing delay; the inner
    current loop underneath is treated as instantaneous, so delivered
    power follows the filtered order independently of the AC voltage.
    """
    return (p_cmd - p_ord) / st.tau_i, (q_cmd - q_ord) / st.tau_i


def converter_loss(st: VscStation, i_mag: float) -> float:
    return st.loss_a + st.loss_b * i_mag + st.loss_c * i_mag * i_mag


def ac_dc_power_coupling(p_ac: float, i_mag: float,
                         losses: tuple[float, float, float]) -> float:
    """Power handed to the DC side for `p_ac` entering from the AC side.

    The loss polynomial always opposes the transfer, whichever direction
    the power flows: p_dc = p_ac - loss(i_mag).
    """
    a, b, c = losses
    return p_ac - (a + b * i_mag + c * i_mag * i_mag)


def vdc_pi_controller(
    st: VscStation,
    v_dc: float,
    pi_state: float,
) -> tuple[float, float]:
    """DC-voltage PI: returns (p_ref, d(pi_state)/dt) with anti-windup.

    Acts on e = v_dc - vdc_ref so that excess DC voltage is exported to
    the AC side. The output saturates at +-p_max and the integrator is
    frozen while pushing further into the limit.
    """
    e = v_dc - st.vdc_ref
    raw = st.kp_vdc * e + pi_state
    p_ref = min(max(raw, -st.p_max), st.p_max)
    dpi = st.ki_vdc * e
    if (raw >= st.p_max and dpi > 0.0) or (raw <= -st.p_max and dpi < 0.0):
        dpi = 0.0
    return p_ref, dpi


def dc_grid_dynamics(
    link: HvdcLink,
    v_dc1: float,
    v_dc2: float,
    i_line: float,
    p_dc1: float,
    p_dc2: float,
    t: float | None = None,
) -> tuple[float, float, float]:
    """Derivatives (dv_dc1, dv_dc2, di_line) of the link's DC circuit.

    `p_dck` is the power each converter delivers INTO its DC bus; `i_line`
    flows from bus 1 to bus 2. Aborts with a labelled fault when either
    voltage leaves the guard band around the steady-state limits.
    """
    lo = DC_GUARD_LOW * link.station_1.vdc_min
    hi = DC_GUARD_HIGH * link.station_1.vdc_max
    for nm, v in ((link.station_1.name, v_dc1), (link.station_2.name, v_dc2)):
        if v < lo:
            raise DcUndervoltage(t, f"DC undervoltage {v:.3f} pu at station {nm}")
        if v > hi:
            raise DcOvervoltage(t, f"DC overvoltage {v:.3f} pu at station {nm}")

    r_pu, l_pu = link.line.pu(link.s_rated)
    c1 = link.station_1.c_pu(link.line.v_base_dc)
    c2 = link.station_2.c_pu(link.line.v_base_dc)
    dv1 = (p_dc1 / v_dc1 - i_line) / c1
    dv2 = (p_dc2 / v_dc2 + i_line) / c2
    di = (v_dc1 - v_dc2 - r_pu * i_line) / l_pu
    return dv1, dv2, di


def link_steady_state(link: HvdcLink, v_ac1: float = 1.0, v_ac2: float = 1.0,
                      ) -> dict[str, float]:
    """Exact DC-side steady state for the scheduled P-station injection.

    The DC-regulating station sits at its reference voltage; the line
    current and the far capacitor voltage follow from power balance. The
    result carries the AC injection the DC-regulating station must make,
    which closes the link's power balance for the AC power flow.
    """
    p_st = link.p_station()
    v_st = link.vdc_station()
    r_pu, _ = link.line.pu(link.s_rated)

    # converter pu current magnitude at the scheduled point, for the losses
    i1 = math.hypot(p_st.p_set0, p_st.q_set0) / max(v_ac1, V_AC_FLOOR)
    p_to_dc = ac_dc_power_coupling(-p_st.p_set0, i1,
                                   (p_st.loss_a, p_st.loss_b, p_st.loss_c))

    v_ref = v_st.vdc_ref
    # current from the P-station bus toward the regulating station:
    # i*(v_ref + r*i) = p_to_dc
    if r_pu > 0.0:
        disc = v_ref * v_ref + 4.0 * r_pu * p_to_dc
        if disc < 0.0:
            raise ValidationError(
                f"link {link.name}: schedule not transferable over DC line"
            )
        i_ps = (-v_ref + math.sqrt(disc)) / (2.0 * r_pu)
    else:
        i_ps = p_to_dc / v_ref
    v_ps = v_ref + r_pu * i_ps

    # power the regulating station must push into its AC bus; the loss
    # depends on the current the station ends up carrying, so iterate
    p_ac2 = i_ps * v_ref
    for _ in range(6):
        i2 = math.hypot(p_ac2, v_st.q_set0) / max(v_ac2, V_AC_FLOOR)
        p_ac2 = i_ps * v_ref - converter_loss(v_st, i2)

    if link.station_1.mode == P_CONTROL:
        out = dict(v_dc1=v_ps, v_dc2=v_ref, i_line=i_ps)
    else:
        out = dict(v_dc1=v_ref, v_dc2=v_ps, i_line=-i_ps)
    out["p_ac_vdc_station"] = p_ac2
    out["p_ac_p_station"] = p_st.p_set0
    return out
