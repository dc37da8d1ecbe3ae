"""Synchronous machine, excitation and governor dynamics.

Fourth-order (two-axis) machine with transient emfs behind the transient
reactances, a one-time-constant excitation system with hard field limits
and a droop governor with a single servo lag. Stator resistance is
neglected; generator convention throughout (currents out of the machine,
d axis lagging q by 90 degrees).

All routines assume the machine record and its operating quantities are on
one consistent base; `SynchronousMachine.on_base` converts a record from
its own rating to a target base.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import EmptyRegion, InfeasibleInit, ValidationError


@dataclass
class Exciter:
    """First-order voltage regulator: ta * defd/dt = ka*(v_ref - v) - efd."""
    ka: float = 50.0
    ta: float = 0.05
    efd_min: float = -6.0
    efd_max: float = 6.0


@dataclass
class Governor:
    """Speed droop with one servo lag: t1 * dpm/dt = p_set - dw/r - pm."""
    r_droop: float = 0.05
    t1: float = 0.5
    p_max: float = 1.1
    p_min: float = 0.0


@dataclass
class SynchronousMachine:
    name: str
    bus: int
    s_rated: float              # MVA rating, base for the fields below
    h: float                    # s on machine base
    d: float                    # pu damping torque / pu speed
    xd: float
    xq: float
    xd_p: float
    xq_p: float
    td0_p: float                # s
    tq0_p: float                # s
    region: str = "R1"
    p_set: float = 0.0          # scheduled output, pu on the SYSTEM base
    exciter: Exciter | None = None
    governor: Governor | None = None

    def on_base(self, s_base_mva: float) -> "SynchronousMachine":
        """Copy with impedances/inertia/damping moved to `s_base_mva`."""
        k = self.s_rated / s_base_mva
        gov = self.governor
        if gov is not None:
            gov = replace(gov, r_droop=gov.r_droop / k,
                          p_max=gov.p_max * k, p_min=gov.p_min * k)
        return replace(
            self,
            s_rated=s_base_mva,
            h=self.h * k,
            d=self.d * k,
            xd=self.xd / k,
            xq=self.xq / k,
            xd_p=self.xd_p / k,
            xq_p=self.xq_p / k,
            governor=gov,
        )


@dataclass
class MachineState:
    delta: float                # rotor angle, rad, network reference frame
    omega: float                # pu speed
    eq_p: float                 # q-axis transient emf
    ed_p: float                 # d-axis transient emf
    efd: float                  # field voltage (exciter output)
    pm: float                   # mechanical power (governor servo state)

    def as_array(self) -> np.ndarray:
        return np.array([self.delta, self.omega, self.eq_p,
                         self.ed_p, self.efd, self.pm])


STATE_NAMES = ("delta", "omega", "eq_p", "ed_p", "efd", "pm")


def dq_voltage(delta: float, v_bus: complex) -> tuple[float, float]:
    """Bus phasor resolved onto the rotor dq frame."""
    vm = abs(v_bus)
    th = np.angle(v_bus)
    return vm * math.sin(delta - th), vm * math.cos(delta - th)


def machine_currents(m: SynchronousMachine, s: MachineState,
                     v_bus: complex) -> tuple[float, float]:
    """Stator currents (id, iq) out of the machine for a given bus voltage."""
    vd, vq = dq_voltage(s.delta, v_bus)
    i_d = (s.eq_p - vq) / m.xd_p
    i_q = (vd - s.ed_p) / m.xq_p
    return i_d, i_q


def electrical_power(m: SynchronousMachine, s: MachineState,
                     v_bus: complex) -> float:
    """Air-gap power; equals terminal power since stator resistance is 0."""
    i_d, i_q = machine_currents(m, s, v_bus)
    return (s.ed_p * i_d + s.eq_p * i_q
            + (m.xq_p - m.xd_p) * i_d * i_q)


def injection_current(m: SynchronousMachine, s: MachineState,
                      v_bus: complex) -> complex:
    """Network-frame current injection of the machine."""
    i_d, i_q = machine_currents(m, s, v_bus)
    return complex(i_d, i_q) * np.exp(1j * (s.delta - 0.5 * math.pi))


def machine_derivatives(
    m: SynchronousMachine,
    s: MachineState,
    v_bus: complex,
    exciter: Exciter | None,
    governor: Governor | None,
    v_ref: float,
    p_ref: float,
    omega_s: float,
) -> np.ndarray:
    """Time derivatives of (delta, omega, eq_p, ed_p, efd, pm).

    `v_ref`/`p_ref` are the regulator setpoints fixed at initialisation.
    A missing exciter or governor freezes the corresponding state.
    """
    i_d, i_q = machine_currents(m, s, v_bus)
    pe = (s.ed_p * i_d + s.eq_p * i_q + (m.xq_p - m.xd_p) * i_d * i_q)

    ddelta = omega_s * (s.omega - 1.0)
    domega = (s.pm - pe - m.d * (s.omega - 1.0)) / (2.0 * m.h)
    deq = (s.efd - s.eq_p - (m.xd - m.xd_p) * i_d) / m.td0_p
    ded = (-s.ed_p + (m.xq - m.xq_p) * i_q) / m.tq0_p

    if exciter is None:
        defd = 0.0
    else:
        defd = (exciter.ka * (v_ref - abs(v_bus)) - s.efd) / exciter.ta
        # non-windup field limits
        if s.efd >= exciter.efd_max and defd > 0.0:
            defd = 0.0
        elif s.efd <= exciter.efd_min and defd < 0.0:
            defd = 0.0

    if governor is None:
        dpm = 0.0
    else:
        target = p_ref - (s.omega - 1.0) / governor.r_droop
        dpm = (target - s.pm) / governor.t1
        if s.pm >= governor.p_max and dpm > 0.0:
            dpm = 0.0
        elif s.pm <= governor.p_min and dpm < 0.0:
            dpm = 0.0

    return np.array([ddelta, domega, deq, ded, defd, dpm])


def init_from_powerflow(
    m: SynchronousMachine,
    v_bus: complex,
    p_gen: float,
    q_gen: float,
) -> tuple[MachineState, float, float]:
    """Steady-state machine state for a solved operating point.

    Returns (state, v_ref, p_ref) with the regulator setpoints that hold
    the point. All quantities on the machine record's own base. Raises
    InfeasibleInit when the required field voltage violates the exciter
    limits or the governor cannot hold the dispatch.
    """
    vm = abs(v_bus)
    if vm <= 0.0:
        raise InfeasibleInit(f"machine {m.name}: zero bus voltage")
    i_bar = np.conj(complex(p_gen, q_gen) / v_bus)
    e_q = v_bus + 1j * m.xq * i_bar
    delta = math.atan2(e_q.imag, e_q.real)

    vd, vq = dq_voltage(delta, v_bus)
    rot = np.exp(-1j * (delta - 0.5 * math.pi))
    i_dq = i_bar * rot
    i_d, i_q = i_dq.real, i_dq.imag

    eq_p = vq + m.xd_p * i_d
    ed_p = vd - m.xq_p * i_q
    efd = eq_p + (m.xd - m.xd_p) * i_d
    pe = ed_p * i_d + eq_p * i_q + (m.xq_p - m.xd_p) * i_d * i_q

    if m.exciter is not None:
        if not (m.exciter.efd_min <= efd <= m.exciter.efd_max):
            raise InfeasibleInit(
                f"machine {m.name}: required efd {efd:.3f} outside "
                f"[{m.exciter.efd_min}, {m.exciter.efd_max}]"
            )
        v_ref = vm + efd / m.exciter.ka
    else:
        v_ref = vm

    if m.governor is not None:
        if not (m.governor.p_min <= pe <= m.governor.p_max):
            raise InfeasibleInit(
                f"machine {m.name}: dispatch {pe:.3f} outside governor range "
                f"[{m.governor.p_min}, {m.governor.p_max}]"
            )
    p_ref = pe

    state = MachineState(delta=delta, omega=1.0, eq_p=eq_p,
                         ed_p=ed_p, efd=efd, pm=pe)
    return state, v_ref, p_ref


def coi_frequency(
    omegas: "np.ndarray | list[float]",
    machines: list[SynchronousMachine],
    region: str | None = None,
) -> float:
    """Inertia-weighted centre-of-inertia speed.

    Weights are h * s_rated, which makes the result independent of the
    base the individual records happen to be on. `region=None` averages
    over every machine passed in.
    """
    num = 0.0
    den = 0.0
    for w, m in zip(omegas, machines, strict=True):
        if region is not None and m.region != region:
            continue
        wgt = m.h * m.s_rated
        num += wgt * w
        den += wgt
    if den == 0.0:
        raise EmptyRegion(f"no machines in region {region!r}")
    return num / den


@dataclass
class FrequencyEstimator:
    """Bus frequency from the filtered derivative of the voltage angle.

    Two cascaded lags of t_f each: the first state z_th tracks the angle
    (its wrapped error, divided by t_f, is the raw rate), the second
    state z_rt smooths that rate. Equivalent to s/(1 + s*t_f)^2 applied
    to the angle, so the measurement gain rolls off above 1/t_f instead
    of flattening; a single-lag estimator keeps a constant derivative
    plateau that lets fast control loops close through angle noise.
    """
    t_f: float = 0.05

    def output(self, z_rt: float, omega_s: float) -> float:
        return 1.0 + z_rt / omega_s

    def derivatives(self, z_th: float, z_rt: float,
                    theta: float) -> tuple[float, float]:
        raw = wrap_angle(theta - z_th) / self.t_f
        return raw, (raw - z_rt) / self.t_f


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    return a - 2.0 * math.pi * math.floor((a + math.pi) / (2.0 * math.pi))


def bus_frequency(
    est: FrequencyEstimator,
    v_ang: np.ndarray,
    dt: float,
    f_base_hz: float,
) -> np.ndarray:
    """Offline per-sample frequency estimate for an angle trace (radians).

    First central/backward angle differences, then the estimator's two
    smoothing lags, each discretised exactly for a zero-order hold.
    t_f = 0 degenerates to the raw finite difference. The first sample
    repeats the second (no derivative exists there).
    """
    v_ang = np.asarray(v_ang, dtype=float)
    omega_s = 2.0 * math.pi * f_base_hz
    raw = np.empty_like(v_ang)
    diffs = np.array([wrap_angle(a) for a in np.diff(v_ang)]) / dt
    if len(v_ang) < 2:
        return np.ones_like(v_ang)
    raw[1:] = diffs
    raw[0] = diffs[0]
    if est.t_f <= 0.0:
        return 1.0 + raw / omega_s
    alpha = 1.0 - math.exp(-dt / est.t_f)
    filt = raw.copy()
    for _ in range(2):
        acc = 0.0       # assume nominal frequency before the trace starts
        src = filt.copy()
        filt[0] = acc
        for k in range(1, len(src)):
            acc += alpha * (src[k] - acc)
            filt[k] = acc
    return 1.0 + filt / omega_s
