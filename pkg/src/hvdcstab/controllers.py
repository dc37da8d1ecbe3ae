"""Supplementary link controllers: frequency support and damping.

Pure block functions: each takes its parameter record, the input signal
and the current filter states, and returns (output, state derivatives).
The integration and wiring live in the engine; saturations are hard
clamps on the block output and never wind the filter states up.

Per-unit note: gains and output limits are on the converter base of the
station the controller modulates; frequency inputs are pu of nominal.
"""

from dataclasses import dataclass

import numpy as np

from .errors import MissingCoi, ValidationError

POD_LF = "LF"                   # local frequency vs nominal
POD_FCOI = "FCOI"               # local frequency vs centre of inertia


@dataclass
class FcParams:
    """Frequency controller on the active-power schedule of a link.

    Drives the link's P-station toward the mean of the two terminal
    frequencies: delta_p = sat(lowpass(k_fc * (mean - local))), which
    equals k_fc/2 * (far - local) through the same filter.
    """
    k_fc: float = 100.0         # converter pu power / pu frequency
    t_fc: float = 0.1           # s
    dp_max: float = 1.0         # converter pu

    n_states = 1


@dataclass
class PodQParams:
    """Reactive-power oscillation damper on one converter station.

    Chain: error -> lowpass(t_qf) -> washout(t_qw) -> n_qs identical
    lead/lag stages (1 + s*t_q1)/(1 + s*a_q*t_q1) -> gain k_q -> clamp.
    t_q1 = 0 bypasses the lead/lag stages entirely (no states), which is
    the probe configuration used while measuring gain sensitivities.
    """
    variant: str = POD_LF
    k_q: float = 0.0            # converter pu / pu frequency error, signed
    t_qf: float = 0.1
    t_qw: float = 5.0
    t_q1: float = 0.0
    a_q: float = 1.0
    n_qs: int = 2
    dq_max: float = 0.1

    def __post_init__(self):
        if self.variant not in (POD_LF, POD_FCOI):
            raise ValidationError(f"unknown damper variant {self.variant!r}")
        if self.a_q <= 0.0:
            raise ValidationError("lead/lag ratio a_q must be positive")

    @property
    def n_stages(self) -> int:
        return self.n_qs if self.t_q1 > 0.0 else 0

    @property
    def n_states(self) -> int:
        return 2 + self.n_stages


@dataclass
class DelayParams:
    """First-order Pade approximation of a pure measurement delay.

    (1 - s*tau/2)/(1 + s*tau/2); tau = 0 is a clean pass-through with no
    state. Applied to the wide-area error of the FCOI damper variant only.
    """
    tau: float = 0.0

    @property
    def n_states(self) -> int:
        return 1 if self.tau > 0.0 else 0


def fc_reference(
    par: FcParams,
    omega_local: float,
    omega_far: float,
    x: float,
) -> tuple[float, float]:
    """(delta_p, dx/dt) of the frequency controller."""
    u = par.k_fc * (0.5 * (omega_local + omega_far) - omega_local)
    dx = (u - x) / par.t_fc
    out = min(max(x, -par.dp_max), par.dp_max)
    return out, dx


def podq_setpoint(variant: str, omega_coi: float | None) -> float:
    """Frequency target of the damper: nominal or the region's COI."""
    if variant == POD_LF:
        return 1.0
    if variant == POD_FCOI:
        if omega_coi is None:
            raise MissingCoi("FCOI damper needs a centre-of-inertia signal")
        return omega_coi
    raise ValidationError(f"unknown damper variant {variant!r}")


def podq_output(
    par: PodQParams,
    err: float,
    x: np.ndarray,
) -> tuple[float, np.ndarray]:
    """(delta_q, dx/dt) of the damping chain for a frequency error input.

    State layout: [lowpass, washout, stage_1 .. stage_n]. The washout
    realisation is y = u - x so the block is exactly zero in steady state;
    each lead/lag stage is y = x + (t_q1/t_q2)*(u - x) with t_q2 = a_q*t_q1.
    """
    dx = np.empty(par.n_states)
    x_lp = x[0]
    dx[0] = (err - x_lp) / par.t_qf
    y = x_lp

    x_wo = x[1]
    dx[1] = (y - x_wo) / par.t_qw
    y = y - x_wo

    if par.n_stages:
        ratio = 1.0 / par.a_q           # t_q1 / t_q2
        t_q2 = par.a_q * par.t_q1
        for k in range(par.n_stages):
            xs = x[2 + k]
            dx[2 + k] = (y - xs) / t_q2
            y = xs + ratio * (y - xs)

    out = par.k_q * y
    out = min(max(out, -par.dq_max), par.dq_max)
    return out, dx


def pade_delay(par: DelayParams, u: float, x: np.ndarray
               ) -> tuple[float, np.ndarray]:
    """(delayed signal, dx/dt) of the first-order Pade block."""
    if par.n_states == 0:
        return u, np.empty(0)
    dx = np.array([(u - x[0]) * 2.0 / par.tau])
    return 2.0 * x[0] - u, dx


def leadlag_frequency_response(t_q1: float, a_q: float, n: int,
                               s: complex) -> complex:
    """[(1 + s*t_q1)/(1 + s*a_q*t_q1)]^n, the cascaded stage response."""
    if t_q1 == 0.0:
        return 1.0 + 0.0j
    return ((1.0 + s * t_q1) / (1.0 + s * a_q * t_q1)) ** n


def delay_frequency_response(tau: float, s: complex) -> complex:
    """(1 - s*tau/2)/(1 + s*tau/2)."""
    if tau == 0.0:
        return 1.0 + 0.0j
    return (1.0 - s * tau / 2.0) / (1.0 + s * tau / 2.0)
