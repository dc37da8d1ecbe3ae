"""Damping-controller synthesis from numerical eigenvalue sensitivity.

Work flow per converter station, each designed independently against a
frozen baseline linearization:

  1. probe the plant: reinstall the station's damper with its lead/lag
     chain bypassed and a small finite gain, relinearize, identify the
     shifted target mode, and form the sensitivity quotient;
  2. choose the lead/lag chain so the compensated sensitivity points at
     180 degrees (shifts the mode straight into the left half plane);
  3. scale the gain from the first-order prediction, sign picked by
     explicit minimization, magnitude capped;
  4. verify by closed-loop relinearization.
"""

import cmath
import math
from dataclasses import dataclass, replace

from . import controllers as ctl
from .controllers import leadlag_frequency_response
from .engine import SystemModel
from .errors import (
    ExcessivePhaseRequirement,
    TargetNotFound,
    ZeroGainStep,
    ZeroSensitivity,
)
from .smallsignal import LinearModel, Mode, eigensolve, linearize, match_mode

DELTA_K_DEFAULT = 20.0
K_MAX_DEFAULT = 20000.0
ZETA_D_DEFAULT = 0.15
PHASE_STAGE_LIMIT = math.radians(85.0)
STABILITY_MARGIN = 0.05          # every closed-loop mode must clear this


@dataclass
class DesignTarget:
    lambda0: complex
    zeta0: float
    zeta_d: float

    @property
    def lambda_d(self) -> complex:
        w0 = self.lambda0.imag
        return complex(-self.zeta_d * w0, w0)

    @classmethod
    def from_mode(cls, mode: Mode, zeta_d: float = ZETA_D_DEFAULT
                  ) -> "DesignTarget":
        return cls(lambda0=mode.lam, zeta0=mode.zeta, zeta_d=zeta_d)


@dataclass
class SensitivityEstimate:
    s_nc: complex                # eigenvalue shift per pu of damper gain
    delta_k: float
    lambda_nc: complex
    lambda0: complex

    @property
    def phase_nc(self) -> float:
        return cmath.phase(self.s_nc)


@dataclass
class LeadLagDesign:
    a_q: float
    t_q1: float
    n_qs: int
    phi_per_stage: float

    @property
    def t_q2(self) -> float:
        return self.a_q * self.t_q1


@dataclass
class GainResult:
    k_q: float
    gamma: int
    saturated: bool
    predicted_lambda: complex
    achieved_zeta: float | None = None


def probe_params(par: ctl.PodQParams, delta_k: float) -> ctl.PodQParams:
    """The station's damper with lead/lag bypassed at the probing gain."""
    return replace(par, k_q=delta_k, t_q1=0.0)


def sensitivity_from_linearizations(
    lin_probe: LinearModel,
    target: Mode,
    delta_k: float,
) -> SensitivityEstimate:
    """Sensitivity quotient from a perturbed linearization.

    The probe model's mode list is searched for the target by eigenvector
    correlation over the states both models share.
    """
    if delta_k == 0.0:
        raise ZeroGainStep("sensitivity probe needs a nonzero gain step")
    lam_nc = match_mode(target, eigensolve(lin_probe)).lam
    return SensitivityEstimate(
        s_nc=(lam_nc - target.lam) / delta_k,
        delta_k=delta_k,
        lambda_nc=lam_nc,
        lambda0=target.lam,
    )


def numerical_sensitivity(
    model: SystemModel,
    station_id: str,
    target: Mode,
    delta_k: float = DELTA_K_DEFAULT,
    h_rel: float = 1e-5,
) -> SensitivityEstimate:
    """Probe one station of the (zero-gain) baseline model, Eq-by-quotient.

    `model` must already carry the damper entry for the station; the
    probe replaces it with the bypassed-chain finite-gain version.
    """
    if delta_k == 0.0:
        raise ZeroGainStep("sensitivity probe needs a nonzero gain step")
    if station_id not in model.controllers.podq:
        raise TargetNotFound(
            f"station {station_id!r} has no damper to probe in this model"
        )
    probe = model.copy()
    probe.controllers.podq[station_id] = probe_params(
        model.controllers.podq[station_id], delta_k)
    lin = linearize(probe, h_rel=h_rel)
    return sensitivity_from_linearizations(lin, target, delta_k)


def design_leadlag(phase_nc: float, n_qs: int = 2,
                   omega0: float | None = None) -> LeadLagDesign:
    """Stage ratio and time constants aligning the sensitivity with the
    real axis.

    Either real half-axis will do: the gain sign picked later absorbs a
    180 deg flip, so the stages only need the shorter of the two
    rotations. That choice is load-bearing for loop robustness: large
    lead angles force a tiny stage ratio whose high-frequency gain (the
    Bode gain-phase price, about e^(2*rotation)) can close spurious fast
    loops through the frequency measurement, while the short branch is a
    mild lead or a lag, which attenuates there. A tie (|phase| = 90 deg)
    keeps the lead branch. Each stage is centered on the mode frequency
    omega0, the imaginary part of the target eigenvalue.
    """
    if n_qs < 1:
        raise ExcessivePhaseRequirement("need at least one stage")
    if omega0 is None or omega0 <= 0.0:
        raise ExcessivePhaseRequirement("mode frequency must be positive")
    rot_pi = _wrap_pi(math.pi - phase_nc)      # align with 180 deg
    rot_zero = _wrap_pi(-phase_nc)             # align with 0 deg, gain < 0
    rot = rot_pi if abs(rot_pi) <= abs(rot_zero) + 1e-12 else rot_zero
    phi = rot / n_qs
    a_q = (1.0 - math.sin(phi)) / (1.0 + math.sin(phi))
    if abs(phi) >= PHASE_STAGE_LIMIT:
        raise ExcessivePhaseRequirement(
            f"per-stage compensation {math.degrees(phi):.1f} deg with "
            f"{n_qs} stages; add stages"
        )
    t_q1 = 1.0 / (omega0 * math.sqrt(a_q))
    return LeadLagDesign(a_q=a_q, t_q1=t_q1, n_qs=n_qs, phi_per_stage=phi)


def _wrap_pi(a: float) -> float:
    return a - 2.0 * math.pi * math.floor((a + math.pi) / (2.0 * math.pi))


def compensated_sensitivity(est: SensitivityEstimate, ll: LeadLagDesign,
                            lambda0: complex | None = None) -> complex:
    """Sensitivity seen through the designed chain, evaluated at the mode."""
    s = est.lambda0 if lambda0 is None else lambda0
    return est.s_nc * leadlag_frequency_response(ll.t_q1, ll.a_q, ll.n_qs, s)


def compute_gain(lambda0: complex, lambda_d: complex, s_hat: complex,
                 k_max: float = K_MAX_DEFAULT) -> GainResult:
    """First-order gain: K = gamma |lambda_d - lambda0| / |s_hat|.

    The sign gamma is the one whose predicted closed-loop eigenvalue
    lands nearer the target; the magnitude is capped at k_max.
    """
    mag_s = abs(s_hat)
    if mag_s < 1e-300:
        raise ZeroSensitivity("mode not controllable from this station")
    k_raw = abs(lambda_d - lambda0) / mag_s
    gamma = min((+1, -1),
                key=lambda g: abs(lambda_d - (lambda0 + g * k_raw * s_hat)))
    saturated = k_raw > k_max
    k_q = gamma * min(k_raw, k_max)
    return GainResult(
        k_q=k_q, gamma=gamma, saturated=saturated,
        predicted_lambda=lambda0 + k_q * s_hat,
    )


@dataclass
class StationDesign:
    station: str
    sensitivity: SensitivityEstimate
    leadlag: LeadLagDesign
    gain: GainResult
    params: ctl.PodQParams


def design_station(
    model: SystemModel,
    station_id: str,
    target: Mode,
    zeta_d: float = ZETA_D_DEFAULT,
    delta_k: float = DELTA_K_DEFAULT,
    n_qs: int = 2,
    k_max: float = K_MAX_DEFAULT,
    h_rel: float = 1e-5,
    refine: int = 3,
) -> StationDesign:
    """Full single-station synthesis against the baseline target mode.

    The first-order gain is then polished with up to `refine` repeated
    sensitivity steps: re-probe d(lambda)/dK at the current gain and move
    the remaining radial distance. One first-order shot under-delivers
    once the root locus starts to curve; each step is the same numerical
    quotient, just taken about the operating point it created. Every
    candidate gain is also vetted against the full spectrum; when some
    non-target mode heads for the right half plane first, the gain backs
    off to the largest value the whole spectrum tolerates and the result
    is flagged saturated.
    """
    est = numerical_sensitivity(model, station_id, target, delta_k, h_rel)
    ll = design_leadlag(est.phase_nc, n_qs, target.lam.imag)
    s_hat = compensated_sensitivity(est, ll)
    dt = DesignTarget.from_mode(target, zeta_d)
    gain = compute_gain(target.lam, dt.lambda_d, s_hat, k_max)
    base = model.controllers.podq[station_id]

    def with_gain(k: float) -> ctl.PodQParams:
        return replace(base, k_q=k, t_q1=ll.t_q1, a_q=ll.a_q, n_qs=ll.n_qs)

    def closed_modes(k: float) -> list[Mode]:
        trial = model.copy()
        trial.controllers.podq[station_id] = with_gain(k)
        return eigensolve(linearize(trial, h_rel=h_rel))

    def max_re(modes: list[Mode]) -> float:
        # rigid-body angle pair sits numerically at the origin; skip it
        return max(m.lam.real for m in modes if abs(m.lam) > 1e-6)

    k_q = gain.k_q
    modes = closed_modes(k_q)
    if max_re(modes) > -STABILITY_MARGIN:
        # first-order gain already destabilizes some other loop; pull
        # back toward zero until the whole spectrum clears the margin
        k_lo, k_hi = 0.0, k_q
        for _ in range(20):
            k_mid = 0.5 * (k_lo + k_hi)
            if max_re(closed_modes(k_mid)) > -STABILITY_MARGIN:
                k_hi = k_mid
            else:
                k_lo = k_mid
        k_q = k_lo
        modes = closed_modes(k_q)
        gain = replace(gain, k_q=k_q, saturated=True,
                       predicted_lambda=match_mode(target, modes).lam)

    lam = match_mode(target, modes).lam
    for _ in range(max(0, refine)):
        lam_d = complex(-zeta_d * lam.imag, lam.imag)
        if abs(lam_d - lam) <= 1e-3 * abs(lam):
            break
        dk = 0.05 * abs(k_q) + 1e-6
        lam_p = match_mode(target, closed_modes(k_q + dk)).lam
        s_full = (lam_p - lam) / dk
        if abs(s_full) < 1e-300:
            break
        # real gain only moves lambda along s_full; project the residual
        step = ((lam_d - lam) * s_full.conjugate()).real / abs(s_full) ** 2
        k_new = k_q + step
        saturated = abs(k_new) > k_max
        if saturated:
            k_new = math.copysign(k_max, k_new)
        modes_new = closed_modes(k_new)
        if max_re(modes_new) > -STABILITY_MARGIN:
            # a non-target mode objects before the target lands; keep the
            # largest gain the full spectrum tolerates
            k_lo, k_hi = k_q, k_new
            for _ in range(20):
                k_mid = 0.5 * (k_lo + k_hi)
                if max_re(closed_modes(k_mid)) > -STABILITY_MARGIN:
                    k_hi = k_mid
                else:
                    k_lo = k_mid
            k_q = k_lo
            modes = closed_modes(k_q)
            gain = replace(gain, k_q=k_q, saturated=True,
                           predicted_lambda=match_mode(target, modes).lam)
            break
        k_q = k_new
        lam = match_mode(target, modes_new).lam
        gain = replace(gain, k_q=k_q, saturated=saturated,
                       predicted_lambda=lam)
        if saturated:
            break

    return StationDesign(station=station_id, sensitivity=est,
                         leadlag=ll, gain=gain, params=with_gain(k_q))


def install_designs(model: SystemModel,
                    designs: list[StationDesign]) -> SystemModel:
    out = model.copy()
    for d in designs:
        if d.station not in out.controllers.podq:
            raise TargetNotFound(f"no damper slot for station {d.station!r}")
        out.controllers.podq[d.station] = d.params
    return out


def verify_design(
    model: SystemModel,
    designs: list[StationDesign],
    target: Mode,
    h_rel: float = 1e-5,
) -> tuple[Mode, list[Mode], SystemModel]:
    """Closed-loop check: relinearize with the designs installed.

    Returns (achieved target mode, full closed-loop mode list, the
    modified model); fills achieved_zeta on each design's gain result.
    """
    closed = install_designs(model, designs)
    lin = linearize(closed, h_rel=h_rel)
    modes = eigensolve(lin)
    achieved = match_mode(target, modes)
    for d in designs:
        d.gain.achieved_zeta = achieved.zeta
    return achieved, modes, closed
