"""Numerical linearization, eigensolution and electromechanical screening.

The state matrix comes from central finite differences of the same
right-hand side the simulator integrates, algebraic network solve
included, so there is exactly one model to trust. Conjugate pairs are
reported once, keeping the positive-imaginary member.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .engine import Engine, SystemModel, initialize
from .errors import (
    DefectiveMode,
    InitResidualTooLarge,
    ModeMatchAmbiguous,
    NoConvergence,
    ZeroEigenvalue,
)

INTER_AREA = "InterArea"
NON_ELECTROMECH = "NonElectromech"

EM_BAND_HZ = (0.1, 2.0)


def fd_matrix(fun, x0: np.ndarray, h_rel: float = 1e-5) -> np.ndarray:
    """Central-difference Jacobian of `fun` at x0, column step h_rel*max(|x|,1)."""
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    jac = np.empty((n, n))
    for k in range(n):
        h = h_rel * max(abs(x0[k]), 1.0)
        xp = x0.copy(); xp[k] += h
        xm = x0.copy(); xm[k] -= h
        jac[:, k] = (np.asarray(fun(xp)) - np.asarray(fun(xm))) / (2.0 * h)
    return jac


@dataclass
class LinearModel:
    a: np.ndarray
    state_labels: list[tuple[str, str]]
    x_eq: np.ndarray
    v_eq: np.ndarray


@dataclass
class Mode:
    lam: complex
    zeta: float
    freq: float                          # Hz
    phi: np.ndarray | None = None        # right eigenvector
    psi: np.ndarray | None = None        # left eigenvector (row convention)
    labels: tuple = ()
    participations: np.ndarray | None = None
    region_class: str | None = None

    def __repr__(self):
        cls = f", {self.region_class}" if self.region_class else ""
        return (f"Mode({self.lam:.4f}, zeta={100 * self.zeta:.2f}%, "
                f"f={self.freq:.3f} Hz{cls})")


def damping_frequency(lam: complex) -> tuple[float, float]:
    """(damping ratio, frequency in Hz) of one eigenvalue."""
    mag = abs(lam)
    if mag == 0.0:
        raise ZeroEigenvalue("damping ratio undefined for a zero eigenvalue")
    return -lam.real / mag, lam.imag / (2.0 * math.pi)


def linearize(
    model: SystemModel | Engine,
    x_eq: np.ndarray | None = None,
    v_eq: np.ndarray | None = None,
    h_rel: float = 1e-5,
    residual_bound: float = 1e-7,
) -> LinearModel:
    """State matrix at an equilibrium by central finite differences.

    Accepts either a system model (initialized internally) or an already
    assembled engine with its equilibrium state and bus voltages. The
    equilibrium is verified first, net of any common rotational drift of
    each synchronous island.
    """
    if isinstance(model, Engine):
        eng = model
        if x_eq is None or v_eq is None:
            raise ValueError("engine form needs x_eq and v_eq")
    else:
        eng, x0, sol = initialize(model)
        if x_eq is None:
            x_eq = x0
        if v_eq is None:
            v_eq = sol.v_mag * np.exp(1j * sol.v_ang)

    f0, v_eq, _ = eng.evaluate(x_eq, v_eq)
    resid, _ = eng.residual_drift(f0)
    worst = int(np.argmax(np.abs(resid)))
    if abs(resid[worst]) >= residual_bound:
        raise InitResidualTooLarge(float(abs(resid[worst])),
                                   eng.label_str(worst))

    v_guess = v_eq.copy()

    def rhs(x):
        f, _, _ = eng.evaluate(x, v_guess.copy())
        return f

    a = fd_matrix(rhs, x_eq, h_rel)
    return LinearModel(a=a, state_labels=list(eng.labels),
                       x_eq=np.array(x_eq), v_eq=v_eq)


def eigensolve(lin: LinearModel) -> list[Mode]:
    """All modes of the state matrix, conjugate pairs deduplicated.

    Left and right eigenvectors are attached to every retained mode;
    damping ratio is NaN for an exactly zero eigenvalue (rotational
    symmetry produces one per synchronous island).
    """
    a = np.asarray(lin.a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise NoConvergence(0, math.inf)
    try:
        w, vl, vr = scipy.linalg.eig(a, left=True, right=True)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(0, math.nan) from exc

    order = np.argsort(-w.imag, kind="stable")
    modes: list[Mode] = []
    for i in order:
        if w[i].imag < -1e-12:
            continue                    # conjugate partner already kept
        lam = complex(w[i])
        if abs(lam) == 0.0:
            zeta, freq = math.nan, 0.0
        else:
            zeta, freq = damping_frequency(lam)
        modes.append(Mode(lam=lam, zeta=zeta, freq=freq,
                          phi=vr[:, i].copy(), psi=vl[:, i].conj().copy(),
                          labels=tuple(lin.state_labels)))
    return modes


def participation_factors(lin: LinearModel, mode: Mode,
                          cond_limit: float = 1e8) -> np.ndarray:
    """Per-state participation magnitudes of one mode, scaled to max 1.

    The complex factors psi_k*phi_k/(psi.phi) sum to one; the returned
    vector is their magnitudes renormalized for table display.
    """
    phi, psi = mode.phi, mode.psi
    if phi is None or psi is None:
        raise DefectiveMode("mode carries no eigenvectors")
    denom = complex(np.dot(psi, phi))
    scale = float(np.linalg.norm(psi) * np.linalg.norm(phi))
    if abs(denom) == 0.0 or scale / abs(denom) > cond_limit:
        raise DefectiveMode(
            f"left/right product ill-conditioned ({scale / max(abs(denom), 1e-300):.2e})"
        )
    p = np.abs(psi * phi / denom)
    mode.participations = p / p.max()
    return mode.participations


def complex_participations(mode: Mode) -> np.ndarray:
    """Unnormalized complex factors; they sum to exactly one."""
    denom = complex(np.dot(mode.psi, mode.phi))
    return mode.psi * mode.phi / denom


def classify_mode(
    mode: Mode,
    machine_regions: dict[str, str],
    band_hz: tuple[float, float] = EM_BAND_HZ,
    thresh: float = 0.3,
) -> str:
    """Screen one mode: inter-area, intra-region, or not electromechanical.

    `machine_regions` maps machine names to region tags. A mode is
    electromechanical when its frequency sits in the band and some rotor
    speed state participates at >= 0.1 of the mode maximum; it is
    inter-area when speed participations >= thresh span two regions.
    """
    if mode.participations is None:
        raise DefectiveMode("participations not computed for this mode")
    f = abs(mode.freq)
    if not (band_hz[0] <= f <= band_hz[1]):
        mode.region_class = NON_ELECTROMECH
        return mode.region_class

    speed = {}
    for (dev, st), p in zip(mode.labels, mode.participations):
        if st == "omega" and dev in machine_regions:
            speed[dev] = float(p)
    if not speed or max(speed.values()) < 0.1:
        mode.region_class = NON_ELECTROMECH
        return mode.region_class

    regions = {machine_regions[dev] for dev, p in speed.items() if p >= thresh}
    if len(regions) >= 2:
        mode.region_class = INTER_AREA
    else:
        lead = max(speed, key=speed.get)
        mode.region_class = f"Intra({machine_regions[lead]})"
    return mode.region_class


def electromech_modes(lin: LinearModel, model: SystemModel,
                      thresh: float = 0.3) -> list[Mode]:
    """Eigensolve plus screening; returns only the in-band classified modes."""
    regions = {m.name: m.region for m in model.machines}
    out = []
    for mode in eigensolve(lin):
        if mode.lam.imag <= 0.0:
            continue
        if not (EM_BAND_HZ[0] <= mode.freq <= EM_BAND_HZ[1]):
            continue
        participation_factors(lin, mode)
        if classify_mode(mode, regions, thresh=thresh) != NON_ELECTROMECH:
            out.append(mode)
    return out


def match_mode(target: Mode, candidates: list[Mode],
               margin: float = 0.05) -> Mode:
    """Identify `target` among `candidates` from another linearization.

    Correlates eigenvectors over the states both labelings share; when no
    states are shared (or vectors are missing) the nearest eigenvalue is
    used instead. Raising ModeMatchAmbiguous beats returning the wrong
    mode silently.
    """
    if not candidates:
        raise ModeMatchAmbiguous("no candidate modes")
    shared = []
    if target.phi is not None and target.labels:
        t_index = {lb: i for i, lb in enumerate(target.labels)}
        c_labels = candidates[0].labels
        shared = [(t_index[lb], j) for j, lb in enumerate(c_labels)
                  if lb in t_index]
    if not shared or target.phi is None:
        return min(candidates, key=lambda m: abs(m.lam - target.lam))

    def shape(m: Mode) -> np.ndarray:
        # left*right products (participation pattern) are invariant to
        # the units of the individual states; a raw right-vector shape,
        # kept as fallback, is dominated by whichever state has the
        # largest numerical range
        return m.psi * m.phi if m.psi is not None else m.phi

    ti = np.array([i for i, _ in shared])
    cj = np.array([j for _, j in shared])
    t_full = shape(target)
    tv = t_full[ti]
    # normalize by full vector norms: a candidate whose energy lives in
    # states the target does not have must not be inflated by the overlap
    tn = np.linalg.norm(t_full)
    scores = []
    for m in candidates:
        c_full = shape(m)
        cv = c_full[cj]
        denom = tn * np.linalg.norm(c_full)
        scores.append(0.0 if denom == 0.0
                      else abs(np.vdot(tv, cv)) / denom)
    order = sorted(range(len(scores)), key=lambda i: -scores[i])
    best = order[0]
    if len(order) > 1 and scores[best] - scores[order[1]] < margin:
        raise ModeMatchAmbiguous(
            f"top eigenvector correlations {scores[best]:.3f} and "
            f"{scores[order[1]]:.3f} are too close to call"
        )
    return candidates[best]


def log_decrement(t: np.ndarray, y: np.ndarray,
                  t_start: float = 0.0) -> tuple[float, float]:
    """(zeta, freq_hz) of a decaying oscillation by peak-to-peak fitting.

    Strips the mean trend between successive same-sign peaks; a plain
    measurement oracle for checking simulated ringdowns against the
    linear analysis, not a production identification tool.
    """
    sel = t >= t_start
    tt, yy = t[sel], y[sel]
    # offset = settled value, estimated from the window tail; a plain mean
    # is biased while slow (governor) trends are still moving
    tail = tt >= tt[-1] - max(1.0, 0.1 * (tt[-1] - tt[0]))
    yy = yy - yy[tail].mean()
    peaks = []
    for k in range(1, len(yy) - 1):
        if yy[k] > yy[k - 1] and yy[k] >= yy[k + 1] and yy[k] > 0:
            # parabolic refinement of the peak position and height
            a, b, c = yy[k - 1], yy[k], yy[k + 1]
            den = a - 2 * b + c
            off = 0.0 if den == 0 else 0.5 * (a - c) / den
            dt = tt[1] - tt[0]
            peaks.append((tt[k] + off * dt,
                          b - 0.25 * (a - c) * off))
    if len(peaks) < 3:
        raise NoConvergence(len(peaks), math.nan)
    # drop the first peak (event transient), fit the rest
    times = np.array([p[0] for p in peaks[1:]])
    amps = np.array([abs(p[1]) for p in peaks[1:]])
    periods = np.diff(times)
    period = float(np.mean(periods))
    freq = 1.0 / period
    slope = np.polyfit(times, np.log(amps), 1)[0]
    omega_d = 2.0 * math.pi * freq
    sigma = -slope
    zeta = sigma / math.hypot(sigma, omega_d)
    return zeta, freq
