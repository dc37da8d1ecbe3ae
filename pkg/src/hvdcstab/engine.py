"""System assembly, steady state, and nonlinear time-domain simulation.

The engine stacks every differential state of the assembled model into one
vector and exposes a single right-hand-side evaluation that internally
solves the network algebraic equations (current balance at every bus) by
Newton iteration. Time stepping is implicit trapezoidal with a frozen
finite-difference Jacobian that is refreshed on demand, which handles the
millisecond converter lags comfortably at RMS step sizes.

Per-unit bookkeeping: the network, machines (after conversion) and all
recorded powers are on the system MVA base; converter-internal states,
limits and controller gains stay on each converter's own rating and are
scaled at the network boundary.

State vector layout, in model order:
  per machine:  delta, omega, eq_p, ed_p, efd, pm
  per link:     p_ord, q_ord, v_dc (station 1); same (station 2);
                i_line; vdc PI integrator
  per station:  frequency-estimator angle and rate states
  per link:     FC low-pass state                  (when FC configured)
  per station:  damper low-pass, washout, lead/lag stages, delay state
                                                   (when POD configured)
"""

import copy
import fnmatch
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from . import controllers as ctl
from . import hvdc
from . import machines as mach
from .errors import (
    AlgebraicSolveFailed,
    AlreadyOut,
    EmptyRegion,
    InitResidualTooLarge,
    IslandedMachine,
    StepNonConvergence,
    TargetNotFound,
    ValidationError,
)
from .grid import NetworkModel, PowerFlowSolution, build_admittance, solve_power_flow

TRAPEZOIDAL = "TrapezoidalImplicit"


# --------------------------------------------------------------------- model

@dataclass
class ControllerBank:
    """Supplementary controller wiring: FC per link, damper per station."""
    fc: dict[str, ctl.FcParams] = field(default_factory=dict)
    podq: dict[str, ctl.PodQParams] = field(default_factory=dict)
    delay: ctl.DelayParams = field(default_factory=ctl.DelayParams)


@dataclass
class SystemModel:
    network: NetworkModel
    machines: list[mach.SynchronousMachine] = field(default_factory=list)
    hvdc_links: list[hvdc.HvdcLink] = field(default_factory=list)
    controllers: ControllerBank = field(default_factory=ControllerBank)
    f_hz: float = 50.0

    def validate(self) -> None:
        net = self.network
        names: set[str] = set()
        mach_buses: set[int] = set()
        for m in self.machines:
            bus = net.bus(m.bus)
            if m.name in names:
                raise ValidationError(f"duplicate device name {m.name!r}")
            names.add(m.name)
            if m.bus in mach_buses:
                raise ValidationError(f"two machines at bus {m.bus}")
            mach_buses.add(m.bus)
            if m.region != bus.region:
                raise ValidationError(
                    f"machine {m.name}: region {m.region!r} does not match "
                    f"bus {m.bus} region {bus.region!r}"
                )
            if bus.kind == "PQ":
                raise ValidationError(
                    f"machine {m.name} must sit at a PV or Slack bus"
                )
        for lk in self.hvdc_links:
            if lk.name in names:
                raise ValidationError(f"duplicate device name {lk.name!r}")
            names.add(lk.name)
            for st in lk.stations():
                net.bus(st.bus)
                if st.name in names:
                    raise ValidationError(f"duplicate device name {st.name!r}")
                names.add(st.name)
                if st.bus in mach_buses:
                    raise ValidationError(
                        f"station {st.name} shares bus {st.bus} with a machine"
                    )
        comps = net.components()
        for lk in self.hvdc_links:
            for st in lk.stations():
                comp = next(c for c in comps if st.bus in c)
                if not any(m.bus in comp for m in self.machines):
                    raise ValidationError(
                        f"station {st.name}: no synchronous machine in its "
                        f"island, the converter bus has no frequency source"
                    )
        stations = {st.name for lk in self.hvdc_links for st in lk.stations()}
        links = {lk.name for lk in self.hvdc_links}
        for name in self.controllers.fc:
            if name not in links:
                raise TargetNotFound(f"FC wired to unknown link {name!r}")
        mach_regions = {m.region for m in self.machines}
        for name, par in self.controllers.podq.items():
            if name not in stations:
                raise TargetNotFound(f"damper wired to unknown station {name!r}")
            if par.variant == ctl.POD_FCOI:
                st_bus = self.station(name).bus
                if net.bus(st_bus).region not in mach_regions:
                    raise EmptyRegion(
                        f"FCOI damper at {name!r}: no machines in its region"
                    )

    def copy(self) -> "SystemModel":
        return copy.deepcopy(self)

    def station(self, name: str) -> hvdc.VscStation:
        for lk in self.hvdc_links:
            for st in lk.stations():
                if st.name == name:
                    return st
        raise TargetNotFound(f"no station named {name!r}")

    def link_of_station(self, name: str) -> hvdc.HvdcLink:
        for lk in self.hvdc_links:
            if name in (lk.station_1.name, lk.station_2.name):
                return lk
        raise TargetNotFound(f"no station named {name!r}")

    def machine(self, name: str) -> mach.SynchronousMachine:
        for m in self.machines:
            if m.name == name:
                return m
        raise TargetNotFound(f"no machine named {name!r}")


# -------------------------------------------------------------------- events

@dataclass
class Event:
    time: float
    kind: str                   # "trip_branch" | "trip_machine"
    from_bus: int | None = None
    to_bus: int | None = None
    circuit: int | None = None
    bus: int | None = None
    unit: str | None = None

    def __post_init__(self):
        if self.kind not in ("trip_branch", "trip_machine"):
            raise ValidationError(f"unknown event kind {self.kind!r}")
        if self.time < 0:
            raise ValidationError("event time must be >= 0")


def apply_event(model: SystemModel, ev: Event) -> SystemModel:
    """Return a modified copy of the model with the event applied."""
    out = model.copy()
    if ev.kind == "trip_branch":
        ends = {ev.from_bus, ev.to_bus}
        cands = [br for br in out.network.branches
                 if {br.from_bus, br.to_bus} == ends
                 and (ev.circuit is None or br.circuit == ev.circuit)]
        if not cands:
            raise TargetNotFound(
                f"no branch {ev.from_bus}-{ev.to_bus}"
                + ("" if ev.circuit is None else f" circuit {ev.circuit}")
            )
        live = [br for br in cands if br.status]
        if not live:
            raise AlreadyOut(f"branch {ev.from_bus}-{ev.to_bus} already out")
        live[0].status = False
        degrees = {b.id: 0 for b in out.network.buses}
        for br in out.network.in_service():
            degrees[br.from_bus] += 1
            degrees[br.to_bus] += 1
        for m in out.machines:
            if degrees[m.bus] == 0:
                raise IslandedMachine(
                    f"tripping {ev.from_bus}-{ev.to_bus} islands machine {m.name}"
                )
        return out

    # machine trip
    cands = [m for m in out.machines
             if (ev.bus is None or m.bus == ev.bus)
             and (ev.unit is None or m.name == ev.unit)]
    if not cands:
        raise TargetNotFound(
            f"no machine matching bus={ev.bus} unit={ev.unit!r}"
        )
    if len(cands) > 1:
        raise ValidationError(
            f"event matches {len(cands)} machines; give a unit name"
        )
    out.machines.remove(cands[0])
    return out


# -------------------------------------------------------------------- config

@dataclass
class SimConfig:
    dt: float = 0.005
    t_stop: float = 10.0
    method: str = TRAPEZOIDAL
    newton_tol: float = 1e-9
    max_newton_iter: int = 15
    record: tuple[str, ...] = ("*",)
    decimation: int = 1

    def __post_init__(self):
        if not (0.0 < self.dt <= 0.02):
            raise ValidationError("dt must be in (0, 0.02] s")
        if self.t_stop <= 0.0:
            raise ValidationError("t_stop must be positive")
        if self.method != TRAPEZOIDAL:
            raise ValidationError(f"unknown integration method {self.method!r}")
        if self.decimation < 1:
            raise ValidationError("decimation must be >= 1")


@dataclass
class TimeSeries:
    time: np.ndarray
    data: dict[str, np.ndarray]

    def channel(self, name: str) -> np.ndarray:
        return self.data[name]

    def names(self) -> list[str]:
        return list(self.data)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("time_s," + ",".join(self.data) + "\n")
            cols = list(self.data.values())
            for k, t in enumerate(self.time):
                row = [f"{t:.9g}"] + [f"{c[k]:.9g}" for c in cols]
                fh.write(",".join(row) + "\n")

    @classmethod
    def from_csv(cls, path) -> "TimeSeries":
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            rows = [list(map(float, ln.split(","))) for ln in fh if ln.strip()]
        arr = np.array(rows)
        return cls(time=arr[:, 0],
                   data={nm: arr[:, i + 1] for i, nm in enumerate(header[1:])})


# -------------------------------------------------------------- station work

@dataclass
class _StationWork:
    """Per-station indices and constants resolved at assembly time."""
    st: hvdc.VscStation
    bus_i: int
    k_conv: float               # converter MVA / system MVA
    i_po: int                   # power-order lag states, converter pu
    i_qo: int
    i_vdc: int
    i_pi: int                   # -1 unless this is the Vdc station
    i_est: int
    pod: ctl.PodQParams | None
    sl_pod: slice | None
    i_delay: int                # -1 unless FCOI damper with delay
    is_p_station: bool
    region: str


@dataclass
class _LinkWork:
    link: hvdc.HvdcLink
    s1: _StationWork
    s2: _StationWork
    i_line: int
    fc: ctl.FcParams | None
    i_fc: int


class Engine:
    """Assembled dynamic system with a stacked state vector.

    Construction needs the constant-impedance load admittances (fixed at
    the initial power flow) and the machine regulator references; use
    `initialize` to build both from scratch, and `rebuild` to carry them
    across an event.
    """

    ALG_TOL = 1e-11

    def __init__(
        self,
        model: SystemModel,
        y_load: np.ndarray,
        mach_refs: dict[str, tuple[float, float]],
    ):
        model.validate()
        self.model = model
        net = model.network
        self.net = net
        self.s_sys = net.system_base_mva
        self.omega_s = 2.0 * math.pi * model.f_hz
        self.y_load = np.asarray(y_load, dtype=complex)
        self.y_dyn = build_admittance(net) + np.diag(self.y_load)
        self.mach_refs = dict(mach_refs)
        self.est = mach.FrequencyEstimator()

        # machines on the system base, plus their regulator references
        self.machines = [m.on_base(self.s_sys) for m in model.machines]
        self.mach_bus_i = [net.bus_index(m.bus) for m in self.machines]
        for m in self.machines:
            if m.name not in self.mach_refs:
                raise ValidationError(f"missing regulator refs for {m.name}")

        self._build_layout()
        self._alg_lu = None
        self._channel_names: list[str] | None = None

    # ------------------------------------------------------------ layout

    def _build_layout(self):
        model = self.model
        labels: list[tuple[str, str]] = []

        self.mach_slices: list[slice] = []
        for m in self.machines:
            base = len(labels)
            labels += [(m.name, s) for s in mach.STATE_NAMES]
            self.mach_slices.append(slice(base, base + 6))

        bank = model.controllers
        self.links: list[_LinkWork] = []
        st_works: list[_StationWork] = []
        for lk in model.hvdc_links:
            works = []
            for st in lk.stations():
                base = len(labels)
                labels += [(st.name, "p_ord"), (st.name, "q_ord"),
                           (st.name, "v_dc")]
                works.append(_StationWork(
                    st=st,
                    bus_i=self.net.bus_index(st.bus),
                    k_conv=st.s_rated / self.s_sys,
                    i_po=base, i_qo=base + 1, i_vdc=base + 2,
                    i_pi=-1, i_est=-1,
                    pod=bank.podq.get(st.name),
                    sl_pod=None, i_delay=-1,
                    is_p_station=(st.mode == hvdc.P_CONTROL),
                    region=self.net.bus(st.bus).region,
                ))
            i_line = len(labels)
            labels.append((lk.name, "i_line"))
            vdc_w = works[0] if not works[0].is_p_station else works[1]
            vdc_w.i_pi = len(labels)
            labels.append((vdc_w.st.name, "pi_int"))
            self.links.append(_LinkWork(
                link=lk, s1=works[0], s2=works[1],
                i_line=i_line,
                fc=bank.fc.get(lk.name), i_fc=-1,
            ))
            st_works += works
        self.stations = st_works

        for w in self.stations:
            w.i_est = len(labels)
            labels.append((w.st.name, "theta_f"))
            labels.append((w.st.name, "omega_f"))
        for lw in self.links:
            if lw.fc is not None:
                lw.i_fc = len(labels)
                labels.append((lw.link.name, "fc_lp"))
        for w in self.stations:
            if w.pod is None:
                continue
            base = len(labels)
            labels.append((w.st.name, "pod_lp"))
            labels.append((w.st.name, "pod_wo"))
            for k in range(w.pod.n_stages):
                labels.append((w.st.name, f"pod_ll{k + 1}"))
            w.sl_pod = slice(base, base + w.pod.n_states)
            if w.pod.variant == ctl.POD_FCOI and bank.delay.n_states:
                w.i_delay = len(labels)
                labels.append((w.st.name, "pod_delay"))

        self.labels = labels
        self.nx = len(labels)
        self.label_index = {lb: i for i, lb in enumerate(labels)}

        # angle-like states grouped by synchronous island, for equilibria
        # with a common frequency offset (angles ramp at one shared rate)
        comps = self.net.components()
        self.drift_groups: list[dict] = []
        for comp in comps:
            idx = []
            ref = -1
            for m, sl in zip(self.machines, self.mach_slices):
                if m.bus in comp:
                    idx.append(sl.start)       # delta
                    if ref < 0:
                        ref = sl.start
            for w in self.stations:
                if w.st.bus in comp:
                    idx.append(w.i_est)        # estimator tracks bus angle
            if ref >= 0:
                self.drift_groups.append({"ref": ref, "idx": np.array(idx)})

    def label_str(self, i: int) -> str:
        dev, st = self.labels[i]
        return f"{dev}.{st}"

    def rebuild(self, model: SystemModel) -> "Engine":
        """Same folded loads and regulator references, new topology/devices."""
        keep = {m.name for m in model.machines}
        refs = {k: v for k, v in self.mach_refs.items() if k in keep}
        return Engine(model, self.y_load, refs)

    def map_state(self, other: "Engine", x_other: np.ndarray) -> np.ndarray:
        """Carry a state vector from `other`'s layout into this layout."""
        x = np.empty(self.nx)
        for i, lb in enumerate(self.labels):
            x[i] = x_other[other.label_index[lb]]
        return x

    # ---------------------------------------------------- network algebra

    def _alg_residual(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        i_inj = np.zeros(self.net.n, dtype=complex)
        for m, sl, bi in zip(self.machines, self.mach_slices, self.mach_bus_i):
            delta = x[sl.start]
            rot = np.exp(1j * (delta - 0.5 * math.pi))
            vdq = v[bi] * np.conj(rot)
            i_d = (x[sl.start + 2] - vdq.imag) / m.xd_p
            i_q = (vdq.real - x[sl.start + 3]) / m.xq_p
            i_inj[bi] += complex(i_d, i_q) * rot
        for w in self.stations:
            vb = v[w.bus_i]
            vm = abs(vb)
            if vm < 1e-9:
                raise AlgebraicSolveFailed(
                    f"vanishing voltage at bus {w.st.bus} during network solve"
                )
            # constant-power behaviour: the order states fix P and Q, the
            # current adapts to the solved voltage
            s_ord = complex(x[w.i_po], -x[w.i_qo])
            i_inj[w.bus_i] += s_ord / vm * (vb / vm) * w.k_conv
        return self.y_dyn @ v - i_inj

    def _alg_jacobian(self, x: np.ndarray, v: np.ndarray):
        n = self.net.n
        r0 = self._alg_residual(x, v)
        jac = np.empty((2 * n, 2 * n))
        h = 1e-6
        for k in range(n):
            for part, col in ((1.0, k), (1j, n + k)):
                vp = v.copy()
                vp[k] += part * h
                rr = (self._alg_residual(x, vp) - r0) / h
                jac[:n, col] = rr.real
                jac[n:, col] = rr.imag
        self._alg_lu = scipy.linalg.lu_factor(jac)

    def solve_network(self, x: np.ndarray, v_guess: np.ndarray,
                      tol: float | None = None) -> np.ndarray:
        """Newton solve of the bus current balance for the voltages."""
        tol = self.ALG_TOL if tol is None else tol
        n = self.net.n
        v = v_guess.astype(complex, copy=True)
        rebuilt = False
        best = np.inf
        for it in range(30):
            r = self._alg_residual(x, v)
            norm = float(np.max(np.abs(r)))
            if norm <= tol:
                return v
            if norm > 1e6 or not np.isfinite(norm):
                break
            best = min(best, norm)
            if self._alg_lu is None or (it >= 6 and not rebuilt):
                self._alg_jacobian(x, v)
                rebuilt = True
            rr = np.concatenate([r.real, r.imag])
            dv = scipy.linalg.lu_solve(self._alg_lu, rr)
            v -= dv[:n] + 1j * dv[n:]
        raise AlgebraicSolveFailed(
            f"network equations stalled at residual {best:.3e}"
        )

    # ------------------------------------------------------- RHS evaluate

    def evaluate(self, x: np.ndarray, v_guess: np.ndarray,
                 t: float | None = None, want_channels: bool = False):
        """Full right-hand side: (dx, solved voltages, channel dict or None)."""
        v = self.solve_network(x, v_guess)
        theta = np.angle(v)
        vm = np.abs(v)
        dx = np.zeros(self.nx)
        ch: dict[str, float] | None = {} if want_channels else None

        # centre-of-inertia speed per region that has machines
        coi: dict[str, float] = {}
        for region in {m.region for m in self.machines}:
            coi[region] = mach.coi_frequency(
                [x[sl.start + 1] for sl in self.mach_slices],
                self.machines, region)

        for m, sl, bi in zip(self.machines, self.mach_slices, self.mach_bus_i):
            s = mach.MachineState(*x[sl])
            v_ref, p_ref = self.mach_refs[m.name]
            dx[sl] = mach.machine_derivatives(
                m, s, v[bi], m.exciter, m.governor, v_ref, p_ref, self.omega_s)
            if ch is not None:
                pe = mach.electrical_power(m, s, v[bi])
                ch[f"gen.{m.bus}.freq_pu"] = s.omega
                ch[f"gen.{m.bus}.angle_rad"] = s.delta
                ch[f"gen.{m.bus}.p_pu"] = pe
                ch[f"gen.{m.bus}.pm_pu"] = s.pm
                ch[f"gen.{m.bus}.efd_pu"] = s.efd

        if ch is not None:
            for region in sorted(coi):
                ch[f"coi.{region}.freq_pu"] = coi[region]
            for b, vmk, thk in zip(self.net.buses, vm, theta):
                ch[f"bus.{b.id}.v_pu"] = vmk
                ch[f"bus.{b.id}.angle_rad"] = thk

        delay = self.model.controllers.delay
        for lw in self.links:
            omega_hat: dict[str, float] = {}
            for w in (lw.s1, lw.s2):
                z_th, z_rt = x[w.i_est], x[w.i_est + 1]
                omega_hat[w.st.name] = self.est.output(z_rt, self.omega_s)
                dx[w.i_est], dx[w.i_est + 1] = self.est.derivatives(
                    z_th, z_rt, theta[w.bus_i])

            dp_fc = 0.0
            if lw.fc is not None:
                p_w = lw.s1 if lw.s1.is_p_station else lw.s2
                far_w = lw.s2 if p_w is lw.s1 else lw.s1
                dp_fc, dxf = ctl.fc_reference(
                    lw.fc, omega_hat[p_w.st.name], omega_hat[far_w.st.name],
                    x[lw.i_fc])
                dx[lw.i_fc] = dxf

            p_to_dc = {}
            for w in (lw.s1, lw.s2):
                st = w.st
                dq_pod = 0.0
                if w.pod is not None:
                    err = (ctl.podq_setpoint(w.pod.variant, coi.get(w.region))
                           - omega_hat[st.name])
                    if w.i_delay >= 0:
                        err, dxd = ctl.pade_delay(delay, err,
                                                  x[w.i_delay:w.i_delay + 1])
                        dx[w.i_delay] = dxd[0]
                    dq_pod, dxp = ctl.podq_output(w.pod, err, x[w.sl_pod])
                    dx[w.sl_pod] = dxp

                if w.is_p_station:
                    p_ref = st.p_set0 + dp_fc
                else:
                    p_ref, dpi = hvdc.vdc_pi_controller(st, x[w.i_vdc], x[w.i_pi])
                    dx[w.i_pi] = dpi
                q_ref = st.q_set0 + dq_pod
                p_ref = min(max(p_ref, -st.p_max), st.p_max)
                q_ref = min(max(q_ref, -st.q_max), st.q_max)

                try:
                    p_cmd, q_cmd = hvdc.power_commands(
                        p_ref, q_ref, vm[w.bus_i], st.i_max)
                except hvdc.VoltageCollapse as exc:
                    raise hvdc.VoltageCollapse(
                        t, f"station {st.name}: {exc.args[0]}") from None
                p_ord, q_ord = x[w.i_po], x[w.i_qo]
                dpo, dqo = hvdc.vsc_order_derivatives(st, p_ord, q_ord,
                                                      p_cmd, q_cmd)
                dx[w.i_po] = dpo
                dx[w.i_qo] = dqo

                i_mag = math.hypot(p_ord, q_ord) / vm[w.bus_i]
                p_ac = p_ord                     # injected into AC, conv pu
                p_to_dc[w.st.name] = hvdc.ac_dc_power_coupling(
                    -p_ac, i_mag, (st.loss_a, st.loss_b, st.loss_c))
                if ch is not None:
                    nm = st.name
                    ch[f"vsc.{nm}.p_pu"] = p_ac * w.k_conv
                    ch[f"vsc.{nm}.q_pu"] = q_ord * w.k_conv
                    ch[f"vsc.{nm}.vdc_pu"] = x[w.i_vdc]
                    ch[f"vsc.{nm}.i_mag_pu"] = i_mag
                    ch[f"vsc.{nm}.freq_pu"] = omega_hat[nm]
                    ch[f"vsc.{nm}.dq_pod_pu"] = dq_pod
                    if w.is_p_station:
                        ch[f"vsc.{nm}.dp_fc_pu"] = dp_fc

            dv1, dv2, dil = hvdc.dc_grid_dynamics(
                lw.link, x[lw.s1.i_vdc], x[lw.s2.i_vdc], x[lw.i_line],
                p_to_dc[lw.s1.st.name], p_to_dc[lw.s2.st.name], t)
            dx[lw.s1.i_vdc] = dv1
            dx[lw.s2.i_vdc] = dv2
            dx[lw.i_line] = dil
            if ch is not None:
                ch[f"link.{lw.link.name}.i_dc_pu"] = x[lw.i_line]
                ch[f"link.{lw.link.name}.p_dc1_pu"] = p_to_dc[lw.s1.st.name]
                ch[f"link.{lw.link.name}.p_dc2_pu"] = p_to_dc[lw.s2.st.name]

        return dx, v, ch

    def channel_names(self, x: np.ndarray, v: np.ndarray) -> list[str]:
        if self._channel_names is None:
            _, _, ch = self.evaluate(x, v, want_channels=True)
            self._channel_names = list(ch)
        return self._channel_names

    # --------------------------------------------------------- equilibria

    def fd_jacobian(self, x: np.ndarray, v: np.ndarray,
                    central: bool = False, h_rel: float = 1e-6) -> np.ndarray:
        """Finite-difference state Jacobian of the full right-hand side."""
        n = self.nx
        jac = np.empty((n, n))
        if central:
            for k in range(n):
                h = h_rel * max(abs(x[k]), 1.0)
                xp = x.copy(); xp[k] += h
                xm = x.copy(); xm[k] -= h
                fp, _, _ = self.evaluate(xp, v)
                fm, _, _ = self.evaluate(xm, v)
                jac[:, k] = (fp - fm) / (2.0 * h)
        else:
            f0, _, _ = self.evaluate(x, v)
            for k in range(n):
                h = h_rel * max(abs(x[k]), 1.0)
                xp = x.copy(); xp[k] += h
                fp, _, _ = self.evaluate(xp, v)
                jac[:, k] = (fp - f0) / h
        return jac

    def residual_drift(self, f: np.ndarray) -> tuple[np.ndarray, list[float]]:
        """Split a RHS value into (residual net of common angle drift, rates).

        Angle-like states of one synchronous island may ramp together at a
        shared rate in steady state (off-nominal frequency); everything
        else must be zero.
        """
        r = f.copy()
        rates = []
        for g in self.drift_groups:
            rate = float(np.mean(f[g["idx"]]))
            r[g["idx"]] -= rate
            rates.append(rate)
        return r, rates

    def solve_equilibrium(self, x_guess: np.ndarray, v_guess: np.ndarray,
                          tol: float = 1e-10, max_iter: int = 40,
                          ) -> tuple[np.ndarray, np.ndarray, list[float]]:
        """Steady state allowing a common angle-drift rate per island.

        Pins one rotor angle per island to its guess value and solves
        f(x) = drift pattern. Returns (x_eq, v_eq, drift rates in rad/s).
        """
        ngrp = len(self.drift_groups)
        u = np.concatenate([x_guess, np.zeros(ngrp)])
        v = v_guess.copy()

        def residual(u):
            x = u[:self.nx]
            rates = u[self.nx:]
            f, vv, _ = self.evaluate(x, v.copy())
            r = f.copy()
            for g, rate in zip(self.drift_groups, rates):
                r[g["idx"]] -= rate
            pins = [x[g["ref"]] - x_guess[g["ref"]] for g in self.drift_groups]
            return np.concatenate([r, pins]), vv

        jac = None
        for it in range(max_iter):
            r, v = residual(u)
            if float(np.max(np.abs(r))) <= tol:
                return u[:self.nx], v, list(u[self.nx:])
            if jac is None or it % 8 == 7:
                m = len(u)
                jac = np.empty((m, m))
                for k in range(m):
                    h = 1e-6 * max(abs(u[k]), 1.0)
                    up = u.copy()
                    up[k] += h
                    rp, _ = residual(up)
                    jac[:, k] = (rp - r) / h
                lu = scipy.linalg.lu_factor(jac)
            u = u - scipy.linalg.lu_solve(lu, r)
        raise AlgebraicSolveFailed(
            f"equilibrium search stalled, residual {float(np.max(np.abs(r))):.3e}"
        )


# ------------------------------------------------------------ initialization

def _link_injections(model: SystemModel, v_ac: dict[int, float]
                     ) -> dict[int, complex]:
    inj: dict[int, complex] = {}
    for lk in model.hvdc_links:
        p_st, v_st = lk.p_station(), lk.vdc_station()
        ss = hvdc.link_steady_state(lk, v_ac.get(p_st.bus, 1.0),
                                    v_ac.get(v_st.bus, 1.0))
        k = lk.s_rated / model.network.system_base_mva
        inj[p_st.bus] = inj.get(p_st.bus, 0j) + k * complex(p_st.p_set0,
                                                            p_st.q_set0)
        inj[v_st.bus] = inj.get(v_st.bus, 0j) + k * complex(
            ss["p_ac_vdc_station"], v_st.q_set0)
    return inj


def initial_power_flow(model: SystemModel, tol: float = 1e-8
                       ) -> PowerFlowSolution:
    """Power flow with machine schedules and link set points as injections."""
    inj: dict[int, complex] = {}
    for m in model.machines:
        inj[m.bus] = inj.get(m.bus, 0j) + m.p_set
    v_ac = {b.id: b.v_mag for b in model.network.buses}
    sol = None
    for _ in range(3):
        full = dict(inj)
        for bus, s in _link_injections(model, v_ac).items():
            full[bus] = full.get(bus, 0j) + s
        sol = solve_power_flow(model.network, full, tol=tol)
        v_ac = {bid: vm for bid, vm in zip(sol.bus_ids, sol.v_mag)}
        if all(st.loss_a == st.loss_b == st.loss_c == 0.0
               for lk in model.hvdc_links for st in lk.stations()):
            break       # loss chain exact on the first pass
    return sol


def initialize(model: SystemModel, tol: float = 1e-8,
               ) -> tuple[Engine, np.ndarray, PowerFlowSolution]:
    """Equilibrium construction: power flow, load folding, device states.

    Returns the assembled engine, the initial state vector and the power
    flow. Raises InitResidualTooLarge when the assembled state is not an
    equilibrium (e.g. set points that the converter limits cannot hold).
    """
    model.validate()
    net = model.network
    sol = initial_power_flow(model, tol=tol)
    vbus = sol.v_mag * np.exp(1j * sol.v_ang)
    bix = {bid: i for i, bid in enumerate(sol.bus_ids)}

    y_load = np.zeros(net.n, dtype=complex)
    for b in net.buses:
        if b.p_load or b.q_load:
            i = bix[b.id]
            y_load[i] = complex(b.p_load, -b.q_load) / (sol.v_mag[i] ** 2)

    s_sys = net.system_base_mva
    mach_refs: dict[str, tuple[float, float]] = {}
    mach_states: dict[str, mach.MachineState] = {}
    for m in model.machines:
        i = bix[m.bus]
        s_gen = complex(sol.p_inj[i], sol.q_inj[i]) + complex(
            net.buses[i].p_load, net.buses[i].q_load)
        msys = m.on_base(s_sys)
        st, v_ref, p_ref = mach.init_from_powerflow(
            msys, vbus[i], s_gen.real, s_gen.imag)
        mach_refs[m.name] = (v_ref, p_ref)
        mach_states[m.name] = st

    engine = Engine(model, y_load, mach_refs)
    x0 = np.zeros(engine.nx)
    for m, sl in zip(engine.machines, engine.mach_slices):
        x0[sl] = mach_states[m.name].as_array()

    # Converter currents, regulator references and estimator angles must be
    # consistent with the voltages the dynamic network solve itself returns,
    # not with the (tolerance-limited) power flow: the fast converter and
    # exciter lags amplify any mismatch. Seed from the power flow, then run
    # the injection/voltage fixed point to convergence.
    def _set_link_states(vm_s):
        shift = 0.0
        for lw in engine.links:
            lk = lw.link
            p_w = lw.s1 if lw.s1.is_p_station else lw.s2
            v_w = lw.s2 if p_w is lw.s1 else lw.s1
            ss = hvdc.link_steady_state(lk, float(vm_s[p_w.bus_i]),
                                        float(vm_s[v_w.bus_i]))
            for w, p_ac in ((p_w, p_w.st.p_set0),
                            (v_w, ss["p_ac_vdc_station"])):
                shift = max(shift, abs(x0[w.i_po] - p_ac),
                            abs(x0[w.i_qo] - w.st.q_set0))
                x0[w.i_po] = p_ac
                x0[w.i_qo] = w.st.q_set0
            x0[lw.s1.i_vdc] = ss["v_dc1"]
            x0[lw.s2.i_vdc] = ss["v_dc2"]
            x0[lw.i_line] = ss["i_line"]
            x0[v_w.i_pi] = ss["p_ac_vdc_station"]
        return shift

    v_sol = vbus.copy()
    _set_link_states(np.abs(vbus))
    for _ in range(30):
        if not engine.links:
            break
        v_sol = engine.solve_network(x0, v_sol)
        if _set_link_states(np.abs(v_sol)) < 1e-13:
            break

    v_sol = engine.solve_network(x0, v_sol)
    vm_s = np.abs(v_sol)
    for w in engine.stations:
        x0[w.i_est] = float(np.angle(v_sol[w.bus_i]))
        x0[w.i_est + 1] = 0.0
    for m, sl, bi in zip(engine.machines, engine.mach_slices,
                         engine.mach_bus_i):
        s = mach.MachineState(*x0[sl])
        pe = mach.electrical_power(m, s, v_sol[bi])
        x0[sl.start + 5] = pe                       # pm balances exactly
        v_ref, p_ref = engine.mach_refs[m.name]
        if m.exciter is not None:
            v_ref = float(vm_s[bi]) + s.efd / m.exciter.ka
        engine.mach_refs[m.name] = (v_ref, pe)
    # controller filter states start at zero: errors vanish by construction

    f0, _, _ = engine.evaluate(x0, v_sol)
    worst = int(np.argmax(np.abs(f0)))
    if abs(f0[worst]) >= 1e-7:
        raise InitResidualTooLarge(float(abs(f0[worst])),
                                   engine.label_str(worst))
    return engine, x0, sol


# ---------------------------------------------------------------- simulation

def _grid_index(t: float, dt: float) -> int:
    k = round(t / dt)
    if abs(k * dt - t) > 1e-9:
        raise ValidationError(
            f"event at t={t} s does not fall on the dt={dt} s grid"
        )
    return int(k)


def simulate(
    model: SystemModel,
    x0: np.ndarray | None = None,
    events: list[Event] | None = None,
    cfg: SimConfig | None = None,
) -> TimeSeries:
    """Implicit-trapezoidal simulation of the assembled model.

    When `x0` is omitted the model is initialized to its equilibrium
    first. Events are applied exactly at their grid timestamps (topology
    change, algebraic re-solve, then integration continues).
    """
    cfg = cfg or SimConfig()
    engine, x, v = _prepare(model, x0)
    ts, _, _, _ = run_simulation(engine, x, v, events or [], cfg)
    return ts


def _prepare(model, x0):
    engine, x, sol = initialize(model)
    v = sol.v_mag * np.exp(1j * sol.v_ang)
    if x0 is not None:
        x = np.asarray(x0, dtype=float)
    return engine, x, v


def run_simulation(
    engine: Engine,
    x: np.ndarray,
    v: np.ndarray,
    events: list[Event],
    cfg: SimConfig,
) -> tuple[TimeSeries, Engine, np.ndarray, np.ndarray]:
    """Core loop; returns (series, final engine, final state, final voltages)."""
    dt = cfg.dt
    nsteps = int(round(cfg.t_stop / dt))
    events = sorted(events, key=lambda e: e.time)
    ev_steps = [_grid_index(e.time, dt) for e in events]

    names = engine.channel_names(x, v)
    selected = [nm for nm in names
                if any(fnmatch.fnmatch(nm, pat) for pat in cfg.record)]
    sel_set = set(selected)

    f, v, ch = engine.evaluate(x, v, t=0.0, want_channels=True)
    times = [0.0]
    rows = [np.array([ch[nm] for nm in selected])]

    lu_step = None
    ev_i = 0
    for k in range(nsteps):
        t0 = k * dt
        t1 = (k + 1) * dt
        while ev_i < len(events) and ev_steps[ev_i] <= k:
            new_model = apply_event(engine.model, events[ev_i])
            new_engine = engine.rebuild(new_model)
            x = new_engine.map_state(engine, x)
            engine = new_engine
            lu_step = None
            f, v, _ = engine.evaluate(x, v, t=t0)
            ev_i += 1

        x, f, v, lu_step = _step(engine, x, f, v, dt, t1, cfg, lu_step)
        if (k + 1) % cfg.decimation == 0 or k + 1 == nsteps:
            _, _, ch = engine.evaluate(x, v, t=t1, want_channels=True)
            times.append(t1)
            # channels of tripped devices turn into NaN
            rows.append(np.array([ch.get(nm, math.nan) for nm in selected]))

    arr = np.vstack(rows)
    data = {nm: arr[:, i] for i, nm in enumerate(selected)}
    return (TimeSeries(time=np.array(times), data=data), engine, x, v)


def _step(engine, x0, f0, v, dt, t1, cfg, lu_step):
    """One trapezoidal step with a lazily refreshed frozen Jacobian."""
    x1 = x0 + dt * f0
    rebuilt = lu_step is None
    f1 = f0
    for it in range(cfg.max_newton_iter):
        f1, v, _ = engine.evaluate(x1, v, t=t1)
        r = x1 - x0 - 0.5 * dt * (f0 + f1)
        norm = float(np.max(np.abs(r)))
        if norm <= cfg.newton_tol:
            return x1, f1, v, lu_step
        if lu_step is None or (it >= 6 and not rebuilt):
            jac = engine.fd_jacobian(x1, v)
            lu_step = scipy.linalg.lu_factor(np.eye(engine.nx) - 0.5 * dt * jac)
            rebuilt = True
        x1 = x1 - scipy.linalg.lu_solve(lu_step, r)
    raise StepNonConvergence(t1, norm)
