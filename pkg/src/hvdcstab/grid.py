"""Static network model and Newton-Raphson power flow.

Conventions: complex per-unit on the system MVA base, pi-model branches,
net injections positive into the network. Multiple slack buses are allowed
as long as there is exactly one per connected (synchronous) region; the
solver then fixes angle and magnitude at each of them independently.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    NoConvergence,
    SingularJacobian,
    ValidationError,
    ZeroImpedanceBranch,
)

SLACK = "Slack"
PV = "PV"
PQ = "PQ"
_BUS_KINDS = (SLACK, PV, PQ)


@dataclass
class Bus:
    id: int
    kind: str = PQ
    v_mag: float = 1.0          # setpoint for Slack/PV, initial guess for PQ
    v_ang: float = 0.0          # radians, fixed only at a slack
    p_load: float = 0.0         # pu on system base, consumed
    q_load: float = 0.0
    region: str = "R1"

    def __post_init__(self):
        if self.kind not in _BUS_KINDS:
            raise ValidationError(f"bus {self.id}: unknown kind {self.kind!r}")


@dataclass
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b_sh: float = 0.0           # total line charging, split half per end
    status: bool = True
    circuit: int = 1            # disambiguates parallel branches

    def admittance(self) -> complex:
        if self.r == 0.0 and self.x == 0.0:
            raise ZeroImpedanceBranch(
                f"branch {self.from_bus}-{self.to_bus} (circuit {self.circuit})"
            )
        return 1.0 / complex(self.r, self.x)


@dataclass
class NetworkModel:
    buses: list[Bus]
    branches: list[Branch]
    system_base_mva: float = 100.0

    _index: dict[int, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._index = {b.id: i for i, b in enumerate(self.buses)}
        if len(self._index) != len(self.buses):
            raise ValidationError("duplicate bus ids")

    @property
    def n(self) -> int:
        return len(self.buses)

    def bus_index(self, bus_id: int) -> int:
        try:
            return self._index[bus_id]
        except KeyError:
            raise ValidationError(f"unknown bus id {bus_id}") from None

    def bus(self, bus_id: int) -> Bus:
        return self.buses[self.bus_index(bus_id)]

    def regions(self) -> list[str]:
        seen: list[str] = []
        for b in self.buses:
            if b.region not in seen:
                seen.append(b.region)
        return seen

    def in_service(self) -> list[Branch]:
        return [br for br in self.branches if br.status]

    def components(self) -> list[set[int]]:
        """Connected components over in-service branches, as sets of bus ids."""
        adj: dict[int, set[int]] = {b.id: set() for b in self.buses}
        for br in self.in_service():
            adj[br.from_bus].add(br.to_bus)
            adj[br.to_bus].add(br.from_bus)
        unseen = set(adj)
        comps = []
        while unseen:
            stack = [unseen.pop()]
            comp = set(stack)
            while stack:
                for nb in adj[stack.pop()]:
                    if nb in unseen:
                        unseen.discard(nb)
                        comp.add(nb)
                        stack.append(nb)
            comps.append(comp)
        return comps

    def copy(self) -> "NetworkModel":
        return NetworkModel(
            buses=[replace(b) for b in self.buses],
            branches=[replace(br) for br in self.branches],
            system_base_mva=self.system_base_mva,
        )


def build_admittance(net: NetworkModel) -> np.ndarray:
    """Dense complex bus admittance matrix from the in-service branches."""
    n = net.n
    y = np.zeros((n, n), dtype=complex)
    for br in net.in_service():
        i = net.bus_index(br.from_bus)
        j = net.bus_index(br.to_bus)
        ys = br.admittance()
        ysh = 0.5j * br.b_sh
        y[i, i] += ys + ysh
        y[j, j] += ys + ysh
        y[i, j] -= ys
        y[j, i] -= ys
    return y


@dataclass
class PowerFlowSolution:
    bus_ids: list[int]
    v_mag: np.ndarray
    v_ang: np.ndarray           # radians
    p_inj: np.ndarray           # net injection seen by the network, pu
    q_inj: np.ndarray
    iterations: int
    max_mismatch: float

    def voltage(self, bus_id: int) -> complex:
        i = self.bus_ids.index(bus_id)
        return self.v_mag[i] * np.exp(1j * self.v_ang[i])


def _check_slack_placement(net: NetworkModel) -> None:
    comps = net.components()
    for comp in comps:
        slacks = [bid for bid in comp if net.bus(bid).kind == SLACK]
        if len(slacks) != 1:
            regions = sorted({net.bus(bid).region for bid in comp})
            raise ValidationError(
                f"component covering regions {regions} has {len(slacks)} slack "
                "buses, need exactly 1"
            )


def solve_power_flow(
    net: NetworkModel,
    injections: dict[int, complex] | None = None,
    tol: float = 1e-8,
    max_iter: int = 30,
    flat_start: bool = True,
) -> PowerFlowSolution:
    """Full-Newton power flow in polar coordinates.

    `injections` holds scheduled generation/converter injections per bus id
    (pu, positive into the network); loads come from the bus records. At PV
    and slack buses only the real part of the schedule is used.
    Raises NoConvergence when the mismatch never meets `tol` and
    SingularJacobian when a Newton step cannot be factorised.
    """
    _check_slack_placement(net)
    n = net.n
    y = build_admittance(net)
    inj = injections or {}

    s_sched = np.zeros(n, dtype=complex)
    for b in net.buses:
        s_sched[net.bus_index(b.id)] = -complex(b.p_load, b.q_load)
    for bid, s in inj.items():
        s_sched[net.bus_index(bid)] += s

    kinds = [b.kind for b in net.buses]
    pv = [i for i, k in enumerate(kinds) if k == PV]
    pq = [i for i, k in enumerate(kinds) if k == PQ]
    slack = [i for i, k in enumerate(kinds) if k == SLACK]
    pvpq = pv + pq

    vm = np.array([b.v_mag for b in net.buses], dtype=float)
    va = np.array([b.v_ang for b in net.buses], dtype=float)
    if flat_start:
        # slacks keep their fixed angles, everything else starts flat
        vm[pq] = 1.0
        va[pvpq] = 0.0

    def mismatch(vm, va):
        v = vm * np.exp(1j * va)
        s_calc = v * np.conj(y @ v)
        ds = s_sched - s_calc
        return np.concatenate([ds.real[pvpq], ds.imag[pq]]), v, s_calc

    best = np.inf
    it = 0
    f, v, _ = mismatch(vm, va)
    for it in range(1, max_iter + 1):
        norm = float(np.max(np.abs(f))) if f.size else 0.0
        best = min(best, norm)
        if norm <= tol:
            _, v, s_calc = mismatch(vm, va)
            return PowerFlowSolution(
                bus_ids=[b.id for b in net.buses],
                v_mag=vm.copy(),
                v_ang=va.copy(),
                p_inj=s_calc.real.copy(),
                q_inj=s_calc.imag.copy(),
                iterations=it - 1,
                max_mismatch=norm,
            )

        j = _jacobian(y, v, pvpq, pq)
        try:
            dx = np.linalg.solve(j, f)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(str(exc)) from exc
        if not np.all(np.isfinite(dx)):
            raise NoConvergence(it, float(best))

        na = len(pvpq)
        va[pvpq] += dx[:na]
        vm[pq] += dx[na:]
        if np.any(vm[pq] <= 1e-6) or not np.all(np.isfinite(vm)):
            raise NoConvergence(it, float(best))
        f, v, _ = mismatch(vm, va)

    norm = float(np.max(np.abs(f))) if f.size else 0.0
    if norm <= tol:
        _, v, s_calc = mismatch(vm, va)
        return PowerFlowSolution(
            bus_ids=[b.id for b in net.buses],
            v_mag=vm.copy(),
            v_ang=va.copy(),
            p_inj=s_calc.real.copy(),
            q_inj=s_calc.imag.copy(),
            iterations=max_iter,
            max_mismatch=norm,
        )
    raise NoConvergence(max_iter, norm)


def _jacobian(y, v, pvpq, pq):
    """Polar power-flow Jacobian [[dP/da, dP/dVm], [dQ/da, dQ/dVm]]."""
    n = len(v)
    ibus = y @ v
    diag_v = np.diag(v)
    diag_i = np.diag(ibus)
    diag_vn = np.diag(v / np.abs(v))

    ds_dva = 1j * diag_v @ np.conj(diag_i - y @ diag_v)
    ds_dvm = diag_v @ np.conj(y @ diag_vn) + np.conj(diag_i) @ diag_vn

    j11 = ds_dva.real[np.ix_(pvpq, pvpq)]
    j12 = ds_dvm.real[np.ix_(pvpq, pq)]
    j21 = ds_dva.imag[np.ix_(pq, pvpq)]
    j22 = ds_dvm.imag[np.ix_(pq, pq)]
    top = np.hstack([j11, j12])
    bot = np.hstack([j21, j22])
    return np.vstack([top, bot]) if bot.size or top.size else np.zeros((0, 0))


def branch_flow(net: NetworkModel, br: Branch, sol: PowerFlowSolution) -> tuple[complex, complex]:
    """Complex power leaving each terminal into the branch (from side, to side)."""
    vf = sol.voltage(br.from_bus)
    vt = sol.voltage(br.to_bus)
    ys = br.admittance()
    ysh = 0.5j * br.b_sh
    i_f = (vf - vt) * ys + vf * ysh
    i_t = (vt - vf) * ys + vt * ysh
    return vf * np.conj(i_f), vt * np.conj(i_t)
