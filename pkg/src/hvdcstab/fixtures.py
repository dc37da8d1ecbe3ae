"""Bundled desk-scale two-area fixture.

Classic two-area layout with a twist: the inter-area corridor is split
into two separable paths (a double circuit 7-9 and a single circuit
6-10) so each can be replaced by one DC link, and region 1 carries a
small fifth unit (G5 at bus 12) used as the generation-loss event.

              R1                          R2
   G1--1--5====6====7--12--G5    9====10====11--3--G3
         G2--2-/    |        \\  /      \\--4--G4
                    |  corridor A (2x)   |
                    +--- corridor B -----+   (5-10)

All impedances on the 100 MVA system base; machine data on each
machine's own rating. Loads sit at 7 and 9 and are net capacitive
(shunt compensation folded in); bus 5 carries only a small capacitor
bank, which keeps corridor B's sending end electrically soft.
"""

from . import controllers as ctl
from . import machines as mach
from .engine import ControllerBank, Event, SimConfig, SystemModel
from .grid import Bus, Branch, NetworkModel
from .segmentation import LinkTemplate, SegmentationPlan

R1, R2 = "R1", "R2"

# corridor series impedance per circuit; resistances chosen so the AC
# corridor loss roughly matches the DC loss of its replacement link,
# keeping the segmented power flow close to the AC one
_TIE_A = dict(r=0.0024, x=0.22, b_sh=0.385)
_TIE_B = dict(r=0.0055, x=0.24, b_sh=0.42)


def two_area_network() -> NetworkModel:
    buses = [
        Bus(1, "Slack", 1.03, 0.0, 0.0, 0.0, region=R1),
        Bus(2, "PV", 1.01, 0.0, 0.0, 0.0, region=R1),
        Bus(3, "PV", 1.03, 0.0, 0.0, 0.0, region=R2),
        Bus(4, "PV", 1.01, 0.0, 0.0, 0.0, region=R2),
        Bus(5, "PQ", 1.0, 0.0, 0.0, -0.5, region=R1),
        Bus(6, "PQ", 1.0, 0.0, 0.0, 0.0, region=R1),
        Bus(7, "PQ", 1.0, 0.0, 10.0, -0.5, region=R1),
        Bus(9, "PQ", 1.0, 0.0, 18.0, -2.5, region=R2),
        Bus(10, "PQ", 1.0, 0.0, 0.0, 0.0, region=R2),
        Bus(11, "PQ", 1.0, 0.0, 0.0, 0.0, region=R2),
        Bus(12, "PV", 1.01, 0.0, 0.0, 0.0, region=R1),
    ]
    branches = [
        # generator transformers
        Branch(1, 5, 0.0, 0.15 / 9.0, 0.0, True, 1),
        Branch(2, 6, 0.0, 0.15 / 9.0, 0.0, True, 1),
        Branch(3, 11, 0.0, 0.15 / 9.0, 0.0, True, 1),
        Branch(4, 10, 0.0, 0.15 / 9.0, 0.0, True, 1),
        Branch(12, 7, 0.0, 0.15 / 2.0, 0.0, True, 1),
        # region-internal lines (5-6 doubled: a benign trip target)
        Branch(5, 6, 0.005, 0.05, 0.0875, True, 1),
        Branch(5, 6, 0.005, 0.05, 0.0875, True, 2),
        Branch(6, 7, 0.001, 0.01, 0.0175, True, 1),
        Branch(11, 10, 0.0025, 0.025, 0.04375, True, 1),
        Branch(10, 9, 0.001, 0.01, 0.0175, True, 1),
        # inter-area corridors
        Branch(7, 9, status=True, circuit=1, **_TIE_A),
        Branch(7, 9, status=True, circuit=2, **_TIE_A),
        Branch(5, 10, status=True, circuit=1, **_TIE_B),
    ]
    return NetworkModel(buses=buses, branches=branches, system_base_mva=100.0)


def _unit(name, bus, s_rated, h, p_set, region,
          ka=100.0) -> mach.SynchronousMachine:
    return mach.SynchronousMachine(
        name=name, bus=bus, s_rated=s_rated, h=h, d=2.0,
        xd=1.8, xq=1.7, xd_p=0.3, xq_p=0.55, td0_p=8.0, tq0_p=0.4,
        region=region, p_set=p_set,
        exciter=mach.Exciter(ka=ka, ta=0.02, efd_min=-6.0, efd_max=6.0),
        governor=mach.Governor(r_droop=0.05, t1=0.5, p_max=1.0, p_min=0.0),
    )


def two_area_model() -> SystemModel:
    """The AC base case."""
    return SystemModel(
        network=two_area_network(),
        machines=[
            # G1 runs the slow exciter of the fleet; a fast AVR at the
            # corridor end would clamp bus 5 against voltage modulation
            _unit("G1", 1, 900.0, 6.5, 7.0, R1, ka=50.0),
            _unit("G2", 2, 900.0, 6.5, 6.0, R1),
            _unit("G3", 3, 900.0, 5.4, 7.0, R2),
            _unit("G4", 4, 900.0, 4.9, 7.0, R2),
            _unit("G5", 12, 200.0, 3.0, 1.2, R1),
        ],
        f_hz=50.0,
    )


def two_area_plan() -> SegmentationPlan:
    """Replace corridor A (7-9 twin circuits) and corridor B (5-10)."""
    return SegmentationPlan(links=[
        LinkTemplate(name="LinkA", from_bus=7, to_bus=9,
                     s_rated_mva=800.0, v_base_dc_kv=360.0,
                     r_dc_ohm=1.6, l_dc_h=0.25, c_dc_f=3000e-6),
        LinkTemplate(name="LinkB", from_bus=5, to_bus=10,
                     s_rated_mva=200.0, v_base_dc_kv=360.0,
                     r_dc_ohm=7.2, l_dc_h=0.6, c_dc_f=1000e-6),
    ])


def fc_bank() -> dict[str, ctl.FcParams]:
    return {"LinkA": ctl.FcParams(), "LinkB": ctl.FcParams()}


def zero_gain_pods(variant: str) -> dict[str, ctl.PodQParams]:
    """Damper slots on all four stations, inert until designed."""
    return {name: ctl.PodQParams(variant=variant)
            for name in ("LinkA_7", "LinkA_9", "LinkB_5", "LinkB_10")}


def with_controllers(segmented: SystemModel, variant: str,
                     delay_tau: float = 0.0) -> SystemModel:
    """Segmented case plus FC and (zero-gain) dampers of one variant."""
    out = segmented.copy()
    out.controllers = ControllerBank(
        fc=fc_bank(),
        podq=zero_gain_pods(variant),
        delay=ctl.DelayParams(tau=delay_tau),
    )
    return out


def line_trip_event() -> Event:
    """Loss of one corridor-A circuit (AC case ringdown experiment)."""
    return Event(time=1.0, kind="trip_branch", from_bus=7, to_bus=9,
                 circuit=2)


def small_trip_event() -> Event:
    """Loss of one 5-6 circuit: a mild, region-internal disturbance."""
    return Event(time=1.0, kind="trip_branch", from_bus=5, to_bus=6,
                 circuit=2)


def gen_trip_event() -> Event:
    """Loss of the small region-1 unit."""
    return Event(time=1.0, kind="trip_machine", bus=12, unit="G5")


RECORD_DEFAULT = ("gen.*.freq_pu", "gen.*.p_pu", "gen.*.pm_pu",
                  "coi.*.freq_pu", "bus.*.v_pu",
                  "vsc.*", "link.*")


def sim_config(t_stop: float, dt: float = 0.005) -> SimConfig:
    return SimConfig(dt=dt, t_stop=t_stop, record=RECORD_DEFAULT)


def write_bundled_data(out_dir) -> list:
    """Regenerate the shipped data files from the fixture builders.

    The JSON under data/ is the canonical serialized form of the models
    above; a test pins the two representations to each other, so edit
    the builders and rerun this instead of editing the JSON.
    """
    from pathlib import Path

    from . import fileio as io

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    sys_path = out / "two_area_system.json"
    io.save_system(two_area_model(), sys_path)
    written.append(sys_path)

    scenarios = {
        "scenario_ac_line_trip.json": io.Scenario(
            system="two_area_system.json", case="AcBase",
            events=[line_trip_event()], sim=sim_config(30.0)),
        "scenario_dcs_gen_trip.json": io.Scenario(
            system="two_area_system.json", case="DcsConstPQ",
            events=[gen_trip_event()], sim=sim_config(25.0),
            plan=two_area_plan()),
        "scenario_fcoi_gen_trip.json": io.Scenario(
            system="two_area_system.json", case="DcsFcPodFCOI",
            events=[gen_trip_event()], sim=sim_config(25.0),
            plan=two_area_plan()),
    }
    for name, sc in scenarios.items():
        path = out / name
        io.save_scenario(sc, path)
        written.append(path)
    return written


if __name__ == "__main__":
    from pathlib import Path

    for p in write_bundled_data(Path(__file__).parent / "data"):
        print(p)
