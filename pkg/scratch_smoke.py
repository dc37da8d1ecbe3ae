"""Throwaway smoke test: 3-bus 2-machine AC system, then add one DC link."""
import numpy as np

from hvdcstab.grid import Bus, Branch, NetworkModel
from hvdcstab import machines as mach
from hvdcstab import hvdc, engine
from hvdcstab.engine import SystemModel, SimConfig, Event, initialize, simulate

def two_mach_model(with_link=False):
    buses = [
        Bus(1, "Slack", 1.03, 0.0, 0.0, 0.0, region="R1"),
        Bus(2, "PV", 1.01, 0.0, 0.0, 0.0, region="R2"),
        Bus(3, "PQ", 1.0, 0.0, 3.0, 0.5, region="R1"),
    ]
    branches = [
        Branch(1, 3, 0.002, 0.05, 0.02, True, 1),
        Branch(2, 3, 0.002, 0.05, 0.02, True, 1),
        Branch(1, 3, 0.002, 0.08, 0.0, True, 2),
    ]
    net = NetworkModel(buses, branches, 100.0)
    ms = [
        mach.SynchronousMachine(
            name="G1", bus=1, s_rated=400.0, h=4.0, d=1.0,
            xd=1.8, xq=1.7, xd_p=0.3, xq_p=0.55, td0_p=8.0, tq0_p=0.4,
            region="R1", p_set=2.0,
            exciter=mach.Exciter(), governor=mach.Governor()),
        mach.SynchronousMachine(
            name="G2", bus=2, s_rated=300.0, h=3.5, d=1.0,
            xd=1.8, xq=1.7, xd_p=0.3, xq_p=0.55, td0_p=8.0, tq0_p=0.4,
            region="R2", p_set=1.2,
            exciter=mach.Exciter(), governor=mach.Governor()),
    ]
    links = []
    if with_link:
        st1 = hvdc.VscStation(name="S1", bus=1, s_rated=200.0,
                              mode=hvdc.P_CONTROL, p_set0=0.25, q_set0=0.05)
        st2 = hvdc.VscStation(name="S2", bus=2, s_rated=200.0,
                              mode=hvdc.VDC_CONTROL, q_set0=-0.02,
                              c_dc=195e-6)
        # but stations cannot share machine buses -> put on 3? only one bus3.
        line = hvdc.DcLine(r_dc=1.6, l_dc=0.067, v_base_dc=150.0)
        links = [hvdc.HvdcLink(name="LA", station_1=st1, station_2=st2,
                               line=line)]
    return SystemModel(network=net, machines=ms, hvdc_links=links, f_hz=50.0)


m = two_mach_model()
eng, x0, sol = initialize(m)
print("pf iters", sol.iterations, "mismatch", sol.max_mismatch)
print("nx", eng.nx)
f0, v0, ch = eng.evaluate(x0, sol.v_mag * np.exp(1j * sol.v_ang),
                          want_channels=True)
print("max |f0|", np.max(np.abs(f0)), "at", eng.label_str(int(np.argmax(np.abs(f0)))))
print("channels:", list(ch)[:8], "...")

ts = simulate(m, cfg=SimConfig(dt=0.005, t_stop=1.0))
w = ts.channel("gen.1.freq_pu")
print("flatline omega drift:", np.max(np.abs(w - w[0])))

# trip one circuit of the double line 1-3 at t=0.2
ts2 = simulate(m, events=[Event(time=0.2, kind="trip_branch",
                                from_bus=1, to_bus=3, circuit=2)],
               cfg=SimConfig(dt=0.005, t_stop=3.0))
w1 = ts2.channel("gen.1.freq_pu")
print("post-trip freq span:", w1.min(), w1.max())
print("final v3:", ts2.channel("bus.3.v_pu")[-1])
