"""Calibration pass 1: power flow, AC modes, segmented modes."""
import time
import numpy as np

from hvdcstab.fixtures import two_area_model, two_area_plan
from hvdcstab.engine import initialize, initial_power_flow
from hvdcstab.segmentation import segment
from hvdcstab import smallsignal as ss

t0 = time.perf_counter()
ac = two_area_model()
sol = initial_power_flow(ac)
print("AC PF: iters", sol.iterations, "mismatch %.2e" % sol.max_mismatch)
for bid, vm, va in zip(sol.bus_ids, sol.v_mag, sol.v_ang):
    print(f"  bus {bid:2d}  {vm:.4f} /_{np.degrees(va):7.2f}")
print("  p_inj:", {b: round(p, 3) for b, p in zip(sol.bus_ids, sol.p_inj)})

from hvdcstab.grid import branch_flow
for br in ac.network.branches:
    if {br.from_bus, br.to_bus} in ({7, 9}, {6, 10}):
        sf, st = branch_flow(ac.network, br, sol)
        print(f"  tie {br.from_bus}-{br.to_bus} c{br.circuit}: "
              f"S_from={sf:.4f} S_to={st:.4f}")

eng, x0, _ = initialize(ac)
print("AC init nx=%d resid ok" % eng.nx)
lin = ss.linearize(eng, x0, sol.v_mag * np.exp(1j * sol.v_ang))
em = ss.electromech_modes(lin, ac)
print("AC electromech modes:")
for m in em:
    print("  ", m)

seg = segment(ac, two_area_plan())
for lk in seg.hvdc_links:
    for st in lk.stations():
        print(f"  {st.name}: mode={st.mode} p0={st.p_set0:.4f} "
              f"q0={st.q_set0:.4f}")
sol2 = initial_power_flow(seg)
print("seg PF: iters", sol2.iterations, "mismatch %.2e" % sol2.max_mismatch)
vm_ac = {b: v for b, v in zip(sol.bus_ids, sol.v_mag)}
vm_sg = {b: v for b, v in zip(sol2.bus_ids, sol2.v_mag)}
dv = max(abs(vm_ac[b] - vm_sg[b]) for b in vm_ac)
print("max |dV| AC vs segmented: %.2e" % dv)

eng2, x20, _ = initialize(seg)
print("seg init nx=%d" % eng2.nx)
lin2 = ss.linearize(eng2, x20, sol2.v_mag * np.exp(1j * sol2.v_ang))
em2 = ss.electromech_modes(lin2, seg)
print("segmented electromech modes:")
for m in em2:
    print("  ", m)
print("elapsed %.1f s" % (time.perf_counter() - t0))
