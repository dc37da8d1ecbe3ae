"""Calibration: generator-trip frequency support across the three cases."""
import time

import numpy as np

from hvdcstab import fixtures as fx
from hvdcstab.controllers import POD_LF
from hvdcstab.engine import SimConfig, simulate
from hvdcstab.segmentation import segment


def coi_stats(ts, region):
    f = ts.data[f"coi.{region}.freq_pu"]
    return float(f.min()), float(f[-1]), float(np.abs(f - 1.0).max())


cfg = SimConfig(dt=0.005, t_stop=25.0,
                record=("coi.*.freq_pu", "gen.*.freq_pu", "vsc.*.p_pu"))
ev = [fx.gen_trip_event()]

cases = {}
t0 = time.time()
ac = fx.two_area_model()
cases["AcBase"] = simulate(ac, events=ev, cfg=cfg)
t1 = time.time()
seg = segment(fx.two_area_model(), fx.two_area_plan())
cases["DcsConstPQ"] = simulate(seg, events=ev, cfg=cfg)
t2 = time.time()
fc = fx.with_controllers(seg, POD_LF)   # zero-gain PODs, FC active
cases["DcsFc"] = simulate(fc, events=ev, cfg=cfg)
t3 = time.time()

print(f"times: AC {t1-t0:.1f}s  constPQ {t2-t1:.1f}s  FC {t3-t2:.1f}s")
for name, ts in cases.items():
    r1 = coi_stats(ts, "R1")
    r2 = coi_stats(ts, "R2")
    print(f"{name:12s} R1 min={r1[0]:.6f} end={r1[1]:.6f} | "
          f"R2 maxdev={r2[2]:.3e} end={r2[1]:.6f}")

fm = {k: coi_stats(v, "R1")[0] for k, v in cases.items()}
print("ordering constPQ < FC <= AC:",
      fm["DcsConstPQ"] < fm["DcsFc"] <= fm["AcBase"])
print("R2 firewall:", coi_stats(cases["DcsConstPQ"], "R2")[2] < 1e-6,
      coi_stats(cases["DcsFc"], "R2")[2] > 1e-3)
