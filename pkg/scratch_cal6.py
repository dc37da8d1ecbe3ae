"""Calibration: ringdown cross-validation and numerical hygiene checks."""
import time

import numpy as np

from hvdcstab import fixtures as fx
from hvdcstab import smallsignal as ss
from hvdcstab.engine import Engine, SimConfig, apply_event, initialize, simulate
from hvdcstab.segmentation import segment

# --- criterion 7: log-decrement of the post-trip ringdown vs eigenvalue
t0 = time.time()
ac = fx.two_area_model()
cfg = SimConfig(dt=0.005, t_stop=30.0,
                record=("coi.*.freq_pu", "gen.*.freq_pu"))
ts = simulate(ac, events=[fx.line_trip_event()], cfg=cfg)
y = ts.data["coi.R2.freq_pu"] - ts.data["coi.R1.freq_pu"]
zeta_m, f_m = ss.log_decrement(ts.time, y, t_start=2.0)
print(f"ringdown: zeta={100*zeta_m:.3f}% f={f_m:.4f} Hz  ({time.time()-t0:.1f}s)")

tripped = apply_event(ac, fx.line_trip_event())
eng, x0, sol = initialize(tripped)
lin = ss.linearize(eng, x0, sol.v_mag * np.exp(1j * sol.v_ang))
ems = ss.electromech_modes(lin, tripped)
inter = [m for m in ems if m.region_class == "InterArea" and 0.3 < m.freq < 0.9]
m0 = min(inter, key=lambda m: m.zeta)
print(f"eigen: zeta={100*m0.zeta:.3f}% f={m0.freq:.4f} Hz")
print(f"rel err: zeta {abs(zeta_m-m0.zeta)/m0.zeta*100:.2f}% "
      f"freq {abs(f_m-m0.freq)/m0.freq*100:.2f}%")

# --- criterion 8: dt-halving on the small internal trip, pu channels
t1 = time.time()
seg = segment(fx.two_area_model(), fx.two_area_plan())
rec = fx.RECORD_DEFAULT
c1 = SimConfig(dt=0.0025, t_stop=10.0, record=rec)
c2 = SimConfig(dt=0.00125, t_stop=10.0, record=rec, decimation=2)
tsa = simulate(seg, events=[fx.small_trip_event()], cfg=c1)
tsb = simulate(seg, events=[fx.small_trip_event()], cfg=c2)
worst = 0.0
worst_ch = None
for ch in tsa.data:
    d = float(np.abs(tsa.data[ch] - tsb.data[ch]).max())
    if d > worst:
        worst, worst_ch = d, ch
print(f"dt-halving sup-norm {worst:.3e} on {worst_ch}  ({time.time()-t1:.1f}s)")

# --- DC power balance residual: converter powers minus line loss
# flatline run: storage terms are zero, so the residual must hold each step
flat = simulate(seg, events=[], cfg=SimConfig(dt=0.005, t_stop=5.0,
                                              record=("link.*",)))
for nm, link in (("LinkA", None), ("LinkB", None)):
    lk = next(l for l in seg.hvdc_links if l.name == nm)
    r_pu, _ = lk.line.pu(lk.s_rated)
    for tag, trun in (("flat", flat), ("event-tail", tsa)):
        p1 = trun.data[f"link.{nm}.p_dc1_pu"]
        p2 = trun.data[f"link.{nm}.p_dc2_pu"]
        i = trun.data[f"link.{nm}.i_dc_pu"]
        res = np.abs(p1 + p2 - r_pu * i * i)
        if tag == "event-tail":
            res = res[trun.time >= trun.time[-1] - 1.0]
        print(f"{nm} {tag}: max residual {res.max():.3e}")
print(f"total {time.time()-t0:.1f}s")
