"""Root locus of the target mode vs damper gain, one station at a time."""
import numpy as np

from hvdcstab import fixtures as fx
from hvdcstab import poddesign as pod
from hvdcstab import smallsignal as ss
from hvdcstab.controllers import POD_LF, POD_FCOI
from hvdcstab.segmentation import segment

seg = segment(fx.two_area_model(), fx.two_area_plan())
model = fx.with_controllers(seg, POD_LF)
lin0 = ss.linearize(model)
ems = ss.electromech_modes(lin0, model)
r1 = min([m for m in ems if m.region_class == "Intra(R1)"], key=lambda m: m.zeta)
print("target", r1)

for st in ("LinkA_7", "LinkB_5"):
    d = pod.design_station(model, st, r1, zeta_d=0.15)
    shat = pod.compensated_sensitivity(d.sensitivity, d.leadlag)
    print(f"{st}: S_nc={d.sensitivity.s_nc:.3e} |S_hat|={abs(shat):.3e} "
          f"phase_hat={np.degrees(np.angle(shat)):.2f} K={d.gain.k_q:.1f}")
    for k in (20.0, 50.0, 100.0, 200.0, 400.0):
        trial = model.copy()
        trial.controllers.podq[st] = pod.ctl.replace(
            d.params, k_q=np.sign(d.gain.k_q) * k) if hasattr(pod.ctl, "replace") else None
        from dataclasses import replace as dc_replace
        trial.controllers.podq[st] = dc_replace(d.params,
                                                k_q=float(np.sign(d.gain.k_q)) * k)
        lam_pred = r1.lam + np.sign(d.gain.k_q) * k * shat
        mc = ss.match_mode(r1, ss.eigensolve(ss.linearize(trial)))
        print(f"   K={k:6.1f}: pred {lam_pred:.4f} (z={-lam_pred.real/abs(lam_pred)*100:5.2f}%)"
              f"  actual {mc.lam:.4f} (z={100*mc.zeta:5.2f}%)")
