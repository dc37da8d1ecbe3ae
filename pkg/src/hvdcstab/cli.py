"""Command-line front end.

Subcommands: powerflow, modes, simulate, segment, design-pod, case-study.
Every table is printed human-readable and, when an output directory is
given, written as JSON next to the CSV runs. Exit codes: 0 success,
2 a solver gave up, 3 the input was rejected.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import casestudy as cs
from . import fileio as io
from . import fixtures as fx
from . import poddesign as pod
from . import smallsignal as ss
from .controllers import POD_FCOI, POD_LF
from .engine import SimConfig, SystemModel, initial_power_flow, simulate
from .errors import ConvergenceError, SimulationFault, ValidationError
from .segmentation import segment

EXIT_OK = 0
EXIT_CONVERGENCE = 2
EXIT_VALIDATION = 3


# ------------------------------------------------------------ scenario glue

def _load_scenario(args) -> tuple[io.Scenario, Path]:
    if not args.scenario:
        raise ValidationError("--scenario is required for this command")
    return io.load_scenario(args.scenario)


def _case_model(sc: io.Scenario, base_dir) -> SystemModel:
    """System file -> the scenario's case, controllers block applied last."""
    sp = Path(sc.system)
    if not sp.is_absolute():
        sp = Path(base_dir) / sp
    model = io.load_system(sp)
    if sc.case != "AcBase":
        if model.hvdc_links:
            seg = model
        else:
            if sc.plan is None:
                raise ValidationError(
                    f"case {sc.case} needs hvdc_links or a 'plan' block")
            seg = segment(model, sc.plan)
        variant = cs.VARIANT_OF_CASE.get(sc.case)
        model = fx.with_controllers(seg, variant) if variant else seg
    if sc.controllers is not None:
        model.controllers = sc.controllers
    return model


def _sim_config(sc: io.Scenario, args) -> SimConfig:
    cfg = sc.sim
    if getattr(args, "dt", None):
        cfg = SimConfig(**{**vars(cfg), "dt": args.dt})
    if getattr(args, "tstop", None):
        cfg = SimConfig(**{**vars(cfg), "t_stop": args.tstop})
    return cfg


def _out_dir(args, sc: io.Scenario | None = None) -> Path | None:
    out = args.out or (sc.out_dir if sc else None)
    if out is None:
        return None
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


# -------------------------------------------------------------- subcommands

def cmd_powerflow(args) -> int:
    sc, base_dir = _load_scenario(args)
    model = _case_model(sc, base_dir)
    sol = initial_power_flow(model, tol=args.tol)
    print(f"converged in {sol.iterations} iterations, "
          f"max mismatch {sol.max_mismatch:.3e}")
    print(f"{'bus':>5s}  {'V(pu)':>8s}  {'angle(deg)':>10s}")
    rows = []
    for bid, vm, va in zip(sol.bus_ids, sol.v_mag, sol.v_ang):
        print(f"{bid:5d}  {vm:8.4f}  {np.degrees(va):10.3f}")
        rows.append({"bus": bid, "v_pu": round(float(vm), 6),
                     "angle_deg": round(float(np.degrees(va)), 4)})
    out = _out_dir(args, sc)
    if out:
        io.save_json({"iterations": sol.iterations,
                      "max_mismatch": sol.max_mismatch,
                      "buses": rows}, out / "powerflow.json")
    return EXIT_OK


def cmd_modes(args) -> int:
    sc, base_dir = _load_scenario(args)
    model = _case_model(sc, base_dir)
    modes = ss.electromech_modes(ss.linearize(model), model)
    print(cs.format_mode_table(modes, title=f"case {sc.case}"))
    out = _out_dir(args, sc)
    if out:
        io.save_json(cs.mode_rows(modes), out / "modes.json")
    return EXIT_OK


def cmd_simulate(args) -> int:
    sc, base_dir = _load_scenario(args)
    if args.controllers:
        sc.controllers = io.controllers_from_dict(io.load_json(args.controllers))
    model = _case_model(sc, base_dir)
    cfg = _sim_config(sc, args)
    ts = simulate(model, events=sc.events, cfg=cfg)
    out = _out_dir(args, sc) or Path(".")
    path = out / f"{sc.case}_run.csv"
    io.write_csv(ts, path)
    print(f"{len(ts.time)} samples, {len(ts.data)} channels -> {path}")
    return EXIT_OK


def cmd_segment(args) -> int:
    sc, base_dir = _load_scenario(args)
    if sc.plan is None:
        raise ValidationError("scenario has no 'plan' block to apply")
    sp = Path(sc.system)
    if not sp.is_absolute():
        sp = Path(base_dir) / sp
    model = io.load_system(sp)
    seg = segment(model, sc.plan)
    for lk in seg.hvdc_links:
        s1, s2 = lk.station_1, lk.station_2
        print(f"{lk.name}: bus {s1.bus} ({s1.mode}, P0={s1.p_set0:.4f}) <-> "
              f"bus {s2.bus} ({s2.mode})")
    out = _out_dir(args, sc) or Path(".")
    path = out / "segmented_system.json"
    io.save_system(seg, path)
    print(f"segmented system -> {path}")
    return EXIT_OK


def cmd_design_pod(args) -> int:
    sc, base_dir = _load_scenario(args)
    sp = Path(sc.system)
    if not sp.is_absolute():
        sp = Path(base_dir) / sp
    base = io.load_system(sp)
    if base.hvdc_links:
        seg = base
    else:
        if sc.plan is None:
            raise ValidationError("design-pod needs hvdc_links or a 'plan' block")
        seg = segment(base, sc.plan)

    variant = args.variant or cs.VARIANT_OF_CASE.get(sc.case, POD_LF)
    ems = ss.electromech_modes(ss.linearize(seg), seg)
    pool = [m for m in ems
            if m.region_class == f"Intra({args.region})"
            and args.fmin <= m.freq <= args.fmax]
    if not pool:
        raise ValidationError(
            f"no Intra({args.region}) mode in {args.fmin}-{args.fmax} Hz")
    target = min(pool, key=lambda m: m.zeta)
    print(f"target: {target.freq:.4f} Hz, zeta {100*target.zeta:.2f}%, "
          f"{target.region_class}")

    platform = fx.with_controllers(seg, variant)
    ems_p = ss.electromech_modes(ss.linearize(platform), platform)
    tgt = ss.match_mode(target, ems_p)
    designs = []
    for station in args.station:
        designs.append(pod.design_station(platform, station, tgt,
                                          zeta_d=args.zeta_d))
    table = {f"{d.station}": d for d in designs}
    print(cs.format_design_table(table))

    closed = pod.install_designs(platform, designs)
    out = _out_dir(args, sc) or Path(".")
    ctrl_path = out / "controllers.json"
    io.save_json(io.controllers_to_dict(closed.controllers), ctrl_path)
    io.save_json({d.station: cs.design_row(d) for d in designs},
                 out / "design.json")
    print(f"controller file -> {ctrl_path}")
    return EXIT_OK


def cmd_case_study(args) -> int:
    out = _out_dir(args) or Path("case_study_out")
    out.mkdir(parents=True, exist_ok=True)
    report = cs.run_case_study(out_dir=out,
                               t_stop=args.tstop or 25.0,
                               dt=args.dt or 0.005,
                               zeta_d=args.zeta_d)
    for case, modes in report.modes.items():
        print(cs.format_mode_table(modes, title=f"--- {case} ---"))
        print()
    print(cs.format_design_table(report.designs))
    print()
    print(cs.format_nadir_table(report.nadir))
    print()
    print(f"{'tau(s)':>7s}  {'zeta(%)':>8s}  {'f(Hz)':>7s}")
    for row in report.delay_sweep:
        print(f"{row['tau_s']:7.2f}  {row['zeta_pct']:8.2f}  "
              f"{row['freq_hz']:7.4f}")
    print(f"\nreports and CSV runs -> {out}")
    return EXIT_OK


# ------------------------------------------------------------------- parser

def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hvdcstab",
        description="AC grid segmentation with VSC-HVDC links: power flow, "
                    "time-domain simulation, modal analysis, damper design.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario_required=True):
        sp.add_argument("--scenario", help="scenario JSON file",
                        required=scenario_required)
        sp.add_argument("--out", help="output directory")

    sp = sub.add_parser("powerflow", help="solve the steady state")
    common(sp)
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.set_defaults(func=cmd_powerflow)

    sp = sub.add_parser("modes", help="electromechanical mode table")
    common(sp)
    sp.set_defaults(func=cmd_modes)

    sp = sub.add_parser("simulate", help="run the scenario, write CSV")
    common(sp)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--tstop", type=float)
    sp.add_argument("--controllers",
                    help="controller JSON overriding the scenario block")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("segment",
                        help="apply the DC segmentation plan, write system")
    common(sp)
    sp.set_defaults(func=cmd_segment)

    sp = sub.add_parser("design-pod", help="design reactive-power dampers")
    common(sp)
    sp.add_argument("--region", default="R1")
    sp.add_argument("--fmin", type=float, default=0.1)
    sp.add_argument("--fmax", type=float, default=2.0)
    sp.add_argument("--zeta-d", type=float, default=0.15, dest="zeta_d")
    sp.add_argument("--variant", choices=(POD_LF, POD_FCOI))
    sp.add_argument("--station", action="append",
                    default=None,
                    help="station to design (repeatable), default LinkB_5")
    sp.set_defaults(func=cmd_design_pod)

    sp = sub.add_parser("case-study",
                        help="four-case comparison on the bundled fixture")
    common(sp, scenario_required=False)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--tstop", type=float)
    sp.add_argument("--zeta-d", type=float, default=0.15, dest="zeta_d")
    sp.set_defaults(func=cmd_case_study)
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if getattr(args, "station", "x") is None:
        args.station = ["LinkB_5"]
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ConvergenceError, SimulationFault) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
