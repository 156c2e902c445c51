"""Command-line front end.

Exit codes: 0 success, 1 validation/check failure, 2 synthesis failure,
3 runtime divergence.
"""

import argparse
import logging
import os
import sys
import time
from dataclasses import replace

import numpy as np

from .errors import DivergenceError, GraphError, ScenarioError, SynthesisError
from .scenario import load_gains, load_scenario, paper_example, serialize_gains
from .sim import LAWS, assemble, convergence_time, integrate, max_error_after, observer_error_norms, write_csv
from .synthesis import synthesize, validate_gains

EXIT_OK, EXIT_CHECK, EXIT_SYNTHESIS, EXIT_DIVERGENCE = 0, 1, 2, 3

log = logging.getLogger("dobcoord")

# published reference output samples (leader output at these times)
REFERENCE_TIMES = (6.0, 12.0, 15.0, 18.0, 21.0, 24.0, 27.0, 30.0)
REFERENCE_ROW = (-0.2794, -0.5366, 0.6503, -0.7510, 0.8367, -0.9056, 0.9564, -0.9880)
REFERENCE_TOL = 5e-5


def _fmt(m):
    m = np.atleast_2d(m)
    if m.size == 0:
        return "[]"
    # round-off residue would otherwise print as -0.0000
    m = np.where(np.abs(m) < 5e-5, 0.0, m)
    return "[" + "; ".join(", ".join(f"{v:.4f}" for v in row) for row in m) + "]"


def _require_valid(scenario, out):
    report = scenario.validate()
    for issue in report.issues:
        print(issue, file=out)
    return report.ok


def _gains_for(scenario, gains_path=None):
    if gains_path:
        return load_gains(gains_path, scenario)
    return synthesize(scenario.agents, scenario.disturbances, scenario.leader, scenario.graphs,
                      scenario.overrides)


def cmd_synthesize(args, out=None):
    out = out or sys.stdout
    sc = load_scenario(args.scenario)
    if args.no_overrides:
        sc = sc.without_overrides()
    valid = _require_valid(sc, out)
    try:
        gains = _gains_for(sc)
    except (SynthesisError, GraphError) as exc:
        print(f"synthesis failed: {exc}", file=out)
        return EXIT_SYNTHESIS
    for i, g in enumerate(gains.agents, start=1):
        print(f"agent {i}: K1={_fmt(g.K1)} K2={_fmt(g.K2)} K3={_fmt(g.K3)}", file=out)
        print(f"         L1={_fmt(g.L1)} L2={_fmt(g.L2)} L={_fmt(g.L)}", file=out)
    print(f"shared:  L0={_fmt(gains.L0)} P={_fmt(gains.P)}", file=out)
    print(f"         mu*={gains.mu_star:.6g} c={gains.c:.6g}", file=out)
    text = serialize_gains(gains)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"gains written to {args.out}", file=out)
    else:
        print("", file=out)
        print(text, file=out, end="")
    return EXIT_OK if valid else EXIT_CHECK


def cmd_validate(args, out=None):
    out = out or sys.stdout
    sc = load_scenario(args.scenario)
    gains = load_gains(args.gains, sc)
    ok = _require_valid(sc, out)
    report = validate_gains(sc.agents, sc.disturbances, sc.leader, sc.graphs, gains)
    for check in report.checks:
        print(check, file=out)
    ok = ok and report.ok
    print("all checks passed" if ok else f"{len(report.failures())} check(s) failed", file=out)
    return EXIT_OK if ok else EXIT_CHECK


def _summary(traj, T, tol, out):
    errs = max_error_after(traj, T) if traj.times[-1] >= T else None
    conv = convergence_time(traj, tol)
    for i in range(traj.n_followers):
        e = f"{errs[i]:.3e}" if errs is not None else "n/a"
        c = f"{conv[i]:.3f}" if conv[i] is not None else "not converged"
        print(f"agent {i + 1}: max|e| after t={T:g}: {e}   converged (tol {tol:g}) at: {c}", file=out)
    return errs, conv


def cmd_simulate(args, out=None):
    out = out or sys.stdout
    sc = load_scenario(args.scenario)
    law = args.law or sc.law
    seed = sc.seed if args.seed is None else args.seed
    t_end = sc.t_end if args.t_end is None else args.t_end
    h = sc.h if args.h is None else args.h
    if not _require_valid(sc, out):
        return EXIT_CHECK
    try:
        gains = _gains_for(sc, args.gains)
    except SynthesisError as exc:
        print(f"synthesis failed: {exc}", file=out)
        return EXIT_SYNTHESIS
    system = assemble(sc.agents, sc.disturbances, sc.leader, sc.schedule, gains, law,
                      sc.initial_conditions(seed))
    started = time.perf_counter()
    try:
        traj = integrate(system, t_end, h)
    except DivergenceError as exc:
        print(f"simulation diverged at t = {exc.time:.6g}", file=out)
        return EXIT_DIVERGENCE
    log.info("integration took %.3f s", time.perf_counter() - started)
    norms = observer_error_norms(traj, system) if law != "full-info" else None
    every = sc.csv_every if args.every is None else args.every
    write_csv(args.out, traj, norms, every=every,
              comments=[f"seed={seed}", f"law={law}", f"h={h!r}", f"t_end={t_end!r}"])
    print(f"law {law}, seed {seed}, {len(traj.times)} samples -> {args.out}", file=out)
    _summary(traj, sc.error_after, sc.tolerance, out)
    return EXIT_OK


def reproduce(scenario, seeds=None, out=None):
    """Run both DOB laws and check the published reference row and error bound.

    Returns True when every check passes.
    """
    out = out or sys.stdout
    sc = scenario
    seeds = [sc.seed] if not seeds else list(seeds)
    ok = _require_valid(sc, out)
    if not ok:
        return False
    gains = synthesize(sc.agents, sc.disturbances, sc.leader, sc.graphs, sc.overrides, check=False)
    report = validate_gains(sc.agents, sc.disturbances, sc.leader, sc.graphs, gains)
    print("gain-set validation:", file=out)
    for check in report.checks:
        print(f"  {check}", file=out)
    ok &= report.ok

    for law in ("full-order", "reduced-order"):
        for seed in seeds:
            system = assemble(sc.agents, sc.disturbances, sc.leader, sc.schedule, gains, law,
                              sc.initial_conditions(seed))
            try:
                traj = integrate(system, max(sc.t_end, REFERENCE_TIMES[-1]), sc.h)
            except DivergenceError as exc:
                print(f"{law} seed {seed}: diverged at t = {exc.time:.6g}", file=out)
                ok = False
                continue
            idx = [int(np.argmin(np.abs(traj.times - t))) for t in REFERENCE_TIMES]
            if law == "full-order" and seed == seeds[0]:
                y0 = traj.reference[idx, 0]
                dev = np.abs(y0 - np.array(REFERENCE_ROW))
                row_ok = bool(np.all(dev <= REFERENCE_TOL))
                ok &= row_ok
                print("", file=out)
                print("t          " + "".join(f"{t:>9g}" for t in REFERENCE_TIMES), file=out)
                print("published  " + "".join(f"{v:9.4f}" for v in REFERENCE_ROW), file=out)
                print("reference  " + "".join(f"{v:9.4f}" for v in y0), file=out)
                print(f"{'PASS' if row_ok else 'FAIL'}  reference row (max dev {dev.max():.2e}, tol {REFERENCE_TOL:g})",
                      file=out)
            for i in range(traj.n_followers):
                print(f"{law[:4]} s{seed} y_{i + 1}  " + "".join(f"{v:9.4f}" for v in traj.outputs[idx, i, 0]),
                      file=out)
            errs = max_error_after(traj, sc.error_after)
            bound_ok = bool(np.all(errs <= sc.tolerance))
            ok &= bound_ok
            print(f"{'PASS' if bound_ok else 'FAIL'}  {law} seed {seed}: max|e| after t={sc.error_after:g} = "
                  f"{errs.max():.3e} (tol {sc.tolerance:g})", file=out)
    print("", file=out)
    print("PASS" if ok else "FAIL", file=out)
    return ok


def cmd_reproduce(args, out=None):
    out = out or sys.stdout
    sc = load_scenario(args.scenario) if args.scenario else paper_example()
    if args.zero_l0:
        sc = replace(sc, L0_override=np.zeros_like(sc.L0_override if sc.L0_override is not None
                                                   else np.zeros((sc.leader.n0, sc.leader.l))))
    return EXIT_OK if reproduce(sc, args.seeds, out) else EXIT_CHECK


def build_parser():
    p = argparse.ArgumentParser(prog="dobcoord", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synthesize", help="compute every controller gain for a scenario")
    s.add_argument("scenario")
    s.add_argument("--out", help="write the gain file here instead of stdout")
    s.add_argument("--no-overrides", action="store_true", help="ignore gain overrides in the scenario")
    s.set_defaults(func=cmd_synthesize)

    s = sub.add_parser("validate", help="check a gain file against a scenario")
    s.add_argument("scenario")
    s.add_argument("--gains", required=True)
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("simulate", help="integrate the closed loop and write a CSV trajectory")
    s.add_argument("scenario")
    s.add_argument("--law", choices=LAWS)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.add_argument("--gains", help="use this gain file instead of synthesizing")
    s.add_argument("--t-end", type=float)
    s.add_argument("--h", type=float)
    s.add_argument("--every", type=int, help="keep every k-th sample in the CSV")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("reproduce-paper", help="rerun the bundled two-graph experiment and check it")
    s.add_argument("--scenario", help="use this scenario instead of the bundled one")
    s.add_argument("--seeds", type=int, nargs="+")
    s.add_argument("--zero-l0", action="store_true", help="zero the leader-observer gain (sanity failure)")
    s.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None):
    level = os.environ.get("DOBCOORD_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
