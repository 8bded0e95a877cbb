"""Command-line entry point: ``cavityaqc <command> [options]``.

Exit codes: 0 success, 1 configuration or parse error, 2 empty analytical
result, 3 integration failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config, load_preset, preset_names, write_csv, write_json
from .dynamics import ProtocolResult, run_protocol
from .errors import CavityAQCError, EmptyResult, GenerationFailed, IntegrationError, ParseError
from .models import ModelKind, ModelSpec, build_model, generate_ec_instance, parse_ec_clauses, violation_table
from .spectral import gap_location, observables_table
from .stationary import Control, bifurcation_points, feasibility_check, sweep_values

log = logging.getLogger("cavityaqc")

EXIT_OK, EXIT_CONFIG, EXIT_EMPTY, EXIT_INTEGRATION = 0, 1, 2, 3
TRAJECTORY_HEADER = ("t", "a_re", "a_im", "x_a", "X", "b_eff", "p_exc")


class _Manifest:
    """Records written files so partial output is self-describing."""

    def __init__(self, out: Path, command: str):
        self.out = out
        self.command = command
        self.files: list[str] = []
        self.failures: list[dict] = []

    def add(self, path: Path) -> None:
        self.files.append(path.relative_to(self.out).as_posix())

    def write(self, status: str) -> None:
        write_json(self.out / "manifest.json", {
            "command": self.command, "status": status, "files": self.files, "failures": self.failures,
        })


def _model(config: RunConfig):
    return build_model(config.model, dense=bool(config.options.get("dense", False)))


# --------------------------------------------------------------------------
# stationary
# --------------------------------------------------------------------------


def cmd_stationary(config: RunConfig, workers: int = 1) -> int:
    if config.sweep is None or config.sweep.control == "b_eff":
        raise ConfigError("stationary needs a sweep over epsilon or delta_c")
    model = _model(config)
    control = Control(config.sweep.control)
    out = config.output_dir
    man = _Manifest(out, "stationary")
    rows = sweep_values(model, config.cavity, control, config.sweep.grid())
    if "sweep" in config.emit:
        table = [(r.control_value, p.x_ss, p.b_eff, p.stability.value) for r in rows for p in r.points]
        man.add(write_csv(out / "sweep.csv", ("control", "x_ss", "b_eff", "stability"), table))
    bifs = []
    if config.cavity.g != 0:
        try:
            bifs = bifurcation_points(model, config.cavity, control)
        except EmptyResult:
            bifs = []
    if "bifurcations" in config.emit:
        man.add(write_json(out / "bifurcations.json", {
            "control": control.value,
            "points": [{"control_value": b.control_value, "b_eff": b.b_eff, "x": b.x} for b in bifs],
        }))
    empty = [r.control_value for r in rows if r.empty]
    for v in empty:
        man.failures.append({"control_value": float(v), "error": "no stationary point"})
    man.write("empty" if empty else "ok")
    print(f"{len(rows)} sweep points, {sum(len(r.points) for r in rows)} stationary points, "
          f"{len(bifs)} bifurcation points")
    for b in bifs:
        print(f"  {control.value} = {b.control_value:.6g} at b_eff = {b.b_eff:.6g}")
    if empty:
        print(f"no stationary point at {len(empty)} sweep value(s)", file=sys.stderr)
        return EXIT_EMPTY
    return EXIT_OK


# --------------------------------------------------------------------------
# protocol
# --------------------------------------------------------------------------


def _protocol_job(args):
    spec, dense, cavity, schedule, gap = args
    model = build_model(spec, dense=dense)
    try:
        return run_protocol(model, cavity, schedule, gap=gap)
    except IntegrationError as exc:
        return exc


def _write_trajectory(path: Path, res: ProtocolResult) -> Path:
    return write_csv(path, TRAJECTORY_HEADER, res.trajectory.rows())


def cmd_protocol(config: RunConfig, workers: int = 1) -> int:
    if config.schedule is None:
        raise ConfigError("protocol needs a schedule")
    sched = config.schedule
    if config.sweep is not None:
        if config.sweep.control != sched.control.value:
            raise ConfigError(f"sweep control {config.sweep.control} does not match schedule control "
                              f"{sched.control.value}")
        values = [float(v) for v in config.sweep.grid()]
    else:
        if not np.isfinite(sched.mid):
            raise ConfigError("schedule needs an intermediate control value or a sweep")
        values = [float(sched.mid)]
    model = _model(config)
    gap = gap_location(model)
    dense = bool(config.options.get("dense", False))
    jobs = [(config.model, dense, config.cavity, replace(sched, mid=v), gap) for v in values]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_protocol_job, jobs))
    else:
        results = [_protocol_job(j) for j in jobs]

    out = config.output_dir
    man = _Manifest(out, "protocol")
    key = "eps_mid" if sched.control is Control.EPSILON else "delta_mid"
    ok = [(i, r) for i, r in enumerate(results) if isinstance(r, ProtocolResult)]
    for v, r in zip(values, results):
        if isinstance(r, IntegrationError):
            man.failures.append({key: v, "error": str(r), "last_time": r.last_time})

    single = config.sweep is None
    if "trajectory" in config.emit:
        for i, r in ok:
            name = "trajectory.csv" if single else f"trajectories/trajectory_{i:03d}.csv"
            man.add(_write_trajectory(out / name, r))
    if "protocol" in config.emit:
        if single and ok:
            man.add(write_json(out / "protocol.json", ok[0][1].summary()))
        elif not single:
            man.add(write_json(out / "protocol.json", [r.summary() for _, r in ok]))
            header = (key, "lambda_c", "n_c", "lz_prediction", "lambda_l", "n_l", "b_final", "t_s", "terminated")
            man.add(write_csv(out / "summary.csv", header,
                              ([r.summary()[h] for h in header] for _, r in ok)))
    man.write("integration_error" if man.failures else "ok")
    for _, r in ok:
        s = r.summary()
        print(f"{key}={s[key]:.6g} lambda_c={s['lambda_c']:.6g} n_c={s['n_c']:.6g} "
              f"lambda_l={s['lambda_l']:.6g} n_l={s['n_l']:.6g} {s['terminated']}")
    if man.failures:
        for f in man.failures:
            print(f"integration failed at {key}={f[key]:.6g}: {f['error']}", file=sys.stderr)
        return EXIT_INTEGRATION
    return EXIT_OK


# --------------------------------------------------------------------------
# analyze
# --------------------------------------------------------------------------


def cmd_analyze(config: RunConfig, workers: int = 1) -> int:
    model = _model(config)
    if config.sweep is not None:
        if config.sweep.control != "b_eff":
            raise ConfigError("analyze sweeps b_eff")
        grid = config.sweep.grid()
    else:
        grid = np.linspace(0.0, model.b_x, 201)
    out = config.output_dir
    man = _Manifest(out, "analyze")
    if "observables" in config.emit:
        rows = observables_table(model, grid)
        man.add(write_csv(out / "observables.csv", ("b_eff", "x_ss", "x_ss_prime", "gap"),
                          ((o.b_eff, o.x_ss, o.x_ss_prime, o.gap) for o in rows)))
    gl = gap_location(model)
    cav = config.cavity
    report = {"gap_location": {"b_gap": gl.b_gap, "gap_min": gl.gap_min, "interior": gl.interior}}
    if cav.g != 0 and cav.delta_c != 0:
        rep = feasibility_check(model, cav)
        try:
            bifs = bifurcation_points(model, cav, Control.EPSILON)
        except EmptyResult:
            bifs = []
        report.update({
            "alpha": rep.alpha, "alpha_over_g2": rep.alpha_over_g2,
            "x_ss_prime_at_zero": rep.xp_at_zero, "x_ss_prime_max": rep.xp_max, "b_at_max": rep.b_at_xp_max,
            "eps_0": rep.eps_0, "eps_f": rep.eps_f,
            "conditions": {"negative_detuning": rep.negative_detuning, "bistable_window": rep.bistable_window,
                           "switching_order": rep.switching_order},
            "passed": rep.passed,
            "bifurcations": [{"eps": b.control_value, "b_eff": b.b_eff, "x": b.x} for b in bifs],
        })
    man.add(write_json(out / "feasibility.json", report))
    man.write("ok")
    print(f"gap minimum {gl.gap_min:.6g} at b_eff = {gl.b_gap:.6g}")
    if "alpha_over_g2" in report:
        print(f"alpha/g^2 = {report['alpha_over_g2']:.6g}, eps_0 = {report['eps_0']:.6g}, "
              f"eps_f = {report['eps_f']:.6g}, feasible = {report['passed']}")
    return EXIT_OK


# --------------------------------------------------------------------------
# ec
# --------------------------------------------------------------------------


def cmd_ec(args) -> int:
    if args.instance:
        try:
            text = Path(args.instance).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read instance {args.instance}: {exc.strerror}") from None
        inst = parse_ec_clauses(text)
    elif args.generate:
        n, m = args.generate
        inst = generate_ec_instance(n, m, args.seed, require_unique=args.unique)
    else:
        raise ConfigError("ec needs --instance or --generate N M")
    counts = violation_table(inst.n_qubits, inst.clauses)
    hist = Counter(int(c) for c in counts)
    spec = ModelSpec(ModelKind.EC, args.bx, args.j0, inst.n_qubits, clauses=inst.clauses)
    gl = gap_location(build_model(spec))
    report = {
        "n_qubits": inst.n_qubits,
        "clauses": [[i + 1 for i in c.qubit_indices] for c in inst.clauses],
        "solutions": list(inst.solution_strings),
        "satisfiable": bool(inst.solutions),
        "violation_histogram": {str(k): hist[k] for k in sorted(hist)},
        "gap_location": {"b_gap": gl.b_gap, "gap_min": gl.gap_min, "interior": gl.interior},
    }
    print(inst.to_text(), end="")
    if inst.solutions:
        print("solutions: " + ", ".join(inst.solution_strings))
    else:
        print("solutions: none (unsatisfiable)")
    print("violations: " + ", ".join(f"{k}:{hist[k]}" for k in sorted(hist)))
    print(f"gap minimum {gl.gap_min:.6g} at b_eff = {gl.b_gap:.6g}")
    if args.out:
        out = Path(args.out)
        (out / "instance.txt").parent.mkdir(parents=True, exist_ok=True)
        (out / "instance.txt").write_text(inst.to_text(), encoding="utf-8")
        write_json(out / "ec.json", report)
    return EXIT_OK


# --------------------------------------------------------------------------
# argument handling
# --------------------------------------------------------------------------

COMMANDS = {"stationary": cmd_stationary, "protocol": cmd_protocol, "analyze": cmd_analyze}


def _apply_overrides(config: RunConfig, args) -> RunConfig:
    changes = {}
    if args.out is not None:
        changes["output_dir"] = Path(args.out)
    sched = config.schedule
    if sched is not None and (args.dt is not None or args.tmax is not None):
        sched = replace(sched, **{k: v for k, v in (("dt", args.dt), ("t_max", args.tmax)) if v is not None})
        changes["schedule"] = sched
    if args.seed is not None:
        changes["model"] = replace(config.model, seed=args.seed)
    return replace(config, **changes) if changes else config


def _common(p: argparse.ArgumentParser, with_config: bool = True) -> None:
    if with_config:
        p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p.add_argument("--workers", type=int, default=1, help="worker processes for sweeps")
    p.add_argument("--dt", type=float, help="integration step")
    p.add_argument("--tmax", type=float, help="maximum integration time")
    p.add_argument("--seed", type=int, help="seed for random EC instances")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cavityaqc", description="Cavity-assisted adiabatic protocol toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("stationary", "stationary points and bifurcations over a control sweep"),
                            ("protocol", "switching-protocol dynamics"),
                            ("analyze", "ground-state observables and feasibility report")):
        _common(sub.add_parser(name, help=help_text))
    ec = sub.add_parser("ec", help="inspect or generate an exact-cover instance")
    src = ec.add_mutually_exclusive_group()
    src.add_argument("--instance", help="clause file")
    src.add_argument("--generate", nargs=2, type=int, metavar=("N", "M"), help="random instance")
    ec.add_argument("--unique", action="store_true", help="require a unique solution")
    ec.add_argument("--seed", type=int)
    ec.add_argument("--bx", type=float, default=0.5)
    ec.add_argument("--j0", type=float, default=0.25)
    ec.add_argument("--out")
    pre = sub.add_parser("preset", help="run a shipped configuration")
    pre.add_argument("name", nargs="?", help="preset name; omit with --list")
    pre.add_argument("--list", action="store_true")
    _common(pre, with_config=False)
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "ec":
            return cmd_ec(args)
        if args.command == "preset":
            if args.list or not args.name:
                print("\n".join(preset_names()))
                return EXIT_OK
            config = load_preset(args.name)
            command = config.command
            if command not in COMMANDS:
                raise ConfigError(f"preset {args.name} names unknown command {command!r}")
        else:
            config = load_config(args.config)
            command = args.command
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        config = _apply_overrides(config, args)
        return COMMANDS[command](config, workers=args.workers)
    except EmptyResult as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except IntegrationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    except (ConfigError, ParseError, GenerationFailed) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CavityAQCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
