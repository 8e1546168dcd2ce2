"""Command-line entry point.

Subcommands: speed, verify, sample, simulate, variance. Every output is a JSON envelope
(version, command, config, seed, result) or its CSV projection, written to stdout, to
``--out``, or into the directory named by ``DIMERGROWTH_OUT``. Outputs carry no timestamps,
so identical arguments give byte-identical files.

Exit codes: 0 success, 1 validation error, 2 numerical failure, 3 statistical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__, harness, kernel
from .harness import ExperimentPlan, PlanError, StatReport, _jsonable
from .lattice import LatticeKind, Slope, check_slope
from .sampler import (Chain, InfeasibleWinding, baseline_config, default_sweeps, dump_config,
                      realized_slope)

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_STAT = 0, 1, 2, 3
OUT_ENV = "DIMERGROWTH_OUT"


class ValidationError(ValueError):
    pass


@dataclass
class RunConfig:
    """Validated arguments of one invocation; this is what gets embedded in outputs."""
    subcommand: str
    lattice: str = "hex"
    rho: tuple[float, float] = (1 / 3, 2 / 3)
    L: int = 64
    p: float = 1.0
    q: float = 0.0
    t_max: float = 200.0
    replicas: int = 32
    seed: int = 0
    out: str | None = None
    format: str = "json"
    extra: dict[str, Any] = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        if self.format not in ("json", "csv"):
            raise ValidationError(f"unknown format {self.format!r}")
        try:
            self.lattice = LatticeKind.parse(self.lattice).value
        except ValueError as exc:
            raise ValidationError(str(exc)) from exc
        if self.L < 1 or self.replicas < 1 or self.t_max <= 0:
            raise ValidationError("L, replicas and t must be positive")
        try:
            check_slope(LatticeKind.parse(self.lattice), Slope(*self.rho))
        except ValueError as exc:
            raise ValidationError(str(exc)) from exc
        return self

    def embedded(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("out")  # where the file went does not change its content
        d["rho"] = list(self.rho)
        return _jsonable(d)


# ---------------------------------------------------------------- output

def _csv_text(rows: list[list]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _flatten(prefix: str, x: Any, out: list[list]) -> None:
    if isinstance(x, dict):
        for k in sorted(x):
            _flatten(f"{prefix}.{k}" if prefix else str(k), x[k], out)
    elif isinstance(x, list) and x and isinstance(x[0], dict):
        pass  # tables are emitted separately
    else:
        out.append([prefix, json.dumps(x) if isinstance(x, list) else x])


def render(cfg: RunConfig, result: dict) -> str:
    envelope = {"version": __version__, "command": cfg.subcommand, "seed": cfg.seed,
                "config": cfg.embedded(), "result": _jsonable(result)}
    if cfg.format == "json":
        return json.dumps(envelope, indent=2, sort_keys=True) + "\n"
    # CSV: commented provenance header, key/value block, then any tables
    lines = [f"# dimergrowth {__version__} {cfg.subcommand} seed={cfg.seed}",
             "# config=" + json.dumps(envelope["config"], sort_keys=True)]
    kv: list[list] = [["key", "value"]]
    _flatten("", envelope["result"], kv)
    text = "\n".join(lines) + "\n" + _csv_text(kv)
    for name, table in _tables(envelope["result"]):
        keys = list(table[0])
        text += f"# table {name}\n" + _csv_text([keys] + [[r.get(k) for k in keys] for r in table])
    return text


def _tables(x: Any, prefix: str = ""):
    if isinstance(x, dict):
        for k in sorted(x):
            v = x[k]
            name = f"{prefix}.{k}" if prefix else str(k)
            if isinstance(v, list) and v and isinstance(v[0], dict):
                yield name, v
            else:
                yield from _tables(v, name)


def emit(cfg: RunConfig, result: dict, stream=None) -> str:
    text = render(cfg, result)
    target = cfg.out
    if target is None and os.environ.get(OUT_ENV):
        target = str(Path(os.environ[OUT_ENV]) / f"{cfg.subcommand}.{cfg.format}")
    if target is None:
        (stream or sys.stdout).write(text)
    else:
        Path(target).parent.mkdir(parents=True, exist_ok=True)
        Path(target).write_text(text)
    return text


# ---------------------------------------------------------------- subcommands

def cmd_speed(cfg: RunConfig, args) -> tuple[int, dict]:
    kind = LatticeKind.parse(cfg.lattice)
    rho = Slope(*cfg.rho)
    res: dict[str, Any] = {}
    if kind is LatticeKind.HONEYCOMB:
        a = kernel.hex_weights(rho)
        res["speed"] = kernel.speed_hex(rho)
        res["weights"] = [a.a1, a.a2, a.a3]
        res["densities"] = [kernel.hex_density(a, d) for d in range(3)]
    else:
        B = kernel.B_of_slope(rho)
        om = kernel.omega_c(B)
        res["speed"] = kernel.speed_z2(rho)
        res["omega_c"] = [om.real, om.imag]
        res["fields"] = [B.B1, B.B2]
        res["densities"] = list(kernel.domino_densities(B))
        if args.series:
            s = kernel.speed_z2_series(rho, args.series)
            res["series"] = {"N": args.series, "value": s, "gap": abs(s - res["speed"])}
    if not all(math.isfinite(x) for x in [res["speed"], *res["densities"]]):
        return EXIT_NUMERIC, res
    return EXIT_OK, res


def cmd_verify(cfg: RunConfig, args) -> tuple[int, dict]:
    checks = harness.verification_suite(hessian_grid=args.hessian_grid,
                                        break_orientation=args.break_orientation,
                                        seed=cfg.seed)
    rows = [{"name": c.name, "ok": c.ok, "value": c.value,
             "details": json.dumps(_jsonable(c.details), sort_keys=True)} for c in checks]
    failed = [c.name for c in checks if not c.ok]
    return (EXIT_NUMERIC if failed else EXIT_OK), {"passed": not failed, "failed": failed,
                                                   "checks": rows}


def _report(rep: StatReport) -> dict:
    d = rep.to_dict()
    d.pop("plan", None)
    d.pop("version", None)
    d["z"] = rep.z
    return d


def cmd_sample(cfg: RunConfig, args) -> tuple[int, dict]:
    kind = LatticeKind.parse(cfg.lattice)
    rho = Slope(*cfg.rho)
    sweeps = default_sweeps(cfg.L) if args.sweeps == "auto" else int(args.sweeps)
    rep = harness.density_check(kind, rho, cfg.L, args.samples, seed=cfg.seed,
                                warmup=sweeps, spacing=args.spacing)
    res = {"sweeps": sweeps, "densities": _report(rep)}
    if args.snapshot:
        chain = Chain.from_config(baseline_config(kind, cfg.L, rho))
        chain.sweep(sweeps, cfg.seed)
        dump_config(chain.config(), args.snapshot)
        res["snapshot"] = Path(args.snapshot).name
    return (EXIT_OK if rep.passed else EXIT_STAT), res


def _plan(cfg: RunConfig, args, **kw) -> ExperimentPlan:
    base = {k: v for k, v in (args.plan_dict or {}).items() if k != "workers"}
    base.update(kind=cfg.lattice, L=cfg.L, rho=cfg.rho, p=cfg.p, q=cfg.q, t_max=cfg.t_max,
                replicas=cfg.replicas, seed=cfg.seed, workers=args.workers)
    base.update(kw)
    return ExperimentPlan.from_dict(base)


def cmd_simulate(cfg: RunConfig, args) -> tuple[int, dict]:
    plan = _plan(cfg, args)
    rep = harness.estimate_speed(plan)
    pred = rep.prediction
    if pred == 0:
        ok = bool(rep.passed)
    else:
        ok = bool(abs(rep.estimate - pred) <= args.rel_tol * abs(pred))
    res = _report(rep)
    res["details"].pop("per_replica", None)
    res["passed"] = ok
    res["realized_slope"] = list(realized_slope(plan.lattice, plan.L, plan.slope).as_tuple())
    if args.event_log:
        from .dynamics import run
        s = harness.initial_state(plan, 0)
        log, _ = run(s, plan.rates, min(plan.t_max, args.event_log_t), harness._rng(plan, 9, 0),
                     log_capacity=args.event_log_cap)
        log.to_csv(args.event_log)
        res["event_log"] = {"file": Path(args.event_log).name, "jumps": len(log.time),
                            "truncated": log.truncated}
    return (EXIT_OK if ok else EXIT_STAT), res


def cmd_variance(cfg: RunConfig, args) -> tuple[int, dict]:
    if args.mode == "field":
        sizes = args.sizes or [8, 16, 32]
        rep = harness.v_field_variance(Slope(*cfg.rho), sizes, args.samples, seed=cfg.seed,
                                       spacing=args.spacing)
    else:
        times = args.times or [10, 20, 40, 80, 160]
        plan = _plan(cfg, args, schedule=tuple(times), t_max=max(times))
        rep = harness.variance_growth(plan, enforce_cap=not args.no_cap)
    return (EXIT_OK if rep.passed else EXIT_STAT), _report(rep)


COMMANDS = {"speed": cmd_speed, "verify": cmd_verify, "sample": cmd_sample,
            "simulate": cmd_simulate, "variance": cmd_variance}


# ---------------------------------------------------------------- parsing

def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _sweeps(text: str) -> str:
    if text != "auto" and not text.isdigit():
        raise argparse.ArgumentTypeError("sweeps must be 'auto' or a non-negative integer")
    return text


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dimergrowth", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, L=64):
        p.add_argument("--lattice", default=None, help="hex or z2 (default hex)")
        p.add_argument("--rho", nargs=2, type=float, default=None, metavar=("RHO1", "RHO2"),
                       help="slope; default (1/3, 2/3) on hex, (0, 0) on z2")
        p.add_argument("--L", type=int, default=None, help=f"lattice side (default {L})")
        p.set_defaults(default_L=L)
        p.add_argument("--seed", type=int, default=None, help="default 0")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--out", default=None, help=f"output file (default: ${OUT_ENV}/ or stdout)")

    def growth(p):
        p.add_argument("--p", type=float, default=None, help="upward jump rate (default 1)")
        p.add_argument("--q", type=float, default=None, help="downward jump rate (default 0)")
        p.add_argument("--t", dest="t_max", type=float, default=None, help="default 200")
        p.add_argument("--replicas", type=int, default=None, help="default 32")
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
        p.add_argument("--plan", default=None, help="JSON experiment plan (flags override it)")

    p = sub.add_parser("speed", help="closed-form growth speed, densities, Omega_c")
    common(p)
    p.add_argument("--series", type=int, default=0, help="also evaluate the current series to N terms")

    p = sub.add_parser("verify", help="finite-graph identities and kernel cross-checks")
    common(p)
    p.add_argument("--hessian-grid", type=int, default=0)
    p.add_argument("--break-orientation", action="store_true", help=argparse.SUPPRESS)

    p = sub.add_parser("sample", help="torus MCMC and dimer densities vs the kernel")
    common(p, L=24)
    p.add_argument("--sweeps", type=_sweeps, default="auto")
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--spacing", type=int, default=10)
    p.add_argument("--snapshot", default=None, help="write one sampled configuration here")

    p = sub.add_parser("simulate", help="growth dynamics and speed estimate")
    common(p)
    growth(p)
    p.add_argument("--rel-tol", type=float, default=0.02)
    p.add_argument("--event-log", default=None, help="CSV event log of replica 0")
    p.add_argument("--event-log-t", type=float, default=10.0)
    p.add_argument("--event-log-cap", type=int, default=1_000_000)

    p = sub.add_parser("variance", help="V-field variance table or current variance growth")
    common(p)
    growth(p)
    p.add_argument("--mode", choices=("field", "growth"), default="field")
    p.add_argument("--sizes", type=_int_list, default=None,
                   help="field mode: comma-separated L values (also accepted via --L 8,16,32)")
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--spacing", type=int, default=20)
    p.add_argument("--times", type=_int_list, default=None)
    p.add_argument("--no-cap", action="store_true", help="allow t beyond the t/L cap")
    return ap


def _preprocess(argv: list[str]) -> list[str]:
    # `variance --L 8,16,32` names a size list
    out = list(argv)
    if out and out[0] == "variance" and "--L" in out:
        i = out.index("--L")
        if i + 1 < len(out) and "," in out[i + 1]:
            out[i:i + 2] = ["--sizes", out[i + 1]]
    return out


def make_config(args) -> RunConfig:
    plan = {}
    if getattr(args, "plan", None):
        try:
            plan = json.loads(Path(args.plan).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read plan {args.plan}: {exc}") from exc
        if "config" in plan:  # an output envelope: reuse its embedded run settings
            c = plan["config"]
            plan = {"kind": c["lattice"], **{k: c[k] for k in
                                             ("rho", "L", "p", "q", "t_max", "replicas", "seed")}}
    args.plan_dict = plan
    lattice = args.lattice or plan.get("kind", "hex")
    kind = LatticeKind.parse(lattice)
    rho = args.rho or plan.get("rho") or ((1 / 3, 2 / 3) if kind is LatticeKind.HONEYCOMB else (0.0, 0.0))
    extra = {k: v for k, v in vars(args).items()
             if k not in {"command", "lattice", "rho", "L", "seed", "format", "out", "plan",
                          "plan_dict", "workers", "p", "q", "t_max", "replicas",
                          "break_orientation", "default_L"}}
    if plan:
        extra["plan"] = plan
    if getattr(args, "break_orientation", False):
        extra["break_orientation"] = True
    # explicit flag, then plan file, then built-in default
    defaults = {"L": args.default_L, "seed": 0, "p": 1.0, "q": 0.0, "t_max": 200.0, "replicas": 32}
    vals = {}
    for name, d in defaults.items():
        v = getattr(args, name, None)
        vals[name] = v if v is not None else plan.get(name, d)
    cfg = RunConfig(subcommand=args.command, lattice=lattice, rho=tuple(float(r) for r in rho),
                    out=args.out, format=args.format, extra=_jsonable(extra), **vals)
    return cfg.validate()


def main(argv: Sequence[str] | None = None) -> int:
    argv = _preprocess(list(sys.argv[1:] if argv is None else argv))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        cfg = make_config(args)
        code, result = COMMANDS[args.command](cfg, args)
    except (ValidationError, PlanError, InfeasibleWinding, ValueError) as exc:
        print(f"dimergrowth: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ArithmeticError, np.linalg.LinAlgError, kernel.QuadratureError) as exc:
        print(f"dimergrowth: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    emit(cfg, result)
    return code


if __name__ == "__main__":
    sys.exit(main())
