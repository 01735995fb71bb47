"""Command-line surface: kernel checks, closed forms, oracle, flows, experiments.

Exit codes: 0 success, 2 configuration error, 3 solver divergence,
4 invariant violation (e.g. a jump-count bound exceeded).
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import experiments as experiments_mod
from . import oracle as oracle_mod
from .errors import ConfigError, DivergenceError, InvariantViolation
from .exact import (
    critical_lambda,
    equal_jump_verdict,
    jump_bounds,
    uniform_step_energy,
)
from .experiments import EXPERIMENTS, ExperimentSpec, generate_signal, plot_record, run_experiment
from .flow import MODELS, FlowParams, run
from .kernel import JumpKernel, check_conditions, derive_constants
from .pwc import (
    GridSignal,
    LinearData,
    PiecewiseConstant,
    SampledData,
    SineData,
    StepListData,
)


def _print_json(obj) -> None:
    json.dump(obj, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _kernel_from_args(args) -> JumpKernel:
    cfg = {"kind": args.kind}
    if args.kind == "kwc":
        cfg["kappa"] = args.kappa
    elif args.kind == "potts":
        cfg["height"] = args.height
    return JumpKernel.from_config(cfg)


def _load_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as err:
        raise ConfigError(f"invalid JSON in {path}: {err}")


def data_from_config(cfg: dict):
    """Analytic or sampled data description -> data object."""
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError("data config must be an object with a 'kind'")
    kind = cfg["kind"]
    domain = tuple(cfg.get("domain", (0.0, 1.0)))
    if kind == "linear":
        return LinearData(domain, slope=cfg.get("slope", 1.0), intercept=cfg.get("intercept", 0.0))
    if kind == "sine":
        return SineData(
            domain,
            amplitude=cfg.get("amplitude", 1.0),
            omega=cfg.get("omega", 3.0 * np.pi),
        )
    if kind == "steps":
        return StepListData(PiecewiseConstant.from_json_dict(cfg["steps"]))
    if kind == "csv":
        return SampledData(GridSignal.from_csv(cfg["path"]))
    if kind == "generator":
        sig = generate_signal(cfg["name"], n=int(cfg.get("n", 1000)), seed=int(cfg.get("seed", 0)))
        return SampledData(sig)
    raise ConfigError(f"unknown data kind {kind!r}")


def signal_from_config(cfg: dict, n_default: int = 1000) -> GridSignal:
    """Grid-signal description -> GridSignal (generator, csv, or sampled pwc)."""
    if not isinstance(cfg, dict):
        raise ConfigError("signal config must be an object")
    if "generator" in cfg:
        return generate_signal(
            cfg["generator"], n=int(cfg.get("n", n_default)), seed=int(cfg.get("seed", 0))
        )
    if "csv" in cfg:
        return GridSignal.from_csv(cfg["csv"])
    if "pwc" in cfg:
        pwc = PiecewiseConstant.from_json_dict(cfg["pwc"])
        return pwc.sample(int(cfg.get("n", n_default)))
    raise ConfigError("signal config needs one of: generator, csv, pwc")


# ---------------------------------------------------------------------------
# Subcommand handlers.


def _cmd_check_kernel(args) -> int:
    kernel = _kernel_from_args(args)
    report = check_conditions(kernel, args.M, samples=args.samples)
    out = {"report": report.to_json_dict()}
    try:
        constants = derive_constants(kernel, args.M)
        out["constants"] = {
            "mass_cap": constants.mass_cap,
            "split_gain": constants.split_gain,
            "linear_floor": constants.linear_floor,
            "bound_rate": constants.bound_rate,
        }
    except Exception as err:  # noqa: BLE001 - reported, not fatal
        out["constants"] = None
        out["constants_error"] = str(err)
    _print_json(out)
    return 0


def _cmd_exact_bounds(args) -> int:
    kernel = _kernel_from_args(args)
    report = jump_bounds(kernel, args.a, args.b, args.lam, args.M)
    _print_json(report.to_json_dict())
    return 0


def _cmd_exact_critical(args) -> int:
    _print_json(critical_lambda(args.L).to_json_dict())
    return 0


def _cmd_exact_energy_table(args) -> int:
    kernel = _kernel_from_args(args)
    lines = ["m,E"]
    for m in range(1, args.m_max + 1):
        lines.append(f"{m},{uniform_step_energy(args.L, m, args.lam, kernel):.17g}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_exact_verdict(args) -> int:
    kernel = _kernel_from_args(args)
    _print_json(equal_jump_verdict(kernel, args.c, args.lam).to_json_dict())
    return 0


def _problem_from_config(cfg: dict) -> oracle_mod.OracleProblem:
    for key in ("kernel", "lam", "data"):
        if key not in cfg:
            raise ConfigError(f"oracle config needs '{key}'")
    data = data_from_config(cfg["data"])
    pin = cfg.get("endpoint_pin")
    if pin is True:
        a, b = data.domain
        pin = (float(data(a)), float(data(b)))
    elif pin is not None:
        pin = (float(pin[0]), float(pin[1]))
    kwargs = {}
    for key in ("n_cells", "n_levels"):
        if cfg.get(key) is not None:
            kwargs[key] = int(cfg[key])
    if cfg.get("levels") is not None:
        kwargs["levels"] = [float(v) for v in cfg["levels"]]
    if cfg.get("tie_tolerance") is not None:
        kwargs["tie_tolerance"] = float(cfg["tie_tolerance"])
    return oracle_mod.OracleProblem(
        data=data,
        kernel=JumpKernel.from_config(cfg["kernel"]),
        lam=float(cfg["lam"]),
        endpoint_pin=pin,
        **kwargs,
    )


def _cmd_oracle_solve(args) -> int:
    cfg = _load_json(args.config)
    problem = _problem_from_config(cfg)
    result = oracle_mod.solve(problem, tie_scan_jumps=args.tie_scan)
    _print_json(result.to_json_dict())
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "result.json", "w", encoding="utf-8") as fh:
            json.dump(result.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        n = problem.resolved_cells()
        a, b = problem.data.domain
        mids = (np.arange(n) + 0.5) * (b - a) / n + a
        vals = result.minimizer(mids)
        with open(out / "minimizer.csv", "w", encoding="utf-8") as fh:
            fh.write("x,u\n")
            for xi, ui in zip(mids, vals):
                fh.write(f"{xi:.17g},{ui:.17g}\n")
    return 0


def _cmd_flow_run(args) -> int:
    cfg = _load_json(args.config)
    if "params" not in cfg:
        raise ConfigError("flow config needs 'params'")
    pcfg = dict(cfg["params"])
    if "model" not in pcfg:
        raise ConfigError("flow params need 'model'")
    pcfg["model"] = str(pcfg["model"]).lower()
    try:
        params = FlowParams(**pcfg)
    except TypeError as err:
        raise ConfigError(f"bad flow params: {err}")
    if "data" not in cfg:
        raise ConfigError("flow config needs 'data'")
    g = signal_from_config(cfg["data"], n_default=params.n)
    if g.n != params.n:
        params = FlowParams(**{**pcfg, "n": g.n})
    u0 = signal_from_config(cfg["u0"], n_default=params.n) if "u0" in cfg else g
    result = run(g, u0, params)
    threshold = float(cfg.get("census_threshold", experiments_mod.STRUCTURE_THRESHOLD))
    paths = experiments_mod.write_flow_artifacts(result, args.out, census_threshold=threshold)
    _print_json({"steady": result.steady, "steps": result.steps, "artifacts": paths})
    return 0


def _cmd_experiment(args) -> int:
    overrides = {}
    for key in ("lam", "n", "t_max"):
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None:
            overrides[key] = value
    spec = ExperimentSpec(
        name=args.name,
        data=args.data or "",
        models=tuple(args.models or ()),
        overrides=overrides,
        seed=args.seed,
    )
    record = run_experiment(spec, out_dir=args.out)
    if args.out:
        plot_record(record, args.out)
    _print_json(record.summary)
    return 0


# ---------------------------------------------------------------------------
# Parser.


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kwcseg",
        description="1D variational segmentation: kernels, exact results, oracle, flows.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_kernel_flags(p, need_m=True):
        p.add_argument("--kind", choices=("kwc", "linear", "potts"), default="kwc")
        p.add_argument("--kappa", type=float, default=1.0, help="kwc curvature parameter")
        p.add_argument("--height", type=float, default=1.0, help="potts jump cost")
        if need_m:
            p.add_argument("--M", type=float, required=True, help="jump-mass cap (data oscillation)")

    pk = sub.add_parser("check-kernel", help="report kernel admissibility conditions")
    add_kernel_flags(pk)
    pk.add_argument("--samples", type=int, default=2000)
    pk.set_defaults(func=_cmd_check_kernel)

    pe = sub.add_parser("exact", help="closed-form quantities")
    esub = pe.add_subparsers(dest="exact_command", required=True)

    pb = esub.add_parser("bounds", help="jump-count bounds for a data window")
    add_kernel_flags(pb)
    pb.add_argument("--a", type=float, default=0.0)
    pb.add_argument("--b", type=float, default=1.0)
    pb.add_argument("--lambda", dest="lam", type=float, required=True)
    pb.set_defaults(func=_cmd_exact_bounds)

    pc = esub.add_parser("critical-lambda", help="fidelity weight with tied 1- and 2-jump optima")
    pc.add_argument("--L", type=float, required=True)
    pc.set_defaults(func=_cmd_exact_critical)

    pt = esub.add_parser("energy-table", help="uniform-ladder energy per unit length vs jump count")
    add_kernel_flags(pt, need_m=False)
    pt.add_argument("--L", type=float, required=True)
    pt.add_argument("--lambda", dest="lam", type=float, required=True)
    pt.add_argument("--m-max", type=int, required=True)
    pt.add_argument("--out", default=None)
    pt.set_defaults(func=_cmd_exact_energy_table)

    pv = esub.add_parser("verdict", help="equal-jump forcing verdict for a symmetric split")
    add_kernel_flags(pv, need_m=False)
    pv.add_argument("--c", type=float, required=True, help="common jump size")
    pv.add_argument("--lambda", dest="lam", type=float, required=True)
    pv.set_defaults(func=_cmd_exact_verdict)

    po = sub.add_parser("oracle", help="discretized global minimization")
    osub = po.add_subparsers(dest="oracle_command", required=True)
    ps = osub.add_parser("solve", help="solve a problem config")
    ps.add_argument("--config", required=True)
    ps.add_argument("--tie-scan", type=int, default=None, help="scan jump counts 0..N for ties")
    ps.add_argument("--out", default=None)
    ps.set_defaults(func=_cmd_oracle_solve)

    pf = sub.add_parser("flow", help="gradient-flow runs")
    fsub = pf.add_subparsers(dest="flow_command", required=True)
    pr = fsub.add_parser("run", help="run a flow config")
    pr.add_argument("--config", required=True)
    pr.add_argument("--out", required=True)
    pr.set_defaults(func=_cmd_flow_run)

    px = sub.add_parser("experiment", help="named experiment protocols")
    px.add_argument("name", choices=EXPERIMENTS + ("custom",))
    px.add_argument("--seed", type=int, default=0)
    px.add_argument("--out", default=None)
    px.add_argument("--models", nargs="*", choices=MODELS, default=None)
    px.add_argument("--data", default=None, help="generator name (custom only)")
    px.add_argument("--lam", type=float, default=None)
    px.add_argument("--n", type=int, default=None)
    px.add_argument("--t-max", dest="t_max", type=float, default=None)
    px.set_defaults(func=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DivergenceError as err:
        print(f"divergence: {err}", file=sys.stderr)
        return 3
    except InvariantViolation as err:
        print(f"invariant violation: {err}", file=sys.stderr)
        return 4
    except (ConfigError, ValueError, KeyError, OSError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
