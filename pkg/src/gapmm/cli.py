"""Command-line interface: the two experiment families plus trace export.

Exit codes: 0 success, 1 runtime failure, 2 usage error. All commands are
deterministic under --seed and write outputs only below --out.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from .ba.strategies import STRATEGIES, run_ba_benchmark
from .chl.problem import CHLProblem
from .data.bal import BALParseError, parse_bal
from .data.idx import IDXParseError, load_idx_dataset
from .data.synth import (
    ClassificationSpec,
    SyntheticBASpec,
    perturb_ba_theta,
    synth_ba,
    synth_classification,
)
from .drivers import (
    ReGeMMConfig,
    StochasticSuDeMMConfig,
    SuDeMMConfig,
    run_alternating_baseline,
    run_constant_memory_regemm,
    run_stochastic_sudemm,
    run_sudemm,
)
from .kernels import RobustKernel
from .schedules import ConstantSchedule, PowerSchedule

KERNEL_NAMES = {"stq": "smooth-truncated-quadratic",
                "quadratic": "quadratic",
                "welsch": "welsch"}
FULL_EVAL_PASSES = 32


def _parse_kv(spec: str, error):
    out = {}
    if not spec:
        return out
    for item in spec.split(","):
        if not item:
            continue
        if "=" not in item:
            error(f"expected key=value, got {item!r}")
        key, val = item.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def _dump_config(args, out_dir: Path, extra=None):
    if not getattr(args, "dump_config", False):
        return
    config = {k: v for k, v in vars(args).items() if k != "func"}
    config.update(extra or {})
    with open(out_dir / "config.json", "w") as fh:
        json.dump(config, fh, indent=2, sort_keys=True, default=str)


def _log(quiet: bool, message: str):
    if not quiet:
        print(message, file=sys.stderr)


# ---------------------------------------------------------------------------
# robust-fit


def _robust_fit_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="robust-fit",
        description="Robust bundle adjustment / nonlinear fitting experiments.")
    p.add_argument("--input", required=True,
                   help="BAL file path, or synthetic:c=8,p=200,obs=0.5,out=0.3,"
                        "noise=0.5,spread=30,mode=uniform,seed=1")
    p.add_argument("--kernel", choices=sorted(KERNEL_NAMES), default="stq")
    p.add_argument("--tau", type=float, default=1.0, help="kernel scale")
    p.add_argument("--strategy", choices=STRATEGIES, default="irls")
    p.add_argument("--rounds", type=int, default=100)
    p.add_argument("--eta", type=float, default=0.5)
    p.add_argument("--eta-prime", type=float, default=0.75)
    p.add_argument("--init-noise", type=float, default=1.0,
                   help="scale of the randomized initialization (synthetic only)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--dump-config", action="store_true")
    p.add_argument("--quiet", action="store_true")
    return p


def _load_ba_instance(args, error):
    kernel = RobustKernel(KERNEL_NAMES[args.kernel], args.tau)
    if args.input.startswith("synthetic:"):
        kv = _parse_kv(args.input[len("synthetic:"):], error)
        try:
            spec = SyntheticBASpec(
                cameras=int(kv.get("c", 8)),
                points=int(kv.get("p", 200)),
                observation_density=float(kv.get("obs", 0.5)),
                noise=float(kv.get("noise", 0.5)),
                outlier_fraction=float(kv.get("out", 0.3)),
                outlier_spread=float(kv.get("spread", 30.0)),
                outlier_mode=kv.get("mode", "uniform"),
                seed=int(kv.get("seed", args.seed)),
            )
        except (ValueError, KeyError) as exc:
            error(f"bad synthetic spec: {exc}")
        problem, theta_true = synth_ba(spec, kernel)
        theta0 = perturb_ba_theta(problem, theta_true,
                                  0.08 * args.init_noise, 0.5 * args.init_noise,
                                  0.4 * args.init_noise, seed=args.seed + 1)
        name = f"synthetic-seed{spec.seed}"
        return problem, theta0, name
    path = Path(args.input)
    if not path.exists():
        error(f"input file not found: {path}")
    try:
        with open(path) as fh:
            problem = parse_bal(fh, kernel)
    except BALParseError as exc:
        raise RuntimeError(f"failed to parse {path}: {exc}") from exc
    return problem, problem.pack(), path.stem


def cmd_robust_fit(argv) -> int:
    parser = _robust_fit_parser()
    args = parser.parse_args(argv)
    problem, theta0, name = _load_ba_instance(args, parser.error)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _dump_config(args, out_dir, {"instance": name})
    _log(args.quiet, f"robust-fit: {name} strategy={args.strategy} "
                     f"rounds={args.rounds} observations={problem.num_observations}")
    summary = run_ba_benchmark([(name, problem, theta0)], [args.strategy],
                               args.rounds, out_dir=out_dir,
                               threads=args.threads, eta=args.eta,
                               eta_prime=args.eta_prime)
    row = summary[0]
    if row["error"]:
        print(f"run failed: {row['error']}", file=sys.stderr)
        return 1
    _log(args.quiet, f"robust-fit: final cost {row['final_cost']:.6g} "
                     f"in {row['wall_ms']:.0f} ms")
    return 0


def robust_fit_main():
    sys.exit(cmd_robust_fit(sys.argv[1:]))


# ---------------------------------------------------------------------------
# chl-train


def _chl_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="chl-train",
        description="Contrastive training of the convex layered energy model.")
    p.add_argument("--arch", default="8-6-6-4",
                   help="layer sizes, e.g. 8-6-6-4 (input-...-output)")
    p.add_argument("--data", default="synthetic:moons",
                   help="synthetic:moons[,n=160,noise=0.08] or idx:<images>,<labels>")
    p.add_argument("--driver", default="sudemm",
                   help="sudemm | stochastic-sudemm | fixed:<passes> | regemm")
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--eta", type=float, default=0.5)
    p.add_argument("--batch", type=int, default=10,
                   help="mini-batch size for stochastic/fixed drivers; 0 = full batch")
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--max-passes", type=int, default=40)
    p.add_argument("--alpha", type=float, default=0.0,
                   help="stochastic step size scale; 0 = 1/per-term-curvature")
    p.add_argument("--alpha-power", type=float, default=0.0,
                   help="0 gives a constant step size (with a validation warning)")
    p.add_argument("--alpha-offset", type=float, default=1.0)
    p.add_argument("--rho-power", type=float, default=0.0,
                   help="0 gives a constant rho_t (with a validation warning)")
    p.add_argument("--init-scale", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--dump-config", action="store_true")
    p.add_argument("--quiet", action="store_true")
    return p


def _parse_arch(arch: str, error):
    try:
        sizes = tuple(int(tok) for tok in arch.split("-"))
    except ValueError:
        error(f"bad architecture {arch!r}")
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        error(f"bad architecture {arch!r}")
    return sizes


def _load_chl_data(args, sizes, error):
    if args.data.startswith("synthetic:"):
        rest = args.data[len("synthetic:"):]
        parts = rest.split(",", 1)
        if parts[0] != "moons":
            error(f"unknown synthetic dataset {parts[0]!r}")
        kv = _parse_kv(parts[1] if len(parts) > 1 else "", error)
        spec = ClassificationSpec(
            samples=int(kv.get("n", 160)),
            input_dim=sizes[0],
            classes=sizes[-1],
            noise=float(kv.get("noise", 0.08)),
            seed=int(kv.get("seed", args.seed)))
        return synth_classification(spec), "moons"
    if args.data.startswith("idx:"):
        rest = args.data[len("idx:"):]
        if "," not in rest:
            error("idx data needs two paths: idx:<images>,<labels>")
        images, labels = rest.split(",", 1)
        for path in (images, labels):
            if not Path(path).exists():
                error(f"data file not found: {path}")
        try:
            return load_idx_dataset(images, labels, sizes[-1]), Path(images).stem
        except IDXParseError as exc:
            raise RuntimeError(f"failed to load IDX data: {exc}") from exc
    error(f"unknown data source {args.data!r}")


def _parse_driver(driver: str, error):
    if driver in ("sudemm", "stochastic-sudemm", "regemm"):
        return driver, None
    if driver.startswith("fixed:"):
        try:
            passes = int(driver[len("fixed:"):])
        except ValueError:
            error(f"bad driver {driver!r}")
        if passes < 1:
            error("fixed:<passes> needs passes >= 1")
        return "fixed", passes
    error(f"unknown driver {driver!r}; expected sudemm, stochastic-sudemm, "
          f"fixed:<passes> or regemm")


def full_dataset_upper(problem: CHLProblem, theta,
                       passes: int = FULL_EVAL_PASSES) -> float:
    """Full-dataset upper bound after a fixed evaluation refinement."""
    up = problem.refine_upper(theta, problem.init_upper(theta), passes)
    return problem.upper_value(theta, up)


def cmd_chl_train(argv) -> int:
    parser = _chl_parser()
    args = parser.parse_args(argv)
    sizes = _parse_arch(args.arch, parser.error)
    samples, data_name = _load_chl_data(args, sizes, parser.error)
    driver, fixed_passes = _parse_driver(args.driver, parser.error)
    if args.epochs < 1:
        parser.error("epochs must be >= 1")

    problem = CHLProblem(sizes, samples)
    theta0 = problem.initial_theta(seed=args.seed, scale=args.init_scale)
    n = problem.num_terms
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _dump_config(args, out_dir, {"data": data_name, "samples": n})

    stochastic = driver == "stochastic-sudemm" or (driver == "fixed" and args.batch > 0)
    start = time.perf_counter()
    if stochastic:
        batch = min(args.batch if args.batch > 0 else 10, n)
        iters = args.epochs * math.ceil(n / batch)
        if args.alpha > 0:
            alpha_scale = args.alpha
        else:
            alpha_scale = 1.0 / problem.per_term_lipschitz_bound(theta0)
        alpha = (ConstantSchedule(alpha_scale) if args.alpha_power == 0.0 else
                 PowerSchedule(alpha_scale, args.alpha_power, args.alpha_offset))
        rho = (ConstantSchedule(args.rho) if args.rho_power == 0.0 else
               PowerSchedule(args.rho, args.rho_power))
        cfg = StochasticSuDeMMConfig(alpha=alpha, rho=rho, iterations=iters,
                                     batch_size=batch, seed=args.seed,
                                     max_passes=args.max_passes,
                                     fixed_passes=fixed_passes)
        _log(args.quiet, f"chl-train: {driver} batch={batch} iterations={iters} "
                         f"samples={n}")
        trace = run_stochastic_sudemm(problem, theta0, cfg)
    else:
        lipschitz = problem.estimate_lipschitz(theta0)
        iters = args.epochs
        _log(args.quiet, f"chl-train: {driver} full-batch iterations={iters} "
                         f"samples={n} L={lipschitz:.3g}")
        if driver == "sudemm":
            cfg = SuDeMMConfig(lipschitz=lipschitz, rho=args.rho,
                               iterations=iters, r_max=args.max_passes)
            trace = run_sudemm(problem, theta0, cfg)
        elif driver == "regemm":
            cfg = ReGeMMConfig(eta=args.eta, iterations=iters,
                               r_max=args.max_passes, theta_update="gradient",
                               lipschitz=lipschitz)
            trace = run_constant_memory_regemm(problem, theta0, cfg)
        else:  # fixed with --batch 0: full-batch alternation
            trace = run_alternating_baseline(problem, theta0, fixed_passes,
                                             iters, theta_update="gradient",
                                             lipschitz=lipschitz)
    wall_ms = 1000.0 * (time.perf_counter() - start)

    name = f"chl__{args.driver.replace(':', '-')}"
    trace.to_csv(out_dir / f"{name}.csv")
    final_upper = full_dataset_upper(problem, trace.theta_final)
    with open(out_dir / "summary.csv", "w", newline="") as fh:
        fh.write("instance,strategy,final_cost,rounds,wall_ms\n")
        fh.write(f"{data_name},{args.driver},{final_upper!r},{len(trace)},"
                 f"{wall_ms:.3f}\n")
    np.save(out_dir / f"{name}_theta.npy", trace.theta_final)
    _log(args.quiet, f"chl-train: final full-dataset upper bound {final_upper:.6g}"
                     f" ({len(trace)} iterations, {wall_ms:.0f} ms)")
    if trace.aborted:
        print(f"run aborted: {trace.stopped_reason}", file=sys.stderr)
        return 1
    return 0


def chl_train_main():
    sys.exit(cmd_chl_train(sys.argv[1:]))


# ---------------------------------------------------------------------------
# trace-export


def _trace_export_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="trace-export",
        description="Merge run traces into one tidy CSV for plotting.")
    p.add_argument("traces", nargs="+", help="trace CSV files (instance__strategy.csv)")
    p.add_argument("--out", required=True, help="merged CSV path")
    return p


def cmd_trace_export(argv) -> int:
    from .trace import CSV_COLUMNS, RunTrace

    parser = _trace_export_parser()
    args = parser.parse_args(argv)
    rows = []
    for path in args.traces:
        path = Path(path)
        if not path.exists():
            parser.error(f"trace file not found: {path}")
        stem = path.stem
        if "__" in stem:
            instance, strategy = stem.split("__", 1)
        else:
            instance, strategy = stem, ""
        try:
            records = RunTrace.read_csv(path)
        except ValueError as exc:
            print(f"schema mismatch: {exc}", file=sys.stderr)
            return 1
        for rec in records:
            for metric in CSV_COLUMNS[1:]:
                rows.append((instance, strategy, rec.t, metric,
                             getattr(rec, metric)))
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
    with open(args.out, "w", newline="") as fh:
        fh.write("instance,strategy,t,metric,value\n")
        for instance, strategy, t, metric, value in rows:
            fh.write(f"{instance},{strategy},{t},{metric},{float(value)!r}\n")
    return 0


# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = argparse.ArgumentParser(
        prog="gapmm",
        description="Adaptive-accuracy majorization-minimization experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("robust-fit", add_help=False)
    sub.add_parser("chl-train", add_help=False)
    sub.add_parser("trace-export", add_help=False)
    if not argv or argv[0] in ("-h", "--help"):
        parser.parse_args(argv or ["--help"])
        return 0
    command, rest = argv[0], argv[1:]
    if command == "robust-fit":
        return cmd_robust_fit(rest)
    if command == "chl-train":
        return cmd_chl_train(rest)
    if command == "trace-export":
        return cmd_trace_export(rest)
    parser.parse_args([command])
    return 2


if __name__ == "__main__":
    sys.exit(main())
