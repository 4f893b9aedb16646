"""Command-line entry point: ``rscnet <subcommand> [flags]``.

Exit codes: 0 success, 1 a checked inequality failed, 2 I/O or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from . import _kernels
from .activation import NAMES
from .bounds import BoundContext
from .data import DataFormatError, Dataset, find_idx_pair, load_cifar10, load_csv, load_idx, subsample, synthetic
from .hermite import coefficient_table, lambda1_estimate, ntk_lower_bound_constants
from .network import NetworkConfig, init, save_params
from .ntk import layer_gram_concentration, ntk_gram, ntk_min_eig_bound
from .trainer import (
    DivergenceError,
    TrainConfig,
    gradient_bound_checks,
    min_gbar_over_run,
    train,
    verify_one_step_inequalities,
    write_log_csv,
)
from .verify import perturb_in_ball, verify_appendix_A, verify_hessian_bound

EXIT_OK, EXIT_FAIL, EXIT_IO = 0, 1, 2
TRAJECTORY_HEADER = ["t", "gbar_norm", "loss"]
SWEEP_HEADER = ["width", "min_gbar_norm_mean", "min_gbar_norm_std"]
DATA_ENV = {"mnist": "RSC_MNIST_DIR", "fashion": "RSC_FASHION_MNIST_DIR", "cifar": "RSC_CIFAR10_BATCH"}


class ConfigError(ValueError):
    pass


def read_config_file(path: str | Path) -> dict[str, str]:
    """``key = value`` lines with ``#`` comments, or a manifest.json written by a previous run."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        cfg = json.loads(text).get("config", {})
        return {k: v for k, v in cfg.items() if k not in ("command", "config", "out")}
    out: dict[str, str] = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _config_argv(sub: argparse.ArgumentParser, cfg: dict) -> list[str]:
    by_dest = {a.dest: a for a in sub._actions if a.option_strings}
    argv: list[str] = []
    for key, value in cfg.items():
        action = by_dest.get(key)
        if action is None or key in ("config", "out", "help"):
            raise ConfigError(f"unknown config key {key!r}")
        flag = action.option_strings[-1]
        if isinstance(action, argparse._StoreTrueAction):
            if str(value).lower() in ("1", "true", "yes"):
                argv.append(flag)
            continue
        if isinstance(value, list):
            argv.append(flag)
            argv.extend(str(v) for v in value)
        elif value is not None:
            argv.extend([flag, str(value)])
    return argv


def _add_net_flags(p: argparse.ArgumentParser, width: int = 128, depth: int = 3) -> None:
    p.add_argument("--width", type=int, default=width)
    p.add_argument("--depth", type=int, default=depth)
    p.add_argument("--activation", choices=NAMES, default="tanh")
    p.add_argument("--sigma1", type=float, default=1.0)
    p.add_argument("--sigma0-rule", choices=["sharp", "conservative"], default="sharp")
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--rho1", type=float, default=1.0)


def _add_data_flags(p: argparse.ArgumentParser, flag: str = "--data", n_flag: str = "--n", n: int = 512) -> None:
    p.add_argument(flag, choices=["synthetic", "mnist", "fashion", "cifar", "csv"], default="synthetic")
    p.add_argument("--data-path", default=None)
    p.add_argument(n_flag, type=int, default=n)
    p.add_argument("--input-dim", type=int, default=784, help="dimension of synthetic inputs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rscnet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    def sub(name: str, help_: str) -> argparse.ArgumentParser:
        p = subs.add_parser(name, help=help_)
        p.add_argument("--config", default=None, help="key = value file or a manifest.json to replay")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=0)
        return p

    p = sub("train", "full-batch GD with monitoring; writes train_log.csv")
    _add_net_flags(p)
    _add_data_flags(p)
    p.add_argument("--max-iters", type=int, default=3000)
    p.add_argument("--loss-target", type=float, default=1e-3)
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=None, help="override the step size omega/beta")
    p.add_argument("--monitor-every", type=int, default=1)

    p = sub("verify", "bound-vs-empirical reports as a JSON array")
    _add_net_flags(p, width=64, depth=2)
    p.add_argument("--input-dim", type=int, default=8)
    p.add_argument("--n-inputs", type=int, default=4)
    p.add_argument("--perturbations", type=int, default=1)
    p.add_argument("--tensors", action="store_true", help="also estimate the (2,2,1) tensor norms")

    p = sub("ntk", "NTK Gram, its minimum eigenvalue and the lower bound as JSON")
    _add_net_flags(p, width=512, depth=2)
    p.add_argument("--input-dim", type=int, default=32)
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--samples", type=int, default=4096)
    p.add_argument("--concentration-seeds", type=int, default=10)

    p = sub("hermite", "Hermite coefficient table as CSV")
    p.add_argument("--activation", choices=NAMES, default="tanh")
    p.add_argument("--variance", type=float, default=1.0)
    p.add_argument("--order", type=int, default=12)

    p = sub("bounds", "closed-form constants as JSON")
    _add_net_flags(p, width=1024, depth=3)
    p.add_argument("--gamma-target", type=float, default=None, help="use this gamma instead of sigma1 + rho/sqrt(m)")
    p.add_argument("--beta-phi", type=float, default=None)
    p.add_argument("--phi0-abs", type=float, default=None)
    p.add_argument("--label-sq-mean", type=float, default=1.0, help="mean of y^2 used in the loss constants")

    p = sub("experiment-rsc", "width sweep of min_t ||gbar_t|| over seeds")
    _add_data_flags(p, flag="--dataset", n_flag="--subset")
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--activation", choices=NAMES, default="tanh")
    p.add_argument("--sigma1", type=float, default=1.0)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--rho1", type=float, default=1.0)
    p.add_argument("--widths", type=int, nargs="+", default=[64, 128, 256, 512, 1024, 2048])
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--max-iters", type=int, default=3000)
    p.add_argument("--loss-target", type=float, default=1e-3)
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--monitor-every", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    return parser


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    if args.config:
        sub = parser._subparsers._group_actions[0].choices[args.command]
        try:
            cfg = read_config_file(args.config)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        extra = _config_argv(sub, cfg)
        # config values go first so explicit flags win
        pos = argv.index(args.command) + 1
        args = parser.parse_args(argv[:pos] + extra + argv[pos:])
    return args


def write_manifest(out: Path, args: argparse.Namespace) -> None:
    cfg = {k: v for k, v in vars(args).items() if k not in ("config", "out")}
    manifest = {"program": "rscnet", "version": __version__, "kernel_backend": _kernels.BACKEND, "config": cfg}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out or f"rscnet_{args.command}")
    out.mkdir(parents=True, exist_ok=True)
    return out


def load_dataset(kind: str, path: str | None, n: int, seed: int, input_dim: int = 784) -> Dataset:
    if kind == "synthetic":
        return synthetic(n, input_dim, seed)
    path = path or os.environ.get(DATA_ENV.get(kind, ""), None)
    if not path:
        raise ConfigError(f"--data-path (or ${DATA_ENV.get(kind, 'path')}) is required for {kind}")
    if kind in ("mnist", "fashion"):
        ds = load_idx(*find_idx_pair(path, "train"))
    elif kind == "cifar":
        ds = load_cifar10(path)
    else:
        ds = load_csv(path)
    return subsample(ds, n, seed) if n < ds.n else ds


def _net(args: argparse.Namespace, d: int, **kw) -> NetworkConfig:
    return NetworkConfig(depth=args.depth, input_dim=d, width=args.width, activation=args.activation,
                         sigma1=args.sigma1, seed=args.seed, sigma0_rule=getattr(args, "sigma0_rule", "sharp"), **kw)


def cmd_train(args: argparse.Namespace) -> int:
    ds = load_dataset(args.data, args.data_path, args.n, args.seed, args.input_dim)
    out = _out_dir(args)
    write_manifest(out, args)
    cfg = _net(args, ds.d)
    tc = TrainConfig(max_iters=args.max_iters, loss_target=args.loss_target, omega=args.omega, rho=args.rho,
                     rho1=args.rho1, monitor_every=args.monitor_every, eta=args.eta)
    res = train(init(cfg), cfg, tc, ds.X, ds.y)
    write_log_csv(out / "train_log.csv", res.log)
    save_params(out / "params.bin", res.params, cfg)
    steps = verify_one_step_inequalities(res.log, res.ctx.beta)
    summary = {
        "stop_reason": res.stop_reason,
        "final_loss": res.log[-1].loss,
        "min_gbar_norm": min_gbar_over_run(res.log),
        "descent_violations": [s.t for s in steps if not s.holds],
        "alpha_nonpositive_steps": len(res.flags["alpha_nonpositive_steps"]),
        "ball_exit_steps": len(res.flags["ball_exit_steps"]),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary))
    return EXIT_FAIL if summary["descent_violations"] else EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    ds = synthetic(args.n_inputs, args.input_dim, args.seed)
    cfg = _net(args, args.input_dim)
    p0 = init(cfg)
    ctx = BoundContext.build(cfg, ds.y, rho=args.rho, rho1=args.rho1)
    points = [p0] + [perturb_in_ball(p0, args.rho, args.rho1, seed=args.seed + 1 + k)
                     for k in range(args.perturbations)]
    reports = []
    for k, p in enumerate(points):
        for r in [verify_hessian_bound(p, cfg, ctx, ds.X, theta0=p0)] + verify_appendix_A(
                p, cfg, ctx, ds.X, params0=p0, y=ds.y, tensors=args.tensors or None):
            d = r.to_dict()
            d["point"] = k
            reports.append(d)
    text = json.dumps(reports, indent=2)
    if args.out:
        out = _out_dir(args)
        write_manifest(out, args)
        (out / "verify.json").write_text(text + "\n")
    print(text)
    failed = [r for r in reports if not r["satisfied"] and not r["probabilistic"]]
    return EXIT_FAIL if failed else EXIT_OK


def cmd_ntk(args: argparse.Namespace) -> int:
    ds = synthetic(args.n, args.input_dim, args.seed)
    cfg = _net(args, args.input_dim, init_scheme="ntk")
    report = ntk_gram(init(cfg), cfg, ds.X)
    consts = ntk_lower_bound_constants(cfg.activation, cfg.sigma0, cfg.depth)
    lam1 = lambda1_estimate(ds.X, cfg.layer_std(1), cfg.activation, args.samples, args.seed)
    consts.lambda1, consts.lambda1_stderr = lam1.value, lam1.stderr
    check = ntk_min_eig_bound(report, consts)
    conc = layer_gram_concentration(cfg, ds.X, n_seeds=args.concentration_seeds, samples=args.samples,
                                    seed0=args.seed)
    payload = {
        "lambda_min": report.lambda_min_empirical,
        "lower_bound": check.bound,
        "lower_bound_paper_convention": check.bound_paper,
        "decomposition_gap": report.decomposition_gap,
        "per_layer_concentration": [{"layer": c.layer, "pass_fraction": c.pass_fraction} for c in conc[1:]],
    }
    text = json.dumps(payload, indent=2)
    if args.out:
        out = _out_dir(args)
        write_manifest(out, args)
        (out / "ntk.json").write_text(text + "\n")
    print(text)
    return EXIT_OK if check.satisfied else EXIT_FAIL


def cmd_hermite(args: argparse.Namespace) -> int:
    rows = coefficient_table(args.activation, args.variance, args.order)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["r", "mu_r", "mu_r_squared_cumsum"])
    for r, mu, cum in rows:
        w.writerow([r, repr(mu), repr(cum)])
    return EXIT_OK


def cmd_bounds(args: argparse.Namespace) -> int:
    cfg = _net(args, 1)
    y = np.array([math.sqrt(args.label_sq_mean)])
    ctx = BoundContext.build(cfg, y, rho=args.rho, rho1=args.rho1, gamma_override=args.gamma_target,
                             beta_phi=args.beta_phi, phi0_abs=args.phi0_abs)
    print(json.dumps(ctx.as_report(), indent=2))
    return EXIT_OK


def _sweep_cell(job: tuple) -> tuple[int, int, list[tuple[int, float, float]], float, int]:
    width, seed, X, y, kw = job
    cfg = NetworkConfig(depth=kw["depth"], input_dim=X.shape[1], width=width, activation=kw["activation"],
                        sigma1=kw["sigma1"], seed=seed)
    tc = TrainConfig(max_iters=kw["max_iters"], loss_target=kw["loss_target"], omega=kw["omega"], rho=kw["rho"],
                     rho1=kw["rho1"], eta=kw["eta"], monitor_every=kw["monitor_every"])
    res = train(init(cfg), cfg, tc, X, y)
    traj = [(r.t, r.gbar_norm, r.loss) for r in res.log]
    if kw["monitor_every"] > 1:
        traj = [(i, g, l) for i, (_, g, l) in enumerate(traj)]
    bad = sum(not s.holds for s in verify_one_step_inequalities(res.log, res.ctx.beta))
    bad += sum(not ok for ok in gradient_bound_checks(res.log, res.ctx.varrho))
    return width, seed, traj, min_gbar_over_run(res.log), bad


def seed_averaged_trajectory(trajs: list[list[tuple[int, float, float]]]) -> list[tuple[int, float, float]]:
    """Mean over seeds per step; a run that stopped early keeps its final values (its iterate is fixed)."""
    T = max(len(t) for t in trajs)
    g = np.array([[tr[min(i, len(tr) - 1)][1] for i in range(T)] for tr in trajs])
    loss = np.array([[tr[min(i, len(tr) - 1)][2] for i in range(T)] for tr in trajs])
    return [(i, float(g[:, i].mean()), float(loss[:, i].mean())) for i in range(T)]


def cmd_experiment_rsc(args: argparse.Namespace) -> int:
    ds = load_dataset(args.dataset, args.data_path, args.subset, args.seed, args.input_dim)
    out = _out_dir(args)
    write_manifest(out, args)
    kw = {k: getattr(args, k) for k in ("depth", "activation", "sigma1", "rho", "rho1", "max_iters", "loss_target",
                                        "omega", "eta", "monitor_every")}
    jobs = [(w, args.seed + s, ds.X, ds.y, kw) for w in args.widths for s in range(args.seeds)]
    start = time.perf_counter()
    cap = int(os.environ.get("RSC_OPTIM_THREADS", args.workers) or 1)
    workers = max(1, min(args.workers, cap))
    if workers == 1:
        results = [_sweep_cell(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_sweep_cell, jobs))
    violations = 0
    with open(out / "min_gbar_vs_width.csv", "w", newline="") as fh:
        sw = csv.writer(fh)
        sw.writerow(SWEEP_HEADER)
        for w in args.widths:
            cells = [r for r in results if r[0] == w]
            mins = np.array([c[3] for c in cells])
            violations += sum(c[4] for c in cells)
            with open(out / f"gbar_trajectory_m{w}.csv", "w", newline="") as tf:
                tw = csv.writer(tf)
                tw.writerow(TRAJECTORY_HEADER)
                for t, g, l in seed_averaged_trajectory([c[2] for c in cells]):
                    tw.writerow([t, repr(g), repr(l)])
            sw.writerow([w, repr(float(mins.mean())), repr(float(mins.std()))])
    summary = {"out": str(out), "cells": len(results), "inequality_violations": violations,
               "elapsed_s": time.perf_counter() - start, "workers": workers}
    (out / "sweep_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary))
    return EXIT_FAIL if violations else EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "verify": cmd_verify,
    "ntk": cmd_ntk,
    "hermite": cmd_hermite,
    "bounds": cmd_bounds,
    "experiment-rsc": cmd_experiment_rsc,
}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = parse_args(argv)
    except ConfigError as exc:
        print(f"rscnet: config error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SystemExit as exc:
        return EXIT_IO if exc.code not in (0, None) else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, DataFormatError, OSError) as exc:
        print(f"rscnet: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_IO
    except DivergenceError as exc:
        print(f"rscnet: training diverged: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        print(f"rscnet: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
