"""Config-driven experiment runner and the ``abc`` command.

::

    abc run CONFIG [--seed N] [--workers N] [--out DIR]
    abc presets list
    abc presets show NAME
    abc presets run NAME [--out DIR]
    abc oracle toy --kind uniform --delta 1 [--grid 2001] [--out FILE]
    abc oracle discrete --sigma 1.5 [--out FILE]

Output directory precedence: ``--out``, then ``$ABC_OUTPUT_DIR``, then the
config's ``[output] dir``.  Failures print one JSON object to stderr and
exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, parse_config
from .core import DiscretePrior, GaussianRandomWalk, GridRandomWalk, WeightedSample
from .errors import ConfigError
from .estimators import estimate_evidence
from .kernels import Gaussian, Product, make_kernel
from .mcmc import McmcConfig, run_chain
from .models import TOY_BOUNDS, DiscreteOracleModel, ToyPosterior, make_model
from .presets import PRESETS
from .rejection import RejectionConfig, run_rejection, run_weighted

__all__ = ["build_kernel", "run_experiment", "density_table", "write_samples_csv", "main", "OUTPUT_ENV"]

OUTPUT_ENV = "ABC_OUTPUT_DIR"


def build_kernel(cfg: ExperimentConfig, model):
    block = cfg.kernel
    family = block["family"]
    if family == "model":
        return model.rule
    dim = model.obs.dim
    c = block.get("c")
    if family == "gaussian":
        sigma = block.get("sigma")
        if sigma is None:
            sigma = [block["delta"] / math.sqrt(3.0)]
        if len(sigma) == 1:
            sigma = sigma * dim
        return Gaussian(sigma, c=c)
    if family == "product":
        children = []
        for part in block["children"].split(","):
            fam, _, val = part.strip().partition(":")
            children.append(Gaussian(float(val)) if fam == "gaussian" else make_kernel(fam, delta=float(val)))
        return Product(children, c=c)
    metric = block.get("metric", "euclidean")
    if metric == "max_relative":
        from .kernels import MaxRelativeMetric

        metric = MaxRelativeMetric(model.obs.values)
    return make_kernel(family, delta=block["delta"], metric=metric, dim=dim, c=c)


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v) -> str:
    return repr(float(v))


def write_samples_csv(path, sample: WeightedSample, rows=None):
    """``index,theta_0..theta_{p-1},weight[,x_0..]`` with round-trip exact floats."""
    rows = np.arange(len(sample)) if rows is None else rows
    p = sample.theta.shape[1]
    header = ["index"] + [f"theta_{i}" for i in range(p)] + ["weight"]
    if sample.x is not None:
        header += [f"x_{i}" for i in range(sample.x.shape[1])]
    lines = [",".join(header)]
    for out_i, i in enumerate(rows):
        fields = [str(out_i)] + [_fmt(v) for v in sample.theta[i]] + [_fmt(sample.weights[i])]
        if sample.x is not None:
            fields += [_fmt(v) for v in sample.x[i]]
        lines.append(",".join(fields))
    _atomic_write(Path(path), "\n".join(lines) + "\n")


def density_table(kind: str, delta: float, grid_points: int = 2001) -> np.ndarray:
    """``(grid_points, 2)`` array of ``theta`` and normalized toy posterior density."""
    grid = np.linspace(*TOY_BOUNDS, grid_points)
    return np.column_stack([grid, ToyPosterior(kind, delta).pdf(grid)])


def _write_table(path, table, header=("theta", "normalized_density")):
    lines = [",".join(header)] + [",".join(_fmt(v) for v in row) for row in table]
    _atomic_write(Path(path), "\n".join(lines) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def _resolve_out(cfg: ExperimentConfig, out_dir=None) -> Path:
    if out_dir is not None:
        return Path(out_dir)
    env = os.environ.get(OUTPUT_ENV)
    if env:
        return Path(env)
    return Path(cfg.output["dir"])


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Run one experiment and write its artifacts.

    Returns the diagnostics dictionary (also written as ``diagnostics.json``).
    Errors propagate; :func:`main` turns them into exit statuses.
    """
    out = _resolve_out(cfg, out_dir)
    model = make_model(cfg.model, **cfg.model_params)
    kernel = build_kernel(cfg, model)
    algo = cfg.algo
    keep_x = cfg.output.get("keep_x", True)
    started = time.perf_counter()
    diag = {"seed": cfg.seed, "algorithm": cfg.algorithm, "model": cfg.model, "artifacts": []}

    if cfg.algorithm in ("rejection", "weighted"):
        rcfg = RejectionConfig(
            kernel,
            n_target=algo.get("n_target") if cfg.algorithm == "rejection" else None,
            n_proposals=algo.get("n_proposals") if cfg.algorithm == "weighted" or "n_target" not in algo else None,
            seed=cfg.seed,
            workers=cfg.workers,
            batch_size=algo["batch_size"],
            keep_x=keep_x,
        )
        fn = run_rejection if cfg.algorithm == "rejection" else run_weighted
        sample = fn(model.prior, model.simulator, model.obs, rcfg)
        write_samples_csv(out / "samples.csv", sample)
        diag["artifacts"].append("samples.csv")
        diag["acceptance_rate"] = sample.acceptance_rate if cfg.algorithm == "rejection" else None
        diag["total_proposals"] = sample.meta["total_proposals"]
        diag["effective_sample_size"] = sample.effective_sample_size()
    elif cfg.algorithm in ("mcmc-c", "mcmc-d"):
        if isinstance(model.prior, DiscretePrior):
            proposal = GridRandomWalk(model.prior)
        else:
            scale = algo.get("proposal_scale", [1.0])
            proposal = GaussianRandomWalk(scale * model.prior.dim if len(scale) == 1 else scale)
        mcfg = McmcConfig(
            n_steps=algo["n_steps"], proposal=proposal, kernel=kernel, algorithm=cfg.algorithm[-1],
            burn_in=algo["burn_in"], thin=algo["thin"], seed=cfg.seed, n_chains=algo["n_chains"],
            workers=min(cfg.workers, algo["n_chains"]),
        )
        sample = run_chain(mcfg, model.prior, model.simulator, model.obs)
        if not keep_x:
            sample.x = None
        write_samples_csv(out / "samples.csv", sample)
        diag["artifacts"].append("samples.csv")
        chain = sample.meta["chain"]
        for k in range(mcfg.n_chains):
            name = f"samples_chain_{k}.csv"
            write_samples_csv(out / name, sample, rows=np.flatnonzero(chain == k))
            diag["artifacts"].append(name)
        diag["acceptance_rate"] = sample.meta["acceptance_rate"]
        diag["acceptance_rate_per_chain"] = sample.meta["acceptance_rate_per_chain"]
        diag["n_nonfinite"] = sample.meta["n_nonfinite"]
        diag["effective_sample_size"] = sample.effective_sample_size()
    else:
        est = estimate_evidence(model.prior, model.simulator, model.obs, kernel, algo["n"], algo["m"],
                                seed=cfg.seed, workers=cfg.workers, batch_size=algo["batch_size"])
        record = {"estimate": est.value, "std_error": est.std_error, "n": est.n, "m": est.m,
                  "seed": est.seed, "kernel": est.kernel}
        _atomic_write(out / "evidence.json", json.dumps(_jsonable(record), indent=2) + "\n")
        diag["artifacts"].append("evidence.json")
        diag["evidence"] = record

    if cfg.output.get("density_table"):
        kind = "uniform" if cfg.kernel["family"] == "uniform" else "gaussian"
        delta = cfg.kernel.get("delta")
        if delta is None:
            delta = cfg.kernel["sigma"][0] * math.sqrt(3.0)
        name = f"density_{kind}_delta{delta:g}.csv"
        _write_table(out / name, density_table(kind, delta, cfg.output["grid_points"]))
        diag["artifacts"].append(name)

    diag["runtime_seconds"] = time.perf_counter() - started
    diag["kernel"] = kernel.descriptor() if hasattr(kernel, "descriptor") else {}
    diag["config"] = cfg.to_dict()
    diag["artifacts"].append("diagnostics.json")
    _atomic_write(out / "diagnostics.json", json.dumps(_jsonable(diag), indent=2, sort_keys=True) + "\n")
    return diag


def _error_json(exc: BaseException) -> str:
    record = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ConfigError):
        record["errors"] = exc.errors
    return json.dumps(record)


def _cmd_run(args) -> int:
    text = Path(args.config).read_text(encoding="utf-8")
    cfg = parse_config(text)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.workers is not None:
        cfg = replace(cfg, workers=args.workers)
    diag = run_experiment(cfg, args.out)
    print(json.dumps({"status": "ok", "artifacts": diag["artifacts"]}))
    return 0


def _cmd_presets(args) -> int:
    if args.action == "list":
        for name, configs in PRESETS.items():
            print(f"{name}\t{len(configs)} config(s)")
        return 0
    if args.name not in PRESETS:
        raise ConfigError([f"unknown preset {args.name!r}; available: {sorted(PRESETS)}"])
    configs = PRESETS[args.name]
    if args.action == "show":
        for key, text in configs.items():
            print(f"# --- {key} ---\n{text}")
        return 0
    root = Path(args.out) if args.out else Path(os.environ.get(OUTPUT_ENV, "abc-output"))
    for key, text in configs.items():
        cfg = parse_config(text)
        run_experiment(cfg, root / key)
        print(json.dumps({"status": "ok", "experiment": key, "dir": str(root / key)}))
    return 0


def _cmd_oracle(args) -> int:
    if args.model == "toy":
        table = density_table(args.kind, args.delta, args.grid)
        header = ("theta", "normalized_density")
    elif args.model == "discrete":
        model = DiscreteOracleModel.default()
        kernel = Gaussian(args.sigma) if args.sigma else make_kernel(args.kind, delta=args.delta)
        table = np.column_stack([model.theta_grid, model.posterior(kernel)])
        header = ("theta", "posterior_probability")
    else:
        raise ConfigError([f"no analytic oracle for model {args.model!r}; available: toy, discrete"])
    if args.out:
        _write_table(args.out, table, header)
    else:
        sys.stdout.write(",".join(header) + "\n")
        for row in table:
            sys.stdout.write(",".join(_fmt(v) for v in row) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abc", description="ABC under an explicit error model")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment config")
    run.add_argument("config")
    run.add_argument("--seed", type=int)
    run.add_argument("--workers", type=int)
    run.add_argument("--out")
    run.set_defaults(func=_cmd_run)

    presets = sub.add_parser("presets", help="list, show or run shipped configs")
    presets.add_argument("action", choices=["list", "show", "run"])
    presets.add_argument("name", nargs="?")
    presets.add_argument("--out")
    presets.set_defaults(func=_cmd_presets)

    oracle = sub.add_parser("oracle", help="write an analytic posterior table")
    oracle.add_argument("model", choices=["toy", "discrete"])
    oracle.add_argument("--kind", choices=["uniform", "gaussian", "epanechnikov"], default="uniform")
    oracle.add_argument("--delta", type=float, default=1.0)
    oracle.add_argument("--sigma", type=float)
    oracle.add_argument("--grid", type=int, default=2001)
    oracle.add_argument("--out")
    oracle.set_defaults(func=_cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "presets" and args.action != "list" and not args.name:
        print(json.dumps({"error": "UsageError", "message": "preset name required"}), file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(_error_json(exc), file=sys.stderr)
        return 2
    except Exception as exc:
        print(_error_json(exc), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
