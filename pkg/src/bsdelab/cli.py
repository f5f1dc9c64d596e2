"""Command-line experiment driver.

Subcommands reproduce the benchmark families: `table1` (accuracy of all
four methods on the 2-D instance), `sweep-dt` and `sweep-n` (step-size and
sample-size sensitivity), `sweep-dim` (mass-spring dimension scaling) and
`solve` (a single run, or the Riccati reference alone).  Results are plain
CSV plus a JSON manifest; with a fixed seed the output bytes are identical
across repeat runs and worker counts.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import BsdeLabError
from .lq import LQProblem, builtin_2d, load_problem, mass_spring, uniform_grid
from .policy import METHODS, IterationHistory, mse_vs_oracle, run_policy_iteration
from .riccati import optimal_gains, solve_riccati
from .simulate import derive_seed

DT_GRID_DEFAULT = (0.004, 0.02, 0.05, 0.1, 0.2, 0.3, 0.4)
N_GRID_DEFAULT = (10, 50, 100, 500, 1000, 2000, 4000)
DIMS_DEFAULT = tuple(range(1, 11))

EXPERIMENTS = ("table1", "sweep-dt", "sweep-n", "sweep-dim", "solve")


class ConfigError(Exception):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    problem: str = "builtin-2d"
    methods: tuple = METHODS
    N: int = 2000
    dt: float = 0.02
    T: float = 4.0
    iters: int = 200
    trials: int = 15
    seed: int = 0
    out: str = "results"
    jitter: bool = False
    workers: int = 1
    dims: tuple = DIMS_DEFAULT
    dt_grid: tuple = DT_GRID_DEFAULT
    n_grid: tuple = N_GRID_DEFAULT


# per-command defaults applied when neither the config file nor the CLI set a value
_COMMAND_DEFAULTS = {
    "table1": {"N": 2000, "dt": 0.02, "iters": 200, "trials": 15},
    "sweep-dt": {"N": 1000, "iters": 50, "trials": 15},
    "sweep-n": {"dt": 0.02, "iters": 50, "trials": 15},
    "sweep-dim": {"problem": "mass-spring:1", "N": 1000, "dt": 0.02, "iters": 50, "trials": 15},
    "solve": {"methods": ("tr-c",), "trials": 1},
}


def _fmt(x) -> str:
    return f"{float(x):.17e}"


def build_problem(source: str, T: float) -> LQProblem:
    """Problem source: builtin-2d | mass-spring:p | path to a JSON file."""
    if source == "builtin-2d":
        return builtin_2d(T)
    if source.startswith("mass-spring:"):
        try:
            p = int(source.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad mass-spring source {source!r}") from None
        return mass_spring(p, T)
    path = Path(source)
    if not path.exists():
        raise ConfigError(f"problem file {source!r} not found")
    return load_problem(path)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _csv_list(text, cast):
    return tuple(cast(part) for part in text.split(",") if part)


def parse_config(argv) -> ExperimentConfig:
    parser = _Parser(prog="bsde-lab", description=__doc__)
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", type=str, default=None, help="JSON config file")
    parser.add_argument("--problem", type=str, default=None)
    parser.add_argument("--methods", type=str, default=None, help="comma separated")
    parser.add_argument("--N", type=int, default=None)
    parser.add_argument("--dt", type=float, default=None)
    parser.add_argument("--T", type=float, default=None)
    parser.add_argument("--iters", type=int, default=None)
    parser.add_argument("--trials", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", type=str, default=None)
    parser.add_argument("--jitter", action="store_true", default=None)
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--dims", type=str, default=None, help="comma separated p values")
    parser.add_argument("--dt-grid", dest="dt_grid", type=str, default=None)
    parser.add_argument("--n-grid", dest="n_grid", type=str, default=None)
    args = parser.parse_args(argv)

    merged = asdict(ExperimentConfig(experiment=args.experiment))
    merged.update(_COMMAND_DEFAULTS.get(args.experiment, {}))
    if args.config is not None:
        try:
            with open(args.config) as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {args.config!r}: {e}") from None
        unknown = set(file_cfg) - set(merged)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged.update(file_cfg)
    for name in ("problem", "N", "dt", "T", "iters", "trials", "seed", "out", "workers"):
        val = getattr(args, name)
        if val is not None:
            merged[name] = val
    if args.jitter is not None:
        merged["jitter"] = True
    if args.methods is not None:
        merged["methods"] = _csv_list(args.methods, str)
    if args.dims is not None:
        merged["dims"] = _csv_list(args.dims, int)
    if args.dt_grid is not None:
        merged["dt_grid"] = _csv_list(args.dt_grid, float)
    if args.n_grid is not None:
        merged["n_grid"] = _csv_list(args.n_grid, int)
    merged["methods"] = tuple(merged["methods"])
    merged["dims"] = tuple(merged["dims"])
    merged["dt_grid"] = tuple(merged["dt_grid"])
    merged["n_grid"] = tuple(merged["n_grid"])
    cfg = ExperimentConfig(**merged)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    if not cfg.methods:
        raise ConfigError("methods must be nonempty")
    allowed = set(METHODS) | ({"oracle"} if cfg.experiment == "solve" else set())
    bad = [m for m in cfg.methods if m not in allowed]
    if bad:
        raise ConfigError(f"unknown methods {bad}; allowed: {sorted(allowed)}")
    if cfg.experiment == "solve" and len(cfg.methods) != 1:
        raise ConfigError("solve runs exactly one method")
    for name in ("N", "iters", "trials", "workers"):
        if getattr(cfg, name) < 1:
            raise ConfigError(f"{name} must be positive")
    if cfg.dt <= 0 or cfg.T <= 0:
        raise ConfigError("dt and T must be positive")
    if cfg.seed < 0:
        raise ConfigError("seed must be nonnegative")
    if cfg.experiment == "sweep-dt" and any(v <= 0 for v in cfg.dt_grid):
        raise ConfigError("dt grid values must be positive")
    if cfg.experiment == "sweep-n" and any(v < 1 for v in cfg.n_grid):
        raise ConfigError("N grid values must be positive")
    if cfg.experiment == "sweep-dim" and any(p < 1 for p in cfg.dims):
        raise ConfigError("dims (p values) must be positive")
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as e:
        raise ConfigError(f"output directory {cfg.out!r} not writable: {e}") from None


# --- trial execution -------------------------------------------------------


def _run_one(task: dict) -> dict:
    hist: IterationHistory = run_policy_iteration(
        task["prob"],
        task["method"],
        task["N"],
        task["grid"],
        task["iters"],
        task["trial_seed"],
        oracle=task["oracle"],
        jitter=task["jitter"],
    )
    out = {
        "method": task["method"],
        "trial": task["trial"],
        "seed": task["trial_seed"],
        "mse": mse_vs_oracle(hist, task["oracle"]),
        "unstable": hist.unstable,
        "aborted": hist.aborted,
        "abort_iteration": hist.abort_iteration,
    }
    if task.get("keep_costs"):
        out["costs"] = hist.costs
        out["cost_ses"] = hist.cost_ses
        out["mses"] = hist.mses
        out["flags"] = hist.unstable_flags
    if task.get("keep_g"):
        out["G"] = hist.final.G_stack() if hist.final is not None else None
        out["gains"] = hist.gains[-1]
    return out


def _run_tasks(tasks: list[dict], workers: int) -> list[dict]:
    if workers <= 1 or len(tasks) <= 1:
        return [_run_one(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_run_one, tasks, chunksize=1))


def _summarize(results: list[dict]):
    stable = [r["mse"] for r in results if not r["unstable"] and np.isfinite(r["mse"])]
    n_unstable = sum(1 for r in results if r["unstable"])
    mean = float(np.mean(stable)) if stable else float("nan")
    std = float(np.std(stable, ddof=1)) if len(stable) > 1 else float("nan")
    return mean, std, len(stable), n_unstable


def _write_manifest(cfg: ExperimentConfig, path: Path, extra: dict | None = None) -> None:
    manifest = {
        "config": asdict(cfg),
        "seeds": {
            "master": cfg.seed,
            "per_trial": {t: derive_seed(cfg.seed, t) for t in range(cfg.trials)},
        },
        "notes": {
            "iters": "sweep commands default to 50 iterations for runtime; "
            "override with --iters for full-depth runs",
        },
    }
    if extra:
        manifest.update(extra)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


def _writer(path: Path):
    fh = open(path, "w", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


# --- commands ---------------------------------------------------------------


def cmd_table1(cfg: ExperimentConfig) -> int:
    prob = build_problem(cfg.problem, cfg.T)
    grid = uniform_grid(prob.T, cfg.dt)
    oracle = solve_riccati(prob, grid)
    tasks = [
        {
            "prob": prob,
            "grid": grid,
            "oracle": oracle,
            "method": m,
            "trial": t,
            "trial_seed": derive_seed(cfg.seed, t),
            "N": cfg.N,
            "iters": cfg.iters,
            "jitter": cfg.jitter,
            "keep_costs": True,
            "keep_g": True,
        }
        for m in cfg.methods
        for t in range(cfg.trials)
    ]
    results = _run_tasks(tasks, cfg.workers)
    out = Path(cfg.out)

    fh, w = _writer(out / "trial_mse.csv")
    w.writerow(["method", "trial", "seed", "mse", "unstable", "abort_iteration"])
    for r in results:
        w.writerow(
            [r["method"], r["trial"], r["seed"], _fmt(r["mse"]), int(r["unstable"]),
             "" if r["abort_iteration"] is None else r["abort_iteration"]]
        )
    fh.close()

    fh, w = _writer(out / "summary.csv")
    w.writerow(["method", "mse_mean_stable", "mse_std_stable", "n_stable", "n_unstable"])
    for m in cfg.methods:
        mean, std, n_stable, n_unstable = _summarize([r for r in results if r["method"] == m])
        w.writerow([m, _fmt(mean), _fmt(std), n_stable, n_unstable])
    fh.close()

    fh, w = _writer(out / "cost_series.csv")
    w.writerow(["method", "trial", "iter", "cost", "cost_se"])
    for r in results:
        for k in range(len(r["costs"])):
            w.writerow([r["method"], r["trial"], k, _fmt(r["costs"][k]), _fmt(r["cost_ses"][k])])
    fh.close()

    n = prob.n
    fh, w = _writer(out / "g_trajectories.csv")
    header = ["method", "trial", "t"]
    header += [f"G_{i}{j}" for i in range(n) for j in range(n)]
    header += [f"Gstar_{i}{j}" for i in range(n) for j in range(n)]
    w.writerow(header)
    for r in results:
        if r["G"] is None:
            continue
        for k, t in enumerate(grid.times):
            row = [r["method"], r["trial"], _fmt(t)]
            row += [_fmt(v) for v in r["G"][k].ravel()]
            row += [_fmt(v) for v in oracle.G[k].ravel()]
            w.writerow(row)
    fh.close()

    _write_manifest(cfg, out / "manifest.json")
    return 2 if all(r["unstable"] for r in results) else 0


def _cmd_sweep(cfg: ExperimentConfig, param: str, values, make_point) -> int:
    out = Path(cfg.out)
    all_results: list[tuple[object, dict]] = []
    for value in values:
        prob, grid, N = make_point(value)
        oracle = solve_riccati(prob, grid)
        tasks = [
            {
                "prob": prob,
                "grid": grid,
                "oracle": oracle,
                "method": m,
                "trial": t,
                "trial_seed": derive_seed(cfg.seed, t),
                "N": N,
                "iters": cfg.iters,
                "jitter": cfg.jitter,
            }
            for m in cfg.methods
            for t in range(cfg.trials)
        ]
        for r in _run_tasks(tasks, cfg.workers):
            all_results.append((value, r))

    fh, w = _writer(out / "results.csv")
    w.writerow([param, "method", "trial", "seed", "mse", "unstable"])
    for value, r in all_results:
        w.writerow([value, r["method"], r["trial"], r["seed"], _fmt(r["mse"]), int(r["unstable"])])
    fh.close()

    fh, w = _writer(out / "summary.csv")
    w.writerow([param, "method", "mse_mean_stable", "mse_std_stable", "n_stable", "n_unstable"])
    for value in values:
        for m in cfg.methods:
            rs = [r for v, r in all_results if v == value and r["method"] == m]
            mean, std, n_stable, n_unstable = _summarize(rs)
            w.writerow([value, m, _fmt(mean), _fmt(std), n_stable, n_unstable])
    fh.close()

    _write_manifest(cfg, out / "manifest.json", {"sweep": {param: list(values)}})
    return 2 if all(r["unstable"] for _, r in all_results) else 0


def cmd_sweep_dt(cfg: ExperimentConfig) -> int:
    prob = build_problem(cfg.problem, cfg.T)
    # snap each requested step to the nearest one that divides the horizon
    # (e.g. dt=0.3 at T=4 becomes 4/13); the CSV reports the effective step
    values = tuple(prob.T / max(1, round(prob.T / dt)) for dt in cfg.dt_grid)

    def make_point(dt):
        return prob, uniform_grid(prob.T, dt), cfg.N

    return _cmd_sweep(cfg, "dt", values, make_point)


def cmd_sweep_n(cfg: ExperimentConfig) -> int:
    prob = build_problem(cfg.problem, cfg.T)
    grid = uniform_grid(prob.T, cfg.dt)

    def make_point(N):
        return prob, grid, N

    return _cmd_sweep(cfg, "N", cfg.n_grid, make_point)


def cmd_sweep_dim(cfg: ExperimentConfig) -> int:
    def make_point(p):
        prob = mass_spring(p, cfg.T)
        return prob, uniform_grid(prob.T, cfg.dt), cfg.N

    # report the state dimension n = 2p in the CSV
    return _cmd_sweep(cfg, "n", tuple(2 * p for p in cfg.dims), lambda n: make_point(n // 2))


def cmd_solve(cfg: ExperimentConfig) -> int:
    prob = build_problem(cfg.problem, cfg.T)
    grid = uniform_grid(prob.T, cfg.dt)
    oracle = solve_riccati(prob, grid)
    out = Path(cfg.out)
    method = cfg.methods[0]
    n = prob.n

    if method == "oracle":
        fh, w = _writer(out / "g_t.csv")
        w.writerow(["t"] + [f"Gstar_{i}{j}" for i in range(n) for j in range(n)] + ["gstar"])
        for k, t in enumerate(grid.times):
            w.writerow([_fmt(t)] + [_fmt(v) for v in oracle.G[k].ravel()] + [_fmt(oracle.g[k])])
        fh.close()
        gains = optimal_gains(prob, oracle)
        fh, w = _writer(out / "gains.csv")
        w.writerow(["t"] + [f"K_{i}{j}" for i in range(prob.m) for j in range(n)])
        for k, t in enumerate(grid.times):
            w.writerow([_fmt(t)] + [_fmt(v) for v in gains[k].ravel()])
        fh.close()
        _write_manifest(cfg, out / "manifest.json")
        return 0

    task = {
        "prob": prob,
        "grid": grid,
        "oracle": oracle,
        "method": method,
        "trial": 0,
        "trial_seed": derive_seed(cfg.seed, 0),
        "N": cfg.N,
        "iters": cfg.iters,
        "jitter": cfg.jitter,
        "keep_costs": True,
        "keep_g": True,
    }
    r = _run_one(task)

    fh, w = _writer(out / "g_t.csv")
    header = ["t"]
    header += [f"G_{i}{j}" for i in range(n) for j in range(n)]
    header += [f"Gstar_{i}{j}" for i in range(n) for j in range(n)]
    w.writerow(header)
    G = r["G"] if r["G"] is not None else np.full((grid.K + 1, n, n), np.nan)
    for k, t in enumerate(grid.times):
        row = [_fmt(t)]
        row += [_fmt(v) for v in G[k].ravel()]
        row += [_fmt(v) for v in oracle.G[k].ravel()]
        w.writerow(row)
    fh.close()

    fh, w = _writer(out / "gains.csv")
    w.writerow(["t"] + [f"K_{i}{j}" for i in range(prob.m) for j in range(n)])
    for k, t in enumerate(grid.times):
        w.writerow([_fmt(t)] + [_fmt(v) for v in r["gains"][k].ravel()])
    fh.close()

    fh, w = _writer(out / "cost_series.csv")
    w.writerow(["iter", "cost", "cost_se", "mse", "unstable_flag"])
    for k in range(len(r["costs"])):
        mse = r["mses"][k - 1] if k >= 1 else float("nan")
        flag = int(r["flags"][k - 1]) if k >= 1 else 0
        w.writerow([k, _fmt(r["costs"][k]), _fmt(r["cost_ses"][k]), _fmt(mse), flag])
    fh.close()

    _write_manifest(cfg, out / "manifest.json", {"result": {"mse": r["mse"], "unstable": r["unstable"]}})
    return 2 if r["unstable"] else 0


_COMMANDS = {
    "table1": cmd_table1,
    "sweep-dt": cmd_sweep_dt,
    "sweep-n": cmd_sweep_n,
    "sweep-dim": cmd_sweep_dim,
    "solve": cmd_solve,
}


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv if argv is not None else sys.argv[1:])
    except ConfigError as e:
        print(f"bsde-lab: config error: {e}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[cfg.experiment](cfg)
    except ConfigError as e:
        print(f"bsde-lab: config error: {e}", file=sys.stderr)
        return 1
    except BsdeLabError as e:
        print(f"bsde-lab: problem is pathological: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
