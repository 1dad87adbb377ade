"""Command-line front end.

Subcommands: ``run`` (sample a target, write CSV/JSON outputs),
``bench-rmse`` and ``bench-precision`` (the two benchmark harnesses),
``ess`` (ESS from a samples CSV), ``gradcheck`` (finite-difference gradient
verification of a built-in model).

Configuration comes from an optional flat ``key = value`` file plus flags;
flags win. Unknown keys in the file are rejected. Exit codes: 0 success,
1 at least one trajectory failed, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from .adaptation import AdaptConfig
from .bench import precision_harness, rmse_harness
from .diagnostics import ess_discrete, ess_integrated
from .events import EventSpec
from .flow import Monitor, TargetModel
from .sampler import RunConfig, TrajectoryOutput, run_ensemble
from .targets import make_target, standardized_chi2, standardized_t, std_gaussian

EXIT_OK = 0
EXIT_TRAJECTORY_FAILED = 1
EXIT_CONFIG_ERROR = 2


class ConfigError(ValueError):
    pass


def _parse_bool(v: str) -> bool:
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {v!r}")


# key -> (caster, default); None default means "must be provided if needed"
_RUN_KEYS = {
    "model": (str, None),
    "data": (str, None),
    "dim": (int, None),
    "nu": (float, None),
    "k": (float, None),
    "T": (float, None),
    "N": (int, 1000),
    "warmup_fraction": (float, 0.5),
    "tol": (float, None),
    "tol_abs": (float, 1e-3),
    "tol_rel": (float, 1e-3),
    "spec": (int, 1),
    "beta": (float, 1.0),
    "gamma": (float, 1.0),
    "phi": (float, 0.0),
    "mass": (str, "none"),
    "beta_adapt": (_parse_bool, True),
    "ema_decay": (float, 0.95),
    "seed": (int, None),
    "trajectories": (int, 1),
    "q0": (str, "random"),
    "output_dir": (str, "."),
    "emit": (str, "samples,moments,events,adaptation,summary"),
}

_SPEC_KINDS = {1: "const", 2: "const_autoreg", 3: "arclength"}


def read_config_file(path: str | Path) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _RUN_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value.strip()
    return values


def resolve_run_config(args: argparse.Namespace) -> dict:
    """Merge defaults, config file, and flags into one resolved dict."""
    resolved: dict = {k: d for k, (_, d) in _RUN_KEYS.items()}
    if args.config:
        file_vals = read_config_file(args.config)
        for k, v in file_vals.items():
            caster = _RUN_KEYS[k][0]
            try:
                resolved[k] = caster(v)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"config key {k!r}: {exc}") from None
    for k in _RUN_KEYS:
        flag = getattr(args, k, None)
        if flag is not None:
            resolved[k] = flag
    if resolved["tol"] is not None:
        resolved["tol_abs"] = resolved["tol"]
        resolved["tol_rel"] = resolved["tol"]
    if resolved["model"] is None:
        raise ConfigError("a model is required (--model or config file)")
    if resolved["T"] is None:
        raise ConfigError("a time span T is required")
    if resolved["seed"] is None:
        raise ConfigError("a seed is required for reproducible runs")
    if resolved["spec"] not in _SPEC_KINDS:
        raise ConfigError(f"spec must be one of {sorted(_SPEC_KINDS)}")
    if resolved["mass"] not in ("none", "vari", "isg"):
        raise ConfigError("mass must be none, vari, or isg")
    return resolved


def build_run(resolved: dict) -> tuple[TargetModel, RunConfig, Monitor]:
    params = {}
    for key in ("dim", "nu", "k"):
        if resolved[key] is not None:
            params[key] = resolved[key]
    target = make_target(resolved["model"], data=resolved["data"], **params)
    spec = EventSpec(_SPEC_KINDS[resolved["spec"]], beta=resolved["beta"],
                     gamma=resolved["gamma"], phi=resolved["phi"])
    adapt = AdaptConfig(mass_mode=resolved["mass"],
                        beta_adapt=resolved["beta_adapt"],
                        ema_decay=resolved["ema_decay"])
    q0 = resolved["q0"]
    if q0 != "random":
        try:
            q0 = np.array([float(v) for v in str(q0).split(",")])
        except ValueError:
            raise ConfigError(f"q0 must be 'random' or comma-separated floats, got {q0!r}")
    config = RunConfig(
        total_time=resolved["T"], num_samples=resolved["N"],
        warmup_fraction=resolved["warmup_fraction"],
        tol_abs=resolved["tol_abs"], tol_rel=resolved["tol_rel"],
        seed=resolved["seed"], num_trajectories=resolved["trajectories"],
        event_spec=spec, adaptation=adapt, q0=q0,
    )
    monitor = Monitor.means(target.dim_d)
    return target, config, monitor


def _fmt(v) -> str:
    """Full-precision, round-trippable text for a float value."""
    return repr(float(v))


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _pooled_moments(outs: list[TrajectoryOutput], monitor: Monitor):
    """Pooled integrated estimates and ESS columns across ok trajectories."""
    ok = [o for o in outs if o.ok]
    rows = []
    for j, label in enumerate(monitor.labels):
        num = sum(o.integrated_moments[j] for o in ok)
        den = sum(o.sampling_time for o in ok)
        estimate = num / den if den > 0 else float("nan")
        ess_int = 0.0
        ess_disc = 0.0
        for o in ok:
            post = o.sample_phase & (np.arange(o.samples.shape[0]) <
                                     o.n_samples_recorded)
            times = o.sample_times[post]
            if times.size < 102:
                continue
            cum = o.moment_cumulative[post, j]
            eta = np.diff(cum) / np.diff(times)
            pts = o.monitor_at_samples[post, j][1:]
            ess_int += ess_integrated(eta, pts).ess
            ess_disc += ess_discrete(o.monitor_at_samples[post, j])
        rows.append([label, _fmt(estimate), _fmt(ess_int), _fmt(ess_disc)])
    return rows


def cmd_run(args: argparse.Namespace) -> int:
    resolved = resolve_run_config(args)
    target, config, monitor = build_run(resolved)
    out_dir = Path(resolved["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    emit = {e.strip() for e in resolved["emit"].split(",") if e.strip()}

    t0 = time.perf_counter()
    outs = run_ensemble(target, config, monitor)
    wall = time.perf_counter() - t0

    d = target.dim_d
    for k, out in enumerate(outs):
        if "samples" in emit:
            header = ["sample_index", "t"] + [f"q_{i+1}" for i in range(d)] + ["phase"]
            rows = []
            for i in range(out.n_samples_recorded):
                phase = "sample" if out.sample_phase[i] else "warmup"
                rows.append([i + 1, _fmt(out.sample_times[i]),
                             *[_fmt(v) for v in out.samples[i]], phase])
            _write_csv(out_dir / f"samples_{k}.csv", header, rows)
        if "events" in emit:
            header = (["event_index", "t", "p_norm_pre", "p_norm_post"]
                      + [f"q_{i+1}" for i in range(d)]
                      + [f"p_{i+1}" for i in range(d)])
            rows = [[i, _fmt(e.t), _fmt(e.p_norm_pre), _fmt(e.p_norm_post),
                     *[_fmt(v) for v in e.q], *[_fmt(v) for v in e.p_post]]
                    for i, e in enumerate(out.event_log)]
            _write_csv(out_dir / f"events_{k}.csv", header, rows)
        if "adaptation" in emit:
            header = ["t", "beta"] + [f"m_{i+1}" for i in range(d)]
            rows = [[_fmt(a.t), _fmt(a.beta), *[_fmt(v) for v in a.mass_diag]]
                    for a in out.adaptation_trace]
            _write_csv(out_dir / f"adaptation_{k}.csv", header, rows)

    if "moments" in emit:
        _write_csv(out_dir / "moments.csv",
                   ["label", "estimate", "ess_integrated", "ess_discrete"],
                   _pooled_moments(outs, monitor))

    if "summary" in emit:
        summary = {
            "config": {k: (v if not isinstance(v, np.ndarray) else list(v))
                       for k, v in resolved.items()},
            "model": target.name,
            "wall_time_s": wall,
            "trajectories": [
                {
                    "index": o.trajectory_index,
                    "status": o.status,
                    "n_rhs": o.n_rhs,
                    "n_accepted": o.n_accepted,
                    "n_rejected": o.n_rejected,
                    "n_events": len(o.event_log),
                    "final_beta": o.final_beta,
                    "final_mass": list(o.final_mass),
                }
                for o in outs
            ],
        }
        (out_dir / "summary.json").write_text(json.dumps(summary, indent=2))

    return EXIT_OK if all(o.ok for o in outs) else EXIT_TRAJECTORY_FAILED


def cmd_bench_rmse(args: argparse.Namespace) -> int:
    targets = {
        "std_gaussian": std_gaussian(1),
        "std_t_20": standardized_t(20.0),
        "std_chi2_50": standardized_chi2(50.0),
        "std_chi2_30": standardized_chi2(30.0),
    }
    betas = [float(b) for b in args.betas.split(",")]
    rows = rmse_harness(targets, betas, replicas=args.replicas, seed=args.seed)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(out_dir / "rmse.csv",
               ["target", "beta", "strategy", "rmse", "benchmark_rmse",
                "replicas", "failures"],
               [[r.target, _fmt(r.beta), r.strategy, _fmt(r.rmse),
                 _fmt(r.benchmark_rmse), r.replicas, r.failures]
                for r in rows])
    return EXIT_OK


def cmd_bench_precision(args: argparse.Namespace) -> int:
    tols = [float(v) for v in args.tols.split(",")]
    Ts = [float(v) for v in args.horizons.split(",")]
    rows = precision_harness(tols, Ts, replicas=args.replicas, seed=args.seed)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(out_dir / "precision.csv",
               ["tol", "T", "moment", "pair_rms", "exact_mc_rmse"],
               [[_fmt(r.tol), _fmt(r.T), r.moment, _fmt(r.pair_rms),
                 _fmt(r.exact_mc_rmse)] for r in rows])
    return EXIT_OK


def cmd_ess(args: argparse.Namespace) -> int:
    pooled: dict[str, float] = {}
    for path in args.files:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            cols = [c for c in reader.fieldnames or [] if c.startswith("q_")]
            data = {c: [] for c in cols}
            for row in reader:
                if row.get("phase", "sample") != "sample":
                    continue
                for c in cols:
                    data[c].append(float(row[c]))
        for c in cols:
            if len(data[c]) >= 100:
                pooled[c] = pooled.get(c, 0.0) + ess_discrete(np.array(data[c]))
    for c, v in sorted(pooled.items()):
        print(f"{c}: ESS = {v:.1f}")
    return EXIT_OK


def gradcheck_target(target: TargetModel, n_points: int = 100,
                     seed: int = 0) -> tuple[float, np.ndarray]:
    """Max relative error between analytic and central-difference gradients.

    Relative error is |fd - grad| / max(1, |grad|) per component; returns
    the worst value and the position where it occurred.
    """
    if target.log_density is None:
        raise ValueError("gradcheck requires log_density")
    rng = np.random.default_rng(seed)
    worst = -1.0
    worst_q = None
    d = target.dim_d
    for _ in range(n_points):
        q = rng.standard_normal(d)
        g = target.grad_log_density(q)
        fd = np.empty(d)
        for i in range(d):
            h = 1e-5 * (1.0 + abs(q[i]))
            qp = q.copy(); qp[i] += h
            qm = q.copy(); qm[i] -= h
            fd[i] = (target.log_density(qp) - target.log_density(qm)) / (2 * h)
        rel = float(np.max(np.abs(fd - g) / np.maximum(1.0, np.abs(g))))
        if rel > worst:
            worst, worst_q = rel, q.copy()
    return worst, worst_q


def cmd_gradcheck(args: argparse.Namespace) -> int:
    params = {}
    if args.dim is not None:
        params["dim"] = args.dim
    if args.nu is not None:
        params["nu"] = args.nu
    if args.k is not None:
        params["k"] = args.k
    target = make_target(args.model, data=args.data, **params)
    worst, worst_q = gradcheck_target(target, n_points=args.points,
                                      seed=args.seed)
    print(f"model {target.name}: max relative gradient error = {worst:.3e}")
    print(f"worst point: {np.array2string(worst_q, precision=4)}")
    return EXIT_OK if worst <= 1e-4 else EXIT_TRAJECTORY_FAILED


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cthmc",
                                 description="Continuous-time HMC sampler")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="sample a target and write outputs")
    run.add_argument("--config", help="flat key=value config file")
    run.add_argument("--model")
    run.add_argument("--data")
    run.add_argument("--dim", type=int)
    run.add_argument("--nu", type=float)
    run.add_argument("--k", type=float)
    run.add_argument("--T", type=float)
    run.add_argument("--N", type=int)
    run.add_argument("--warmup-fraction", dest="warmup_fraction", type=float)
    run.add_argument("--tol", type=float)
    run.add_argument("--tol-abs", dest="tol_abs", type=float)
    run.add_argument("--tol-rel", dest="tol_rel", type=float)
    run.add_argument("--spec", type=int, choices=(1, 2, 3))
    run.add_argument("--beta", type=float)
    run.add_argument("--gamma", type=float)
    run.add_argument("--phi", type=float)
    run.add_argument("--mass", choices=("none", "vari", "isg"))
    run.add_argument("--beta-adapt", dest="beta_adapt", type=_parse_bool)
    run.add_argument("--ema-decay", dest="ema_decay", type=float)
    run.add_argument("--seed", type=int)
    run.add_argument("--trajectories", type=int)
    run.add_argument("--q0")
    run.add_argument("--output-dir", dest="output_dir")
    run.add_argument("--emit")
    run.set_defaults(func=cmd_run)

    br = sub.add_parser("bench-rmse", help="sampling-strategy RMSE study")
    br.add_argument("--betas", default="0.3,1,3,10")
    br.add_argument("--replicas", type=int, default=200)
    br.add_argument("--seed", type=int, default=0)
    br.add_argument("--output-dir", dest="output_dir", default=".")
    br.set_defaults(func=cmd_bench_rmse)

    bp = sub.add_parser("bench-precision", help="integrator precision study")
    bp.add_argument("--tols", default="1e-1,1e-2,1e-3,1e-4,1e-5")
    bp.add_argument("--horizons", default="250,1000,4000")
    bp.add_argument("--replicas", type=int, default=50)
    bp.add_argument("--seed", type=int, default=0)
    bp.add_argument("--output-dir", dest="output_dir", default=".")
    bp.set_defaults(func=cmd_bench_precision)

    es = sub.add_parser("ess", help="discrete ESS from samples CSV files")
    es.add_argument("files", nargs="+")
    es.set_defaults(func=cmd_ess)

    gc = sub.add_parser("gradcheck", help="finite-difference gradient check")
    gc.add_argument("model")
    gc.add_argument("--data")
    gc.add_argument("--dim", type=int)
    gc.add_argument("--nu", type=float)
    gc.add_argument("--k", type=float)
    gc.add_argument("--points", type=int, default=100)
    gc.add_argument("--seed", type=int, default=0)
    gc.set_defaults(func=cmd_gradcheck)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
