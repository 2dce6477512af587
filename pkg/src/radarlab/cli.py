"""Command-line front end: simulate | train | sweep | nsga | compare.

Every command materialises one run directory containing the frozen resolved
config, a manifest (code version, seeds, artifact list), CSV artifacts, and
SVG plots. Artifact bytes are a pure function of the config and master seed:
reruns — at any worker count — reproduce them exactly. Exit codes: 0 success,
1 configuration error, 2 sweep finished with some failed points, 3 runtime
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    ConfigError,
    RunConfig,
    config_hash,
    config_to_dict,
    load_config,
    parse_config,
    save_resolved_config,
)
from .drl.train import build_agent, evaluate, load_checkpoint, save_checkpoint, train
from .env import Allocation, equal_allocation_policy, episode_objectives, run_episode
from .envbatch import evaluate_schedules
from .moo import (
    NsgaConfig,
    ObjectivePoint,
    clipped_hypervolume,
    corner_genomes,
    decode_and_repair,
    default_reference,
    dominates,
    extract_pareto,
    hypervolume_2d,
    nsga2_run,
)
from .runio import (
    FRONT_HEADER,
    RunManifest,
    SchemaError,
    format_cell,
    read_csv,
    read_front_csv,
    write_csv,
    write_front_csv,
)
from .scenario import Scenario
from .svgplot import Series, plot_svg

CURVE_HEADER = ["step", "reward", "violation", "lambda", "critic_loss", "actor_loss"]
SUMMARY_HEADER = ["beta", "seed", "obj_t", "obj_s", "violation_mean"]


def derive_seed(master_seed: int, index: int) -> int:
    """Per-task seed that depends only on (master seed, task index)."""
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(index,))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _finish_run(
    run_dir: Path,
    command: str,
    config: RunConfig,
    seeds: dict,
    artifacts: list,
    started: float,
    started_at: str,
    notes: dict | None = None,
) -> None:
    save_resolved_config(config, run_dir / "resolved_config.yaml")
    manifest = RunManifest(
        run_id=f"{command}-{config_hash(config)}",
        command=command,
        config_hash=config_hash(config),
        master_seed=config.master_seed,
        seeds=seeds,
        started_at=started_at,
        finished_at=_now(),
        wall_clock_s=round(time.perf_counter() - started, 3),
        code_version=__version__,
        artifacts=sorted(artifacts + ["resolved_config.yaml"]),
        notes=notes or {},
    )
    manifest.write(run_dir / "manifest.json")


def _downsample(*arrays, limit: int = 2000):
    n = len(arrays[0])
    stride = max(1, n // limit)
    return [a[::stride] for a in arrays]


# -- simulate -------------------------------------------------------------------


def _scripted_policy(config: RunConfig, path: str):
    n = config.scenario.max_targets
    length = config.scenario.episode_length
    header, rows = read_csv(path)
    expected = ["scan"] + [f"dwell_{i + 1}" for i in range(n)]
    if header != expected:
        raise ConfigError(f"{path}: expected header {','.join(expected)}, got {','.join(header)}")
    if len(rows) < length:
        raise ConfigError(f"{path}: has {len(rows)} rows, scenario needs {length}")
    table = np.array([[float(c) for c in row] for row in rows[:length]])

    def policy(_obs, env):
        row = table[env.slot]
        return Allocation(dwells=row[1:], scan_time=float(row[0]), t0=env.config.cycle_duration)

    return policy


def _equal_policy(config: RunConfig):
    n = config.scenario.max_targets
    t0 = config.scenario.cycle_duration
    theta = config.env.theta_max

    def policy(_obs, env):
        return equal_allocation_policy(env.confirmed_slots(), n, t0, theta)

    return policy


def cmd_simulate(config: RunConfig, args) -> int:
    started, started_at = time.perf_counter(), _now()
    run_dir = Path(config.out_dir)
    run_dir.mkdir(parents=True, exist_ok=True)

    sim = config.simulate
    if sim.policy == "equal":
        policy = _equal_policy(config)
    elif sim.policy == "scripted":
        policy = _scripted_policy(config, sim.schedule_csv)
    else:
        agent, _meta = load_checkpoint(sim.checkpoint)
        policy = lambda obs, _env: agent.act(obs, explore=False)  # noqa: E731

    env = config.build_env()
    history = run_episode(env, policy, seed_offset=sim.eval_offset)
    obj_t, obj_s = episode_objectives(history)

    scenario = env.scenario
    n = config.scenario.max_targets
    truth_rows = []
    for t in range(config.scenario.episode_length):
        for s in range(n):
            if scenario.active[t, s]:
                x, y, vx, vy = scenario.states[t, s]
                truth_rows.append((t, int(scenario.ids[t, s]), s, x, y, vx, vy))
    write_csv(
        run_dir / "truth.csv",
        ["time_slot", "target_id", "slot", "x", "y", "vx", "vy"],
        truth_rows,
    )
    write_csv(
        run_dir / "tracks.csv",
        ["time_slot", "target_id", "cost", "trace_cov", "dwell"],
        history.track_rows,
    )
    write_csv(
        run_dir / "steps.csv",
        ["time_slot", "dwell_fraction", "lambda", "utility", "reward", "gamma"]
        + [f"cost_{i + 1}" for i in range(n)],
        history.step_rows(),
    )
    frac = np.asarray(history.dwells).sum(axis=1) / config.scenario.cycle_duration
    scan = np.asarray(history.scan_times)
    write_csv(
        run_dir / "summary.csv",
        ["policy", "obj_t", "obj_s", "mean_dwell_fraction", "mean_scan_time"],
        [(sim.policy, obj_t, obj_s, float(frac.mean()), float(scan.mean()))],
    )

    # Range-vs-time per target and the budget split per cycle.
    by_id: dict[int, list] = {}
    for t, tid, _s, x, y, _vx, _vy in truth_rows:
        by_id.setdefault(tid, []).append((t, float(np.hypot(x, y))))
    range_series = [
        Series(f"target {tid}", *map(np.array, zip(*pts)), markers=False, line=True)
        for tid, pts in sorted(by_id.items())
    ]
    if range_series:
        plot_svg(run_dir / "ranges.svg", range_series, "time slot", "range (m)", "target ranges")
    steps = np.arange(len(history))
    sx, f1, f2 = _downsample(steps, frac, scan / config.scenario.cycle_duration)
    plot_svg(
        run_dir / "allocation.svg",
        [
            Series("tracking fraction", sx, f1, markers=False, line=True),
            Series("scan fraction", sx, f2, markers=False, line=True),
        ],
        "time slot",
        "fraction of cycle",
        "time allocation",
    )

    artifacts = ["truth.csv", "tracks.csv", "steps.csv", "summary.csv", "allocation.svg"]
    if range_series:
        artifacts.append("ranges.svg")
    _finish_run(run_dir, "simulate", config, {"master": config.master_seed}, artifacts,
                started, started_at, notes={"obj_t": obj_t, "obj_s": obj_s})
    print(f"simulate: policy={sim.policy} obj_t={obj_t:.6g} obj_s={obj_s:.6g} -> {run_dir}")
    return 0


# -- train ----------------------------------------------------------------------


def _train_once(config: RunConfig, beta: float, seed: int, run_dir: Path) -> dict:
    """Train one policy at one scan weight; write its artifacts; summarise."""
    run_dir.mkdir(parents=True, exist_ok=True)
    started, started_at = time.perf_counter(), _now()
    config = dataclasses.replace(config, env=dataclasses.replace(config.env, beta=beta))

    env = config.build_env()
    agent = build_agent(config.agent.algorithm, env, seed=seed, **config.agent.build_kwargs())
    result = train(agent, env, config.train.schedule(), seed=seed)
    obj_t, obj_s, _history = evaluate(agent, env, seed_offset=0)

    violation = result.curves["violation"]
    tail = max(1, round(0.2 * len(violation))) if len(violation) else 1
    violation_mean = float(violation[-tail:].mean()) if len(violation) else 0.0

    write_csv(run_dir / "curves.csv", CURVE_HEADER, result.curve_rows())
    save_checkpoint(run_dir / "checkpoint.npz", agent, config_hash(config))
    summary = {
        "beta": beta,
        "seed": seed,
        "obj_t": obj_t,
        "obj_s": obj_s,
        "violation_mean": violation_mean,
    }
    write_csv(run_dir / "summary.csv", SUMMARY_HEADER, [tuple(summary.values())])

    if len(violation):
        steps = result.curves["step"]
        sx, rew, vio = _downsample(steps, result.curves["reward"], violation)
        plot_svg(
            run_dir / "training.svg",
            [
                Series("reward", sx, rew / max(1.0, np.abs(rew).max()), markers=False, line=True),
                Series("violation", sx, vio, markers=False, line=True),
            ],
            "step",
            "normalised reward / violation",
            f"training at beta={beta:g}",
        )

    artifacts = ["curves.csv", "checkpoint.npz", "summary.csv"]
    if len(violation):
        artifacts.append("training.svg")
    _finish_run(run_dir, "train", config, {"master": config.master_seed, "train": seed},
                artifacts, started, started_at, notes=summary)
    return summary


def cmd_train(config: RunConfig, args) -> int:
    beta = config.env.beta if args.beta is None else args.beta
    seed = derive_seed(config.master_seed, 0)
    summary = _train_once(config, beta, seed, Path(config.out_dir))
    print(
        "train: beta={beta:g} seed={seed} obj_t={obj_t:.6g} obj_s={obj_s:.6g} "
        "violation_mean={violation_mean:.4g}".format(**summary)
    )
    return 0


# -- sweep ----------------------------------------------------------------------


def _sweep_worker(payload) -> tuple:
    index, config_data, beta, seed, run_dir = payload
    try:
        config = parse_config(config_data)
        return index, _train_once(config, beta, seed, Path(run_dir)), ""
    except Exception as exc:  # noqa: BLE001 - reported per point, sweep continues
        return index, None, f"{type(exc).__name__}: {exc}"


def cmd_sweep(config: RunConfig, args) -> int:
    started, started_at = time.perf_counter(), _now()
    run_dir = Path(config.out_dir)
    run_dir.mkdir(parents=True, exist_ok=True)

    betas = config.sweep.resolve()
    config_data = config_to_dict(config)
    payloads = [
        (i, config_data, beta, derive_seed(config.master_seed, i), str(run_dir / f"beta_{i:02d}"))
        for i, beta in enumerate(betas)
    ]

    results: list = [None] * len(betas)
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            for index, summary, error in pool.map(_sweep_worker, payloads):
                results[index] = (summary, error)
    else:
        for payload in payloads:
            index, summary, error = _sweep_worker(payload)
            results[index] = (summary, error)

    points, failures, seeds = [], [], {}
    for i, beta in enumerate(betas):
        summary, error = results[i]
        seeds[f"beta_{i:02d}"] = payloads[i][3]
        if summary is None:
            failures.append(f"beta={beta:g}: {error}")
            continue
        points.append(
            ObjectivePoint(
                obj_t=summary["obj_t"],
                obj_s=summary["obj_s"],
                algorithm=config.agent.algorithm,
                label=format_cell(float(beta)),
                seed=summary["seed"],
            )
        )

    artifacts = []
    if points:
        write_csv(
            run_dir / "all_points.csv",
            FRONT_HEADER,
            [(p.algorithm, p.label, p.obj_t, p.obj_s, p.seed) for p in points],
        )
        front = extract_pareto(points)
        write_front_csv(run_dir / "front.csv", front)
        plot_svg(
            run_dir / "front.svg",
            [
                Series("trained policies", np.array([p.obj_t for p in points]),
                       np.array([p.obj_s for p in points])),
                Series("pareto front", np.array([p.obj_t for p in front]),
                       np.array([p.obj_s for p in front]), line=True),
            ],
            "tracking objective",
            "scanning objective",
            "scan-weight sweep",
        )
        artifacts += ["all_points.csv", "front.csv", "front.svg"]

    _finish_run(run_dir, "sweep", config, {"master": config.master_seed, **seeds},
                artifacts, started, started_at,
                notes={"betas": len(betas), "failed": len(failures)})

    for line in failures:
        print(f"sweep: {line}", file=sys.stderr)
    print(f"sweep: {len(points)}/{len(betas)} points, front size "
          f"{len(extract_pareto(points)) if points else 0} -> {run_dir}")
    if not points:
        return 3
    return 2 if failures else 0


# -- nsga -----------------------------------------------------------------------


def make_schedule_evaluator(config: RunConfig):
    """Batch evaluator mapping genome rows to episode objectives."""
    scenario = Scenario(config.scenario, config.nsga.eval_offset)
    t0 = config.scenario.cycle_duration
    length = config.scenario.episode_length
    n_points = config.nsga.n_points

    def evaluator(genomes: np.ndarray) -> np.ndarray:
        schedules = np.stack(
            [decode_and_repair(g, t0, length, n_points) for g in np.asarray(genomes)]
        )
        obj_t, obj_s = evaluate_schedules(
            scenario, config.radar, config.detection, config.env, schedules
        )
        return np.column_stack([obj_t, obj_s])

    return evaluator


def cmd_nsga(config: RunConfig, args) -> int:
    started, started_at = time.perf_counter(), _now()
    run_dir = Path(config.out_dir)
    run_dir.mkdir(parents=True, exist_ok=True)

    settings = config.nsga
    seed = int(
        np.random.SeedSequence(
            entropy=config.master_seed, spawn_key=(2, settings.seed)
        ).generate_state(1, dtype=np.uint64)[0]
    )
    width = 1 + config.scenario.max_targets
    seeds: tuple = ()
    if settings.seed_corners:
        corners = corner_genomes(
            settings.n_points, width, limit=settings.population_size // 2
        )
        seeds = tuple(tuple(row) for row in corners.tolist())
    nsga_config = NsgaConfig(
        population_size=settings.population_size,
        generations=settings.generations,
        genome_length=settings.n_points * width,
        crossover_prob=settings.crossover_prob,
        eta_c=settings.eta_c,
        mutation_prob=settings.mutation_prob,
        eta_m=settings.eta_m,
        seed=seed,
        initial_genomes=seeds,
    )
    result = nsga2_run(nsga_config, make_schedule_evaluator(config))

    front = [
        ObjectivePoint(obj_t=float(o[0]), obj_s=float(o[1]),
                       algorithm="nsga2", label=str(i), seed=seed)
        for i, o in enumerate(result.front_objectives)
    ]
    write_front_csv(run_dir / "front.csv", front)

    # Hypervolume progress against a reference frozen at generation zero, so
    # the per-generation numbers are comparable (and non-decreasing).
    ref = default_reference(result.history[0])
    hv_rows = [
        (g, len(arch), clipped_hypervolume(arch, ref), ref[0], ref[1])
        for g, arch in enumerate(result.history)
    ]
    write_csv(
        run_dir / "hypervolume.csv",
        ["generation", "front_size", "hypervolume", "ref_t", "ref_s"],
        hv_rows,
    )
    sx, hv = _downsample(np.arange(len(hv_rows)), np.array([r[2] for r in hv_rows]))
    plot_svg(
        run_dir / "hypervolume.svg",
        [Series("archive hypervolume", sx, hv, markers=False, line=True)],
        "generation",
        "dominated hypervolume",
        "nsga2 progress",
    )

    series = [
        Series("nsga2", np.array([p.obj_t for p in front]),
               np.array([p.obj_s for p in front]), line=True)
    ]
    artifacts = ["front.csv", "hypervolume.csv", "hypervolume.svg", "front.svg"]
    if settings.rl_fronts:
        groups = [("nsga2", front)]
        for path in settings.rl_fronts:
            pts = read_front_csv(path)
            if not pts:
                raise SchemaError(f"{path}: front file has no points")
            groups.append((Path(path).stem + ":" + pts[0].algorithm, pts))
        shared_ref = default_reference([p for _, pts in groups for p in pts])
        hv_nsga = hypervolume_2d(extract_pareto(front), shared_ref)
        rows = []
        for name, pts in groups:
            hv_val = hypervolume_2d(extract_pareto(pts), shared_ref)
            rows.append((name, len(pts), hv_val, hv_val / hv_nsga if hv_nsga else 0.0))
        write_csv(
            run_dir / "comparison.csv",
            ["front", "points", "hypervolume", "ratio_vs_nsga2"],
            rows,
        )
        for name, pts in groups[1:]:
            series.append(
                Series(name, np.array([p.obj_t for p in pts]),
                       np.array([p.obj_s for p in pts]))
            )
        artifacts.append("comparison.csv")
    plot_svg(run_dir / "front.svg", series, "tracking objective", "scanning objective",
             "pareto fronts")

    _finish_run(run_dir, "nsga", config, {"master": config.master_seed, "nsga": seed},
                artifacts, started, started_at,
                notes={"front_size": len(front), "final_hypervolume": hv_rows[-1][2]})
    print(f"nsga: front size {len(front)}, hv {hv_rows[-1][2]:.6g} -> {run_dir}")
    return 0


# -- compare --------------------------------------------------------------------


def cmd_compare(config: RunConfig, args) -> int:
    started, started_at = time.perf_counter(), _now()
    run_dir = Path(config.out_dir)
    run_dir.mkdir(parents=True, exist_ok=True)

    groups = []
    for path in args.fronts:
        pts = read_front_csv(path)
        if not pts:
            raise SchemaError(f"{path}: front file has no points")
        groups.append((Path(path).stem + ":" + pts[0].algorithm, pts))
    names = [name for name, _ in groups]
    if len(set(names)) != len(names):
        names = [f"{i}:{name}" for i, (name, _) in enumerate(groups)]
        groups = [(n, pts) for n, (_, pts) in zip(names, groups)]

    shared_ref = default_reference([p for _, pts in groups for p in pts])
    write_csv(
        run_dir / "hypervolumes.csv",
        ["front", "points", "hypervolume", "ref_t", "ref_s"],
        [
            (name, len(pts), hypervolume_2d(extract_pareto(pts), shared_ref),
             shared_ref[0], shared_ref[1])
            for name, pts in groups
        ],
    )

    # Pairwise domination counts: how many of b's points some point of a beats.
    dom_rows = []
    for name_a, pts_a in groups:
        for name_b, pts_b in groups:
            if name_a == name_b:
                continue
            count = sum(1 for q in pts_b if any(dominates(p, q) for p in pts_a))
            dom_rows.append((name_a, name_b, count, len(pts_b)))
    write_csv(
        run_dir / "dominance.csv",
        ["front", "other", "dominated_points", "other_size"],
        dom_rows,
    )

    plot_svg(
        run_dir / "fronts.svg",
        [
            Series(name, np.array([p.obj_t for p in pts]), np.array([p.obj_s for p in pts]),
                   line=True)
            for name, pts in groups
        ],
        "tracking objective",
        "scanning objective",
        "front comparison",
    )

    _finish_run(run_dir, "compare", config, {"master": config.master_seed},
                ["hypervolumes.csv", "dominance.csv", "fronts.svg"],
                started, started_at, notes={"fronts": len(groups)})
    print(f"compare: {len(groups)} fronts -> {run_dir}")
    return 0


# -- argument parsing -----------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """Argparse that reports usage problems as config errors (exit code 1)."""

    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", default=None, help="YAML config file")
    common.add_argument("--seed", type=int, default=None, help="override master_seed")
    common.add_argument("--out", default=None, help="override out_dir")
    common.add_argument("--workers", type=int, default=1, help="parallel workers (sweep)")

    parser = _Parser(prog="radarlab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"radarlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="roll one policy through one episode")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", parents=[common], help="train one policy at one scan weight")
    p.add_argument("--beta", type=float, default=None, help="override env.beta")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", parents=[common], help="train a policy per scan weight")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("nsga", parents=[common], help="evolve schedules with NSGA-II")
    p.set_defaults(func=cmd_nsga)

    p = sub.add_parser("compare", parents=[common], help="compare saved front CSVs")
    p.add_argument("fronts", nargs="+", help="front.csv files to compare")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = load_config(args.config, seed=args.seed, out_dir=args.out)
        if args.workers < 1:
            raise ConfigError(f"--workers must be >= 1, got {args.workers}")
        return args.func(config, args)
    except (ConfigError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:  # noqa: BLE001 - last-resort runtime failure
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())
