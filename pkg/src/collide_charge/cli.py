"""Experiment runner: reproducible subcommands with CSV outputs.

Subcommands: regimes, ensemble, stationary, classify, sample. Flags
override an optional JSON config file; the fully resolved configuration is
echoed into the output directory for provenance. Exit codes: 0 success,
2 validation, 3 truncation overflow, 4 convergence failure, 5 reducible
chain.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .core import (
    BatteryDistribution,
    QuditState,
    StateClass,
    ergotropy,
    tv_distance,
)
from .errors import (
    ConvergenceError,
    ReducibleChainError,
    TruncationOverflowError,
    ValidationError,
)
from .evolve import (
    evolve,
    evolve_adaptive,
    write_snapshot_csv,
    write_trajectory_csv,
)
from .markov import (
    EstimationBudget,
    classify_empirical,
    classify_qubit_chain,
    format_report,
    solve_stationary,
)
from .rng import rng_for
from .sampling import random_bistochastic_spec, random_qudit_state
from .transition import (
    QubitSwapParams,
    build_transition_matrix,
    qubit_transition_matrix,
    read_transition_matrix,
    write_transition_matrix,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_TRUNCATION = 3
EXIT_CONVERGENCE = 4
EXIT_REDUCIBLE = 5

ENSEMBLE_HEADER = ["run", "step", "state_class", "mean_energy",
                   "ergotropy", "leaked_mass"]
STATIONARY_HEADER = ["level", "p_a", "p_b"]
FUEL_HEADER = ["level", "prob"]

VIOLATION_MARGIN = 1e-6
ENSEMBLE_CLASS_CYCLE = (
    StateClass.STRICTLY_PASSIVE,
    StateClass.ACTIVE,
    StateClass.MAXIMALLY_MIXED,
)


def worker_count(requested: int | None) -> int:
    limit = os.environ.get("COLLIDE_CHARGE_THREADS")
    workers = requested if requested and requested > 0 else 1
    if limit is not None:
        workers = min(workers, max(int(limit), 1))
    return workers


def parse_alpha_profile(text: str):
    """Swap profiles: 'const:X' or 'harmonic' (alpha_n = 1/2 + 1/(2n))."""
    if text.startswith("const:"):
        value = float(text.split(":", 1)[1])
        if not 0.0 <= value <= 1.0:
            raise ValidationError(f"alpha constant {value} outside [0, 1]")
        return lambda count: QubitSwapParams.constant(value, count)
    if text == "harmonic":
        return lambda count: QubitSwapParams.harmonic(count)
    raise ValidationError(
        f"unknown alpha profile {text!r}; use 'const:X' or 'harmonic'")


def _resolve(args: argparse.Namespace, config: dict, key: str, default):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in config:
        return config[key]
    return default


def _require(args: argparse.Namespace, config: dict, key: str):
    value = _resolve(args, config, key, None)
    if value is None:
        raise ValidationError(f"missing required option --{key.replace('_', '-')}")
    return value


def _load_config(args: argparse.Namespace) -> dict:
    path = getattr(args, "config", None)
    if path is None:
        return {}
    with open(path) as handle:
        loaded = json.load(handle)
    if not isinstance(loaded, dict):
        raise ValidationError("config file must hold a JSON object")
    return loaded


def _prepare_outdir(out: str) -> Path:
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    return outdir


def _echo_config(outdir: Path, resolved: dict) -> None:
    with (outdir / "config.json").open("w") as handle:
        json.dump(resolved, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _fmt(value: float) -> str:
    return f"{value:.17g}"


# ---------------------------------------------------------------------------
# regimes


def default_truncation(s1: float, s2: float, max_steps: int) -> int:
    """200 for the recurrent regime; transient runs get drift * steps
    headroom plus a diffusive margin (adaptive growth still backstops)."""
    drift = max(s2 - s1, 0.0)
    if s1 > s2:
        return 200
    return int(np.ceil(8.0 * np.sqrt(max_steps) + drift * max_steps)) + 2


def run_regimes(s1: float, s2: float, steps: list, truncation: int | None,
                outdir: Path, alpha_profile: str = "const:1",
                fixed_truncation: bool = False,
                leak_budget: float = 1e-9) -> dict:
    if abs(s1 + s2 - 1.0) > 1e-12:
        raise ValidationError(f"s1 + s2 must equal 1, got {s1 + s2!r}")
    if not steps or any(int(m) < 0 for m in steps):
        raise ValidationError("steps must be non-negative integers")
    steps = sorted(int(m) for m in steps)
    max_steps = steps[-1]
    xi = QuditState(np.array([s1, s2]))
    profile = parse_alpha_profile(alpha_profile)
    n0 = truncation if truncation is not None else default_truncation(
        s1, s2, max_steps)

    def factory(n: int):
        return qubit_transition_matrix(profile(n), xi, n)

    p0 = BatteryDistribution.point(1, n0)
    if fixed_truncation:
        traj = evolve(factory(n0), p0, max_steps, snapshot_at=steps,
                      leak_budget=leak_budget)
    else:
        traj = evolve_adaptive(factory, p0, max_steps, initial_n=n0,
                               snapshot_at=steps)

    verdict = classify_qubit_chain(profile(max(n0 + 1, 8)), xi)
    write_trajectory_csv(traj, outdir / "trajectory.csv")
    snapshot_files = []
    by_step = dict(traj.snapshots)
    for m in steps:
        path = outdir / f"snapshot_m{m}.csv"
        write_snapshot_csv([(m, by_step[m])], path)
        snapshot_files.append(path.name)
    return {
        "verdict": verdict.verdict.value,
        "method": verdict.method,
        "snapshots": snapshot_files,
        "final_truncation": traj.final.n,
    }


def cmd_regimes(args: argparse.Namespace) -> int:
    config = _load_config(args)
    s1 = float(_require(args, config, "s1"))
    s2 = float(_require(args, config, "s2"))
    steps = _require(args, config, "steps")
    truncation = _resolve(args, config, "truncation", None)
    alpha = _resolve(args, config, "alpha", "const:1")
    out = _require(args, config, "out")
    fixed = bool(_resolve(args, config, "fixed_truncation", False))
    leak_budget = float(_resolve(args, config, "leak_budget", 1e-9))
    outdir = _prepare_outdir(out)
    _echo_config(outdir, {
        "subcommand": "regimes", "s1": s1, "s2": s2, "steps": list(steps),
        "truncation": truncation, "alpha": alpha, "out": str(out),
        "fixed_truncation": fixed, "leak_budget": leak_budget,
    })
    result = run_regimes(s1, s2, list(steps), truncation, outdir, alpha,
                         fixed, leak_budget)
    print(f"chain_class = {result['verdict']} ({result['method']})")
    print(f"snapshots = {' '.join(result['snapshots'])}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# ensemble


def _ensemble_single_run(run: int, d: int, steps: int, seed: int,
                         initial_level: int, n0: int):
    constraint = ENSEMBLE_CLASS_CYCLE[run % len(ENSEMBLE_CLASS_CYCLE)]
    fuel = random_qudit_state(d, constraint, rng_for(seed, run, 0))

    def factory(n: int):
        spec = random_bistochastic_spec(d, n + d - 1, seed, stream=(run, 1))
        return build_transition_matrix(spec, fuel, n)

    p0 = BatteryDistribution.point(initial_level, max(n0, initial_level))
    traj = evolve_adaptive(factory, p0, steps, initial_n=n0)
    return constraint, traj


def run_ensemble(d: int, num_runs: int, steps: int, seed: int, outdir: Path,
                 initial_level: int = 1, truncation: int = 200,
                 workers: int = 1) -> str:
    """Evolve ``num_runs`` random chains, write the ensemble CSV, and
    return the summary text (recomputable from the CSV alone)."""
    if d < 2 or num_runs < 1 or steps < 1:
        raise ValidationError("need d >= 2, num_runs >= 1, steps >= 1")
    results: list = [None] * num_runs
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {
                pool.submit(_ensemble_single_run, run, d, steps, seed,
                            initial_level, truncation): run
                for run in range(num_runs)
            }
            for future, run in futures.items():
                results[run] = future.result()
    else:
        for run in range(num_runs):
            results[run] = _ensemble_single_run(
                run, d, steps, seed, initial_level, truncation)

    csv_path = outdir / "ensemble.csv"
    with csv_path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(ENSEMBLE_HEADER)
        for run, (constraint, traj) in enumerate(results):
            for i in range(traj.steps.size):
                writer.writerow([
                    run, int(traj.steps[i]), constraint.value,
                    _fmt(traj.mean_energy[i]),
                    _fmt(traj.ergotropy[i]),
                    _fmt(traj.leaked_mass[i]),
                ])
    summary = summarize_ensemble_csv(csv_path)
    (outdir / "summary.txt").write_text(summary)
    return summary


def summarize_ensemble_csv(path) -> str:
    """Second-Law summary derived purely from the ensemble CSV."""
    runs: dict = {}
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        for row in reader:
            run = int(row["run"])
            entry = runs.setdefault(run, {"class": row["state_class"],
                                          "steps": [], "ergotropy": []})
            entry["steps"].append(int(row["step"]))
            entry["ergotropy"].append(float(row["ergotropy"]))
    lines = [f"runs = {len(runs)}"]
    violations = []
    passive_final_max = 0.0
    passive_runs = 0
    for run in sorted(runs):
        entry = runs[run]
        if entry["class"] == StateClass.ACTIVE.value:
            continue
        passive_runs += 1
        final_step = max(entry["steps"])
        checkpoint = final_step // 10
        erg = dict(zip(entry["steps"], entry["ergotropy"]))
        passive_final_max = max(passive_final_max, erg[final_step])
        if erg[final_step] > erg[checkpoint] + VIOLATION_MARGIN:
            violations.append(run)
    lines.append(f"passive_fuel_runs = {passive_runs}")
    lines.append(f"passive_fuel_max_final_ergotropy = {_fmt(passive_final_max)}")
    lines.append(f"violation_candidates = {len(violations)}")
    for run in violations:
        lines.append(f"violation_candidate_run = {run}")
    return "\n".join(lines) + "\n"


def cmd_ensemble(args: argparse.Namespace) -> int:
    config = _load_config(args)
    d = int(_resolve(args, config, "d", 5))
    num_runs = int(_require(args, config, "runs"))
    steps = int(_require(args, config, "steps"))
    seed = _require(args, config, "seed")
    out = _require(args, config, "out")
    initial_level = int(_resolve(args, config, "initial_level", 1))
    truncation = int(_resolve(args, config, "truncation", 200))
    workers = worker_count(_resolve(args, config, "workers", 1))
    outdir = _prepare_outdir(out)
    _echo_config(outdir, {
        "subcommand": "ensemble", "d": d, "runs": num_runs, "steps": steps,
        "seed": int(seed), "out": str(out), "initial_level": initial_level,
        "truncation": truncation, "workers": workers,
    })
    summary = run_ensemble(d, num_runs, steps, int(seed), outdir,
                           initial_level, truncation, workers)
    print(summary, end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# stationary


def run_stationary(d: int, seed_a: int, seed_b: int, outdir: Path,
                   truncation: int = 200, tol: float = 1e-12,
                   max_iters: int = 1_000_000, max_doublings: int = 5) -> dict:
    fuel = random_qudit_state(d, StateClass.STRICTLY_PASSIVE,
                              rng_for(seed_a, 0))
    # Nearly balanced fuel needs a wide window before the truncated chain
    # holds its Gibbs-like state faithfully; grow until both solves converge.
    results = None
    reason = ""
    for attempt in range(max_doublings + 1):
        n = truncation * 2 ** attempt
        candidates = []
        for seed in (seed_a, seed_b):
            spec = random_bistochastic_spec(d, n + d - 1, seed, stream=(1,))
            t = build_transition_matrix(spec, fuel, n)
            try:
                outcome = solve_stationary(t, tol=tol, max_iters=max_iters)
            except ConvergenceError as exc:
                reason = f"seed {seed} at truncation {n}: {exc}"
                break
            if not outcome.converged:
                reason = f"seed {seed} at truncation {n}: {outcome.reason}"
                break
            candidates.append(outcome.distribution)
        if len(candidates) == 2:
            results = candidates
            truncation = n
            break
    if results is None:
        raise ConvergenceError(f"no stationary distribution found; {reason}")
    p_a, p_b = results

    with (outdir / "stationary.csv").open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(STATIONARY_HEADER)
        for level in range(1, truncation + 1):
            writer.writerow([level, _fmt(p_a.probs[level - 1]),
                             _fmt(p_b.probs[level - 1])])
    with (outdir / "fuel.csv").open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(FUEL_HEADER)
        for level, prob in enumerate(fuel.probs, start=1):
            writer.writerow([level, _fmt(prob)])

    return {
        "tv_distance": tv_distance(p_a, p_b),
        "ergotropy_a": ergotropy(p_a),
        "ergotropy_b": ergotropy(p_b),
        "fuel": [float(v) for v in fuel.probs],
    }


def cmd_stationary(args: argparse.Namespace) -> int:
    config = _load_config(args)
    d = int(_resolve(args, config, "d", 5))
    seed_a = _require(args, config, "seed_a")
    seed_b = _require(args, config, "seed_b")
    out = _require(args, config, "out")
    truncation = int(_resolve(args, config, "truncation", 200))
    tol = float(_resolve(args, config, "tol", 1e-12))
    max_iters = int(_resolve(args, config, "max_iters", 1_000_000))
    outdir = _prepare_outdir(out)
    _echo_config(outdir, {
        "subcommand": "stationary", "d": d, "seed_a": int(seed_a),
        "seed_b": int(seed_b), "out": str(out), "truncation": truncation,
        "tol": tol, "max_iters": max_iters,
    })
    result = run_stationary(d, int(seed_a), int(seed_b), outdir,
                            truncation, tol, max_iters)
    print(f"tv_distance = {_fmt(result['tv_distance'])}")
    print(f"ergotropy_a = {_fmt(result['ergotropy_a'])}")
    print(f"ergotropy_b = {_fmt(result['ergotropy_b'])}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# classify


def cmd_classify(args: argparse.Namespace) -> int:
    config = _load_config(args)
    qubit = _resolve(args, config, "qubit", None)
    matrix_path = _resolve(args, config, "matrix", None)
    if (qubit is None) == (matrix_path is None):
        raise ValidationError("specify exactly one of --qubit or --matrix")
    origin = int(_resolve(args, config, "origin", 1))
    trials = int(_resolve(args, config, "trials", 10_000))
    horizons = _resolve(args, config, "horizons", (1_000, 10_000, 100_000))
    seed = int(_resolve(args, config, "seed", 0))
    budget = EstimationBudget(trials=trials,
                              horizons=tuple(int(h) for h in horizons),
                              seed=seed)
    if qubit is not None:
        s1, s2 = (float(v) for v in qubit)
        if abs(s1 + s2 - 1.0) > 1e-12:
            raise ValidationError("qubit probabilities must sum to 1")
        alpha = _resolve(args, config, "alpha", "const:1")
        profile = parse_alpha_profile(alpha)
        truncation = _resolve(args, config, "truncation", None)
        n = int(truncation) if truncation is not None else max(
            64, int(8 * np.sqrt(max(budget.horizons))))
        result = classify_qubit_chain(profile(n + 1), QuditState([s1, s2]),
                                      budget=budget, truncation=n)
    else:
        t = read_transition_matrix(matrix_path)
        result = classify_empirical(t, origin, budget)
    report = format_report(result)
    out = _resolve(args, config, "out", None)
    if out is not None:
        Path(out).write_text(report)
    print(report, end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sample


def cmd_sample(args: argparse.Namespace) -> int:
    config = _load_config(args)
    d = int(_resolve(args, config, "d", 5))
    seed = _require(args, config, "seed")
    truncation = int(_resolve(args, config, "truncation", 64))
    constraint_name = _resolve(args, config, "constraint", None)
    out = _require(args, config, "out")
    outdir = _prepare_outdir(out)
    constraint = StateClass(constraint_name) if constraint_name else None
    _echo_config(outdir, {
        "subcommand": "sample", "d": d, "seed": int(seed),
        "truncation": truncation,
        "constraint": constraint.value if constraint else None,
        "out": str(out),
    })
    fuel = random_qudit_state(d, constraint, rng_for(int(seed), 0))
    spec = random_bistochastic_spec(d, truncation + d - 1, int(seed),
                                    stream=(1,))
    t = build_transition_matrix(spec, fuel, truncation)
    write_transition_matrix(t, outdir / "matrix.txt")
    with (outdir / "fuel.json").open("w") as handle:
        json.dump({"probs": [float(v) for v in fuel.probs]}, handle, indent=2)
        handle.write("\n")
    print(f"matrix = {outdir / 'matrix.txt'}")
    print(f"fuel_class = {constraint.value if constraint else 'unconstrained'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser and entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="collide-charge",
        description="Repeated collisional charging of an oscillator battery",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p):
        p.add_argument("--config", type=str, default=None,
                       help="JSON config file; flags take precedence")

    p = sub.add_parser("regimes", help="qubit swap chain from the ground state")
    add_common(p)
    p.add_argument("--s1", type=float)
    p.add_argument("--s2", type=float)
    p.add_argument("--steps", type=int, nargs="+")
    p.add_argument("--truncation", type=int)
    p.add_argument("--alpha", type=str)
    p.add_argument("--fixed-truncation", dest="fixed_truncation",
                   action="store_const", const=True)
    p.add_argument("--leak-budget", dest="leak_budget", type=float)
    p.add_argument("--out", type=str)
    p.set_defaults(func=cmd_regimes)

    p = sub.add_parser("ensemble", help="random d-level charging ensemble")
    add_common(p)
    p.add_argument("--d", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--initial-level", dest="initial_level", type=int)
    p.add_argument("--truncation", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", type=str)
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("stationary", help="two stationary states, one fuel")
    add_common(p)
    p.add_argument("--d", type=int)
    p.add_argument("--seed-a", dest="seed_a", type=int)
    p.add_argument("--seed-b", dest="seed_b", type=int)
    p.add_argument("--truncation", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--out", type=str)
    p.set_defaults(func=cmd_stationary)

    p = sub.add_parser("classify", help="chain classification report")
    add_common(p)
    p.add_argument("--qubit", type=float, nargs=2, metavar=("S1", "S2"))
    p.add_argument("--alpha", type=str)
    p.add_argument("--matrix", type=str)
    p.add_argument("--origin", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--horizons", type=int, nargs="+")
    p.add_argument("--truncation", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=str)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("sample", help="sample and serialize a random chain")
    add_common(p)
    p.add_argument("--d", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--truncation", type=int)
    p.add_argument("--constraint", type=str,
                   choices=[c.value for c in StateClass])
    p.add_argument("--out", type=str)
    p.set_defaults(func=cmd_sample)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except TruncationOverflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRUNCATION
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except ReducibleChainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REDUCIBLE


if __name__ == "__main__":
    sys.exit(main())
