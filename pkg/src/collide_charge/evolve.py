"""Repeated charging: distribution evolution and stochastic path sampling.

``evolve`` iterates the transition matrix on a battery distribution and
records mean energy, ergotropy and leaked mass each step. Recurrent-style
runs enforce a leakage budget; upward-drifting runs should instead use
``evolve_adaptive``, which doubles the truncation whenever the top slice
of levels starts to hold mass.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .core import BatteryDistribution, ergotropy, mean_energy
from .errors import TruncationOverflowError, ValidationError
from .rng import rng_for
from .transition import TransitionMatrix

__all__ = [
    "Trajectory",
    "PathStatus",
    "PathSample",
    "apply_step",
    "evolve",
    "evolve_adaptive",
    "sample_path",
    "write_trajectory_csv",
    "write_snapshot_csv",
]

TRAJECTORY_HEADER = ["step", "mean_energy", "ergotropy", "leaked_mass"]
SNAPSHOT_HEADER = ["step", "level", "prob"]

DEFAULT_LEAK_BUDGET = 1e-9
GROW_TAIL_FRACTION = 0.01
GROW_TAIL_MASS = 1e-12


def apply_step(t: TransitionMatrix, p: BatteryDistribution
               ) -> BatteryDistribution:
    """One charging step p' = T p, routing edge mass into leaked_mass.

    The leaked mass is maintained as the exact complement of the retained
    mass (monotonically clamped), so probability conservation holds to
    roundoff no matter how many steps are chained.
    """
    new_probs, _ = t.apply(p.probs)
    leaked = max(p.leaked_mass, 1.0 - float(new_probs.sum()))
    return BatteryDistribution(new_probs, leaked, p.clamp_count)


@dataclass
class Trajectory:
    """Per-step observables of an evolution, plus optional snapshots.

    Arrays all have length steps + 1; entry 0 describes the initial state.
    """

    steps: np.ndarray
    mean_energy: np.ndarray
    ergotropy: np.ndarray
    leaked_mass: np.ndarray
    snapshots: list = field(default_factory=list)
    final: BatteryDistribution | None = None

    def __post_init__(self):
        m = self.steps.size
        if not (self.mean_energy.size == self.ergotropy.size
                == self.leaked_mass.size == m):
            raise ValidationError("trajectory arrays must share one length")
        if np.any(np.diff(self.leaked_mass) < 0):
            raise ValidationError("leaked mass must be non-decreasing")

    @property
    def num_steps(self) -> int:
        return int(self.steps.size - 1)


class _Recorder:
    def __init__(self, num_steps: int, snapshot_every: int,
                 snapshot_at: Sequence[int]):
        self.mean = np.empty(num_steps + 1)
        self.erg = np.empty(num_steps + 1)
        self.leak = np.empty(num_steps + 1)
        self.snapshots: list = []
        marks = set(int(s) for s in snapshot_at)
        if snapshot_every > 0:
            marks.update(range(0, num_steps + 1, snapshot_every))
            marks.add(num_steps)
        self.marks = marks

    def record(self, step: int, p: BatteryDistribution):
        self.mean[step] = mean_energy(p)
        self.erg[step] = ergotropy(p)
        self.leak[step] = p.leaked_mass
        if step in self.marks:
            self.snapshots.append((step, p))

    def build(self, num_steps: int, final: BatteryDistribution) -> Trajectory:
        return Trajectory(
            steps=np.arange(num_steps + 1),
            mean_energy=self.mean,
            ergotropy=self.erg,
            leaked_mass=self.leak,
            snapshots=self.snapshots,
            final=final,
        )


def evolve(t: TransitionMatrix, p0: BatteryDistribution, num_steps: int,
           snapshot_every: int = 0, snapshot_at: Sequence[int] = (),
           leak_budget: float = DEFAULT_LEAK_BUDGET) -> Trajectory:
    """Iterate ``num_steps`` charging steps at fixed truncation.

    Raises :class:`TruncationOverflowError` (carrying the step index) as
    soon as the accumulated leaked mass exceeds ``leak_budget``.
    """
    if num_steps < 0:
        raise ValidationError("num_steps must be non-negative")
    if p0.n != t.n:
        raise ValidationError(
            f"initial distribution length {p0.n} does not match matrix {t.n}")
    rec = _Recorder(num_steps, snapshot_every, snapshot_at)
    p = p0
    rec.record(0, p)
    for step in range(1, num_steps + 1):
        p = apply_step(t, p)
        if p.leaked_mass > leak_budget:
            raise TruncationOverflowError(step, p.leaked_mass, leak_budget)
        rec.record(step, p)
    return rec.build(num_steps, p)


def evolve_adaptive(factory: Callable[[int], TransitionMatrix],
                    p0: BatteryDistribution, num_steps: int,
                    initial_n: int | None = None,
                    snapshot_every: int = 0, snapshot_at: Sequence[int] = (),
                    max_n: int = 2_000_000,
                    tail_fraction: float = GROW_TAIL_FRACTION,
                    tail_mass: float = GROW_TAIL_MASS) -> Trajectory:
    """Like :func:`evolve`, but regrows the truncation on demand.

    ``factory(n)`` must return the same chain truncated to ``n`` levels.
    Whenever the top ``tail_fraction`` of levels hold more than
    ``tail_mass`` probability, the truncation doubles and the distribution
    is re-embedded, so drifting (transient) runs never hit the edge.
    """
    if num_steps < 0:
        raise ValidationError("num_steps must be non-negative")
    n = int(initial_n) if initial_n is not None else p0.n
    n = max(n, p0.n)
    t = factory(n)
    p = p0.padded(n)
    rec = _Recorder(num_steps, snapshot_every, snapshot_at)
    rec.record(0, p)
    for step in range(1, num_steps + 1):
        p = apply_step(t, p)
        tail_start = n - max(int(n * tail_fraction), 1)
        if float(p.probs[tail_start:].sum()) > tail_mass:
            if 2 * n > max_n:
                raise TruncationOverflowError(step, p.leaked_mass, tail_mass)
            n = 2 * n
            t = factory(n)
            p = p.padded(n)
        rec.record(step, p)
    return rec.build(num_steps, p)


class PathStatus(enum.Enum):
    COMPLETED = "completed"
    EDGE_REACHED = "edge-reached"


@dataclass(frozen=True)
class PathSample:
    """A single realized level path k_0, k_1, ... of the charging chain."""

    levels: np.ndarray
    seed: int
    status: PathStatus

    def __post_init__(self):
        if self.levels.ndim != 1 or self.levels.size < 1:
            raise ValidationError("path must contain at least the start level")
        if np.any(self.levels < 1):
            raise ValidationError("levels must be >= 1")

    @property
    def num_steps(self) -> int:
        return int(self.levels.size - 1)


def step_levels(t: TransitionMatrix, levels: np.ndarray, uniforms: np.ndarray
                ) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized single step of the level walk.

    ``levels`` are 1-based current levels; ``uniforms`` one draw per
    walker. Returns (next levels, edge mask); walkers whose draw falls in
    the truncated column deficit are flagged as having crossed the edge
    and their level is left unchanged.
    """
    cdf = np.cumsum(t.band[:, levels - 1], axis=0)
    rank = (uniforms[None, :] >= cdf).sum(axis=0)
    edge = rank >= 2 * t.d - 1
    offsets = np.where(edge, 0, rank - (t.d - 1))
    return levels + offsets, edge


def sample_path(t: TransitionMatrix, k0: int, horizon: int, seed: int
                ) -> PathSample:
    """Draw one seeded path of at most ``horizon`` steps starting at k0.

    The path ends early with status EDGE_REACHED if the walk attempts to
    cross the truncation edge; consecutive levels always differ by less
    than the fuel dimension.
    """
    if not 1 <= k0 <= t.n:
        raise ValidationError(f"start level {k0} outside 1..{t.n}")
    if horizon < 1:
        raise ValidationError("horizon must be at least 1")
    rng = rng_for(seed)
    cdf = np.cumsum(t.band, axis=0)
    band_rows = 2 * t.d - 1
    center = t.d - 1
    levels = np.empty(horizon + 1, dtype=np.int64)
    levels[0] = k0
    current = k0
    status = PathStatus.COMPLETED
    taken = 0
    chunk = 4096
    while taken < horizon and status is PathStatus.COMPLETED:
        for u in rng.random(min(chunk, horizon - taken)):
            column = cdf[:, current - 1]
            rank = int(np.searchsorted(column, u, side="right"))
            if rank >= band_rows:
                status = PathStatus.EDGE_REACHED
                break
            taken += 1
            current += rank - center
            levels[taken] = current
    return PathSample(levels[: taken + 1].copy(), seed, status)


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """CSV schema: step,mean_energy,ergotropy,leaked_mass."""
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(TRAJECTORY_HEADER)
        for i in range(traj.steps.size):
            writer.writerow([
                int(traj.steps[i]),
                f"{traj.mean_energy[i]:.17g}",
                f"{traj.ergotropy[i]:.17g}",
                f"{traj.leaked_mass[i]:.17g}",
            ])


def write_snapshot_csv(snapshots, path) -> None:
    """CSV schema: step,level,prob. Accepts (step, distribution) pairs."""
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(SNAPSHOT_HEADER)
        for step, dist in snapshots:
            for level, prob in enumerate(dist.probs, start=1):
                writer.writerow([int(step), level, f"{prob:.17g}"])
