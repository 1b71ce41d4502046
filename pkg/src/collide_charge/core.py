"""Domain types and energy functionals.

The battery is a harmonic oscillator truncated to levels k = 1..N with
energy k (units of the ladder spacing, set to 1). The fuel is a d-level
system described only by its level populations. Probability that leaves
the truncation window is tracked explicitly in ``leaked_mass`` instead of
being renormalized away, so truncation error stays observable.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, ValidationError

__all__ = [
    "EnergyValue",
    "StateClass",
    "QuditState",
    "BatteryDistribution",
    "classify_state",
    "ergotropy",
    "mean_energy",
    "tv_distance",
    "geometric_distribution",
]

# Energies are plain floats in units of the level spacing.
EnergyValue = float

PROB_TOL = 1e-12
NEGATIVE_CLAMP = 1e-14


class StateClass(enum.Enum):
    """Passivity class of a diagonal state on an ascending energy ladder."""

    ACTIVE = "active"
    STRICTLY_PASSIVE = "strictly-passive"
    MAXIMALLY_MIXED = "maximally-mixed"

    @property
    def is_passive(self) -> bool:
        return self is not StateClass.ACTIVE


def _as_prob_vector(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be a 1-d probability vector")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class QuditState:
    """Diagonal state of the d-level fuel system, d >= 2.

    ``probs[j]`` is the population of level j+1; level j+1 sits at energy
    j+1 on the same ladder spacing as the battery.
    """

    probs: np.ndarray

    def __post_init__(self):
        arr = _as_prob_vector(self.probs, "qudit probabilities")
        if arr.size < 2:
            raise ValidationError("qudit dimension must be at least 2")
        if np.any(arr < -PROB_TOL) or np.any(arr > 1.0 + PROB_TOL):
            raise ValidationError("qudit probabilities must lie in [0, 1]")
        if abs(arr.sum() - 1.0) > PROB_TOL:
            raise ValidationError(
                f"qudit probabilities sum to {arr.sum()!r}, expected 1"
            )
        arr = np.clip(arr, 0.0, 1.0)
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    @property
    def d(self) -> int:
        return int(self.probs.size)


@dataclass(frozen=True)
class BatteryDistribution:
    """Truncated level populations of the battery plus leaked mass.

    Level k = 1..N carries energy k. ``leaked_mass`` is the probability
    that has crossed the truncation edge; it never decreases along an
    evolution. ``clamp_count`` records how many tiny negative entries
    (>= -1e-14, numerical noise) were clamped to zero on construction.
    """

    probs: np.ndarray
    leaked_mass: float = 0.0
    clamp_count: int = field(default=0, compare=False)

    def __post_init__(self):
        arr = _as_prob_vector(self.probs, "battery probabilities")
        if arr.size < 1:
            raise ValidationError("battery truncation must be at least 1")
        negatives = arr < 0.0
        if np.any(arr < -NEGATIVE_CLAMP):
            raise ValidationError(
                f"battery probabilities below clamp threshold: min={arr.min()!r}"
            )
        clamped = int(np.count_nonzero(negatives))
        if clamped:
            arr = np.where(negatives, 0.0, arr)
        if self.leaked_mass < 0.0:
            raise ValidationError("leaked_mass must be non-negative")
        total = arr.sum() + self.leaked_mass
        if abs(total - 1.0) > PROB_TOL:
            raise ValidationError(
                f"probabilities plus leaked mass sum to {total!r}, expected 1"
            )
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)
        object.__setattr__(self, "clamp_count", self.clamp_count + clamped)

    @property
    def n(self) -> int:
        return int(self.probs.size)

    @classmethod
    def point(cls, level: int, n: int) -> "BatteryDistribution":
        """Pure occupation of a single level (delta distribution)."""
        if not 1 <= level <= n:
            raise ValidationError(f"level {level} outside 1..{n}")
        probs = np.zeros(n)
        probs[level - 1] = 1.0
        return cls(probs)

    def padded(self, n: int) -> "BatteryDistribution":
        """Embed into a larger truncation window, keeping leaked mass."""
        if n < self.n:
            raise ValidationError("cannot pad to a smaller truncation")
        probs = np.zeros(n)
        probs[: self.n] = self.probs
        return BatteryDistribution(probs, self.leaked_mass, self.clamp_count)


def classify_state(xi: QuditState, tol: float = 1e-10) -> StateClass:
    """Classify fuel populations as active, strictly passive, or maximally mixed.

    Strictly passive means populations non-increasing with energy (the
    main-text convention: ground-heavy is passive); maximally mixed means
    all populations equal within ``tol``.
    """
    if tol <= 0:
        raise ValidationError("tol must be positive")
    s = xi.probs
    if s.max() - s.min() <= tol:
        return StateClass.MAXIMALLY_MIXED
    if np.all(np.diff(s) <= tol):
        return StateClass.STRICTLY_PASSIVE
    return StateClass.ACTIVE


def mean_energy(p: BatteryDistribution) -> EnergyValue:
    """Mean level energy, sum_k k * p_k. Leaked mass is excluded."""
    levels = np.arange(1, p.n + 1, dtype=float)
    return float(levels @ p.probs)


def ergotropy(p: BatteryDistribution) -> EnergyValue:
    """Extractable work of a diagonal battery state.

    For diagonal states this is the energy gap to the passive profile:
    mean energy of ``p`` minus mean energy of ``p`` sorted non-increasingly
    against the ascending ladder. Always non-negative, and exactly zero
    when the populations are already non-increasing.
    """
    levels = np.arange(1, p.n + 1, dtype=float)
    sorted_desc = np.sort(p.probs)[::-1]
    value = float(levels @ p.probs - levels @ sorted_desc)
    return max(value, 0.0)


def tv_distance(p: BatteryDistribution, q: BatteryDistribution) -> float:
    """Total variation distance between two equally truncated distributions."""
    if p.n != q.n:
        raise DimensionMismatchError(
            f"truncations differ: {p.n} vs {q.n}"
        )
    return 0.5 * float(np.abs(p.probs - q.probs).sum())


def geometric_distribution(ratio: float, n: int) -> BatteryDistribution:
    """Gibbs profile p_k proportional to ratio**(k-1) on levels 1..n.

    Nearest-level ratios are exact: p_{k+1} / p_k == ratio. A ratio >= 1
    has no normalizable infinite-ladder counterpart (the recurrent /
    transient boundary) and is rejected.
    """
    if not 0.0 < ratio < 1.0:
        raise ValidationError(
            f"geometric ratio must lie in (0, 1), got {ratio!r}; "
            "ratio >= 1 admits no normalizable Gibbs state"
        )
    if n < 1:
        raise ValidationError("truncation must be at least 1")
    weights = ratio ** np.arange(n, dtype=float)
    return BatteryDistribution(weights / weights.sum())
