import itertools

import numpy as np
import pytest

from collide_charge import (
    BatteryDistribution,
    QuditState,
    QubitSwapParams,
    qubit_transition_matrix,
)


def brute_force_min_energy(probs) -> float:
    """Minimum of sum_k k * p[perm(k)] over all permutations (oracle)."""
    probs = list(probs)
    levels = range(1, len(probs) + 1)
    return min(
        sum(k * p for k, p in zip(levels, perm))
        for perm in itertools.permutations(probs)
    )


def brute_force_ergotropy(probs) -> float:
    levels = np.arange(1, len(probs) + 1)
    return float(levels @ np.asarray(probs)) - brute_force_min_energy(probs)


@pytest.fixture
def swap_chain():
    """Full-swap qubit chain factory: (s1, n) -> TransitionMatrix."""

    def make(s1: float, n: int):
        params = QubitSwapParams.constant(1.0, n + 1)
        return qubit_transition_matrix(params, QuditState([s1, 1.0 - s1]), n)

    return make


@pytest.fixture
def ground_state():
    def make(n: int) -> BatteryDistribution:
        return BatteryDistribution.point(1, n)

    return make
