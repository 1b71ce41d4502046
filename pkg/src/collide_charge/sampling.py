"""Seeded random generation of collision blocks and fuel states.

Bistochastic blocks come from Sinkhorn normalization of i.i.d. uniform
positive matrices: simple, entrywise positive (so the induced chain stays
irreducible), though not uniform on the Birkhoff polytope. Unitary blocks
are Haar, via QR of a complex Gaussian with the phase fix. Fuel states are
flat-Dirichlet draws with optional passivity-class constraints.

Per-shell streams are derived as rng_for(seed, *stream, shell), so
extending a spec to more shells reproduces the existing ones bit for bit
(this is what lets adaptive truncation growth stay deterministic).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import QuditState, StateClass, classify_state
from .errors import ConvergenceError, ValidationError
from .rng import rng_for
from .transition import BlockKind, BlockSpec

__all__ = [
    "SamplerConfig",
    "random_bistochastic_block",
    "random_unitary_block",
    "random_qudit_state",
    "random_bistochastic_spec",
]

SINKHORN_TOL = 1e-12
SINKHORN_MAX_ITERS = 10_000
REJECTION_BUDGET = 100_000


@dataclass(frozen=True)
class SamplerConfig:
    """Everything needed to regenerate one sampled chain."""

    master_seed: int
    d: int
    n_shells: int
    state_class_constraint: StateClass | None = None
    sinkhorn_tol: float = SINKHORN_TOL
    sinkhorn_max_iters: int = SINKHORN_MAX_ITERS

    def __post_init__(self):
        if self.d < 2:
            raise ValidationError("d must be at least 2")
        if self.n_shells < 1:
            raise ValidationError("n_shells must be at least 1")
        if self.sinkhorn_tol <= 0 or self.sinkhorn_max_iters < 1:
            raise ValidationError("sinkhorn settings must be positive")


def random_bistochastic_block(size: int, rng: np.random.Generator,
                              tol: float = SINKHORN_TOL,
                              max_iters: int = SINKHORN_MAX_ITERS
                              ) -> np.ndarray:
    """Sinkhorn-normalized uniform-positive matrix with row and column
    sums 1 within ``tol``."""
    if size < 1:
        raise ValidationError("size must be at least 1")
    if size == 1:
        return np.array([[1.0]])
    matrix = rng.random((size, size))
    while np.any(matrix <= 0.0):
        matrix[matrix <= 0.0] = rng.random(int((matrix <= 0.0).sum()))
    residual = float("inf")
    for _ in range(max_iters):
        matrix /= matrix.sum(axis=1, keepdims=True)
        matrix /= matrix.sum(axis=0, keepdims=True)
        residual = max(
            np.abs(matrix.sum(axis=1) - 1.0).max(),
            np.abs(matrix.sum(axis=0) - 1.0).max(),
        )
        if residual < tol:
            return matrix
    raise ConvergenceError(
        f"Sinkhorn failed to reach {tol} in {max_iters} iterations "
        f"(residual {residual:.3e})")


def random_unitary_block(size: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Gaussian matrix."""
    if size < 1:
        raise ValidationError("size must be at least 1")
    z = (rng.standard_normal((size, size))
         + 1j * rng.standard_normal((size, size))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r)
    # Phase fix: without it QR sampling is not Haar.
    return q * (diag / np.abs(diag))


def random_qudit_state(d: int, constraint: StateClass | None,
                       rng: np.random.Generator,
                       max_draws: int = REJECTION_BUDGET) -> QuditState:
    """Flat-Dirichlet fuel state, optionally constrained to one passivity
    class. Strictly passive draws are sorted (exact ties rejected), active
    draws are rejection-sampled, maximally mixed is the uniform vector."""
    if d < 2:
        raise ValidationError("d must be at least 2")
    if constraint is StateClass.MAXIMALLY_MIXED:
        return QuditState(np.full(d, 1.0 / d))
    for _ in range(max_draws):
        probs = rng.dirichlet(np.ones(d))
        if constraint is None:
            return QuditState(probs)
        if constraint is StateClass.STRICTLY_PASSIVE:
            ordered = np.sort(probs)[::-1]
            if np.any(np.diff(ordered) == 0.0):
                continue
            return QuditState(ordered)
        if classify_state(QuditState(probs)) is StateClass.ACTIVE:
            return QuditState(probs)
    raise ConvergenceError(
        f"rejection budget of {max_draws} draws exhausted for {constraint}")


def random_bistochastic_spec(d: int, n_shells: int, master_seed: int,
                             stream: tuple = (),
                             tol: float = SINKHORN_TOL,
                             max_iters: int = SINKHORN_MAX_ITERS) -> BlockSpec:
    """Random collision spec with one Sinkhorn block per shell.

    Shell n draws from rng_for(master_seed, *stream, n), so specs with
    more shells extend shorter ones without changing the shared prefix.
    """
    blocks = []
    for shell in range(1, n_shells + 1):
        size = min(shell, d)
        shell_rng = rng_for(master_seed, *stream, shell)
        blocks.append(random_bistochastic_block(size, shell_rng, tol, max_iters))
    return BlockSpec(BlockKind.BISTOCHASTIC, tuple(blocks), d=d)
