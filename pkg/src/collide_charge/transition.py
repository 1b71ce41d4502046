"""Energy-shell block specifications and the banded collision transition matrix.

A strictly energy-preserving collision between the oscillator and a
d-level fuel system is block diagonal over total-energy shells: shell n
couples the basis states (battery level n+1-i, fuel level i) for
i = 1..min(n, d). Feeding diagonal fuel populations through the squared
moduli of those blocks compiles the collision into a column-stochastic
matrix T on battery levels with band width 2(d-1)+1:

    T[k, m] = sum_n sum_{i,j} B_n[i, j] * s[j]   where m = n+1-j, k = n+1-i.

The matrix is truncated to levels 1..N. Columns within d-1 of the edge
lose the part of their mass that would land above level N; that deficit
is what ``apply`` routes into ``leaked_mass``. Blocks for shells up to
N+d-1 contribute to the retained window, so callers who care about the
edge columns should provide that many shells.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import BatteryDistribution, QuditState
from .errors import DimensionMismatchError, ValidationError

__all__ = [
    "BlockKind",
    "BlockSpec",
    "QubitSwapParams",
    "TransitionMatrix",
    "swap_unitary_blocks",
    "identity_unitary_blocks",
    "qubit_swap_blocks",
    "unistochastic_from_blocks",
    "build_transition_matrix",
    "qubit_transition_matrix",
    "oracle_collision_step",
    "write_transition_matrix",
    "read_transition_matrix",
]

BLOCK_TOL = 1e-10


class BlockKind(enum.Enum):
    UNITARY = "unitary"
    BISTOCHASTIC = "bistochastic"


def _check_unitary_block(block: np.ndarray, shell: int):
    gram = block.conj().T @ block
    if np.abs(gram - np.eye(block.shape[0])).max() > BLOCK_TOL:
        raise ValidationError(f"shell {shell} block is not unitary")


def _check_bistochastic_block(block: np.ndarray, shell: int):
    if np.any(block < -BLOCK_TOL):
        raise ValidationError(f"shell {shell} block has negative entries")
    rows = block.sum(axis=1)
    cols = block.sum(axis=0)
    if np.abs(rows - 1.0).max() > BLOCK_TOL or np.abs(cols - 1.0).max() > BLOCK_TOL:
        raise ValidationError(f"shell {shell} block is not bistochastic")


@dataclass(frozen=True)
class BlockSpec:
    """Per-shell collision blocks, either unitary (complex) or bistochastic.

    ``blocks[n-1]`` is the shell-n block of size min(n, d). Shell 1 is a
    single level, so its block is forced to the trivial 1x1 case.
    """

    kind: BlockKind
    blocks: tuple
    d: int

    def __post_init__(self):
        if self.d < 2:
            raise ValidationError("fuel dimension must be at least 2")
        if len(self.blocks) < 1:
            raise ValidationError("at least one shell block is required")
        complex_kind = self.kind is BlockKind.UNITARY
        checked = []
        for shell, raw in enumerate(self.blocks, start=1):
            block = np.asarray(raw, dtype=complex if complex_kind else float)
            size = min(shell, self.d)
            if block.shape != (size, size):
                raise ValidationError(
                    f"shell {shell} block has shape {block.shape}, "
                    f"expected ({size}, {size})"
                )
            if complex_kind:
                _check_unitary_block(block, shell)
            else:
                _check_bistochastic_block(block, shell)
            block = block.copy()
            block.setflags(write=False)
            checked.append(block)
        first = checked[0]
        if complex_kind:
            if abs(abs(first[0, 0]) - 1.0) > BLOCK_TOL:
                raise ValidationError("shell 1 block must have unit modulus")
        elif abs(first[0, 0] - 1.0) > BLOCK_TOL:
            raise ValidationError("shell 1 block must equal [[1]]")
        object.__setattr__(self, "blocks", tuple(checked))

    @property
    def n_shells(self) -> int:
        return len(self.blocks)

    def content_id(self) -> str:
        """Stable short identifier for provenance records."""
        digest = hashlib.sha256()
        digest.update(self.kind.value.encode())
        digest.update(str(self.d).encode())
        for block in self.blocks:
            digest.update(np.ascontiguousarray(block).tobytes())
        return digest.hexdigest()[:16]


@dataclass(frozen=True)
class QubitSwapParams:
    """Per-shell swap weights alpha_n for the two-level collision family.

    ``alphas[i]`` is alpha_{i+2}: the squared off-diagonal modulus of the
    shell-(i+2) block. alpha_n = 1 for all n is the full resonant swap.
    """

    alphas: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.alphas, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise ValidationError("alphas must be a non-empty 1-d sequence")
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise ValidationError("every alpha must lie in [0, 1]")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "alphas", arr)

    @classmethod
    def constant(cls, value: float, count: int) -> "QubitSwapParams":
        return cls(np.full(count, float(value)))

    @classmethod
    def harmonic(cls, count: int) -> "QubitSwapParams":
        """The lazy profile alpha_n = 1/2 + 1/(2n), n = 2..count+1."""
        shells = np.arange(2, count + 2, dtype=float)
        return cls(0.5 + 0.5 / shells)

    @property
    def max_shell(self) -> int:
        """Largest shell index n with a defined alpha_n."""
        return int(self.alphas.size) + 1

    def alpha(self, shell: int) -> float:
        if shell < 2 or shell > self.max_shell:
            raise ValidationError(f"alpha_{shell} is not defined")
        return float(self.alphas[shell - 2])

    @property
    def is_full_swap(self) -> bool:
        return bool(np.all(self.alphas == 1.0))


def swap_unitary_blocks(n_shells: int) -> BlockSpec:
    """Resonant full-swap collision: shell 1 trivial, every higher shell
    exchanges the battery and fuel excitation (alpha_n = 1)."""
    if n_shells < 1:
        raise ValidationError("n_shells must be at least 1")
    swap = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    blocks = [np.array([[1.0]], dtype=complex)]
    blocks.extend(swap for _ in range(n_shells - 1))
    return BlockSpec(BlockKind.UNITARY, tuple(blocks), d=2)


def identity_unitary_blocks(d: int, n_shells: int) -> BlockSpec:
    """Trivial collision: every shell block is the identity."""
    if n_shells < 1:
        raise ValidationError("n_shells must be at least 1")
    blocks = tuple(np.eye(min(n, d), dtype=complex) for n in range(1, n_shells + 1))
    return BlockSpec(BlockKind.UNITARY, blocks, d=d)


def qubit_swap_blocks(params: QubitSwapParams, n_shells: int) -> BlockSpec:
    """Bistochastic two-level family [[1-a, a], [a, 1-a]] per shell."""
    if n_shells > params.max_shell:
        raise ValidationError(
            f"need alphas up to shell {n_shells}, have {params.max_shell}"
        )
    blocks = [np.array([[1.0]])]
    for n in range(2, n_shells + 1):
        a = params.alpha(n)
        blocks.append(np.array([[1.0 - a, a], [a, 1.0 - a]]))
    return BlockSpec(BlockKind.BISTOCHASTIC, tuple(blocks), d=2)


def unistochastic_from_blocks(u: BlockSpec) -> BlockSpec:
    """Entrywise squared moduli of a unitary spec; bistochastic by construction."""
    if u.kind is not BlockKind.UNITARY:
        raise ValidationError("expected a unitary block spec")
    squared = tuple(np.abs(block) ** 2 for block in u.blocks)
    return BlockSpec(BlockKind.BISTOCHASTIC, squared, d=u.d)


@dataclass(frozen=True)
class TransitionMatrix:
    """Column-stochastic collision matrix stored as a diagonal band.

    ``band[offset + d - 1, m - 1]`` holds T[m + offset, m] for offsets
    -(d-1)..(d-1); everything off the band is structurally zero.
    Columns m <= n - (d-1) are interior: they sum to one. The last d-1
    columns may be sub-stochastic, their deficit being probability that
    crosses the truncation edge.
    """

    n: int
    d: int
    band: np.ndarray
    provenance: dict = field(compare=False)

    def __post_init__(self):
        if self.n < 1 or self.d < 2:
            raise ValidationError("need n >= 1 and d >= 2")
        band = np.asarray(self.band, dtype=float)
        if band.shape != (2 * self.d - 1, self.n):
            raise ValidationError(
                f"band shape {band.shape}, expected {(2 * self.d - 1, self.n)}"
            )
        if np.any(band < -BLOCK_TOL) or np.any(band > 1.0 + BLOCK_TOL):
            raise ValidationError("transition entries must lie in [0, 1]")
        sums = band.sum(axis=0)
        if np.any(sums > 1.0 + BLOCK_TOL):
            raise ValidationError("column sums exceed 1")
        interior = sums[: self.interior_columns]
        if interior.size and np.abs(interior - 1.0).max() > BLOCK_TOL:
            raise ValidationError("interior columns are not stochastic")
        band = np.clip(band, 0.0, 1.0)
        band.setflags(write=False)
        object.__setattr__(self, "band", band)

    @property
    def interior_columns(self) -> int:
        """Number of leading columns unaffected by the truncation edge."""
        return max(self.n - (self.d - 1), 0)

    def entry(self, k: int, m: int) -> float:
        """T[k, m] with 1-based level indices."""
        if not (1 <= k <= self.n and 1 <= m <= self.n):
            raise ValidationError(f"indices ({k}, {m}) outside 1..{self.n}")
        offset = k - m
        if abs(offset) >= self.d:
            return 0.0
        return float(self.band[offset + self.d - 1, m - 1])

    def column_sums(self) -> np.ndarray:
        return self.band.sum(axis=0)

    def dense(self) -> np.ndarray:
        full = np.zeros((self.n, self.n))
        for offset in range(-(self.d - 1), self.d):
            row = self.band[offset + self.d - 1]
            if offset >= 0:
                idx = np.arange(0, self.n - offset)
                full[idx + offset, idx] = row[: self.n - offset]
            else:
                idx = np.arange(-offset, self.n)
                full[idx + offset, idx] = row[-offset:]
        return full

    def apply(self, probs: np.ndarray) -> tuple[np.ndarray, float]:
        """One matrix-vector product; returns (new probs, leaked increment)."""
        probs = np.asarray(probs, dtype=float)
        if probs.shape != (self.n,):
            raise DimensionMismatchError(
                f"distribution has length {probs.size}, matrix expects {self.n}"
            )
        out = np.zeros(self.n)
        for offset in range(-(self.d - 1), self.d):
            row = self.band[offset + self.d - 1]
            if offset >= 0:
                out[offset:] += row[: self.n - offset] * probs[: self.n - offset]
            else:
                out[: self.n + offset] += row[-offset:] * probs[-offset:]
        leak = float(probs.sum() - out.sum())
        return out, max(leak, 0.0)

    @classmethod
    def from_dense(cls, matrix, d: int, provenance: dict | None = None
                   ) -> "TransitionMatrix":
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValidationError("expected a square matrix")
        n = matrix.shape[0]
        outside = matrix.copy()
        for offset in range(-(d - 1), d):
            np.fill_diagonal(outside[max(offset, 0):, max(-offset, 0):], 0.0)
        if np.abs(outside).max() > 0.0:
            raise ValidationError(f"entries outside band width {2 * d - 1}")
        band = np.zeros((2 * d - 1, n))
        for offset in range(-(d - 1), d):
            diag = np.diagonal(matrix, offset=-offset)
            if offset >= 0:
                band[offset + d - 1, : n - offset] = diag
            else:
                band[offset + d - 1, -offset:] = diag
        return cls(n, d, band, provenance or {"builder": "dense"})


def build_transition_matrix(spec: BlockSpec, xi: QuditState, n: int
                            ) -> TransitionMatrix:
    """Compile bistochastic shell blocks and fuel populations into T.

    Uses the shells that can reach the retained window (up to n + d - 1
    when available). Requires at least n shells; with fewer than n + d - 1
    the last columns lose additionally the within-window mass those
    missing shells would contribute.
    """
    if spec.kind is not BlockKind.BISTOCHASTIC:
        raise ValidationError(
            "transition matrices are built from bistochastic specs; "
            "convert unitary specs with unistochastic_from_blocks"
        )
    d = spec.d
    if xi.d != d:
        raise DimensionMismatchError(
            f"fuel dimension {xi.d} does not match block dimension {d}"
        )
    if n < 1:
        raise ValidationError("truncation must be at least 1")
    if spec.n_shells < n:
        raise ValidationError(
            f"need at least {n} shells for truncation {n}, have {spec.n_shells}"
        )
    s = xi.probs
    shells_used = min(spec.n_shells, n + d - 1)
    band = np.zeros((2 * d - 1, n))

    # Shells below d have smaller blocks; handle them entrywise.
    low = min(d - 1, shells_used)
    for shell in range(1, low + 1):
        block = spec.blocks[shell - 1]
        size = block.shape[0]
        for i in range(size):
            for j in range(size):
                k = shell - i
                m = shell - j
                if k <= n and m <= n:
                    band[(j - i) + d - 1, m - 1] += block[i, j] * s[j]

    # Shells d..shells_used all have d x d blocks; vectorize over n.
    if shells_used >= d:
        stacked = np.stack([spec.blocks[shell - 1]
                            for shell in range(d, shells_used + 1)])
        shells = np.arange(d, shells_used + 1)
        for i in range(d):
            for j in range(d):
                m = shells - j  # = shell + 1 - (j + 1), 1-based column
                keep = (m >= 1) & (m <= n) & (shells - i <= n)
                if not np.any(keep):
                    continue
                band[(j - i) + d - 1, m[keep] - 1] += stacked[keep, i, j] * s[j]

    provenance = {
        "builder": "block-spec",
        "spec_id": spec.content_id(),
        "spec_kind": spec.kind.value,
        "shells_used": int(shells_used),
        "fuel": [float(v) for v in s],
        "n": int(n),
    }
    return TransitionMatrix(n, d, band, provenance)


def qubit_transition_matrix(params: QubitSwapParams, xi: QuditState, n: int
                            ) -> TransitionMatrix:
    """Closed-form two-level transition matrix.

    Column 1 keeps T[1,1] = 1 - alpha_2 s_2 and T[2,1] = alpha_2 s_2;
    interior columns move down with alpha_m s_1, up with alpha_{m+1} s_2.
    Needs alphas through shell n + 1 and agrees exactly with
    ``build_transition_matrix`` on ``qubit_swap_blocks``.
    """
    if xi.d != 2:
        raise DimensionMismatchError("qubit transition matrix requires d = 2")
    if params.max_shell < n + 1:
        raise ValidationError(
            f"need alphas through shell {n + 1}, have {params.max_shell}"
        )
    s1, s2 = float(xi.probs[0]), float(xi.probs[1])
    # alpha_m for columns m = 1..n; alpha_1 is never used (kept 0)
    a_m = np.zeros(n)
    a_m[1:] = params.alphas[: n - 1]
    a_next = params.alphas[:n]  # alpha_{m+1} for m = 1..n

    band = np.zeros((3, n))
    band[0, 1:] = a_m[1:] * s1                           # T[m-1, m]
    band[2, :] = a_next * s2                             # T[m+1, m]
    band[1, :] = (1.0 - a_m) * s1 + (1.0 - a_next) * s2  # T[m, m]
    band[1, 0] = s1 + (1.0 - a_next[0]) * s2             # column 1 has no down move
    band[2, n - 1] = 0.0                                 # row n+1 is truncated

    provenance = {
        "builder": "qubit-swap",
        "alphas_id": hashlib.sha256(
            np.ascontiguousarray(params.alphas).tobytes()).hexdigest()[:16],
        "fuel": [s1, s2],
        "n": int(n),
    }
    return TransitionMatrix(n, 2, band, provenance)


def oracle_collision_step(u: BlockSpec, xi: QuditState, p: BatteryDistribution
                          ) -> BatteryDistribution:
    """One collision computed on the full joint space, as a cross-check.

    Assembles the dense joint unitary from the shell blocks, conjugates
    the diagonal battery (x) fuel input, partial-traces the fuel and
    returns the battery diagonal. Independent of the band compiler, so the
    two routes validate each other. Joint dimension is (p.n + d - 1) * d;
    keep p.n at a few thousand or below.
    """
    if u.kind is not BlockKind.UNITARY:
        raise ValidationError("the joint oracle requires a unitary block spec")
    d = u.d
    if xi.d != d:
        raise DimensionMismatchError(
            f"fuel dimension {xi.d} does not match block dimension {d}"
        )
    n_b = p.n + d - 1
    if u.n_shells < n_b:
        raise ValidationError(
            f"need {n_b} shells to cover battery support {p.n}, "
            f"have {u.n_shells}"
        )

    def idx(level: int, fuel: int) -> int:
        return (level - 1) * d + (fuel - 1)

    dim = n_b * d
    joint_u = np.eye(dim, dtype=complex)
    for shell in range(1, n_b + 1):
        block = u.blocks[shell - 1]
        size = block.shape[0]
        for i in range(1, size + 1):
            for j in range(1, size + 1):
                joint_u[idx(shell + 1 - i, i), idx(shell + 1 - j, j)] = \
                    block[i - 1, j - 1]

    weights = np.zeros(dim)
    for level in range(1, p.n + 1):
        for fuel in range(1, d + 1):
            weights[idx(level, fuel)] = p.probs[level - 1] * xi.probs[fuel - 1]
    rho = np.diag(weights.astype(complex))

    rho_out = joint_u @ rho @ joint_u.conj().T
    rho_battery = np.einsum("aibi->ab", rho_out.reshape(n_b, d, n_b, d))
    diag = np.real(np.diagonal(rho_battery))
    leaked = p.leaked_mass + float(diag[p.n:].sum())
    return BatteryDistribution(diag[: p.n].copy(), leaked)


def write_transition_matrix(t: TransitionMatrix, path) -> None:
    """Serialize: header line ``N d``, then ``k m value`` per band entry."""
    lines = [f"{t.n} {t.d}"]
    for m in range(1, t.n + 1):
        for offset in range(-(t.d - 1), t.d):
            k = m + offset
            if 1 <= k <= t.n:
                value = t.band[offset + t.d - 1, m - 1]
                lines.append(f"{k} {m} {value:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_transition_matrix(path) -> TransitionMatrix:
    """Inverse of :func:`write_transition_matrix`."""
    text = Path(path).read_text().strip().splitlines()
    if not text:
        raise ValidationError(f"{path}: empty transition matrix file")
    try:
        n, d = (int(tok) for tok in text[0].split())
    except ValueError as exc:
        raise ValidationError(f"{path}: malformed header {text[0]!r}") from exc
    band = np.zeros((2 * d - 1, n))
    for line in text[1:]:
        parts = line.split()
        if len(parts) != 3:
            raise ValidationError(f"{path}: malformed entry {line!r}")
        k, m, value = int(parts[0]), int(parts[1]), float(parts[2])
        offset = k - m
        if abs(offset) >= d or not (1 <= m <= n) or not (1 <= k <= n):
            raise ValidationError(f"{path}: entry ({k}, {m}) outside the band")
        band[offset + d - 1, m - 1] = value
    return TransitionMatrix(n, d, band, {"builder": "file", "path": str(path)})
