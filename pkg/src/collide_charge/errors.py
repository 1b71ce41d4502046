"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes, so new failure modes should
subclass one of the existing roots rather than raising bare builtins.
"""


class ValidationError(ValueError):
    """Input violates a documented precondition or type invariant."""


class DimensionMismatchError(ValidationError):
    """Operands with incompatible truncation or block dimensions."""


class TruncationOverflowError(RuntimeError):
    """Leaked probability mass exceeded the configured budget.

    Carries the step index at which the budget was crossed.
    """

    def __init__(self, step: int, leaked_mass: float, budget: float):
        self.step = step
        self.leaked_mass = leaked_mass
        self.budget = budget
        super().__init__(
            f"leaked mass {leaked_mass:.3e} exceeded budget {budget:.3e} "
            f"at step {step}"
        )


class ConvergenceError(RuntimeError):
    """An iterative solver ran out of iterations without converging."""


class ReducibleChainError(RuntimeError):
    """Operation requires an irreducible chain but the retained graph splits."""
