"""Exception types, grouped by the CLI exit code they map to.

Config errors exit 2, precondition violations exit 3, anything else 4.
"""


class ConfigError(Exception):
    """Unresolvable name or malformed configuration."""


class PreconditionError(ValueError):
    """A documented precondition of an operation does not hold."""


class BudgetError(PreconditionError):
    """Invalid privacy budget parameters."""


class StepBudgetExhaustedError(PreconditionError):
    """Attempt to step past the accounted horizon T."""


class CertificationRefusedError(PreconditionError):
    """Optimizer is not a pure postprocessing of privatized gradients."""


class WrongTheoremError(PreconditionError):
    """Hyperparameters select the other convergence theorem."""


class HorizonTooShortError(PreconditionError):
    """Effective horizon T - beta1/(1 - beta1) is not positive."""


class AdmissibilityError(PreconditionError):
    """delta0 sits below its concentration floor."""


class UndefinedBoundError(PreconditionError):
    """Bound formula is undefined for these inputs (e.g. bias-corrected R at phi = 0)."""


class TrainingError(RuntimeError):
    """Failure inside the training loop, annotated with the step index."""

    def __init__(self, step: int, cause: Exception):
        super().__init__(f"step {step}: {cause}")
        self.step = step
