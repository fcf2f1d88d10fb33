"""Exception hierarchy."""


class StructuralError(ValueError):
    """Malformed input: wrong shapes, bad labels, reducible graphs."""


class DegeneracyError(ValueError):
    """A derived stationary weight vanished, contradicting irreducibility."""


class HypothesisError(ValueError):
    """A standing hypothesis needed downstream does not hold within tolerance."""


class CompletionInvalidError(ValueError):
    """An assembled chain breaks one of the completed-chain identities.

    ``failures`` maps identity name to its sup-norm residual.
    """

    def __init__(self, failures):
        self.failures = dict(failures)
        detail = ", ".join(f"{k} (residual {v:.3g})" for k, v in self.failures.items())
        super().__init__(f"completed chain violates: {detail}")


class InfeasibleOrDegenerateError(RuntimeError):
    """The product-form iteration failed to converge.

    Either the support/marginal constraints admit no solution, or they only
    admit solutions with zeros on allowed edges. Run the feasibility LP to
    tell the two apart. ``block`` is set when raised for one labyrinth of a
    partitioned spec; ``certificate`` carries a Farkas certificate when the LP
    proved infeasibility.
    """

    def __init__(self, message, *, block=None, certificate=None):
        self.block = block
        self.certificate = certificate
        if block is not None:
            message = f"block {block}: {message}"
        super().__init__(message)


class DegenerateSupportError(InfeasibleOrDegenerateError):
    """Constraints are feasible, but not with every allowed edge positive."""


class IndeterminateError(RuntimeError):
    """The LP could not certify either branch within tolerance."""
