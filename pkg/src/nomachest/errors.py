"""Exception types raised across the package."""


class InvalidDimensionError(ValueError):
    """A matrix or tensor has the wrong shape for the requested operation."""


class InvalidParameterError(ValueError):
    pass


class InvalidScenarioError(ValueError):
    """The user population cannot be clustered (e.g. odd user count)."""


class SingularMatrixError(ArithmeticError):
    """A Gram matrix is too ill-conditioned to invert.

    ``dim`` is the size of the offending square matrix and ``cond`` its
    estimated 2-norm condition number.
    """

    def __init__(self, dim, cond):
        self.dim = dim
        self.cond = cond
        super().__init__(f"{dim}x{dim} Gram matrix is singular to working precision (cond={cond:.3e})")


class InvalidBatchError(ValueError):
    pass


class InvalidArchitectureError(ValueError):
    pass


class InvalidModelError(ValueError):
    pass


class NonFiniteLossError(FloatingPointError):
    """Training produced a NaN/inf loss. Carries where it happened."""

    def __init__(self, epoch, batch, layer=None):
        self.epoch = epoch
        self.batch = batch
        self.layer = layer
        # history up to the failure; filled in by the trainer
        self.partial = None
        where = f"epoch {epoch}, batch {batch}"
        if layer is not None:
            where += f", first non-finite activation at layer {layer}"
        super().__init__(f"non-finite loss ({where})")


class ConfigError(ValueError):
    pass


class FormatError(ValueError):
    """A binary file has a bad magic, version or length."""
