"""Shared exception and warning types."""


class ShapeError(ValueError):
    """Input dimensions do not match the network or frame."""


class WeightFileError(ValueError):
    """Weight JSON is malformed or violates the layer-chaining invariants."""


class RankDeficiencyError(ValueError):
    """A requested direction or spanning set has (numerically) zero extent.

    When raised mid-traversal the partial path is attached as ``partial_path``.
    """

    def __init__(self, message, partial_path=None):
        super().__init__(message)
        self.partial_path = partial_path


class UnderSampledError(ValueError):
    """Too few samples for the requested statistical estimate."""


class InvalidDirectionError(ValueError):
    """A guide direction is zero or has the wrong dimension."""


class BoundaryWarning(UserWarning):
    """A pre-activation is within tolerance of zero.

    The Jacobian is ill-defined on the (measure-zero) cell boundaries;
    callers may perturb the point and retry.
    """

    def __init__(self, layer_index, unit_indices):
        self.layer_index = int(layer_index)
        self.unit_indices = tuple(int(i) for i in unit_indices)
        super().__init__(
            f"pre-activation near zero at layer {self.layer_index}, "
            f"units {list(self.unit_indices)}"
        )
