class DegenerateDesignError(ValueError):
    """Fiducial frames do not span the operator space."""


class NoLinearGaugeError(ValueError):
    """Two gate sets are not related by a linear gauge transformation."""
