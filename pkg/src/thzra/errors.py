"""Exception types shared across the package."""


class ConfigError(Exception):
    """Base class for configuration problems (CLI exit code 2)."""


class MissingField(ConfigError):
    def __init__(self, field):
        super().__init__(f"missing required config field '{field}'")
        self.field = field


class OutOfRange(ConfigError):
    def __init__(self, field, value, bound):
        super().__init__(f"config field '{field}' = {value!r} violates {bound}")
        self.field = field
        self.value = value
        self.bound = bound


class NonIntegerShape(ConfigError):
    """Closed-form path-loss statistics require an integer Gamma shape k."""

    def __init__(self, k):
        super().__init__(f"closed-form evaluation requires integer shape k, got {k!r}")
        self.k = k


class ProfileMissing(ConfigError):
    """Deterministic absorption requested but no coefficient profile available."""


class DomainError(ValueError):
    """Argument outside the mathematical support of a density/CDF."""


class UnsupportedParams(ValueError):
    """Parameter combination the exact sampler deliberately refuses to approximate."""


class DegenerateParams(ValueError):
    """Removable singularity (z == rho) in the closed-form SNR statistics."""

    def __init__(self, z, rho):
        super().__init__(
            f"closed form is singular at z == rho (z={z:g}, rho={rho:g}); "
            "perturb beta, d or rho")
        self.z = z
        self.rho = rho


class InsufficientTail(RuntimeError):
    """Outage curve has too few usable high-SNR points for a slope fit."""


class EmptySample(ValueError):
    """Goodness-of-fit called with an empty or too-small sample."""
