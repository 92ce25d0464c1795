"""Exception types shared across the package."""


class MortarFlowError(Exception):
    """Base class for simulator errors."""


class MediaFormatError(MortarFlowError):
    """Permeability/porosity file does not match the expected layout."""


class MediaDataError(MortarFlowError):
    """Field values violate positivity requirements."""


class AssemblyError(MortarFlowError):
    """A local or global system could not be assembled."""


class SolverError(MortarFlowError):
    """A linear solve failed or did not reach its tolerance."""


class SolvabilityError(SolverError):
    """Right-hand side has a component in the null space of a singular operator."""


class StabilityError(MortarFlowError):
    """An explicit transport step left the admissible saturation range."""


class ConfigError(MortarFlowError):
    """Run configuration file is malformed or contains unknown keys."""
