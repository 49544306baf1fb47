"""Exception hierarchy shared by all waysim modules."""


class WaysimError(Exception):
    """Base class for every error raised by waysim."""


class GridError(WaysimError, ValueError):
    """Invalid grid parameters or incompatible grids (spacing/lattice mismatch)."""


class SupportError(WaysimError, ValueError):
    """A state does not fit on its grid (support exceeds the grid or touches the edges)."""


class LeakageError(WaysimError):
    """Probability mass was lost off the edge of an output grid."""


class ConfigError(WaysimError, ValueError):
    """Malformed or inconsistent sweep configuration."""
