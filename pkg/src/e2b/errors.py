"""Exception taxonomy shared across the package.

Two families matter for the CLI exit codes: configuration problems
(bad flags, malformed files, schema mismatches) exit with code 2,
numerical failures (rank deficiency, divergence, empty kernel
neighborhoods) exit with code 3.
"""


class E2BError(Exception):
    """Base class for all package errors."""


class ConfigError(E2BError):
    """Invalid configuration, flags, or input file schema."""


class SchemaError(ConfigError):
    """CSV column roles cannot be resolved."""


class ParseError(ConfigError):
    """A cell could not be parsed; message carries row/column."""


class DataError(ConfigError):
    """Structurally invalid data (too few rows, non-finite values, shape mismatch)."""


class NumericalError(E2BError):
    """Numerical failure during estimation."""


class DegenerateDataError(NumericalError):
    """Zero-variance treatment or otherwise degenerate sample."""


class RankError(NumericalError):
    """A linear system is singular beyond the jitter escalation."""


class SparseRegionError(NumericalError):
    """Kernel regression denominator vanished at a grid point."""


class TrainingError(NumericalError):
    """Training diverged (NaN loss) or too many solver failures."""
