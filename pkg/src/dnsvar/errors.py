"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration and data problems exit
with 2, numeric/model failures with 3.
"""


class DnsvarError(Exception):
    """Base class for package errors."""


class ConfigError(DnsvarError):
    """Bad configuration: unknown keys, missing schema entries, bad values."""


class DataError(DnsvarError):
    """Malformed input data (unparseable cells, duplicate months, gaps)."""


class NumericError(DnsvarError):
    """Numerical failure: singular systems, non-PD covariances, no convergence."""
