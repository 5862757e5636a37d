"""Error hierarchy shared by the library and the CLI.

Exit codes: 2 config, 3 data, 4 numerical.
"""


class LGBMNetError(Exception):
    exit_code = 1


class ConfigError(LGBMNetError):
    """Invalid configuration value or incompatible shapes from config."""
    exit_code = 2


class DataError(LGBMNetError):
    """Malformed, truncated or inconsistent input data."""
    exit_code = 3


class NumericalError(LGBMNetError):
    """Non-finite values where finite ones are required (e.g. diverged loss)."""
    exit_code = 4
