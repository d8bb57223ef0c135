"""Exception types shared across the simulator.

The CLI maps them onto exit codes: configuration and input problems exit
with 2, runtime failures with 3.
"""


class ConfigError(ValueError):
    """Invalid configuration, lattice file or taxiway connectivity."""


class ScheduleError(ValueError):
    """Malformed or inconsistent departure schedule."""

    def __init__(self, message, line_number=None, offending=None):
        self.line_number = line_number
        self.offending = list(offending or [])
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class CalibrationError(ValueError):
    """Calibration target that no model parameter can reproduce."""


class SimulationError(RuntimeError):
    """Broken bookkeeping or a day that never finishes."""
