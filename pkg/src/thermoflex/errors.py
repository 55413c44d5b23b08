"""Exception hierarchy shared by every thermoflex module."""


class ThermoflexError(Exception):
    """Base class for all library errors."""


class ParameterError(ThermoflexError, ValueError):
    """Building parameters violate a physical or consistency identity."""


class ConfigurationError(ThermoflexError, ValueError):
    """A run configuration (time step, scenario file, CLI argument) is invalid."""


class ControlSaturationError(ThermoflexError):
    """Control rate outside [-beta, alpha]; the process stops being a Markov chain."""


class SingularStateError(ThermoflexError):
    """No appliances at the comfort-band boundary, so the output cannot be steered."""


class GainSelectionError(ThermoflexError):
    """Observer gain cannot be chosen because det(A~) is insensitive to L_2N."""


class SolverError(ThermoflexError):
    """Dispatch optimisation failed to converge."""

    def __init__(self, message, iterate=None):
        super().__init__(message)
        self.iterate = iterate


class SignalError(ThermoflexError, ValueError):
    """Regulation signal file or profile is malformed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SimulationError(ThermoflexError):
    """A module error raised inside the tick loop, tagged with where it happened."""

    def __init__(self, message, tick=None, building=None):
        where = []
        if tick is not None:
            where.append(f"tick {tick}")
        if building is not None:
            where.append(f"building {building!r}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)
        self.tick = tick
        self.building = building
