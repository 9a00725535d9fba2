"""Error taxonomy shared by all solver modules.

Every failure that can cross a module boundary carries the originating
module name and a short machine-parsable code; the CLI prints these as
the final ``ERROR <module> <code>`` line and maps them to exit codes.
"""


class SolverError(Exception):
    """Base error with a module tag and a stable short code."""

    exit_code = 1

    def __init__(self, module, code, message):
        self.module = module
        self.code = code
        self.message = message
        super().__init__(f"{module}: {message}")


class ConfigError(SolverError):
    """Configuration file is malformed or inconsistent."""

    exit_code = 2

    def __init__(self, code, message, line=None):
        self.line = line
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__("config", code, message)


class GridError(SolverError):
    def __init__(self, code, message):
        super().__init__("grid", code, message)


class FlowError(SolverError):
    def __init__(self, code, message, diagnostics=None):
        self.diagnostics = diagnostics
        super().__init__("flow", code, message)


class StationaryError(SolverError):
    def __init__(self, code, message):
        super().__init__("stationary", code, message)


class GeometryError(SolverError):
    def __init__(self, code, message):
        super().__init__("geometry", code, message)


class SourceError(SolverError):
    def __init__(self, code, message):
        super().__init__("source", code, message)
