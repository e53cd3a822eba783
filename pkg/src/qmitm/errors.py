"""Exception types shared across the package; the CLI maps them to exit codes."""


class ParameterError(ValueError):
    """Malformed arguments (exit code 2)."""


class SizeLimitError(ValueError):
    """Requested size exceeds a desk-scale guard (exit code 3)."""


class NoKeyFound(RuntimeError):
    """No key tuple is consistent with the pairs (exit code 4)."""


class AmbiguousKey(RuntimeError):
    """Several key tuples survive every pair (exit code 4)."""


class InfeasibleSearch(ValueError):
    pass


class Undefined(ValueError):
    pass
