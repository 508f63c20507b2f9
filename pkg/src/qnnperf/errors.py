"""Exception hierarchy shared across the toolkit."""


class QnnPerfError(Exception):
    """Base class for all toolkit errors."""


# --- graph parsing / validation ---

class GraphSyntaxError(QnnPerfError):
    """Input document is not well-formed (e.g. invalid JSON)."""


class SchemaError(QnnPerfError):
    """Document parses but violates the graph schema."""


class CycleError(QnnPerfError):
    """Graph contains a directed cycle."""


class ShapeError(QnnPerfError):
    """Edge tensor is inconsistent with its producer's attributes."""


# --- implementation configuration ---

class ConfigError(QnnPerfError):
    """Base class for implementation-config errors."""


class UnknownImplementation(ConfigError):
    """Implementation string outside the supported set."""


class InvalidBitWidth(ConfigError):
    """Bit-width outside the configured whitelist."""


class UnknownNodeId(ConfigError):
    """Config references a node id absent from the graph."""


class IllegalChoice(ConfigError):
    """Implementation choice is not legal for the node kind."""


class Unresolved(ConfigError):
    """A cost-bearing node has neither a binding nor a default."""


# --- quantization numerics ---

class DegenerateRange(QnnPerfError):
    """Quantization range with beta <= alpha."""


class DyadicUnderflow(QnnPerfError):
    """Scale too small for any positive mantissa at the given shift."""


# --- cost model ---

class WidthOverflow(QnnPerfError):
    """LUT index width exceeds the configured cap."""


# --- platform model ---

class InvariantViolation(QnnPerfError):
    """Platform specification violates a structural invariant."""


# --- scheduling ---

class Untileable(QnnPerfError):
    """Layer cannot be tiled to fit L1 (resident blocks too large)."""

    def __init__(self, message, node_id=None):
        super().__init__(message)
        self.node_id = node_id


# --- sweeps ---

class MissingAccuracy(QnnPerfError):
    """Accuracy objective requested but some rows carry no accuracy."""
