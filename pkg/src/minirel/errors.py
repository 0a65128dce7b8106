"""Exception taxonomy shared across the package.

Every error a client can trigger maps onto a stable wire code so that the
server never leaks a raw traceback over the socket.
"""

from __future__ import annotations


class MinirelError(Exception):
    """Base class for all errors raised by this package."""

    wire_code = "INTERNAL"


class MachineDefinitionError(MinirelError):
    """A machine was assembled inconsistently (duplicate node, dangling edge...)."""

    wire_code = "INTERNAL"


class StepLimitExceeded(MinirelError):
    """The automaton fired more shifts than its configured budget allows."""

    wire_code = "INTERNAL"

    def __init__(self, message: str, steps_taken: int):
        super().__init__(message)
        self.steps_taken = steps_taken


class RejectError(MinirelError):
    """The automaton stalled in a configuration that is not an accept."""

    wire_code = "SYNTAX"

    def __init__(self, message: str, node_id: str = "", position: int = 0,
                 expected: tuple = ()):
        super().__init__(message)
        self.node_id = node_id
        self.position = position
        self.expected = expected


class LexError(MinirelError):
    """The statement text contains a character sequence no token matches."""

    wire_code = "SYNTAX"


class ParseError(MinirelError):
    """The token stream is not a sentence of the SQL subset."""

    wire_code = "SYNTAX"

    def __init__(self, message: str, position: int = 0, expected: tuple = ()):
        super().__init__(message)
        self.position = position
        self.expected = expected


class NestingError(MinirelError):
    """A parse accepted with an unbalanced subquery frame stack."""

    wire_code = "SYNTAX"


class StorageError(MinirelError):
    """A record file or its metadata could not be read or written."""

    wire_code = "INTERNAL"


class UnknownTableError(MinirelError):
    wire_code = "UNKNOWN_TABLE"


class TableExistsError(MinirelError):
    wire_code = "TABLE_EXISTS"


class UnknownColumnError(MinirelError):
    wire_code = "UNKNOWN_COLUMN"


class TypeMismatchError(MinirelError):
    wire_code = "TYPE_MISMATCH"


class ConstraintError(MinirelError):
    """An integrity constraint rejected the statement; nothing was written."""

    wire_code = "CONSTRAINT"


class AdminDisabledError(MinirelError):
    """An administrative statement arrived while admin commands are off."""

    wire_code = "ADMIN_DISABLED"


class ProtocolError(MinirelError):
    """A frame violated the length-prefixed wire format."""

    wire_code = "PROTOCOL"


class LogCorrupt(MinirelError):
    """The statement log contains a line the replayer cannot parse."""

    wire_code = "INTERNAL"


class ReplayDivergence(MinirelError):
    """A statement that originally committed failed during replay."""

    wire_code = "INTERNAL"
