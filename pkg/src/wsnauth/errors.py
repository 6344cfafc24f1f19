"""Exception hierarchy shared by every protocol layer.

Each class name doubles as the short error name printed by the CLI
(``ABORT IdMismatch``), so keep them stable.
"""


class WsnAuthError(Exception):
    """Base class for everything raised by this package."""

    @property
    def name(self) -> str:
        return type(self).__name__


class ParamError(WsnAuthError):
    pass


class DecodeError(WsnAuthError):
    pass


class UnknownType(DecodeError):
    pass


class LengthMismatch(DecodeError):
    pass


class InvalidPoint(DecodeError):
    pass


class IdError(WsnAuthError):
    """Identity is empty or longer than ``id_len``."""


class ProtocolError(WsnAuthError):
    """A role rejected a message and aborted its session."""


class StaleTimestamp(ProtocolError):
    pass


class ReplayDetected(ProtocolError):
    pass


class BadMac(ProtocolError):
    pass


class IdMismatch(ProtocolError):
    pass


class UnknownSensor(ProtocolError):
    pass


class BadAuthenticator(ProtocolError):
    pass


class UpdateRejected(ProtocolError):
    """Gateway answered a password update request with a failure status."""


class AlreadyRegistered(WsnAuthError):
    pass


class NotAccepted(WsnAuthError):
    pass


class UnknownEntity(WsnAuthError):
    pass


class NotFound(WsnAuthError):
    pass
