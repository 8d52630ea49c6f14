"""Exception hierarchy shared by every pulsewatch module."""


class PulseWatchError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(PulseWatchError, ValueError):
    """Input text could not be decoded.

    ``line`` is the 1-based line number in the source when known, so
    callers can report where the problem is.
    """

    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        loc = ""
        if source is not None:
            loc = f"{source}:"
        if line is not None:
            loc += f"{line}:"
        super().__init__(f"{loc} {message}".strip() if loc else message)


# ingest
class MissingHeaderError(ParseError):
    pass


class UnknownColumnLayoutError(ParseError):
    pass


class NonMonotonicTimeError(ParseError):
    pass


class EmptyInputError(PulseWatchError, ValueError):
    pass


class EmptyProfileListError(PulseWatchError, ValueError):
    pass


# model
class InsufficientDataError(PulseWatchError, ValueError):
    pass


class DegeneratePredictorError(PulseWatchError, ValueError):
    pass


class KTooLargeError(PulseWatchError, ValueError):
    pass


class ZeroTotalSSError(PulseWatchError, ValueError):
    pass


# detector
class OutOfOrderSampleError(PulseWatchError, ValueError):
    pass


# geoloc
class NmeaError(ParseError):
    pass


class BadChecksumError(NmeaError):
    pass


class MalformedFieldsError(NmeaError):
    pass


# alerting
class DeviceIdTooLongError(PulseWatchError, ValueError):
    pass


class InvalidDeviceIdError(PulseWatchError, ValueError):
    pass


class InvalidRecipientError(PulseWatchError, ValueError):
    pass


class NoContactsError(PulseWatchError, ValueError):
    pass


class FramingError(PulseWatchError, ValueError):
    pass
