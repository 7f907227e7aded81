"""Exception hierarchy. Each top-level family maps to one CLI exit code."""


class PupilEmoError(Exception):
    exit_code = 1


class InputError(PupilEmoError):
    """Bad or inconsistent input data."""

    exit_code = 4


class MalformedLine(InputError):
    def __init__(self, lineno, field, message):
        self.lineno = lineno
        self.field = field
        super().__init__(f"line {lineno}: field {field!r}: {message}")


class LabelUndeterminable(InputError):
    pass


class MixedLabels(InputError):
    pass


class ClockRegression(InputError):
    pass


class ImplausibleValue(InputError):
    pass


class ProcessingError(PupilEmoError):
    """A stage could not produce usable output."""

    exit_code = 5


class DegenerateWindow(ProcessingError):
    pass


class TooShort(ProcessingError):
    pass


class EmptyOutput(ProcessingError):
    pass


class SingleClassInput(ProcessingError):
    pass


class WidthMismatch(ProcessingError):
    pass


class OutOfRange(ProcessingError):
    pass


class TooFewRows(ProcessingError):
    pass


class LengthMismatch(ProcessingError):
    pass


class EmptyMatrix(ProcessingError):
    pass


class ConfigError(PupilEmoError):
    exit_code = 2


class MissingInput(PupilEmoError):
    exit_code = 3


class WorkdirLocked(PupilEmoError):
    exit_code = 6
