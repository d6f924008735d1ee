"""Exception hierarchy shared by all pipeline stages.

Exit-code mapping for the CLI: DataError subclasses -> 2,
ProviderError subclasses -> 3, anything else -> 1.
"""


class HatepipeError(Exception):
    """Base class for all pipeline errors."""


class DataError(HatepipeError):
    """A problem with input data or artifacts (CLI exit code 2)."""


class MissingFile(DataError):
    pass


class SchemaError(DataError):
    pass


class LabelError(DataError):
    pass


class DuplicateId(DataError):
    pass


class UnlabeledInstance(DataError):
    pass


class SchemeMismatch(DataError):
    pass


class ImageUnreadable(DataError):
    pass


class EmptyText(DataError):
    pass


class EmptyTrainSet(DataError):
    pass


class CoverageError(DataError):
    pass


class SpecError(DataError):
    pass


class MissingReport(DataError):
    pass


class UnlabeledGold(DataError):
    pass


class UnknownFormat(DataError):
    pass


class ProviderError(HatepipeError):
    """An external provider (OCR, translation, LLM) failed (CLI exit code 3)."""


class BackendError(HatepipeError):
    """A classifier backend failed."""


class ParseError(HatepipeError):
    """An LLM response carried no parseable label tag."""


class UnknownLabel(HatepipeError):
    """An LLM response carried a label outside the active scheme."""
