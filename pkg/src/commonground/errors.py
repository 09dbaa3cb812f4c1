"""Exception hierarchy for the commonground engine."""


class CommonGroundError(Exception):
    """Base class for all engine errors."""


class ScenarioError(CommonGroundError):
    """A scenario document violates the schema. Carries the offending path."""

    def __init__(self, path, message):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")


class IntegrityError(CommonGroundError):
    """Model invariant violated (dangling literal arg, duplicate symbol, bad counter)."""


class NotInDatabaseError(CommonGroundError):
    """An object class is not part of the object database."""


class DomainSyntaxError(CommonGroundError):
    def __init__(self, line, column, message):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class DomainSemanticError(CommonGroundError):
    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class UnparseableQueryError(CommonGroundError):
    """The user query did not contain a recognizable action request."""


class ClarificationNeeded(CommonGroundError):
    """The user turn could not be acted on; ask the user to rephrase or elaborate.

    Not a failure: sessions surface ``message`` as a robot turn and keep state
    unchanged.
    """

    def __init__(self, message):
        self.message = message
        super().__init__(message)


class BackendError(CommonGroundError):
    """A remote language-model backend failed (transport, HTTP status, body)."""

    def __init__(self, category, message):
        self.category = category
        super().__init__(f"{category}: {message}")


class ExtractionError(CommonGroundError):
    """No parsable final answer found in a model response."""


class OracleUnavailableError(CommonGroundError):
    """No scene and no external perception oracle configured."""


class UndefinedMetricError(CommonGroundError):
    """A metric was requested over zero labeled transcripts."""


class PhaseError(CommonGroundError):
    """A session operation was issued in the wrong dialogue phase."""
