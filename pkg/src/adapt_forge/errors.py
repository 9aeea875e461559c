"""Exception hierarchy shared by all adapt-forge modules."""


class AdaptForgeError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(AdaptForgeError):
    """An input value violates a documented invariant."""


class ParseError(AdaptForgeError):
    """A document could not be parsed.

    ``line`` and ``column`` are 1-based and present when the parser can
    point at the offending position.
    """

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            where = f"line {line}" if column is None else f"line {line}, column {column}"
            message = f"{message} ({where})"
        super().__init__(message)


# --- catalog ---------------------------------------------------------------

class DuplicateIdError(ValidationError):
    """An identifier that must be unique appears more than once."""


class DanglingRefError(ValidationError):
    """A document cites a normative reference it does not declare."""


# --- rule engine -----------------------------------------------------------

class RuleSyntaxError(ParseError):
    """The rule document violates the rule-definition grammar."""


class UnknownTransformationError(ValidationError):
    """A rule names a transformation outside the closed enumeration."""


class DuplicateRuleIdError(DuplicateIdError):
    """Two rules in one document share an id."""


class RuleConflictError(ValidationError):
    """Two rules with the same transformation can activate together."""


# --- prompt store ----------------------------------------------------------

class DuplicateVersionError(ValidationError):
    """A (templateId, version) pair is already registered."""


class UnknownTemplateError(AdaptForgeError):
    """No template registered under the requested id."""


class UnresolvedPlaceholderError(ValidationError):
    """Instantiation left a placeholder without a binding."""


# --- backends --------------------------------------------------------------

class BackendUnavailableError(AdaptForgeError):
    """The backend could not be reached; retryable."""


class AuthError(AdaptForgeError):
    """The backend rejected the credentials; not retryable."""


class MalformedResponseError(AdaptForgeError):
    """The backend reply contains no parseable response envelope."""


# --- gates -----------------------------------------------------------------

class EmptyTextError(ValidationError):
    """Text was empty after trimming whitespace."""


# --- ui --------------------------------------------------------------------

class UnmappedPictogramError(AdaptForgeError):
    """An annotation keyword has no entry in the pictogram map."""


class EmptyResultError(ValidationError):
    """A transform result carries no presentable content."""


# --- ledger ----------------------------------------------------------------

class PrivacyViolationError(ValidationError):
    """A record contains fields the ledger must never persist."""


class StorageError(AdaptForgeError):
    """The ledger file could not be written or read."""


# --- service ---------------------------------------------------------------

class JobFailedError(AdaptForgeError):
    """The backend stayed unavailable past its retry budget."""


class UnknownJobError(AdaptForgeError):
    """No job exists under the requested id."""


class UnknownComponentError(AdaptForgeError):
    """A feedback entry references a component absent from the schema."""


class IllegalTransitionError(AdaptForgeError):
    """A state change is not an edge of the governing state machine."""
