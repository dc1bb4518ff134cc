"""Exception hierarchy shared across the package.

Every domain failure raises a subclass of :class:`MooseError` so callers
(CLI, HTTP layer) can map them to exit codes / status codes in one place.
"""

from __future__ import annotations


class MooseError(Exception):
    """Base class for all domain errors."""


# --- core domain -----------------------------------------------------------


class EmptyQuestion(MooseError):
    pass


class UnknownNode(MooseError):
    pass


class UnknownParent(MooseError):
    pass


class DuplicateNode(MooseError):
    pass


class StepIndexViolation(MooseError):
    pass


class StageFieldViolation(MooseError):
    """Inspiration/abstraction-level fields inconsistent with the node stage."""


class InvalidScore(MooseError):
    pass


# --- gateway ---------------------------------------------------------------


class GatewayError(MooseError):
    pass


class BackendUnavailable(GatewayError):
    pass


class ScriptExhausted(GatewayError):
    pass


class ScriptMismatch(GatewayError):
    """Head of the scripted response list does not match the requested template."""


class TemplateVariableMissing(GatewayError):
    pass


class ParseFailure(GatewayError):
    """Structured-output extraction failed; carries the raw model text."""

    def __init__(self, message: str, raw_text: str = ""):
        super().__init__(message)
        self.raw_text = raw_text


# --- engines ---------------------------------------------------------------


class EmptyCorpus(MooseError):
    pass


class StageMismatch(MooseError):
    pass


class SelectionParseFailure(MooseError):
    pass


class LevelOutOfRange(MooseError):
    pass


class ScoreUnavailable(MooseError):
    pass


class RefinementError(MooseError):
    """A refinement run failed part-way; carries the partial progress.

    ``tree`` holds every node attached before the failure and ``outcome``
    the per-level trace accumulated so far.
    """

    def __init__(self, message: str, tree=None, outcome=None):
        super().__init__(message)
        self.tree = tree
        self.outcome = outcome


# --- protocol --------------------------------------------------------------


class EmptyFeedback(MooseError):
    pass


class SameStageRoute(MooseError):
    pass


class BlueprintLocked(MooseError):
    """The initial blueprint cannot be revised after session init."""


class CorpusInvalid(MooseError):
    pass


# --- evaluation harness ----------------------------------------------------


class MalformedEntry(MooseError):
    def __init__(self, message: str, line_number: int):
        super().__init__(message)
        self.line_number = line_number


class EmptyDataset(MooseError):
    pass


class LeakUnfixable(MooseError):
    """Oracle feedback still discloses ground truth after retries and redaction."""


# --- service ---------------------------------------------------------------


class UnknownSession(MooseError):
    pass


class UnknownCorpus(MooseError):
    pass


class SessionBusy(MooseError):
    pass


class CorruptSession(MooseError):
    """Stored session export failed replay verification; refusing to load."""
