"""Exception types shared across the package."""

from __future__ import annotations


class PrpError(Exception):
    """Base class for all library errors."""


class ParseError(PrpError):
    """A data file line that does not match its expected grammar."""

    def __init__(self, path: object, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class ValidationError(PrpError):
    """Input that parses but violates a type invariant."""


class ConfigError(PrpError):
    """Invalid or incomplete experiment configuration."""


class RenderError(PrpError):
    """A prompt could not be rendered within its budgets."""


class BackendError(PrpError):
    """A backend call failed after exhausting its retries."""

    def __init__(self, message: str, *, attempts: int = 0, last_status: int | None = None):
        super().__init__(message)
        self.attempts = attempts
        self.last_status = last_status


class OracleError(PrpError):
    """The scripted oracle lacks the state needed to answer."""


class ComparisonError(PrpError):
    """A pairwise comparison failed; carries the pair identity."""

    def __init__(self, query_id: str, doc_a: str, doc_b: str, message: str):
        super().__init__(f"pair ({doc_a}, {doc_b}) for query {query_id}: {message}")
        self.query_id = query_id
        self.doc_a = doc_a
        self.doc_b = doc_b
