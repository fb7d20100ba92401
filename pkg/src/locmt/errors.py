"""Exception hierarchy shared across the toolkit.

Validation problems (bad files, bad configs, contract violations caught
before any remote call) and backend problems (anything that went wrong
talking to a model service) are kept distinct so the CLI can map them to
different exit codes.
"""

from __future__ import annotations


class LocmtError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(LocmtError):
    """Input file, config, or argument failed validation."""


class CorpusFormatError(ValidationError):
    """A corpus file could not be parsed or violates schema invariants."""


class PipelineError(ValidationError):
    """A preprocessing pipeline spec is malformed or references unknown steps."""


class BackendError(LocmtError):
    """Base class for model-backend failures."""

    kind = "backend"


class TransportError(BackendError):
    """Connection-level failure (network unreachable, timeout, bad HTTP)."""

    kind = "transport"


class UnsupportedPairError(BackendError):
    """Backend does not serve the requested language pair or task."""

    kind = "unsupported_pair"


class JobNotFoundError(BackendError):
    """Backend has no job with the given id."""

    kind = "unknown_job"


class BackendResponseError(BackendError):
    """Backend answered, but the payload violates the wire contract."""

    kind = "protocol"
