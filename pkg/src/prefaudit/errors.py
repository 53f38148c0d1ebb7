"""Exception types shared across the audit toolkit.

Every error that callers are expected to handle programmatically gets its
own class; the CLI and HTTP layers map these onto exit codes and error
envelopes, so the hierarchy is part of the public surface.
"""

from __future__ import annotations


class AuditError(Exception):
    """Base class for all toolkit errors."""


class FormatError(AuditError):
    """A preference file violates the documented CSV format."""


class SchemaError(AuditError):
    """A preference file's candidate columns do not match the contest."""


class EmptyBatchError(AuditError):
    """A preference file contains no data at all (not even a header)."""


class DomainError(AuditError):
    """A numeric argument is outside its documented domain."""


class InfeasibleError(AuditError):
    """No parameter value can satisfy the requested constraint."""


class OrderingViolation(AuditError):
    """A seed was registered at or before its batch's commitment time.

    Selections derived from such a seed are potentially predictable, so
    this is surfaced as a hard error rather than a warning.
    """


class SelectionError(AuditError):
    """A reading refers to a ballot the sampler never selected."""


class StateError(AuditError):
    """An operation was attempted in a session phase that forbids it."""


class ConflictError(AuditError):
    """A resubmission contradicts an existing record without being
    flagged as a correction."""


class PoolingError(AuditError):
    """Two error samples cannot be pooled (overlap or mislabeled stages)."""


class TamperError(AuditError):
    """An event log fails its hash-chain verification."""
