"""Shared exception types.

Every failure mode that callers are expected to branch on gets its own
class; plain ValueError is reserved for programming errors (bad widths,
malformed arguments) that no caller should catch.
"""


class ObflabError(Exception):
    pass


class DepthExceededError(ObflabError):
    """Homomorphic evaluation was asked to exceed the remaining level budget."""


class AuthenticationError(ObflabError):
    """Ciphertext payload failed its tag check (tampered or corrupted)."""


class KeyMismatchError(ObflabError):
    """Key material does not belong to the keypair a ciphertext was made under."""


class AssemblyError(ObflabError):
    """Key blocks do not assemble into a well-formed public key."""


class NotClassicalError(ObflabError):
    """A quantum register was treated as classical while holding coherence."""


class EvaluationError(ObflabError):
    """Garbled-table row failed its check under the supplied labels."""


class AuditError(ObflabError):
    """A capability audit guard saw secret material used outside its seal."""
