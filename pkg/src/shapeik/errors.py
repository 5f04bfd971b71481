"""Exception hierarchy shared by all shapeik modules.

Every error raised by the library derives from :class:`ShapeIKError` so
callers (CLI, service) can map domain failures to exit code 1 / HTTP 4xx
without catching bare ``Exception``.
"""

from __future__ import annotations


class ShapeIKError(Exception):
    """Base class for all shapeik domain errors."""


class StructureError(ShapeIKError):
    """Dimension or hierarchy mismatch between structured inputs."""


class NamedJointError(ShapeIKError):
    """A required joint name is missing from a skeleton or name map."""

    def __init__(self, joint: str, context: str = ""):
        self.joint = joint
        msg = f"required joint {joint!r} not found"
        if context:
            msg += f" ({context})"
        super().__init__(msg)


class SchemaError(ShapeIKError):
    """A file or request body failed validation.

    ``path`` is a dotted/indexed field path such as ``persons[0].rotations``.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class CheckpointError(ShapeIKError):
    """Corrupt, truncated, or mismatched checkpoint/bank file."""


class DegenerateInputError(ShapeIKError):
    """Numerically degenerate geometry that cannot be recovered from."""


class RecoveryExhaustedError(ShapeIKError):
    """Effector recovery ran out of candidates before terminating.

    Carries the best result found so far in ``result``.
    """

    def __init__(self, result):
        self.result = result
        super().__init__("candidate set exhausted before reaching threshold or max count")
