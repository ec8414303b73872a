"""
    Exceptions shared by every sievebrush module.

    Errors specific to one phase (LingenError, SqrtError, ...) live in the
    module that raises them but still derive from SievebrushError.
"""


class SievebrushError(Exception):
    pass


class OvercookedError(SievebrushError):
    """
    Exception for trying to operate on a Recipe that has been finished.
    """

    pass


class DomainError(SievebrushError, ValueError):
    """An operation was called outside of its mathematical domain."""

    pass


class ConfigError(SievebrushError):
    pass


class ProtocolError(SievebrushError):
    """Illegal work-unit transition (wrong state, wrong client, unknown id)."""

    pass


class PhaseError(SievebrushError):
    """A pipeline phase failed; the message says how to resume."""

    def __init__(self, phase, cause, resume=None):
        msg = f"phase {phase} failed: {cause!r}"
        if resume:
            msg += f" (resume with: {resume})"
        super().__init__(msg)
        self.phase = phase
        self.cause = cause


class FixtureError(SievebrushError):
    def __init__(self, fixture, detail):
        super().__init__(f"{fixture}: {detail}")
        self.fixture = fixture
