"""Exception types shared across the package."""


class VamsError(Exception):
    pass


class SubmissionRejected(VamsError):
    """A request envelope failed admission checks at the log server."""

    def __init__(self, code: str, detail: str = ""):
        self.code = code
        self.detail = detail
        super().__init__(f"{code}: {detail}" if detail else code)


class EvidenceSuspected(VamsError):
    """A verification step failed in a way that implicates the server.

    Carries the offending material so it can be preserved and reported.
    """

    def __init__(self, reason: str, material=None):
        self.reason = reason
        self.material = material
        super().__init__(reason)


class RequestNotLogged(VamsError):
    pass


class SealError(VamsError):
    """Authenticated decryption failed (wrong key or tampered ciphertext)."""


class UndefinedConfidence(VamsError):
    """Confidence of a rule whose antecedent has zero support."""


class UndefinedPercentError(VamsError):
    """Percent error against a reported value of zero."""


class SingularMatrixError(VamsError):
    """Expectation matrix too ill-conditioned to invert reliably."""


class UnachievableSpecError(VamsError):
    """Synthetic dataset specification cannot be satisfied."""
