"""Exception hierarchy shared by all nspikes modules."""


class NspikesError(Exception):
    """Base class for every error raised by this package."""

    code = "NspikesError"


class Issue:
    """One named constraint violation, e.g. ``NonCompetitiveLambda``."""

    __slots__ = ("code", "message")

    def __init__(self, code, message):
        self.code = code
        self.message = message

    def __repr__(self):
        return f"Issue({self.code!r}, {self.message!r})"

    def __str__(self):
        return f"{self.code}: {self.message}"

    def __eq__(self, other):
        return isinstance(other, Issue) and (self.code, self.message) == (other.code, other.message)


class InvalidParams(NspikesError):
    """Raised by validate_params; ``issues`` lists every violated constraint."""

    code = "InvalidParams"

    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("; ".join(str(i) for i in self.issues))

    @property
    def codes(self):
        return [i.code for i in self.issues]


class ConfigError(NspikesError):
    """Raised by parse_config; ``issues`` carries UnknownKey/TypeError/MissingRequired entries."""

    code = "ConfigError"

    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("; ".join(str(i) for i in self.issues))

    @property
    def codes(self):
        return [i.code for i in self.issues]


class GridMismatch(NspikesError):
    code = "GridMismatch"


class CenterOutsideDomain(NspikesError):
    code = "CenterOutsideDomain"


class NoConvergence(NspikesError):
    code = "NoConvergence"


class NotClosed(NspikesError):
    code = "NotClosed"


class NotHomomorphism(NspikesError):
    code = "NotHomomorphism"


class MaskNotInvariant(NspikesError):
    code = "MaskNotInvariant"


class CftViolated(NspikesError):
    code = "CftViolated"


class SaddleDetected(NspikesError):
    code = "SaddleDetected"


class NoSpikes(NspikesError):
    code = "NoSpikes"


class WindowExceedsReference(NspikesError):
    code = "WindowExceedsReference"


class UnknownPreset(NspikesError):
    code = "UnknownPreset"


class NotTwoDimensional(NspikesError):
    code = "NotTwoDimensional"
