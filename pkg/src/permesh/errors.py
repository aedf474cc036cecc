"""Exception types shared across the simulator."""


class PermeshError(Exception):
    """Base class for all simulator errors."""


# -- permission registry / install ------------------------------------------

class DuplicatePermissionError(PermeshError):
    pass


class UnknownPermissionError(PermeshError):
    pass


class InvalidParameterError(PermeshError):
    pass


class DuplicatePackageError(PermeshError):
    pass


class MissingProxyError(PermeshError):
    pass


# -- proxy registration ------------------------------------------------------

class UnknownProxyError(PermeshError):
    pass


class CycleDetectedError(PermeshError):
    pass


class UnknownRequirementError(PermeshError):
    pass


class DuplicateExposedIdError(PermeshError):
    pass


class InvalidProxyError(PermeshError):
    pass


class GrantRejectedError(PermeshError):
    """A proxy's own install-time grant decision was declined."""


# -- domain patterns / urls --------------------------------------------------

class MalformedPatternError(PermeshError):
    pass


class MalformedUrlError(PermeshError):
    pass


# -- virtual filesystem ------------------------------------------------------

class FsError(PermeshError):
    pass


class EscapeError(FsError):
    """A path resolved outside its sandbox root."""


class MalformedPathError(FsError):
    pass


class FsPermissionDenied(FsError):
    pass


class FsNotFound(FsError):
    pass


class NotADirectoryFsError(FsError):
    pass


class IsADirectoryFsError(FsError):
    pass


# -- firewall ----------------------------------------------------------------

class NotALegacyAppError(PermeshError):
    pass


class UnknownDecisionError(PermeshError):
    pass


class AlreadyResolvedError(PermeshError):
    pass


# -- devices -----------------------------------------------------------------

class InvalidSessionError(PermeshError):
    pass


class TokenReplayError(PermeshError):
    pass


class WrongSessionTokenError(PermeshError):
    pass


# -- scenarios ---------------------------------------------------------------

class ScenarioParseError(PermeshError):
    pass


class UnscriptedPromptError(PermeshError):
    """Headless run hit a firewall prompt with no scripted decision left."""
