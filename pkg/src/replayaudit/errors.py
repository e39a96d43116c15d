"""Exception hierarchy shared by every module of the toolkit."""


class ReplayAuditError(Exception):
    """Base class for all toolkit errors."""


# memento model
class MalformedLinkFormat(ReplayAuditError, ValueError):
    pass


class MissingOriginal(ReplayAuditError, ValueError):
    pass


class UnrecognizedArchivePattern(ReplayAuditError, ValueError):
    pass


class InvalidTimestamp(ReplayAuditError, ValueError):
    pass


class EmptyTimeMap(ReplayAuditError, ValueError):
    pass


# archive clients
class AllArchivesFailed(ReplayAuditError):
    def __init__(self, errors):
        self.errors = dict(errors)
        detail = ", ".join(f"{k}: {v}" for k, v in sorted(self.errors.items()))
        super().__init__(f"every archive failed ({detail})")


class MalformedCdxLine(ReplayAuditError, ValueError):
    def __init__(self, lineno, line, reason):
        self.lineno = lineno
        self.line = line
        super().__init__(f"line {lineno}: {reason}: {line!r}")


class TransportError(ReplayAuditError):
    pass


class Timeout(TransportError):
    pass


# snowflake
class PreSnowflakeId(ReplayAuditError, ValueError):
    pass


# classifier
class MissingStatus(ReplayAuditError, ValueError):
    pass


class MissingContentLength(ReplayAuditError, ValueError):
    pass


class DegenerateDistribution(ReplayAuditError, ValueError):
    pass


# coherence
class IncompleteAudit(ReplayAuditError, ValueError):
    pass


class MissingTweetFeed(ReplayAuditError, ValueError):
    pass


class EmptyInput(ReplayAuditError, ValueError):
    pass


class MixedSigns(ReplayAuditError, ValueError):
    pass


# labels
class SchemaMismatch(ReplayAuditError, ValueError):
    pass


class InconsistentId(UserWarning):
    """Stated creation date disagrees with the snowflake-decoded one."""


class CaptureBeforeCreation(ReplayAuditError, ValueError):
    pass


class MissingCounts(ReplayAuditError, ValueError):
    pass


class EmptyStatuses(ReplayAuditError, ValueError):
    pass


# harness
class PortInUse(ReplayAuditError, OSError):
    pass


class InvalidManifest(ReplayAuditError, ValueError):
    pass


class ConfigError(ReplayAuditError, ValueError):
    pass
