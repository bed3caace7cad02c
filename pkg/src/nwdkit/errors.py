"""Exception hierarchy shared by every nwdkit module."""


class NwdError(Exception):
    """Base class for all nwdkit errors."""


class MissingCountError(NwdError, LookupError):
    """A snapshot lacks a count that an operation needs."""

    def __init__(self, termset):
        self.termset = termset
        super().__init__(f"snapshot has no count for {termset}")


class UndefinedNwdError(NwdError):
    """The NWD of a set is undefined because its members share no page."""

    def __init__(self, termset, message=None):
        self.termset = termset
        super().__init__(message or f"NWD undefined for {termset}: frequency is 0")


class UndefinedDeltaError(UndefinedNwdError):
    """``nwd(A + x) - nwd(A)`` is undefined because one of its terms is."""


class NotASubsetError(NwdError, ValueError):
    pass


class EmptyCorpusError(NwdError, ValueError):
    pass


class SchemaError(NwdError, ValueError):
    """A cache or snapshot file does not match the expected layout."""


class SchemaVersionError(SchemaError):
    pass


class FetchError(NwdError):
    """A count could not be obtained from a provider."""


class NetworkError(FetchError):
    pass


class ResponseParseError(FetchError):
    pass


class SnapshotBuildError(FetchError):
    """One or more counts failed while assembling a snapshot."""

    def __init__(self, failures):
        self.failures = dict(failures)
        lines = []
        for ts, err in self.failures.items():
            text = str(err)
            lines.append(f"  {text}" if text.startswith(f"{ts}:") else f"  {ts}: {text}")
        super().__init__(
            f"{len(self.failures)} count(s) could not be fetched:\n" + "\n".join(lines)
        )


class UnclassifiableError(NwdError):
    """Every class delta is undefined for an item."""

    def __init__(self, item):
        self.item = item
        super().__init__(f"no class has a defined NWD delta for {item!r}")


class DegenerateAffinityError(NwdError, ValueError):
    pass
