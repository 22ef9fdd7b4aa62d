"""Exception types shared across the runtime."""


class AppError(Exception):
    """An application callback failed; the run aborts with a diagnostic."""


class MalformedInput(AppError):
    """An input file could not be parsed."""


class SlotOverflow(Exception):
    """Item data does not fit in a cache slot."""


class NoEvictableSlot(Exception):
    """All slots in a tier are pinned by writers or readers.

    Signals capacity pressure: the caller should back off and retry.
    """


class StorageNotFound(Exception):
    """A storage path does not exist."""


class ConnectFailure(Exception):
    """Cluster boot could not establish a channel."""


class TransportError(Exception):
    """A channel broke or a frame failed to decode; the run aborts."""


class DeadlockError(Exception):
    """The simulation ran out of events with work still outstanding."""
