"""Runtime for all-pairs compute workloads.

Evaluates a user-defined comparison over every unordered pair of n items,
across one or many nodes, reusing loaded items through device/host/remote
cache tiers and balancing work by hierarchical random stealing.
"""

from .apps import Application, CompositionVectorApp, ItemData, ItemKey, PairResult, Stage, SyntheticApp
from .errors import (
    AppError,
    ConnectFailure,
    DeadlockError,
    MalformedInput,
    NoEvictableSlot,
    SlotOverflow,
    StorageNotFound,
    TransportError,
)
from .perfmodel import ModelReport, StageCosts, pair_count

__all__ = [
    "Application",
    "AppError",
    "CompositionVectorApp",
    "ConnectFailure",
    "DeadlockError",
    "ItemData",
    "ItemKey",
    "MalformedInput",
    "ModelReport",
    "NoEvictableSlot",
    "PairResult",
    "SlotOverflow",
    "Stage",
    "StageCosts",
    "StorageNotFound",
    "SyntheticApp",
    "TransportError",
    "pair_count",
]
