"""Task decomposition and work-stealing structures.

The workload {(i, j) : 0 <= i < j < n} is viewed as the upper triangle of
an n x n matrix and split recursively into quadrants until regions are at
most leaf_block on a side; leaves expand into individual pair jobs. Each
worker owns a deque: it works depth-first off one end while thieves take
the largest task from the other end. A per-node job limiter provides
back-pressure, and a bitmap ledger at the master node both detects
termination and enforces that every pair runs exactly once.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass
from typing import Iterator, Optional


@dataclass(frozen=True)
class Region:
    """Rectangle [r0, r1) x [c0, c1) restricted to pairs with i < j."""

    r0: int
    r1: int
    c0: int
    c1: int

    def __post_init__(self) -> None:
        if not (0 <= self.r0 <= self.r1 and 0 <= self.c0 <= self.c1):
            raise ValueError(f"malformed region {self}")

    def pair_count(self) -> int:
        r0, r1, c0, c1 = self.r0, self.r1, self.c0, self.c1
        # rows entirely left of the column range contribute full width
        full_rows = max(0, min(r1, c0) - r0)
        total = full_rows * (c1 - c0)
        # rows that intersect the diagonal contribute a shrinking tail
        a = max(r0, c0)
        b = min(r1, c1 - 1)
        if b > a:
            total += (c1 - 1 - a + c1 - b) * (b - a) // 2
        return total

    def pairs(self) -> Iterator[tuple[int, int]]:
        for i in range(self.r0, self.r1):
            for j in range(max(self.c0, i + 1), self.c1):
                yield i, j

    def side(self) -> int:
        return max(self.r1 - self.r0, self.c1 - self.c0)

    def is_leaf(self, leaf_block: int) -> bool:
        return self.r1 - self.r0 <= leaf_block and self.c1 - self.c0 <= leaf_block

    def split(self) -> list["Region"]:
        """The up-to-four nonempty quadrants by midpoint bisection."""
        rm = (self.r0 + self.r1) // 2
        cm = (self.c0 + self.c1) // 2
        quadrants = [
            Region(self.r0, rm, self.c0, cm),
            Region(self.r0, rm, cm, self.c1),
            Region(rm, self.r1, self.c0, cm),
            Region(rm, self.r1, cm, self.c1),
        ]
        children = [q for q in quadrants if q.pair_count() > 0]
        assert sum(q.pair_count() for q in children) == self.pair_count()
        return children

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.r0, self.r1, self.c0, self.c1)


def root_region(n: int) -> Region:
    return Region(0, n, 0, n)


def iter_leaves(region: Region, leaf_block: int) -> Iterator[Region]:
    """Depth-first leaf enumeration of the task tree (no runtime involved)."""
    if region.pair_count() == 0:
        return
    if region.is_leaf(leaf_block):
        yield region
        return
    for child in region.split():
        yield from iter_leaves(child, leaf_block)


def leaf_pair_total(n: int, leaf_block: int) -> int:
    """Sum of leaf pair counts for the full decomposition of n items.

    Same splitting rule as iter_leaves, but on an explicit stack of bounds
    tuples so counting stays cheap for large n.
    """
    def count(r0: int, r1: int, c0: int, c1: int) -> int:
        full_rows = max(0, min(r1, c0) - r0)
        total = full_rows * (c1 - c0)
        a = max(r0, c0)
        b = min(r1, c1 - 1)
        if b > a:
            total += (c1 - 1 - a + c1 - b) * (b - a) // 2
        return total

    total = 0
    stack = [(0, n, 0, n)]
    while stack:
        r0, r1, c0, c1 = stack.pop()
        pairs = count(r0, r1, c0, c1)
        if pairs == 0:
            continue
        if r1 - r0 <= leaf_block and c1 - c0 <= leaf_block:
            total += pairs
            continue
        rm = (r0 + r1) // 2
        cm = (c0 + c1) // 2
        stack += ((r0, rm, c0, cm), (r0, rm, cm, c1), (rm, r1, c0, cm), (rm, r1, cm, c1))
    return total


@dataclass(frozen=True)
class TaskNode:
    region: Region
    level: int


class WorkerDeque:
    """Owner works depth-first at the back; thieves take the front.

    Children are always pushed after their parent was popped from the back,
    so entries are ordered by level: the front holds the highest-level
    (largest) task and, among equals, the least recently pushed.
    """

    def __init__(self) -> None:
        self._items: deque[TaskNode] = deque()
        self._lock = threading.Lock()

    def push(self, task: TaskNode) -> None:
        with self._lock:
            self._items.append(task)

    def pop(self) -> Optional[TaskNode]:
        with self._lock:
            return self._items.pop() if self._items else None

    def steal(self) -> Optional[TaskNode]:
        with self._lock:
            return self._items.popleft() if self._items else None

    def steal_level(self) -> Optional[int]:
        """Level of the task a thief would get, or None when empty."""
        with self._lock:
            return self._items[0].level if self._items else None

    def __len__(self) -> int:
        with self._lock:
            return len(self._items)


def steal_from_workers(deques: list[WorkerDeque]) -> Optional[TaskNode]:
    """Take the highest-level task across a node's deques (ties: first deque)."""
    best = None
    best_level = None
    for dq in deques:
        level = dq.steal_level()
        if level is not None and (best_level is None or level < best_level):
            best, best_level = dq, level
    if best is None:
        return None
    # racy re-check is fine: steal() returns None if someone drained it first
    return best.steal()


class JobLimiter:
    """Caps in-flight jobs per node; submitters park when it is full."""

    def __init__(self, limit: int):
        if limit < 1:
            raise ValueError("job limit must be >= 1")
        self.limit = limit
        self.current = 0
        self._cond = threading.Condition()
        self._waiters: deque = deque()

    def try_acquire(self) -> bool:
        with self._cond:
            if self.current < self.limit:
                self.current += 1
                return True
            return False

    def acquire_blocking(self, timeout: float) -> bool:
        with self._cond:
            if self.current < self.limit:
                self.current += 1
                return True
            self._cond.wait(timeout)
            if self.current < self.limit:
                self.current += 1
                return True
            return False

    def add_waiter(self, callback) -> None:
        """Event-driven mode: callback runs once after the next release."""
        with self._cond:
            self._waiters.append(callback)

    def release(self) -> None:
        with self._cond:
            assert self.current > 0, "release without acquire"
            self.current -= 1
            callback = self._waiters.popleft() if self._waiters else None
            self._cond.notify()
        if callback is not None:
            callback()


class PairLedger:
    """Bitmap over all C(n,2) pairs; the run terminates when it is full."""

    def __init__(self, n: int):
        self.n = n
        self.total = n * (n - 1) // 2
        self.completed = 0
        self._bits = bytearray((self.total + 7) // 8)
        self._lock = threading.Lock()

    def pair_id(self, i: int, j: int) -> int:
        if not 0 <= i < j < self.n:
            raise ValueError(f"invalid pair ({i}, {j}) for n={self.n}")
        return i * (2 * self.n - i - 1) // 2 + (j - i - 1)

    def mark(self, i: int, j: int) -> None:
        """Record one completion; a duplicate is a scheduling bug."""
        pid = self.pair_id(i, j)
        byte, mask = pid >> 3, 1 << (pid & 7)
        with self._lock:
            if self._bits[byte] & mask:
                raise AssertionError(f"pair ({i}, {j}) completed twice")
            self._bits[byte] |= mask
            self.completed += 1

    @property
    def full(self) -> bool:
        with self._lock:
            return self.completed == self.total
