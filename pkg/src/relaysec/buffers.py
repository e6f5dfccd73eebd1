"""FIFO block buffers kept at each relay node."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np


class BufferFullError(RuntimeError):
    pass


class BufferEmptyError(RuntimeError):
    pass


@dataclass
class StoredBlock:
    """A signal block parked at a relay until it is forwarded.

    signal is a column vector (1x1 in the single-antenna setup).  origin_slot
    records when the block entered the buffer; channel snapshots the
    source-to-relay matrix of that slot.  rate_tag carries the decode rate of
    the stored hop and leak_tag the eavesdropper rate observed on it, both in
    bits; stream is the user index the block belongs to.
    """

    signal: np.ndarray
    origin_slot: int
    channel: np.ndarray | None = None
    rate_tag: float = float("inf")
    leak_tag: float = 0.0
    stream: int = 0


class RelayBuffer:
    """Bounded FIFO of StoredBlock with explicit over/underflow errors."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self._queue: deque[StoredBlock] = deque()

    @property
    def occupancy(self) -> int:
        return len(self._queue)

    @property
    def is_empty(self) -> bool:
        return not self._queue

    @property
    def is_full(self) -> bool:
        return len(self._queue) >= self.capacity

    def eligible(self, role: str) -> bool:
        """Whether this buffer permits the node to take ``role`` this slot.

        A relay may receive unless its buffer is full and may transmit unless
        its buffer is empty.
        """
        if role == "receive":
            return not self.is_full
        if role == "transmit":
            return not self.is_empty
        raise ValueError(f"unknown role {role!r}")

    def enqueue(self, block: StoredBlock) -> None:
        if self.is_full:
            raise BufferFullError(f"buffer at capacity {self.capacity}")
        self._queue.append(block)

    def dequeue(self) -> StoredBlock:
        if self.is_empty:
            raise BufferEmptyError("dequeue from empty buffer")
        return self._queue.popleft()

    def peek(self) -> StoredBlock:
        if self.is_empty:
            raise BufferEmptyError("peek into empty buffer")
        return self._queue[0]

    def __len__(self) -> int:
        return len(self._queue)

    def __iter__(self):
        """Iterate stored blocks oldest-first without removing them."""
        return iter(self._queue)

    def __repr__(self) -> str:
        return f"RelayBuffer({self.occupancy}/{self.capacity})"


def make_buffers(count: int, capacity: int) -> list[RelayBuffer]:
    return [RelayBuffer(capacity) for _ in range(count)]
