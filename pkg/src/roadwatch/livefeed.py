"""Fan-out hub for the live event feed.

Publishers never block: each subscriber owns a bounded queue, and when a
slow consumer falls behind, the oldest message is dropped and a gap count
accumulates so the consumer can be told how much it missed.
"""

from __future__ import annotations

import queue
import threading
from typing import Optional

DEFAULT_BUFFER = 256


class Subscription:
    def __init__(self, maxsize: int):
        self.queue: queue.Queue = queue.Queue(maxsize=maxsize)
        self._lock = threading.Lock()
        self._gap = 0

    def _note_drop(self, n: int = 1) -> None:
        with self._lock:
            self._gap += n

    def take_gap(self) -> int:
        """Dropped-message count since last taken; resets to zero."""
        with self._lock:
            g, self._gap = self._gap, 0
            return g

    def get(self, timeout: Optional[float] = None):
        return self.queue.get(timeout=timeout)


class LiveFeed:
    def __init__(self, buffer_size: int = DEFAULT_BUFFER):
        self.buffer_size = buffer_size
        self._lock = threading.Lock()
        self._subs: list[Subscription] = []

    def subscribe(self) -> Subscription:
        sub = Subscription(self.buffer_size)
        with self._lock:
            self._subs.append(sub)
        return sub

    def unsubscribe(self, sub: Subscription) -> None:
        with self._lock:
            try:
                self._subs.remove(sub)
            except ValueError:
                pass

    def subscriber_count(self) -> int:
        with self._lock:
            return len(self._subs)

    def publish(self, message: dict) -> None:
        """Deliver to every current subscriber; drops oldest when a queue is full."""
        with self._lock:
            subs = list(self._subs)
        for sub in subs:
            while True:
                try:
                    sub.queue.put_nowait(message)
                    break
                except queue.Full:
                    try:
                        sub.queue.get_nowait()
                        sub._note_drop()
                    except queue.Empty:
                        pass
