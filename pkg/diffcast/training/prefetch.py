"""Background batch assembly.

One producer thread draws shuffled index batches from its own seeded stream
and hands them over through a bounded queue, so batch order depends only on
the seed and never on thread timing.
"""

import logging
import threading
from queue import Empty, Full, Queue
from typing import Iterator, Optional

import numpy as np

from diffcast.core.errors import ConfigError
from diffcast.utils.seeding import SHUFFLE, rng_stream

logger = logging.getLogger(__name__)

_DONE = object()


class BatchPrefetcher:
    """Yields ``total`` index batches over ``n_items``, reshuffling every epoch."""

    def __init__(self, n_items: int, batch_size: int, total: int, seed: int, depth: int = 2):
        if n_items < 1:
            raise ConfigError("cannot batch an empty training split")
        self.n_items = n_items
        self.batch_size = batch_size
        self.total = total
        self._rng = rng_stream(seed, SHUFFLE)
        self._queue: Queue = Queue(maxsize=depth)
        self._stopping = threading.Event()
        self._thread: Optional[threading.Thread] = None
        self._error: Optional[BaseException] = None

    # ------------------------------------------------------------------
    # Lifecycle
    # ------------------------------------------------------------------

    def start(self) -> "BatchPrefetcher":
        self._thread = threading.Thread(target=self._worker, name="batch-prefetch", daemon=True)
        self._thread.start()
        return self

    def stop(self, timeout: float = 5.0) -> None:
        self._stopping.set()
        # unblock a producer waiting on a full queue
        try:
            while True:
                self._queue.get_nowait()
        except Empty:
            pass
        if self._thread is not None:
            self._thread.join(timeout=timeout)
            if self._thread.is_alive():
                logger.warning("Prefetch thread did not stop in time")

    def __enter__(self) -> "BatchPrefetcher":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    # ------------------------------------------------------------------
    # Batches
    # ------------------------------------------------------------------

    def batches(self) -> Iterator[np.ndarray]:
        """Deterministic batch sequence, computed in the calling thread."""
        order = np.empty(0, dtype=np.int64)
        for _ in range(self.total):
            while len(order) < self.batch_size:
                order = np.concatenate([order, self._rng.permutation(self.n_items)])
            batch, order = order[:self.batch_size], order[self.batch_size:]
            yield batch

    def _put(self, item) -> bool:
        while not self._stopping.is_set():
            try:
                self._queue.put(item, timeout=0.1)
                return True
            except Full:
                continue
        return False

    def _worker(self) -> None:
        try:
            for batch in self.batches():
                if not self._put(batch):
                    return
        except BaseException as exc:
            self._error = exc
            logger.error("Prefetch thread failed", exc_info=True)
        self._put(_DONE)

    def __iter__(self) -> Iterator[np.ndarray]:
        if self._thread is None:
            self.start()
        while True:
            item = self._queue.get()
            if item is _DONE:
                break
            yield item
        if self._error is not None:
            raise self._error
