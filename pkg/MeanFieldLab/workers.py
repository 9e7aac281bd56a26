"""Bounded worker pool for independent experiment items (trials, scan directions).

Results always come back in input order, so reports do not depend on the
number of threads.
"""

from __future__ import annotations

import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

_cap_lock = threading.Lock()
_thread_cap: Optional[int] = None


def set_thread_cap(n: Optional[int]) -> None:
	"""Process-wide upper bound on worker threads (``None`` restores the default)."""

	global _thread_cap
	if n is not None and int(n) < 1:
		raise ValueError(f"thread cap must be >= 1, got {n}")
	with _cap_lock:
		_thread_cap = None if n is None else int(n)


def thread_cap() -> int:
	with _cap_lock:
		if _thread_cap is not None:
			return _thread_cap
	return min(8, os.cpu_count() or 1)


def ordered_map(fn: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None) -> List[R]:
	"""``[fn(x) for x in items]`` on a thread pool; the first exception propagates."""

	items = list(items)
	n = min(thread_cap() if threads is None else int(threads), thread_cap(), max(1, len(items)))
	if n <= 1 or len(items) <= 1:
		return [fn(x) for x in items]
	logger.debug("ordered_map: %d items on %d threads", len(items), n)
	with ThreadPoolExecutor(max_workers=n, thread_name_prefix="mfl-worker") as pool:
		return list(pool.map(fn, items))
