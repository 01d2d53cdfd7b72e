import threading
from collections import Counter
from contextlib import contextmanager
from datetime import datetime

from pympler import asizeof


class TimeContext:
    """
    Measure the wall time spent inside a `with` block.
    The context may be re-entered, each run overrides the previous measurement.
    """
    def __init__(self):
        self._start_time = datetime.now()
        self._end_time = self._start_time

    def __enter__(self):
        self._start_time = datetime.now()
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        self._end_time = datetime.now()

    @property
    def time(self):
        return self._end_time - self._start_time

    @property
    def seconds(self):
        return self.time.total_seconds()


class Counters:
    """
    Thread safe named counters used to instrument expensive primitives (pairings, disjoint proofs, ...).

    Usage:
        counters = Counters()
        counters.increment("proofs")
        with counters.scope() as delta:
            ...
        delta["proofs"]
    """
    def __init__(self):
        self._lock = threading.Lock()
        self._values = Counter()

    def increment(self, name, amount=1):
        with self._lock:
            self._values[name] += amount

    def get(self, name):
        with self._lock:
            return self._values[name]

    def snapshot(self):
        """
        :return: copy of all counters
        :rtype: dict[str, int]
        """
        with self._lock:
            return dict(self._values)

    def reset(self):
        with self._lock:
            self._values.clear()

    @contextmanager
    def scope(self):
        """
        Context manager yielding a dictionary which is filled, on exit, with the counters delta of the block.
        """
        before = Counter(self.snapshot())
        delta = dict()
        try:
            yield delta
        finally:
            after = Counter(self.snapshot())
            after.subtract(before)
            delta.update({name: value for name, value in after.items() if value})


def time_profiler(logic, repeat=1, *args, **kwargs):
    """
    Profile a given function logic execution time.

    :return: logic average execution time
    :rtype: timedelta
    """
    start_time = datetime.now()
    for _ in range(repeat):
        logic(*args, **kwargs)

    return (datetime.now() - start_time) / repeat


def object_memory_bytes(obj):
    """
    In memory footprint of an object graph (not its serialized size).

    :rtype: int
    """
    return asizeof.asizeof(obj)
