"""Per-task wall-clock timers and operation counters."""

from collections import Counter
from contextlib import contextmanager
import time

TASKS = (
    "sketch_build",
    "sketch_apply",
    "interp_solve",
    "model_build",
    "trs",
    "eval",
    "geometry",
    "other",
)


class TaskTimers:
    """Cumulative seconds per task using a monotonic clock.

    Nested tasks pause their parent, so the per-task totals never double
    count. ``other`` is whatever part of the elapsed run time was not
    attributed to a named task.
    """

    def __init__(self):
        self.totals = dict.fromkeys(TASKS, 0.0)
        self._stack = []
        self._mark = None
        self._t0 = time.perf_counter()

    def elapsed(self):
        return time.perf_counter() - self._t0

    @contextmanager
    def task(self, name):
        if name not in self.totals:
            raise KeyError(f"unknown timer key {name!r}")
        now = time.perf_counter()
        if self._stack:
            self.totals[self._stack[-1]] += now - self._mark
        self._stack.append(name)
        self._mark = now
        try:
            yield
        finally:
            now = time.perf_counter()
            self.totals[self._stack.pop()] += now - self._mark
            self._mark = now

    def snapshot(self):
        """Copy of the totals with ``other`` and ``total`` filled in."""
        total = self.elapsed()
        out = dict(self.totals)
        named = sum(v for k, v in out.items() if k != "other")
        out["other"] = max(total - named, 0.0)
        out["total"] = total
        return out


class OpCounts(Counter):
    """Counter of arithmetic operations, keyed by operation name.

    Sketch kernels record ``gathers``, ``scalings``, ``multiplies``,
    ``additions`` and ``sign_applications``; the interpolation code records
    ``interp_solve_flops`` and ``model_build_flops``.
    """

    def add(self, key, amount):
        self[key] += int(amount)


@contextmanager
def maybe_task(timers, name):
    if timers is None:
        yield
    else:
        with timers.task(name):
            yield


def record(counts, key, amount):
    if counts is not None:
        counts.add(key, amount)
