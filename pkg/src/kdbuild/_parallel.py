"""Fork/join on plain threads; the numba kernels release the GIL."""

from __future__ import annotations

import threading


def fork_join(inline, forked):
    """Run ``forked`` on a new thread and ``inline`` on this one, then join.

    Returns ``(inline(), forked())``. An exception from either side is
    re-raised after both have finished.
    """
    box = {}

    def target():
        try:
            box["value"] = forked()
        except BaseException as exc:  # re-raised on the joining thread
            box["error"] = exc

    worker = threading.Thread(target=target)
    worker.start()
    try:
        first = inline()
    finally:
        worker.join()
    if "error" in box:
        raise box["error"]
    return first, box["value"]


def split_budget(threads: int) -> tuple[int, int]:
    """Thread budgets for the inline and forked halves of a fork."""
    forked = threads // 2
    return threads - forked, forked
