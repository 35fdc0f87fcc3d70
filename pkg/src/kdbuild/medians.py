"""O(n log n) builder: median-of-medians selection on an array of references.

Level 0 is handled by a merge sort that also removes duplicate tuples; every
deeper level selects the median of its segment under that level's super key
and partitions the segment about it. Segments are disjoint, so sibling
subtrees are built on separate threads until the thread budget runs out.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from numba import njit

from ._parallel import fork_join, split_budget
from .core import (InvalidInputError, KdTree, SuperKeySpec, as_dataset,
                   compare_refs)
from .sorting import dedup_sorted, insertion_sort, merge_sort_refs

GROUP_SIZE = 5
PARALLEL_MIN = 1 << 12


@dataclass(frozen=True)
class MedianConfig:
    insertion_sort_cutoff: int = 15
    group_size: int = GROUP_SIZE

    def __post_init__(self):
        if not 5 <= self.insertion_sort_cutoff <= 64:
            raise InvalidInputError(
                f"insertion_sort_cutoff must be in [5, 64], got {self.insertion_sort_cutoff}")
        if self.group_size != GROUP_SIZE:
            raise InvalidInputError("group_size is fixed at 5")


@dataclass
class MediansWorkspace:
    refs: np.ndarray
    scratch: np.ndarray

    @classmethod
    def allocate(cls, n: int) -> "MediansWorkspace":
        return cls(np.empty(n, dtype=np.int64), np.empty(n, dtype=np.int64))


@njit(cache=True, nogil=True)
def _median5(tuples, a, b, c, d, e, lead):
    # six comparisons; each swap block discards a value known to be below the median
    if compare_refs(tuples, a, b, lead) > 0:
        a, b = b, a
    if compare_refs(tuples, c, d, lead) > 0:
        c, d = d, c
    if compare_refs(tuples, a, c, lead) > 0:
        a, c = c, a
        b, d = d, b
    a = e
    if compare_refs(tuples, a, b, lead) > 0:
        a, b = b, a
    if compare_refs(tuples, a, c, lead) > 0:
        a, c = c, a
        b, d = d, b
    if compare_refs(tuples, b, c, lead) < 0:
        return b
    return c


@njit(cache=True, nogil=True)
def _median_small(tuples, buf, lo, m, lead):
    """Element of rank m // 2 among buf[lo:lo+m] for m <= 5, by rank counting."""
    want = m // 2
    for i in range(lo, lo + m):
        below = 0
        for j in range(lo, lo + m):
            if compare_refs(tuples, buf[j], buf[i], lead) < 0:
                below += 1
        if below == want:
            return buf[i]
    return buf[lo]


@njit(cache=True, nogil=True)
def _group_median(tuples, buf, lo, m, lead):
    if m == 5:
        return _median5(tuples, buf[lo], buf[lo + 1], buf[lo + 2], buf[lo + 3], buf[lo + 4], lead)
    return _median_small(tuples, buf, lo, m, lead)


@njit(cache=True, nogil=True)
def _pivot(tuples, refs, scratch, lo, hi, lead):
    # medians of 5-element groups, then medians of those, until five or fewer remain
    g = 0
    for i in range(lo, hi, 5):
        scratch[lo + g] = _group_median(tuples, refs, i, min(5, hi - i), lead)
        g += 1
    while g > 5:
        g2 = 0
        for i in range(0, g, 5):
            scratch[lo + g2] = _group_median(tuples, scratch, lo + i, min(5, g - i), lead)
            g2 += 1
        g = g2
    return _group_median(tuples, scratch, lo, g, lead)


@njit(cache=True, nogil=True)
def _order_small(tuples, refs, lo, size, lead):
    if size == 2:
        if compare_refs(tuples, refs[lo], refs[lo + 1], lead) > 0:
            refs[lo], refs[lo + 1] = refs[lo + 1], refs[lo]
    elif size == 3:
        a = refs[lo]
        b = refs[lo + 1]
        c = refs[lo + 2]
        if compare_refs(tuples, a, b, lead) > 0:
            a, b = b, a
        if compare_refs(tuples, b, c, lead) > 0:
            b, c = c, b
            if compare_refs(tuples, a, b, lead) > 0:
                a, b = b, a
        refs[lo] = a
        refs[lo + 1] = b
        refs[lo + 2] = c


@njit(cache=True, nogil=True)
def _select(tuples, refs, scratch, lo, hi, rank, lead, cutoff):
    """Move the element of rank ``rank`` to refs[lo+rank] with smaller keys
    before it and larger keys after it; keys must be distinct."""
    target = lo + rank
    while True:
        size = hi - lo
        if size <= 3:
            _order_small(tuples, refs, lo, size, lead)
            return refs[target]
        if size <= cutoff:
            insertion_sort(tuples, refs, lo, hi, lead)
            return refs[target]
        pivot = _pivot(tuples, refs, scratch, lo, hi, lead)
        j = lo
        for i in range(lo, hi):
            if compare_refs(tuples, refs[i], pivot, lead) < 0:
                refs[i], refs[j] = refs[j], refs[i]
                j += 1
        for i in range(j, hi):
            if refs[i] == pivot:
                refs[i], refs[j] = refs[j], refs[i]
                break
        if j == target:
            return pivot
        if target < j:
            hi = j
        else:
            lo = j + 1


@njit(cache=True, nogil=True)
def _build_subtree(tuples, refs, scratch, begin, size, depth, cutoff):
    k = tuples.shape[1]
    stack = np.empty((2 * 66, 3), dtype=np.int64)
    stack[0, 0] = begin
    stack[0, 1] = size
    stack[0, 2] = depth
    top = 1
    while top > 0:
        top -= 1
        b = stack[top, 0]
        s = stack[top, 1]
        d = stack[top, 2]
        if s <= 3:
            # level 0 arrives already sorted
            if d > 0:
                _order_small(tuples, refs, b, s, d % k)
            continue
        lo_size = s // 2
        hi_size = (s - 1) // 2
        if d > 0:
            _select(tuples, refs, scratch, b, b + s, lo_size, d % k, cutoff)
        stack[top, 0] = b + lo_size + 1
        stack[top, 1] = hi_size
        stack[top, 2] = d + 1
        top += 1
        stack[top, 0] = b
        stack[top, 1] = lo_size
        stack[top, 2] = d + 1
        top += 1


def median5(tuples, refs, spec: SuperKeySpec) -> int:
    """Reference whose tuple is third smallest of the five under ``spec``."""
    tuples = as_dataset(tuples)
    if len(refs) != 5:
        raise InvalidInputError(f"median5 needs exactly five refs, got {len(refs)}")
    a, b, c, d, e = (int(r) for r in refs)
    return int(_median5(tuples, a, b, c, d, e, spec.lead))


def select_median_and_partition(tuples, refs, spec: SuperKeySpec,
                                cfg: MedianConfig | None = None):
    """Return ``(median_ref, lo_refs, hi_refs)`` for a segment of references.

    The median has rank ``len(refs) // 2``. ``refs`` is not modified.
    """
    cfg = cfg or MedianConfig()
    tuples = as_dataset(tuples)
    work = np.array(refs, dtype=np.int64)
    n = len(work)
    if n == 0:
        raise InvalidInputError("cannot select the median of an empty segment")
    scratch = np.empty_like(work)
    lo_size = n // 2
    median = _select(tuples, work, scratch, 0, n, lo_size, spec.lead, cfg.insertion_sort_cutoff)
    return int(median), work[:lo_size].copy(), work[lo_size + 1:].copy()


def presort_and_dedup(tuples, threads: int = 1, workspace: MediansWorkspace | None = None
                      ) -> np.ndarray:
    """References sorted by the lead-0 super key, one per distinct tuple.

    Among equal tuples the lowest dataset address survives.
    """
    tuples = as_dataset(tuples)
    n = len(tuples)
    ws = workspace or MediansWorkspace.allocate(n)
    refs = ws.refs[:n]
    refs[:] = np.arange(n, dtype=np.int64)
    merge_sort_refs(tuples, refs, 0, threads, ws.scratch[:n])
    kept = dedup_sorted(tuples, refs, n)
    return refs[:kept]


def _build(tuples, refs, scratch, begin, size, depth, threads, cutoff):
    if threads <= 1 or size < PARALLEL_MIN:
        _build_subtree(tuples, refs, scratch, begin, size, depth, cutoff)
        return
    lo_size = size // 2
    hi_size = (size - 1) // 2
    if depth > 0:
        _select(tuples, refs, scratch, begin, begin + size, lo_size,
                depth % tuples.shape[1], cutoff)
    mine, theirs = split_budget(threads)
    fork_join(
        lambda: _build(tuples, refs, scratch, begin, lo_size, depth + 1, mine, cutoff),
        lambda: _build(tuples, refs, scratch, begin + lo_size + 1, hi_size, depth + 1,
                       theirs, cutoff))


def build_medians(tuples, threads: int = 1, cfg: MedianConfig | None = None,
                  workspace: MediansWorkspace | None = None) -> KdTree:
    """Build the balanced tree by median-of-medians partitioning.

    ``tree.timings`` receives ``alloc``, ``sort`` and ``build`` seconds.
    """
    cfg = cfg or MedianConfig()
    tuples = as_dataset(tuples)
    if len(tuples) == 0:
        raise InvalidInputError("cannot build a tree from an empty dataset")
    if threads < 1:
        raise InvalidInputError(f"threads must be >= 1, got {threads}")
    timings = {}
    t0 = time.perf_counter()
    ws = workspace or MediansWorkspace.allocate(len(tuples))
    t1 = time.perf_counter()
    refs = presort_and_dedup(tuples, threads, ws)
    t2 = time.perf_counter()
    n = len(refs)
    _build(tuples, refs, ws.scratch[:n], 0, n, 0, threads, cfg.insertion_sort_cutoff)
    tree = KdTree.from_inorder(tuples, refs.copy())
    t3 = time.perf_counter()
    timings.update(alloc=t1 - t0, sort=t2 - t1, build=t3 - t2)
    tree.timings = timings
    return tree
