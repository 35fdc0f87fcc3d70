"""Stable merge sort of reference arrays by super key.

References are dataset addresses; ``tuples`` is the ``(n, k)`` dataset. The
sequential kernel is bottom-up with insertion-sorted runs. The threaded
driver splits the segment, sorts the halves concurrently and merges them with
two workers, one filling the output from the front and one from the back.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ._parallel import fork_join, split_budget
from .core import compare_refs

RUN = 32
PARALLEL_MIN = 1 << 14


@njit(cache=True, nogil=True)
def insertion_sort(tuples, refs, lo, hi, lead):
    for i in range(lo + 1, hi):
        r = refs[i]
        j = i - 1
        while j >= lo and compare_refs(tuples, refs[j], r, lead) > 0:
            refs[j + 1] = refs[j]
            j -= 1
        refs[j + 1] = r


@njit(cache=True, nogil=True)
def merge(tuples, src, dst, lo, mid, hi, lead):
    i = lo
    j = mid
    o = lo
    while i < mid and j < hi:
        if compare_refs(tuples, src[i], src[j], lead) <= 0:
            dst[o] = src[i]
            i += 1
        else:
            dst[o] = src[j]
            j += 1
        o += 1
    while i < mid:
        dst[o] = src[i]
        i += 1
        o += 1
    while j < hi:
        dst[o] = src[j]
        j += 1
        o += 1


@njit(cache=True, nogil=True)
def merge_front(tuples, src, dst, lo, mid, hi, lead, count):
    """First ``count`` outputs of the stable merge of src[lo:mid] and src[mid:hi]."""
    i = lo
    j = mid
    for o in range(lo, lo + count):
        if j >= hi or (i < mid and compare_refs(tuples, src[i], src[j], lead) <= 0):
            dst[o] = src[i]
            i += 1
        else:
            dst[o] = src[j]
            j += 1


@njit(cache=True, nogil=True)
def merge_back(tuples, src, dst, lo, mid, hi, lead, count):
    """Last ``count`` outputs of the same merge, produced from the high end."""
    i = mid - 1
    j = hi - 1
    for o in range(hi - 1, hi - 1 - count, -1):
        # ties go to the right run so equal keys keep their original order
        if i < lo or (j >= mid and compare_refs(tuples, src[i], src[j], lead) <= 0):
            dst[o] = src[j]
            j -= 1
        else:
            dst[o] = src[i]
            i -= 1


@njit(cache=True, nogil=True)
def copy_segment(src, dst, lo, hi):
    for i in range(lo, hi):
        dst[i] = src[i]


@njit(cache=True, nogil=True)
def sort_segment(tuples, refs, scratch, lo, hi, lead):
    """Sort refs[lo:hi] in place; scratch[lo:hi] is clobbered."""
    for r in range(lo, hi, RUN):
        insertion_sort(tuples, refs, r, min(r + RUN, hi), lead)
    src = refs
    dst = scratch
    width = RUN
    flipped = False
    while width < hi - lo:
        for left in range(lo, hi, 2 * width):
            mid = min(left + width, hi)
            right = min(left + 2 * width, hi)
            merge(tuples, src, dst, left, mid, right, lead)
        src, dst = dst, src
        flipped = not flipped
        width *= 2
    if flipped:
        copy_segment(scratch, refs, lo, hi)


def _dual_merge(tuples, src, dst, lo, mid, hi, lead):
    half = (hi - lo) // 2
    fork_join(lambda: merge_front(tuples, src, dst, lo, mid, hi, lead, half),
              lambda: merge_back(tuples, src, dst, lo, mid, hi, lead, hi - lo - half))


def _parallel_sort(tuples, refs, scratch, lo, hi, lead, threads):
    if threads <= 1 or hi - lo < PARALLEL_MIN:
        sort_segment(tuples, refs, scratch, lo, hi, lead)
        return
    mid = (lo + hi) // 2
    mine, theirs = split_budget(threads)
    fork_join(lambda: _parallel_sort(tuples, refs, scratch, lo, mid, lead, mine),
              lambda: _parallel_sort(tuples, refs, scratch, mid, hi, lead, theirs))
    _dual_merge(tuples, refs, scratch, lo, mid, hi, lead)
    copy_segment(scratch, refs, lo, hi)


def merge_sort_refs(tuples: np.ndarray, refs: np.ndarray, lead: int,
                    threads: int = 1, scratch: np.ndarray | None = None) -> np.ndarray:
    """Stable in-place sort of ``refs`` by the super key led by ``lead``."""
    if scratch is None:
        scratch = np.empty_like(refs)
    _parallel_sort(tuples, refs, scratch, 0, len(refs), lead, threads)
    return refs


@njit(cache=True, nogil=True)
def dedup_sorted(tuples, refs, n):
    """Compact refs[:n] (sorted by lead 0) so equal tuples keep one ref; returns the new length."""
    if n == 0:
        return 0
    kept = 1
    for i in range(1, n):
        if compare_refs(tuples, refs[kept - 1], refs[i], 0) != 0:
            refs[kept] = refs[i]
            kept += 1
    return kept
