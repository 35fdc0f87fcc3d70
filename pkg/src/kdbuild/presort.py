"""O(kn log n) builder: k presorted index arrays, partitioned level by level.

Array j is sorted by the super key led by coordinate j. At depth d the array
led by ``d mod k`` governs: its element at rank ``loSize`` is the node and it
is already partitioned, so it is never copied. Each of the other k-1 arrays is
stably partitioned about that node into the next free array, which keeps each
half sorted under its own key.

The k arrays plus one temporary live in a ``(k + 1, n)`` slot buffer. Which
slot holds which key depends only on the depth, so a per-depth permutation
table drives the rotation and sibling segments never collide.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from numba import njit

from ._parallel import fork_join, split_budget
from .core import (ConsistencyError, InvalidInputError, KdTree, SuperKeySpec,
                   as_dataset, compare_refs)
from .medians import MediansWorkspace, presort_and_dedup
from .sorting import merge_sort_refs

PARALLEL_MIN = 1 << 12
DUAL_PARTITION_MIN = 1 << 15


@dataclass
class IndexArraySet:
    """``arrays[j]`` sorted by the lead-j super key; ``temp`` is scratch."""

    slots: np.ndarray

    @property
    def k(self) -> int:
        return self.slots.shape[0] - 1

    @property
    def arrays(self) -> np.ndarray:
        return self.slots[:-1]

    @property
    def temp(self) -> np.ndarray:
        return self.slots[-1]


@dataclass
class PresortWorkspace:
    slots: np.ndarray
    order: np.ndarray

    @classmethod
    def allocate(cls, n: int, k: int) -> "PresortWorkspace":
        return cls(np.empty((k + 1, n), dtype=np.int64), np.empty(n, dtype=np.int64))


def presort_index_arrays(tuples, threads: int = 1,
                         workspace: PresortWorkspace | None = None) -> IndexArraySet:
    """Deduplicate, then merge sort one index array per lead coordinate."""
    tuples = as_dataset(tuples)
    n, k = tuples.shape
    ws = workspace or PresortWorkspace.allocate(n, k)
    slots = ws.slots
    refs = presort_and_dedup(tuples, threads, MediansWorkspace(slots[0], slots[k]))
    m = len(refs)
    if m < n:
        slots = np.ascontiguousarray(slots[:, :m])
    for j in range(1, k):
        slots[j] = slots[0]
        merge_sort_refs(tuples, slots[j], j, threads, slots[k])
    return IndexArraySet(slots)


@njit(cache=True, nogil=True)
def _partition_into(tuples, src, dst, begin, size, median, lead):
    lo = begin
    hi = begin + size // 2 + 1
    for i in range(begin, begin + size):
        r = src[i]
        c = compare_refs(tuples, r, median, lead)
        if c < 0:
            dst[lo] = r
            lo += 1
        elif c > 0:
            dst[hi] = r
            hi += 1
    return (lo - begin) + (hi - (begin + size // 2 + 1))


@njit(cache=True, nogil=True)
def _partition_low(tuples, src, dst, begin, size, median, lead):
    """Forward half of a dual partition: fill dst's low half in ascending order."""
    want = size // 2
    o = begin
    i = begin
    while o < begin + want:
        r = src[i]
        if compare_refs(tuples, r, median, lead) < 0:
            dst[o] = r
            o += 1
        i += 1
    return want


@njit(cache=True, nogil=True)
def _partition_high(tuples, src, dst, begin, size, median, lead):
    """Backward half of a dual partition: fill dst's high half from its top."""
    want = (size - 1) // 2
    o = begin + size - 1
    i = begin + size - 1
    while o > begin + size - 1 - want:
        r = src[i]
        if compare_refs(tuples, r, median, lead) > 0:
            dst[o] = r
            o -= 1
        i -= 1
    return want


@njit(cache=True, nogil=True)
def _build_subtree(tuples, slots, perms, order, begin, size, depth):
    k = tuples.shape[1]
    copies = 0
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
        gov = slots[perms[d, 0]]
        if s <= 3:
            # a governing segment this small is already in node order
            for i in range(b, b + s):
                order[i] = gov[i]
            continue
        lo_size = s // 2
        median = gov[b + lo_size]
        order[b + lo_size] = median
        lead = d % k
        for j in range(1, k):
            dst = perms[d, k] if j == 1 else perms[d, j - 1]
            copies += _partition_into(tuples, slots[perms[d, j]], slots[dst], b, s, median, lead)
        stack[top, 0] = b + lo_size + 1
        stack[top, 1] = (s - 1) // 2
        stack[top, 2] = d + 1
        top += 1
        stack[top, 0] = b
        stack[top, 1] = lo_size
        stack[top, 2] = d + 1
        top += 1
    return copies


@njit(cache=True, nogil=True)
def _is_ascending(tuples, arr, begin, size, lead):
    for i in range(begin + 1, begin + size):
        if compare_refs(tuples, arr[i - 1], arr[i], lead) >= 0:
            return False
    return True


def slot_permutations(k: int, depths: int) -> np.ndarray:
    """Row d lists the slots holding leads d, d+1, ..., d+k-1 (mod k), then the temp slot."""
    perms = np.empty((depths, k + 1), dtype=np.int64)
    p = list(range(k + 1))
    for d in range(depths):
        perms[d] = p
        p = [p[k]] + p[1:k - 1] + [p[0], p[k - 1]]
    return perms


def stable_partition_about(tuples, src, median_ref: int, spec: SuperKeySpec):
    """Split ``src`` into the refs below and above ``median_ref`` under ``spec``,
    preserving their relative order; the median itself is dropped."""
    tuples = as_dataset(tuples)
    src = np.ascontiguousarray(src, dtype=np.int64)
    size = len(src)
    dst = np.empty_like(src)
    _partition_into(tuples, src, dst, 0, size, median_ref, spec.lead)
    lo_size = size // 2
    return dst[:lo_size].copy(), dst[lo_size + 1:].copy()


class _Builder:
    def __init__(self, tuples, slots, order, check):
        self.tuples = tuples
        self.slots = slots
        self.order = order
        self.k = tuples.shape[1]
        self.perms = slot_permutations(self.k, len(order).bit_length() + 2)
        self.check = check

    def split(self, b, s, d, dual):
        """Partition one segment at depth ``d``; returns the number of copies."""
        k, perms, slots = self.k, self.perms, self.slots
        lo_size = s // 2
        median = slots[perms[d, 0]][b + lo_size]
        self.order[b + lo_size] = median
        lead = d % k
        copies = 0
        for j in range(1, k):
            src = slots[perms[d, j]]
            dst = slots[perms[d, k] if j == 1 else perms[d, j - 1]]
            if dual:
                lo, hi = fork_join(
                    lambda: _partition_low(self.tuples, src, dst, b, s, median, lead),
                    lambda: _partition_high(self.tuples, src, dst, b, s, median, lead))
                copies += lo + hi
            else:
                copies += _partition_into(self.tuples, src, dst, b, s, median, lead)
        if self.check:
            self._check_children(b, s, d + 1)
        return copies

    def _check_children(self, b, s, d):
        lo_size, hi_size = s // 2, (s - 1) // 2
        for j in range(self.k):
            arr = self.slots[self.perms[d, j]]
            lead = (d + j) % self.k
            for begin, size in ((b, lo_size), (b + lo_size + 1, hi_size)):
                if not _is_ascending(self.tuples, arr, begin, size, lead):
                    raise ConsistencyError(
                        f"segment ({begin}, {size}) of the lead-{lead} array is out of order "
                        f"at depth {d}")

    def terminal(self, b, s, d):
        gov = self.slots[self.perms[d, 0]]
        self.order[b:b + s] = gov[b:b + s]

    def build(self, b, s, d, threads):
        if self.check:
            if s <= 3:
                self.terminal(b, s, d)
                return 0
        elif threads <= 1 or s < PARALLEL_MIN:
            return _build_subtree(self.tuples, self.slots, self.perms, self.order, b, s, d)
        copies = self.split(b, s, d, dual=threads >= 2 and s >= DUAL_PARTITION_MIN)
        lo_size, hi_size = s // 2, (s - 1) // 2
        if threads >= 2:
            mine, theirs = split_budget(threads)
            lo, hi = fork_join(lambda: self.build(b, lo_size, d + 1, mine),
                               lambda: self.build(b + lo_size + 1, hi_size, d + 1, theirs))
        else:
            lo = self.build(b, lo_size, d + 1, 1)
            hi = self.build(b + lo_size + 1, hi_size, d + 1, 1)
        return copies + lo + hi


def build_presort(tuples, threads: int = 1, workspace: PresortWorkspace | None = None,
                  check_invariants: bool = False) -> KdTree:
    """Build the balanced tree from k presorted index arrays.

    With ``check_invariants`` every level runs through Python and each child
    segment of every index array is checked to be ascending under its own key
    (slow; meant for small inputs). ``tree.counters['copies']`` counts index
    copies made while partitioning.
    """
    tuples = as_dataset(tuples)
    n, k = tuples.shape
    if n == 0:
        raise InvalidInputError("cannot build a tree from an empty dataset")
    if threads < 1:
        raise InvalidInputError(f"threads must be >= 1, got {threads}")
    t0 = time.perf_counter()
    ws = workspace or PresortWorkspace.allocate(n, k)
    t1 = time.perf_counter()
    index_set = presort_index_arrays(tuples, threads, ws)
    t2 = time.perf_counter()
    m = index_set.slots.shape[1]
    order = ws.order[:m]
    builder = _Builder(tuples, index_set.slots, order, check_invariants)
    copies = builder.build(0, m, 0, threads)
    tree = KdTree.from_inorder(tuples, order.copy())
    t3 = time.perf_counter()
    tree.timings = {"alloc": t1 - t0, "sort": t2 - t1, "build": t3 - t2}
    tree.counters = {"copies": int(copies)}
    return tree
