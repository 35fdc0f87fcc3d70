"""Tuples, super-key ordering, the balanced tree type and its verifier.

A dataset is an ``(n, k)`` C-contiguous ``int64`` array; a tuple is one row.
Every builder emits the same balanced shape: the node for a segment
``(begin, size)`` lives at position ``begin + size // 2``, so a tree is fully
described by the in-order array of dataset addresses plus child links that
depend only on ``n``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from numba import njit


class KdError(Exception):
    """Base class for errors raised by this package."""


class InvalidInputError(KdError, ValueError):
    pass


class ConsistencyError(KdError, RuntimeError):
    """Internal bookkeeping reached a state the algorithms never produce."""


class VerificationError(KdError):
    def __init__(self, message: str, report: "VerificationReport | None" = None):
        super().__init__(message)
        self.report = report


class Ordering(enum.IntEnum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


@dataclass(frozen=True)
class SuperKeySpec:
    lead: int
    k: int

    def __post_init__(self):
        if self.k < 2:
            raise InvalidInputError(f"k must be >= 2, got {self.k}")
        if not 0 <= self.lead < self.k:
            raise InvalidInputError(f"lead {self.lead} outside [0, {self.k})")

    @classmethod
    def for_depth(cls, depth: int, k: int) -> "SuperKeySpec":
        return cls(depth % k, k)

    def dims(self) -> list[int]:
        """Coordinate order, most significant first."""
        return [(self.lead + i) % self.k for i in range(self.k)]


def super_key_compare(a: Sequence[int], b: Sequence[int], spec: SuperKeySpec) -> Ordering:
    if len(a) != spec.k or len(b) != spec.k:
        raise InvalidInputError(
            f"dimension mismatch: len(a)={len(a)}, len(b)={len(b)}, k={spec.k}")
    for d in spec.dims():
        x, y = int(a[d]), int(b[d])
        if x < y:
            return Ordering.LESS
        if x > y:
            return Ordering.GREATER
    return Ordering.EQUAL


@njit(cache=True, nogil=True, inline="always")
def compare_refs(tuples, a, b, lead):
    """Super-key comparison of dataset rows ``a`` and ``b``; returns -1, 0 or 1."""
    k = tuples.shape[1]
    d = lead
    for _ in range(k):
        x = tuples[a, d]
        y = tuples[b, d]
        if x < y:
            return -1
        if x > y:
            return 1
        d += 1
        if d == k:
            d = 0
    return 0


def median_split_sizes(n: int) -> tuple[int, int]:
    """Sizes of the low and high sub-arrays around the median of ``n`` elements."""
    if n < 1:
        raise InvalidInputError(f"cannot split {n} elements")
    return n // 2, (n - 1) // 2


def as_dataset(data) -> np.ndarray:
    """Validate and convert tuples to a C-contiguous ``(n, k)`` int64 array."""
    arr = np.ascontiguousarray(data, dtype=np.int64)
    if arr.ndim != 2:
        raise InvalidInputError(f"dataset must be 2-D (n, k), got shape {arr.shape}")
    if arr.shape[1] < 2:
        raise InvalidInputError(f"k must be >= 2, got {arr.shape[1]}")
    return arr


_GOLDEN = (
    (2, 3, 4), (5, 4, 2), (9, 6, 7), (4, 7, 9), (8, 1, 5),
    (7, 2, 6), (9, 4, 1), (8, 3, 2), (9, 7, 8), (6, 3, 2),
    (3, 4, 5), (1, 6, 8), (9, 5, 3), (2, 1, 3), (8, 7, 5),
)


def golden_fixture() -> np.ndarray:
    """The fifteen 3-d tuples of the worked example, by dataset address."""
    return np.array(_GOLDEN, dtype=np.int64)


@njit(cache=True, nogil=True)
def _balanced_links(n):
    low = np.full(n, -1, dtype=np.int64)
    high = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return low, high
    stack = np.empty((2 * 66, 2), dtype=np.int64)
    stack[0, 0] = 0
    stack[0, 1] = n
    top = 1
    while top > 0:
        top -= 1
        begin = stack[top, 0]
        size = stack[top, 1]
        lo_size = size // 2
        hi_size = (size - 1) // 2
        m = begin + lo_size
        if lo_size > 0:
            low[m] = begin + lo_size // 2
            stack[top, 0] = begin
            stack[top, 1] = lo_size
            top += 1
        if hi_size > 0:
            high[m] = m + 1 + hi_size // 2
            stack[top, 0] = m + 1
            stack[top, 1] = hi_size
            top += 1
    return low, high


def balanced_links(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Child links for the unique balanced shape over ``n`` in-order positions."""
    return _balanced_links(n)


class KdNode(NamedTuple):
    tuple_index: int
    low: int | None
    high: int | None


@dataclass(eq=False)
class KdTree:
    """Balanced k-d tree stored as parallel arrays.

    Node ids are positions ``0..n-1``. ``index[p]`` is the dataset address held
    by node ``p``; ``low[p]``/``high[p]`` are child node ids or -1.
    """

    tuples: np.ndarray
    index: np.ndarray
    low: np.ndarray
    high: np.ndarray
    root: int
    timings: dict = field(default_factory=dict)
    counters: dict = field(default_factory=dict)

    @classmethod
    def from_inorder(cls, tuples: np.ndarray, order: np.ndarray) -> "KdTree":
        order = np.ascontiguousarray(order, dtype=np.int64)
        low, high = balanced_links(len(order))
        root = len(order) // 2 if len(order) else -1
        return cls(tuples, order, low, high, root)

    @property
    def n(self) -> int:
        return len(self.index)

    @property
    def k(self) -> int:
        return self.tuples.shape[1]

    def node(self, p: int) -> KdNode:
        lo, hi = int(self.low[p]), int(self.high[p])
        return KdNode(int(self.index[p]), lo if lo >= 0 else None, hi if hi >= 0 else None)

    def tuple_at(self, p: int) -> tuple[int, ...]:
        return tuple(int(v) for v in self.tuples[self.index[p]])

    def levels(self) -> list[list[tuple[int, ...]]]:
        """Tuples by depth, low child before high child."""
        out = []
        frontier = [self.root] if self.root >= 0 else []
        while frontier:
            out.append([self.tuple_at(p) for p in frontier])
            nxt = []
            for p in frontier:
                for c in (self.low[p], self.high[p]):
                    if c >= 0:
                        nxt.append(int(c))
            frontier = nxt
        return out

    def identical(self, other: "KdTree") -> bool:
        return (self.root == other.root
                and np.array_equal(self.index, other.index)
                and np.array_equal(self.low, other.low)
                and np.array_equal(self.high, other.high))


class Violation(NamedTuple):
    node: int
    other: int
    kind: str


@dataclass(frozen=True)
class VerificationReport:
    node_count: int
    height: int
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


_KINDS = ("low-side order", "high-side order", "node reached twice",
          "tuple index repeated", "child id out of range")
_MAX_VIOLATIONS = 64


@njit(cache=True, nogil=True)
def _verify(tuples, index, low, high, root, max_viol):
    n = index.shape[0]
    viol = np.full((max_viol, 3), -1, dtype=np.int64)
    nviol = 0
    if root < 0:
        return 0, 0, viol, 0
    seen = np.zeros(n, dtype=np.bool_)
    seen_tuple = np.zeros(tuples.shape[0], dtype=np.bool_)
    path = np.empty(n + 1, dtype=np.int64)
    side = np.empty(n + 1, dtype=np.int64)
    stack = np.empty((2 * n + 2, 3), dtype=np.int64)
    k = tuples.shape[1]
    count = 0
    height = 0
    stack[0, 0] = root
    stack[0, 1] = 0
    stack[0, 2] = 0
    top = 1
    while top > 0:
        top -= 1
        p = stack[top, 0]
        depth = stack[top, 1]
        if depth > 0:
            side[depth - 1] = stack[top, 2]
        if p < 0 or p >= n:
            if nviol < max_viol:
                viol[nviol, 0] = p
                viol[nviol, 1] = path[depth - 1] if depth > 0 else -1
                viol[nviol, 2] = 4
            nviol += 1
            continue
        if seen[p]:
            if nviol < max_viol:
                viol[nviol, 0] = p
                viol[nviol, 1] = path[depth - 1] if depth > 0 else -1
                viol[nviol, 2] = 2
            nviol += 1
            continue
        seen[p] = True
        count += 1
        if depth + 1 > height:
            height = depth + 1
        t = index[p]
        if seen_tuple[t]:
            if nviol < max_viol:
                viol[nviol, 0] = p
                viol[nviol, 1] = t
                viol[nviol, 2] = 3
            nviol += 1
        seen_tuple[t] = True
        path[depth] = p
        for d in range(depth):
            a = path[d]
            c = compare_refs(tuples, t, index[a], d % k)
            if side[d] == 0 and c >= 0:
                if nviol < max_viol:
                    viol[nviol, 0] = p
                    viol[nviol, 1] = a
                    viol[nviol, 2] = 0
                nviol += 1
            elif side[d] == 1 and c <= 0:
                if nviol < max_viol:
                    viol[nviol, 0] = p
                    viol[nviol, 1] = a
                    viol[nviol, 2] = 1
                nviol += 1
        if high[p] != -1:
            stack[top, 0] = high[p]
            stack[top, 1] = depth + 1
            stack[top, 2] = 1
            top += 1
        if low[p] != -1:
            stack[top, 0] = low[p]
            stack[top, 1] = depth + 1
            stack[top, 2] = 0
            top += 1
    return count, height, viol, nviol


def verify_tree(tree: KdTree) -> VerificationReport:
    """Check the super-key ordering of every node against all of its ancestors.

    Problems are collected, never raised; at most 64 are itemized.
    """
    count, height, viol, nviol = _verify(
        tree.tuples, tree.index, tree.low, tree.high, tree.root, _MAX_VIOLATIONS)
    violations = [Violation(int(a), int(b), _KINDS[c])
                  for a, b, c in viol[:min(nviol, _MAX_VIOLATIONS)]]
    if count != tree.n:
        violations.append(Violation(-1, count, "unreachable nodes"))
    return VerificationReport(int(count), int(height), violations)


def expected_height(n: int) -> int:
    return n.bit_length()
