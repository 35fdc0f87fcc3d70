"""Presort plus registration partitioning through the BN/SS/CUR arrays.

Instead of moving index-array elements, each pass over one presorted index
array records which sub-array every element now belongs to:

- ``bn[i]``: start of the sub-array holding element ``i`` (or its median slot
  once ``i`` has been registered as a median),
- ``ss[s]``: size of the live sub-array starting at ``s``; 0 marks a median,
- ``cur[s]``: elements of sub-array ``s`` counted so far in this pass.

Passes cycle through the index arrays until every element is a median. Then
``f[bn[i]] = i`` lists the elements in node order and the tree follows from
recursive subdivision of ``f``.

In dual mode one worker scans ascending up to the middle address and the
other descending down to it. Each worker's own counter gives an element's exact
rank within its sub-array: everything smaller in that sub-array sits at a lower
address, so it belongs to the ascending worker and was already counted, and
symmetrically for the descending worker. Sub-array sizes are therefore only
read during a pass, and the splits are applied once both workers finish.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, TextIO

import numpy as np
from numba import njit

from ._parallel import fork_join
from .core import ConsistencyError, InvalidInputError, KdTree, as_dataset
from .presort import PresortWorkspace, presort_index_arrays

MODES = ("single", "dual")


@dataclass
class RegistrationState:
    bn: np.ndarray
    ss: np.ndarray
    cur: np.ndarray
    zc: int = 0
    passes: int = 0
    retrievals: int = 0
    cur_b: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.bn)

    @property
    def complete(self) -> bool:
        return self.zc == self.n


@dataclass
class RegistrationWorkspace:
    """Index arrays plus temp (via ``presort``) and the BN, SS and CUR arrays.

    ``cur_b`` is the second worker's counter array for dual mode.
    """

    presort: PresortWorkspace
    bn: np.ndarray
    ss: np.ndarray
    cur: np.ndarray
    cur_b: np.ndarray

    @classmethod
    def allocate(cls, n: int, k: int) -> "RegistrationWorkspace":
        return cls(PresortWorkspace.allocate(n, k), *(np.empty(n, dtype=np.int64) for _ in range(4)))


def init_registration(n: int, dual: bool = False,
                      workspace: RegistrationWorkspace | None = None) -> RegistrationState:
    """One live sub-array covering all ``n`` elements, nothing registered."""
    if n < 1:
        raise InvalidInputError(f"cannot register a partition of {n} elements")
    if workspace is None:
        bn, ss, cur = (np.zeros(n, dtype=np.int64) for _ in range(3))
        cur_b = np.zeros(n, dtype=np.int64) if dual else None
    else:
        bn, ss, cur = workspace.bn[:n], workspace.ss[:n], workspace.cur[:n]
        cur_b = workspace.cur_b[:n] if dual else None
        for arr in (bn, ss, cur) + ((cur_b,) if dual else ()):
            arr[:] = 0
    ss[0] = n
    return RegistrationState(bn, ss, cur, cur_b=cur_b)


@njit(cache=True, nogil=True)
def _pass_single(indices, bn, ss, cur):
    registered = 0
    for idx in range(indices.shape[0]):
        tmp_i = indices[idx]
        tmp_bn = bn[tmp_i]
        tmp_size = ss[tmp_bn]
        if tmp_size == 0:
            continue
        lo_size = tmp_size // 2
        hi_size = (tmp_size - 1) // 2
        median = tmp_bn + lo_size
        hi_begin = median + 1
        c = cur[tmp_bn]
        if c >= tmp_size:
            return -1, idx
        if c < lo_size:
            bn[tmp_i] = tmp_bn
        elif c > lo_size:
            bn[tmp_i] = hi_begin
        else:
            bn[tmp_i] = median
            ss[median] = 0
            registered += 1
        c += 1
        cur[tmp_bn] = c
        if c == tmp_size and tmp_size > 1:
            ss[tmp_bn] = lo_size
            cur[tmp_bn] = 0
            if hi_size > 0:
                ss[hi_begin] = hi_size
                cur[hi_begin] = 0
    return registered, indices.shape[0]


@njit(cache=True, nogil=True)
def _pass_half(indices, first, last, step, from_top, bn, ss, cur, medians):
    """Scan indices[first..last] (inclusive) by ``step``; record median-owning starts."""
    registered = 0
    retrieved = 0
    idx = first
    while True:
        if step > 0 and idx > last:
            break
        if step < 0 and idx < last:
            break
        tmp_i = indices[idx]
        idx += step
        retrieved += 1
        tmp_bn = bn[tmp_i]
        tmp_size = ss[tmp_bn]
        if tmp_size == 0:
            continue
        lo_size = tmp_size // 2
        c = cur[tmp_bn]
        if c >= tmp_size:
            return -1, retrieved
        rank = tmp_size - 1 - c if from_top else c
        if rank < lo_size:
            bn[tmp_i] = tmp_bn
        elif rank > lo_size:
            bn[tmp_i] = tmp_bn + lo_size + 1
        else:
            bn[tmp_i] = tmp_bn + lo_size
            if tmp_size == 1:
                ss[tmp_bn] = 0
            medians[registered] = tmp_bn
            registered += 1
        cur[tmp_bn] = c + 1
    return registered, retrieved


@njit(cache=True, nogil=True)
def _apply_splits(starts, count, ss, cur_a, cur_b):
    for i in range(count):
        s = starts[i]
        size = ss[s]
        if size <= 1:
            continue
        lo_size = size // 2
        hi_size = (size - 1) // 2
        median = s + lo_size
        ss[s] = lo_size
        ss[median] = 0
        cur_a[s] = 0
        cur_b[s] = 0
        if hi_size > 0:
            ss[median + 1] = hi_size
            cur_a[median + 1] = 0
            cur_b[median + 1] = 0


def _check_pass(state: RegistrationState, registered: int, where: int):
    if registered < 0:
        raise ConsistencyError(
            f"pass {state.passes + 1}: sub-array counter exceeded its size at position {where}")


def registration_pass(state: RegistrationState, indices: np.ndarray) -> RegistrationState:
    """One single-threaded pass over a presorted index array."""
    if state.complete:
        raise InvalidInputError("registration is already complete")
    registered, retrieved = _pass_single(indices, state.bn, state.ss, state.cur)
    _check_pass(state, registered, retrieved)
    return _finish_pass(state, registered, retrieved)


def dual_registration_pass(state: RegistrationState, indices: np.ndarray,
                           buffers: tuple[np.ndarray, np.ndarray] | None = None
                           ) -> RegistrationState:
    """One pass split between an ascending and a descending worker."""
    if state.complete:
        raise InvalidInputError("registration is already complete")
    if state.cur_b is None:
        state.cur_b = np.zeros(state.n, dtype=np.int64)
    n = state.n
    mid = n // 2
    med_a, med_b = buffers or (np.empty(mid + 1, dtype=np.int64),
                               np.empty(max(n - mid - 1, 1), dtype=np.int64))
    bn, ss = state.bn, state.ss
    (reg_a, got_a), (reg_b, got_b) = fork_join(
        lambda: _pass_half(indices, 0, mid, 1, False, bn, ss, state.cur, med_a),
        lambda: _pass_half(indices, n - 1, mid + 1, -1, True, bn, ss, state.cur_b, med_b))
    _check_pass(state, min(reg_a, reg_b), -1)
    _apply_splits(med_a, reg_a, ss, state.cur, state.cur_b)
    _apply_splits(med_b, reg_b, ss, state.cur, state.cur_b)
    # the two workers' counts are summed at the join
    return _finish_pass(state, reg_a + reg_b, got_a + got_b)


def _finish_pass(state, registered, retrieved):
    state.zc += int(registered)
    state.passes += 1
    state.retrievals += int(retrieved)
    if int(state.ss.sum()) + state.zc != state.n:
        raise ConsistencyError(
            f"after pass {state.passes}: live sizes {int(state.ss.sum())} + registered "
            f"{state.zc} != {state.n}")
    return state


def max_passes(n: int) -> int:
    return math.ceil(math.log2(n)) + 2 if n > 1 else 2


def partition_all(state: RegistrationState, index_arrays: np.ndarray, mode: str = "single",
                  on_pass: Callable[[RegistrationState], None] | None = None
                  ) -> RegistrationState:
    """Cycle passes over the index arrays (lead 0, 1, ..., k-1, 0, ...) until
    every element is registered as a median."""
    if mode not in MODES:
        raise InvalidInputError(f"mode must be one of {MODES}, got {mode!r}")
    k = len(index_arrays)
    n = state.n
    limit = max_passes(n)
    buffers = None
    if mode == "dual":
        mid = n // 2
        buffers = (np.empty(mid + 1, dtype=np.int64), np.empty(max(n - mid - 1, 1), dtype=np.int64))
    while not state.complete:
        if state.passes >= limit:
            raise ConsistencyError(f"registration did not finish within {limit} passes")
        indices = index_arrays[state.passes % k]
        if mode == "dual":
            dual_registration_pass(state, indices, buffers)
        else:
            registration_pass(state, indices)
        if on_pass is not None:
            on_pass(state)
    return state


def build_final_array(state: RegistrationState) -> np.ndarray:
    """``f`` with ``f[bn[i]] = i``: elements listed in node order."""
    if not state.complete:
        raise InvalidInputError(
            f"registration incomplete: {state.zc} of {state.n} medians registered")
    f = np.full(state.n, -1, dtype=np.int64)
    f[state.bn] = np.arange(state.n, dtype=np.int64)
    if (f < 0).any():
        raise ConsistencyError("bn does not map elements one-to-one onto positions")
    return f


def build_tree_from_f(f: np.ndarray, tuples, addresses: np.ndarray | None = None) -> KdTree:
    """Subdivide ``f`` recursively: segment (begin, size) yields node
    ``f[begin + size // 2]``. ``addresses`` maps element ids to dataset rows
    when duplicates were dropped."""
    tuples = as_dataset(tuples)
    order = f if addresses is None else addresses[f]
    return KdTree.from_inorder(tuples, order)


def write_snapshot(state: RegistrationState, out: TextIO):
    """Comma-separated bn/ss/cur rows for one pass."""
    out.write(f"pass,{state.passes}\n")
    for name, arr in (("bn", state.bn), ("ss", state.ss), ("cur", state.cur)):
        out.write(name + "," + ",".join(str(int(v)) for v in arr) + "\n")


def build_registration(tuples, threads: int = 1, mode: str = "single",
                       workspace: RegistrationWorkspace | None = None,
                       on_pass: Callable[[RegistrationState], None] | None = None) -> KdTree:
    """Presort, register the partitions, build ``f`` and the tree from it.

    ``tree.timings`` holds ``alloc``, ``sort`` and ``build`` plus the
    ``partition``, ``final`` and ``tree`` parts of ``build``;
    ``tree.counters`` holds ``passes`` and ``retrievals``.
    """
    tuples = as_dataset(tuples)
    n, k = tuples.shape
    if n == 0:
        raise InvalidInputError("cannot build a tree from an empty dataset")
    if threads < 1:
        raise InvalidInputError(f"threads must be >= 1, got {threads}")
    if mode not in MODES:
        raise InvalidInputError(f"mode must be one of {MODES}, got {mode!r}")
    if mode == "dual" and threads < 2:
        raise InvalidInputError("dual mode needs threads >= 2")
    t0 = time.perf_counter()
    ws = workspace or RegistrationWorkspace.allocate(n, k)
    t1 = time.perf_counter()
    arrays = presort_index_arrays(tuples, threads, ws.presort).arrays
    m = arrays.shape[1]
    addresses = None
    if m < n:
        addresses = np.sort(arrays[0])
        local = np.empty(n, dtype=np.int64)
        local[addresses] = np.arange(m, dtype=np.int64)
        arrays = local[arrays]
    t2 = time.perf_counter()
    state = partition_all(init_registration(m, mode == "dual", ws), arrays, mode, on_pass)
    t3 = time.perf_counter()
    f = build_final_array(state)
    t4 = time.perf_counter()
    tree = build_tree_from_f(f, tuples, addresses)
    t5 = time.perf_counter()
    tree.timings = {"alloc": t1 - t0, "sort": t2 - t1, "build": t5 - t2,
                    "partition": t3 - t2, "final": t4 - t3, "tree": t5 - t4}
    tree.counters = {"passes": state.passes, "retrievals": state.retrievals}
    return tree
