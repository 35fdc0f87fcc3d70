import numpy as np
import pytest

from conftest import distinct_tuples, oracle_inorder
from kdbuild.core import InvalidInputError, SuperKeySpec, expected_height, verify_tree
from kdbuild.medians import build_medians
from kdbuild.presort import (PresortWorkspace, build_presort, presort_index_arrays,
                             slot_permutations, stable_partition_about)

XYZ = [11, 13, 0, 10, 3, 1, 9, 5, 4, 7, 14, 6, 12, 2, 8]
YZX = [13, 4, 5, 9, 7, 0, 6, 1, 10, 12, 2, 11, 14, 8, 3]
ZXY = [6, 1, 9, 7, 13, 12, 0, 10, 4, 14, 5, 2, 11, 8, 3]


def test_index_arrays_fixture(fixture_tuples):
    arrays = presort_index_arrays(fixture_tuples).arrays
    assert [a.tolist() for a in arrays] == [XYZ, YZX, ZXY]


def test_index_arrays_single_tuple():
    arrays = presort_index_arrays(np.array([[3, 1, 4]])).arrays
    assert [a.tolist() for a in arrays] == [[0], [0], [0]]


def test_index_arrays_drop_duplicates():
    tuples = np.array([[1, 2], [1, 2], [0, 5], [1, 2]])
    arrays = presort_index_arrays(tuples).arrays
    assert arrays.tolist() == [[2, 0], [0, 2]]


def test_stable_partition_root_level(fixture_tuples):
    lo, hi = stable_partition_about(fixture_tuples, YZX, 5, SuperKeySpec(0, 3))
    assert lo.tolist() == [13, 9, 0, 1, 10, 11, 3]
    assert hi.tolist() == [4, 7, 6, 12, 2, 14, 8]
    assert sorted(lo.tolist() + hi.tolist() + [5]) == list(range(15))


def test_stable_partition_keeps_sub_order(fixture_tuples):
    lo, hi = stable_partition_about(fixture_tuples, ZXY, 5, SuperKeySpec(0, 3))
    # both halves remain sorted under the array's own lead-2 key
    for half in (lo, hi):
        keys = [tuple(np.roll(fixture_tuples[r], -2)) for r in half]
        assert keys == sorted(keys)
    assert set(lo.tolist()) == set(XYZ[:7])


def test_two_tuples():
    tuples = np.array([[0, 0], [1, 1]])
    tree = build_presort(tuples)
    root = tree.node(tree.root)
    assert tree.tuple_at(tree.root) == (1, 1)
    assert tree.tuple_at(root.low) == (0, 0)
    assert root.high is None


def test_fixture_levels_and_copies(fixture_tuples):
    tree = build_presort(fixture_tuples, check_invariants=True)
    assert tree.levels()[2] == [(2, 1, 3), (1, 6, 8), (8, 3, 2), (9, 6, 7)]
    assert tree.identical(build_medians(fixture_tuples))
    assert tree.counters["copies"] == 52
    assert build_presort(fixture_tuples).counters["copies"] == 52


def test_slot_permutations_are_permutations():
    for k in range(2, 7):
        perms = slot_permutations(k, 12)
        for row in perms:
            assert sorted(row.tolist()) == list(range(k + 1))
        # partitioning at depth d never writes over the governing slot
        for d in range(11):
            dests = [perms[d, k]] + [perms[d, j - 1] for j in range(2, k)]
            assert perms[d, 0] not in dests
            assert dests == perms[d + 1, :k - 1].tolist()


@pytest.mark.parametrize("k", [2, 3, 4])
@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 17, 100, 1 << 10])
def test_invariants_hold_each_level(rng, n, k):
    tuples = distinct_tuples(rng, n, k)
    tree = build_presort(tuples, check_invariants=True)
    assert tree.index.tolist() == oracle_inorder(tuples)
    levels = expected_height(n)
    assert tree.counters["copies"] <= (k - 1) * n * levels


@pytest.mark.parametrize("k", [2, 3, 5])
def test_matches_medians(rng, k):
    for n in (7, 64, 333, 1 << 12):
        tuples = distinct_tuples(rng, n, k, span=n // 3 + 1)
        reference = build_medians(tuples)
        for threads in (1, 2, 4):
            tree = build_presort(tuples, threads)
            assert tree.identical(reference)
        assert verify_tree(tree).ok


def test_dual_partition_path(rng):
    tuples = distinct_tuples(rng, 1 << 16, 3)
    reference = build_medians(tuples)
    assert build_presort(tuples, threads=2).identical(reference)
    assert build_presort(tuples, threads=8).identical(reference)


def test_workspace_reuse(rng):
    ws = PresortWorkspace.allocate(500, 3)
    for _ in range(3):
        tuples = distinct_tuples(rng, 500, 3)
        assert build_presort(tuples, workspace=ws).index.tolist() == oracle_inorder(tuples)


def test_rejects_bad_input(fixture_tuples):
    with pytest.raises(InvalidInputError):
        build_presort(np.empty((0, 2)))
    with pytest.raises(InvalidInputError):
        build_presort(fixture_tuples, threads=0)
