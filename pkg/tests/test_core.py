import numpy as np
import pytest
from hypothesis import given, strategies as st

from kdbuild.core import (InvalidInputError, KdTree, Ordering, SuperKeySpec, as_dataset,
                          balanced_links, expected_height, golden_fixture,
                          median_split_sizes, super_key_compare, verify_tree)
from kdbuild.medians import build_medians


def permuted(t, lead):
    return tuple(t[lead:]) + tuple(t[:lead])


def oracle_compare(a, b, lead):
    pa, pb = permuted(a, lead), permuted(b, lead)
    return Ordering((pa > pb) - (pa < pb))


@pytest.mark.parametrize("a, b, lead, expected", [
    ((2, 3, 4), (7, 2, 6), 0, Ordering.LESS),
    ((7, 2, 6), (7, 2, 6), 2, Ordering.EQUAL),
    ((8, 7, 5), (9, 7, 8), 2, Ordering.LESS),
])
def test_super_key_examples(a, b, lead, expected):
    spec = SuperKeySpec(lead, 3)
    assert super_key_compare(a, b, spec) == expected
    assert oracle_compare(a, b, lead) == expected


def test_super_key_dimension_mismatch():
    with pytest.raises(InvalidInputError):
        super_key_compare((1, 2), (1, 2, 3), SuperKeySpec(0, 3))
    with pytest.raises(InvalidInputError):
        SuperKeySpec(3, 3)
    with pytest.raises(InvalidInputError):
        SuperKeySpec(0, 1)


def test_super_key_dims_cycle():
    assert SuperKeySpec(1, 3).dims() == [1, 2, 0]
    assert SuperKeySpec.for_depth(5, 3) == SuperKeySpec(2, 3)


small = st.integers(-3, 3)


@given(st.integers(2, 5).flatmap(lambda k: st.tuples(
    st.lists(st.tuples(*[small] * k), min_size=3, max_size=3), st.integers(0, k - 1))))
def test_super_key_matches_permutation_oracle_and_orders(case):
    (a, b, c), lead = case
    spec = SuperKeySpec(lead, len(a))
    ab = super_key_compare(a, b, spec)
    assert ab == oracle_compare(a, b, lead)
    assert super_key_compare(b, a, spec) == -ab
    bc = super_key_compare(b, c, spec)
    if ab == Ordering.LESS and bc == Ordering.LESS:
        assert super_key_compare(a, c, spec) == Ordering.LESS
    if ab == Ordering.EQUAL:
        assert a == b
        assert all(super_key_compare(a, b, SuperKeySpec(j, len(a))) == Ordering.EQUAL
                   for j in range(len(a)))


@pytest.mark.parametrize("n, expected", [(15, (7, 7)), (14, (7, 6)), (1, (0, 0))])
def test_median_split_sizes_examples(n, expected):
    assert median_split_sizes(n) == expected


def test_median_split_sizes_rejects_zero():
    with pytest.raises(InvalidInputError):
        median_split_sizes(0)


@given(st.integers(1, 10**12))
def test_median_split_sizes_property(n):
    lo, hi = median_split_sizes(n)
    assert lo + hi + 1 == n
    assert 0 <= lo - hi <= 1


def test_golden_fixture_addresses():
    f = golden_fixture()
    assert f.shape == (15, 3)
    assert tuple(f[0]) == (2, 3, 4)
    assert tuple(f[5]) == (7, 2, 6)
    assert tuple(f[12]) == (9, 5, 3)
    assert len({tuple(r) for r in f}) == 15


def test_golden_fixture_level_medians():
    rows = [tuple(int(v) for v in r) for r in golden_fixture()]
    xyz = sorted(rows, key=lambda t: permuted(t, 0))
    assert xyz[7] == (7, 2, 6)
    halves = [sorted(h, key=lambda t: permuted(t, 1)) for h in (xyz[:7], xyz[8:])]
    assert [h[3] for h in halves] == [(5, 4, 2), (9, 5, 3)]
    quarters = []
    for h in halves:
        for q in (h[:3], h[4:]):
            quarters.append(sorted(q, key=lambda t: permuted(t, 2))[1])
    assert quarters == [(2, 1, 3), (1, 6, 8), (8, 3, 2), (9, 6, 7)]


def test_as_dataset_validation():
    with pytest.raises(InvalidInputError):
        as_dataset([1, 2, 3])
    with pytest.raises(InvalidInputError):
        as_dataset([[1], [2]])
    assert as_dataset([[1, 2]]).dtype == np.int64


def test_balanced_links_shape():
    low, high = balanced_links(15)
    assert low[7] == 3 and high[7] == 11
    assert low[3] == 1 and high[3] == 5
    assert low[0] == -1 and high[0] == -1
    low, high = balanced_links(2)
    assert list(low) == [-1, 0] and list(high) == [-1, -1]


def test_verify_golden_tree(fixture_tuples):
    report = verify_tree(build_medians(fixture_tuples))
    assert (report.node_count, report.height, report.violations) == (15, 4, [])


def test_verify_empty_tree(fixture_tuples):
    tree = KdTree.from_inorder(fixture_tuples, np.empty(0, dtype=np.int64))
    report = verify_tree(tree)
    assert (report.node_count, report.height, report.violations) == (0, 0, [])


def test_verify_detects_swapped_root_children(fixture_tuples):
    tree = build_medians(fixture_tuples)
    root = tree.root
    tree.low[root], tree.high[root] = tree.high[root], tree.low[root]
    report = verify_tree(tree)
    assert report.node_count == 15
    assert report.violations
    assert {v.kind for v in report.violations} == {"low-side order", "high-side order"}


def test_verify_detects_structural_damage(fixture_tuples):
    tree = build_medians(fixture_tuples)
    tree.low[tree.root] = tree.high[tree.root]
    kinds = {v.kind for v in verify_tree(tree).violations}
    assert "node reached twice" in kinds
    tree = build_medians(fixture_tuples)
    tree.index[0] = tree.index[1]
    kinds = {v.kind for v in verify_tree(tree).violations}
    assert "tuple index repeated" in kinds
    tree = build_medians(fixture_tuples)
    tree.high[tree.root] = 99
    kinds = {v.kind for v in verify_tree(tree).violations}
    assert "child id out of range" in kinds


def test_verify_single_node():
    tree = KdTree.from_inorder(np.array([[1, 2]]), np.array([0]))
    report = verify_tree(tree)
    assert (report.node_count, report.height, report.ok) == (1, 1, True)


@pytest.mark.parametrize("n", [1, 2, 3, 7, 8, 15, 16, 1000])
def test_expected_height(n):
    assert expected_height(n) == int(np.floor(np.log2(n))) + 1


def test_node_view(fixture_tuples):
    tree = build_medians(fixture_tuples)
    root = tree.node(tree.root)
    assert root.tuple_index == 5
    assert tree.tuple_at(root.low) == (5, 4, 2)
    assert tree.tuple_at(root.high) == (9, 5, 3)
    leaf = tree.node(0)
    assert leaf.low is None and leaf.high is None
