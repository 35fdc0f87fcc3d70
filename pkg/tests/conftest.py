import numpy as np
import pytest

from kdbuild.core import golden_fixture

_ACCEPTANCE = []


def distinct_tuples(rng, n, k, span=None):
    """n distinct k-d integer tuples; a small span forces ties in leading coordinates."""
    span = span or max(3, int(np.ceil((4 * n) ** (1.0 / k))) + 1)
    seen = set()
    out = []
    while len(out) < n:
        t = tuple(int(v) for v in rng.integers(-span, span, size=k))
        if t not in seen:
            seen.add(t)
            out.append(t)
    return np.array(out, dtype=np.int64)


def oracle_inorder(tuples):
    """Node order of the balanced tree, by sorting every segment with Python tuple keys."""
    k = tuples.shape[1]
    rows = [tuple(int(v) for v in r) for r in tuples]
    first = {}
    for addr, row in enumerate(rows):
        first.setdefault(row, addr)
    refs = sorted(first.values())

    def key(depth):
        lead = depth % k
        return lambda r: rows[r][lead:] + rows[r][:lead]

    def rec(seg, depth):
        if not seg:
            return []
        seg = sorted(seg, key=key(depth))
        m = len(seg) // 2
        return rec(seg[:m], depth + 1) + [seg[m]] + rec(seg[m + 1:], depth + 1)

    return rec(refs, 0)


@pytest.fixture
def fixture_tuples():
    return golden_fixture()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def acceptance():
    def record(criterion, status, detail):
        _ACCEPTANCE.append((criterion, status, detail))
        print(f"ACCEPTANCE {criterion}: {status} - {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, status, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{status:4}] {criterion:>2}. {detail}")
