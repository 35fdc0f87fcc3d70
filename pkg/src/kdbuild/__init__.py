"""Balanced k-d tree construction: three builders and a benchmark harness."""

from .core import (ConsistencyError, InvalidInputError, KdError, KdNode, KdTree,
                   Ordering, SuperKeySpec, VerificationError, VerificationReport,
                   golden_fixture, median_split_sizes, super_key_compare, verify_tree)
from .medians import MedianConfig, build_medians
from .presort import build_presort
from .registration import build_registration

__all__ = [
    "ConsistencyError", "InvalidInputError", "KdError", "KdNode", "KdTree", "MedianConfig",
    "Ordering", "SuperKeySpec", "VerificationError", "VerificationReport", "build_medians",
    "build_presort", "build_registration", "golden_fixture", "median_split_sizes",
    "super_key_compare", "verify_tree",
]
