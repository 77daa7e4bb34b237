"""Coverage accounting: bitmaps, reports, gaps, and branch bottlenecks."""

from .bottleneck import BranchConstraintInfo, branch_condition, extract_bottlenecks
from .covmap import CoverageMap, fnv1a64, merge, merge_result
from .report import CoverageReport, disassembly_lines, render_report
from .uncovered import (
    FULLY_UNCOVERED,
    PARTIALLY_COVERED,
    MissingBodyRange,
    UncoveredFunction,
    extract_uncovered_functions,
)

__all__ = [
    "BranchConstraintInfo",
    "CoverageMap",
    "CoverageReport",
    "FULLY_UNCOVERED",
    "MissingBodyRange",
    "PARTIALLY_COVERED",
    "UncoveredFunction",
    "branch_condition",
    "disassembly_lines",
    "extract_bottlenecks",
    "extract_uncovered_functions",
    "fnv1a64",
    "merge",
    "merge_result",
    "render_report",
]
