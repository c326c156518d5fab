"""Multiple change-point identification by recursive binary segmentation.

Each window is tested for mean homogeneity; on rejection the change-point is
estimated as the split maximizing the unstandardized scan value M_hat, the
window is cut there into [lo, tau] and [tau + 1, hi], and both halves are
re-examined until no window rejects.  Windows shorter than ``min_len`` are
declared change-point free without testing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .homogeneity import (
    DEFAULT_MIN_TEST_LENGTH,
    StatisticUndefinedError,
    evaluate_profile,
)
from .kernels import MeanScanProfile, mean_scan
from .panel import PanelTensor, TimeInterval

ALPHA_POLICIES = ("fixed", "per_level")


def argmax_split(profile: MeanScanProfile) -> int:
    """Change-point estimate on a window: absolute split time maximizing
    M_hat, ties broken toward the smallest time."""
    if profile.n_splits == 0:
        raise ValueError("empty scan profile")
    return profile.interval.lo + int(np.argmax(profile.m_hat))


@dataclass
class SegmentNode:
    """One window examined by the recursion.

    ``lo``/``hi`` may describe a single time point for degenerate leaves left
    over when a split lands at a window edge; such leaves are never tested.
    """

    lo: int
    hi: int
    tested: bool
    statistic: float | None = None
    threshold: float | None = None
    selected_split: int | None = None
    children: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "lo": self.lo,
            "hi": self.hi,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "tested": self.tested,
            "selected_split": self.selected_split,
            "children": [c.to_dict() for c in self.children],
        }


@dataclass
class SegmentationResult:
    """Estimated change-point set plus the full decision tree."""

    change_points: tuple
    root: SegmentNode
    alpha: float
    alpha_policy: str
    min_len: int
    variance_mode: str

    def nodes(self) -> list:
        """All nodes in depth-first preorder."""
        out, stack = [], [self.root]
        while stack:
            node = stack.pop()
            out.append(node)
            stack.extend(reversed(node.children))
        return out

    def to_dict(self) -> dict:
        return {
            "change_points": list(self.change_points),
            "alpha": self.alpha,
            "alpha_policy": self.alpha_policy,
            "min_len": self.min_len,
            "variance_mode": self.variance_mode,
            "nodes": [self.root.to_dict()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def binary_segmentation(
    panel: PanelTensor,
    alpha: float = 0.05,
    variance_mode: str = "ustat",
    min_len: int = DEFAULT_MIN_TEST_LENGTH,
    alpha_policy: str = "fixed",
) -> SegmentationResult:
    """Identify every change-point of a panel by recursive testing.

    ``alpha_policy='fixed'`` applies the same level at every node (the usual
    practice); ``'per_level'`` halves it with each recursion depth as a
    Bonferroni-style guard.  A window whose statistic is undefined counts as
    a non-detection and is recorded untested.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if alpha_policy not in ALPHA_POLICIES:
        raise ValueError(f"alpha_policy must be one of {ALPHA_POLICIES}, got {alpha_policy!r}")
    if min_len < 2:
        raise ValueError(f"min_len must be at least 2, got {min_len}")

    found: list[int] = []

    def examine(lo: int, hi: int, depth: int) -> SegmentNode:
        if hi - lo + 1 < min_len:
            return SegmentNode(lo=lo, hi=hi, tested=False)
        level = alpha if alpha_policy == "fixed" else alpha / (2.0**depth)
        profile = mean_scan(panel, TimeInterval(lo, hi), variance_mode=variance_mode)
        try:
            report = evaluate_profile(profile, level)
        except StatisticUndefinedError:
            return SegmentNode(lo=lo, hi=hi, tested=False)
        node = SegmentNode(
            lo=lo,
            hi=hi,
            tested=True,
            statistic=report.statistic,
            threshold=report.threshold,
        )
        if report.reject:
            tau = argmax_split(profile)
            node.selected_split = tau
            found.append(tau)
            node.children.append(examine(lo, tau, depth + 1))
            node.children.append(examine(tau + 1, hi, depth + 1))
        return node

    root = examine(1, panel.n_times, 0)
    return SegmentationResult(
        change_points=tuple(sorted(found)),
        root=root,
        alpha=alpha,
        alpha_policy=alpha_policy,
        min_len=min_len,
        variance_mode=variance_mode,
    )


@dataclass(frozen=True)
class EvalMetrics:
    """Identification score against a known change-point set."""

    fp: int
    fn: int
    tp: int
    tolerance: int

    @property
    def fp_plus_fn(self) -> int:
        return self.fp + self.fn


def score_identification(estimated, truth, tolerance: int = 0) -> EvalMetrics:
    """Match estimated to true change-points one-to-one within a time window.

    Greedy in increasing estimate order; each estimate takes the nearest
    unmatched true point within ``tolerance`` (exactly equal when 0).
    Unmatched estimates count as false positives, unmatched truths as false
    negatives.
    """
    if tolerance < 0:
        raise ValueError(f"tolerance must be nonnegative, got {tolerance}")
    est = sorted(int(e) for e in estimated)
    tru = sorted(int(t) for t in truth)
    used = [False] * len(tru)
    tp = 0
    for e in est:
        best_k, best_d = None, None
        for k, t in enumerate(tru):
            if used[k]:
                continue
            dist = abs(e - t)
            if dist <= tolerance and (best_d is None or dist < best_d):
                best_k, best_d = k, dist
        if best_k is not None:
            used[best_k] = True
            tp += 1
    return EvalMetrics(fp=len(est) - tp, fn=len(tru) - tp, tp=tp, tolerance=tolerance)
