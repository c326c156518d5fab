"""Max-type test for temporal homogeneity of high-dimensional means.

The test statistic is the maximum over window splits of the standardized
scan value z(t) = M_hat(t) / sigma0_hat(t).  For a window of length T the
statistic, standardized as x = stat^2 - 2 log T + log log T, follows a Type I
extreme-value (Gumbel) law with CDF G(x) = exp{-(2 sqrt(pi))^-1 e^{-x/2}} as
T and the dimension grow.  Thresholds, p-values and the power lower bound
below all derive from that limit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .kernels import MeanScanProfile, mean_scan
from .panel import PanelTensor, TimeInterval

TWO_SQRT_PI = 2.0 * math.sqrt(math.pi)

# Gumbel calibration is meaningless on very short windows; shorter intervals
# are treated as change-point free by the segmentation layer.
DEFAULT_MIN_TEST_LENGTH = 6


class StatisticUndefinedError(RuntimeError):
    """Raised when every split of the window is flagged untestable."""


def gumbel_quantile(alpha: float) -> float:
    """Upper-alpha quantile x_alpha of the limiting extreme-value law.

    Solves exp{-(2 sqrt(pi))^-1 e^{-x/2}} = 1 - alpha, i.e.
    x_alpha = -2 log{-2 sqrt(pi) log(1 - alpha)}.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return -2.0 * math.log(-TWO_SQRT_PI * math.log1p(-alpha))


def max_threshold(T_len, alpha: float) -> float:
    """Rejection threshold for the max statistic on a window of length T_len."""
    if T_len <= 1:
        raise ValueError(f"window length must exceed 1, got {T_len}")
    arg = 2.0 * math.log(T_len) - math.log(math.log(T_len)) + gumbel_quantile(alpha)
    if arg < 0.0:
        raise ValueError(
            f"threshold undefined; interval too short (T={T_len}, alpha={alpha})"
        )
    return math.sqrt(arg)


def gumbel_pvalue(statistic: float, T_len) -> float:
    """P-value of an observed max statistic under the extreme-value limit.

    Monotone decreasing in the statistic and saturating at 0 and 1 in float
    arithmetic.  Negative statistics sit below the support of the limit law
    and map to p ~ 1.
    """
    if T_len <= 1:
        raise ValueError(f"window length must exceed 1, got {T_len}")
    # signed square keeps the map monotone for out-of-support negative values
    x = statistic * abs(statistic) - 2.0 * math.log(T_len) + math.log(math.log(T_len))
    try:
        tail = math.exp(-x / 2.0) / TWO_SQRT_PI
    except OverflowError:
        return 1.0
    return -math.expm1(-tail)


@dataclass
class TestReport:
    """Outcome of one homogeneity test on one window."""

    statistic: float
    threshold: float
    p_value: float
    reject: bool
    argmax_split: int
    alpha: float
    variance_mode: str
    interval: TimeInterval
    per_split_z: np.ndarray

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "threshold": self.threshold,
            "p_value": self.p_value,
            "reject": self.reject,
            "argmax_split": self.argmax_split,
            "alpha": self.alpha,
            "variance_mode": self.variance_mode,
            "interval": {"lo": self.interval.lo, "hi": self.interval.hi},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def evaluate_profile(profile: MeanScanProfile, alpha: float) -> TestReport:
    """Turn a scan profile into a test decision via the Gumbel calibration.

    The maximum runs over unflagged splits only; a flagged split carries no
    evidence.  Ties break to the smallest split time.
    """
    if not profile.testable.any():
        raise StatisticUndefinedError(
            "statistic undefined: every split of the window is untestable"
        )
    z = np.where(profile.testable, profile.z, -np.inf)
    best = int(np.argmax(z))
    statistic = float(z[best])
    T_len = profile.interval.length
    threshold = max_threshold(T_len, alpha)
    p_value = gumbel_pvalue(statistic, T_len)
    return TestReport(
        statistic=statistic,
        threshold=threshold,
        p_value=p_value,
        reject=statistic > threshold,
        argmax_split=profile.interval.lo + best,
        alpha=alpha,
        variance_mode=profile.variance_mode,
        interval=profile.interval,
        per_split_z=profile.z,
    )


def homogeneity_test(
    panel: PanelTensor,
    interval: TimeInterval | None = None,
    variance_mode: str = "ustat",
    alpha: float = 0.05,
    min_len: int = DEFAULT_MIN_TEST_LENGTH,
    pair_blocks: int = 1,
) -> TestReport:
    """Test whether the mean vector is constant over a time window.

    ``variance_mode='ustat'`` is the single-population default; ``pairwise``
    is the estimator of choice when subjects may split into latent mean
    groups.  Windows shorter than ``min_len`` are refused.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    interval = interval or panel.whole_interval()
    if interval.length < min_len:
        raise ValueError(
            f"interval too short: length {interval.length} < minimum testable {min_len}"
        )
    profile = mean_scan(panel, interval, variance_mode=variance_mode, pair_blocks=pair_blocks)
    return evaluate_profile(profile, alpha)


def power_lower_bound(m, sigma, sigma0, threshold: float) -> float:
    """Lower bound on the rejection probability of the max test.

    Given per-split population contrasts ``m``, their sampling standard
    deviations ``sigma`` and null standard deviations ``sigma0`` (Monte-Carlo
    estimates in practice), the bound is

        max_t Phi(-(sigma0_t / sigma_t) * threshold + m_t / sigma_t).
    """
    m = np.asarray(m, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    sigma0 = np.asarray(sigma0, dtype=np.float64)
    if not (m.shape == sigma.shape == sigma0.shape):
        raise ValueError("m, sigma, sigma0 must have equal lengths")
    if (sigma <= 0).any() or (sigma0 <= 0).any():
        raise ValueError("sigma and sigma0 must be positive")
    return float(np.max(ndtr(-(sigma0 / sigma) * threshold + m / sigma)))
