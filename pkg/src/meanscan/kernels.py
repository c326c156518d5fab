"""Scan-statistic kernels for mean-change detection in longitudinal panels.

For a split time t inside a window of T time points, the population contrast

    M_t = h(t)^-1 * sum_{s1 <= t} sum_{s2 > t} ||mu_s1 - mu_s2||^2,
    h(t) = t * (T - t),

is zero when the mean vector is constant in time and positive otherwise.  Its
unbiased sample version M_hat(t) replaces each squared distance by the
cross-subject U-statistic

    (1 / (n(n-1))) * sum_{i != j} [X_i,s1'X_j,s1 + X_i,s2'X_j,s2
                                   - 2 X_i,s1'X_j,s2],

which avoids the squared-noise bias of plug-in estimates.  Two estimators of
the null standard error of M_hat(t) are provided: a quadruple (four distinct
subjects) trace estimator, and a pairwise squared-sum estimator that remains
valid when subjects fall into latent mean groups.

Fast paths
----------
* M_hat for every split is assembled from the pooled cross-time Gram matrix
  U[s, t] = sum_{i != j} X_i,s' X_j,t via prefix sums, costing O(T^2) after
  the O(n T^2 p) Gram build.
* The per-pair split profile D_ij(t) (the bracket of the pairwise variance
  estimator) is assembled from per-time pair Grams and cumulative subject
  sums, costing O(n^2 T p) for all pairs and splits.
* The quadruple estimator collapses, after exchanging time and subject
  summations, to a function of three pair aggregates

      s1 = sum_{i != j} D_ij,  s2 = sum_{i != j} D_ij^2,
      s3 = sum_i (sum_{j != i} D_ij)^2,

  namely (s1^2 + (n-1)(n-2) s2 - 2(n-1) s3) scaled by
  2 / (h^2 n (n-1) P4) with P4 = n(n-1)(n-2)(n-3).  The coefficients are
  locked in by brute-force enumeration tests over all subject quadruples.

Every operation is a pure function of immutable inputs.  Inputs are centered
by the pooled sample mean before accumulation; all the statistics here are
exactly invariant under translation, so this only improves conditioning.
Reductions rely on numpy's pairwise (blocked) summation and BLAS-blocked
matrix products.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .panel import PanelTensor, TimeInterval

# a standard error at or below this is indistinguishable from exact degeneracy
DEGENERACY_EPS = 1e-300

VARIANCE_MODES = ("ustat", "pairwise")


# ---------------------------------------------------------------------------
# population-level profile


@dataclass(frozen=True)
class MeanProfile:
    """Piecewise-constant population mean curve mu_t with its change-point set.

    ``mu`` has shape (T, p); ``change_points`` lists every time tau with
    mu_tau != mu_tau+1, strictly inside [1, T).
    """

    mu: np.ndarray
    change_points: tuple

    def __post_init__(self):
        mu = np.ascontiguousarray(self.mu, dtype=np.float64)
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "change_points", tuple(int(t) for t in self.change_points))
        T = mu.shape[0]
        cps = set(self.change_points)
        if any(not (1 <= t < T) for t in cps):
            raise ValueError(f"change points {sorted(cps)} not strictly inside [1, {T})")
        for t in range(1, T):
            changed = not np.array_equal(mu[t - 1], mu[t])
            if changed and t not in cps:
                raise ValueError(f"mean changes at t={t} but {t} is not a declared change point")
            if not changed and t in cps:
                raise ValueError(f"t={t} declared a change point but the mean does not change")

    @property
    def n_times(self) -> int:
        return self.mu.shape[0]

    @property
    def n_coords(self) -> int:
        return self.mu.shape[1]


def population_scan(profile: MeanProfile, interval: TimeInterval) -> np.ndarray:
    """Exact M_t for every split of ``interval`` under a known mean curve.

    Returns an array of length ``interval.length - 1``; entry k is the value
    at split time ``interval.lo + k`` (change between that time and the next).
    """
    if interval.hi > profile.n_times:
        raise ValueError("interval exceeds the profile's time range")
    mu = profile.mu[interval.lo - 1 : interval.hi]
    T = mu.shape[0]
    sq = np.einsum("tp,tp->t", mu, mu)
    csq = np.cumsum(sq)
    cmu = np.cumsum(mu, axis=0)
    t = np.arange(1, T)
    h = t * (T - t)
    pre_sq = csq[:-1]
    post_sq = csq[-1] - pre_sq
    cross = np.einsum("tp,tp->t", cmu[:-1], cmu[-1] - cmu[:-1])
    return ((T - t) * pre_sq + t * post_sq - 2.0 * cross) / h


# ---------------------------------------------------------------------------
# pooled cross-time Gram


@dataclass(frozen=True)
class CrossTimeGram:
    """Pooled pair sums over a time window.

    ``u[s, t] = sum_{i != j} X_i,s' X_j,t`` for window times s, t;
    ``subject_sums[s] = sum_i X_i,s``; ``diag_inner[s, t] = sum_i X_i,s' X_i,t``.
    The reduction used is u = subject_sums outer products minus diag_inner.
    """

    interval: TimeInterval
    u: np.ndarray
    subject_sums: np.ndarray
    diag_inner: np.ndarray


def _gram(values: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n, T, p = values.shape
    flat = np.ascontiguousarray(values.transpose(1, 0, 2).reshape(T, n * p))
    diag_inner = flat @ flat.T
    subject_sums = values.sum(axis=0)
    u = subject_sums @ subject_sums.T - diag_inner
    return u, subject_sums, diag_inner


def pooled_gram(panel: PanelTensor, interval: TimeInterval | None = None) -> CrossTimeGram:
    """Cross-time Gram of pooled pair inner products restricted to a window."""
    interval = interval or panel.whole_interval()
    u, subject_sums, diag_inner = _gram(panel.window(interval))
    return CrossTimeGram(interval=interval, u=u, subject_sums=subject_sums, diag_inner=diag_inner)


def _mhat_from_gram(u: np.ndarray, n: int) -> np.ndarray:
    """M_hat at every split from the window Gram, via prefix sums."""
    T = u.shape[0]
    t = np.arange(1, T)
    h = (t * (T - t)).astype(np.float64)
    diag_cum = np.cumsum(np.diag(u))
    pre = diag_cum[:-1]
    post = diag_cum[-1] - pre
    row_cum = np.cumsum(u.sum(axis=1))
    square = np.diag(u.cumsum(axis=0).cumsum(axis=1))
    cross_block = row_cum[:-1] - square[:-1]
    return ((T - t) * pre + t * post - 2.0 * cross_block) / (h * n * (n - 1))


# ---------------------------------------------------------------------------
# per-pair split profiles


@dataclass(frozen=True)
class PairProfileSet:
    """Split profiles D_ij(t) for every unordered subject pair.

    D_ij(t) sums, over pre-split times r1 and post-split times r2 of the
    window, the sign pattern

        X_i,r1'X_j,r1 - X_i,r1'X_j,r2 - X_i,r2'X_j,r1 + X_i,r2'X_j,r2,

    and is symmetric in (i, j).  ``d`` is packed over pairs i < j with shape
    (n_pairs, n_splits); ``pair_index`` maps rows of ``d`` to (i, j), 0-based.
    Aggregates run over ordered pairs: ``s1`` the plain sum, ``s2`` the sum of
    squares, ``s3`` the sum over subjects of squared row sums.
    """

    interval: TimeInterval
    n_subjects: int
    d: np.ndarray
    pair_index: np.ndarray
    s1: np.ndarray
    s2: np.ndarray
    s3: np.ndarray

    @property
    def n_splits(self) -> int:
        return self.d.shape[1]


def _pair_split_matrices(values: np.ndarray) -> np.ndarray:
    """Full D matrices, shape (T-1, n, n), diagonal zeroed."""
    n, T, p = values.shape
    t = np.arange(1, T)
    by_time = np.ascontiguousarray(values.transpose(1, 0, 2))
    per_time_gram = np.matmul(by_time, by_time.transpose(0, 2, 1))
    gram_cum = np.cumsum(per_time_gram, axis=0)
    pre_dot = gram_cum[:-1]
    post_dot = gram_cum[-1] - pre_dot
    cum = np.cumsum(by_time, axis=0)
    post_sum = cum[-1] - cum
    cross = np.matmul(cum[:-1], post_sum[:-1].transpose(0, 2, 1))
    d = (
        (T - t)[:, None, None] * pre_dot
        + t[:, None, None] * post_dot
        - cross
        - cross.transpose(0, 2, 1)
    )
    idx = np.arange(n)
    d[:, idx, idx] = 0.0
    # D is symmetric in exact arithmetic; take the upper-triangle evaluation
    # as canonical so the symmetry holds bitwise
    iu, ju = np.triu_indices(n, k=1)
    d[:, ju, iu] = d[:, iu, ju]
    return d


def pair_split_profiles(
    panel: PanelTensor,
    interval: TimeInterval | None = None,
    pair_blocks: int = 1,
) -> PairProfileSet:
    """Compute D_ij(t) for all pairs and window splits, plus its aggregates.

    ``pair_blocks`` > 1 partitions the pair axis into that many blocks and
    reduces each block separately before combining; the result is independent
    of the partitioning up to float accumulation order.
    """
    interval = interval or panel.whole_interval()
    values = panel.window(interval)
    values = values - values.mean(axis=(0, 1))
    n = values.shape[0]
    d_full = _pair_split_matrices(values)
    iu, ju = np.triu_indices(n, k=1)
    packed = np.ascontiguousarray(d_full[:, iu, ju].T)

    n_splits = d_full.shape[0]
    if pair_blocks <= 1:
        s2 = 2.0 * np.sum(packed * packed, axis=0)
        row = d_full.sum(axis=2)
        s1 = row.sum(axis=1)
        s3 = np.sum(row * row, axis=1)
    else:
        bounds = np.linspace(0, packed.shape[0], pair_blocks + 1).astype(int)
        s2 = np.zeros(n_splits)
        rows = np.zeros((n, n_splits))
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            block = packed[lo:hi]
            s2 += 2.0 * np.sum(block * block, axis=0)
            np.add.at(rows, iu[lo:hi], block)
            np.add.at(rows, ju[lo:hi], block)
        s1 = rows.sum(axis=0)
        s3 = np.sum(rows * rows, axis=0)

    return PairProfileSet(
        interval=interval,
        n_subjects=n,
        d=packed,
        pair_index=np.column_stack([iu, ju]),
        s1=s1,
        s2=s2,
        s3=s3,
    )


# ---------------------------------------------------------------------------
# null-variance estimators


def _ustat_variance_from_aggregates(s1, s2, s3, h, n):
    p4 = float(n) * (n - 1) * (n - 2) * (n - 3)
    inner = s1 * s1 + (n - 1.0) * (n - 2.0) * s2 - 2.0 * (n - 1.0) * s3
    return 2.0 * inner / (np.asarray(h, dtype=np.float64) ** 2 * n * (n - 1) * p4)


def null_variance_ustat(profiles: PairProfileSet, split: int, h: float, n: int) -> float:
    """Quadruple-based estimate of the null variance of M_hat at one split.

    ``split`` is the 1-based split position inside the window.  The estimate
    can come out non-positive in finite samples; callers must then treat the
    split as untestable rather than clamp.
    """
    if n < 4:
        raise ValueError(f"quadruple variance estimator needs n >= 4, got n={n}")
    if n != profiles.n_subjects:
        raise ValueError("subject count does not match the pair profiles")
    k = split - 1
    if not (0 <= k < profiles.n_splits):
        raise ValueError(f"split {split} outside 1..{profiles.n_splits}")
    return float(
        _ustat_variance_from_aggregates(
            profiles.s1[k], profiles.s2[k], profiles.s3[k], h, n
        )
    )


def null_variance_pairwise(profiles: PairProfileSet, split: int, h: float, n: int) -> float:
    """Pairwise squared-sum estimate of the null variance of M_hat.

    Valid down to n = 2 and under latent mean groups; always nonnegative, and
    zero exactly when every D_ij at the split vanishes.
    """
    if n < 2:
        raise ValueError(f"pairwise variance estimator needs n >= 2, got n={n}")
    if n != profiles.n_subjects:
        raise ValueError("subject count does not match the pair profiles")
    k = split - 1
    if not (0 <= k < profiles.n_splits):
        raise ValueError(f"split {split} outside 1..{profiles.n_splits}")
    return float(2.0 * profiles.s2[k] / (float(h) ** 2 * n**2 * (n - 1) ** 2))


# ---------------------------------------------------------------------------
# full scan profile


@dataclass(frozen=True)
class MeanScanProfile:
    """M_hat, null standard errors and standardized values for every split.

    Arrays are aligned with window splits ``interval.lo .. interval.hi - 1``.
    ``testable`` flags splits whose variance estimate is usable; ``sigma0``
    and ``z`` are NaN on flagged splits.
    """

    interval: TimeInterval
    m_hat: np.ndarray
    sigma0: np.ndarray
    z: np.ndarray
    h: np.ndarray
    variance_mode: str
    testable: np.ndarray

    @property
    def n_splits(self) -> int:
        return self.m_hat.shape[0]

    def split_times(self) -> np.ndarray:
        """Absolute 1-based split times."""
        return np.arange(self.interval.lo, self.interval.hi)


def mean_scan(
    panel: PanelTensor,
    interval: TimeInterval | None = None,
    variance_mode: str = "ustat",
    pair_blocks: int = 1,
) -> MeanScanProfile:
    """Scan every split of a window: M_hat, null standard error, z-score.

    ``variance_mode`` selects the quadruple estimator (``ustat``, n >= 4) or
    the pairwise estimator (``pairwise``, n >= 2).  Splits with a degenerate
    or non-positive variance estimate are flagged untestable.
    """
    if variance_mode not in VARIANCE_MODES:
        raise ValueError(f"variance_mode must be one of {VARIANCE_MODES}, got {variance_mode!r}")
    interval = interval or panel.whole_interval()
    n = panel.n_subjects
    if variance_mode == "ustat" and n < 4:
        raise ValueError(f"variance_mode='ustat' needs n >= 4, got n={n}")
    if n < 2:
        raise ValueError(f"scanning needs n >= 2, got n={n}")

    values = panel.window(interval)
    values = values - values.mean(axis=(0, 1))
    T = values.shape[1]
    t = np.arange(1, T)
    h = (t * (T - t)).astype(np.float64)

    u, _, _ = _gram(values)
    m_hat = _mhat_from_gram(u, n)

    profiles = pair_split_profiles(panel, interval, pair_blocks=pair_blocks)
    if variance_mode == "ustat":
        variance = _ustat_variance_from_aggregates(
            profiles.s1, profiles.s2, profiles.s3, h, n
        )
    else:
        variance = 2.0 * profiles.s2 / (h**2 * n**2 * (n - 1) ** 2)

    testable = variance > 0
    sigma0 = np.full(T - 1, np.nan)
    np.sqrt(variance, out=sigma0, where=testable)
    testable &= ~(sigma0 <= DEGENERACY_EPS)
    sigma0[~testable] = np.nan
    z = np.full(T - 1, np.nan)
    np.divide(m_hat, sigma0, out=z, where=testable)

    return MeanScanProfile(
        interval=interval,
        m_hat=m_hat,
        sigma0=sigma0,
        z=z,
        h=h,
        variance_mode=variance_mode,
        testable=testable,
    )
