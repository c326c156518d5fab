"""Ground-truth panel generators for calibration and power experiments.

Panels follow the multivariate linear process

    X_it = mu_t + sum_{l=0..J} Q_l eps_i(t-l),

where the innovations eps are i.i.d. p-variate standard normal or centered
Gamma(4, 0.5) vectors and every lag matrix shares one banded Toeplitz profile

    Q_l[i, j] = 0.5^|i-j| * 1{|i-j| < p/2} / (J - l + 1).

Innovations for times t <= 0 are generated (never zero-padded) so the process
is stationary from the first observed time.  A three-group mixture variant
assigns each subject a latent group with its own piecewise-constant mean
curve.

Randomness is keyed: the scenario seed is split into independent child
streams for the mean profile, the group labels, and one counter-based stream
per subject.  Subject streams depend only on (seed, subject index), so
generation may be parallelized or truncated to fewer subjects without
changing any subject's data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import matmul_toeplitz

from .kernels import MeanProfile
from .panel import PanelTensor

INNOVATIONS = ("gaussian", "centered_gamma")
GAMMA_SHAPE = 4.0
GAMMA_SCALE = 0.5
DEFAULT_SUPPORT_EXPONENT = 0.7


@dataclass(frozen=True)
class BandedCoefficients:
    """Rule-backed moving-average lag matrices, never materialized densely.

    Entry (i, j) of the lag-l matrix is 0.5^|i-j| / (J - l + 1) when
    |i - j| < p/2 and zero otherwise (0-based coordinate indices).
    """

    p: int
    J: int

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"p must be positive, got {self.p}")
        if self.J < 0:
            raise ValueError(f"J must be nonnegative, got {self.J}")

    def lag_weight(self, l: int) -> float:
        if not (0 <= l <= self.J):
            raise ValueError(f"lag {l} outside 0..{self.J}")
        return 1.0 / (self.J - l + 1)

    def entry(self, l: int, i: int, j: int) -> float:
        """Single matrix entry from the scalar rule."""
        if not (0 <= i < self.p and 0 <= j < self.p):
            raise ValueError(f"coordinate ({i}, {j}) outside 0..{self.p - 1}")
        off = abs(i - j)
        if off >= self.p / 2.0:
            return 0.0
        return 0.5**off * self.lag_weight(l)

    def band_column(self) -> np.ndarray:
        """First column of the shared unweighted Toeplitz profile."""
        off = np.arange(self.p)
        col = np.where(off < self.p / 2.0, 0.5**off.astype(np.float64), 0.0)
        return col

    def apply_base(self, vectors: np.ndarray) -> np.ndarray:
        """Multiply stacked rows by the unweighted band profile.

        ``vectors`` has shape (..., p); the product is computed from the band
        column via FFT-based Toeplitz multiplication, never forming the p x p
        matrix.
        """
        col = self.band_column()
        flat = vectors.reshape(-1, self.p).T
        out = matmul_toeplitz((col, col), flat).T
        return np.ascontiguousarray(out.reshape(vectors.shape))

    def apply(self, l: int, vectors: np.ndarray) -> np.ndarray:
        """Lag-l matrix times stacked vectors."""
        return self.lag_weight(l) * self.apply_base(vectors)


def ma_coefficients(p: int, J: int) -> BandedCoefficients:
    """The banded lag coefficients used by every generator here."""
    return BandedCoefficients(p=p, J=J)


@dataclass(frozen=True)
class SimulationScenario:
    """Complete generative description of one simulated panel.

    ``delta`` is a scalar signal magnitude for single-population scenarios or
    a triple (one magnitude per latent group) when ``mixture_probs`` is set.
    ``change_fracs`` are the change locations as fractions of T; the actual
    change-points are floor(frac * T).
    """

    n: int
    p: int
    T: int
    J: int = 2
    delta: float | tuple = 0.0
    change_fracs: tuple = ()
    support_exponent: float = DEFAULT_SUPPORT_EXPONENT
    innovation: str = "gaussian"
    mixture_probs: tuple | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "change_fracs", tuple(float(f) for f in self.change_fracs))
        if min(self.n, self.p, self.T) < 1:
            raise ValueError("n, p, T must be positive")
        if self.J < 0:
            raise ValueError(f"J must be nonnegative, got {self.J}")
        if self.innovation not in INNOVATIONS:
            raise ValueError(f"innovation must be one of {INNOVATIONS}, got {self.innovation!r}")
        fracs = self.change_fracs
        if any(not (0.0 < f < 1.0) for f in fracs):
            raise ValueError(f"change fractions must lie in (0, 1), got {fracs}")
        if any(a >= b for a, b in zip(fracs, fracs[1:])):
            raise ValueError(f"change fractions must be strictly increasing, got {fracs}")
        taus = [int(f * self.T) for f in fracs]
        if len(set(taus)) != len(taus) or any(not (1 <= t < self.T) for t in taus):
            raise ValueError(
                f"scaled change locations {taus} must be distinct interior points of [1, {self.T})"
            )
        if self.mixture_probs is not None:
            probs = tuple(float(q) for q in self.mixture_probs)
            object.__setattr__(self, "mixture_probs", probs)
            if len(probs) != 3:
                raise ValueError("mixture scenarios use exactly three groups")
            if any(q <= 0 for q in probs) or abs(sum(probs) - 1.0) > 1e-12:
                raise ValueError(f"mixture probabilities must be positive and sum to 1, got {probs}")
            deltas = self.delta
            if np.isscalar(deltas):
                raise ValueError("mixture scenarios need a delta triple (one per group)")
            object.__setattr__(self, "delta", tuple(float(d) for d in deltas))
            if len(self.delta) != 3:
                raise ValueError(f"need three group deltas, got {self.delta}")
            if len(fracs) != 2:
                raise ValueError("the mixture design uses exactly two change fractions")
        else:
            object.__setattr__(self, "delta", float(self.delta))

    def change_points(self) -> tuple:
        return tuple(int(f * self.T) for f in self.change_fracs)


def _support_size(p: int, exponent: float) -> int:
    size = int(p**exponent)
    if size < 1:
        raise ValueError(f"support size floor(p^{exponent}) is degenerate for p={p}")
    return size


def _draw_signal_vector(p, delta, support_exponent, rng) -> np.ndarray:
    """Sparse signal: floor(p^exponent) coordinates drawn without replacement
    (in this order: support, then signs), each set to +/-delta."""
    size = _support_size(p, support_exponent)
    vec = np.zeros(p)
    support = rng.choice(p, size=size, replace=False)
    signs = rng.choice(np.array([-1.0, 1.0]), size=size)
    vec[support] = delta * signs
    return vec


def _profile_from_mu(mu: np.ndarray) -> MeanProfile:
    """Wrap a mean array, deriving the change-point set from its rows."""
    changes = tuple(
        t for t in range(1, mu.shape[0]) if not np.array_equal(mu[t - 1], mu[t])
    )
    return MeanProfile(mu=mu, change_points=changes)


def sample_mean_profile(
    p: int,
    T: int,
    delta: float,
    support_exponent: float = DEFAULT_SUPPORT_EXPONENT,
    change_fracs=(),
    rng: np.random.Generator | None = None,
) -> MeanProfile:
    """Piecewise-constant mean curve: zero and signal segments alternate.

    One change gives (0, mu); two changes give (0, mu, 0), with a single
    sparse vector mu of +/-delta entries.  ``delta=0`` yields the flat zero
    profile with no change-points.
    """
    rng = rng or np.random.default_rng()
    fracs = tuple(change_fracs)
    mu = np.zeros((T, p))
    if delta == 0.0 or not fracs:
        return MeanProfile(mu=mu, change_points=())
    taus = [int(f * T) for f in fracs]
    vec = _draw_signal_vector(p, delta, support_exponent, rng)
    bounds = [0] + taus + [T]
    for k in range(len(bounds) - 1):
        if k % 2 == 1:
            mu[bounds[k] : bounds[k + 1]] = vec
    return _profile_from_mu(mu)


def sample_mixture_profiles(
    p: int,
    T: int,
    deltas,
    change_fracs=(0.4, 0.7),
    support_exponent: float = DEFAULT_SUPPORT_EXPONENT,
    rng: np.random.Generator | None = None,
) -> list[MeanProfile]:
    """Mean curves of the three-group mixture design.

    With change-points tau1 < tau2 and group magnitudes (d1, d2, d3):
    group 1 jumps to a d1-vector after tau1; group 2 jumps to a d2-vector
    after tau2; group 3 is zero through tau1, takes an independent d2-law
    vector on (tau1, tau2], and an independent d3-vector after tau2.
    """
    rng = rng or np.random.default_rng()
    d1, d2, d3 = (float(d) for d in deltas)
    tau1, tau2 = (int(f * T) for f in change_fracs)
    if not (1 <= tau1 < tau2 < T):
        raise ValueError(f"bad mixture change-points ({tau1}, {tau2}) for T={T}")

    def profile(segments):
        mu = np.zeros((T, p))
        for (lo, hi), vec in segments:
            mu[lo:hi] = vec
        return _profile_from_mu(mu)

    v1 = _draw_signal_vector(p, d1, support_exponent, rng)
    v2 = _draw_signal_vector(p, d2, support_exponent, rng)
    v2_mid = _draw_signal_vector(p, d2, support_exponent, rng)
    v3 = _draw_signal_vector(p, d3, support_exponent, rng)
    g1 = profile([((tau1, T), v1)])
    g2 = profile([((tau2, T), v2)])
    g3 = profile([((tau1, tau2), v2_mid), ((tau2, T), v3)])
    return [g1, g2, g3]


def _innovations(rng: np.random.Generator, shape, kind: str) -> np.ndarray:
    if kind == "gaussian":
        return rng.standard_normal(shape)
    # shape * scale^2 = 1, so centering leaves unit-variance innovations
    return rng.gamma(GAMMA_SHAPE, GAMMA_SCALE, size=shape) - GAMMA_SHAPE * GAMMA_SCALE


def _noise_panel(scenario: SimulationScenario, noise_ss: np.random.SeedSequence) -> np.ndarray:
    n, p, T, J = scenario.n, scenario.p, scenario.T, scenario.J
    coeffs = ma_coefficients(p, J)
    weights = np.array([coeffs.lag_weight(l) for l in range(J + 1)])
    eps_shape = (T + J, p)
    mixed = np.empty((n, T, p))
    for i, child in enumerate(noise_ss.spawn(n)):
        rng = np.random.Generator(np.random.Philox(child))
        eps = _innovations(rng, eps_shape, scenario.innovation)
        acc = np.zeros((T, p))
        for l in range(J + 1):
            # eps row J - l + k holds eps_i(1 + k - l); rows J-l .. J-l+T-1 cover t=1..T
            acc += weights[l] * eps[J - l : J - l + T]
        mixed[i] = acc
    return coeffs.apply_base(mixed)


def simulate_panel(
    scenario: SimulationScenario,
    mean_profile: MeanProfile | None = None,
) -> PanelTensor:
    """Generate one panel according to a scenario, deterministically in seed.

    ``mean_profile`` overrides the scenario's own profile draw (single
    population only), which keeps the signal fixed across replications while
    the noise varies.
    """
    root = np.random.SeedSequence(scenario.seed)
    profile_ss, label_ss, noise_ss = root.spawn(3)
    noise = _noise_panel(scenario, noise_ss)

    if scenario.mixture_probs is not None:
        if mean_profile is not None:
            raise ValueError("explicit mean_profile applies to single-population scenarios only")
        rng = np.random.Generator(np.random.Philox(profile_ss))
        profiles = sample_mixture_profiles(
            scenario.p,
            scenario.T,
            scenario.delta,
            scenario.change_fracs,
            scenario.support_exponent,
            rng,
        )
        label_rng = np.random.Generator(np.random.Philox(label_ss))
        labels = label_rng.choice(3, size=scenario.n, p=scenario.mixture_probs)
        means = np.stack([prof.mu for prof in profiles])
        return PanelTensor(noise + means[labels], group_labels=labels + 1)

    if mean_profile is None:
        rng = np.random.Generator(np.random.Philox(profile_ss))
        mean_profile = sample_mean_profile(
            scenario.p,
            scenario.T,
            scenario.delta,
            scenario.support_exponent,
            scenario.change_fracs,
            rng,
        )
    if mean_profile.mu.shape != (scenario.T, scenario.p):
        raise ValueError(
            f"mean profile shape {mean_profile.mu.shape} does not match (T, p)="
            f"({scenario.T}, {scenario.p})"
        )
    return PanelTensor(noise + mean_profile.mu[None, :, :])


def expected_cross_time_cov(coeffs: BandedCoefficients, lag: int) -> np.ndarray:
    """Model covariance Cov(X_it, X_i,t-lag) = sum_l Q_l Q_(l-lag) densely.

    Intended for small-p verification only; materializes p x p matrices from
    the entry rule.
    """
    if lag < 0:
        raise ValueError("lag must be nonnegative")
    p, J = coeffs.p, coeffs.J
    total = np.zeros((p, p))
    dense = {}
    for l in range(J + 1):
        dense[l] = np.array(
            [[coeffs.entry(l, i, j) for j in range(p)] for i in range(p)]
        )
    for l in range(lag, J + 1):
        total += dense[l] @ dense[l - lag].T
    return total
