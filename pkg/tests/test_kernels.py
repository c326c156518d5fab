import numpy as np
import pytest

from meanscan.kernels import (
    MeanProfile,
    mean_scan,
    null_variance_pairwise,
    null_variance_ustat,
    pair_split_profiles,
    pooled_gram,
    population_scan,
)
from meanscan.panel import PanelTensor, TimeInterval

from oracles import (
    naive_gram,
    naive_mean_scan,
    naive_pair_profiles,
    naive_population_scan,
    naive_variance_pairwise,
    naive_variance_ustat,
    profile_scale,
)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_panel(rng, n, T, p, scale=1.0):
    return PanelTensor(scale * rng.normal(size=(n, T, p)))


class TestPooledGram:
    def test_zero_panel(self):
        gram = pooled_gram(PanelTensor(np.zeros((3, 4, 2))))
        assert not gram.u.any()
        assert not gram.diag_inner.any()
        assert not gram.subject_sums.any()

    def test_two_subject_closed_form(self, rng):
        a = rng.normal(size=4)
        b = rng.normal(size=4)
        panel = PanelTensor(np.stack([a, b])[:, :, None])
        gram = pooled_gram(panel)
        expected = np.outer(a, b) + np.outer(b, a)
        np.testing.assert_allclose(gram.u, expected, rtol=1e-12)

    def test_matches_subject_loop(self, rng):
        panel = make_panel(rng, 5, 4, 3)
        gram = pooled_gram(panel)
        expected = naive_gram(panel.values)
        np.testing.assert_allclose(gram.u, expected, rtol=1e-12)

    def test_structural_invariants(self, rng):
        panel = make_panel(rng, 6, 5, 2)
        gram = pooled_gram(panel)
        np.testing.assert_allclose(gram.u, gram.u.T, rtol=0, atol=1e-9)
        rebuilt = gram.subject_sums @ gram.subject_sums.T - gram.diag_inner
        np.testing.assert_allclose(gram.u, rebuilt, rtol=1e-12)

    def test_subinterval(self, rng):
        panel = make_panel(rng, 4, 6, 2)
        sub = pooled_gram(panel, TimeInterval(2, 5))
        whole = pooled_gram(panel)
        np.testing.assert_allclose(sub.u, whole.u[1:5, 1:5], rtol=1e-12)


class TestMeanScan:
    def test_deterministic_panel_recovers_population(self, rng):
        T, p, n = 8, 3, 5
        curve = rng.normal(size=(T, p))
        panel = PanelTensor(np.broadcast_to(curve, (n, T, p)).copy())
        profile = mean_scan(panel, variance_mode="pairwise")
        expected = naive_population_scan(curve)
        np.testing.assert_allclose(profile.m_hat, expected, rtol=1e-10, atol=1e-12)

    def test_constant_panel_is_zero(self):
        panel = PanelTensor(np.full((5, 6, 2), 3.7))
        profile = mean_scan(panel, variance_mode="pairwise")
        np.testing.assert_allclose(profile.m_hat, 0.0, atol=1e-9)
        assert not profile.testable.any()

    def test_matches_naive_sum(self, rng):
        panel = make_panel(rng, 5, 5, 3)
        profile = mean_scan(panel)
        expected = naive_mean_scan(panel.values)
        scale = profile_scale(expected)
        assert np.max(np.abs(profile.m_hat - expected)) <= 1e-10 * scale

    def test_interval_rebasing(self, rng):
        panel = make_panel(rng, 5, 8, 2)
        sub = mean_scan(panel, TimeInterval(3, 7))
        sliced = mean_scan(PanelTensor(panel.values[:, 2:7, :]))
        np.testing.assert_allclose(sub.m_hat, sliced.m_hat, rtol=1e-12)
        np.testing.assert_allclose(sub.sigma0, sliced.sigma0, rtol=1e-12)
        assert list(sub.split_times()) == [3, 4, 5, 6]

    def test_translation_invariance(self, rng):
        panel = make_panel(rng, 6, 6, 4)
        shift = rng.normal(size=4) * 3.0
        shifted = PanelTensor(panel.values + shift)
        base = mean_scan(panel)
        moved = mean_scan(shifted)
        scale = profile_scale(base.m_hat)
        assert np.max(np.abs(base.m_hat - moved.m_hat)) <= 1e-9 * scale

    def test_scale_equivariance_power_of_two(self, rng):
        panel = make_panel(rng, 6, 6, 3)
        scaled = PanelTensor(4.0 * panel.values)
        base = mean_scan(panel)
        big = mean_scan(scaled)
        np.testing.assert_array_equal(big.m_hat, 16.0 * base.m_hat)
        np.testing.assert_array_equal(big.sigma0, 16.0 * base.sigma0)
        np.testing.assert_array_equal(big.z, base.z)

    def test_scale_equivariance_general(self, rng):
        panel = make_panel(rng, 6, 6, 3)
        c = 3.7
        scaled = PanelTensor(c * panel.values)
        base = mean_scan(panel)
        big = mean_scan(scaled)
        np.testing.assert_allclose(big.m_hat, c**2 * base.m_hat, rtol=1e-12)
        np.testing.assert_allclose(big.z, base.z, rtol=1e-11)

    def test_m_hat_consistent_with_pair_sum(self, rng):
        # sum_{i != j} D_ij(t) equals h(t) n(n-1) M_hat(t)
        panel = make_panel(rng, 5, 6, 2)
        profile = mean_scan(panel)
        profiles = pair_split_profiles(panel)
        n = panel.n_subjects
        np.testing.assert_allclose(
            profiles.s1 / (profile.h * n * (n - 1)), profile.m_hat, rtol=1e-9
        )

    def test_ustat_needs_four_subjects(self, rng):
        panel = make_panel(rng, 3, 5, 2)
        with pytest.raises(ValueError, match="n >= 4"):
            mean_scan(panel, variance_mode="ustat")
        mean_scan(panel, variance_mode="pairwise")

    def test_pair_block_partitioning(self, rng):
        panel = make_panel(rng, 7, 6, 3)
        one = mean_scan(panel, pair_blocks=1)
        many = mean_scan(panel, pair_blocks=4)
        np.testing.assert_allclose(one.sigma0, many.sigma0, rtol=1e-10)
        np.testing.assert_allclose(one.z, many.z, rtol=1e-10)


class TestPairProfiles:
    def test_zero_panel(self):
        profiles = pair_split_profiles(PanelTensor(np.zeros((3, 4, 2))))
        assert not profiles.d.any()
        assert not profiles.s1.any() and not profiles.s2.any() and not profiles.s3.any()

    def test_two_by_two_closed_form(self, rng):
        x = rng.normal(size=(2, 2, 1))
        profiles = pair_split_profiles(PanelTensor(x))
        x11, x12 = x[0, 0, 0], x[0, 1, 0]
        x21, x22 = x[1, 0, 0], x[1, 1, 0]
        expected = x11 * x21 + x12 * x22 - x11 * x22 - x12 * x21
        np.testing.assert_allclose(profiles.d[0, 0], expected, rtol=1e-12)

    def test_matches_naive_loops(self, rng):
        panel = make_panel(rng, 4, 5, 2)
        profiles = pair_split_profiles(panel)
        naive = naive_pair_profiles(panel.values)
        scale = profile_scale(naive)
        for row, (i, j) in enumerate(profiles.pair_index):
            assert np.max(np.abs(profiles.d[row] - naive[:, i, j])) <= 1e-11 * scale

    def test_symmetry_exact(self, rng):
        # the packed representation stores i < j; check the full matrices
        panel = make_panel(rng, 5, 4, 3)
        from meanscan.kernels import _pair_split_matrices

        values = panel.values - panel.values.mean(axis=(0, 1))
        full = _pair_split_matrices(values)
        np.testing.assert_array_equal(full, full.transpose(0, 2, 1))

    def test_aggregates_recomputable(self, rng):
        panel = make_panel(rng, 6, 5, 2)
        profiles = pair_split_profiles(panel)
        s1 = 2.0 * profiles.d.sum(axis=0)
        s2 = 2.0 * (profiles.d**2).sum(axis=0)
        rows = np.zeros((profiles.n_subjects, profiles.n_splits))
        for row, (i, j) in enumerate(profiles.pair_index):
            rows[i] += profiles.d[row]
            rows[j] += profiles.d[row]
        s3 = (rows**2).sum(axis=0)
        np.testing.assert_allclose(profiles.s1, s1, rtol=1e-9)
        np.testing.assert_allclose(profiles.s2, s2, rtol=1e-9)
        np.testing.assert_allclose(profiles.s3, s3, rtol=1e-9)


class TestNullVarianceUstat:
    def test_matches_full_enumeration(self, rng):
        panel = make_panel(rng, 5, 4, 2)
        profiles = pair_split_profiles(panel)
        naive = naive_variance_ustat(panel.values)
        T = panel.n_times
        scale = profile_scale(naive)
        for t in range(1, T):
            h = t * (T - t)
            fast = null_variance_ustat(profiles, t, h, panel.n_subjects)
            assert abs(fast - naive[t - 1]) <= 1e-9 * scale

    def test_quartic_scaling(self, rng):
        panel = make_panel(rng, 5, 4, 2)
        scaled = PanelTensor(2.0 * panel.values)
        a = pair_split_profiles(panel)
        b = pair_split_profiles(scaled)
        for t in (1, 2, 3):
            h = t * (4 - t)
            va = null_variance_ustat(a, t, h, 5)
            vb = null_variance_ustat(b, t, h, 5)
            assert vb == 16.0 * va  # power-of-two scaling is exact

    def test_needs_four(self, rng):
        panel = make_panel(rng, 4, 4, 2)
        profiles = pair_split_profiles(panel)
        with pytest.raises(ValueError):
            null_variance_ustat(profiles, 1, 3.0, 3)


class TestNullVariancePairwise:
    def test_zero_panel(self):
        profiles = pair_split_profiles(PanelTensor(np.zeros((3, 4, 2))))
        assert null_variance_pairwise(profiles, 1, 3.0, 3) == 0.0

    def test_two_subject_closed_form(self, rng):
        x = rng.normal(size=(2, 3, 2))
        panel = PanelTensor(x)
        profiles = pair_split_profiles(panel)
        naive_d = naive_pair_profiles(panel.values - panel.values.mean(axis=(0, 1)))
        for t in (1, 2):
            h = t * (3 - t)
            expected = naive_d[t - 1, 0, 1] ** 2 / h**2
            got = null_variance_pairwise(profiles, t, h, 2)
            np.testing.assert_allclose(got, expected, rtol=1e-12)

    def test_matches_pair_loop(self, rng):
        panel = make_panel(rng, 5, 4, 2)
        profiles = pair_split_profiles(panel)
        naive = naive_variance_pairwise(panel.values)
        for t in (1, 2, 3):
            h = t * (4 - t)
            got = null_variance_pairwise(profiles, t, h, 5)
            np.testing.assert_allclose(got, naive[t - 1], rtol=1e-12, atol=1e-300)


class TestPopulationScan:
    def test_single_change_closed_forms(self, rng):
        T, p, tau, delta = 10, 6, 4, 1.3
        vec = np.zeros(p)
        vec[:3] = delta / np.sqrt(3.0)  # ||vec||^2 = delta^2
        mu = np.zeros((T, p))
        mu[tau:] = vec
        profile = MeanProfile(mu=mu, change_points=(tau,))
        scan = population_scan(profile, TimeInterval(1, T))
        d2 = delta**2
        np.testing.assert_allclose(scan[1], (6.0 / 8.0) * d2, rtol=1e-12)
        np.testing.assert_allclose(scan[3], d2, rtol=1e-12)
        np.testing.assert_allclose(scan[6], (4.0 / 7.0) * d2, rtol=1e-12)
        assert np.argmax(scan) + 1 == tau

    def test_matches_naive(self, rng):
        mu = rng.normal(size=(7, 3))
        cps = tuple(t for t in range(1, 7) if not np.array_equal(mu[t - 1], mu[t]))
        profile = MeanProfile(mu=mu, change_points=cps)
        scan = population_scan(profile, TimeInterval(1, 7))
        np.testing.assert_allclose(scan, naive_population_scan(mu), rtol=1e-12)

    def test_profile_validation(self):
        mu = np.zeros((5, 2))
        mu[3:] = 1.0
        with pytest.raises(ValueError):
            MeanProfile(mu=mu, change_points=())  # undeclared change
        with pytest.raises(ValueError):
            MeanProfile(mu=mu, change_points=(2, 3))  # spurious declaration
        MeanProfile(mu=mu, change_points=(3,))

    def test_population_argmax_lands_on_change_point(self, rng):
        # quick version of the 1000-profile acceptance property
        for _ in range(150):
            T = int(rng.integers(8, 30))
            p = int(rng.integers(1, 5))
            q = int(rng.integers(1, 4))
            cps = sorted(rng.choice(np.arange(1, T), size=q, replace=False))
            mu = np.zeros((T, p))
            level = rng.normal(size=p)
            prev = 0
            for k, tau in enumerate(list(cps) + [T]):
                mu[prev:tau] = level
                level = level + rng.normal(size=p) * rng.uniform(0.5, 2.0)
                prev = tau
            profile = MeanProfile(mu=mu, change_points=tuple(int(c) for c in cps))
            scan = population_scan(profile, TimeInterval(1, T))
            best = int(np.argmax(scan)) + 1
            assert best in profile.change_points


class TestOracleEquivalenceBatch:
    def test_random_instances(self, rng):
        # compact version of the 50-instance acceptance run
        for _ in range(10):
            n = int(rng.integers(4, 7))
            T = int(rng.integers(3, 7))
            p = int(rng.integers(1, 5))
            panel = make_panel(rng, n, T, p)
            profile = mean_scan(panel)
            profiles = pair_split_profiles(panel)

            m_naive = naive_mean_scan(panel.values)
            scale = profile_scale(m_naive)
            assert np.max(np.abs(profile.m_hat - m_naive)) <= 1e-8 * scale

            v_naive = naive_variance_ustat(panel.values)
            scale_v = profile_scale(v_naive)
            for t in range(1, T):
                h = t * (T - t)
                fast = null_variance_ustat(profiles, t, h, n)
                assert abs(fast - v_naive[t - 1]) <= 1e-8 * scale_v
