import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import optimize, stats

from mmwdisc.errors import DomainError, ShapeError
from mmwdisc.glrt import (
    ThresholdSpec,
    detect_sweep,
    glrt_statistic,
    ml_estimates,
    slot_energies,
    sweep_statistics,
    threshold_for_pfa,
    threshold_spec,
)
from mmwdisc.ncf import NcfParams, f_quantile, miss_prob, ncf_cdf
from mmwdisc.signal_model import FrameConfig, ObservationWindow, RsSequence, complex_noise, generate_rs, synthesize_waveform


def cnoise(rng, shape):
    return complex_noise(rng, shape, 1.0)


def brute_force_lg(y, s):
    """Likelihood ratio by numerical maximization of both log-likelihoods."""
    y = y.reshape(-1, y.shape[-2], y.shape[-1])
    n = y.size

    def loglik(resid_energy, var):
        return -n * np.log(np.pi * var) - resid_energy / var

    def best(resid_energy):
        res = optimize.minimize_scalar(lambda t: -loglik(resid_energy, np.exp(t)), bounds=(-30, 30), method="bounded",
                                       options={"xatol": 1e-12})
        return -res.fun

    l0 = best(np.sum(np.abs(y) ** 2))
    # Per-slot least squares fit of y_l = h_l s^T.
    a = s[:, None]
    resid = 0.0
    for blk in y:
        h, *_ = np.linalg.lstsq(a, blk.T, rcond=None)
        resid += np.sum(np.abs(blk.T - a @ h) ** 2)
    l1 = best(resid)
    return np.expm1((l1 - l0) / n)


class TestStatistic:
    def test_orthogonal_rows(self):
        rs = RsSequence(np.array([1, 1, 1, 1], complex), 1.0)
        y = np.array([[1, -1, 1, -1], [1, 1, -1, -1]], complex)
        assert glrt_statistic(y, rs).statistic == 0.0

    def test_noiseless_flagged(self):
        rs = generate_rs(6, seed=1)
        y = np.outer([1 + 2j, -0.5j], rs.samples)
        res = glrt_statistic(y, rs)
        assert res.degenerate and res.statistic == np.inf
        assert res.decide(1e300)

    def test_brute_force_single_block(self):
        rng = np.random.default_rng(0)
        rs = generate_rs(4, seed=2)
        for _ in range(5):
            y = cnoise(rng, (2, 4))
            assert glrt_statistic(y, rs).statistic == pytest.approx(brute_force_lg(y, rs.samples), rel=1e-7)

    def test_brute_force_multi_slot(self):
        rng = np.random.default_rng(1)
        rs = generate_rs(5, seed=3)
        y = cnoise(rng, (3, 2, 5)) + 0.7 * np.outer([1, 1j], rs.samples)
        assert glrt_statistic(ObservationWindow(y), rs).statistic == pytest.approx(brute_force_lg(y, rs.samples), rel=1e-7)

    def test_result_invariants(self):
        rng = np.random.default_rng(2)
        rs = generate_rs(8, seed=4)
        res = glrt_statistic(cnoise(rng, (3, 2, 8)), rs)
        assert res.statistic >= 0
        assert res.sigma1_sq <= res.sigma0_sq
        assert res.statistic == pytest.approx((res.sigma0_sq - res.sigma1_sq) / res.sigma1_sq, rel=1e-9)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31), st.floats(1e-3, 1e3), st.floats(0, 2 * np.pi))
    def test_scale_invariance(self, seed, mag, phase):
        rng = np.random.default_rng(seed)
        rs = generate_rs(8, seed=seed)
        y = cnoise(rng, (2, 3, 8))
        c = mag * np.exp(1j * phase)
        assert glrt_statistic(c * y, rs).statistic == pytest.approx(glrt_statistic(y, rs).statistic, rel=1e-12)

    def test_shape_errors(self):
        rs = generate_rs(4)
        with pytest.raises(ShapeError):
            glrt_statistic(np.zeros((2, 5), complex), rs)
        with pytest.raises(ShapeError):
            glrt_statistic(np.zeros((1, 2, 2, 4), complex), rs)


class TestEstimates:
    def test_noise_variance(self):
        rng = np.random.default_rng(3)
        rs = generate_rs(50, seed=5)
        y = cnoise(rng, (20, 8, 50))
        _, s0, _ = ml_estimates(y, rs)
        assert abs(s0 - 1.0) < 2 / np.sqrt(y.size)

    def test_exact_channel(self):
        rs = generate_rs(7, seed=6)
        h = np.array([1 - 1j, 0.3, 2j])
        h_hat, _, s1 = ml_estimates(np.outer(h, rs.samples), rs)
        np.testing.assert_allclose(h_hat[0], h, atol=1e-14)
        assert s1 == pytest.approx(0.0, abs=1e-14)

    def test_pilot_scaling(self):
        rng = np.random.default_rng(4)
        rs = generate_rs(8, seed=7)
        c = 2.0 - 0.5j
        scaled = RsSequence(c * rs.samples, abs(c) ** 2)
        y = cnoise(rng, (2, 3, 8))
        h1, a0, a1 = ml_estimates(y, rs)
        h2, b0, b1 = ml_estimates(y, scaled)
        np.testing.assert_allclose(h2, h1 / c, rtol=1e-12)
        assert (b0, b1) == pytest.approx((a0, a1), rel=1e-12)

    def test_sigma1_identity(self):
        rng = np.random.default_rng(5)
        rs = generate_rs(6, seed=8)
        y = cnoise(rng, (4, 3, 6))
        _, s0, s1 = ml_estimates(y, rs)
        proj = np.sum(np.abs(y @ rs.samples.conj()) ** 2)
        assert s1 == pytest.approx(s0 - proj / (y.size * rs.energy), rel=1e-12)

    def test_u_v_uncorrelated(self):
        rng = np.random.default_rng(6)
        rs = generate_rs(8, seed=9)
        trials = 20_000
        y = cnoise(rng, (trials, 2, 8)) + 0.8 * np.outer([1, 1j], rs.samples)
        u, v = slot_energies(y, rs)
        assert abs(np.corrcoef(u, v)[0, 1]) < 3 / np.sqrt(trials)


class TestThreshold:
    def test_table_point(self):
        gam = threshold_for_pfa(0.001, 5000, 16, 10, 100)
        assert gam > 0
        assert 1 - ncf_cdf(99 * gam, NcfParams(320, 320 * 99)) == pytest.approx(2e-7, rel=1e-8)
        assert miss_prob(gam, 16, 10, 100, 0.0) == pytest.approx(1 - 2e-7, abs=1e-10)

    def test_median(self):
        # Symmetric degrees of freedom: N_s = 2 gives F(2N_R L, 2N_R L).
        gam = threshold_for_pfa(0.5, 1, 3, 2, 2)
        assert gam == pytest.approx(1.0, rel=1e-10)
        assert gam == pytest.approx(f_quantile(0.5, NcfParams(12, 12)), rel=1e-10)

    def test_monotone(self):
        gams = [threshold_for_pfa(p, 100, 2, 4, 8) for p in (0.1, 0.01, 0.001, 1e-4)]
        assert np.all(np.diff(gams) > 0)

    def test_errors(self):
        with pytest.raises(DomainError):
            threshold_for_pfa(2.0, 1, 1, 1, 8)
        with pytest.raises(DomainError):
            ThresholdSpec(-1.0, 0.1, 10)
        with pytest.raises(DomainError):
            ThresholdSpec(1.0, 1.0, 10)
        assert threshold_spec(0.01, 10, 2, 2, 8).n_slot == 10


class TestSweep:
    def test_matches_direct_statistic(self):
        rng = np.random.default_rng(7)
        rs = generate_rs(8, seed=10)
        n_slot, l_slots = 20, 3
        y = cnoise(rng, (2, 90))
        stat = sweep_statistics(y, rs, n_slot, l_slots)
        assert stat.shape == (n_slot,)
        for tau in range(n_slot):
            blocks = np.stack([y[:, tau + l * n_slot: tau + l * n_slot + 8] for l in range(l_slots)])
            assert stat[tau] == pytest.approx(glrt_statistic(blocks, rs).statistic, rel=1e-9)

    def test_noiseless_peak(self):
        rs = generate_rs(10, seed=11)
        frame = FrameConfig(t_slot=1e-5, t_rs=1e-6, sample_rate=1e7)
        h = np.tile([[1.0, 0.5j]], (4, 1))
        y = synthesize_waveform(np.random.default_rng(0), 2, 5 * 100, 0.0, rs, h, tau0=37, n_slot=100)
        entries = detect_sweep(y, rs, 1.0, frame, 3)
        assert len(entries) == 100
        assert [e.lag for e in entries] == list(range(100))
        assert max(entries, key=lambda e: e.statistic).lag == 37

    def test_insufficient_samples(self):
        with pytest.raises(ShapeError):
            sweep_statistics(np.zeros((1, 50), complex), generate_rs(4), 20, 3)

    def test_noise_only_false_alarms(self):
        rng = np.random.default_rng(8)
        rs = generate_rs(8, seed=12)
        n_slot, l_slots, sweeps = 50, 2, 10_000
        gam = threshold_for_pfa(0.001, n_slot, 2, l_slots, 8)
        alarms = 0
        for _ in range(10):
            stat = sweep_statistics(cnoise(rng, (sweeps // 10, 2, (l_slots + 1) * n_slot)), rs, n_slot, l_slots)
            alarms += int(np.sum(stat > gam))
        # Expected false decisions per sweep must not exceed the target.
        assert alarms <= stats.binom.ppf(0.999, sweeps, 0.001)

    def test_detects_at_minus_15_db(self):
        rng = np.random.default_rng(9)
        rs = generate_rs(100, seed=13)
        n_r, n_slot, l_slots = 16, 200, 20
        gam = threshold_for_pfa(0.001, n_slot, n_r, l_slots, 100)
        h = np.full((l_slots + 1, n_r), np.sqrt(10 ** -1.5), complex)
        hits, trials = 0, 100
        for _ in range(trials):
            h_t = h * np.exp(2j * np.pi * rng.random((l_slots + 1, 1)))
            y = synthesize_waveform(rng, n_r, (l_slots + 1) * n_slot, 1.0, rs, h_t, tau0=61, n_slot=n_slot)
            hits += detect_sweep(y, rs, gam, n_slot, l_slots)[61].decision
        assert hits >= 99
