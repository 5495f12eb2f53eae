import numpy as np
import pytest

from conftest import series
from endocov import bias as bc
from endocov.bias import (
    EstimationError,
    block_phis,
    block_spot_estimates,
    compensated_increments,
    default_block_size,
    estimate,
    feasible_statistic,
    ks_ab_from_phis,
    partition_blocks,
    symmetrized_estimates,
)
from endocov.hy import one_correlated
from endocov.sampling import ConstantBarriers, generate_observations
from endocov.simulate import ConstantVol, DiffusionSpec, simulate_path
from oracles import phi_hand_loop

SET1 = DiffusionSpec(vol_model=ConstantVol((0.016, 0.02)), price_correlation=0.2)
BARRIERS = ConstantBarriers(up=(0.0007, 0.0006), down=(0.0001, 0.0001))
DT = 1.0 / 666_667


def setting1_observations(seed):
    path = simulate_path(SET1, 1.0, DT, seed=seed)
    o1 = generate_observations(path, BARRIERS, 1)
    o2 = generate_observations(path, BARRIERS, 2)
    return path, o1, o2


@pytest.fixture(scope="module")
def chain():
    """One full setting-1 chain evaluation shared across tests."""
    _, o1, o2 = setting1_observations(12)
    oneC = one_correlated(o1, o2)
    plan = partition_blocks(oneC, default_block_size(oneC.n_usable))
    est = block_spot_estimates(plan, o1, o2, oneC)
    scales = bc.pooled_scales(plan, o1, o2, oneC)
    n_hat = compensated_increments(oneC, plan, est, rho=scales.rho)
    est.phi_av, est.phi_ac1, est.phi_ac2, est.phi_tau = block_phis(plan, oneC, n_hat)
    return o1, o2, oneC, plan, est, scales, n_hat


class TestPartition:
    def test_even_split(self):
        oneC = _fake_one_correlated(10)
        plan = partition_blocks(oneC, 5)
        assert plan.n_blocks == 2
        np.testing.assert_array_equal(plan.counts, [5, 5])

    def test_remainder_keeps_true_count(self):
        plan = partition_blocks(_fake_one_correlated(11), 5)
        assert plan.n_blocks == 3
        np.testing.assert_array_equal(plan.counts, [5, 5, 1])
        np.testing.assert_array_equal(plan.edge_idx, [0, 5, 10, 11])

    def test_oversized_h_single_block(self):
        plan = partition_blocks(_fake_one_correlated(7), 50)
        assert plan.n_blocks == 1
        np.testing.assert_array_equal(plan.counts, [7])

    def test_h_below_two_rejected(self):
        with pytest.raises(ValueError, match=">= 2"):
            partition_blocks(_fake_one_correlated(5), 1)


def _fake_one_correlated(n):
    """Minimal subsequence with n returns at unit spacing."""
    from endocov.hy import OneCorrelatedSeries

    tau = np.arange(n + 1, dtype=float)
    return OneCorrelatedSeries(
        tau_1c=tau,
        tau_minus=np.maximum(tau - 0.5, 0.0),
        tau_plus=tau + 0.25,
        z1=np.zeros(n + 1),
        z2_minus=np.zeros(n + 1),
        z2_plus=np.zeros(n + 1),
        returns_1=np.zeros(n),
        returns_2_mp=np.zeros(n),
        durations=np.ones(n),
    )


class TestBlockSpotEstimates:
    def test_equal_returns_reduction(self):
        # h equal returns c in one block: raw vol sqrt(h)*|c|, skew term (2/3)c
        c = 0.01
        times1 = np.arange(9, dtype=float)
        prices1 = np.arange(9, dtype=float) * c
        obs1 = series(times1, prices1)
        obs2 = series(times1, prices1)
        oneC = one_correlated(obs1, obs2)
        plan = partition_blocks(oneC, 50)
        est = block_spot_estimates(plan, obs1, obs2, oneC)
        window_returns = np.searchsorted(times1, oneC.tau_1c[plan.edge_idx[-1]], side="right") - 1
        assert est.sigma_tilde_1[0] == pytest.approx(np.sqrt(window_returns) * c)
        assert est.ab_sigma_1[0] == pytest.approx(2.0 * c / 3.0)

    def test_symmetric_returns_zero_skew(self):
        prices = np.array([0.0, 0.01, 0.0, 0.01, 0.0, 0.01, 0.0])
        times = np.arange(7, dtype=float)
        obs = series(times, prices)
        oneC = one_correlated(obs, obs)
        plan = partition_blocks(oneC, 50)
        est = block_spot_estimates(plan, obs, obs, oneC)
        assert est.ab_sigma_1[0] == pytest.approx(0.0, abs=1e-18)

    def test_spot_scale_near_true_vol(self):
        # mean blockwise spot estimate close to the constant volatility
        spots = []
        for seed in range(6):
            _, o1, o2 = setting1_observations(seed)
            oneC = one_correlated(o1, o2)
            plan = partition_blocks(oneC, default_block_size(oneC.n_usable))
            est = block_spot_estimates(plan, o1, o2, oneC)
            spots.append(est.spot_sigma_1)
        mean_spot = np.concatenate(spots).mean()
        assert abs(mean_spot - 0.016) < 0.2 * 0.016

    def test_degenerate_block_flagged(self):
        times = np.arange(8, dtype=float)
        flat = series(times, np.zeros(8))
        wiggly = series(times, np.array([0, 1, 0, 1, 0, 1, 0, 1.0]))
        oneC = one_correlated(flat, wiggly)
        plan = partition_blocks(oneC, 50)
        est = block_spot_estimates(plan, flat, wiggly, oneC)
        assert est.degenerate.all()


class TestCompensatedIncrements:
    def test_zero_rho_gives_raw_products(self, chain):
        o1, o2, oneC, plan, est, scales, _ = chain
        n_hat = compensated_increments(oneC, plan, est, rho=0.0)
        n = plan.n_returns
        np.testing.assert_allclose(
            n_hat, oneC.returns_1[:n] * oneC.returns_2_mp[:n], rtol=1e-15
        )

    def test_centering(self, chain):
        _, _, _, _, _, _, n_hat = chain
        se = n_hat.std(ddof=1) / np.sqrt(n_hat.size)
        assert abs(n_hat.mean()) < 3 * se

    def test_lag_two_decorrelation(self, chain):
        _, _, _, _, _, _, n_hat = chain
        x = n_hat - n_hat.mean()
        lag2 = np.mean(x[:-2] * x[2:])
        se = np.std(x[:-2] * x[2:], ddof=1) / np.sqrt(x.size - 2)
        assert abs(lag2) < 3 * se


class TestBlockPhis:
    def test_all_zero_increments(self):
        oneC = _fake_one_correlated(9)
        plan = partition_blocks(oneC, 3)
        phi_av, phi_ac1, phi_ac2, phi_tau = block_phis(plan, oneC, np.zeros(9))
        assert np.all(phi_av == 0) and np.all(phi_ac1 == 0) and np.all(phi_ac2 == 0)
        np.testing.assert_allclose(phi_tau, 1.0)

    def test_matches_hand_loop(self, rng):
        n = 11
        oneC = _fake_one_correlated(n)
        oneC.returns_1 = rng.normal(size=n)
        oneC.returns_2_mp = rng.normal(size=n)
        oneC.durations = rng.exponential(1.0, n)
        n_hat = rng.normal(size=n)
        plan = partition_blocks(oneC, 3)
        got = np.column_stack(block_phis(plan, oneC, n_hat))
        blocks = list(zip(plan.edge_idx[:-1], plan.edge_idx[1:]))
        want = np.asarray(
            phi_hand_loop(n_hat, oneC.returns_1, oneC.returns_2_mp, oneC.durations, blocks)
        )
        np.testing.assert_allclose(got, want, rtol=1e-12)

    def test_constant_durations_exact(self):
        oneC = _fake_one_correlated(10)
        oneC.durations = np.full(10, 0.125)
        plan = partition_blocks(oneC, 5)
        _, _, _, phi_tau = block_phis(plan, oneC, np.zeros(10))
        np.testing.assert_array_equal(phi_tau, [0.125, 0.125])


class TestKsAb:
    def test_zero_covariances_give_zero(self):
        k1, kperp, ab1, ab2 = ks_ab_from_phis(0.0, 0.0, 1.0, 1.0, 1.0, 0.5)
        assert (k1, kperp, ab1, ab2) == (0.0, 0.0, 0.0, 0.0)

    def test_zero_rho_reduction(self):
        k1, kperp, ab1, ab2 = ks_ab_from_phis(0.3, 0.4, 2.0, 1.5, 2.5, 0.0)
        assert kperp == pytest.approx(0.4 / (1.5**2 * 0.0 + 2.5**2) / 2.0 * 2.5**2 / 2.5**2)
        assert kperp == pytest.approx((0.4 / 2.5**2) / 2.0)
        assert ab1 == pytest.approx(k1)

    def test_hand_example(self):
        k1, kperp, ab1, ab2 = ks_ab_from_phis(1.0, 1.0, 1.0, 1.0, 1.0, 0.5)
        assert k1 == pytest.approx(1.0)
        assert kperp == pytest.approx(2.0 / 3.0)
        assert ab1 == pytest.approx(2.0 / 3.0)
        assert ab2 == pytest.approx(2.0 / 3.0)

    def test_nonpositive_duration_rejected(self):
        with pytest.raises(EstimationError, match="duration"):
            ks_ab_from_phis(1.0, 1.0, 0.0, 1.0, 1.0, 0.2)


class TestBlockAvAndAggregate:
    def test_zero_inputs_zero_variance(self):
        oneC = _fake_one_correlated(6)
        plan = partition_blocks(oneC, 3)
        est = block_spot_estimates(plan, series(np.arange(7.), np.arange(7.)),
                                   series(np.arange(7.), np.arange(7.)), oneC)
        pooled = bc.PooledCoefficients(
            scales=bc.PooledScales(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, False),
            k1=0.0, kperp=0.0, ab1=0.0, ab2=0.0, phi_ac1=0.0, phi_ac2=0.0, phi_tau=1.0,
        )
        bc.block_av(plan, np.zeros(6), est, pooled)
        np.testing.assert_array_equal(est.av_hat, np.zeros(2))

    def test_zero_loadings_give_squared_block_sums(self, chain, rng):
        o1, o2, oneC, plan, est, scales, n_hat = chain
        pooled = bc.PooledCoefficients(
            scales=scales, k1=0.0, kperp=0.0, ab1=0.0, ab2=0.0,
            phi_ac1=0.0, phi_ac2=0.0, phi_tau=1.0,
        )
        bc.block_av(plan, n_hat, est, pooled)
        sums = np.add.reduceat(n_hat, plan.edge_idx[:-1])
        np.testing.assert_allclose(est.av_hat, sums**2, rtol=1e-12)

    def test_av_nonnegative_on_simulated_blocks(self, chain):
        o1, o2, oneC, plan, est, scales, n_hat = chain
        pooled = bc.pooled_coefficients(plan, scales, oneC, n_hat)
        bc.block_av(plan, n_hat, est, pooled)
        assert np.all(est.av_hat >= 0.0)

    def test_all_degenerate_raises(self):
        oneC = _fake_one_correlated(6)
        plan = partition_blocks(oneC, 3)
        flat = series(np.arange(7.), np.zeros(7))
        est = block_spot_estimates(plan, flat, flat, oneC)
        pooled = bc.PooledCoefficients(
            scales=bc.PooledScales(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, False),
            k1=0.0, kperp=0.0, ab1=0.0, ab2=0.0, phi_ac1=0.0, phi_ac2=0.0, phi_tau=1.0,
        )
        bc.block_av(plan, np.zeros(6), est, pooled)
        with pytest.raises(EstimationError, match="degenerate"):
            bc.aggregate(est, pooled)


class TestEstimate:
    def test_identity_bchy(self):
        _, o1, o2 = setting1_observations(1)
        report = estimate(o1, o2)
        assert report.bchy == report.hy - report.ab_hat  # exact float identity
        assert report.av_hat >= 0.0
        assert report.statistic is None
        assert report.ci_half_width == pytest.approx(1.96 * np.sqrt(report.av_hat))

    def test_statistic_against_truth(self):
        _, o1, o2 = setting1_observations(1)
        report = estimate(o1, o2, truth=6.4e-5)
        want = (report.bchy - 6.4e-5) / np.sqrt(report.av_hat)
        assert report.statistic == pytest.approx(want, rel=1e-15)
        zero = feasible_statistic(6.4e-5, report.av_hat, 6.4e-5)
        assert zero == 0.0

    def test_zero_variance_statistic_rejected(self):
        with pytest.raises(EstimationError, match="statistic"):
            feasible_statistic(1.0, 0.0, 0.5)

    def test_scale_equivariance_exact(self):
        # doubling both price series: estimate x4, bias x4, variance x16
        _, o1, o2 = setting1_observations(2)
        base = estimate(o1, o2)
        s1 = series(o1.times, 2.0 * o1.observed)
        s2 = series(o2.times, 2.0 * o2.observed)
        scaled = estimate(s1, s2)
        assert scaled.hy == 4.0 * base.hy
        assert scaled.ab_hat == 4.0 * base.ab_hat
        assert scaled.bchy == 4.0 * base.bchy
        assert scaled.av_hat == 16.0 * base.av_hat

    def test_one_sided_scale_exact(self):
        _, o1, o2 = setting1_observations(2)
        base = estimate(o1, o2)
        scaled = estimate(series(o1.times, 2.0 * o1.observed), o2)
        assert scaled.hy == 2.0 * base.hy

    def test_rho_clamp_inactive_on_setting1(self):
        for seed in range(20):
            _, o1, o2 = setting1_observations(seed)
            report = estimate(o1, o2)
            assert not report.rho_clamped
        # per-block diagnostic clamps stay rare (run-level flag threshold 1%)

    def test_exchange_symmetry_finite(self):
        _, o1, o2 = setting1_observations(3)
        sym = symmetrized_estimates(o1, o2, truth=6.4e-5)
        assert np.isfinite(sym["ab_hat"]) and np.isfinite(sym["av_hat"])
        assert sym["av_hat"] > 0
        assert sym["forward"].hy == pytest.approx(sym["reverse"].hy, rel=1e-10)

    def test_report_json_fields(self):
        _, o1, o2 = setting1_observations(1)
        doc = estimate(o1, o2, truth=6.4e-5).to_json()
        for key in ("hy", "ab_hat", "av_hat", "bchy", "blocks", "h",
                    "degenerate_blocks", "statistic", "ci_half_width"):
            assert key in doc

    def test_default_block_size_floor(self):
        assert default_block_size(1600) == 40
        assert default_block_size(3) == 2
        assert default_block_size(0) == 2

    def test_truncation_at_t(self):
        _, o1, o2 = setting1_observations(4)
        full = estimate(o1, o2, t=1.0)
        half = estimate(o1, o2, t=0.5)
        assert half.n_obs_1 < full.n_obs_1
        assert np.isfinite(half.bchy)
