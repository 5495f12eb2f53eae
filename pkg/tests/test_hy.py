import numpy as np
import pytest

from conftest import series
from endocov.hy import (
    hayashi_yoshida,
    hy_from_1c,
    hy_pair,
    neighbor_times,
    one_correlated,
    realized_covariation,
)
from endocov.sampling import generate_observations
from endocov.simulate import ConstantVol, DiffusionSpec, simulate_path
from oracles import (
    hy_double_loop,
    neighbor_scan,
    one_correlated_literal,
    random_observation_instance,
)


class TestRealizedCovariation:
    def test_equal_series_gives_realized_variance(self, rng):
        t = np.concatenate(([0.0], np.cumsum(rng.exponential(1, 30))))
        p = np.concatenate(([0.0], np.cumsum(rng.normal(size=30))))
        rv = float(np.sum(np.diff(p) ** 2))
        assert realized_covariation(t, p, p, t[-1] + 1) == pytest.approx(rv, rel=1e-15)

    def test_single_interval_product(self):
        assert realized_covariation([0.0, 1.0], [0.0, 3.0], [0.0, -2.0], 2.0) == -6.0

    def test_matches_hy_on_synchronous_series(self, rng):
        for _ in range(50):
            t = np.concatenate(([0.0], np.cumsum(rng.exponential(1, 20))))
            p1 = np.concatenate(([0.0], np.cumsum(rng.normal(size=20))))
            p2 = np.concatenate(([0.0], np.cumsum(rng.normal(size=20))))
            tmax = t[-1] * rng.uniform(0.5, 1.2)
            rc = realized_covariation(t, p1, p2, tmax)
            hy = hy_pair(t, p1, t, p2, tmax)
            assert rc == pytest.approx(hy, rel=1e-12, abs=1e-15)

    def test_errors(self):
        with pytest.raises(ValueError, match="mismatch"):
            realized_covariation([0.0, 1.0], [0.0, 1.0, 2.0], [0.0, 1.0], 2.0)
        with pytest.raises(ValueError, match="increasing"):
            realized_covariation([0.0, 1.0, 0.5], [0, 1, 2], [0, 1, 2], 2.0)


class TestHayashiYoshida:
    def test_worked_instance(self):
        obs1 = series([0, 2, 4], [0, 1, -1])
        obs2 = series([0, 1, 3, 4], [0, 2, 1, 3])
        assert hayashi_yoshida(obs1, obs2, 4.5) == pytest.approx(-1.0, abs=1e-15)
        # verified against the exhaustive oracle as well
        assert hy_double_loop([0, 2, 4], [0, 1, -1], [0, 1, 3, 4], [0, 2, 1, 3], 4.5) == -1.0

    def test_sweep_matches_double_loop(self, rng):
        for _ in range(300):
            t1, p1, t2, p2 = random_observation_instance(rng)
            tmax = max(t1[-1], t2[-1]) * rng.uniform(0.3, 1.1)
            got = hy_pair(t1, p1, t2, p2, tmax)
            want = hy_double_loop(t1, p1, t2, p2, tmax)
            assert got == pytest.approx(want, rel=1e-12, abs=1e-12)

    def test_symmetry_in_assets(self, rng):
        for _ in range(50):
            t1, p1, t2, p2 = random_observation_instance(rng, max_obs=30)
            tmax = max(t1[-1], t2[-1])
            a = hy_pair(t1, p1, t2, p2, tmax)
            b = hy_pair(t2, p2, t1, p1, tmax)
            assert a == pytest.approx(b, rel=1e-12, abs=1e-15)

    def test_bilinearity_power_of_two_exact(self, rng):
        t1, p1, t2, p2 = random_observation_instance(rng, max_obs=40)
        tmax = max(t1[-1], t2[-1])
        assert hy_pair(t1, 2.0 * p1, t2, p2, tmax) == 2.0 * hy_pair(t1, p1, t2, p2, tmax)

    def test_unbiased_under_independence(self):
        # independent driftless assets: the estimate averages to zero
        spec = DiffusionSpec(vol_model=ConstantVol((0.5, 0.5)), price_correlation=0.0)
        barriers_cfg = None
        from endocov.sampling import ConstantBarriers

        barriers_cfg = ConstantBarriers(up=(0.05, 0.06), down=(0.04, 0.05))
        vals = []
        for seed in range(1000):
            path = simulate_path(spec, 1.0, 1e-3, seed=seed)
            o1 = generate_observations(path, barriers_cfg, 1)
            o2 = generate_observations(path, barriers_cfg, 2)
            vals.append(hayashi_yoshida(o1, o2, 1.0))
        vals = np.asarray(vals)
        se = vals.std(ddof=1) / np.sqrt(vals.size)
        assert abs(vals.mean()) < 3 * se

    def test_unsorted_rejected(self):
        with pytest.raises(ValueError, match="increasing"):
            hy_pair(np.array([0.0, 2.0, 1.0]), np.zeros(3), np.array([0.0, 1.0]), np.zeros(2), 3.0)


class TestNeighborTimes:
    def test_tie_goes_to_tau_plus(self):
        assert neighbor_times(1.0, np.array([0.0, 0.5, 1.0, 2.0])) == (0.5, 1.0)

    def test_zero_convention_for_missing_left(self):
        assert neighbor_times(0.3, np.array([0.0, 0.5])) == (0.0, 0.5)

    def test_missing_right_is_none(self):
        assert neighbor_times(3.0, np.array([0.0, 0.5])) == (0.5, None)

    def test_matches_linear_scan(self, rng):
        for _ in range(200):
            t2 = np.concatenate(([0.0], np.cumsum(rng.exponential(1, 15))))
            ref = rng.uniform(0, t2[-1] * 1.2)
            assert neighbor_times(ref, t2) == neighbor_scan(ref, t2)


class TestOneCorrelated:
    def test_forced_recursion(self):
        obs1 = series([0, 1, 2, 3], [0, 1, 2, 3])
        obs2 = series([0, 0.5, 1.5, 2.5], [0, 1, 2, 3])
        oneC = one_correlated(obs1, obs2)
        np.testing.assert_array_equal(oneC.tau_1c, [0, 1, 2, 3])
        np.testing.assert_array_equal(oneC.tau_minus, [0, 0.5, 1.5, 2.5])
        np.testing.assert_array_equal(oneC.tau_plus[:-1], [0, 1.5, 2.5])
        assert np.isnan(oneC.tau_plus[-1])
        assert oneC.n_returns == 3
        assert oneC.n_usable == 2

    def test_dense_second_series_keeps_all_times(self):
        obs1 = series([0, 1, 2, 3], [0, 1, 2, 3])
        obs2 = series(np.arange(0, 3.6, 0.25), np.arange(15))
        oneC = one_correlated(obs1, obs2)
        np.testing.assert_array_equal(oneC.tau_1c, obs1.times)
        assert oneC.n_usable == 3

    def test_matches_literal_recursion(self, rng):
        for _ in range(200):
            t1, p1, t2, p2 = random_observation_instance(rng, max_obs=25)
            oneC = one_correlated(series(t1, p1), series(t2, p2))
            want = one_correlated_literal(t1, t2)
            np.testing.assert_array_equal(
                np.searchsorted(t1, oneC.tau_1c), np.asarray(want)
            )

    def test_invariants_on_generated_data(self, rng):
        for _ in range(100):
            t1, p1, t2, p2 = random_observation_instance(rng, max_obs=40)
            oneC = one_correlated(series(t1, p1), series(t2, p2))
            m = oneC.tau_1c.size
            assert np.all(np.diff(oneC.tau_1c) > 0)
            assert set(oneC.tau_1c).issubset(set(t1))
            for i in range(1, m):
                assert oneC.tau_minus[i] < oneC.tau_1c[i]
                if np.isfinite(oneC.tau_plus[i]):
                    assert oneC.tau_1c[i] <= oneC.tau_plus[i]
                # at least one second-asset time inside every 1C interval
                assert np.any((t2 >= oneC.tau_1c[i - 1]) & (t2 < oneC.tau_1c[i]))

    def test_returns_and_durations_definitions(self):
        obs1 = series([0, 1, 2, 3], [0.0, 1.0, 3.0, 6.0])
        obs2 = series([0, 0.5, 1.5, 2.5, 3.5], [0.0, 10.0, 20.0, 30.0, 40.0])
        oneC = one_correlated(obs1, obs2)
        np.testing.assert_array_equal(oneC.returns_1, [1.0, 2.0, 3.0])
        np.testing.assert_array_equal(oneC.durations, [1.0, 1.0, 1.0])
        # extended second-asset windows: [minus_{i-1}, plus_i]
        np.testing.assert_array_equal(oneC.returns_2_mp, [20.0, 20.0, 20.0])


class TestHyFrom1C:
    def test_single_window_product(self):
        obs1 = series([0, 1.0], [0.0, 2.0])
        obs2 = series([0, 0.4, 1.5], [0.0, 3.0, 4.0])
        oneC = one_correlated(obs1, obs2)
        assert hy_from_1c(oneC, 2.0) == pytest.approx(2.0 * 4.0)

    def test_interleaved_matches_pair_form_exactly(self, rng):
        # exactly one second-asset time inside each first-asset interval:
        # every subsequence step is one interval and the regrouping is exact
        # in the interior (first window differs by the time-0 convention)
        t1 = np.arange(0.0, 10.5, 1.0)
        t2 = np.concatenate(([0.0], np.arange(0.5, 10.0, 1.0)))
        p1 = np.concatenate(([0.0], np.cumsum(rng.normal(size=t1.size - 1))))
        p2 = np.concatenate(([0.0], np.cumsum(rng.normal(size=t2.size - 1))))
        oneC = one_correlated(series(t1, p1), series(t2, p2))
        np.testing.assert_array_equal(oneC.tau_1c, t1)
        got = hy_from_1c(oneC, 20.0)
        want = hy_pair(t1, p1, t2, p2, 20.0)
        # interior windows agree exactly; the only difference is the trailing
        # first-asset return whose right companion does not exist
        edge = (p1[-1] - p1[-2]) * (p2[-1] - p2[-2])
        assert got == pytest.approx(want - edge, rel=1e-12)
        bound = 4 * np.abs(np.diff(p1)).max() * np.abs(np.diff(p2)).max()
        assert abs(got - want) <= bound

    def test_agrees_with_pair_form_on_generated_data(self):
        # regrouping slack: a few window products at the edges plus one per
        # subsequence step spanning several first-asset returns; checked
        # here as a small fraction of the estimate's own scale
        spec = DiffusionSpec(vol_model=ConstantVol((0.016, 0.02)), price_correlation=0.2)
        from endocov.sampling import ConstantBarriers

        boundary = ConstantBarriers(up=(0.0007, 0.0006), down=(0.0001, 0.0001))
        for seed in range(5):
            path = simulate_path(spec, 1.0, 1.0 / 666_667, seed=seed)
            o1 = generate_observations(path, boundary, 1)
            o2 = generate_observations(path, boundary, 2)
            full = hayashi_yoshida(o1, o2, 1.0)
            diag = hy_from_1c(one_correlated(o1, o2), 1.0)
            assert abs(full - diag) <= 0.15 * max(abs(full), 1e-5)
