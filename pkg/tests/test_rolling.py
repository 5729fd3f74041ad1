import numpy as np
import pytest
from hypothesis import given, strategies as st

from spillover.errors import DataError, EstimationError
from spillover.rolling import (
    NORMAL_TIMES,
    BICPerWindow,
    Episode,
    FixedLag,
    RollingConfig,
    RollingResult,
    episode_averages,
    load_episodes,
    rolling_spillovers,
    window_count,
    window_ends,
    write_episode_csv,
    write_rolling_csv,
)
from spillover.synthetic import simulate_var

B = np.array([[0.4, 0.1, 0.0], [0.2, 0.3, 0.0], [0.0, 0.1, 0.5]])


class TestWindows:
    def test_single_window(self):
        X = simulate_var(B, np.eye(3), 250, seed=0)
        assert rolling_spillovers(X, RollingConfig()).n_windows == 1

    def test_ten_windows(self):
        X = simulate_var(B, np.eye(3), 259, seed=0)
        res = rolling_spillovers(X, RollingConfig())
        assert res.n_windows == 10 and list(res.window_end_dates) == list(range(249, 259))

    @given(st.integers(1, 2000), st.integers(1, 500), st.integers(1, 50))
    def test_count_formula(self, T, window, step):
        ends = window_ends(T, window, step)
        assert len(ends) == window_count(T, window, step)
        if len(ends):
            assert ends[0] == window - 1 and ends[-1] <= T - 1 and ends[-1] + step > T - 1
            assert np.all(np.diff(ends) == step)

    def test_short_sample(self):
        with pytest.raises(DataError):
            rolling_spillovers(np.zeros((100, 3)), RollingConfig())

    def test_window_must_exceed_parameters(self):
        with pytest.raises(ValueError):
            rolling_spillovers(np.random.default_rng(0).standard_normal((300, 30)), RollingConfig(window=40))

    def test_step_positive(self):
        with pytest.raises(ValueError):
            RollingConfig(step=0)

    def test_stable_total_on_stationary_data(self):
        b = np.array([[0.4, 0.2, 0.0], [0.2, 0.3, 0.1], [0.1, 0.2, 0.4]])
        sigma = np.full((3, 3), 0.4) + 0.6 * np.eye(3)
        res = rolling_spillovers(simulate_var(b, sigma, 1250, seed=1), RollingConfig(step=10))
        assert np.std(res.total_series) / np.mean(res.total_series) < 0.2

    def test_bic_per_window(self):
        X = simulate_var(B, np.eye(3), 300, seed=2)
        res = rolling_spillovers(X, RollingConfig(step=25, p_rule=BICPerWindow(3)))
        assert set(res.lags) <= {1, 2, 3} and res.n_windows == 3

    def test_parallel_matches_serial(self):
        X = simulate_var(B, np.eye(3), 300, seed=3)
        a = rolling_spillovers(X, RollingConfig(step=10))
        b = rolling_spillovers(X, RollingConfig(step=10, n_jobs=2))
        assert np.array_equal(a.total_series, b.total_series)


class TestFailures:
    def test_failed_window_kept_as_nan(self):
        # a collinear block only inside the last window's span
        X = simulate_var(B, np.eye(3), 260, seed=4)
        X[10:, 2] = 2.0 * X[10:, 1]
        X[:10, 2] = np.random.default_rng(0).standard_normal(10)
        res = rolling_spillovers(X, RollingConfig(step=1, max_failure_frac=1.0))
        assert np.isnan(res.total_series[-1]) and not np.isnan(res.total_series[0])
        assert res.failures and "RankDeficient" in res.failures[-1]["error"]

    def test_too_many_failures(self):
        X = simulate_var(B, np.eye(3), 260, seed=4)
        X[:, 2] = X[:, 1]
        with pytest.raises(EstimationError):
            rolling_spillovers(X, RollingConfig())


def _result(dates, total):
    dates = np.asarray(dates, dtype="datetime64[D]")
    total = np.asarray(total, float)
    return RollingResult(dates, total, np.column_stack([total, 2 * total]), np.zeros((len(total), 2)),
                         ("a", "b"), np.ones(len(total), dtype=int))


class TestEpisodes:
    def test_bundled_file(self):
        eps = load_episodes()
        assert [e.name for e in eps][0] == "Dot-com bubble" and len(eps) == 5
        days = [int(np.busday_count(e.start, e.end + 1)) for e in eps]
        assert days == [197, 412, 545, 64, 306]

    def test_partition_and_normal_times(self):
        days = np.datetime64("2020-01-01") + np.arange(10)
        res = _result(days, np.arange(10.0))
        ep = Episode("crisis", days[2], days[4])
        table = episode_averages(res, [ep])
        assert table.row("crisis").days == 3 and table.row("crisis").mean_total == 3.0
        normal = table.row(NORMAL_TIMES)
        assert normal.days == 7 and normal.mean_total == pytest.approx(np.mean([0, 1, 5, 6, 7, 8, 9]))
        np.testing.assert_allclose(table.row("crisis").mean_to_others, [3.0, 6.0])

    def test_single_window_episode(self):
        days = np.datetime64("2020-01-01") + np.arange(5)
        table = episode_averages(_result(days, np.arange(5.0)), [Episode("x", days[3], days[3])])
        assert table.row("x").mean_total == 3.0

    def test_empty_episode(self):
        days = np.datetime64("2020-01-01") + np.arange(5)
        with pytest.raises(DataError):
            episode_averages(_result(days, np.ones(5)), [Episode("x", np.datetime64("2021-01-01"), np.datetime64("2021-02-01"))])

    def test_nan_windows_excluded_from_mean(self):
        days = np.datetime64("2020-01-01") + np.arange(4)
        table = episode_averages(_result(days, [1.0, np.nan, 3.0, 5.0]), [Episode("x", days[0], days[2])])
        assert table.row("x").days == 3 and table.row("x").mean_total == 2.0

    def test_reversed_dates_rejected(self, tmp_path):
        (tmp_path / "e.csv").write_text("name,start,end\nbad,2020-02-01,2020-01-01\n")
        with pytest.raises(DataError):
            load_episodes(tmp_path / "e.csv")

    def test_csv_outputs(self, tmp_path):
        days = np.datetime64("2020-01-01") + np.arange(3)
        res = _result(days, [1.0, np.nan, 2.0])
        write_rolling_csv(tmp_path / "r.csv", res)
        lines = (tmp_path / "r.csv").read_text().splitlines()
        assert lines[0] == "window_end,total,a_to,a_from,b_to,b_from"
        assert lines[2] == "2020-01-02,,,0.0,,0.0"
        write_episode_csv(tmp_path / "e.csv", episode_averages(res, [Episode("x", days[0], days[0])]))
        assert (tmp_path / "e.csv").read_text().splitlines()[1].startswith("x,2020-01-01,2020-01-01,1,1.0")


def test_fixed_lag_reported():
    X = simulate_var(B, np.eye(3), 270, seed=5)
    res = rolling_spillovers(X, RollingConfig(step=10, p_rule=FixedLag(2)))
    assert np.all(res.lags == 2)
