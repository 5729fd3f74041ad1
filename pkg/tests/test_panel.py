import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spillover.errors import DataError, DegenerateWeightWarning, DomainError, IngestError
from spillover.panel import (
    AssetMeta,
    PricePanel,
    ReturnPanel,
    Subsector,
    aggregate_weekly,
    apply_liquidity_filter,
    attach_market_caps,
    build_subsector_index,
    compute_log_returns,
    load_metadata_csv,
    load_price_csv,
    subsector_weights,
)


def _dates(n, start="2020-01-02"):
    return np.datetime64(start, "D") + np.arange(n)


def _returns(r, assets=None, caps=None):
    r = np.asarray(r, float)
    if r.ndim == 1:
        r = r[:, None]
    n = r.shape[1]
    if assets is None:
        assets = [AssetMeta(f"A{k}", subsector=Subsector.LIFE_HEALTH) for k in range(n)]
    if caps is not None:
        assets = [AssetMeta(a.ticker, subsector=a.subsector, market_cap=np.asarray(c, float))
                  for a, c in zip(assets, caps)]
    return ReturnPanel(dates=_dates(len(r)), returns=r, assets=assets)


class TestLoadPriceCsv:
    def test_three_rows_one_asset(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text("date,AAA\n2020-01-02,100\n2020-01-03,101\n2020-01-06,99\n")
        panel = load_price_csv(f)
        assert len(panel.dates) == 3 and panel.tickers == ["AAA"]
        np.testing.assert_array_equal(panel.prices[:, 0], [100, 101, 99])

    def test_blank_cell_is_missing(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text("date,AAA,BBB\n2020-01-02,100,5\n2020-01-03,,6\n")
        panel = load_price_csv(f)
        assert np.isnan(panel.prices[1, 0]) and panel.prices[1, 1] == 6

    def test_duplicate_date_rejected(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text("date,AAA\n2020-01-02,100\n2020-01-02,101\n")
        with pytest.raises(IngestError):
            load_price_csv(f)

    def test_bad_number_names_row_and_column(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text("date,AAA\n2020-01-02,100\n2020-01-03,abc\n")
        with pytest.raises(IngestError) as info:
            load_price_csv(f)
        assert info.value.row == 3 and info.value.column == "AAA"

    def test_bad_date(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text("date,AAA\n02/01/2020,100\n")
        with pytest.raises(IngestError) as info:
            load_price_csv(f)
        assert info.value.column == "date"

    def test_metadata_attached(self, tmp_path):
        (tmp_path / "m.csv").write_text("ticker,name,country,subsector\nAAA,Alpha,DE,Reins.\n")
        (tmp_path / "p.csv").write_text("date,AAA,BBB\n2020-01-02,1,2\n")
        meta = load_metadata_csv(tmp_path / "m.csv")
        panel = load_price_csv(tmp_path / "p.csv", metadata=meta)
        assert panel.assets[0].subsector is Subsector.REINSURANCE and panel.assets[0].country == "DE"
        assert panel.assets[1].subsector is Subsector.OTHER

    def test_metadata_unknown_subsector(self, tmp_path):
        (tmp_path / "m.csv").write_text("ticker,subsector\nAAA,Banking\n")
        with pytest.raises(IngestError):
            load_metadata_csv(tmp_path / "m.csv")


class TestSubsectorEnum:
    @pytest.mark.parametrize("text", ["Lif.Hea.", "LifeHealth", "LIFE_HEALTH"])
    def test_parse_forms(self, text):
        assert Subsector.parse(text) is Subsector.LIFE_HEALTH

    def test_labels(self):
        assert [s.label for s in Subsector] == ["Ins.Bro.", "Lif.Hea.", "Mul.Lin.", "Pro.Cas.", "Reins.", "Other"]


class TestInvariants:
    def test_dates_must_increase(self):
        with pytest.raises(DataError):
            PricePanel(dates=_dates(2)[::-1], prices=np.ones((2, 1)), assets=[AssetMeta("A")])

    def test_duplicate_tickers(self):
        with pytest.raises(DataError):
            PricePanel(dates=_dates(2), prices=np.ones((2, 2)), assets=[AssetMeta("A"), AssetMeta("A")])


class TestLogReturns:
    def _panel(self, prices):
        p = np.asarray(prices, float)[:, None]
        return PricePanel(dates=_dates(len(p)), prices=p, assets=[AssetMeta("A")])

    def test_flat_price(self):
        assert compute_log_returns(self._panel([100, 100])).returns[0, 0] == 0.0

    def test_percent_units(self):
        r = compute_log_returns(self._panel([100, 100 * np.e ** 0.01])).returns
        assert r[0, 0] == pytest.approx(1.0, abs=1e-12)

    def test_missing_propagates(self):
        r = compute_log_returns(self._panel([100, np.nan, 99])).returns
        assert np.isnan(r).all() and r.shape == (2, 1)

    def test_nonpositive_price(self):
        with pytest.raises(DomainError):
            compute_log_returns(self._panel([100, 0, 99]))

    def test_first_date_dropped(self):
        ret = compute_log_returns(self._panel([1, 2, 3]))
        assert ret.dates[0] == _dates(3)[1]

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(-20, 20), min_size=2, max_size=40), st.floats(0.1, 1e4))
    def test_round_trip(self, steps, base):
        prices = base * np.exp(np.concatenate([[0.0], np.cumsum(steps)]) / 100.0)
        r = compute_log_returns(self._panel(prices)).returns[:, 0]
        rebuilt = np.exp(np.concatenate([[0.0], np.cumsum(r)]) / 100.0)
        ratio = prices / rebuilt
        assert np.max(np.abs(ratio / ratio[0] - 1.0)) < 1e-12


class TestLiquidityFilter:
    def test_forty_survives_twenty_dropped(self):
        T = 100
        r = np.zeros((T, 2))
        r[:40, 0] = 1.0
        r[:20, 1] = 1.0
        out = apply_liquidity_filter(_returns(r), 0.30)
        assert out.tickers == ["A0"]

    def test_exactly_threshold_dropped(self):
        r = np.zeros((100, 2))
        r[:30, 0] = 1.0
        r[:31, 1] = 1.0
        assert apply_liquidity_filter(_returns(r), 0.30).tickers == ["A1"]

    def test_all_zero_dropped_and_empty_error(self):
        with pytest.raises(DataError):
            apply_liquidity_filter(_returns(np.zeros((10, 1))), 0.3)

    def test_missing_filled_and_flagged(self):
        r = np.ones((10, 1))
        r[3, 0] = np.nan
        out = apply_liquidity_filter(_returns(r), 0.3)
        assert out.returns[3, 0] == 0.0 and out.zero_filled[3, 0]
        assert not np.isnan(out.returns).any() and out.finalized

    def test_order_preserved(self):
        r = np.ones((10, 3))
        r[:, 1] = 0.0
        assert apply_liquidity_filter(_returns(r), 0.3).tickers == ["A0", "A2"]

    def test_fraction_bounds(self):
        with pytest.raises(ValueError):
            apply_liquidity_filter(_returns(np.ones((5, 1))), 1.0)


class TestSubsectorIndex:
    def test_single_asset(self):
        r = np.array([1.0, -2.0, 3.0])
        idx = build_subsector_index(_returns(r, caps=[[5, 5, 5]]), Subsector.LIFE_HEALTH)
        np.testing.assert_array_equal(idx.values, r)

    def test_equal_caps(self):
        idx = build_subsector_index(_returns([[2.0, 0.0]], caps=[[1], [1]]), "Lif.Hea.")
        assert idx.values[0] == 1.0

    def test_weighted_three_to_one(self):
        idx = build_subsector_index(_returns([[4.0, 0.0]], caps=[[3], [1]]), Subsector.LIFE_HEALTH)
        assert idx.values[0] == pytest.approx(3.0, abs=1e-15)

    def test_missing_cap_gets_zero_weight(self):
        idx = build_subsector_index(_returns([[4.0, 2.0]], caps=[[np.nan], [1]]), Subsector.LIFE_HEALTH)
        assert idx.values[0] == 2.0

    def test_degenerate_date_warns(self):
        with pytest.warns(DegenerateWeightWarning):
            idx = build_subsector_index(_returns([[4.0], [1.0]], caps=[[0, 2]]), Subsector.LIFE_HEALTH)
        assert idx.values[0] == 0.0 and idx.values[1] == 1.0
        assert idx.meta["degenerate_dates"] == [str(_dates(2)[0])]

    def test_no_members(self):
        with pytest.raises(DataError):
            build_subsector_index(_returns([[1.0]], caps=[[1]]), Subsector.REINSURANCE)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.lists(st.one_of(st.just(np.nan), st.floats(0, 100)), min_size=3, max_size=3),
                    min_size=1, max_size=15))
    def test_weights_sum_to_one_or_flagged(self, caps_rows):
        caps = np.array(caps_rows).T
        T = caps.shape[1]
        panel = _returns(np.ones((T, 3)), caps=caps)
        _, w, degenerate = subsector_weights(panel, Subsector.LIFE_HEALTH)
        assert np.all(w >= 0)
        assert np.allclose(w[~degenerate].sum(axis=1), 1.0)
        assert np.all(w[degenerate] == 0)

    def test_caps_aligned_from_file(self, tmp_path):
        (tmp_path / "p.csv").write_text("date,A,B\n2020-01-02,1,1\n2020-01-03,2,1\n2020-01-06,2,2\n")
        (tmp_path / "c.csv").write_text("date,B,A\n2020-01-03,10,30\n2020-01-06,10,30\n")
        panel = attach_market_caps(load_price_csv(tmp_path / "p.csv"), tmp_path / "c.csv")
        assert np.isnan(panel.assets[0].market_cap[0])
        np.testing.assert_array_equal(panel.assets[0].market_cap[1:], [30, 30])
        ret = compute_log_returns(panel)
        np.testing.assert_array_equal(ret.assets[1].market_cap, [10, 10])


class TestWeekly:
    def test_ten_days_two_weeks(self):
        r = np.arange(10.0)
        agg, d = aggregate_weekly(r[:, None], _dates(10))
        np.testing.assert_array_equal(agg[:, 0], [10.0, 35.0])
        assert list(d) == [_dates(10)[4], _dates(10)[9]]

    def test_partial_block_dropped(self):
        assert aggregate_weekly(np.ones(12)).shape == (2,)


def test_no_warnings_on_clean_index():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        build_subsector_index(_returns([[1.0, 1.0]], caps=[[1], [1]]), Subsector.LIFE_HEALTH)
