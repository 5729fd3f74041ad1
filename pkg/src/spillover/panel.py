"""Price ingestion, log-returns, liquidity filtering and subsector indices."""

from __future__ import annotations

import csv
import datetime as dt
import enum
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, DegenerateWeightWarning, DomainError, IngestError


class Subsector(str, enum.Enum):
    INSURANCE_BROKERS = "InsuranceBrokers"
    LIFE_HEALTH = "LifeHealth"
    MULTILINE = "Multiline"
    PROPERTY_CASUALTY = "PropertyCasualty"
    REINSURANCE = "Reinsurance"
    OTHER = "Other"

    @property
    def label(self) -> str:
        return _SUBSECTOR_LABELS[self]

    @classmethod
    def parse(cls, text: str) -> "Subsector":
        text = text.strip()
        for member in cls:
            if text in (member.value, member.label, member.name):
                return member
        raise DataError(f"unknown subsector {text!r}")


_SUBSECTOR_LABELS = {
    Subsector.INSURANCE_BROKERS: "Ins.Bro.",
    Subsector.LIFE_HEALTH: "Lif.Hea.",
    Subsector.MULTILINE: "Mul.Lin.",
    Subsector.PROPERTY_CASUALTY: "Pro.Cas.",
    Subsector.REINSURANCE: "Reins.",
    Subsector.OTHER: "Other",
}


@dataclass(frozen=True)
class AssetMeta:
    """Static description of one asset.

    ``market_cap`` is aligned with the dates of the panel holding the asset;
    NaN marks a missing capitalization.
    """

    ticker: str
    name: str = ""
    country: str = ""
    subsector: Subsector = Subsector.OTHER
    market_cap: np.ndarray | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ColumnSpec:
    date_column: str = "date"
    date_format: str = "%Y-%m-%d"


def _check_dates(dates: np.ndarray) -> None:
    if len(dates) > 1 and not np.all(dates[1:] > dates[:-1]):
        raise DataError("dates must be strictly increasing")


def _check_assets(assets: Sequence[AssetMeta], ncols: int) -> None:
    if len(assets) != ncols:
        raise DataError(f"{len(assets)} assets for {ncols} columns")
    tickers = [a.ticker for a in assets]
    if len(set(tickers)) != len(tickers):
        raise DataError("tickers must be unique within a panel")


@dataclass(frozen=True)
class PricePanel:
    dates: np.ndarray  # datetime64[D]
    prices: np.ndarray  # (T, N), NaN = missing
    assets: list[AssetMeta]

    def __post_init__(self):
        _check_dates(self.dates)
        if self.prices.ndim != 2 or self.prices.shape[0] != len(self.dates):
            raise DataError("price matrix does not match dates")
        _check_assets(self.assets, self.prices.shape[1])
        observed = self.prices[~np.isnan(self.prices)]
        if np.any(observed <= 0):
            raise DomainError("observed prices must be strictly positive")

    @property
    def tickers(self) -> list[str]:
        return [a.ticker for a in self.assets]


@dataclass(frozen=True)
class ReturnPanel:
    """Log-returns with one column per asset.

    ``zero_filled`` is a boolean mask of the same shape as ``returns`` marking
    cells that were missing and replaced by zero. Until the liquidity filter has
    run, missing returns are NaN and the mask is all False.
    """

    dates: np.ndarray
    returns: np.ndarray
    assets: list[AssetMeta]
    zero_filled: np.ndarray | None = None
    units: str = "percent"

    def __post_init__(self):
        _check_dates(self.dates)
        if self.returns.ndim != 2 or self.returns.shape[0] != len(self.dates):
            raise DataError("return matrix does not match dates")
        _check_assets(self.assets, self.returns.shape[1])
        if self.zero_filled is None:
            object.__setattr__(self, "zero_filled", np.zeros(self.returns.shape, dtype=bool))

    @property
    def tickers(self) -> list[str]:
        return [a.ticker for a in self.assets]

    @property
    def finalized(self) -> bool:
        return not np.isnan(self.returns).any()

    def column(self, ticker: str) -> np.ndarray:
        return self.returns[:, self.tickers.index(ticker)]


def _parse_date(text: str, fmt: str, row: int, column: str) -> np.datetime64:
    try:
        return np.datetime64(dt.datetime.strptime(text.strip(), fmt).date(), "D")
    except ValueError:
        raise IngestError(f"unparseable date {text!r}", row=row, column=column) from None


def _parse_number(text: str, row: int, column: str) -> float:
    text = text.strip()
    if text == "":
        return np.nan
    try:
        return float(text)
    except ValueError:
        raise IngestError(f"unparseable number {text!r}", row=row, column=column) from None


def read_wide_csv(path: str | Path, schema: ColumnSpec = ColumnSpec()) -> tuple[np.ndarray, list[str], np.ndarray]:
    """Read a ``date,<ticker>,...`` CSV into (dates, tickers, values)."""
    path = Path(path)
    if not path.exists():
        raise IngestError(f"file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"empty file: {path}") from None
        if not header or header[0].strip() != schema.date_column:
            raise IngestError(f"first column must be {schema.date_column!r}", row=1)
        tickers = [h.strip() for h in header[1:]]
        if len(set(tickers)) != len(tickers):
            raise IngestError("duplicate ticker in header", row=1)
        dates, rows, seen = [], [], set()
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(c.strip() == "" for c in rec):
                continue
            if len(rec) != len(header):
                raise IngestError(f"expected {len(header)} fields, got {len(rec)}", row=lineno)
            d = _parse_date(rec[0], schema.date_format, lineno, schema.date_column)
            if d in seen:
                raise IngestError(f"duplicate date {rec[0].strip()}", row=lineno, column=schema.date_column)
            seen.add(d)
            dates.append(d)
            rows.append([_parse_number(c, lineno, tickers[i]) for i, c in enumerate(rec[1:])])
    dates_arr = np.array(dates, dtype="datetime64[D]")
    values = np.array(rows, dtype=float).reshape(len(dates), len(tickers))
    if len(dates_arr) > 1 and not np.all(dates_arr[1:] > dates_arr[:-1]):
        order = np.argsort(dates_arr)
        dates_arr, values = dates_arr[order], values[order]
    return dates_arr, tickers, values


def load_price_csv(path: str | Path, schema: ColumnSpec = ColumnSpec(), metadata: dict[str, AssetMeta] | None = None) -> PricePanel:
    """Load a wide price CSV; blanks become NaN."""
    dates, tickers, prices = read_wide_csv(path, schema)
    metadata = metadata or {}
    assets = [metadata.get(t, AssetMeta(ticker=t)) for t in tickers]
    return PricePanel(dates=dates, prices=prices, assets=assets)


def load_metadata_csv(path: str | Path) -> dict[str, AssetMeta]:
    """Read ``ticker,name,country,subsector`` rows keyed by ticker."""
    path = Path(path)
    if not path.exists():
        raise IngestError(f"file not found: {path}")
    out: dict[str, AssetMeta] = {}
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"ticker", "subsector"} - set(reader.fieldnames or [])
        if missing:
            raise IngestError(f"metadata missing columns {sorted(missing)}", row=1)
        for lineno, rec in enumerate(reader, start=2):
            ticker = rec["ticker"].strip()
            if ticker in out:
                raise IngestError(f"duplicate ticker {ticker!r}", row=lineno, column="ticker")
            try:
                sub = Subsector.parse(rec["subsector"])
            except DataError as exc:
                raise IngestError(str(exc), row=lineno, column="subsector") from None
            out[ticker] = AssetMeta(
                ticker=ticker,
                name=(rec.get("name") or "").strip(),
                country=(rec.get("country") or "").strip(),
                subsector=sub,
            )
    return out


def attach_market_caps(panel: PricePanel, path: str | Path, schema: ColumnSpec = ColumnSpec()) -> PricePanel:
    """Align a cap CSV (same shape as the price CSV) onto ``panel``."""
    dates, tickers, caps = read_wide_csv(path, schema)
    pos = {d: i for i, d in enumerate(dates)}
    idx = np.array([pos.get(d, -1) for d in panel.dates])
    assets = []
    for a in panel.assets:
        series = np.full(len(panel.dates), np.nan)
        if a.ticker in tickers:
            col = caps[:, tickers.index(a.ticker)]
            ok = idx >= 0
            series[ok] = col[idx[ok]]
        if np.any(series[~np.isnan(series)] < 0):
            raise DomainError(f"negative market cap for {a.ticker}")
        assets.append(replace(a, market_cap=series))
    return replace(panel, assets=assets)


def compute_log_returns(panel: PricePanel) -> ReturnPanel:
    """Percent log-returns ``100 * ln(p_t / p_{t-1})``; first date dropped.

    A return is NaN when either endpoint price is missing.
    """
    p = panel.prices
    observed = p[~np.isnan(p)]
    if np.any(observed <= 0):
        raise DomainError("nonpositive observed price")
    with np.errstate(invalid="ignore"):
        r = 100.0 * np.diff(np.log(p), axis=0)
    assets = [
        replace(a, market_cap=None if a.market_cap is None else np.asarray(a.market_cap, float)[1:])
        for a in panel.assets
    ]
    return ReturnPanel(dates=panel.dates[1:], returns=r, assets=assets)


def apply_liquidity_filter(panel: ReturnPanel, min_nonzero_frac: float = 0.30) -> ReturnPanel:
    """Zero-fill missing returns and drop illiquid assets.

    An asset survives when its count of nonzero returns strictly exceeds
    ``min_nonzero_frac * T``.
    """
    if not 0 < min_nonzero_frac < 1:
        raise ValueError("min_nonzero_frac must lie in (0, 1)")
    missing = np.isnan(panel.returns)
    filled = np.where(missing, 0.0, panel.returns)
    T = filled.shape[0]
    nonzero = np.count_nonzero(filled, axis=0)
    keep = np.flatnonzero(nonzero > min_nonzero_frac * T)
    if keep.size == 0:
        raise DataError("no asset passes the liquidity filter")
    return ReturnPanel(
        dates=panel.dates,
        returns=filled[:, keep],
        assets=[panel.assets[k] for k in keep],
        zero_filled=(missing | panel.zero_filled)[:, keep],
        units=panel.units,
    )


def subsector_weights(panel: ReturnPanel, subsector: Subsector) -> tuple[list[int], np.ndarray, np.ndarray]:
    """Daily capitalization weights for one subsector.

    Returns the member column indices, a (T, m) weight matrix and a boolean
    vector marking degenerate dates where no member carries weight.
    """
    members = [k for k, a in enumerate(panel.assets) if a.subsector == subsector]
    if not members:
        raise DataError(f"no assets in subsector {subsector.value}")
    T = len(panel.dates)
    caps = np.column_stack([
        np.full(T, np.nan) if panel.assets[k].market_cap is None else np.asarray(panel.assets[k].market_cap, float)
        for k in members
    ])
    r = panel.returns[:, members]
    usable = ~np.isnan(caps) & ~np.isnan(r) & ~panel.zero_filled[:, members]
    caps = np.where(usable, caps, 0.0)
    total = caps.sum(axis=1)
    degenerate = total <= 0
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(degenerate[:, None], 0.0, caps / np.where(degenerate, 1.0, total)[:, None])
    return members, w, degenerate


def build_subsector_index(panel: ReturnPanel, subsector: Subsector | str):
    """Value-weighted subsector return series.

    Members with a missing return or cap on a date enter with weight zero;
    weights are renormalized over the rest. Dates where every weight vanishes
    get an index return of zero and are listed in ``meta['degenerate_dates']``.
    """
    from .indicators.series import IndicatorKind, IndicatorSeries

    if isinstance(subsector, str):
        subsector = Subsector.parse(subsector)
    members, w, degenerate = subsector_weights(panel, subsector)
    r = np.nan_to_num(panel.returns[:, members], nan=0.0)
    values = np.sum(w * r, axis=1)
    if degenerate.any():
        warnings.warn(
            f"{int(degenerate.sum())} dates with zero total capitalization in {subsector.value}",
            DegenerateWeightWarning,
            stacklevel=2,
        )
    return IndicatorSeries(
        kind=IndicatorKind.LOG_RETURN,
        dates=panel.dates,
        values=values,
        source_ticker=subsector.label,
        meta={"degenerate_dates": [str(d) for d in panel.dates[degenerate]]},
    )


def aggregate_weekly(returns: np.ndarray, dates: np.ndarray | None = None, block: int = 5):
    """Non-overlapping ``block``-observation sums of log-returns.

    A trailing partial block is discarded. Each aggregated row is stamped with
    the last date of its block.
    """
    returns = np.asarray(returns, float)
    nblocks = returns.shape[0] // block
    trimmed = returns[: nblocks * block]
    agg = trimmed.reshape(nblocks, block, *returns.shape[1:]).sum(axis=1)
    if dates is None:
        return agg
    return agg, np.asarray(dates)[block - 1 : nblocks * block : block]
