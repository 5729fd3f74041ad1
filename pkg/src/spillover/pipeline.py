"""End-to-end pipeline steps behind the command-line verbs.

Output layout under ``cfg.out``::

    ingest/<tier>.csv                      date,ticker,kind,value returns
    ingest/<tier>_meta.json                tickers, subsectors, dropped assets
    indicators/<tier>/<kind>/<ticker>.csv  one indicator series per asset
    indicators/<tier>/fits.json            fit metadata per asset and kind
    static/<tier>/<kind>.csv               spillover table
    static/<tier>/models.json              VAR dumps (lag, estimator, support)
    rolling/<tier>/<kind>.csv              rolling total/to/from indices
    rolling/<tier>/<kind>_episodes.csv     episode averages
    network/<kind>.{graphml,dot,json}      pruned directed networks
    network/communities.json               partitions and the core set
    network/core.csv                       core members with to/from/net
    robustness/<tier>_<sweep>_<kind>.csv   side-by-side to/net per sweep value
    robustness/<tier>_<sweep>.json         rank correlations between sweep values
"""

from __future__ import annotations

import json
import logging
import warnings
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr

from .config import PipelineConfig
from .errors import DataError, EstimationError, SpilloverError
from .gfevd import read_spillover_table, summarize, write_spillover_table
from .indicators.cares import calibrate_cares
from .indicators.caviar import fit_caviar
from .indicators.garch import (
    GarchSpec,
    VarianceFamily,
    conditional_log_volatility,
    select_garch,
)
from .indicators.distributions import Distribution
from .indicators.series import IndicatorKind, IndicatorSeries, read_indicator_csv, write_indicator_csv
from .network import (
    build_network,
    central_intersection,
    export_graph,
    louvain,
    node_weights,
    prune_edges,
    to_undirected,
)
from .panel import (
    Subsector,
    aggregate_weekly,
    apply_liquidity_filter,
    attach_market_caps,
    build_subsector_index,
    compute_log_returns,
    load_metadata_csv,
    load_price_csv,
)
from .rolling import (
    BICPerWindow,
    FixedLag,
    RollingConfig,
    episode_averages,
    load_episodes,
    rolling_spillovers,
    static_spillover,
    write_episode_csv,
    write_rolling_csv,
)
from .var import select_lag_bic

log = logging.getLogger("spillover")


def derive_seed(root: int, ticker: str) -> int:
    """Per-asset seed from the root seed and a stable hash of the ticker."""
    return (int(root) * 1_000_003 + zlib.crc32(ticker.encode("utf-8"))) % (2**32)


@dataclass
class TierData:
    dates: np.ndarray
    returns: np.ndarray  # (T, n)
    labels: list[str]
    meta: dict = field(default_factory=dict)  # label -> AssetMeta
    dropped: list[str] = field(default_factory=list)


# ---------------------------------------------------------------- ingest


def _need(path: str, key: str) -> str:
    if not path:
        raise DataError(f"config key {key!r} is required for this tier")
    return path


def load_tier(cfg: PipelineConfig, tier: str) -> TierData:
    """Build the return panel of one analysis tier from the configured inputs."""
    if tier == "markets":
        panel = compute_log_returns(load_price_csv(_need(cfg.market_prices, "market_prices")))
        filtered = apply_liquidity_filter(panel, cfg.liquidity)
        data = TierData(filtered.dates, filtered.returns, filtered.tickers,
                        {a.ticker: a for a in filtered.assets})
    else:
        meta = load_metadata_csv(cfg.metadata) if cfg.metadata else None
        prices = load_price_csv(_need(cfg.prices, "prices"), metadata=meta)
        if cfg.caps:
            prices = attach_market_caps(prices, cfg.caps)
        panel = compute_log_returns(prices)
        filtered = apply_liquidity_filter(panel, cfg.liquidity)
        dropped = [t for t in panel.tickers if t not in filtered.tickers]
        if tier == "companies":
            data = TierData(filtered.dates, filtered.returns, filtered.tickers,
                            {a.ticker: a for a in filtered.assets}, dropped)
        else:
            _need(cfg.caps, "caps")
            _need(cfg.metadata, "metadata")
            present = {a.subsector for a in filtered.assets}
            cols, labels = [], []
            for sub in Subsector:
                if sub is Subsector.OTHER or sub not in present:
                    continue
                with warnings.catch_warnings(record=True) as caught:
                    warnings.simplefilter("always")
                    s = build_subsector_index(filtered, sub)
                for w in caught:
                    log.warning("%s", w.message)
                cols.append(s.values)
                labels.append(sub.label)
            if not cols:
                raise DataError("no subsector has any surviving member")
            data = TierData(filtered.dates, np.column_stack(cols), labels, {}, dropped)
    if cfg.frequency == "weekly":
        agg, d = aggregate_weekly(data.returns, data.dates, cfg.weekly_block)
        data = TierData(d, agg, data.labels, data.meta, data.dropped)
    return data


def tier_meta_for_labels(cfg: PipelineConfig, labels) -> dict:
    if not cfg.metadata:
        return {}
    meta = load_metadata_csv(cfg.metadata)
    return {k: v for k, v in meta.items() if k in set(labels)}


def cmd_ingest(cfg: PipelineConfig, tier: str) -> Path:
    data = load_tier(cfg, tier)
    out = Path(cfg.out) / "ingest"
    out.mkdir(parents=True, exist_ok=True)
    series = [
        IndicatorSeries(IndicatorKind.LOG_RETURN, data.dates, data.returns[:, k], lab)
        for k, lab in enumerate(data.labels)
    ]
    write_indicator_csv(out / f"{tier}.csv", series)
    info = {
        "tier": tier,
        "frequency": cfg.frequency,
        "n_obs": int(len(data.dates)),
        "first": str(data.dates[0]),
        "last": str(data.dates[-1]),
        "labels": data.labels,
        "dropped_by_liquidity_filter": data.dropped,
    }
    _write_json(out / f"{tier}_meta.json", info)
    return out / f"{tier}.csv"


def read_ingested(cfg: PipelineConfig, tier: str) -> TierData:
    path = Path(cfg.out) / "ingest" / f"{tier}.csv"
    if not path.exists():
        cmd_ingest(cfg, tier)
    series = read_indicator_csv(path)
    info = _ingest_info(cfg, tier)
    by_ticker = {s.source_ticker: s for s in series}
    labels = info["labels"]
    X = np.column_stack([by_ticker[t].values for t in labels])
    return TierData(by_ticker[labels[0]].dates, X, labels, {}, info.get("dropped_by_liquidity_filter", []))


def _ingest_info(cfg: PipelineConfig, tier: str) -> dict:
    path = Path(cfg.out) / "ingest" / f"{tier}_meta.json"
    if not path.exists():
        raise DataError(f"no ingested {tier} panel under {cfg.out}; run the ingest step first")
    return json.loads(path.read_text())


# ---------------------------------------------------------------- indicators


def garch_candidates(cfg: PipelineConfig) -> list[GarchSpec] | None:
    if cfg.garch_search == "full":
        return None
    return [GarchSpec(0, 0, 1, 1, VarianceFamily.STANDARD, Distribution.GAUSSIAN)]


def compute_indicators(r, dates, ticker: str, kinds, cfg: PipelineConfig):
    """Fit the requested indicators for one return series.

    Returns ``(series, report)``: series keyed by kind and a JSON-ready
    report with parameters, diagnostics and any error message per kind.
    """
    r = np.asarray(r, float)
    seed = derive_seed(cfg.seed, ticker)
    sign = (lambda v: v) if cfg.risk_sign == "signed" else np.abs
    series, report = {}, {"seed": seed}
    for kind in kinds:
        kind = IndicatorKind.parse(kind)
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                if kind is IndicatorKind.LOG_RETURN:
                    values, info = r.copy(), {}
                elif kind is IndicatorKind.LOG_VOL:
                    fit = select_garch(r, garch_candidates(cfg), n_jobs=cfg.n_jobs)
                    values = conditional_log_volatility(fit).values
                    info = fit.to_dict()
                elif kind is IndicatorKind.CAVIAR:
                    fit = fit_caviar(r, cfg.tau, seed=seed, n_starts=cfg.caviar_starts, burn_in=cfg.burn_in)
                    values, info = sign(fit.var_series), fit.to_dict()
                else:
                    fit = calibrate_cares(r, cfg.tau, seed=seed, grid_step=cfg.cares_grid_step,
                                          n_starts=cfg.care_starts, burn_in=cfg.burn_in)
                    values, info = sign(fit.es_series), fit.to_dict()
            info["warnings"] = [str(w.message) for w in caught]
            series[kind] = IndicatorSeries(kind, np.asarray(dates), np.asarray(values, float), ticker)
            report[kind.value] = _jsonable(info)
        except SpilloverError as exc:
            report[kind.value] = {"error": f"{type(exc).__name__}: {exc}"}
    return series, report


def indicator_dir(cfg: PipelineConfig, tier: str) -> Path:
    return Path(cfg.out) / "indicators" / tier


def cmd_indicators(cfg: PipelineConfig, tier: str) -> dict:
    """Write one file per asset and kind; fail only if a kind has no series at all."""
    data = read_ingested(cfg, tier)
    base = indicator_dir(cfg, tier)
    kinds = [IndicatorKind.parse(k) for k in cfg.indicators]
    fits = {}
    produced = {k: 0 for k in kinds}
    for j, ticker in enumerate(data.labels):
        log.info("indicators: %s", ticker)
        series, report = compute_indicators(data.returns[:, j], data.dates, ticker, kinds, cfg)
        fits[ticker] = report
        for kind, s in series.items():
            d = base / kind.value
            d.mkdir(parents=True, exist_ok=True)
            write_indicator_csv(d / f"{_safe(ticker)}.csv", [s])
            produced[kind] += 1
    base.mkdir(parents=True, exist_ok=True)
    _write_json(base / "fits.json", fits)
    empty = [k.value for k, c in produced.items() if c == 0]
    if empty:
        raise EstimationError(f"no series could be produced for {empty}")
    return fits


def load_indicator_panel(cfg: PipelineConfig, tier: str, kind) -> TierData:
    """Stack the per-asset files of one indicator, keeping the ingest order."""
    kind = IndicatorKind.parse(kind)
    d = indicator_dir(cfg, tier) / kind.value
    info = _ingest_info(cfg, tier)
    cols, labels, dates = [], [], None
    for t in info["labels"]:
        f = d / f"{_safe(t)}.csv"
        if not f.exists():
            continue
        (s,) = read_indicator_csv(f)
        cols.append(s.values)
        labels.append(t)
        dates = s.dates
    if not cols:
        raise DataError(f"no {kind.value} series for tier {tier}; run the indicators step first")
    return TierData(dates, np.column_stack(cols), labels)


# ---------------------------------------------------------------- static


def choose_lag(cfg: PipelineConfig, X) -> int:
    if cfg.p == "bic":
        return int(select_lag_bic(X, cfg.p_max))
    return int(cfg.p)


def cmd_static(cfg: PipelineConfig, tier: str) -> dict:
    out = Path(cfg.out) / "static" / tier
    out.mkdir(parents=True, exist_ok=True)
    models, totals = {}, {}
    for kind in cfg.indicators:
        data = load_indicator_panel(cfg, tier, kind)
        est = cfg.estimator_for(len(data.labels))
        try:
            p = choose_lag(cfg, data.returns)
            model, m, s = static_spillover(data.returns, p, cfg.h, est, data.labels, cfg.folds, cfg.lasso_standardize)
        except SpilloverError as exc:
            raise type(exc)(f"[{tier}/{kind}] {exc}") from exc
        write_spillover_table(out / f"{kind}.csv", m, s)
        dump = model.to_dict()
        dump["estimator"] = est
        models[kind] = dump
        totals[kind] = s.total
        if model.support_mask is not None:
            log.info("%s/%s support: %d of %d coefficients", tier, kind,
                     int(model.support_mask.sum()), model.support_mask.size)
    _write_json(out / "models.json", models)
    return totals


# ---------------------------------------------------------------- rolling


def cmd_rolling(cfg: PipelineConfig, tier: str) -> dict:
    out = Path(cfg.out) / "rolling" / tier
    out.mkdir(parents=True, exist_ok=True)
    episodes = load_episodes(cfg.episodes or None)
    summary = {}
    for kind in cfg.indicators:
        data = load_indicator_panel(cfg, tier, kind)
        T, n = data.returns.shape
        if cfg.window > T:
            raise DataError(f"window {cfg.window} exceeds the {T} available observations")
        if cfg.rolling_p == "bic":
            rule = BICPerWindow(cfg.p_max)
        else:
            rule = FixedLag(choose_lag(cfg, data.returns))
        rc = RollingConfig(window=cfg.window, step=cfg.step, h=cfg.h, p_rule=rule,
                           estimator=cfg.estimator_for(n), folds=cfg.folds, n_jobs=cfg.n_jobs,
                           standardize=cfg.lasso_standardize)
        try:
            res = rolling_spillovers(data.returns, rc, dates=data.dates, labels=data.labels)
        except SpilloverError as exc:
            raise type(exc)(f"[{tier}/{kind}] {exc}") from exc
        write_rolling_csv(out / f"{kind}.csv", res)
        ends = np.asarray(res.window_end_dates).astype("datetime64[D]")
        inside = [e for e in episodes if e.end >= ends[0] and e.start <= ends[-1]
                  and np.any((ends >= e.start) & (ends <= e.end))]
        skipped = [e.name for e in episodes if e not in inside]
        write_episode_csv(out / f"{kind}_episodes.csv", episode_averages(res, inside))
        summary[kind] = {"windows": res.n_windows, "failures": res.failures, "episodes_outside_sample": skipped}
    _write_json(out / "summary.json", summary)
    return summary


# ---------------------------------------------------------------- network


def community_graph(net, q: float, order: str):
    if order == "prune-then-convert":
        return to_undirected(prune_edges(net, q))
    return prune_edges(to_undirected(net), q)


def cmd_network(cfg: PipelineConfig, tier: str = "companies") -> dict:
    static = Path(cfg.out) / "static" / tier
    kinds = [k.value for k in IndicatorKind]
    missing = [k for k in kinds if not (static / f"{k}.csv").exists()]
    if missing:
        raise DataError(f"network step needs static {tier} tables for all four indicators; missing {missing}")
    out = Path(cfg.out) / "network"
    out.mkdir(parents=True, exist_ok=True)
    partitions, weights, summaries, report = [], [], {}, {"prune_quantile": cfg.prune, "prune_order": cfg.prune_order}
    for kind in kinds:
        m = read_spillover_table(static / f"{kind}.csv", h=cfg.h)
        meta = tier_meta_for_labels(cfg, m.labels)
        net = build_network(m, meta if len(meta) == len(m.labels) else None)
        pruned = prune_edges(net, cfg.prune)
        for fmt in ("graphml", "dot", "json"):
            export_graph(pruned, out / f"{kind}.{fmt}", fmt)
        part = louvain(community_graph(net, cfg.prune, cfg.prune_order))
        partitions.append(part)
        weights.append(node_weights(net))
        summaries[kind] = summarize(m)
        report[kind] = {
            "edges_before": len(net.edges),
            "edges_after": len(pruned.edges),
            "modularity": part.modularity,
            "communities": part.communities(),
        }
    core = sorted(central_intersection(partitions, weights))
    report["core"] = core
    _write_json(out / "communities.json", report)
    with (out / "core.csv").open("w") as fh:
        fh.write("ticker," + ",".join(f"{k}_{c}" for k in kinds for c in ("to", "from", "net")) + "\n")
        for t in core:
            vals = []
            for k in kinds:
                s = summaries[k]
                i = list(s.labels).index(t)
                vals += [s.to_others[i], s.from_others[i], s.net[i]]
            fh.write(t + "," + ",".join(f"{v:.6f}" for v in vals) + "\n")
    return report


# ---------------------------------------------------------------- robustness


def sweep_table(X, labels, sweep: str, values, cfg: PipelineConfig) -> dict:
    """to_others and net per label for each sweep value (h or p)."""
    est = cfg.estimator_for(X.shape[1])
    base_p = choose_lag(cfg, X)
    out = {}
    for v in values:
        h, p = (v, base_p) if sweep == "h" else (cfg.h, v)
        _, _, s = static_spillover(X, p, h, est, labels, cfg.folds, cfg.lasso_standardize)
        out[v] = s
    return out


def rank_correlations(table: dict) -> dict:
    keys = list(table)
    res = {}
    for i, a in enumerate(keys):
        for b in keys[i + 1 :]:
            rho = spearmanr(table[a].to_others, table[b].to_others).statistic
            res[f"{a}-{b}"] = float(rho)
    return res


def _write_sweep(path: Path, labels, table: dict) -> None:
    keys = list(table)
    with path.open("w") as fh:
        fh.write("ticker," + ",".join(f"to_{k},net_{k}" for k in keys) + "\n")
        for i, lab in enumerate(labels):
            cells = []
            for k in keys:
                cells += [f"{table[k].to_others[i]:.6f}", f"{table[k].net[i]:.6f}"]
            fh.write(lab + "," + ",".join(cells) + "\n")


def cmd_robustness(cfg: PipelineConfig, tier: str, sweep: str) -> dict:
    out = Path(cfg.out) / "robustness"
    out.mkdir(parents=True, exist_ok=True)
    report = {}
    for kind in cfg.indicators:
        if sweep == "frequency":
            table, labels = {}, None
            for freq in ("daily", "weekly"):
                sub = cfg.with_overrides(frequency=freq)
                data = load_tier(sub, tier)
                labels = data.labels
                cols = []
                for j, t in enumerate(labels):
                    series, rep = compute_indicators(data.returns[:, j], data.dates, t, [kind], sub)
                    if kind not in {k.value for k in series}:
                        raise EstimationError(f"[{tier}/{kind}/{freq}] {t}: {rep[kind]['error']}")
                    cols.append(series[IndicatorKind.parse(kind)].values)
                X = np.column_stack(cols)
                _, _, table[freq] = static_spillover(X, choose_lag(sub, X), cfg.h, cfg.estimator_for(X.shape[1]),
                                                     labels, cfg.folds, cfg.lasso_standardize)
        else:
            data = load_indicator_panel(cfg, tier, kind)
            labels = data.labels
            values = cfg.sweep_h if sweep == "h" else cfg.sweep_p
            table = sweep_table(data.returns, labels, sweep, values, cfg)
        _write_sweep(out / f"{tier}_{sweep}_{kind}.csv", labels, table)
        report[kind] = rank_correlations(table)
    _write_json(out / f"{tier}_{sweep}.json", report)
    return report


# ---------------------------------------------------------------- helpers


def _safe(ticker: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in ticker)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj) if np.isfinite(obj) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if hasattr(obj, "value") and not isinstance(obj, (int, float, str)):
        return obj.value
    return obj


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
