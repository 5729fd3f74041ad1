"""Rolling-window spillover indices and episode averages."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, EstimationError, SpilloverError
from .gfevd import SpilloverMatrix, SpilloverSummary, compute_gfevd, summarize
from .var import VarModel, estimate_var_ols, estimate_var_post_lasso, select_lag_bic

OLS = "OLS"
POST_LASSO = "PostLASSO"


@dataclass(frozen=True)
class FixedLag:
    p: int


@dataclass(frozen=True)
class BICPerWindow:
    p_max: int


@dataclass(frozen=True)
class RollingConfig:
    window: int = 250
    step: int = 1
    h: int = 10
    p_rule: FixedLag | BICPerWindow = FixedLag(1)
    estimator: str = OLS
    folds: int = 5
    max_failure_frac: float = 0.2
    n_jobs: int = 1
    standardize: bool = True

    def __post_init__(self):
        if self.step < 1:
            raise ValueError("step must be at least 1")
        if self.estimator not in (OLS, POST_LASSO):
            raise ValueError(f"unknown estimator {self.estimator!r}")

    @property
    def max_lag(self) -> int:
        return self.p_rule.p if isinstance(self.p_rule, FixedLag) else self.p_rule.p_max

    def validate(self, n: int) -> None:
        if self.window <= n * self.max_lag + 10:
            raise ValueError(f"window {self.window} must exceed n*p + 10 = {n * self.max_lag + 10}")


def fit_var(X, p: int, estimator: str = OLS, labels=(), folds: int = 5, standardize: bool = True) -> VarModel:
    if estimator == OLS:
        return estimate_var_ols(X, p, labels=labels)
    if estimator == POST_LASSO:
        return estimate_var_post_lasso(X, p, folds=folds, labels=labels, standardize=standardize)
    raise ValueError(f"unknown estimator {estimator!r}")


def static_spillover(
    X, p: int, h: int = 10, estimator: str = OLS, labels=(), folds: int = 5, standardize: bool = True
) -> tuple[VarModel, SpilloverMatrix, SpilloverSummary]:
    """Fit one VAR on the whole sample and decompose it."""
    model = fit_var(X, p, estimator, labels, folds, standardize)
    m = compute_gfevd(model, h)
    return model, m, summarize(m)


def window_count(T: int, window: int, step: int = 1) -> int:
    return 0 if T < window else (T - window) // step + 1


def window_ends(T: int, window: int, step: int = 1) -> np.ndarray:
    """Zero-based row index of the last observation in each window."""
    return window - 1 + step * np.arange(window_count(T, window, step))


@dataclass
class RollingResult:
    window_end_dates: np.ndarray
    total_series: np.ndarray
    to_others_series: np.ndarray  # (n_windows, n)
    from_others_series: np.ndarray
    labels: tuple[str, ...]
    lags: np.ndarray
    failures: list[dict] = field(default_factory=list)

    @property
    def n_windows(self) -> int:
        return len(self.total_series)


def _one_window(X, labels, cfg: RollingConfig):
    if isinstance(cfg.p_rule, BICPerWindow):
        p = select_lag_bic(X, cfg.p_rule.p_max)
    else:
        p = cfg.p_rule.p
    _, m, s = static_spillover(X, p, cfg.h, cfg.estimator, labels, cfg.folds, cfg.standardize)
    return p, s


def rolling_spillovers(panel, cfg: RollingConfig = RollingConfig(), dates=None, labels: Sequence[str] = ()) -> RollingResult:
    """Fit the VAR on each window and record total, to and from indices.

    Windows whose estimation fails keep NaN entries and a record in
    ``failures``; more than ``cfg.max_failure_frac`` failures is an error.
    """
    X = np.asarray(panel, dtype=float)
    if X.ndim != 2:
        raise DataError("panel must be a (T, n) matrix")
    T, n = X.shape
    if T < cfg.window:
        raise DataError(f"sample of {T} observations is shorter than the window {cfg.window}")
    cfg.validate(n)
    labels = tuple(labels) if labels else tuple(f"x{i + 1}" for i in range(n))
    dates = np.arange(T) if dates is None else np.asarray(dates)
    ends = window_ends(T, cfg.window, cfg.step)

    def run(e):
        try:
            return _one_window(X[e - cfg.window + 1 : e + 1], labels, cfg)
        except SpilloverError as exc:
            return f"{type(exc).__name__}: {exc}"

    if cfg.n_jobs == 1:
        results = [run(e) for e in ends]
    else:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=cfg.n_jobs)(delayed(run)(e) for e in ends)

    W = len(ends)
    total = np.full(W, np.nan)
    to = np.full((W, n), np.nan)
    frm = np.full((W, n), np.nan)
    lags = np.zeros(W, dtype=int)
    failures = []
    for k, (e, res) in enumerate(zip(ends, results)):
        if isinstance(res, str):
            failures.append({"window_end": str(dates[e]), "index": int(e), "error": res})
            continue
        lags[k], s = res
        total[k] = s.total
        to[k] = s.to_others
        frm[k] = s.from_others
    if len(failures) > cfg.max_failure_frac * W:
        raise EstimationError(f"{len(failures)} of {W} windows failed; first: {failures[0]['error']}")
    return RollingResult(dates[ends], total, to, frm, labels, lags, failures)


def write_rolling_csv(path: str | Path, res: RollingResult) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["window_end", "total"]
        for lab in res.labels:
            header += [f"{lab}_to", f"{lab}_from"]
        w.writerow(header)
        for k, d in enumerate(res.window_end_dates):
            row = [str(d), _num(res.total_series[k])]
            for j in range(len(res.labels)):
                row += [_num(res.to_others_series[k, j]), _num(res.from_others_series[k, j])]
            w.writerow(row)


def _num(x: float) -> str:
    return "" if np.isnan(x) else repr(float(x))


@dataclass(frozen=True)
class Episode:
    name: str
    start: np.datetime64
    end: np.datetime64


NORMAL_TIMES = "Normal times"


def load_episodes(path: str | Path | None = None) -> list[Episode]:
    """Read a ``name,start,end`` CSV (ISO dates); defaults to the bundled file."""
    if path is None:
        text = resources.files("spillover.data").joinpath("episodes.csv").read_text()
    else:
        text = Path(path).read_text()
    out = []
    for rec in csv.DictReader(text.splitlines()):
        start = np.datetime64(rec["start"].strip(), "D")
        end = np.datetime64(rec["end"].strip(), "D")
        if end < start:
            raise DataError(f"episode {rec['name']!r} ends before it starts")
        out.append(Episode(rec["name"].strip(), start, end))
    return out


@dataclass
class EpisodeRow:
    name: str
    start: object
    end: object
    days: int
    mean_total: float
    mean_to_others: np.ndarray


@dataclass
class EpisodeTable:
    rows: list[EpisodeRow]
    labels: tuple[str, ...]

    def row(self, name: str) -> EpisodeRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)


def episode_averages(res: RollingResult, episodes: Sequence[Episode]) -> EpisodeTable:
    """Average the rolling indices over windows ending inside each episode.

    Bounds are inclusive. Windows outside every episode form the trailing
    "Normal times" row. Failed windows count toward ``days`` but not the means.
    """
    ends = np.asarray(res.window_end_dates).astype("datetime64[D]")
    claimed = np.zeros(len(ends), dtype=bool)
    rows = []

    def make(name, start, end, sel):
        with np.errstate(all="ignore"):
            valid = sel & ~np.isnan(res.total_series)
            mt = float(np.mean(res.total_series[valid])) if valid.any() else np.nan
            mto = res.to_others_series[valid].mean(axis=0) if valid.any() else np.full(len(res.labels), np.nan)
        return EpisodeRow(name, start, end, int(sel.sum()), mt, mto)

    for ep in episodes:
        sel = (ends >= ep.start) & (ends <= ep.end)
        if not sel.any():
            raise DataError(f"episode {ep.name!r} contains no windows")
        claimed |= sel
        rows.append(make(ep.name, ep.start, ep.end, sel))
    rest = ~claimed
    if rest.any():
        rows.append(make(NORMAL_TIMES, ends[0], ends[-1], rest))
    return EpisodeTable(rows, tuple(res.labels))


def write_episode_csv(path: str | Path, table: EpisodeTable) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["Period", "Start", "End", "Days", "Total", *[f"{lab}_to" for lab in table.labels]])
        for r in table.rows:
            w.writerow([r.name, str(r.start), str(r.end), r.days, _num(r.mean_total), *map(_num, r.mean_to_others)])
