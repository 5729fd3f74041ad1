"""Synthetic panels and a small on-disk demo dataset."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .panel import Subsector


def simulate_var(betas, sigma, T: int, seed: int | None = None, alpha=None, burn: int = 200) -> np.ndarray:
    """Gaussian VAR(p) path of length ``T`` after ``burn`` discarded steps."""
    betas = np.asarray(betas, float)
    if betas.ndim == 2:
        betas = betas[None]
    p, n, _ = betas.shape
    rng = np.random.default_rng(seed)
    chol = np.linalg.cholesky(np.asarray(sigma, float))
    alpha = np.zeros(n) if alpha is None else np.asarray(alpha, float)
    e = rng.standard_normal((T + burn, n)) @ chol.T
    x = np.zeros((T + burn, n))
    for t in range(T + burn):
        acc = alpha + e[t]
        for j in range(1, p + 1):
            if t - j >= 0:
                acc = acc + betas[j - 1] @ x[t - j]
        x[t] = acc
    return x[burn:]


def random_stable_betas(n: int, p: int, rng, scale: float = 0.9) -> np.ndarray:
    """Random lag matrices rescaled so the companion spectral radius is ``< scale``."""
    from .var import VarModel

    b = rng.normal(0.0, 0.3, (p, n, n))
    while VarModel.from_coefficients(b, np.eye(n)).max_root() >= scale:
        b *= 0.9
    return b


def hub_betas(n: int, coef: float = 0.3, hub: int = 0) -> np.ndarray:
    """One lag matrix where variable ``hub`` drives every other variable."""
    b = np.zeros((n, n))
    b[:, hub] = coef
    b[hub, hub] = 0.0
    return b


def simulate_hub_returns(
    n: int = 20,
    T: int = 1500,
    coef: float = 0.3,
    seed: int | None = None,
    omega: float = 0.05,
    arch: float = 0.10,
    garch: float = 0.85,
    burn: int = 500,
) -> np.ndarray:
    """Percent returns where asset 0 drives all others.

    The mean follows a VAR(1) whose only nonzero coefficients are ``coef`` on
    the hub's lag. The hub has GARCH(1,1) shocks and each follower's shock
    variance equals the hub's conditional variance one step earlier, so the
    hub also leads the followers' volatility, quantiles and shortfalls.
    """
    rng = np.random.default_rng(seed)
    N = T + burn
    z = rng.standard_normal((N, n))
    r = np.zeros((N, n))
    s2 = np.full(N, omega / (1.0 - arch - garch))
    for t in range(N):
        if t > 0:
            a_prev = r[t - 1, 0]
            s2[t] = omega + arch * a_prev * a_prev + garch * s2[t - 1]
        r[t, 0] = np.sqrt(s2[t]) * z[t, 0]
        if t > 0:
            r[t, 1:] = coef * r[t - 1, 0] + np.sqrt(s2[t - 1]) * z[t, 1:]
        else:
            r[t, 1:] = np.sqrt(s2[0]) * z[t, 1:]
    return r[burn:]


def business_days(start: str, T: int) -> np.ndarray:
    first = np.busday_offset(np.datetime64(start, "D"), 0, roll="forward")
    return np.busday_offset(first, np.arange(T), roll="forward")


def prices_from_returns(r: np.ndarray, start: float = 100.0) -> np.ndarray:
    """Invert percent log-returns into a price path with a leading base row."""
    r = np.asarray(r, float)
    cum = np.vstack([np.zeros((1, r.shape[1])), np.cumsum(r / 100.0, axis=0)])
    return start * np.exp(cum)


def _write_wide(path: Path, dates, tickers, values) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *tickers])
        for d, row in zip(dates, values):
            w.writerow([str(d), *("" if np.isnan(v) else f"{v:.6f}" for v in row)])


DEMO_CONFIG = """\
# demo configuration: reduced search sizes so the full pipeline runs in minutes
prices = prices.csv
caps = caps.csv
metadata = metadata.csv
market_prices = market_prices.csv
garch_search = garch11
caviar_starts = 1000
care_starts = 1000
window = 250
step = 25
"""


def make_demo_dataset(out_dir: str | Path, n_companies: int = 12, T: int = 1300, seed: int = 0) -> Path:
    """Write a small companies/markets dataset plus ``config.txt``.

    Company 0 is a planted hub. The last company trades on fewer than 30% of
    days, so the liquidity filter drops it; a few prices are blank.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    r = simulate_hub_returns(n_companies, T, seed=seed)
    illiquid = rng.random(T) < 0.8
    r[illiquid, -1] = 0.0
    prices = prices_from_returns(r)
    holes = rng.random(prices.shape) < 0.002
    holes[:, -1] = False
    prices[holes] = np.nan
    dates = business_days("2018-06-01", T + 1)
    tickers = [f"C{k + 1:02d}" for k in range(n_companies)]
    _write_wide(out / "prices.csv", dates, tickers, prices)

    shares = rng.uniform(1.0, 10.0, n_companies)
    caps = prices * shares
    _write_wide(out / "caps.csv", dates, tickers, caps)

    subs = [s for s in Subsector if s is not Subsector.OTHER]
    countries = ["DE", "FR", "GB", "IT", "NL", "CH"]
    with (out / "metadata.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ticker", "name", "country", "subsector"])
        for k, t in enumerate(tickers):
            w.writerow([t, f"Company {k + 1}", countries[k % len(countries)], subs[k % len(subs)].label])

    m = simulate_hub_returns(4, T, coef=0.2, seed=seed + 1)
    _write_wide(out / "market_prices.csv", dates, ["US", "EU", "UK", "JP"], prices_from_returns(m))
    (out / "config.txt").write_text(DEMO_CONFIG)
    return out
