"""CARE expectile model and CARES expected-shortfall calibration."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from ..errors import ConvergenceWarning, DataError, EstimationError
from ._search import multistart_minimize
from .caviar import violation_rate

PARAM_NAMES = ("intercept", "persistence", "abs_slope")


def asymmetric_squared_loss(r: np.ndarray, d: np.ndarray, psi: float) -> float:
    u = r - d
    return float(np.sum(np.where(u < 0, 1.0 - psi, psi) * u * u))


def sample_expectile(x, psi: float, tol: float = 1e-13, max_iter: int = 1000) -> float:
    """Minimizer of the asymmetric squared loss over constants."""
    x = np.asarray(x, float)
    if not 0 < psi < 1:
        raise ValueError("psi must lie in (0, 1)")
    e = float(x.mean())
    for _ in range(max_iter):
        w = np.where(x < e, 1.0 - psi, psi)
        new = float(np.sum(w * x) / np.sum(w))
        if abs(new - e) <= tol * max(1.0, abs(e)):
            return new
        e = new
    return e


def es_from_expectile(expectile, psi: float, tau: float, mean: float):
    """Closed-form expectile to expected-shortfall mapping.

    ``ES = (1 + psi / ((1 - 2 psi) tau)) * expectile - psi / ((1 - 2 psi) tau) * mean``
    """
    c = psi / ((1.0 - 2.0 * psi) * tau)
    return (1.0 + c) * np.asarray(expectile) - c * mean


def care_path(eta, r: np.ndarray, d0: float) -> np.ndarray:
    e0, e1, e2 = eta
    d = np.empty_like(r)
    d[0] = d0
    if len(r) > 1:
        u = e0 + e2 * np.abs(r[:-1])
        d[1:] = lfilter([1.0], [1.0, -e1], u, zi=[e1 * d0])[0]
    return d


def _care_gradient(eta, r, d0, psi):
    """Gradient of the CARE loss; path derivatives obey the same recursion."""
    d = care_path(eta, r, d0)
    u = r - d
    w = np.where(u < 0, 1.0 - psi, psi)
    e1 = eta[1]
    grads = np.zeros((3, len(r)))
    if len(r) > 1:
        den = [1.0, -e1]
        grads[0, 1:] = lfilter([1.0], den, np.ones(len(r) - 1))
        grads[1, 1:] = lfilter([1.0], den, d[:-1])
        grads[2, 1:] = lfilter([1.0], den, np.abs(r[:-1]))
    return -2.0 * grads @ (w * u)


@dataclass
class CareFit:
    psi: float
    etas: np.ndarray
    expectile_series: np.ndarray
    objective: float
    initial_expectile: float
    converged: bool = True
    explosive: bool = False


def _candidates(rng, n, d0, scale):
    half = n // 2
    persistence = rng.uniform(0.0, 1.0, half)
    structured = np.column_stack([
        d0 * (1.0 - persistence) + rng.uniform(-0.5, 0.5, half) * scale * (1.0 - persistence),
        persistence,
        rng.uniform(-1.0, 1.0, half),
    ])
    loose = np.column_stack([
        rng.uniform(-1.0, 1.0, n - half) * scale,
        rng.uniform(-1.0, 1.0, n - half),
        rng.standard_normal(n - half),
    ])
    return np.vstack([structured, loose])


def fit_care(
    r,
    psi: float,
    seed: int = 0,
    n_starts: int = 10_000,
    n_refine: int = 5,
    burn_in: int = 100,
    fixed: dict[str, float] | None = None,
    warm_start=None,
) -> CareFit:
    """Fit the CARE recursion ``d_t = e0 + e1 d_{t-1} + e2 |r_{t-1}|``.

    Coefficients minimize the asymmetric squared loss at level ``psi``; the
    recursion starts at the sample psi-expectile of the first ``burn_in``
    observations. ``warm_start`` adds an extra refinement start.
    """
    r = np.asarray(r, dtype=float)
    if not 0 < psi < 1:
        raise ValueError("psi must lie in (0, 1)")
    if not np.all(np.isfinite(r)):
        raise DataError("return series contains non-finite values")
    fixed = dict(fixed or {})
    unknown = set(fixed) - set(PARAM_NAMES)
    if unknown:
        raise ValueError(f"unknown parameters {sorted(unknown)}")
    fixed_vals = np.array([fixed.get(n, 0.0) for n in PARAM_NAMES], float)
    free_idx = np.array([i for i, n in enumerate(PARAM_NAMES) if n not in fixed], dtype=int)

    d0 = sample_expectile(r[: min(burn_in, len(r))], psi)

    def full(x):
        v = fixed_vals.copy()
        v[free_idx] = x
        return v

    def loss(x):
        with np.errstate(all="ignore"):
            val = asymmetric_squared_loss(r, care_path(full(x), r, d0), psi)
        return val if np.isfinite(val) else np.inf

    def jac(x):
        with np.errstate(all="ignore"):
            g = _care_gradient(full(x), r, d0, psi)[free_idx]
        return np.where(np.isfinite(g), g, 0.0)

    if len(free_idx) == 0:
        x, fun, converged = np.zeros(0), loss(np.zeros(0)), True
    else:
        rng = np.random.default_rng(seed)
        scale = max(abs(d0), float(np.std(r)), 1e-8)
        candidates = _candidates(rng, n_starts, d0, scale)[:, free_idx]
        extra = [np.array([d0, 0.0, 0.0])[free_idx]]
        if warm_start is not None:
            extra.insert(0, np.asarray(warm_start, float)[free_idx])
        res = multistart_minimize(loss, candidates, n_refine=n_refine, extra_starts=extra, jac=jac)
        x, fun, converged = res.x, res.fun, res.converged
    if not np.isfinite(fun):
        raise EstimationError("CARE loss is not finite at the optimum")
    eta = full(x)
    explosive = abs(eta[1]) >= 1.0
    return CareFit(
        psi=psi,
        etas=eta,
        expectile_series=care_path(eta, r, d0),
        objective=fun,
        initial_expectile=d0,
        converged=converged,
        explosive=explosive,
    )


@dataclass
class CaresFit:
    tau: float
    psi_star: float
    etas: np.ndarray
    es_series: np.ndarray
    expectile_series: np.ndarray
    violation_rate: float
    within_tolerance: bool = True
    es_mode: str = "mapped"
    evaluated: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "psi_star": self.psi_star,
            "params": dict(zip(PARAM_NAMES, map(float, self.etas))),
            "violation_rate": self.violation_rate,
            "within_tolerance": self.within_tolerance,
            "es_mode": self.es_mode,
            "grid_points_evaluated": len(self.evaluated),
        }


def select_grid_point(rates: dict[int, float], tau: float) -> int:
    """Grid index whose violation rate is closest to ``tau``; earliest on ties."""
    return min(rates, key=lambda k: (abs(rates[k] - tau), k))


def calibrate_cares(
    r,
    tau: float = 0.05,
    seed: int = 0,
    grid_step: float = 1e-4,
    psi_max: float = 0.5,
    n_starts: int = 10_000,
    warm_starts: int = 200,
    window: int = 5,
    exhaustive: bool = False,
    tolerance: float = 0.02,
    es_mode: str = "mapped",
    burn_in: int = 100,
) -> CaresFit:
    """Calibrate the expectile level so in-sample violations match ``tau``.

    The grid is ``grid_step * k`` for k = 1 .. psi_max/grid_step. With
    ``exhaustive=False`` the violation-rate crossing is bracketed by bisection
    on the grid (the rate is nondecreasing in psi up to estimation noise) and
    every grid point within ``window`` steps of the crossing is then fitted.
    The first fit uses ``n_starts`` random starts; later fits warm-start from
    the nearest fitted neighbour plus ``warm_starts`` random starts.

    ``es_mode='mapped'`` converts the calibrated expectile path to expected
    shortfall with :func:`es_from_expectile`; ``'expectile'`` returns the
    expectile path itself.
    """
    r = np.asarray(r, dtype=float)
    if not 0 < tau < 0.5:
        raise ValueError("tau must lie in (0, 0.5)")
    if es_mode not in ("mapped", "expectile"):
        raise ValueError("es_mode must be 'mapped' or 'expectile'")
    n_grid = int(round(psi_max / grid_step))
    if psi_max >= 0.5:
        n_grid -= 1  # psi = 0.5 makes the mapping singular
    fits: dict[int, CareFit] = {}
    rates: dict[int, float] = {}

    def evaluate(k: int) -> float:
        if k in rates:
            return rates[k]
        psi = grid_step * k
        if fits:
            nearest = min(fits, key=lambda j: (abs(j - k), j))
            fit = fit_care(r, psi, seed=seed + k, n_starts=warm_starts, n_refine=1, burn_in=burn_in,
                           warm_start=fits[nearest].etas)
        else:
            fit = fit_care(r, psi, seed=seed + k, n_starts=n_starts, burn_in=burn_in)
        fits[k] = fit
        rates[k] = violation_rate(r, fit.expectile_series)
        return rates[k]

    if exhaustive:
        for k in range(1, n_grid + 1):
            evaluate(k)
    else:
        lo, hi = 1, n_grid
        # seed the bracket near the Gaussian-implied level to save bisection steps
        guess = min(max(int(round(0.25 * tau / grid_step)), lo), hi)
        if evaluate(guess) >= tau:
            hi = guess
        else:
            lo = guess
        if evaluate(lo) >= tau:
            hi = lo
        elif evaluate(hi) < tau:
            lo = hi
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if evaluate(mid) >= tau:
                hi = mid
            else:
                lo = mid
        for k in range(max(1, lo - window), min(n_grid, hi + window) + 1):
            evaluate(k)

    k_star = select_grid_point(rates, tau)
    fit = fits[k_star]
    psi_star = grid_step * k_star
    rate = rates[k_star]
    ok = abs(rate - tau) <= tolerance
    if not ok:
        warnings.warn(f"CARES violation rate {rate:.4f} misses tau={tau} by more than {tolerance}",
                      ConvergenceWarning, stacklevel=2)
    if es_mode == "mapped":
        es = es_from_expectile(fit.expectile_series, psi_star, tau, float(r.mean()))
    else:
        es = fit.expectile_series.copy()
    return CaresFit(
        tau=tau,
        psi_star=psi_star,
        etas=fit.etas,
        es_series=np.asarray(es, float),
        expectile_series=fit.expectile_series,
        violation_rate=rate,
        within_tolerance=ok,
        es_mode=es_mode,
        evaluated={grid_step * k: v for k, v in sorted(rates.items())},
    )
