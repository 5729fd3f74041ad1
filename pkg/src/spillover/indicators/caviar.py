"""Asymmetric-slope CAViaR quantile model.

The conditional quantile follows

    f_t = g1 + g2 * f_{t-1} + g3 * max(r_{t-1}, 0) + g4 * max(-r_{t-1}, 0)

and the coefficients minimize the tau check loss.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from ..errors import ConvergenceWarning, DataError, EstimationError
from ._search import multistart_minimize

PARAM_NAMES = ("intercept", "persistence", "pos_slope", "neg_slope")


def check_loss(r: np.ndarray, f: np.ndarray, tau: float) -> float:
    """Sum of ``rho_tau(r - f)``."""
    u = r - f
    return float(np.sum(u * (tau - (u < 0))))


def empirical_quantile(x: np.ndarray, tau: float) -> float:
    """Lower empirical quantile: the ceil(tau*n)-th order statistic."""
    x = np.sort(np.asarray(x, float))
    k = max(int(np.ceil(tau * len(x))) - 1, 0)
    return float(x[k])


def caviar_path(gamma, r: np.ndarray, f0: float) -> np.ndarray:
    g1, g2, g3, g4 = gamma
    r = np.asarray(r, float)
    f = np.empty_like(r)
    f[0] = f0
    if len(r) > 1:
        lag = r[:-1]
        u = g1 + g3 * np.maximum(lag, 0.0) + g4 * np.maximum(-lag, 0.0)
        f[1:] = lfilter([1.0], [1.0, -g2], u, zi=[g2 * f0])[0]
    return f


def violation_rate(r: np.ndarray, level: np.ndarray) -> float:
    """Share of t = 2..T with ``r_t < level_t``."""
    return float(np.mean(r[1:] < level[1:]))


@dataclass
class CaviarFit:
    tau: float
    gammas: np.ndarray
    var_series: np.ndarray
    objective: float
    initial_quantile: float
    violation_rate: float
    converged: bool = True
    explosive: bool = False
    fixed: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "params": dict(zip(PARAM_NAMES, map(float, self.gammas))),
            "objective": self.objective,
            "initial_quantile": self.initial_quantile,
            "violation_rate": self.violation_rate,
            "converged": self.converged,
            "explosive": self.explosive,
        }


def _expand(free_idx, fixed_vals, x):
    full = fixed_vals.copy()
    full[free_idx] = x
    return full


def fit_caviar(
    r,
    tau: float = 0.05,
    seed: int = 0,
    n_starts: int = 10_000,
    n_refine: int = 5,
    burn_in: int = 100,
    fixed: dict[str, float] | None = None,
    min_obs: int = 250,
) -> CaviarFit:
    """Estimate the asymmetric-slope CAViaR by multi-start direct search.

    Parameters
    ----------
    r : array_like
        Return series.
    tau : float
        Quantile level in (0, 0.5).
    seed : int
        Seed for the random starting points.
    n_starts : int
        Number of random parameter vectors screened before refinement.
    burn_in : int
        The recursion starts at the empirical tau-quantile of the first
        ``burn_in`` observations.
    fixed : dict, optional
        Parameters held at a given value, keyed by ``PARAM_NAMES``.
        ``{"persistence": 0, "pos_slope": 0, "neg_slope": 0}`` gives the
        constant-quantile model.
    """
    r = np.asarray(r, dtype=float)
    if not 0 < tau < 0.5:
        raise ValueError("tau must lie in (0, 0.5)")
    if len(r) < min_obs:
        raise DataError(f"fit_caviar needs at least {min_obs} observations")
    if not np.all(np.isfinite(r)):
        raise DataError("return series contains non-finite values")

    fixed = dict(fixed or {})
    unknown = set(fixed) - set(PARAM_NAMES)
    if unknown:
        raise ValueError(f"unknown parameters {sorted(unknown)}")
    fixed_vals = np.array([fixed.get(n, 0.0) for n in PARAM_NAMES], float)
    free_idx = np.array([i for i, n in enumerate(PARAM_NAMES) if n not in fixed], dtype=int)

    f0 = empirical_quantile(r[: min(burn_in, len(r))], tau)

    def loss(x):
        with np.errstate(all="ignore"):
            val = check_loss(r, caviar_path(_expand(free_idx, fixed_vals, x), r, f0), tau)
        return val if np.isfinite(val) else np.inf

    rng = np.random.default_rng(seed)
    scale = max(abs(f0), float(np.std(r)), 1e-8)
    half = n_starts // 2
    structured = np.column_stack([
        rng.uniform(-0.5, 0.5, half) * scale,
        rng.uniform(0.0, 1.0, half),
        rng.uniform(-1.0, 1.0, half),
        rng.uniform(-1.0, 1.0, half),
    ])
    persistence = structured[:, 1]
    structured[:, 0] = f0 * (1.0 - persistence) + structured[:, 0] * (1.0 - persistence)
    loose = np.column_stack([
        rng.uniform(-1.0, 1.0, n_starts - half) * scale,
        rng.uniform(-1.0, 1.0, n_starts - half),
        rng.standard_normal(n_starts - half),
        rng.standard_normal(n_starts - half),
    ])
    candidates = np.vstack([structured, loose])[:, free_idx]
    extra = [np.array([f0, 0.0, 0.0, 0.0])[free_idx]] if len(free_idx) else []

    if len(free_idx) == 0:
        x, fun, converged = np.zeros(0), loss(np.zeros(0)), True
    else:
        res = multistart_minimize(loss, candidates, n_refine=n_refine, extra_starts=extra)
        x, fun, converged = res.x, res.fun, res.converged
    if not np.isfinite(fun):
        raise EstimationError("CAViaR check loss is not finite at the optimum")

    gammas = _expand(free_idx, fixed_vals, x)
    path = caviar_path(gammas, r, f0)
    explosive = abs(gammas[1]) >= 1.0
    if explosive:
        warnings.warn("CAViaR persistence |g2| >= 1 at optimum", ConvergenceWarning, stacklevel=2)
    return CaviarFit(
        tau=tau,
        gammas=gammas,
        var_series=path,
        objective=fun,
        initial_quantile=f0,
        violation_rate=violation_rate(r, path),
        converged=converged,
        explosive=explosive,
        fixed=fixed,
    )
