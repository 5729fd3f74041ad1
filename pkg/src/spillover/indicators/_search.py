"""Multi-start direct search shared by the CAViaR and CARE estimators."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize


@dataclass
class SearchResult:
    x: np.ndarray
    fun: float
    n_screened: int
    converged: bool


def multistart_minimize(
    loss: Callable[[np.ndarray], float],
    candidates: np.ndarray,
    n_refine: int = 5,
    extra_starts: list[np.ndarray] | None = None,
    max_rounds: int = 10,
    jac: Callable[[np.ndarray], np.ndarray] | None = None,
) -> SearchResult:
    """Screen ``candidates`` by loss, then polish the best ``n_refine``.

    Each start is refined by repeated runs until the objective stops
    improving: Nelder-Mead for non-smooth losses, BFGS when a gradient ``jac``
    is supplied. Deterministic given its inputs.
    """
    starts = list(extra_starts or [])
    with warnings.catch_warnings(), np.errstate(all="ignore"):
        warnings.simplefilter("ignore", RuntimeWarning)
        vals = np.array([loss(c) for c in candidates]) if len(candidates) else np.zeros(0)
        vals = np.where(np.isfinite(vals), vals, np.inf)
        order = np.argsort(vals, kind="stable")[:n_refine]
        starts += [candidates[i] for i in order if np.isfinite(vals[i])]
        if not starts:
            raise ValueError("no finite starting point")

        best_x, best_f, converged = None, np.inf, False
        for x0 in starts:
            x, f = np.asarray(x0, float), loss(np.asarray(x0, float))
            ok = False
            for _ in range(max_rounds):
                if jac is None:
                    res = minimize(loss, x, method="Nelder-Mead",
                                   options={"xatol": 1e-8, "fatol": 1e-10, "maxiter": 4000, "maxfev": 8000})
                else:
                    res = minimize(loss, x, jac=jac, method="BFGS", options={"gtol": 1e-9, "maxiter": 2000})
                xn, fn = res.x, res.fun
                improved = fn < f - 1e-12 * max(1.0, abs(f))
                if fn <= f:
                    x, f = xn, fn
                if not improved:
                    ok = True
                    break
            if f < best_f:
                best_x, best_f, converged = x, f, ok
    return SearchResult(x=np.asarray(best_x), fun=float(best_f), n_screened=len(candidates), converged=converged)
