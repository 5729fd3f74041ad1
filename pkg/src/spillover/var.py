"""VAR(p) estimation: OLS, BIC lag choice, LASSO and post-LASSO.

Regressor layout for one equation is ``[1, x_{t-1}', ..., x_{t-p}']``, so a
support mask has shape ``(n, n * p)`` with lag-major column blocks.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np
from scipy.linalg import qr

from .errors import DataError, EstimationError, RankDeficientError

LAMBDA_PATH_LENGTH = 100
LAMBDA_MIN_RATIO = 1e-4


@dataclass(frozen=True)
class VarModel:
    n: int
    p: int
    alpha: np.ndarray
    betas: np.ndarray  # (p, n, n)
    sigma: np.ndarray
    residuals: np.ndarray
    support_mask: np.ndarray | None = None
    labels: tuple[str, ...] = ()
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        sig = np.asarray(self.sigma)
        if sig.shape != (self.n, self.n):
            raise DataError("sigma has the wrong shape")
        if np.max(np.abs(sig - sig.T), initial=0.0) > 1e-12 * max(1.0, float(np.abs(sig).max())):
            raise DataError("sigma must be symmetric")
        if np.any(np.diag(sig) <= 0):
            raise DataError("sigma must have a positive diagonal")
        if self.support_mask is not None:
            flat = coefficient_matrix(self.betas)
            if np.any(flat[~self.support_mask] != 0):
                raise DataError("coefficients outside the support mask must be zero")
        if not self.labels:
            object.__setattr__(self, "labels", tuple(f"x{i + 1}" for i in range(self.n)))
        elif len(self.labels) != self.n:
            raise DataError(f"expected {self.n} labels, got {len(self.labels)}")

    @classmethod
    def from_coefficients(cls, betas, sigma, alpha=None, labels=()) -> "VarModel":
        """Build a model from known parameters (no data)."""
        betas = np.asarray(betas, float)
        if betas.ndim == 2:
            betas = betas[None]
        n = betas.shape[1]
        alpha = np.zeros(n) if alpha is None else np.asarray(alpha, float)
        return cls(n=n, p=betas.shape[0], alpha=alpha, betas=betas, sigma=np.asarray(sigma, float),
                   residuals=np.zeros((0, n)), labels=tuple(labels))

    def companion(self) -> np.ndarray:
        n, p = self.n, self.p
        top = coefficient_matrix(self.betas)
        if p == 1:
            return top
        lower = np.hstack([np.eye(n * (p - 1)), np.zeros((n * (p - 1), n))])
        return np.vstack([top, lower])

    def max_root(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.companion()))))

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "p": self.p,
            "labels": list(self.labels),
            "alpha": self.alpha.tolist(),
            "betas": [b.tolist() for b in self.betas],
            "sigma": self.sigma.tolist(),
            "support_mask": None if self.support_mask is None else self.support_mask.astype(int).tolist(),
            "diagnostics": self.diagnostics,
        }

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))


def coefficient_matrix(betas: np.ndarray) -> np.ndarray:
    """Stack ``(p, n, n)`` lag matrices into ``(n, n*p)``."""
    return np.concatenate(list(betas), axis=1)


def split_coefficients(B: np.ndarray, p: int) -> np.ndarray:
    n = B.shape[0]
    return np.stack([B[:, i * n : (i + 1) * n] for i in range(p)])


def lag_design(X, p: int, start: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Return (Y, Z) with Z rows ``[1, x_{t-1}, ..., x_{t-p}]`` for t >= start.

    ``start`` defaults to ``p``; a larger value lets models of different lag
    order share one estimation sample.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    start = p if start is None else start
    if start < p:
        raise ValueError("start must be at least p")
    T = X.shape[0]
    Y = X[start:]
    cols = [np.ones((T - start, 1))] + [X[start - i : T - i] for i in range(1, p + 1)]
    return Y, np.hstack(cols)


def _regressor_names(labels, p) -> list[str]:
    return ["const"] + [f"{lab}.L{i}" for i in range(1, p + 1) for lab in labels]


def _check_rank(Z: np.ndarray, names: list[str]) -> None:
    if Z.shape[1] == 0:
        return
    _, R, piv = qr(Z, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    tol = d.max() * max(Z.shape) * np.finfo(float).eps if d.size else 0.0
    rank = int(np.sum(d > tol))
    if rank < Z.shape[1]:
        bad = [names[i] for i in piv[rank:]]
        raise RankDeficientError(f"regressor matrix is rank deficient; collinear columns: {bad}", columns=bad)


def _restricted_ols(Y: np.ndarray, Z: np.ndarray, keep: np.ndarray, names: list[str]) -> np.ndarray:
    """Equation-by-equation OLS on the columns flagged in ``keep`` (n, k).

    Equations sharing a column set are solved jointly.
    """
    n, k = keep.shape
    B = np.zeros((n, k))
    groups: dict[bytes, list[int]] = {}
    for i in range(n):
        groups.setdefault(keep[i].tobytes(), []).append(i)
    for key, eqs in groups.items():
        cols = np.flatnonzero(keep[eqs[0]])
        if cols.size == 0:
            continue
        Zs = Z[:, cols]
        _check_rank(Zs, [names[c] for c in cols])
        coef, *_ = np.linalg.lstsq(Zs, Y[:, eqs], rcond=None)
        B[np.ix_(eqs, cols)] = coef.T
    return B


def _assemble(Y, Z, B, p, labels, mask=None, diagnostics=None) -> VarModel:
    resid = Y - Z @ B.T
    sigma = resid.T @ resid / Y.shape[0]
    sigma = 0.5 * (sigma + sigma.T)
    n = Y.shape[1]
    model = VarModel(
        n=n, p=p, alpha=B[:, 0].copy(), betas=split_coefficients(B[:, 1:], p), sigma=sigma,
        residuals=resid, support_mask=mask, labels=tuple(labels), diagnostics=dict(diagnostics or {}),
    )
    model.diagnostics.setdefault("max_root", model.max_root())
    model.diagnostics["stable"] = model.diagnostics["max_root"] < 1.0
    return model


def _prepare(panel, p, labels):
    X = np.asarray(panel, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if p < 1:
        raise ValueError("lag order p must be at least 1")
    if not np.all(np.isfinite(X)):
        raise DataError("panel contains non-finite values")
    n = X.shape[1]
    labels = tuple(labels) if labels else tuple(f"x{i + 1}" for i in range(n))
    return X, n, labels


def estimate_var_ols(panel, p: int, labels=(), start: int | None = None) -> VarModel:
    """Equation-by-equation OLS with intercept; sigma uses the 1/(T-p) divisor."""
    X, n, labels = _prepare(panel, p, labels)
    T = X.shape[0]
    if T - p <= n * p + 1:
        raise DataError(f"too few observations: T - p = {T - p} must exceed n*p + 1 = {n * p + 1}")
    Y, Z = lag_design(X, p, start)
    keep = np.ones((n, Z.shape[1]), dtype=bool)
    B = _restricted_ols(Y, Z, keep, _regressor_names(labels, p))
    return _assemble(Y, Z, B, p, labels, diagnostics={"estimator": "OLS"})


def var_bic(model: VarModel) -> float:
    Tn = model.residuals.shape[0]
    _, logdet = np.linalg.slogdet(model.sigma)
    return float(logdet + math.log(Tn) / Tn * model.p * model.n ** 2)


def select_lag_bic(panel, p_max: int, labels=(), return_values: bool = False):
    """BIC lag order on a common sample that reserves the first ``p_max`` rows."""
    if p_max < 1:
        raise ValueError("p_max must be at least 1")
    values = {}
    for p in range(1, p_max + 1):
        values[p] = var_bic(estimate_var_ols(panel, p, labels=labels, start=p_max))
    best = min(values, key=lambda q: (values[q], q))
    return (best, values) if return_values else best


@numba.njit(cache=True)
def _cd_gram(G, c, lam, b, tol, max_sweeps):
    """Coordinate descent for ``b'Gb - 2c'b + lam * |b|_1``."""
    k = b.shape[0]
    for sweep in range(max_sweeps):
        max_delta = 0.0
        max_b = 0.0
        for j in range(k):
            gjj = G[j, j]
            if gjj <= 0.0:
                b[j] = 0.0
                continue
            rho = c[j]
            for i in range(k):
                rho -= G[j, i] * b[i]
            rho += gjj * b[j]
            half = 0.5 * lam
            if rho > half:
                new = (rho - half) / gjj
            elif rho < -half:
                new = (rho + half) / gjj
            else:
                new = 0.0
            d = abs(new - b[j])
            if d > max_delta:
                max_delta = d
            b[j] = new
            if abs(new) > max_b:
                max_b = abs(new)
        if max_delta <= tol * max(1.0, max_b):
            return sweep + 1
    return -1


@dataclass
class LassoPath:
    lambdas: np.ndarray
    coefs: np.ndarray  # (n_lambda, k) slopes on the original scale
    intercepts: np.ndarray


def _working_space(Z, y, standardize):
    mean = Z.mean(axis=0)
    Zc = Z - mean
    scale = Zc.std(axis=0) if standardize else np.ones(Z.shape[1])
    scale = np.where(scale > 0, scale, 1.0)
    Zw = Zc / scale
    ymean = y.mean()
    return Zw, y - ymean, mean, scale, ymean


def lasso_lambda_max(Z, y, standardize: bool = True) -> float:
    """Smallest penalty with an all-zero slope solution (penalty on the working scale)."""
    Zw, yc, *_ = _working_space(np.asarray(Z, float), np.asarray(y, float), standardize)
    if Zw.shape[1] == 0:
        return 0.0
    return float(2.0 * np.max(np.abs(Zw.T @ yc)))


def lasso_path(Z, y, lambdas, standardize: bool = True, tol: float = 1e-12, max_sweeps: int = 100_000) -> LassoPath:
    """Solve ``sum (y - a - Z b)^2 + lam * sum |b_k * s_k|`` along ``lambdas``.

    ``s_k`` is the regressor standard deviation when ``standardize`` is true
    and one otherwise. The intercept is never penalized. Coefficients are
    returned on the original scale.
    """
    Z = np.asarray(Z, float)
    y = np.asarray(y, float)
    Zw, yc, mean, scale, ymean = _working_space(Z, y, standardize)
    G = Zw.T @ Zw
    c = Zw.T @ yc
    b = np.zeros(Z.shape[1])
    coefs = np.zeros((len(lambdas), Z.shape[1]))
    inter = np.zeros(len(lambdas))
    for i, lam in enumerate(lambdas):
        if _cd_gram(G, c, float(lam), b, tol, max_sweeps) < 0:
            raise EstimationError(f"coordinate descent did not converge at lambda={lam:g}")
        slopes = b / scale
        coefs[i] = slopes
        inter[i] = ymean - mean @ slopes
    return LassoPath(np.asarray(lambdas, float), coefs, inter)


def lambda_grid(lam_max: float, n: int = LAMBDA_PATH_LENGTH, ratio: float = LAMBDA_MIN_RATIO) -> np.ndarray:
    if lam_max <= 0:
        return np.zeros(1)
    return lam_max * np.geomspace(1.0, ratio, n)


def contiguous_folds(n_rows: int, folds: int) -> list[np.ndarray]:
    """Chronological blocks of near-equal size."""
    return [np.asarray(b) for b in np.array_split(np.arange(n_rows), folds)]


def cv_lambda(Z, y, folds: int = 5, standardize: bool = True, lambdas=None) -> tuple[float, np.ndarray, np.ndarray]:
    """Pick the penalty minimizing mean squared error over chronological folds."""
    if lambdas is None:
        lambdas = lambda_grid(lasso_lambda_max(Z, y, standardize))
    errors = np.zeros((folds, len(lambdas)))
    for f, test in enumerate(contiguous_folds(len(y), folds)):
        train = np.setdiff1d(np.arange(len(y)), test)
        path = lasso_path(Z[train], y[train], lambdas, standardize)
        pred = path.intercepts[:, None] + path.coefs @ Z[test].T
        errors[f] = np.mean((y[test][None, :] - pred) ** 2, axis=1)
    mean_err = errors.mean(axis=0)
    if not np.any(np.isfinite(mean_err)):
        raise EstimationError("cross-validation produced no finite error")
    best = int(np.nanargmin(mean_err))
    return float(lambdas[best]), np.asarray(lambdas), mean_err


def estimate_var_lasso(panel, p: int, folds: int = 5, labels=(), lam=None, standardize: bool = True) -> VarModel:
    """Per-equation LASSO; penalty chosen by chronological k-fold CV.

    Pass ``lam`` (scalar or length-n array) to bypass cross-validation.
    """
    X, n, labels = _prepare(panel, p, labels)
    T = X.shape[0]
    if T - p <= folds:
        raise DataError("too few observations for the requested folds")
    Y, Z = lag_design(X, p)
    S = Z[:, 1:]
    B = np.zeros((n, Z.shape[1]))
    chosen, lam_max = np.zeros(n), np.zeros(n)
    lam_arr = None if lam is None else np.broadcast_to(np.asarray(lam, float), (n,))
    for j in range(n):
        y = Y[:, j]
        lam_max[j] = lasso_lambda_max(S, y, standardize)
        if lam_arr is None:
            grid = lambda_grid(lam_max[j])
            chosen[j], _, _ = cv_lambda(S, y, folds, standardize, grid)
            path_lams = grid[grid >= chosen[j]]
        else:
            chosen[j] = lam_arr[j]
            path_lams = np.array([chosen[j]])
        path = lasso_path(S, y, path_lams, standardize)
        B[j, 0] = path.intercepts[-1]
        B[j, 1:] = path.coefs[-1]
    mask = B[:, 1:] != 0
    diag = {
        "estimator": "LASSO",
        "lambda": chosen.tolist(),
        "lambda_max": lam_max.tolist(),
        "standardize": standardize,
        "folds": folds,
        "n_selected": int(mask.sum()),
    }
    return _assemble(Y, Z, B, p, labels, mask=mask, diagnostics=diag)


def post_lasso(panel, p: int, support_mask, labels=()) -> VarModel:
    """OLS restricted to the masked-in regressors (intercept always kept)."""
    X, n, labels = _prepare(panel, p, labels)
    mask = np.asarray(support_mask, dtype=bool)
    if mask.shape != (n, n * p):
        raise DataError(f"support mask must have shape {(n, n * p)}, got {mask.shape}")
    Y, Z = lag_design(X, p)
    keep = np.hstack([np.ones((n, 1), dtype=bool), mask])
    B = _restricted_ols(Y, Z, keep, _regressor_names(labels, p))
    return _assemble(Y, Z, B, p, labels, mask=mask.copy(), diagnostics={"estimator": "PostLASSO"})


def estimate_var_post_lasso(panel, p: int, folds: int = 5, labels=(), standardize: bool = True) -> VarModel:
    """LASSO selection followed by the restricted OLS refit."""
    first = estimate_var_lasso(panel, p, folds=folds, labels=labels, standardize=standardize)
    model = post_lasso(panel, p, first.support_mask, labels=labels)
    model.diagnostics.update({k: v for k, v in first.diagnostics.items() if k != "estimator"})
    return model


@dataclass(frozen=True)
class MaCoefficients:
    phis: np.ndarray  # (H+1, n, n)

    def __len__(self):
        return self.phis.shape[0]


def ma_coefficients(model: VarModel, H: int) -> MaCoefficients:
    """Moving-average matrices ``Phi_0 .. Phi_H`` from the VAR recursion."""
    if H < 0:
        raise ValueError("H must be nonnegative")
    n, p = model.n, model.p
    phis = np.zeros((H + 1, n, n))
    phis[0] = np.eye(n)
    for i in range(1, H + 1):
        acc = np.zeros((n, n))
        for j in range(1, min(p, i) + 1):
            acc += model.betas[j - 1] @ phis[i - j]
        phis[i] = acc
    return MaCoefficients(phis)
