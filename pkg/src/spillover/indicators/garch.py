"""ARMA-GARCH estimation with standard, EGARCH and GJR variance equations.

Parameter vector layout::

    [phi0, phi_1..phi_k, xi_1..xi_q,            # mean
     omega, alpha_1..alpha_m, (gamma_1..gamma_m), beta_1..beta_s,   # variance
     nu?, skew?]                                # innovation distribution

``gamma`` appears only for EGARCH and GJR. Pre-sample returns are set to the
sample mean, pre-sample innovations to zero and pre-sample variances to the
sample variance, so every specification is scored on the same T observations
and BIC values are comparable across orders.
"""

from __future__ import annotations

import enum
import itertools
import math
import warnings
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter, lfiltic

from ..errors import ConvergenceError, DataError, EstimationError
from .distributions import Distribution
from .series import IndicatorKind, IndicatorSeries

_ABS_NORMAL = math.sqrt(2.0 / math.pi)
_MAX_PERSISTENCE = 0.9999


class VarianceFamily(str, enum.Enum):
    STANDARD = "Standard"
    EGARCH = "EGARCH"
    GJR = "GJR"


@dataclass(frozen=True)
class GarchSpec:
    ar_order: int = 0
    ma_order: int = 0
    arch_order: int = 1
    garch_order: int = 1
    variance_family: VarianceFamily = VarianceFamily.STANDARD
    innovation_dist: Distribution = Distribution.GAUSSIAN

    def __post_init__(self):
        for name in ("ar_order", "ma_order", "arch_order", "garch_order"):
            v = getattr(self, name)
            if v not in (0, 1, 2):
                raise ValueError(f"{name} must be 0, 1 or 2, got {v}")
        if self.arch_order + self.garch_order < 1:
            raise ValueError("arch_order + garch_order must be at least 1")

    @property
    def has_asymmetry(self) -> bool:
        return self.variance_family is not VarianceFamily.STANDARD

    @property
    def n_mean(self) -> int:
        return 1 + self.ar_order + self.ma_order

    @property
    def n_variance(self) -> int:
        m = self.arch_order * (2 if self.has_asymmetry else 1)
        return 1 + m + self.garch_order

    @property
    def n_params(self) -> int:
        return self.n_mean + self.n_variance + self.innovation_dist.n_params

    def param_names(self) -> list[str]:
        names = ["phi0"]
        names += [f"phi{i + 1}" for i in range(self.ar_order)]
        names += [f"xi{i + 1}" for i in range(self.ma_order)]
        names += ["omega"] + [f"alpha{i + 1}" for i in range(self.arch_order)]
        if self.has_asymmetry:
            names += [f"gamma{i + 1}" for i in range(self.arch_order)]
        names += [f"beta{i + 1}" for i in range(self.garch_order)]
        return names + self.innovation_dist.param_names()

    def to_dict(self) -> dict:
        return {
            "ar_order": self.ar_order,
            "ma_order": self.ma_order,
            "arch_order": self.arch_order,
            "garch_order": self.garch_order,
            "variance_family": self.variance_family.value,
            "innovation_dist": self.innovation_dist.value,
        }


def enumerate_specs(
    families=tuple(VarianceFamily),
    dists=tuple(Distribution),
    orders=(0, 1, 2),
) -> list[GarchSpec]:
    """All candidate specifications in selection order."""
    specs = []
    for fam, dist, k, q, m, s in itertools.product(families, dists, orders, orders, orders, orders):
        if m + s >= 1:
            specs.append(GarchSpec(k, q, m, s, fam, dist))
    return specs


@dataclass
class GarchFit:
    spec: GarchSpec
    params: np.ndarray
    log_likelihood: float
    bic: float
    cond_vol: np.ndarray
    innovations: np.ndarray
    n_obs: int
    converged: bool = True
    message: str = ""

    def __post_init__(self):
        if not np.all(self.cond_vol > 0):
            raise EstimationError("conditional volatility must be strictly positive")

    @property
    def mean_params(self) -> np.ndarray:
        return self.params[: self.spec.n_mean]

    @property
    def variance_params(self) -> np.ndarray:
        return self.params[self.spec.n_mean : self.spec.n_mean + self.spec.n_variance]

    @property
    def dist_params(self) -> np.ndarray:
        return self.params[self.spec.n_mean + self.spec.n_variance :]

    def named_params(self) -> dict[str, float]:
        return dict(zip(self.spec.param_names(), map(float, self.params)))

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "params": self.named_params(),
            "log_likelihood": self.log_likelihood,
            "bic": self.bic,
            "n_obs": self.n_obs,
            "converged": self.converged,
            "message": self.message,
        }


def bic_value(log_likelihood: float, n_params: int, n_obs: int) -> float:
    return -2.0 * log_likelihood + n_params * math.log(n_obs)


def _split(theta: np.ndarray, spec: GarchSpec):
    i = 0
    phi0 = theta[i]
    i += 1
    phi = theta[i : i + spec.ar_order]
    i += spec.ar_order
    xi = theta[i : i + spec.ma_order]
    i += spec.ma_order
    omega = theta[i]
    i += 1
    alpha = theta[i : i + spec.arch_order]
    i += spec.arch_order
    gamma = np.zeros(0)
    if spec.has_asymmetry:
        gamma = theta[i : i + spec.arch_order]
        i += spec.arch_order
    beta = theta[i : i + spec.garch_order]
    i += spec.garch_order
    return phi0, phi, xi, omega, alpha, gamma, beta, theta[i:]


def _lagged(x: np.ndarray, lag: int, fill: float) -> np.ndarray:
    out = np.empty_like(x)
    out[:lag] = fill
    out[lag:] = x[:-lag]
    return out


def arma_innovations(r: np.ndarray, phi0: float, phi, xi) -> np.ndarray:
    rbar = float(r.mean())
    x = r - phi0
    for i, c in enumerate(phi, start=1):
        x = x - c * _lagged(r, i, rbar)
    if len(xi):
        x = lfilter([1.0], np.r_[1.0, xi], x)
    return x


@numba.njit(cache=True)
def _egarch_logvar(a, omega, alpha, gamma, beta, backcast):
    T = a.shape[0]
    m = alpha.shape[0]
    s = beta.shape[0]
    lv = np.empty(T)
    z = np.zeros(T)
    lb = np.log(backcast)
    for t in range(T):
        v = omega
        for i in range(m):
            j = t - i - 1
            if j >= 0:
                v += alpha[i] * (abs(z[j]) - 0.7978845608028654) + gamma[i] * z[j]
        for i in range(s):
            j = t - i - 1
            v += beta[i] * (lv[j] if j >= 0 else lb)
        if v > 50.0:
            v = 50.0
        elif v < -50.0:
            v = -50.0
        lv[t] = v
        z[t] = a[t] / np.exp(0.5 * v)
    return lv


def conditional_variance(a: np.ndarray, spec: GarchSpec, omega, alpha, gamma, beta, backcast: float) -> np.ndarray:
    fam = spec.variance_family
    if fam is VarianceFamily.EGARCH:
        return np.exp(_egarch_logvar(a, omega, np.asarray(alpha, float), np.asarray(gamma, float),
                                     np.asarray(beta, float), backcast))
    a2 = a * a
    u = np.full_like(a, omega)
    for i in range(spec.arch_order):
        lag = _lagged(a2, i + 1, backcast)
        u += alpha[i] * lag
        if fam is VarianceFamily.GJR:
            neg = _lagged((a < 0).astype(float), i + 1, 0.5)
            u += gamma[i] * neg * lag
    if spec.garch_order == 0:
        return u
    den = np.r_[1.0, -np.asarray(beta, float)]
    zi = lfiltic([1.0], den, y=np.full(spec.garch_order, backcast))
    sig2, _ = lfilter([1.0], den, u, zi=zi)
    return sig2


def filter_series(theta: np.ndarray, r: np.ndarray, spec: GarchSpec, backcast: float):
    """Return (innovations, conditional variance) for parameters ``theta``."""
    phi0, phi, xi, omega, alpha, gamma, beta, _ = _split(theta, spec)
    a = arma_innovations(r, phi0, phi, xi)
    return a, conditional_variance(a, spec, omega, alpha, gamma, beta, backcast)


def log_likelihood(theta: np.ndarray, r: np.ndarray, spec: GarchSpec, backcast: float) -> float:
    a, sig2 = filter_series(theta, r, spec, backcast)
    if not np.all(np.isfinite(sig2)) or np.any(sig2 <= 0):
        return -np.inf
    sd = np.sqrt(sig2)
    dist_params = _split(theta, spec)[-1]
    ll = spec.innovation_dist.logpdf(a / sd, dist_params) - np.log(sd)
    total = float(np.sum(ll))
    return total if np.isfinite(total) else -np.inf


def _starting_values(r: np.ndarray, spec: GarchSpec) -> np.ndarray:
    var = float(r.var())
    theta = [float(r.mean())] + [0.0] * (spec.ar_order + spec.ma_order)
    m, s = spec.arch_order, spec.garch_order
    fam = spec.variance_family
    if fam is VarianceFamily.EGARCH:
        b = [0.9 / s] * s if s else []
        theta += [math.log(var) * (1 - sum(b))] + [0.1 / max(m, 1)] * m + [0.0] * m + b
    else:
        a = [(0.05 if s else 0.2) / max(m, 1)] * m
        g = [0.05 / max(m, 1)] * m if fam is VarianceFamily.GJR else []
        b = [0.9 / s] * s if s else []
        persistence = sum(a) + 0.5 * sum(g) + sum(b)
        theta += [var * (1 - persistence)] + a + g + b
    return np.array(theta + spec.innovation_dist.start(), dtype=float)


def _bounds(r: np.ndarray, spec: GarchSpec) -> list[tuple[float, float]]:
    scale = max(float(np.abs(r).max()), 1e-8)
    var = float(r.var())
    bounds = [(-scale, scale)] + [(-0.999, 0.999)] * (spec.ar_order + spec.ma_order)
    m, s = spec.arch_order, spec.garch_order
    if spec.variance_family is VarianceFamily.EGARCH:
        bounds += [(-50.0, 50.0)] + [(-3.0, 3.0)] * m + [(-3.0, 3.0)] * m + [(-_MAX_PERSISTENCE, _MAX_PERSISTENCE)] * s
    else:
        bounds += [(var * 1e-8, 10.0 * var)] + [(0.0, 1.0)] * m
        if spec.variance_family is VarianceFamily.GJR:
            bounds += [(-1.0, 2.0)] * m
        bounds += [(0.0, 1.0)] * s
    return bounds + spec.innovation_dist.bounds()


def _constraints(spec: GarchSpec) -> list[dict]:
    o = spec.n_mean
    m, s = spec.arch_order, spec.garch_order
    fam = spec.variance_family
    alpha = slice(o + 1, o + 1 + m)
    if fam is VarianceFamily.STANDARD:
        beta = slice(o + 1 + m, o + 1 + m + s)
        return [{"type": "ineq", "fun": lambda t: _MAX_PERSISTENCE - t[alpha].sum() - t[beta].sum()}]
    gamma = slice(o + 1 + m, o + 1 + 2 * m)
    beta = slice(o + 1 + 2 * m, o + 1 + 2 * m + s)
    if fam is VarianceFamily.GJR:
        cons = [{"type": "ineq", "fun": lambda t: _MAX_PERSISTENCE - t[alpha].sum() - 0.5 * t[gamma].sum() - t[beta].sum()}]
        if m:
            cons.append({"type": "ineq", "fun": lambda t: t[alpha] + t[gamma]})
        return cons
    if s:
        return [{"type": "ineq", "fun": lambda t: _MAX_PERSISTENCE - np.abs(t[beta]).sum()}]
    return []


def fit_garch(r, spec: GarchSpec, maxiter: int = 400) -> GarchFit:
    """Maximum likelihood fit of one ARMA-GARCH specification.

    Raises
    ------
    ConvergenceError
        If the series is degenerate or the optimizer fails. The exception's
        ``best`` attribute holds the best parameter vector found, if any.
    """
    r = np.asarray(r, dtype=float)
    if r.ndim != 1 or len(r) < 100:
        raise DataError("fit_garch needs a 1-d series with at least 100 observations")
    if not np.all(np.isfinite(r)):
        raise DataError("return series contains non-finite values")
    backcast = float(r.var())
    if backcast <= 1e-12 * max(1.0, float(np.abs(r).max()) ** 2):
        raise ConvergenceError("degenerate series: zero variance", best=None, flag="degenerate")

    T = len(r)
    theta0 = _starting_values(r, spec)
    bounds = _bounds(r, spec)
    theta0 = np.clip(theta0, [b[0] for b in bounds], [b[1] for b in bounds])

    def objective(theta):
        ll = log_likelihood(theta, r, spec, backcast)
        return -ll / T if np.isfinite(ll) else 1e10

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = minimize(
            objective, theta0, method="SLSQP", bounds=bounds, constraints=_constraints(spec),
            options={"maxiter": maxiter, "ftol": 1e-10},
        )
    theta = np.asarray(res.x, float)
    ll = log_likelihood(theta, r, spec, backcast)
    # status 8 (positive directional derivative in line search) is routinely
    # reported at a valid optimum by SLSQP
    ok = np.isfinite(ll) and (res.success or res.status == 8)
    if not ok:
        raise ConvergenceError(f"GARCH optimizer failed: {res.message}", best=theta, flag=f"status{res.status}")
    a, sig2 = filter_series(theta, r, spec, backcast)
    return GarchFit(
        spec=spec,
        params=theta,
        log_likelihood=ll,
        bic=bic_value(ll, spec.n_params, T),
        cond_vol=np.sqrt(sig2),
        innovations=a,
        n_obs=T,
        converged=bool(res.success),
        message=str(res.message),
    )


@dataclass
class GarchSelection:
    best: GarchFit
    fits: list[GarchFit] = field(default_factory=list)
    failures: list[tuple[GarchSpec, str]] = field(default_factory=list)


def _selection_key(fit: GarchFit, order: int):
    return (fit.bic, fit.spec.n_params, order)


def select_garch(r, candidates: list[GarchSpec] | None = None, n_jobs: int = 1, keep_fits: bool = False):
    """Fit every candidate specification and return the minimum-BIC fit.

    Ties are broken by parameter count, then by position in ``candidates``
    (default: :func:`enumerate_specs`, 1296 specifications).

    Returns
    -------
    GarchFit, or :class:`GarchSelection` when ``keep_fits`` is true.
    """
    r = np.asarray(r, dtype=float)
    if len(r) < 250:
        raise DataError("select_garch needs at least 250 observations")
    candidates = enumerate_specs() if candidates is None else list(candidates)

    def one(spec):
        try:
            return fit_garch(r, spec)
        except EstimationError as exc:
            return f"{type(exc).__name__}: {exc}"

    if n_jobs == 1:
        results = [one(s) for s in candidates]
    else:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=n_jobs)(delayed(one)(s) for s in candidates)

    fits, failures, best, best_key = [], [], None, None
    for order, (spec, res) in enumerate(zip(candidates, results)):
        if isinstance(res, str):
            failures.append((spec, res))
            continue
        fits.append(res)
        key = _selection_key(res, order)
        if best_key is None or key < best_key:
            best, best_key = res, key
    if best is None:
        lines = "; ".join(f"{s.to_dict()}: {msg}" for s, msg in failures[:10])
        raise EstimationError(f"no GARCH specification converged ({len(failures)} failures): {lines}")
    if keep_fits:
        return GarchSelection(best=best, fits=fits, failures=failures)
    return best


def conditional_log_volatility(fit: GarchFit, dates=None, ticker: str = "") -> IndicatorSeries:
    vol = np.asarray(fit.cond_vol, dtype=float)
    if dates is None:
        dates = np.arange(len(vol))
    return IndicatorSeries(kind=IndicatorKind.LOG_VOL, dates=np.asarray(dates), values=np.log(vol), source_ticker=ticker)


def simulate_garch(
    T: int,
    omega: float,
    alpha: float,
    beta: float,
    mu: float = 0.0,
    seed: int | None = None,
    dist: Distribution = Distribution.GAUSSIAN,
    dist_params=(),
    burn: int = 500,
) -> np.ndarray:
    """Simulate a constant-mean GARCH(1,1) path."""
    rng = np.random.default_rng(seed)
    z = dist.sample(T + burn, dist_params, rng)
    sig2 = omega / max(1.0 - alpha - beta, 1e-6)
    out = np.empty(T + burn)
    for t in range(T + burn):
        a = math.sqrt(sig2) * z[t]
        out[t] = mu + a
        sig2 = omega + alpha * a * a + beta * sig2
    return out[burn:]
