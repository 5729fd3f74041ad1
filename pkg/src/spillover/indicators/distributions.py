"""Unit-variance innovation densities for GARCH likelihoods.

Skewed variants use the Fernandez-Steel two-piece construction applied to the
unit-variance symmetric base, then re-standardized to mean zero and variance
one.
"""

from __future__ import annotations

import enum
import math

import numpy as np
from scipy.special import gammaln

_LOG2PI = math.log(2.0 * math.pi)


class Distribution(str, enum.Enum):
    GAUSSIAN = "Gaussian"
    STUDENT_T = "StudentT"
    GED = "GED"
    SKEW_GAUSSIAN = "SkewGaussian"
    SKEW_STUDENT_T = "SkewStudentT"
    SKEW_GED = "SkewGED"

    @property
    def base(self) -> "Distribution":
        return {
            Distribution.SKEW_GAUSSIAN: Distribution.GAUSSIAN,
            Distribution.SKEW_STUDENT_T: Distribution.STUDENT_T,
            Distribution.SKEW_GED: Distribution.GED,
        }.get(self, self)

    @property
    def skewed(self) -> bool:
        return self.base is not self

    @property
    def has_shape(self) -> bool:
        return self.base in (Distribution.STUDENT_T, Distribution.GED)

    @property
    def n_params(self) -> int:
        return int(self.has_shape) + int(self.skewed)

    def param_names(self) -> list[str]:
        names = []
        if self.has_shape:
            names.append("nu")
        if self.skewed:
            names.append("xi")
        return names

    def bounds(self) -> list[tuple[float, float]]:
        out = []
        if self.base is Distribution.STUDENT_T:
            out.append((2.05, 300.0))
        elif self.base is Distribution.GED:
            out.append((0.3, 50.0))
        if self.skewed:
            out.append((0.1, 10.0))
        return out

    def start(self) -> list[float]:
        out = []
        if self.base is Distribution.STUDENT_T:
            out.append(8.0)
        elif self.base is Distribution.GED:
            out.append(1.5)
        if self.skewed:
            out.append(1.0)
        return out

    def logpdf(self, z: np.ndarray, params) -> np.ndarray:
        """Log density of the standardized innovation at ``z``."""
        params = list(params)
        nu = params[0] if self.has_shape else None
        if not self.skewed:
            return _base_logpdf(self, z, nu)
        xi = params[-1]
        m1 = _abs_moment(self.base, nu)
        mean = m1 * (xi - 1.0 / xi)
        var = xi * xi + 1.0 / (xi * xi) - 1.0 - mean * mean
        sd = math.sqrt(var)
        y = mean + sd * z
        scaled = np.where(y >= 0, y / xi, y * xi)
        return (
            math.log(sd) + math.log(2.0) - math.log(xi + 1.0 / xi)
            + _base_logpdf(self.base, scaled, nu)
        )

    def sample(self, size: int, params, rng: np.random.Generator) -> np.ndarray:
        """Draw standardized innovations (symmetric families only)."""
        params = list(params)
        if self is Distribution.GAUSSIAN:
            return rng.standard_normal(size)
        if self is Distribution.STUDENT_T:
            nu = params[0]
            return rng.standard_t(nu, size) * math.sqrt((nu - 2.0) / nu)
        if self is Distribution.GED:
            from scipy.stats import gennorm

            nu = params[0]
            scale = math.sqrt(math.exp(gammaln(1.0 / nu) - gammaln(3.0 / nu)))
            return gennorm.rvs(nu, scale=scale, size=size, random_state=rng)
        raise NotImplementedError(f"sampling from {self.value}")


def _ged_lambda(nu: float) -> float:
    return math.sqrt(2.0 ** (-2.0 / nu) * math.exp(gammaln(1.0 / nu) - gammaln(3.0 / nu)))


def _abs_moment(base: Distribution, nu) -> float:
    """E|Z| for the unit-variance symmetric base."""
    if base is Distribution.GAUSSIAN:
        return math.sqrt(2.0 / math.pi)
    if base is Distribution.STUDENT_T:
        return (
            2.0 * math.sqrt(nu - 2.0) / ((nu - 1.0) * math.sqrt(math.pi))
            * math.exp(gammaln((nu + 1.0) / 2.0) - gammaln(nu / 2.0))
        )
    lam = _ged_lambda(nu)
    return lam * 2.0 ** (1.0 / nu) * math.exp(gammaln(2.0 / nu) - gammaln(1.0 / nu))


def _base_logpdf(base: Distribution, z: np.ndarray, nu) -> np.ndarray:
    if base is Distribution.GAUSSIAN:
        return -0.5 * (_LOG2PI + z * z)
    if base is Distribution.STUDENT_T:
        return (
            gammaln((nu + 1.0) / 2.0) - gammaln(nu / 2.0) - 0.5 * math.log(math.pi * (nu - 2.0))
            - 0.5 * (nu + 1.0) * np.log1p(z * z / (nu - 2.0))
        )
    lam = _ged_lambda(nu)
    return (
        math.log(nu) - 0.5 * np.abs(z / lam) ** nu
        - (1.0 + 1.0 / nu) * math.log(2.0) - gammaln(1.0 / nu) - math.log(lam)
    )
