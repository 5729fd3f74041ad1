"""Flat ``key = value`` pipeline configuration.

Blank lines and text after ``#`` are ignored. List values are comma
separated. Every key and its default is listed by ``spillover --print-config``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .indicators.series import IndicatorKind

ALL_INDICATORS = tuple(k.value for k in IndicatorKind)
TIERS = ("markets", "subsectors", "companies")


class ConfigError(ValueError):
    """Unknown key or malformed value in a configuration file."""


@dataclass
class PipelineConfig:
    # inputs
    prices: str = ""
    caps: str = ""
    metadata: str = ""
    market_prices: str = ""
    episodes: str = ""
    # indicators
    indicators: tuple[str, ...] = ALL_INDICATORS
    tau: float = 0.05
    risk_sign: str = "signed"
    garch_search: str = "full"
    caviar_starts: int = 10_000
    care_starts: int = 10_000
    cares_grid_step: float = 1e-4
    burn_in: int = 100
    # VAR and decomposition
    h: int = 10
    p: str = "bic"
    p_max: int = 5
    estimator: str = "auto"
    lasso_threshold: int = 10
    folds: int = 5
    lasso_standardize: bool = True
    # rolling
    window: int = 250
    step: int = 1
    rolling_p: str = "fixed"
    # panel handling
    liquidity: float = 0.30
    frequency: str = "daily"
    weekly_block: int = 5
    # networks
    prune: float = 0.75
    prune_order: str = "prune-then-convert"
    # robustness sweeps
    sweep_h: tuple[int, ...] = (10, 15, 20)
    sweep_p: tuple[int, ...] = (1, 2, 3)
    # run
    tier: str = "companies"
    seed: int = 0
    out: str = "out"
    n_jobs: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def need(ok, msg):
            if not ok:
                raise ConfigError(msg)

        self.indicators = tuple(IndicatorKind.parse(k).value for k in self.indicators)
        need(len(self.indicators) > 0, "indicators must not be empty")
        need(0 < self.tau < 0.5, "tau must lie in (0, 0.5)")
        need(self.risk_sign in ("signed", "magnitude"), "risk_sign must be signed or magnitude")
        need(self.garch_search in ("full", "garch11"), "garch_search must be full or garch11")
        need(self.h >= 1, "h must be at least 1")
        need(self.p == "bic" or (self.p.isdigit() and int(self.p) >= 1), "p must be 'bic' or a positive integer")
        need(self.p_max >= 1, "p_max must be at least 1")
        need(self.estimator in ("auto", "OLS", "PostLASSO"), "estimator must be auto, OLS or PostLASSO")
        need(self.window > 0 and self.step >= 1, "window and step must be positive")
        need(self.rolling_p in ("fixed", "bic"), "rolling_p must be fixed or bic")
        need(0 < self.liquidity < 1, "liquidity must lie in (0, 1)")
        need(self.frequency in ("daily", "weekly"), "frequency must be daily or weekly")
        need(0 <= self.prune <= 1, "prune must lie in [0, 1]")
        need(self.prune_order in ("prune-then-convert", "convert-then-prune"),
             "prune_order must be prune-then-convert or convert-then-prune")
        need(self.tier in TIERS, f"tier must be one of {', '.join(TIERS)}")
        need(self.n_jobs >= 1 or self.n_jobs == -1, "n_jobs must be positive or -1")

    def estimator_for(self, n: int) -> str:
        if self.estimator != "auto":
            return self.estimator
        return "OLS" if n <= self.lasso_threshold else "PostLASSO"

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {_format(v)}")
        return "\n".join(lines) + "\n"

    def with_overrides(self, **kw) -> "PipelineConfig":
        return dataclasses.replace(self, **{k: v for k, v in kw.items() if v is not None})


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    return str(v)


def _coerce(name: str, default, text: str):
    text = text.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return low in ("true", "1", "yes")
        if isinstance(default, tuple):
            items = [t.strip() for t in text.split(",") if t.strip()]
            if default and isinstance(default[0], int):
                return tuple(int(t) for t in items)
            return tuple(items)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {text!r}") from None
    return text


def parse_config(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    base = base or PipelineConfig()
    known = {f.name: getattr(base, f.name) for f in fields(base)}
    values = dict(known)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, known[key], val)
    return PipelineConfig(**values)


def load_config(path: str | Path | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    cfg = parse_config(path.read_text())
    # relative input paths resolve against the config file's directory
    for key in ("prices", "caps", "metadata", "market_prices", "episodes"):
        val = getattr(cfg, key)
        if val and not Path(val).is_absolute():
            setattr(cfg, key, str(path.parent / val))
    return cfg
