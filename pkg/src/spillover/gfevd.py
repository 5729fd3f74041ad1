"""Generalized forecast error variance decomposition and spillover indices."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, EstimationError
from .var import VarModel, ma_coefficients

INCLUSIVE = "inclusive"  # sum over l = 0..h (h + 1 terms)
EXCLUSIVE = "exclusive"  # sum over l = 0..h-1
horizon_convention = INCLUSIVE


@dataclass(frozen=True)
class SpilloverMatrix:
    """Normalized spillover table; ``theta_norm[i, j]`` is j's share of i, in percent."""

    h: int
    theta_norm: np.ndarray
    labels: tuple[str, ...]
    theta_raw: np.ndarray | None = None
    row_tol: float = 1e-9

    def __post_init__(self):
        t = np.asarray(self.theta_norm, float)
        n = len(self.labels)
        if t.shape != (n, n):
            raise DataError(f"theta_norm must be {n}x{n}, got {t.shape}")
        if np.any(t < 0):
            raise DataError("theta_norm must be nonnegative")
        dev = np.max(np.abs(t.sum(axis=1) - 100.0), initial=0.0)
        if dev > self.row_tol:
            raise DataError(f"rows of theta_norm must sum to 100 (max deviation {dev:g})")
        if self.theta_raw is not None and np.any(np.asarray(self.theta_raw) < 0):
            raise DataError("theta_raw must be nonnegative")

    @classmethod
    def from_table(cls, table, labels, h: int = 10, row_tol: float = 0.05) -> "SpilloverMatrix":
        """Wrap an already-normalized table (e.g. one printed with rounding)."""
        return cls(h=h, theta_norm=np.asarray(table, float), labels=tuple(labels), row_tol=row_tol)

    @property
    def n(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class SpilloverSummary:
    from_others: np.ndarray
    to_others: np.ndarray
    net: np.ndarray
    total: float
    labels: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            lab: {"to": float(t), "from": float(f), "net": float(n)}
            for lab, t, f, n in zip(self.labels, self.to_others, self.from_others, self.net)
        }


def gfevd_components(model: VarModel, h: int, convention: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Unnormalized numerator matrix and denominator vector of the decomposition."""
    convention = convention or horizon_convention
    if h < 0:
        raise ValueError("horizon h must be nonnegative")
    if convention == INCLUSIVE:
        last = h
    elif convention == EXCLUSIVE:
        if h < 1:
            raise ValueError("exclusive convention needs h >= 1")
        last = h - 1
    else:
        raise ValueError(f"unknown horizon convention {convention!r}")
    sigma = np.asarray(model.sigma, float)
    phis = ma_coefficients(model, last).phis
    A = phis @ sigma  # A[l] = Phi_l Sigma
    num = np.sum(A ** 2, axis=0)
    den = np.einsum("lij,lij->i", A, phis)  # diag(Phi_l Sigma Phi_l')
    return num, den


def compute_gfevd(model: VarModel, h: int = 10, convention: str | None = None) -> SpilloverMatrix:
    sigma = np.asarray(model.sigma, float)
    sjj = np.diag(sigma)
    bad = np.flatnonzero(sjj <= 0)
    if bad.size:
        raise EstimationError(f"nonpositive shock variance for {[model.labels[i] for i in bad]}")
    num, den = gfevd_components(model, h, convention)
    zero = np.flatnonzero(~(den > 0))
    if zero.size:
        raise EstimationError(f"zero forecast error variance in rows {[model.labels[i] for i in zero]}")
    raw = num / sjj[None, :] / den[:, None]
    rowsum = raw.sum(axis=1)
    norm = raw / rowsum[:, None] * 100.0
    return SpilloverMatrix(h=h, theta_norm=norm, labels=tuple(model.labels), theta_raw=raw)


def summarize(m: SpilloverMatrix) -> SpilloverSummary:
    """From/to/net contributions and the total index.

    Rows of ``theta_norm`` sum to 100, so the off-diagonal row sum equals
    ``100 - theta_norm[i, i]``; that form is used because it stays exact for
    tables whose entries were rounded after normalization.
    """
    t = np.asarray(m.theta_norm, float)
    off = t - np.diag(np.diag(t))
    from_others = 100.0 - np.diag(t)
    to_others = off.sum(axis=0)
    return SpilloverSummary(
        from_others=from_others,
        to_others=to_others,
        net=to_others - from_others,
        total=float(from_others.sum()),
        labels=tuple(m.labels),
    )


def _fmt(x: float) -> str:
    return f"{x:.10f}"


def write_spillover_table(path: str | Path, m: SpilloverMatrix, summary: SpilloverSummary | None = None) -> None:
    """Matrix block, then to/net rows, then the total index."""
    summary = summary or summarize(m)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["to\\from", *m.labels, "from_others"])
        for lab, row, f in zip(m.labels, m.theta_norm, summary.from_others):
            w.writerow([lab, *map(_fmt, row), _fmt(f)])
        w.writerow(["to_others", *map(_fmt, summary.to_others), ""])
        w.writerow(["net", *map(_fmt, summary.net), ""])
        w.writerow(["total", _fmt(summary.total)])


def read_spillover_table(path: str | Path, h: int = 10, row_tol: float = 1e-7) -> SpilloverMatrix:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    labels = rows[0][1:-1]
    n = len(labels)
    table = np.array([[float(v) for v in r[1 : n + 1]] for r in rows[1 : n + 1]])
    return SpilloverMatrix(h=h, theta_norm=table, labels=tuple(labels), row_tol=row_tol)
