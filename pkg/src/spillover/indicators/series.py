from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from ..errors import DataError


class IndicatorKind(str, enum.Enum):
    LOG_RETURN = "LogReturn"
    LOG_VOL = "LogVol"
    CAVIAR = "CAViaR"
    CARES = "CARES"

    @classmethod
    def parse(cls, text: str) -> "IndicatorKind":
        key = text.strip().lower()
        for member in cls:
            if key in (member.value.lower(), member.name.lower()):
                return member
        raise ValueError(f"unknown indicator kind {text!r}")


@dataclass(frozen=True)
class IndicatorSeries:
    kind: IndicatorKind
    dates: np.ndarray
    values: np.ndarray
    source_ticker: str
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(self.values) != len(self.dates):
            raise DataError("indicator values and dates differ in length")
        if self.kind is IndicatorKind.LOG_VOL and not np.all(np.isfinite(self.values)):
            raise DataError("log-volatility must be finite")


def write_indicator_csv(path: str | Path, series: Iterable[IndicatorSeries]) -> None:
    """Long-format ``date,ticker,kind,value`` output."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "ticker", "kind", "value"])
        for s in series:
            for d, v in zip(s.dates, s.values):
                w.writerow([str(d), s.source_ticker, s.kind.value, repr(float(v))])


def read_indicator_csv(path: str | Path) -> list[IndicatorSeries]:
    groups: dict[tuple[str, str], tuple[list, list]] = {}
    with Path(path).open(newline="") as fh:
        for rec in csv.DictReader(fh):
            key = (rec["ticker"], rec["kind"])
            ds, vs = groups.setdefault(key, ([], []))
            ds.append(np.datetime64(rec["date"], "D"))
            vs.append(float(rec["value"]))
    return [
        IndicatorSeries(
            kind=IndicatorKind.parse(kind),
            dates=np.array(ds, dtype="datetime64[D]"),
            values=np.array(vs),
            source_ticker=ticker,
        )
        for (ticker, kind), (ds, vs) in groups.items()
    ]
