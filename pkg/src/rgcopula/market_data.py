"""Daily open-close returns and realized variances from intraday price bars."""

from __future__ import annotations

import csv
import logging
from collections import OrderedDict
from dataclasses import dataclass
from datetime import date, datetime
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "RV_FLOOR",
    "MIN_ESTIMATION_LENGTH",
    "IntradayBar",
    "DailyObservation",
    "ReturnPanel",
    "InsufficientDataError",
    "filter_calendar",
    "daily_return",
    "realized_variance",
    "annualized_vol",
    "daily_observations",
    "align_panel",
    "read_bars_csv",
    "read_holidays",
    "write_panel_csv",
    "read_panel_csv",
]

RV_FLOOR = 1e-12
MIN_ESTIMATION_LENGTH = 50

# (month, day) pairs dropped every year for thin trading
_LOW_ACTIVITY_DAYS = frozenset({(12, 24), (12, 25), (12, 26), (12, 31), (1, 1), (1, 2)})


class InsufficientDataError(ValueError):
    """Raised when an input leaves too little data to work with."""


@dataclass(frozen=True)
class IntradayBar:
    timestamp: datetime
    price: float

    def __post_init__(self):
        if not self.price > 0:
            raise ValueError(f"price must be positive, got {self.price} at {self.timestamp}")


@dataclass(frozen=True)
class DailyObservation:
    date: date
    ret: float
    rv: float


@dataclass(frozen=True)
class ReturnPanel:
    """Two assets' daily (ret, rv) series on a common set of dates."""

    dates: tuple
    asset1: tuple
    asset2: tuple

    def __post_init__(self):
        if not (len(self.dates) == len(self.asset1) == len(self.asset2)):
            raise ValueError("panel series must have equal length")

    def __len__(self):
        return len(self.dates)

    @property
    def ret1(self) -> np.ndarray:
        return np.array([o.ret for o in self.asset1])

    @property
    def rv1(self) -> np.ndarray:
        return np.array([o.rv for o in self.asset1])

    @property
    def ret2(self) -> np.ndarray:
        return np.array([o.ret for o in self.asset2])

    @property
    def rv2(self) -> np.ndarray:
        return np.array([o.rv for o in self.asset2])

    @classmethod
    def from_arrays(cls, dates, ret1, rv1, ret2, rv2) -> "ReturnPanel":
        a = tuple(DailyObservation(d, float(r), float(v)) for d, r, v in zip(dates, ret1, rv1))
        b = tuple(DailyObservation(d, float(r), float(v)) for d, r, v in zip(dates, ret2, rv2))
        return cls(tuple(dates), a, b)

    def take(self, idx) -> "ReturnPanel":
        """Rows at positions ``idx`` (in the given order)."""
        idx = np.asarray(idx)
        return ReturnPanel(
            tuple(self.dates[i] for i in idx),
            tuple(self.asset1[i] for i in idx),
            tuple(self.asset2[i] for i in idx),
        )


def _is_excluded(day: date, holidays) -> bool:
    return day.weekday() >= 5 or day in holidays or (day.month, day.day) in _LOW_ACTIVITY_DAYS


def filter_calendar(bars: Sequence[IntradayBar], holiday_list: Iterable[date] = ()) -> list[IntradayBar]:
    """Drop bars on weekends, listed holidays, Dec 24-26 and Dec 31-Jan 2."""
    holidays = set(holiday_list)
    kept = [b for b in bars if not _is_excluded(b.timestamp.date(), holidays)]
    if not kept:
        raise InsufficientDataError("no bars left after calendar filtering")
    return kept


def _log_prices(bars_one_day) -> np.ndarray:
    if len(bars_one_day) < 2:
        raise InsufficientDataError("need at least two bars in a day")
    return np.log([b.price if isinstance(b, IntradayBar) else float(b) for b in bars_one_day])


def daily_return(bars_one_day) -> float:
    """Open-close log return (sum of intraday log returns).

    Accepts bars or bare prices.
    """
    lp = _log_prices(bars_one_day)
    return float(np.sum(np.diff(lp)))


def realized_variance(bars_one_day) -> float:
    """Sum of squared intraday log returns (no flooring)."""
    lp = _log_prices(bars_one_day)
    return float(np.sum(np.diff(lp) ** 2))


def annualized_vol(rv):
    """Annualized volatility in percent, 100 * sqrt(250 * rv)."""
    rv = np.asarray(rv, dtype=float)
    if np.any(rv < 0):
        raise ValueError("realized variance must be nonnegative")
    out = 100.0 * np.sqrt(250.0 * rv)
    return float(out) if out.ndim == 0 else out


def _clean_day(bars: list[IntradayBar]) -> list[IntradayBar]:
    # sort by time; on duplicate timestamps the last listed price wins
    by_ts = OrderedDict()
    for b in bars:
        by_ts[b.timestamp] = b
    return [by_ts[k] for k in sorted(by_ts)]


def daily_observations(bars: Sequence[IntradayBar], holiday_list: Iterable[date] = (),
                       rv_floor: float = RV_FLOOR) -> list[DailyObservation]:
    """Filter the calendar, group bars by day and build one observation per day."""
    kept = filter_calendar(bars, holiday_list)
    days = OrderedDict()
    for b in kept:
        days.setdefault(b.timestamp.date(), []).append(b)
    out = []
    for day in sorted(days):
        day_bars = _clean_day(days[day])
        if len(day_bars) < 2:
            logger.warning("dropping %s: fewer than two bars", day)
            continue
        rv = realized_variance(day_bars)
        if rv < rv_floor:
            rv = rv_floor
        out.append(DailyObservation(day, daily_return(day_bars), rv))
    if not out:
        raise InsufficientDataError("no usable trading days")
    return out


def align_panel(a: Sequence[DailyObservation], b: Sequence[DailyObservation],
                min_length: int = MIN_ESTIMATION_LENGTH) -> ReturnPanel:
    """Inner join of two daily series on date."""
    if not a or not b:
        raise InsufficientDataError("both series must be nonempty")
    b_by_date = {o.date: o for o in b}
    pairs = [(o, b_by_date[o.date]) for o in sorted(a, key=lambda o: o.date) if o.date in b_by_date]
    if not pairs or len(pairs) < min_length:
        raise InsufficientDataError(
            f"only {len(pairs)} common dates, need at least {max(min_length, 1)}"
        )
    return ReturnPanel(
        tuple(p[0].date for p in pairs),
        tuple(p[0] for p in pairs),
        tuple(p[1] for p in pairs),
    )


def read_bars_csv(path) -> list[IntradayBar]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"timestamp", "price"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected header 'timestamp,price'")
        return [IntradayBar(datetime.fromisoformat(row["timestamp"]), float(row["price"]))
                for row in reader]


def read_holidays(path) -> set[date]:
    out = set()
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            out.add(date.fromisoformat(line))
    return out


def write_panel_csv(panel: ReturnPanel, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "ret1", "rv1", "ret2", "rv2"])
        for d, o1, o2 in zip(panel.dates, panel.asset1, panel.asset2):
            w.writerow([d.isoformat(), repr(o1.ret), repr(o1.rv), repr(o2.ret), repr(o2.rv)])


def read_panel_csv(path) -> ReturnPanel:
    dates, r1, v1, r2, v2 = [], [], [], [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            dates.append(date.fromisoformat(row["date"]))
            r1.append(float(row["ret1"]))
            v1.append(float(row["rv1"]))
            r2.append(float(row["ret2"]))
            v2.append(float(row["rv2"]))
    return ReturnPanel.from_arrays(dates, r1, v1, r2, v2)
