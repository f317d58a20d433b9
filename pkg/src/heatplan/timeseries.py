"""Ingestion, resampling, and alignment of the model's input series.

Everything downstream operates on a uniform 15-minute grid. This module
turns raw CSV files (possibly hourly weather) and weekly schedule templates
into an :class:`InputBundle` whose series share one origin, step, and length.
"""

from __future__ import annotations

import configparser
import csv
from dataclasses import dataclass
from datetime import datetime, time, timedelta
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (
    ConfigurationError,
    CoverageError,
    IngestionError,
    ResamplingError,
)

GRID_STEP = timedelta(minutes=15)

SERIES_ROLES = (
    "power",
    "indoor_temp",
    "external_temp",
    "solar_irradiance",
    "occupancy",
    "ventilation",
)
_SCHEDULE_ROLES = ("occupancy", "ventilation")


class Unit(Enum):
    WATT = "W"
    KILOWATT = "kW"
    CELSIUS = "degC"
    WATT_PER_M2 = "W/m2"
    DIMENSIONLESS = "1"


_ROLE_UNITS = {
    "power": Unit.WATT,
    "indoor_temp": Unit.CELSIUS,
    "external_temp": Unit.CELSIUS,
    "solar_irradiance": Unit.WATT_PER_M2,
}


def _freeze(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled scalar series: sample i sits at ``origin + i*step``."""

    origin: datetime
    step: timedelta
    values: np.ndarray
    unit: Unit

    def __post_init__(self):
        object.__setattr__(self, "values", _freeze(self.values))
        if self.step <= timedelta(0):
            raise ValueError("step must be positive")
        if self.values.ndim != 1 or len(self.values) < 1:
            raise ValueError("values must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("values must be finite")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def last_instant(self) -> datetime:
        return self.origin + (len(self) - 1) * self.step

    def instant(self, i: int) -> datetime:
        return self.origin + i * self.step

    def timestamps(self) -> list[datetime]:
        return [self.instant(i) for i in range(len(self))]


@dataclass(frozen=True)
class ScheduleSeries:
    """Binary on/off indicator series on the same grid convention."""

    origin: datetime
    step: timedelta
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _freeze(self.values))
        if self.step <= timedelta(0):
            raise ValueError("step must be positive")
        if self.values.ndim != 1 or len(self.values) < 1:
            raise ValueError("values must be a non-empty 1-D sequence")
        if not np.all((self.values == 0.0) | (self.values == 1.0)):
            raise ValueError("schedule values must be exactly 0 or 1")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def last_instant(self) -> datetime:
        return self.origin + (len(self) - 1) * self.step

    def instant(self, i: int) -> datetime:
        return self.origin + i * self.step


@dataclass(frozen=True)
class InputBundle:
    """The six model input series; roles absent from a file stay ``None``."""

    power: TimeSeries | None = None
    indoor_temp: TimeSeries | None = None
    external_temp: TimeSeries | None = None
    solar_irradiance: TimeSeries | None = None
    occupancy: ScheduleSeries | None = None
    ventilation: ScheduleSeries | None = None

    def series(self) -> dict[str, TimeSeries | ScheduleSeries]:
        present = {}
        for role in SERIES_ROLES:
            s = getattr(self, role)
            if s is not None:
                present[role] = s
        return present

    def require(self, *roles: str) -> None:
        missing = [r for r in roles if getattr(self, r) is None]
        if missing:
            raise ConfigurationError(f"bundle is missing required series: {', '.join(missing)}")

    @property
    def aligned(self) -> bool:
        items = list(self.series().values())
        if not items:
            return False
        first = items[0]
        return all(
            s.origin == first.origin and s.step == first.step and len(s) == len(first)
            for s in items
        )

    def __len__(self) -> int:
        items = list(self.series().values())
        if not items:
            return 0
        return len(items[0])

    @property
    def origin(self) -> datetime:
        return next(iter(self.series().values())).origin

    @property
    def step(self) -> timedelta:
        return next(iter(self.series().values())).step


def _parse_timestamp(text: str, row: int) -> datetime:
    try:
        return datetime.fromisoformat(text.strip())
    except ValueError:
        raise IngestionError(f"row {row}: unparseable timestamp {text!r}") from None


def _parse_cell(text: str, row: int, column: str) -> float:
    stripped = text.strip()
    if stripped == "" or stripped.lower() == "nan":
        return float("nan")  # gap marker, resolved by the fill policy
    try:
        value = float(stripped)
    except ValueError:
        raise IngestionError(f"row {row}: column {column!r} has non-numeric value {text!r}") from None
    if not np.isfinite(value):
        raise IngestionError(f"row {row}: column {column!r} has non-finite value {text!r}")
    return value


def _fill_gaps(values: np.ndarray, max_fill_steps: int, column: str, rows: list[int]) -> np.ndarray:
    """Linearly interpolate interior NaN runs of length <= max_fill_steps."""
    missing = np.isnan(values)
    if not missing.any():
        return values
    first_bad = int(np.argmax(missing))
    if max_fill_steps <= 0:
        raise IngestionError(f"row {rows[first_bad]}: column {column!r} is empty")
    n = len(values)
    idx = 0
    out = values.copy()
    while idx < n:
        if not missing[idx]:
            idx += 1
            continue
        run_start = idx
        while idx < n and missing[idx]:
            idx += 1
        run_len = idx - run_start
        if run_len > max_fill_steps:
            raise IngestionError(
                f"row {rows[run_start]}: column {column!r} has {run_len} consecutive "
                f"missing values (limit {max_fill_steps})"
            )
        if run_start == 0 or idx == n:
            raise IngestionError(
                f"row {rows[run_start]}: column {column!r} missing at series edge cannot be filled"
            )
        left, right = out[run_start - 1], out[idx]
        for k in range(run_len):
            out[run_start + k] = left + (right - left) * (k + 1) / (run_len + 1)
    return out


def ingest_csv(
    path: str | Path,
    column_spec: dict[str, str],
    max_fill_steps: int = 0,
) -> InputBundle:
    """Parse a CSV file into an InputBundle on the file's native sampling.

    Parameters
    ----------
    path : file with a header row; first column is an ISO local timestamp
        ``YYYY-MM-DDTHH:MM``, remaining columns decimal numbers.
    column_spec : mapping of CSV column name to series role (one of
        ``power``, ``indoor_temp``, ``external_temp``, ``solar_irradiance``,
        ``occupancy``, ``ventilation``). Power is read in kW and stored in W.
    max_fill_steps : interior gaps (empty cells) up to this many consecutive
        rows are filled by linear interpolation; 0 rejects any gap. Schedule
        columns are never filled.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"input file not found: {path}")
    for col, role in column_spec.items():
        if role not in SERIES_ROLES:
            raise ConfigurationError(f"unknown series role {role!r} for column {col!r}")
    roles_seen = list(column_spec.values())
    for role in set(roles_seen):
        if roles_seen.count(role) > 1:
            raise ConfigurationError(f"role {role!r} mapped to more than one column")

    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        missing_cols = [c for c in column_spec if c not in header[1:]]
        if missing_cols:
            raise ConfigurationError(
                f"{path}: columns not found: {', '.join(missing_cols)}"
            )
        col_index = {c: header.index(c) for c in column_spec}

        timestamps: list[datetime] = []
        cells: dict[str, list[float]] = {c: [] for c in column_spec}
        for row_no, row in enumerate(reader, start=2):  # 1-based incl. header
            if not row or all(not c.strip() for c in row):
                continue
            timestamps.append(_parse_timestamp(row[0], row_no))
            for col, j in col_index.items():
                if j >= len(row):
                    raise IngestionError(f"row {row_no}: truncated row")
                cells[col].append(_parse_cell(row[j], row_no, col))

    if len(timestamps) < 2:
        raise IngestionError(f"{path}: need at least 2 data rows")
    step = timestamps[1] - timestamps[0]
    if step <= timedelta(0):
        raise IngestionError("row 3: timestamps are not strictly increasing")
    for i in range(1, len(timestamps)):
        if timestamps[i] - timestamps[i - 1] != step:
            raise IngestionError(
                f"row {i + 2}: timestamp spacing differs from first interval "
                f"({timestamps[i] - timestamps[i - 1]} vs {step})"
            )

    origin = timestamps[0]
    row_numbers = list(range(2, 2 + len(timestamps)))
    built: dict[str, TimeSeries | ScheduleSeries] = {}
    for col, role in column_spec.items():
        raw = np.array(cells[col], dtype=float)
        if role in _SCHEDULE_ROLES:
            if np.isnan(raw).any():
                bad = row_numbers[int(np.argmax(np.isnan(raw)))]
                raise IngestionError(f"row {bad}: schedule column {col!r} is empty")
            try:
                built[role] = ScheduleSeries(origin, step, raw)
            except ValueError:
                bad_mask = ~((raw == 0.0) | (raw == 1.0))
                bad = row_numbers[int(np.argmax(bad_mask))]
                raise IngestionError(
                    f"row {bad}: schedule column {col!r} must be 0 or 1"
                ) from None
        else:
            filled = _fill_gaps(raw, max_fill_steps, col, row_numbers)
            if role == "power":
                filled = filled * 1000.0  # kW on the wire, W internally
            built[role] = TimeSeries(origin, step, filled, _ROLE_UNITS[role])
    return InputBundle(**built)


def resample_linear(series: TimeSeries, target_step: timedelta) -> TimeSeries:
    """Upsample by exact linear interpolation; original instants keep their values."""
    if len(series) < 2:
        raise ResamplingError("resampling needs at least 2 samples")
    if target_step > series.step:
        raise ResamplingError(
            f"downsampling is unsupported ({series.step} -> {target_step})"
        )
    if series.step % target_step != timedelta(0):
        raise ResamplingError(
            f"target step {target_step} does not evenly divide series step {series.step}"
        )
    k = series.step // target_step
    if k == 1:
        return series
    v = series.values
    frac = np.arange(k) / k
    segments = v[:-1, None] + (v[1:] - v[:-1])[:, None] * frac[None, :]
    out = np.append(segments.ravel(), v[-1])
    return TimeSeries(series.origin, target_step, out, series.unit)


def resample_hold(schedule: ScheduleSeries, target_step: timedelta) -> ScheduleSeries:
    """Upsample a schedule by previous-value hold."""
    if len(schedule) < 2:
        raise ResamplingError("resampling needs at least 2 samples")
    if target_step > schedule.step:
        raise ResamplingError(
            f"downsampling is unsupported ({schedule.step} -> {target_step})"
        )
    if schedule.step % target_step != timedelta(0):
        raise ResamplingError(
            f"target step {target_step} does not evenly divide series step {schedule.step}"
        )
    k = schedule.step // target_step
    if k == 1:
        return schedule
    v = schedule.values
    out = np.append(np.repeat(v[:-1], k), v[-1])
    return ScheduleSeries(schedule.origin, target_step, out)


def _window_grid(window: tuple[datetime, datetime]) -> tuple[datetime, int]:
    start, end = window
    if end <= start:
        raise ConfigurationError("window end must be after window start")
    span = end - start
    n = span // GRID_STEP
    if span % GRID_STEP != timedelta(0):
        n += 1
    return start, int(n)


def align(bundle: InputBundle, window: tuple[datetime, datetime]) -> InputBundle:
    """Trim every present series to the 15-minute grid of ``[start, end)``.

    Measured series are linearly upsampled when coarser than the grid;
    schedules are hold-resampled, never interpolated. Raises
    :class:`CoverageError` naming any series that does not span the window.
    """
    start, n = _window_grid(window)
    last = start + (n - 1) * GRID_STEP
    out: dict[str, TimeSeries | ScheduleSeries] = {}
    for role, series in bundle.series().items():
        if series.step != GRID_STEP:
            if role in _SCHEDULE_ROLES:
                series = resample_hold(series, GRID_STEP)
            else:
                series = resample_linear(series, GRID_STEP)
        offset = start - series.origin
        if offset < timedelta(0) or series.last_instant < last:
            raise CoverageError(
                f"series {role!r} does not cover the window: has "
                f"[{series.origin.isoformat()} .. {series.last_instant.isoformat()}], "
                f"needs [{start.isoformat()} .. {last.isoformat()}]"
            )
        if offset % GRID_STEP != timedelta(0):
            raise CoverageError(
                f"series {role!r} origin {series.origin.isoformat()} is not on the "
                f"15-minute grid of window start {start.isoformat()}"
            )
        i0 = offset // GRID_STEP
        values = series.values[i0 : i0 + n]
        if role in _SCHEDULE_ROLES:
            out[role] = ScheduleSeries(start, GRID_STEP, values)
        else:
            out[role] = TimeSeries(start, GRID_STEP, values, series.unit)
    if not out:
        raise ConfigurationError("bundle has no series to align")
    return InputBundle(**out)


# -- weekly schedule templates ------------------------------------------------

WEEKDAY_NAMES = ("monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday")


@dataclass(frozen=True)
class DaySchedule:
    """On-windows for one weekday; ``None`` means off all day."""

    occupancy: tuple[time, time] | None = None
    ventilation: tuple[time, time] | None = None


@dataclass(frozen=True)
class ScheduleTemplate:
    """Weekly occupancy/ventilation template, Monday first."""

    days: tuple[DaySchedule, ...]

    def __post_init__(self):
        if len(self.days) != 7:
            raise ConfigurationError("schedule template must define 7 days")

    def series(self, origin: datetime, n: int, step: timedelta = GRID_STEP
               ) -> tuple[ScheduleSeries, ScheduleSeries]:
        """Generate (occupancy, ventilation) series of length n from origin."""
        occ = np.zeros(n)
        ven = np.zeros(n)
        t = origin
        for i in range(n):
            day = self.days[t.weekday()]
            clock = t.time()
            if day.occupancy is not None and day.occupancy[0] <= clock < day.occupancy[1]:
                occ[i] = 1.0
            if day.ventilation is not None and day.ventilation[0] <= clock < day.ventilation[1]:
                ven[i] = 1.0
            t += step
        return ScheduleSeries(origin, step, occ), ScheduleSeries(origin, step, ven)


def _parse_clock(text: str) -> time:
    try:
        h, m = text.strip().split(":")
        return time(int(h), int(m))
    except (ValueError, AttributeError):
        raise ConfigurationError(f"expected HH:MM clock time, got {text!r}") from None


def _parse_window(text: str) -> tuple[time, time] | None:
    text = text.strip().lower()
    if text in ("off", "none", ""):
        return None
    if "-" not in text:
        raise ConfigurationError(f"expected HH:MM-HH:MM window or 'off', got {text!r}")
    a, b = text.split("-", 1)
    start, end = _parse_clock(a), _parse_clock(b)
    if end <= start:
        raise ConfigurationError(f"window end must be after start in {text!r}")
    return start, end


def load_schedule_template(path: str | Path) -> ScheduleTemplate:
    """Read a weekly template file: one section per weekday, keys
    ``occupancy``/``ventilation`` with ``HH:MM-HH:MM`` or ``off``."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigurationError(f"schedule template not found: {path}")
    days = []
    for name in WEEKDAY_NAMES:
        if parser.has_section(name):
            sec = parser[name]
            days.append(DaySchedule(
                occupancy=_parse_window(sec.get("occupancy", "off")),
                ventilation=_parse_window(sec.get("ventilation", "off")),
            ))
        else:
            days.append(DaySchedule())
    return ScheduleTemplate(tuple(days))


def office_template(
    occupancy: tuple[str, str] = ("07:00", "21:00"),
    ventilation: tuple[str, str] = ("06:00", "22:00"),
    weekend: bool = False,
) -> ScheduleTemplate:
    """Mon-Fri (optionally all-week) template with the given on-windows."""
    occ = (_parse_clock(occupancy[0]), _parse_clock(occupancy[1]))
    ven = (_parse_clock(ventilation[0]), _parse_clock(ventilation[1]))
    on = DaySchedule(occupancy=occ, ventilation=ven)
    off = on if weekend else DaySchedule()
    return ScheduleTemplate((on, on, on, on, on, off, off))
