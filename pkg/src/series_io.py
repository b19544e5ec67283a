from __future__ import annotations

# CSV reading/writing of observation series. A metadata comment line carries delta_t and v0,
# followed by an RFC-4180 style table with header i,x,v[,z,y].

import logging
import math
import re
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
import pandas as pd

from src.simulator import ObservationSeries

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("i", "x", "v")
OPTIONAL_COLUMNS = ("z", "y")
FLOAT_FORMAT = "%.17g"

# metadata line + header line precede the first data row
_FIRST_DATA_LINE = 3


class SeriesFormatError(ValueError):
    def __init__(self, message: str, *, line: Optional[int] = None, column: Optional[str] = None):
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column '{column}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(f"{prefix}{message}")


def _canonical_col_name(name: str) -> str:
    return "".join(ch for ch in str(name).lower() if ch.isalnum())


def _format_metadata(series: ObservationSeries) -> str:
    items = [f"delta_t={series.delta_t!r}"]
    if series.v0 is not None:
        items.append(f"v0={series.v0!r}")
    return "# " + ",".join(items)


def _parse_metadata(line: str) -> Dict[str, float]:
    if not line.startswith("#"):
        raise SeriesFormatError("expected a metadata comment line such as '# delta_t=0.004,v0=0.04'", line=1)
    meta: Dict[str, float] = {}
    for item in line.lstrip("#").strip().split(","):
        if not item.strip():
            continue
        key, sep, raw = item.partition("=")
        if not sep:
            raise SeriesFormatError(f"metadata item '{item.strip()}' is not of the form key=value", line=1)
        try:
            meta[key.strip()] = float(raw)
        except ValueError as err:
            raise SeriesFormatError(f"metadata value for '{key.strip()}' is not a number: {raw.strip()!r}", line=1) from err
    if "delta_t" not in meta:
        raise SeriesFormatError("metadata is missing delta_t", line=1)
    return meta


def _parse_float(text: str) -> float:
    # float() rounds correctly; the pandas C parser can be off by an ulp
    try:
        return float(text)
    except ValueError:
        return math.nan


def path_to_csv(series: ObservationSeries, path: Union[str, Path]) -> Path:
    """Write the series losslessly (17 significant digits)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(_format_metadata(series) + "\n")
        series.to_frame().to_csv(fh, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def csv_to_series(path: Union[str, Path]) -> ObservationSeries:
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        first = fh.readline().rstrip("\r\n")
        meta = _parse_metadata(first)
        try:
            df = pd.read_csv(fh, dtype=str, keep_default_na=False)
        except pd.errors.EmptyDataError as err:
            raise SeriesFormatError("header row is missing", line=2) from err
        except pd.errors.ParserError as err:
            match = re.search(r"line (\d+)", str(err))
            line = int(match.group(1)) + 1 if match else None
            raise SeriesFormatError(f"malformed row ({err})", line=line) from err

    df.columns = [str(c).strip() for c in df.columns]
    by_canonical = {_canonical_col_name(c): c for c in df.columns}
    available = ", ".join(df.columns) if len(df.columns) else "(none)"
    for col in REQUIRED_COLUMNS:
        if col not in by_canonical:
            raise SeriesFormatError(f"required column is missing. Available columns: {available}", column=col)

    values: Dict[str, np.ndarray] = {}
    for col in REQUIRED_COLUMNS + OPTIONAL_COLUMNS:
        source = by_canonical.get(col)
        if source is None:
            continue
        raw = df[source].str.strip()
        parsed = raw.map(_parse_float).to_numpy(dtype=float)
        bad = np.isnan(parsed).nonzero()[0]
        if bad.size:
            row = int(bad[0])
            raise SeriesFormatError(
                f"value {raw.iloc[row]!r} is not a number", line=row + _FIRST_DATA_LINE, column=col
            )
        values[col] = parsed

    expected_index = np.arange(1, len(df) + 1)
    mismatched = (values["i"] != expected_index).nonzero()[0]
    if mismatched.size:
        row = int(mismatched[0])
        raise SeriesFormatError(
            f"row index {values['i'][row]:g} breaks the sequence 1..n", line=row + _FIRST_DATA_LINE, column="i"
        )

    negative = (values["v"] < 0).nonzero()[0]
    if negative.size:
        raise SeriesFormatError("variance must be nonnegative", line=int(negative[0]) + _FIRST_DATA_LINE, column="v")

    series = ObservationSeries(
        delta_t=meta["delta_t"],
        x=values["x"],
        v=values["v"],
        v0=meta.get("v0"),
        z=values.get("z"),
        y=values.get("y"),
    )
    if not series.is_estimable:
        logger.warning("Series in '%s' has n=%s and v0=%s; it cannot be used for estimation", path, series.n, series.v0)
    return series
