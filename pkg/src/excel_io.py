from __future__ import annotations

# Workbook export of report tables as named Excel tables, and loading them back by table name.

import logging
import math
import re
from pathlib import Path
from typing import Mapping, Union

import numpy as np
import pandas as pd
from openpyxl import Workbook, load_workbook
from openpyxl.utils import get_column_letter
from openpyxl.worksheet.table import Table, TableStyleInfo

logger = logging.getLogger(__name__)

_TABLE_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
# sheet titles are limited to 31 characters
_MAX_SHEET_TITLE = 31


def _cell_value(value):
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_report_workbook(path: Union[str, Path], tables: Mapping[str, pd.DataFrame]) -> Path:
    """
    One sheet per table, each holding an Excel Table (ListObject) of the same name.
    Empty frames are skipped.
    """
    path = Path(path)
    wb = Workbook()
    wb.remove(wb.active)
    written = 0
    for table_name, df in tables.items():
        if not _TABLE_NAME.match(table_name):
            raise ValueError(f"'{table_name}' is not a valid Excel table name.")
        if df is None or df.empty:
            logger.warning("Table '%s' is empty; not written to %s", table_name, path)
            continue
        headers = [str(c).strip() for c in df.columns]
        if len(set(headers)) != len(headers) or any(not h for h in headers):
            raise ValueError(f"Table '{table_name}' needs unique, non-blank column headers.")

        ws = wb.create_sheet(title=table_name[:_MAX_SHEET_TITLE])
        ws.append(headers)
        for row in df.itertuples(index=False, name=None):
            ws.append([_cell_value(v) for v in row])

        ref = f"A1:{get_column_letter(len(headers))}{len(df) + 1}"
        table = Table(displayName=table_name, ref=ref)
        table.tableStyleInfo = TableStyleInfo(name="TableStyleMedium2", showRowStripes=True)
        ws.add_table(table)
        written += 1

    if not written:
        raise ValueError("No non-empty tables to write.")
    path.parent.mkdir(parents=True, exist_ok=True)
    wb.save(path)
    logger.info("Wrote %s tables to %s", written, path)
    return path


def load_named_table(path: Union[str, Path], table_name: str) -> pd.DataFrame:
    """Read an Excel Table by name from whichever sheet holds it, via the table ref."""
    wb = load_workbook(Path(path), data_only=True)
    for ws in wb.worksheets:
        if table_name in ws.tables:
            rows = [[c.value for c in row] for row in ws[ws.tables[table_name].ref]]
            return pd.DataFrame(rows[1:], columns=[str(h).strip() for h in rows[0]])
    raise ValueError(f"Table '{table_name}' not found in any worksheet.")
