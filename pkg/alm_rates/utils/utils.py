import logging
from pathlib import Path
from typing import Iterable, List, Mapping, Sequence

import pandas as pd
from tabulate import tabulate

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12e"


def write_table(
    rows: Sequence[Mapping],
    directory: Path,
    stem: str,
    formats: Iterable[str] = ("csv",),
) -> List[Path]:
    """Writes rows as <stem>.csv (and/or <stem>.xlsx) under directory.

    CSV uses a header row, '.' decimals and 13 significant digits in
    scientific notation, so identical runs give identical files.

    Returns:
      The paths written.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(list(rows))
    written = []
    for fmt in formats:
        path = directory / f"{stem}.{fmt}"
        if fmt == "csv":
            frame.to_csv(path, float_format=FLOAT_FORMAT, index=False)
        elif fmt == "xlsx":
            frame.to_excel(path, index=False, engine="openpyxl")
        else:
            raise ValueError(f"Unsupported output format: {fmt}")
        logger.info("Wrote %s (%d rows)", path, len(frame))
        written.append(path)
    return written


def format_table(rows: Sequence[Mapping], floatfmt: str = ".4e") -> str:
    """Plain-text table for terminal output."""
    if not rows:
        return ""
    return tabulate([dict(r) for r in rows], headers="keys", floatfmt=floatfmt)
