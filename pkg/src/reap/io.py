"""io.py — Deterministic, atomic artifact writes.

Every file is written to a temporary sibling and renamed into place, so readers never see a
partial artifact. CSV is comma-separated with a header row, '.' decimals and LF line endings.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import pandas as pd
import structlog
from pydantic import BaseModel

from reap.config import OutputFormat

logger: structlog.BoundLogger = structlog.get_logger(__name__)


def atomic_write_text(path: Path, text: str) -> Path:
    """Write ``text`` to ``path`` via temp file + rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    tmp = Path(tmp_name)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        tmp.replace(path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise
    logger.info("reap.io.written", path=str(path), bytes=len(text.encode("utf-8")))
    return path


def frame_text(frame: pd.DataFrame, fmt: OutputFormat) -> str:
    if fmt is OutputFormat.JSON:
        return frame.to_json(orient="records", indent=2, double_precision=15) + "\n"
    return frame.to_csv(index=False, lineterminator="\n")


def write_table(frame: pd.DataFrame, directory: Path, stem: str, fmt: OutputFormat) -> Path:
    """Write a table as ``<directory>/<stem>.<fmt>``."""
    return atomic_write_text(directory / f"{stem}.{fmt.value}", frame_text(frame, fmt))


def write_model(model: BaseModel, path: Path) -> Path:
    """Write a pydantic model as indented JSON (wire aliases)."""
    return atomic_write_text(path, model.model_dump_json(indent=2, by_alias=True) + "\n")
