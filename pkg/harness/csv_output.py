"""
CSV emission and loading.
Every file starts with '# key = value' lines (the resolved configuration and
run metadata), followed by a pandas table with 17 significant digits.
"""

import io
import logging
import os
from typing import Dict, Iterable, Tuple

import pandas as pd
from filelock import FileLock

from hiding.errors import ConfigError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'


def _header_value(value) -> str:
    if isinstance(value, float):
        return FLOAT_FORMAT % value
    return str(value)


def render_csv(frame: pd.DataFrame, header: Iterable[Tuple[str, object]]) -> str:
    buffer = io.StringIO()
    for key, value in header:
        buffer.write(f"# {key} = {_header_value(value)}\n")
    frame.to_csv(buffer, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    return buffer.getvalue()


def write_csv(path: str, frame: pd.DataFrame, header: Iterable[Tuple[str, object]]) -> str:
    """Write under an exclusive <path>.lock so a single writer owns the file."""
    text = render_csv(frame, header)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with FileLock(path + '.lock'):
        with open(path, 'w', encoding='utf-8', newline='') as f:
            f.write(text)
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def read_csv(path: str) -> Tuple[Dict[str, str], pd.DataFrame]:
    """Header metadata plus the table."""
    header = {}
    try:
        with open(path, 'r', encoding='utf-8') as f:
            lines = f.readlines()
    except FileNotFoundError:
        raise ConfigError(f"input file not found: {path}") from None
    body_start = 0
    for body_start, line in enumerate(lines):
        if not line.startswith('#'):
            break
        key, sep, value = line[1:].partition('=')
        if sep:
            header[key.strip()] = value.strip()
    else:
        body_start = len(lines)
    body = ''.join(lines[body_start:])
    if not body.strip():
        raise ConfigError(f"{path} has no table")
    return header, pd.read_csv(io.StringIO(body), float_precision='round_trip')


def require_columns(frame: pd.DataFrame, columns: Iterable[str], path: str) -> None:
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ConfigError(f"{path} lacks column(s): {', '.join(missing)}")
