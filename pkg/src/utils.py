"""
Utility functions shared by the CLI and the API.
"""
import json
import math
import os
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

# Significant digits used for every number written to a report.
SIGNIFICANT_DIGITS = 15


def read_source(file_path: str) -> bytes:
    """
    Read a tape or spec file as raw bytes.

    Args:
        file_path: Path to the file

    Returns:
        File content
    """
    if not os.path.exists(file_path):
        raise FileNotFoundError(f"File not found: {file_path}")
    with open(file_path, "rb") as file:
        return file.read()


def round_sig(value: Optional[float]) -> Optional[float]:
    """
    Round to SIGNIFICANT_DIGITS significant digits.

    Non-finite values become None so they serialize as JSON null.
    """
    if value is None:
        return None
    value = float(value)
    if not math.isfinite(value):
        return None
    return float(f"{value:.{SIGNIFICANT_DIGITS}g}")


def to_jsonable(obj: Any) -> Any:
    """Convert report structures (numpy, enums, tuples) into JSON-ready values."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return round_sig(obj)
    return obj


def format_output(result: Dict[str, Any], pretty: bool = True) -> str:
    """
    Format a report as JSON with stable key order and rounded numbers.

    Args:
        result: Report dictionary
        pretty: Whether to pretty-print the JSON

    Returns:
        JSON string terminated by a newline
    """
    payload = to_jsonable(result)
    if pretty:
        return json.dumps(payload, indent=2, ensure_ascii=False, allow_nan=False) + "\n"
    return json.dumps(payload, ensure_ascii=False, allow_nan=False) + "\n"


def format_csv(rows: List[Dict[str, Any]], columns: Optional[Sequence[str]] = None) -> str:
    """
    Format flat report rows as CSV, one row per record.

    List-valued cells are expanded into `<name>_<i>` columns (1-based); a
    null in such a column leaves all of its cells empty.
    """
    rows = [to_jsonable(row) for row in rows]
    widths: Dict[str, int] = {}
    for row in rows:
        for key, value in row.items():
            if isinstance(value, list):
                widths[key] = max(widths.get(key, 0), len(value))

    flat = []
    for row in rows:
        out: Dict[str, Any] = {}
        for key, value in row.items():
            if key in widths:
                items = value if isinstance(value, list) else []
                for i in range(widths[key]):
                    out[f"{key}_{i + 1}"] = items[i] if i < len(items) else None
            else:
                out[key] = value
        flat.append(out)
    frame = pd.DataFrame(flat, columns=list(columns) if columns else None)
    return frame.to_csv(
        index=False,
        lineterminator="\n",
        float_format=f"%.{SIGNIFICANT_DIGITS}g",
        na_rep="",
    )


def save_output(content: str, output_path: str) -> None:
    """
    Save rendered output to a file.

    Args:
        content: Rendered JSON or CSV text
        output_path: Path to save the output
    """
    directory = os.path.dirname(output_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(output_path, "w", encoding="utf-8", newline="") as f:
        f.write(content)
