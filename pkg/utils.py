import csv
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List

import numpy as np


def _fieldnames(rows: List[Dict[str, Any]]) -> List[str]:
    """Union of keys in first-seen order."""
    names: Dict[str, None] = {}
    for row in rows:
        names.update(dict.fromkeys(row))
    return list(names)


def _cell(value: Any) -> Any:
    if isinstance(value, (bool, np.bool_)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value


def write_csv(file: str | Path, rows: Iterable[Dict[str, Any]]) -> Path:
    """Write records to a CSV file with a header; missing cells stay empty."""
    rows = list(rows)
    path = Path(file)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open(mode="w", encoding="utf-8", newline="") as csv_file:
        writer = csv.DictWriter(csv_file, fieldnames=_fieldnames(rows), restval="")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(v) for k, v in row.items()})
    return path


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "tolist"):
        return _jsonable(value.tolist())
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


def write_json(file: str | Path, data: Dict[str, Any]) -> Path:
    """Write a dictionary to a JSON file (non-finite floats become strings)."""
    path = Path(file)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True), encoding="utf-8")
    return path


def read_json(file: str | Path) -> Dict[str, Any]:
    """Read a JSON object from a file."""
    return json.loads(Path(file).read_text(encoding="utf-8"))
