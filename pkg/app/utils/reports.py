"""CSV and JSON report writers"""
import csv
import io
import json
import os
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Sequence

import numpy as np
from pydantic import BaseModel

from app.utils.errors import ConfigError


def format_cell(value: Any) -> str:
    """17 significant digits for floats, '.' decimal, empty for missing"""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, Enum):
        return str(value.value)
    return str(value)


def render_csv(fieldnames: Sequence[str], rows: Iterable[Dict[str, Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(fieldnames), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({key: format_cell(row.get(key)) for key in fieldnames})
    return buffer.getvalue()


def to_jsonable(obj: Any) -> Any:
    if isinstance(obj, BaseModel):
        return obj.model_dump(mode="json")
    if isinstance(obj, dict):
        return {(k.value if isinstance(k, Enum) else str(k)): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def render_json(document: Any) -> str:
    return json.dumps(to_jsonable(document), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _write_text(path: str, text: str) -> Path:
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        with target.open("w", encoding="utf-8", newline="") as f:
            f.write(text)
    except OSError as e:
        raise ConfigError(f"Cannot write output '{path}': {e.strerror or e}")
    return target


def write_csv(path: Optional[str], fieldnames: Sequence[str], rows: Iterable[Dict[str, Any]]) -> Optional[Path]:
    if not path:
        return None
    return _write_text(path, render_csv(fieldnames, rows))


def write_json(path: Optional[str], document: Any) -> Optional[Path]:
    if not path:
        return None
    return _write_text(path, render_json(document))


def check_writable(path: Optional[str]) -> None:
    """Fail before a long run when the output directory cannot be used"""
    if not path:
        return
    target = Path(path)
    if target.is_dir():
        raise ConfigError(f"Output path '{path}' is a directory")
    probe = target.parent
    while not probe.exists():
        probe = probe.parent
    if not probe.is_dir():
        raise ConfigError(f"Output path '{path}' is below a file")
    if not os.access(probe, os.W_OK):
        raise ConfigError(f"Output directory of '{path}' is not writable")
