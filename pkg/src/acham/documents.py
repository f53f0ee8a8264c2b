import json
import logging
import math
import os
from pathlib import Path

from .errors import SchemaError

logger = logging.getLogger(__name__)


def read_document(path):
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: invalid JSON ({e})") from e
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: top-level value must be a JSON object")
    return doc


def format_float(x, precision=None):
    if not math.isfinite(x):
        raise SchemaError(f"Cannot serialize non-finite number {x!r}")
    if precision is None:
        return x
    return float(f"{x:.{precision}g}")


def _rounded(value, precision):
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, float):
        return format_float(value, precision)
    if isinstance(value, dict):
        return {k: _rounded(v, precision) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_rounded(v, precision) for v in value]
    return value


def dumps(doc, precision=None):
    return json.dumps(_rounded(doc, precision), indent=2, ensure_ascii=False) + "\n"


def write_document(doc, path, precision=None):
    """Write ``doc`` as JSON through a temporary file so readers never see partial output."""
    path = Path(path)
    text = dumps(doc, precision)
    path.parent.mkdir(parents=True, exist_ok=True)
    temp_path = str(path) + ".tmp"
    try:
        with open(temp_path, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(temp_path, path)
    except Exception as e:
        logger.error(f"❌ Failed to write {path}: {e}")
        if os.path.exists(temp_path):
            os.remove(temp_path)
        raise
    logger.debug(f"Wrote {path}")
    return path
