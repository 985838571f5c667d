"""
Output emission: CSV through pandas, JSON with the resolved config embedded,
and plain text for SVG charts. Nothing written here carries a timestamp.
"""

import json
from pathlib import Path

import numpy as np
import pandas as pd

CSV_FLOAT_FORMAT = '%.17g'


class _NumpyEncoder(json.JSONEncoder):
    def default(self, o):
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.bool_):
            return bool(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, Path):
            return str(o)
        return super().default(o)


def _prepare(path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def to_json(payload):
    return json.dumps(payload, cls=_NumpyEncoder, indent=2, sort_keys=True) + "\n"


def write_json(path, payload, config=None):
    """
    Write payload as JSON, adding the resolved config under "config".

    Returns:
        Path written
    """
    path = _prepare(path)
    payload = dict(payload)
    if config is not None:
        payload['config'] = config.to_dict()
    path.write_text(to_json(payload))
    return path


def write_csv(path, rows):
    """Write a DataFrame (or list of row dicts) with full float precision."""
    path = _prepare(path)
    frame = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(rows)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
    return path


def write_text(path, text):
    path = _prepare(path)
    path.write_text(text)
    return path
