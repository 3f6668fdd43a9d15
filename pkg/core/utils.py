"""
Utility functions for core functionality: report envelopes, canonical JSON,
CSV output and content hashes.
"""
import csv
import hashlib
import json
import logging
import math
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)


def to_jsonable(value):
    """
    Convert numpy scalars/arrays, complex numbers and dataclass-like objects
    into plain JSON types.

    Complex numbers become `[re, im]`. Non-finite floats become the strings
    "inf", "-inf" and "nan" so that reports stay valid JSON.
    """
    if isinstance(value, dict):
        return {str(key): to_jsonable(val) for key, val in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(val) for val in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [to_jsonable(float(value.real)), to_jsonable(float(value.imag))]
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return 'nan'
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return value
    if hasattr(value, 'as_dict'):
        return to_jsonable(value.as_dict())
    return value


def canonical_json(data):
    """Serialize with sorted keys and fixed separators; equal inputs give equal bytes."""
    return json.dumps(to_jsonable(data), sort_keys=True, indent=2, separators=(',', ': ')) + '\n'


def content_hash(data):
    """SHA-256 of the canonical JSON form of `data`."""
    return hashlib.sha256(canonical_json(data).encode('utf-8')).hexdigest()


def file_hash(path):
    digest = hashlib.sha256()
    with open(path, 'rb') as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b''):
            digest.update(chunk)
    return digest.hexdigest()


def write_json(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(data), encoding='utf-8')
    logger.info("wrote %s", path)
    return path


def write_csv(path, header, rows):
    """
    Write rows under a header. Floats use `repr` so that repeated runs with
    the same seed produce byte-identical files.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([_csv_cell(cell) for cell in row])
    logger.info("wrote %s", path)
    return path


def _csv_cell(cell):
    if isinstance(cell, (bool, np.bool_)):
        return int(cell)
    if isinstance(cell, (float, np.floating)):
        return repr(float(cell))
    if isinstance(cell, np.integer):
        return int(cell)
    return cell


def write_manifest(out_dir, files):
    """
    List every produced file with its SHA-256. The manifest itself is
    written last and is not listed.
    """
    out_dir = Path(out_dir)
    entries = {
        str(Path(path).relative_to(out_dir)): file_hash(path)
        for path in sorted(set(map(Path, files)))
    }
    return write_json(out_dir / 'manifest.json', {'files': entries})


def parse_complex(value):
    """Accept `[re, im]`, a number, or a Python complex literal string."""
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ValueError("complex values are written as [re, im]")
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, str):
        return complex(value.replace(' ', '').replace('i', 'j'))
    return complex(value)


class ReportResponseMixin:
    """
    Mixin that provides standard methods to build success and failure
    report envelopes.

    The envelope format is the same for every subcommand:
    {
        "success": <bool>,
        "status": "success" | "failure",
        "exit_code": <process exit status>,
        "message": <optional message>,
        "data": <optional payload>
    }
    """

    __SUCCESS = "success"
    __FAILURE = "failure"

    @classmethod
    def success_report(cls, data=None, message=None, **kwargs):
        report = {
            'success': True,
            'status': cls.__SUCCESS,
            'exit_code': 0,
        }
        if message is not None:
            report['message'] = message

        for key, val in kwargs.items():
            report[key] = val

        if data is not None:
            report['data'] = data
        return report

    @classmethod
    def failure_report(cls, data=None, message=None, exit_code=1):
        report = {
            'success': False,
            'status': cls.__FAILURE,
            'exit_code': exit_code,
        }
        if message is not None:
            report['message'] = message

        if data is not None:
            report['data'] = data
        return report
