# core/utils/artifacts.py

import csv
import hashlib
import json
import logging
from fractions import Fraction
from pathlib import Path

import numpy as np

from ..lattice import LatticeField
from .error_handler import ConfigError

logger = logging.getLogger(__name__)


def to_plain(value):
    """JSON-safe copy of numpy scalars, Fractions, enums, tuples and Paths"""
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    if hasattr(value, 'value') and isinstance(getattr(value, 'value'), str):
        return value.value
    if isinstance(value, float) and not np.isfinite(value):
        return repr(value)
    return value


def canonical_json(payload):
    return json.dumps(to_plain(payload), sort_keys=True, indent=2)


def content_hash(payload):
    return hashlib.sha256(json.dumps(to_plain(payload), sort_keys=True).encode('utf-8')).hexdigest()


def write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(payload) + '\n', encoding='utf-8')
    return path


def read_json(path):
    return json.loads(Path(path).read_text(encoding='utf-8'))


def write_report(path, config, result):
    """JSON report holding the run config, the result and a content hash of both"""
    body = {'config': config, 'result': result}
    body['content_hash'] = content_hash(body)
    return write_json(path, body)


def field_rows(field, include_boundary=False):
    domain = field.domain
    mask = domain.stored_mask if include_boundary else domain.interior_mask
    points = np.argwhere(mask) + domain.lower
    values = field.values[mask]
    # argwhere is row-major, so rows are already sorted lexicographically
    return points, values


def write_field_csv(field, path, include_boundary=False):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    points, values = field_rows(field, include_boundary)
    d = field.domain.d
    with path.open('w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle)
        writer.writerow([f"x{i + 1}" for i in range(d)] + ['value'])
        for point, value in zip(points, values):
            writer.writerow([int(c) for c in point] + ['%.17g' % float(value)])
    logger.debug(f"Wrote {len(values)} rows to {path}")
    return path


def read_field_csv(path, domain):
    """Read a field CSV onto `domain`; rows outside the truncation are rejected"""
    values = np.zeros(domain.shape, dtype=np.float64)
    with Path(path).open(newline='', encoding='utf-8') as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if len(header) != domain.d + 1 or header[-1] != 'value':
            raise ConfigError(f"{path} does not hold a {domain.d}-dimensional field")
        for row in reader:
            point = [int(c) for c in row[:-1]]
            inside, idx = domain.index([point])
            if not (inside[0] and domain.stored_mask[idx][0]):
                raise ConfigError(f"{path}: point {tuple(point)} lies outside the truncation")
            values[idx] = float(row[-1])
    return LatticeField(domain, values)


def write_rows(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)
    return path
