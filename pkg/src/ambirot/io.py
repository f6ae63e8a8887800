"""CSV datasets and JSON reports.

A dataset file has a two-line header followed by one record per row::

    # format=quaternion family=watson kappa=20 seed=1
    # group=C2
    1,0,0,0
    ...

``format`` is ``quaternion`` (4 columns ``w, x, y, z``) or ``matrix``
(9 columns, row-major). Paired data have two column blocks and a group
line such as ``# group=C2,O``. Further ``key=value`` entries on the
first line record provenance.
"""

from dataclasses import dataclass, field
import json
import math
import sys

import numpy as np

from .exceptions import AmbirotError
from .rotations import AmbiguousSample, matrix_to_quaternion, quaternion_to_matrix
from .validation import check_group, check_rotations

__all__ = ["Dataset", "DatasetError", "read_dataset", "write_dataset", "format_dataset", "dumps_json"]

FORMATS = {"quaternion": 4, "matrix": 9}


class DatasetError(AmbirotError, ValueError):
    """A dataset file could not be parsed."""


@dataclass
class Dataset:
    """Parsed dataset.

    Attributes
    ----------
    format : str
    samples : list of AmbiguousSample
        One sample, or two aligned samples for paired data.
    meta : dict
        Provenance entries from the header.
    """

    format: str
    samples: list
    meta: dict = field(default_factory=dict)

    @property
    def paired(self):
        return len(self.samples) == 2

    @property
    def groups(self):
        return [s.group for s in self.samples]


def _parse_header(line, lineno):
    if not line.startswith("#"):
        raise DatasetError(f"line {lineno}: expected a '#' header line")
    out = {}
    for tok in line[1:].split():
        if "=" not in tok:
            raise DatasetError(f"line {lineno}: malformed header entry {tok!r}")
        k, v = tok.split("=", 1)
        out[k] = v
    return out


def _record(sample, fmt):
    if fmt == "quaternion":
        return matrix_to_quaternion(sample.reps)
    return sample.reps.reshape(len(sample), 9)


def format_dataset(samples, fmt="quaternion", meta=None):
    """Dataset text for one sample or a pair of aligned samples."""
    if isinstance(samples, AmbiguousSample):
        samples = [samples]
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {sorted(FORMATS)}")
    if len(samples) == 2 and len(samples[0]) != len(samples[1]):
        raise ValueError("paired samples differ in length")
    head = [f"format={fmt}"] + [f"{k}={v}" for k, v in (meta or {}).items()]
    lines = ["# " + " ".join(head), "# group=" + ",".join(s.group.name for s in samples)]
    block = np.concatenate([_record(s, fmt) for s in samples], axis=1)
    for row in block:
        lines.append(",".join("%.17g" % (x + 0.0) for x in row))
    return "\n".join(lines) + "\n"


def write_dataset(path, samples, fmt="quaternion", meta=None):
    """Write a dataset file; returns the samples as they will be read back.

    Quaternion text is written at 17 significant digits, so reading the
    file reproduces the returned samples exactly.
    """
    text = format_dataset(samples, fmt, meta)
    with open(path, "w") as fh:
        fh.write(text)
    return parse_dataset(text).samples


def parse_dataset(text, fmt=None, group=None):
    """Parse dataset text; see :func:`read_dataset`."""
    lines = text.splitlines()
    if len(lines) < 2:
        raise DatasetError("missing header: expected '# format=...' and '# group=...' lines")
    meta = _parse_header(lines[0], 1)
    ghead = _parse_header(lines[1], 2)
    file_fmt = meta.pop("format", None)
    if fmt is not None and file_fmt is not None and fmt != file_fmt:
        raise DatasetError(f"--format {fmt} does not match the file's format={file_fmt}")
    fmt = fmt or file_fmt
    if fmt not in FORMATS:
        raise DatasetError(f"unknown or missing format {fmt!r}")
    tags = ghead.get("group")
    if group is not None:
        req = group.split(",") if isinstance(group, str) else [g.name for g in np.atleast_1d(group)]
        if tags is not None and [check_group(t) for t in tags.split(",")] != [check_group(t) for t in req]:
            raise DatasetError(f"--group {','.join(req)} does not match the file's group={tags}")
        tags = ",".join(req)
    if tags is None:
        raise DatasetError("missing group tag")
    groups = [check_group(t) for t in tags.split(",")]
    width = FORMATS[fmt]
    rows = []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip() or line.startswith("#"):
            continue
        try:
            vals = [float(x) for x in line.split(",")]
        except ValueError:
            raise DatasetError(f"line {lineno}: cannot parse numbers from {line!r}") from None
        if len(vals) != width * len(groups):
            raise DatasetError(f"line {lineno}: expected {width * len(groups)} values, got {len(vals)}")
        if not all(math.isfinite(v) for v in vals):
            raise DatasetError(f"line {lineno}: non-finite value")
        rows.append(vals)
    if not rows:
        raise DatasetError("no data rows")
    arr = np.array(rows)
    samples = []
    for j, g in enumerate(groups):
        part = arr[:, j * width:(j + 1) * width]
        try:
            reps = check_rotations(part, row_offset=3) if fmt == "matrix" else _quaternions(part)
        except ValueError as exc:
            raise DatasetError(str(exc)) from None
        samples.append(AmbiguousSample(reps, g))
    return Dataset(fmt, samples, meta)


def _quaternions(part):
    norms = np.linalg.norm(part, axis=1)
    bad = np.flatnonzero(np.abs(norms - 1.0) > 1e-6)
    if bad.size:
        raise ValueError(f"row {bad[0] + 3}: quaternion norm {norms[bad[0]]:.6g} is not 1")
    return quaternion_to_matrix(part)


def read_dataset(path, fmt=None, group=None):
    """Read a dataset file.

    Parameters
    ----------
    path : str
        File path, or ``'-'`` for standard input.
    fmt : {'quaternion', 'matrix'}, optional
        Must agree with the header when both are given.
    group : str, optional
        Group tag(s); must agree with the header when both are given.

    Returns
    -------
    Dataset
    """
    if path == "-":
        text = sys.stdin.read()
    else:
        with open(path) as fh:
            text = fh.read()
    return parse_dataset(text, fmt, group)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps_json(obj):
    """Deterministic JSON text; non-finite floats become ``null``."""
    return json.dumps(_clean(obj), indent=1, sort_keys=True)
