"""
Plain-text artifacts: CSV datasets and predictions, mask grids and JSON
metrics reports. Every writer goes through ``atomic_write``.
"""
import csv
import io
import json
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ._exceptions import InvalidArgument, ParseError
from ._metrics import REPORT_SCHEMA_VERSION, MetricsReport
from ._models import Prediction, TrainingSet, Trajectory
from ._types import Array, ArrayLike
from ._utils import as_inputs, atomic_write

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

FLOAT_FORMAT = "%.17g"
MASK_INSIDE = "."
MASK_OUTSIDE = "#"


def _format(value: float) -> str:
    return FLOAT_FORMAT % value


def _write_table(path: PathLike, header: Sequence[str], table: Array) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in table:
        writer.writerow([_format(v) for v in row])
    return atomic_write(path, buf.getvalue())


def _read_table(path: PathLike) -> Tuple[List[str], Array]:
    with open(path, newline="", encoding="utf8") as f:
        rows = list(csv.reader(f))
    if not rows or not any(h.strip() for h in rows[0]):
        raise ParseError("missing header row", line=1)
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise ParseError(f"duplicate column names in header {header}", line=1)
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(
                f"expected {len(header)} fields, found {len(row)}", line=lineno
            )
        try:
            values.append([float(v) for v in row])
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from exc
    if not values:
        raise ParseError("no data rows", line=len(rows) + 1)
    return header, np.asarray(values, dtype=float)


def _input_names(n: int, names: Optional[Sequence[str]]) -> List[str]:
    if names is None:
        return [f"x{d}" for d in range(n)]
    names = list(names)
    if len(names) != n:
        raise InvalidArgument(f"{len(names)} column name(s) for {n} input column(s)")
    return names


def write_training_set(
    path: PathLike, data: TrainingSet, target: str = "y"
) -> Path:
    """
    Inputs first, target last. Column names come from ``data.meta["columns"]``
    when present.
    """
    header = _input_names(data.n_dims, data.meta.get("columns")) + [target]
    return _write_table(path, header, np.column_stack([data.X, data.y]))


def read_training_set(path: PathLike, target: Optional[str] = None) -> TrainingSet:
    """
    The last column is the target unless ``target`` names another one.
    """
    header, table = _read_table(path)
    if target is None:
        target = header[-1]
    elif target not in header:
        raise ParseError(
            f"target column {target!r} not found in header {header}",
            line=1,
            column=target,
        )
    index = header.index(target)
    inputs = [i for i in range(len(header)) if i != index]
    if not inputs:
        raise ParseError("no input columns besides the target", line=1)
    meta = {"columns": [header[i] for i in inputs], "source": str(path)}
    return TrainingSet(table[:, inputs], table[:, index], meta)


def write_trajectory(path: PathLike, trajectory: Trajectory) -> Path:
    n = trajectory.values.shape[1]
    header = ["time"] + ([f"y{i}" for i in range(n)] if n > 1 else ["y"])
    return _write_table(
        path, header, np.column_stack([trajectory.times, trajectory.values])
    )


def write_predictions(
    path: PathLike,
    X: ArrayLike,
    prediction: Prediction,
    names: Optional[Sequence[str]] = None,
    y_true: Optional[ArrayLike] = None,
    n_std: float = 3.0,
) -> Path:
    """
    One row per test input with the posterior mean, variance and the
    ±``n_std`` standard deviation band.
    """
    X = as_inputs(X)
    lower, upper = prediction.bands(n_std)
    header = _input_names(X.shape[1], names) + ["mean", "variance", "lower", "upper"]
    columns = [X, prediction.mean, prediction.variance, lower, upper]
    if y_true is not None:
        header.append("y_true")
        columns.append(np.asarray(y_true, dtype=float))
    return _write_table(path, header, np.column_stack(columns))


def read_predictions(path: PathLike) -> Tuple[Array, Prediction]:
    header, table = _read_table(path)
    for name in ("mean", "variance"):
        if name not in header:
            raise ParseError(f"column {name!r} not found", line=1, column=name)
    reserved = {"mean", "variance", "lower", "upper", "y_true"}
    inputs = [i for i, h in enumerate(header) if h not in reserved]
    prediction = Prediction(
        table[:, header.index("mean")], table[:, header.index("variance")]
    )
    return table[:, inputs], prediction


def write_columns(path: PathLike, **columns: ArrayLike) -> Path:
    """Named, equal-length vectors as a CSV table, in keyword order."""
    arrays = [np.asarray(v, dtype=float).reshape(-1) for v in columns.values()]
    if len({a.size for a in arrays}) > 1:
        raise InvalidArgument("all columns must have the same length")
    return _write_table(path, list(columns), np.column_stack(arrays))


def read_mask(path: PathLike) -> Array:
    """
    Mask grid text: one line per row ``r``, one character per column ``c``;
    '.' is inside the domain, '#' is masked.
    """
    with open(path, encoding="utf8") as f:
        lines = [line.rstrip("\r\n") for line in f]
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise ParseError("empty mask file", line=1)
    width = len(lines[0])
    rows = []
    for lineno, line in enumerate(lines, start=1):
        if len(line) != width:
            raise ParseError(
                f"row has {len(line)} cells, expected {width}", line=lineno
            )
        bad = set(line) - {MASK_INSIDE, MASK_OUTSIDE}
        if bad:
            raise ParseError(f"unexpected characters {sorted(bad)}", line=lineno)
        rows.append([c == MASK_INSIDE for c in line])
    return np.asarray(rows, dtype=bool)


def write_mask(path: PathLike, mask: ArrayLike) -> Path:
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise InvalidArgument("a mask must be 2-dimensional")
    text = "".join(
        "".join(MASK_INSIDE if v else MASK_OUTSIDE for v in row) + "\n"
        for row in mask
    )
    return atomic_write(path, text)


def dump_report(report: MetricsReport, with_runtime: bool = True) -> str:
    return (
        json.dumps(report.to_dict(with_runtime), sort_keys=True, indent=2) + "\n"
    )


def write_report(path: PathLike, report: MetricsReport) -> Path:
    return atomic_write(path, dump_report(report))


def read_report(path: PathLike) -> MetricsReport:
    with open(path, encoding="utf8") as f:
        text = f.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from exc
    if not isinstance(data, dict):
        raise ParseError("a report must be a JSON object", line=1)
    version = data.get("schema_version")
    if version != REPORT_SCHEMA_VERSION:
        raise ParseError(
            f"unsupported report schema_version {version!r}", column="schema_version"
        )
    try:
        return MetricsReport.from_dict(data)
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed report: {exc}") from exc


def read_inputs(
    path: PathLike, target: str = "y"
) -> Tuple[List[str], Array, Optional[Array]]:
    """
    Input columns of a dataset CSV, plus the target column when the header
    has one.
    """
    header, table = _read_table(path)
    if target not in header:
        return header, table, None
    index = header.index(target)
    inputs = [i for i in range(len(header)) if i != index]
    return [header[i] for i in inputs], table[:, inputs], table[:, index]
