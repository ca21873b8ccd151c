import logging
import os
import tempfile
from pathlib import Path
from typing import List, Union

import numpy as np

from ._exceptions import InvalidArgument
from ._types import Array, ArrayLike, InputSlice, SliceLike

logger = logging.getLogger(__name__)


def as_inputs(X: ArrayLike, name: str = "X") -> Array:
    """
    Coerce inputs to a finite N×D float matrix. A 1-D array is one column.
    """
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr[:, None]
    elif arr.ndim != 2:
        raise InvalidArgument(f"{name} must be at most 2-dimensional, got {arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgument(f"{name} contains non-finite entries")
    return arr


def as_vector(y: ArrayLike, name: str = "y") -> Array:
    arr = np.asarray(y, dtype=float).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgument(f"{name} contains non-finite entries")
    return arr


def normalize_slice(columns: SliceLike) -> InputSlice:
    """
    Turn an int, a sequence of ints or a ``slice`` with explicit stop into a
    sorted tuple of column indices. ``None`` means "every column".
    """
    if columns is None:
        return None
    if isinstance(columns, slice):
        if columns.stop is None:
            raise InvalidArgument("open-ended slices need an explicit stop")
        columns = range(*columns.indices(columns.stop))
    if isinstance(columns, (int, np.integer)):
        columns = [int(columns)]
    out = tuple(int(c) for c in columns)
    if not out:
        raise InvalidArgument("an input slice must name at least one column")
    if any(c < 0 for c in out):
        raise InvalidArgument(f"negative column index in slice {out}")
    if len(set(out)) != len(out):
        raise InvalidArgument(f"repeated column index in slice {out}")
    return out


def take_columns(X: Array, columns: InputSlice, expected: int, owner: str) -> Array:
    if columns is None:
        if X.shape[1] != expected:
            raise InvalidArgument(
                f"{owner} expects {expected} input column(s), got {X.shape[1]}"
            )
        return X
    if max(columns) >= X.shape[1]:
        raise InvalidArgument(
            f"{owner} reads columns {columns} but inputs have {X.shape[1]}"
        )
    if len(columns) != expected:
        raise InvalidArgument(
            f"{owner} expects {expected} input column(s), slice has {len(columns)}"
        )
    return X[:, list(columns)]


def derive_seeds(seed: int, n: int) -> List[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(n)


def atomic_write(path: Union[str, Path], data: Union[bytes, str]) -> Path:
    """
    Write ``data`` next to ``path`` in a temporary file, then rename over it.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = data.encode("utf8") if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.debug("wrote %s (%i bytes)", path, len(payload))
    return path
