from typing import Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt

Array = npt.NDArray[np.float64]
ArrayLike = Union[npt.ArrayLike, Array]
InputSlice = Optional[Tuple[int, ...]]
SliceLike = Union[int, Sequence[int], slice, None]
Bounds = Tuple[float, float]
Fixed = Union[bool, Sequence[str]]
