import numpy as np
from numpy.typing import NDArray

type Vector = NDArray[np.float64]
type Matrix = NDArray[np.float64]
type FileStr = str
type Row = list[str | int | float | None]
type Triplet = tuple[int, int, int]
