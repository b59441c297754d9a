from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class GridFunction:
    """Values of a function on a uniform grid over a box domain.

    ``extents`` holds one (lo, hi) pair per axis. A periodic axis excludes
    its right endpoint (x_i = lo + i h); other axes include both ends.
    ``periodic`` is a bool for all axes or one flag per axis.
    """

    values: np.ndarray
    extents: tuple = ((0.0, 1.0),)
    periodic: tuple | bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if len(self.extents) != self.values.ndim:
            raise ValueError(f"{len(self.extents)} extents for a {self.values.ndim}-d array")
        if isinstance(self.periodic, bool):
            self.periodic = (self.periodic,) * self.values.ndim
        if not np.all(np.isfinite(self.values)):
            raise ValueError("GridFunction values must be finite")

    @property
    def resolution(self) -> tuple:
        return self.values.shape

    def axis(self, i: int) -> np.ndarray:
        lo, hi = self.extents[i]
        n = self.values.shape[i]
        if self.periodic[i]:
            return lo + (hi - lo) * np.arange(n) / n
        return np.linspace(lo, hi, n)
