from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform time grid ``t_k = k * horizon / n_steps`` for ``k = 0..n_steps``."""

    n_steps: int
    horizon: float

    def __post_init__(self):
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps!r}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon!r}")
        object.__setattr__(self, "n_steps", int(self.n_steps))
        object.__setattr__(self, "horizon", float(self.horizon))

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def refine(self, factor: int = 2) -> "Grid":
        return Grid(self.n_steps * factor, self.horizon)
