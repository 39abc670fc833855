"""Caputo initial value problems, uniform grids and trajectories."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "FdeProblem",
    "LinearTestProblem",
    "Trajectory",
    "TrajectoryKind",
    "UniformGrid",
    "make_grid",
]

Rhs = Callable[[float, float], float]


@dataclass(frozen=True)
class FdeProblem:
    """``D^alpha y(t) = rhs(t, y(t))`` with ``y(0) = y0`` (Caputo derivative).

    ``alpha == 1`` is accepted only so that schemes can be checked against
    their classical ODE counterparts; see :attr:`is_classical`.
    """

    alpha: float
    rhs: Rhs
    y0: float
    label: str = "fde"

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in (0, 1), or equal 1 for reduction tests; got {self.alpha!r}")
        if not math.isfinite(self.y0):
            raise ValueError(f"y0 must be finite, got {self.y0!r}")

    @property
    def is_classical(self) -> bool:
        return self.alpha == 1.0

    def f(self, t: float, y: float) -> float:
        try:
            value = self.rhs(t, y)
        except Exception as exc:
            raise RuntimeError(f"rhs evaluation failed at t={t!r}, y={y!r} for problem {self.label!r}") from exc
        return float(value)


class _LinearRhs:
    # picklable stand-in for ``lambda t, y: lam * y``
    __slots__ = ("lam",)

    def __init__(self, lam: float) -> None:
        self.lam = lam

    def __call__(self, t: float, y: float) -> float:
        return self.lam * y

    def __repr__(self) -> str:
        return f"_LinearRhs({self.lam!r})"


@dataclass(frozen=True)
class LinearTestProblem:
    """``D^alpha y = lam * y``, ``y(0) = y0``; solution ``y0 * E_alpha(lam * t**alpha)``."""

    alpha: float
    lam: float
    y0: float

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha!r}")
        if not (math.isfinite(self.lam) and math.isfinite(self.y0)):
            raise ValueError("lam and y0 must be finite")

    def as_fde(self) -> FdeProblem:
        return FdeProblem(
            alpha=self.alpha,
            rhs=_LinearRhs(self.lam),
            y0=self.y0,
            label=f"linear(alpha={self.alpha:g}, lambda={self.lam:g}, y0={self.y0:g})",
        )


@dataclass(frozen=True)
class UniformGrid:
    """Nodes ``t_n = n * h`` for ``n = 0..n_steps``."""

    h: float
    n_steps: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.h) and self.h > 0.0):
            raise ValueError(f"h must be positive and finite, got {self.h!r}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be positive, got {self.n_steps!r}")

    @property
    def n_nodes(self) -> int:
        return self.n_steps + 1

    @property
    def t_max(self) -> float:
        return self.n_steps * self.h

    def t(self, n: int) -> float:
        return n * self.h

    def nodes(self) -> np.ndarray:
        # products, never cumulative sums: t_N must not depend on summation order
        return np.arange(self.n_nodes, dtype=float) * self.h


def make_grid(h: float, t_max: float) -> UniformGrid:
    """Uniform grid with step ``h`` covering ``[0, t_max]`` (last node ``<= t_max``)."""
    if not (math.isfinite(h) and math.isfinite(t_max)):
        raise ValueError("h and t_max must be finite")
    if h <= 0.0:
        raise ValueError(f"h must be positive, got {h!r}")
    if t_max < h:
        raise ValueError(f"t_max ({t_max!r}) must be at least h ({h!r})")
    return UniformGrid(h=h, n_steps=math.floor(t_max / h + 1e-9))


class TrajectoryKind(str, enum.Enum):
    NUMERIC = "numeric"
    EXACT = "exact"


@dataclass(frozen=True)
class Trajectory:
    """Values on a grid.

    A numeric run that overflowed is cut at its last finite entry, so
    ``len(values)`` can be smaller than ``grid.n_nodes``; ``diverged`` is then set.
    """

    grid: UniformGrid
    values: np.ndarray
    kind: TrajectoryKind = TrajectoryKind.NUMERIC
    diverged: bool = False
    label: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if values.ndim != 1:
            raise ValueError("trajectory values must be one-dimensional")
        if len(values) > self.grid.n_nodes:
            raise ValueError(f"{len(values)} values for a grid with {self.grid.n_nodes} nodes")
        if len(values) < self.grid.n_nodes and not self.diverged:
            raise ValueError("only a diverged trajectory may be shorter than its grid")

    @property
    def truncated(self) -> bool:
        return len(self.values) < self.grid.n_nodes

    def times(self) -> np.ndarray:
        return self.grid.nodes()[: len(self.values)]

    def __len__(self) -> int:
        return len(self.values)
