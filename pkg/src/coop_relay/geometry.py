"""Poisson point processes on a finite observation window.

The network lives on a rectangle that stands in for the infinite plane.
Nodes are a realization of a homogeneous PPP; each slot they split into
transmitters and receivers by independent coin flips. The default window is
elongated along +x (the source to destination axis) with the source placed
a quarter of the width from the left edge, and it is sized from the
single-hop decoding-cell area so that edge truncation of the interference
field is negligible at every point the experiments evaluate.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import ParameterError

# Margin between any experiment evaluation point and the window edge,
# in units of sqrt(single-hop cell area).
DEFAULT_MARGIN_CELLS = 8.0


@dataclass(frozen=True)
class Window:
    """Axis-aligned rectangular observation window (meters)."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ParameterError(
                f"degenerate window [{self.x_min},{self.x_max}]x[{self.y_min},{self.y_max}]"
            )

    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def contains(self, x, y) -> np.ndarray:
        return (
            (np.asarray(x) >= self.x_min)
            & (np.asarray(x) <= self.x_max)
            & (np.asarray(y) >= self.y_min)
            & (np.asarray(y) <= self.y_max)
        )

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.x_min, self.x_max, self.y_min, self.y_max)


def default_window(cell_area: float, margin_cells: float = DEFAULT_MARGIN_CELLS) -> Window:
    """Build the default window for a given single-hop cell area.

    The rectangle is 4m x 2m margins wide (m = ``margin_cells`` cell side
    lengths), with the origin a quarter of the width from the left edge, so
    the chain advancing to +x keeps at least one full margin of interferers
    around every hop.
    """
    if cell_area <= 0:
        raise ParameterError("cell_area must be positive")
    m = margin_cells * float(np.sqrt(cell_area))
    return Window(-m, 3.0 * m, -m, m)


@dataclass(frozen=True)
class NodeSet:
    """A realized point pattern inside a window.

    ``positions`` is an (n, 2) float array. ``intensity`` records the
    generating intensity in nodes per square meter (0 for hand-built sets).
    """

    positions: np.ndarray
    intensity: float
    window: Window

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "positions", pos)
        if pos.size and not self.window.contains(pos[:, 0], pos[:, 1]).all():
            raise ParameterError("node positions must lie inside the window")

    def __len__(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class RoleAssignment:
    """One slot's TX/RX split: ``tx_mask[i]`` is True when node i transmits."""

    tx_mask: np.ndarray
    p: float

    def __post_init__(self):
        object.__setattr__(self, "tx_mask", np.asarray(self.tx_mask, dtype=bool))

    @property
    def rx_mask(self) -> np.ndarray:
        return ~self.tx_mask

    def tx_indices(self) -> np.ndarray:
        return np.nonzero(self.tx_mask)[0]

    def rx_indices(self) -> np.ndarray:
        return np.nonzero(~self.tx_mask)[0]


def sample_ppp(intensity: float, window: Window, rng: np.random.Generator) -> NodeSet:
    """Sample a homogeneous PPP of the given intensity on the window.

    The count is Poisson(intensity * area) and positions are i.i.d. uniform.
    """
    if intensity <= 0:
        raise ParameterError(f"intensity must be positive, got {intensity}")
    n = int(rng.poisson(intensity * window.area()))
    xs = window.x_min + rng.random(n) * (window.x_max - window.x_min)
    ys = window.y_min + rng.random(n) * (window.y_max - window.y_min)
    return NodeSet(np.column_stack([xs, ys]), intensity, window)


def assign_roles(nodes: NodeSet, p: float, rng: np.random.Generator) -> RoleAssignment:
    """Draw one slot of independent TX (probability p) / RX roles."""
    if not 0.0 < p < 1.0:
        raise ParameterError(f"medium access probability must be in (0, 1), got {p}")
    return RoleAssignment(rng.random(len(nodes)) < p, p)


def add_conditioned_node(nodes: NodeSet, position: Sequence[float]) -> NodeSet:
    """Append a deterministic node (Slivnyak conditioning; the appended node
    gets the highest index). Used to pin the reference source at the origin."""
    x, y = float(position[0]), float(position[1])
    if not bool(nodes.window.contains(x, y)):
        raise ParameterError(f"conditioned node {position} lies outside the window")
    pos = np.vstack([nodes.positions, [x, y]]) if len(nodes) else np.array([[x, y]])
    return NodeSet(pos, nodes.intensity, nodes.window)
