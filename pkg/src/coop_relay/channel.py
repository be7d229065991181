"""Path loss, Rayleigh fading and SIR computation.

Power-law path loss |v|^-alpha, unit-mean exponential power fading
(Rayleigh amplitude), and zero noise power: the network operates in the
interference-limited regime, so the decode statistic is a pure SIR. When a
receiver sees no interferer at all the SIR is the distinguished value
``INFINITE`` (float infinity), which propagates through ``mutual_info`` so
that decoding always succeeds at any finite code rate.

Fading gains are drawn lazily, one independent draw per (transmitter,
evaluation point, slot); nothing is ever stored as a dense matrix.
"""

import math
from typing import Optional, Sequence

import numpy as np

from .errors import ParameterError

INFINITE = math.inf


def path_gain(distance: float, alpha: float) -> float:
    """Power-law attenuation distance^-alpha.

    Raises for a zero distance: co-located transmitter/receiver pairs have
    no meaningful path gain and must be excluded by the caller.
    """
    if alpha <= 2.0:
        raise ParameterError(f"path loss exponent must exceed 2, got {alpha}")
    if distance <= 0.0:
        raise ParameterError(f"path gain is singular at distance {distance}")
    return float(distance) ** (-alpha)


def mutual_info(sir) -> float:
    """Per-block mutual information log2(1 + SIR) in bits per symbol."""
    s = np.asarray(sir, dtype=float)
    if np.any(s < 0):
        raise ParameterError("SIR must be non-negative")
    out = np.log2(1.0 + s)
    return float(out) if np.ndim(sir) == 0 else out


def sir_at(
    eval_point: Sequence[float],
    desired_tx: Sequence[float],
    interferers,
    alpha: float,
    rng: np.random.Generator,
) -> float:
    """Instantaneous SIR at a point, with fresh fading from ``rng``.

    ``interferers`` is an (n, 2) array (or empty) of co-channel transmitter
    positions; the desired transmitter must not appear in it. Returns
    ``INFINITE`` when the interferer list is empty.
    """
    v = np.asarray(eval_point, dtype=float)
    t = np.asarray(desired_tx, dtype=float)
    d0 = float(np.hypot(*(v - t)))
    if d0 <= 0.0:
        raise ParameterError("evaluation point coincides with the desired transmitter")
    ipos = np.asarray(interferers, dtype=float).reshape(-1, 2)
    if ipos.size and np.any(np.all(ipos == t, axis=1)):
        raise ParameterError("desired transmitter listed among interferers")
    signal = rng.standard_exponential() * path_gain(d0, alpha)
    if ipos.shape[0] == 0:
        return INFINITE
    d = np.hypot(ipos[:, 0] - v[0], ipos[:, 1] - v[1])
    if np.any(d <= 0.0):
        raise ParameterError("an interferer coincides with the evaluation point")
    interference = float(np.sum(rng.standard_exponential(d.size) * d ** (-alpha)))
    return signal / interference


def sir_field(
    eval_points: np.ndarray,
    desired_tx: Sequence[float],
    interferers: np.ndarray,
    alpha: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Vector form of :func:`sir_at` for one slot.

    Draws the desired gains for all evaluation points first, then the
    (points x interferers) gain matrix, so results are reproducible for a
    given stream regardless of array sizes elsewhere.
    """
    pts = np.asarray(eval_points, dtype=float).reshape(-1, 2)
    t = np.asarray(desired_tx, dtype=float)
    d0 = np.hypot(pts[:, 0] - t[0], pts[:, 1] - t[1])
    if np.any(d0 <= 0.0):
        raise ParameterError("an evaluation point coincides with the desired transmitter")
    signal = rng.standard_exponential(pts.shape[0]) * d0 ** (-alpha)
    ipos = np.asarray(interferers, dtype=float).reshape(-1, 2)
    if ipos.shape[0] == 0:
        return np.full(pts.shape[0], INFINITE)
    dx = pts[:, 0:1] - ipos[None, :, 0]
    dy = pts[:, 1:2] - ipos[None, :, 1]
    r2 = dx * dx + dy * dy
    gains = rng.standard_exponential(r2.shape)
    interference = np.einsum("ij,ij->i", gains, r2 ** (-alpha / 2.0))
    return signal / interference
