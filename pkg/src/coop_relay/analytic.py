"""Closed-form approximation stack for expected progress and PRD.

The chain of quantities, for diversity order M and combining mode:

* ``spatial_factor``  G(a) = pi*d / sin(pi*d), d = 2/a
* ``ccdf_s``          P(S >= s) = exp(-A s^d) with A = lam*p*G(a)
* ``w1_area``         |W1| = pi / (A T), the mean single-block cell area
* ``d1_tilde``        expected progress of the first hop
* ``w2_lower_bound``  closed-form lower bound on the mean two-block cell
* ``cell_area_numeric``  Monte Carlo / quadrature mean cell area, any M
* ``dm_tilde``        recursive expected progress d~_1 .. d~_M
* ``prd_tilde``       R * lam * p * (d~_M - d~_{M-1})

Thresholds: T = (2^R - 1)^d, and the combining-specific constants
Tbar = (2^(R-1) - 1)^d and Ttil = (2^R - 2)^d, both clamped at zero for
R < 1 (a negative base corresponds to a certain decode, i.e. exponent 0).

The decay constant A defaults to lam*p*G(a), which is what every closed
form here is written in. The empirical SIR tail of a Rayleigh/PPP
interference field actually decays with an extra factor pi; construct
:class:`AnalyticParams` with ``exact_tail=True`` to use lam*p*pi*G(a)
instead (the optimizer does this, see ``optimizer.maximize_analytic``).
"""

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from . import seeds
from .errors import AccuracyError, ParameterError

MODE_NC = "NC"
MODE_IRC = "IRC"
MODE_RC = "RC"


def spatial_factor(alpha: float) -> float:
    """G(a) = pi*delta / sin(pi*delta) with delta = 2/a; diverges as a -> 2."""
    if alpha <= 2.0:
        raise ParameterError(f"spatial factor diverges for alpha <= 2 (got {alpha})")
    delta = 2.0 / alpha
    return math.pi * delta / math.sin(math.pi * delta)


@dataclass(frozen=True)
class AnalyticParams:
    """Network parameters plus the derived decay constants.

    ``exact_tail=False`` gives A = lam*p*G(alpha) (the constant the closed
    forms in this module are stated with); ``exact_tail=True`` multiplies A
    by pi, matching the measured SIR tail of the simulated field.
    """

    lam: float
    p: float
    alpha: float
    R: float
    exact_tail: bool = False

    def __post_init__(self):
        if self.lam <= 0:
            raise ParameterError(f"node intensity must be positive, got {self.lam}")
        if not 0.0 < self.p < 1.0:
            raise ParameterError(f"medium access probability must be in (0,1), got {self.p}")
        if self.alpha <= 2.0:
            raise ParameterError(f"path loss exponent must exceed 2, got {self.alpha}")
        if self.R <= 0.0:
            raise ParameterError(f"code rate must be positive, got {self.R}")

    @property
    def delta(self) -> float:
        return 2.0 / self.alpha

    @property
    def G(self) -> float:
        return spatial_factor(self.alpha)

    @property
    def A(self) -> float:
        scale = math.pi if self.exact_tail else 1.0
        return self.lam * self.p * self.G * scale

    @property
    def T(self) -> float:
        return (2.0 ** self.R - 1.0) ** self.delta

    @property
    def T_bar(self) -> float:
        return max(2.0 ** (self.R - 1.0) - 1.0, 0.0) ** self.delta

    @property
    def T_til(self) -> float:
        return max(2.0 ** self.R - 2.0, 0.0) ** self.delta

    def threshold(self, mode: str) -> float:
        """Second-block decay constant for the two-block bound."""
        if mode == MODE_RC:
            return self.T_til
        if mode == MODE_IRC:
            return self.T_bar
        raise ParameterError(f"two-block bound undefined for mode {mode!r}")


def ccdf_s(s, params: AnalyticParams):
    """Tail probability of the normalized signal variable S.

    exp(-A s^delta) for s >= 0 and exactly 1 for s < 0.
    """
    s_arr = np.asarray(s, dtype=float)
    out = np.where(s_arr < 0.0, 1.0, np.exp(-params.A * np.abs(s_arr) ** params.delta))
    return float(out) if np.ndim(s) == 0 else out


def sample_s(params: AnalyticParams, size, rng: np.random.Generator) -> np.ndarray:
    """Inverse-transform draws of S: (-ln U / A)^(1/delta)."""
    u = rng.random(size)
    return (-np.log(u) / params.A) ** (1.0 / params.delta)


def _poisson_max_factor(c: float) -> float:
    """E[max of a Poisson(c) number of U(0,1)] = 1 - (1 - e^-c)/c; 0 at c=0."""
    if c < 0:
        raise ParameterError("Poisson mean must be non-negative")
    if c == 0.0:
        return 0.0
    if c < 1e-8:
        return c / 2.0  # series limit, avoids 0/0 loss
    return 1.0 - (-math.expm1(-c)) / c


def w1_area(params: AnalyticParams) -> float:
    """Mean area of the single-block decoding cell, pi/(A T)."""
    return math.pi / (params.A * params.T)


def d1_tilde(params: AnalyticParams) -> float:
    """Closed-form approximation to the expected first-hop progress."""
    w1 = w1_area(params)
    c1 = params.lam * (1.0 - params.p) * w1 / 2.0
    return math.sqrt(w1) / 2.0 * _poisson_max_factor(c1)


def gaussian_pair_integral(c1: float, c2: float, d: float, A: float) -> float:
    """Integral of exp(-A(c1|v|^2 + c2|v - (d,0)|^2)) over the plane.

    Closed form exp(-A d^2 c1 c2/(c1+c2)) * pi/(A (c1+c2)). Symmetric in
    (c1, c2); requires c1 + c2 > 0 and A > 0 for convergence.
    """
    if A <= 0.0:
        raise ParameterError(f"decay constant A must be positive, got {A}")
    if c1 + c2 <= 0.0:
        raise ParameterError(f"c1 + c2 must be positive, got {c1 + c2}")
    return math.exp(-A * d * d * c1 * c2 / (c1 + c2)) * math.pi / (A * (c1 + c2))


def w2_lower_bound(params: AnalyticParams, mode: str) -> float:
    """Closed-form lower bound on the mean two-block cell area.

    Uses the first-hop offset d~_1 internally. The bound is derived for
    R >= 1 (unit threshold ratio); below that the clamped constants make it
    heuristic rather than a guaranteed bound.
    """
    d1 = d1_tilde(params)
    A, T = params.A, params.T
    U = params.threshold(mode)
    d1sq = d1 * d1
    return (math.pi / A) * (
        2.0 / T
        - math.exp(-A * T * d1sq / (1.0 + T)) / (1.0 + T)
        + math.exp(-A * U * d1sq / (1.0 + U)) / (1.0 + U)
        - math.exp(-A * T * U * d1sq / (T + U)) / (T + U)
    )


@dataclass(frozen=True)
class CellAreaSettings:
    """Resolution controls for the numeric cell-area integral."""

    n_radial: int = 48
    n_angular: int = 32
    n_samples: int = 128
    max_doublings: int = 3
    rel_tol: float = 1e-3
    extent: Optional[float] = None  # override the automatic radial extent
    seed: int = seeds.AREA_SAMPLER_ROOT


@dataclass(frozen=True)
class CellAreaEstimate:
    value: float
    mc_stderr: float
    quad_delta: float
    converged: bool
    levels: int
    n_points: int
    n_samples: int


def _decode_probability_grid(
    params: AnalyticParams,
    mode: str,
    centers: np.ndarray,
    pts: np.ndarray,
    n_samples: int,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray]:
    """Estimate P(decode) at each grid point by sampling S per block."""
    M = centers.shape[0]
    dist = np.hypot(pts[:, 0:1] - centers[None, :, 0], pts[:, 1:2] - centers[None, :, 1])
    with np.errstate(divide="ignore", over="ignore"):
        pl = dist ** (-params.alpha)  # (n_pts, M)
    thr_rc = 2.0 ** params.R - 1.0
    hits = np.zeros(pts.shape[0])
    hits_sq = np.zeros(pts.shape[0])
    # accumulate in sample blocks to bound memory at high resolutions
    block = max(1, int(2_000_000 // max(pts.shape[0], 1)))
    done = 0
    while done < n_samples:
        b = min(block, n_samples - done)
        u = rng.random((pts.shape[0], M, b))
        s = (-np.log(u) / params.A) ** (1.0 / params.delta)
        with np.errstate(over="ignore", invalid="ignore"):
            terms = s * pl[:, :, None]
            if mode == MODE_RC:
                dec = terms.sum(axis=1) >= thr_rc
            else:
                dec = np.log2(1.0 + terms).sum(axis=1) >= params.R
        hits += dec.sum(axis=1)
        done += b
    p_hat = hits / n_samples
    return p_hat, p_hat * (1.0 - p_hat) / n_samples


def cell_area_numeric(
    params: AnalyticParams,
    M: int,
    mode: str,
    centers: Optional[Sequence[float]] = None,
    settings: Optional[CellAreaSettings] = None,
    strict: bool = True,
) -> CellAreaEstimate:
    """Mean decoding-cell area for M combined blocks, by numeric integration.

    The integrand P(sum of decode terms >= threshold) is estimated by
    inverse-transform sampling of the per-block signal variables at every
    node of a polar grid (Gauss-Legendre radially, midpoint rule in angle)
    centered on the midpoint of the transmitter centers. Resolution doubles
    until two consecutive levels agree to ``rel_tol`` (or within Monte
    Carlo noise); ``strict`` controls whether failure to converge raises
    :class:`AccuracyError` or returns the last, flagged estimate.

    ``centers`` are the x-coordinates of the block transmitters
    (eta_0 .. eta_{M-1}); M=1 defaults to a single transmitter at the
    origin and reproduces the closed form pi/(A T).
    """
    if M < 1:
        raise ParameterError(f"M must be >= 1, got {M}")
    if centers is None:
        if M != 1:
            raise ParameterError("centers must be supplied for M > 1")
        centers = [0.0]
    cx = np.asarray(centers, dtype=float)
    if cx.shape != (M,):
        raise ParameterError(f"expected {M} center x-coordinates, got shape {cx.shape}")
    st = settings or CellAreaSettings()
    eta = np.column_stack([cx, np.zeros(M)])
    span = float(cx.max() - cx.min())
    mid = float(cx.max() + cx.min()) / 2.0
    extent = st.extent if st.extent is not None else span / 2.0 + 10.0 * math.sqrt(w1_area(params) * M)

    prev_val = None
    prev_se = 0.0
    val = se = delta_val = math.nan
    level = 0
    n_pts = 0
    for level in range(st.max_doublings + 1):
        n_r = st.n_radial * 2 ** level
        n_a = st.n_angular * 2 ** level
        x, w = np.polynomial.legendre.leggauss(n_r)
        r = 0.5 * extent * (x + 1.0)
        wr = 0.5 * extent * w * r  # weight includes the polar Jacobian r
        theta = (np.arange(n_a) + 0.5) * (2.0 * math.pi / n_a)
        wt = 2.0 * math.pi / n_a
        px = mid + np.outer(r, np.cos(theta)).ravel()
        py = np.outer(r, np.sin(theta)).ravel()
        weights = np.repeat(wr, n_a) * wt
        pts = np.column_stack([px, py])
        n_pts = pts.shape[0]
        rng = seeds.substream(st.seed, level)
        p_hat, var_hat = _decode_probability_grid(params, mode, eta, pts, st.n_samples, rng)
        val = float(np.dot(weights, p_hat))
        se = float(math.sqrt(np.dot(weights * weights, var_hat)))
        if prev_val is not None:
            delta_val = abs(val - prev_val)
            noise = 2.5 * math.hypot(se, prev_se)
            if delta_val <= max(st.rel_tol * abs(val), noise):
                return CellAreaEstimate(val, se, delta_val, True, level, n_pts, st.n_samples)
        prev_val, prev_se = val, se
    est = CellAreaEstimate(val, se, delta_val, False, level, n_pts, st.n_samples)
    if strict:
        raise AccuracyError(
            f"cell area integral did not converge: last value {val:.6g}, "
            f"last change {delta_val:.3g}, mc stderr {se:.3g} "
            f"after {level + 1} levels (max {st.max_doublings + 1})"
        )
    return est


@dataclass(frozen=True)
class AnalyticResult:
    """Progress approximations d~_1..d~_M, cell areas, and the PRD surrogate."""

    mode: str
    M: int
    params: AnalyticParams
    d_tildes: Tuple[float, ...]
    w_areas: Tuple[float, ...]
    prd: float
    area_estimates: Tuple[Optional[CellAreaEstimate], ...] = ()

    @property
    def d_prev(self) -> float:
        return self.d_tildes[-2] if self.M > 1 else 0.0

    @property
    def d_cur(self) -> float:
        return self.d_tildes[-1]


AREA_BOUND = "bound"
AREA_NUMERIC = "numeric"


def dm_tilde(
    params: AnalyticParams,
    M: int,
    mode: str,
    area_source: str = AREA_BOUND,
    settings: Optional[CellAreaSettings] = None,
    strict_area: bool = True,
) -> AnalyticResult:
    """Recursive expected-progress approximation up to diversity order M.

    Cell areas: |W_1| is closed form; |W_2| uses the closed-form lower
    bound when ``area_source="bound"`` (default) and the numeric integral
    when ``"numeric"``; orders three and up have no closed form and always
    integrate numerically with centers at the previously computed offsets.
    The k-th area is floored at |W_1|: combining can only enlarge the cell,
    which keeps the recursion sane where the bound degenerates (R < 1).
    """
    if M < 1:
        raise ParameterError(f"M must be >= 1, got {M}")
    if mode not in (MODE_NC, MODE_IRC, MODE_RC):
        raise ParameterError(f"unknown combining mode {mode!r}")
    if mode == MODE_NC and M != 1:
        raise ParameterError("no-cooperation mode is single-block (M=1)")
    if area_source not in (AREA_BOUND, AREA_NUMERIC):
        raise ParameterError(f"unknown area source {area_source!r}")

    w1 = w1_area(params)
    d_list = [0.0]  # d~_0
    w_list = []
    est_list = []
    for k in range(1, M + 1):
        if k == 1:
            wk, est = w1, None
        elif k == 2 and area_source == AREA_BOUND:
            wk, est = w2_lower_bound(params, mode), None
        else:
            est = cell_area_numeric(
                params, k, mode, centers=d_list[:k], settings=settings, strict=strict_area
            )
            wk = est.value
        wk = max(wk, w1)
        ck = params.lam * (1.0 - params.p) / 2.0 * (wk + d_list[-1] * math.sqrt(wk))
        dk = (math.sqrt(wk) + d_list[-1]) / 2.0 * _poisson_max_factor(ck)
        d_list.append(dk)
        w_list.append(wk)
        est_list.append(est)

    prd = params.R * params.lam * params.p * (d_list[M] - d_list[M - 1])
    return AnalyticResult(
        mode=mode,
        M=M,
        params=params,
        d_tildes=tuple(d_list[1:]),
        w_areas=tuple(w_list),
        prd=prd,
        area_estimates=tuple(est_list),
    )


def prd_tilde(
    params: AnalyticParams,
    M: int,
    mode: str,
    area_source: str = AREA_BOUND,
    settings: Optional[CellAreaSettings] = None,
    strict_area: bool = True,
) -> float:
    """PRD surrogate R*lam*p*(d~_M - d~_{M-1}); reduces to R*lam*p*d~_1 at M=1."""
    return dm_tilde(params, M, mode, area_source, settings, strict_area).prd
