"""The cooperative relaying protocol: per-slot simulation and PRD estimation.

A trial conditions a source at the origin of a fresh Poisson network and
runs M hops. Each hop k:

1. every node independently draws TX (probability p) or RX; the current
   forwarding relay is forced to TX and excluded from its own interference;
2. every receiving candidate gets fresh fading, an SIR from the forwarding
   relay, and a decode test that combines the current block with the terms
   it accumulated while in RX role on earlier hops (mutual information for
   IRC, SIR for RC, nothing for NC);
3. the decoder with the largest positive x-coordinate (progress toward the
   asymptotically distant destination on +x) becomes forwarding relay k+1.

Chain progress D_k is the running maximum of the selected relay
x-coordinates; a hop with no positive-progress decoder freezes the chain
(the remaining hops keep D_{k-1} and no relay is recorded).

PRD estimation averages D_M - D_{M-1} over trials whose first M-1 hops all
selected a relay. The protocol retransmits a block until some relay
decodes it, so a running chain always has its first M-1 relays; trials
whose chain dies earlier never produce an M-th-hop sample. The final hop
itself is not conditioned: a failed last hop contributes zero progress.
With M=1 (no cooperation) nothing is conditioned and the estimate is the
plain average of D_1.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .analytic import MODE_IRC, MODE_NC, MODE_RC
from .config import SimConfig
from .errors import ParameterError
from .geometry import NodeSet, add_conditioned_node, sample_ppp
from .seeds import TrialStreams


class CombiningMode(str, Enum):
    """Decode strategy; NC is the single-block (M=1) baseline."""

    NC = MODE_NC
    IRC = MODE_IRC
    RC = MODE_RC


@dataclass
class RelayAccumulator:
    """Per-candidate decoding state: the most recent received-block terms.

    ``max_terms`` is M-1; a node holds one term per hop it spent in RX role
    (mutual information for IRC, SIR for RC), oldest terms dropped first.
    Nodes that were transmitting during a hop simply have no term for it.
    """

    node_id: int
    max_terms: int
    terms: List[float] = None
    received_hops: List[int] = None

    def __post_init__(self):
        if self.terms is None:
            self.terms = []
        if self.received_hops is None:
            self.received_hops = []

    def add(self, term: float, hop: int):
        if term < 0:
            raise ParameterError("accumulated terms must be non-negative")
        self.terms.append(float(term))
        self.received_hops.append(hop)
        if len(self.terms) > self.max_terms:
            self.terms = self.terms[-self.max_terms:] if self.max_terms else []
            self.received_hops = self.received_hops[-self.max_terms:] if self.max_terms else []

    def total(self) -> float:
        return float(sum(self.terms))


def decode_success(acc: Optional[RelayAccumulator], current_term: float, mode, R: float) -> bool:
    """Decode test for one candidate given its accumulator and current term.

    IRC sums mutual information against R; RC sums SIRs against 2^R - 1;
    NC uses the current mutual information alone. ``current_term`` is an MI
    for IRC/NC and an SIR for RC.
    """
    mode = CombiningMode(mode)
    stored = acc.total() if acc is not None else 0.0
    if mode is CombiningMode.NC:
        return current_term >= R
    if mode is CombiningMode.IRC:
        return stored + current_term >= R
    return stored + current_term >= 2.0 ** R - 1.0


def select_forwarding_relay(candidates: Sequence[Tuple[object, float]]):
    """Pick the candidate with maximal positive progress, or None.

    Only strictly positive progress counts: a decoder behind the source
    cannot advance the packet, and an empty field means the transmitter
    must retransmit.
    """
    best_id, best_prog = None, 0.0
    for node_id, progress in candidates:
        if not math.isfinite(progress):
            raise ParameterError(f"progress must be finite, got {progress}")
        if progress > best_prog:
            best_id, best_prog = node_id, progress
    return best_id


def contention_winner(entries: Sequence[Tuple[object, float]], P: int, d_max: float, rng) -> object:
    """Distributed relay selection over P listen/transmit rounds.

    Each relay quantizes its progress to ``floor(progress / d_max *
    (2^P - 1))`` and plays the code most-significant bit first: in a round
    where any surviving relay holds a 1, every survivor holding a 0 drops
    out. Survivors of all P rounds share the maximal code; the winner is
    drawn uniformly among them, so the scheme realizes argmax of quantized
    progress with uniform tie breaking.
    """
    if P < 1:
        raise ParameterError(f"bit count P must be >= 1, got {P}")
    if d_max <= 0:
        raise ParameterError(f"d_max must be positive, got {d_max}")
    if not entries:
        raise ParameterError("contention requires at least one entry")
    ids = [e[0] for e in entries]
    prog = np.asarray([e[1] for e in entries], dtype=float)
    if np.any((prog < 0) | (prog > d_max)):
        raise ParameterError("every progress must lie in [0, d_max]")
    levels = 2 ** P - 1
    codes = np.floor(prog / d_max * levels).astype(np.int64)
    codes = np.minimum(codes, levels)  # progress == d_max maps to the top code
    alive = np.ones(len(ids), dtype=bool)
    for bit in range(P - 1, -1, -1):
        ones = alive & (codes >> bit & 1 == 1)
        if ones.any():
            alive = ones
    survivors = np.nonzero(alive)[0]
    return ids[survivors[int(rng.integers(survivors.size))]]


@dataclass(frozen=True)
class HopOutcome:
    """One hop of a simulated chain: 1-based index, the selected relay
    position (None when the hop stalled) and cumulative progress."""

    hop: int
    relay: Optional[Tuple[float, float]]
    progress: float


@dataclass(frozen=True)
class PrdEstimate:
    """Monte Carlo PRD estimate with error bars.

    ``d_means``/``d_stderrs`` are the per-hop expected progress values
    d_1 .. d_M over the valid-trial ensemble (chains whose first M-1 hops
    selected a relay); ``valid_trials`` counts that ensemble.
    """

    mode: str
    M: int
    lam: float
    p: float
    alpha: float
    R: float
    prd: float
    prd_stderr: float
    d_means: Tuple[float, ...]
    d_stderrs: Tuple[float, ...]
    trials: int
    valid_trials: int
    seed: int

    @property
    def d_prev(self) -> float:
        return self.d_means[-2] if self.M > 1 else 0.0

    @property
    def d_cur(self) -> float:
        return self.d_means[-1] if self.d_means else 0.0


def _chain_arrays(
    positions: np.ndarray,
    source_index: int,
    p: float,
    alpha: float,
    R: float,
    hops: int,
    n_terms: int,
    mode: str,
    streams: TrialStreams,
    cand_radius: Optional[float],
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Run one chain; returns (D, success flags, relay xy rows (nan if none))."""
    N = positions.shape[0]
    thr_rc = 2.0 ** R - 1.0
    stored = np.zeros((N, n_terms)) if n_terms else None
    tx = source_index
    d_prev = 0.0
    D = np.zeros(hops)
    succ = np.zeros(hops, dtype=bool)
    relays = np.full((hops, 2), np.nan)
    for k in range(hops):
        slot = k + 1
        roles_tx = streams.roles(slot).random(N) < p
        roles_tx[tx] = True
        dx = positions[:, 0] - positions[tx, 0]
        dy = positions[:, 1] - positions[tx, 1]
        d2 = dx * dx + dy * dy
        cand_mask = ~roles_tx
        if cand_radius is not None:
            cand_mask &= d2 <= cand_radius * cand_radius
        ci = np.nonzero(cand_mask)[0]
        ii = np.nonzero(roles_tx)[0]
        ii = ii[ii != tx]
        fade = streams.fading(slot)
        sig = fade.standard_exponential(ci.size) * d2[ci] ** (-alpha / 2.0)
        if ii.size:
            # pairwise squared distances candidates x interferers
            ddx = positions[ci, 0][:, None] - positions[ii, 0][None, :]
            ddy = positions[ci, 1][:, None] - positions[ii, 1][None, :]
            r2 = ddx * ddx + ddy * ddy
            gains = fade.standard_exponential(r2.shape)
            interference = np.einsum("ij,ij->i", gains, r2 ** (-alpha / 2.0))
            with np.errstate(divide="ignore"):
                sir = sig / interference
        else:
            sir = np.full(ci.size, np.inf)
        with np.errstate(invalid="ignore"):
            mi = np.log2(1.0 + sir)
        if mode == MODE_NC:
            dec = mi >= R
        elif mode == MODE_IRC:
            dec = stored[ci].sum(axis=1) + mi >= R if n_terms else mi >= R
        elif mode == MODE_RC:
            dec = stored[ci].sum(axis=1) + sir >= thr_rc if n_terms else sir >= thr_rc
        else:
            raise ParameterError(f"unknown combining mode {mode!r}")
        if n_terms:
            term = mi if mode == MODE_IRC else sir
            if n_terms == 1:
                stored[ci, 0] = term
            else:
                stored[ci, :-1] = stored[ci, 1:]
                stored[ci, -1] = term
        xc = positions[ci, 0]
        ok = dec & (xc > 0.0)
        if not ok.any():
            D[k:] = d_prev
            break
        j = int(np.argmax(np.where(ok, xc, -np.inf)))
        succ[k] = True
        relays[k] = positions[ci[j]]
        d_prev = max(d_prev, float(xc[j]))
        D[k] = d_prev
        tx = int(ci[j])
    return D, succ, relays


def _build_nodes(cfg: SimConfig, streams: TrialStreams) -> Tuple[np.ndarray, int]:
    window = cfg.resolved_window()
    nodes = sample_ppp(cfg.lam, window, streams.ppp())
    nodes = add_conditioned_node(nodes, (0.0, 0.0))
    return nodes.positions, len(nodes) - 1


def simulate_chain(
    cfg: SimConfig,
    trial: int = 0,
    hops: Optional[int] = None,
    mode: Optional[str] = None,
    n_terms: Optional[int] = None,
    nodes: Optional[NodeSet] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Low-level chain runner returning raw (D, success, relay) arrays.

    ``hops``/``n_terms``/``mode`` default to the configured M, M-1 and
    mode; overriding them supports diagnostics such as running a
    no-combining chain for several hops. A caller-supplied NodeSet replaces
    the sampled network (the source is still appended at the origin).
    """
    streams = TrialStreams(cfg.seed, trial)
    if nodes is None:
        positions, source = _build_nodes(cfg, streams)
    else:
        withsrc = add_conditioned_node(nodes, (0.0, 0.0))
        positions, source = withsrc.positions, len(withsrc) - 1
    mode = mode if mode is not None else cfg.mode
    hops = hops if hops is not None else cfg.M
    n_terms = n_terms if n_terms is not None else (0 if mode == MODE_NC else cfg.M - 1)
    return _chain_arrays(
        positions,
        source,
        cfg.p,
        cfg.alpha,
        cfg.R,
        hops,
        n_terms,
        mode,
        streams,
        cfg.cand_radius(),
    )


def simulate_trial(cfg: SimConfig, trial: int = 0, nodes: Optional[NodeSet] = None) -> List[HopOutcome]:
    """Simulate one M-hop trial and return its per-hop outcomes."""
    D, succ, relays = simulate_chain(cfg, trial, nodes=nodes)
    out = []
    for k in range(cfg.M):
        relay = (float(relays[k, 0]), float(relays[k, 1])) if succ[k] else None
        out.append(HopOutcome(hop=k + 1, relay=relay, progress=float(D[k])))
    return out


def _trial_block(cfg: SimConfig, start: int, stop: int) -> Tuple[np.ndarray, np.ndarray]:
    hops = cfg.M
    D = np.empty((stop - start, hops))
    succ = np.empty((stop - start, hops), dtype=bool)
    for i, t in enumerate(range(start, stop)):
        streams = TrialStreams(cfg.seed, t)
        positions, source = _build_nodes(cfg, streams)
        D[i], succ[i], _ = _chain_arrays(
            positions, source, cfg.p, cfg.alpha, cfg.R,
            hops, 0 if cfg.mode == MODE_NC else cfg.M - 1, cfg.mode,
            streams, cfg.cand_radius(),
        )
    return D, succ


def run_trials(cfg: SimConfig, trials: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """All-trials (D, success) arrays, trial-indexed; parallel over blocks.

    Each trial owns substreams keyed by its absolute index, and blocks are
    reassembled in index order, so the result is identical for any worker
    count.
    """
    n = trials if trials is not None else cfg.trials
    workers = cfg.resolved_workers()
    if workers <= 1 or n < 2 * workers:
        return _trial_block(cfg, 0, n)
    n_blocks = min(4 * workers, n)
    edges = np.linspace(0, n, n_blocks + 1).astype(int)
    spans = [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_trial_block, [cfg] * len(spans), *zip(*spans)))
    D = np.vstack([p[0] for p in parts])
    succ = np.vstack([p[1] for p in parts])
    return D, succ


def estimate_prd(cfg: SimConfig, trials: Optional[int] = None) -> PrdEstimate:
    """Monte Carlo PRD estimate at the configured parameter point.

    PRD = R * lam * p * mean(D_M - D_{M-1}) over valid trials (see module
    docstring for the validity rule); the standard error propagates from
    the paired per-trial differences. Zero valid trials yield a zero
    estimate flagged by ``valid_trials == 0``.
    """
    n = trials if trials is not None else cfg.trials
    D, succ = run_trials(cfg, n)
    if cfg.M > 1:
        valid = succ[:, : cfg.M - 1].all(axis=1)
    else:
        valid = np.ones(n, dtype=bool)
    n_valid = int(valid.sum())
    if n_valid == 0:
        return PrdEstimate(
            cfg.mode, cfg.M, cfg.lam, cfg.p, cfg.alpha, cfg.R,
            0.0, 0.0, (0.0,) * cfg.M, (0.0,) * cfg.M, n, 0, cfg.seed,
        )
    Dv = D[valid]
    diff = Dv[:, -1] - (Dv[:, -2] if cfg.M > 1 else 0.0)
    scale = cfg.R * cfg.lam * cfg.p
    prd = scale * float(diff.mean())
    prd_se = scale * float(diff.std(ddof=1) / math.sqrt(n_valid)) if n_valid > 1 else 0.0
    d_means = tuple(float(m) for m in Dv.mean(axis=0))
    d_se = tuple(
        float(s / math.sqrt(n_valid)) for s in (Dv.std(axis=0, ddof=1) if n_valid > 1 else np.zeros(cfg.M))
    )
    return PrdEstimate(
        cfg.mode, cfg.M, cfg.lam, cfg.p, cfg.alpha, cfg.R,
        prd, prd_se, d_means, d_se, n, n_valid, cfg.seed,
    )
