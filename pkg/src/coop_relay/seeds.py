"""Deterministic random-stream splitting.

A single master seed drives every experiment. Independent substreams are
derived per (trial, slot, purpose) by feeding the whole path into
``numpy.random.SeedSequence``, so any trial can be re-run in isolation and
parallel execution cannot change results: a stream is a pure function of its
path, never of scheduling order.

Purpose codes used by the simulator:

=========  ====================================================
``PPP``    node positions of the trial (slot index 0)
``ROLES``  per-slot transmit/receive coin flips
``FADING`` per-slot fading gains (desired gains first, then the
           interferer gain matrix, in node-index order)
``SELECT`` per-slot tie breaking / contention randomness
=========  ====================================================
"""

import numpy as np

PPP = 0
ROLES = 1
FADING = 2
SELECT = 3

# reserved roots for non-trial consumers (quadrature samplers, optimizers)
AREA_SAMPLER_ROOT = 0x51DCE11
OPTIMIZER_FINAL_EVAL = 0x0F71E5


def substream(master_seed: int, *path: int) -> np.random.Generator:
    """Return the PCG64 generator addressed by ``(master_seed, *path)``.

    Streams with different paths are statistically independent; the same
    path always yields the same stream.
    """
    if master_seed < 0:
        raise ValueError("master seed must be non-negative")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((master_seed, *path))))


def trial_streams(master_seed: int, trial: int):
    """Convenience bundle of the per-slot stream factories for one trial."""
    return TrialStreams(master_seed, trial)


class TrialStreams:
    """Addresses the substreams one simulated trial is allowed to consume."""

    def __init__(self, master_seed: int, trial: int):
        self.master_seed = int(master_seed)
        self.trial = int(trial)

    def ppp(self) -> np.random.Generator:
        return substream(self.master_seed, self.trial, 0, PPP)

    def roles(self, slot: int) -> np.random.Generator:
        return substream(self.master_seed, self.trial, slot, ROLES)

    def fading(self, slot: int) -> np.random.Generator:
        return substream(self.master_seed, self.trial, slot, FADING)

    def select(self, slot: int) -> np.random.Generator:
        return substream(self.master_seed, self.trial, slot, SELECT)
