"""Deterministic seed derivation.

All randomness in the package flows through ``numpy.random.default_rng``
(PCG64) seeded via ``SeedSequence``. Sub-streams are derived from a master
seed with integer spawn keys, so every run is reproducible end to end and
any component can be re-seeded in isolation. The spawn-key domains below
are part of the on-disk reproducibility contract and must not be renumbered.
"""

import numpy as np

# Identifier recorded in run manifests.
PRNG_ID = "numpy-PCG64/SeedSequence"

# Spawn-key domains (first element of the key tuple).
DOMAIN_PAIRING = 1      # per-slice homotopy pair draws
DOMAIN_BANDWIDTH = 2    # median-heuristic subsampling
DOMAIN_CENTERS = 3      # center subsampling in regularized least-squares fits
DOMAIN_STAGE = 4        # per-stage (round/segment) master seeds in drivers
DOMAIN_SAMPLER = 6      # synthetic cloud samplers
DOMAIN_SPLIT = 7        # internal-similarity subset splits

_MAX_SEED = 2**64


def check_seed(seed):
    """Validate a 64-bit unsigned master seed."""
    if not isinstance(seed, (int, np.integer)) or not 0 <= int(seed) < _MAX_SEED:
        raise ValueError(f"seed must be an integer in [0, 2**64), got {seed!r}")
    return int(seed)


def rng_from(seed, *key):
    """A Generator for master `seed` and spawn-key path `key` (ints)."""
    seq = np.random.SeedSequence(entropy=check_seed(seed), spawn_key=tuple(key))
    return np.random.default_rng(seq)


def child_seed(seed, *key):
    """Derive a new 64-bit master seed from `seed` along `key`."""
    seq = np.random.SeedSequence(entropy=check_seed(seed), spawn_key=tuple(key))
    return int(seq.generate_state(1, dtype=np.uint64)[0])
