"""
Seeding module for proxal.

Every randomized component receives an explicit 64-bit seed derived from the
run seed by fixed splitting, so identical configs reproduce identical runs.
"""

import numpy as np


def derive_seed(base, *keys):
    """Split a child 64-bit seed off `base` along the integer path `keys`."""
    sequence = np.random.SeedSequence([int(base), *[int(key) for key in keys]])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed):
    """Return a numpy Generator for an int seed (Generators pass through)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
