"""Counter-based random streams addressed by (seed, stream, index...)."""

import numpy as np

from SRC.exception import InvalidParameterError

# stream ids keep the experiment families apart for a shared seed
SAMPLE_STREAM = 0
PERMUTATION_STREAM = 1
NULL_TABLE_STREAM = 2
TAIL_STREAM = 3
SLOPE_STREAM = 4
ORACLE_STREAM = 5


def stream(seed: int, *keys: int) -> np.random.Generator:
    """
    Build an independent Philox generator for one address.

    Args:
        seed (int): Experiment seed, nonnegative.
        *keys (int): Stream id followed by any replicate indices.

    Returns:
        np.random.Generator: Generator whose output depends only on the address.
    """
    address = [int(seed), *(int(k) for k in keys)]
    if any(a < 0 for a in address):
        raise InvalidParameterError(f"seed and stream keys must be nonnegative, got {address}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(address)))
