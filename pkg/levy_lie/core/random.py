"""
Counter-based random streams.

Each sample path draws from its own Philox stream keyed by ``(seed, path_index)``,
so results do not depend on how many paths are generated or on which worker
generates them.
"""
import numpy as np


def path_stream(seed: int, path_index: int, purpose: int = 0) -> np.random.Generator:
    """
    Return the generator for one path.

    Args:
        seed: Experiment seed
        path_index: Index of the path in the ensemble
        purpose: Sub-stream selector (0 = simulation, 1 = surgery, ...)

    Returns:
        numpy Generator backed by a Philox bit generator
    """
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(path_index), int(purpose)))
    return np.random.Generator(np.random.Philox(sequence))
