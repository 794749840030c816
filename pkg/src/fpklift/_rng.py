"""Counter-based random streams.

Every random draw in the package comes from a Philox generator whose key is
derived from ``(master_seed, role, index)`` through :class:`numpy.random.SeedSequence`
(``spawn_key=(role, index)``). A stream therefore depends only on its label,
never on the order in which streams are created or on how many worker
threads consume them, which makes serial and parallel runs bit-identical.

Roles
-----
INIT      initial-condition resampling, index = member / realization id
PARTICLE  idiosyncratic particle noise, index = member / realization id
COMMON    common Wiener noise, index = realization id
DATA      auxiliary data sets (random clouds in checks), index = user chosen

Within a stream, draws are consumed step by step in particle-index order.
"""

import numpy as np

INIT = 0
PARTICLE = 1
COMMON = 2
DATA = 3


def stream(seed, role, index=0):
    """Return the Philox generator for the labelled stream."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(role), int(index)))
    return np.random.Generator(np.random.Philox(ss))
