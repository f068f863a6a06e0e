"""Counter-based random streams.

Every independent work item (a block of ABC draws, a grid point, a Monte-Carlo
replicate) gets its own generator derived from ``(seed, purpose, index)``, so
results never depend on scheduling or worker count.
"""

import numpy as np

# purpose tags keep streams used for different jobs disjoint
ABC_DRAWS = 1
MU_THETA = 2
EXCEEDANCE = 3
DATA = 4
PROJECTIONS = 5


def stream(seed, purpose, *index):
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(purpose), *map(int, index)))
    return np.random.default_rng(ss)
