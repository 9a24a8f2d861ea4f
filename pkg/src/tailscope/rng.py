"""Counter-based random substreams (Philox) for reproducible parallelism.

Every piece of randomness in the library flows through a stream obtained
from :func:`substream`. Streams are identified by (seed, domain, index,
subindex); distinct identifiers start 2**64 Philox counter blocks apart,
far beyond any draw volume used here, so streams never overlap and no
result depends on worker count or chunking.
"""

from __future__ import annotations

import numpy as np

# Domain tags keep unrelated subsystems on disjoint streams.
DOMAIN_TRUTH = 1        # regression ground-truth weight vector
DOMAIN_DATA = 2         # per-run SGD data stream (index = run)
DOMAIN_SCHEDULE = 3     # per-run stepsize path (index = run)
DOMAIN_PANEL_X = 4      # chi-square moment panel, X factor
DOMAIN_PANEL_Y = 5      # chi-square moment panel, Y factor
DOMAIN_REGEN = 6        # regeneration-path sampling
DOMAIN_STABLE = 7       # alpha-stable validation draws
DOMAIN_WISHART = 8      # matrix-norm kernel samples
DOMAIN_PROBE = 9        # contraction / moment probes
DOMAIN_MISC = 10

_MASK64 = (1 << 64) - 1


def substream(seed: int, domain: int, index: int = 0, subindex: int = 0) -> np.random.Generator:
    """Return a Generator positioned on an independent Philox substream."""
    key = np.array([seed & _MASK64, domain & _MASK64], dtype=np.uint64)
    counter = np.array([0, index & _MASK64, subindex & _MASK64, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))
