"""Counter-based random streams for reproducible, replayable simulation.

Every random draw in a trajectory is addressed by (seed, trajectory index,
event index, purpose). Streams are backed by Philox, so draw k at event k is
identical across runs regardless of how many numbers any other part of the
simulation consumed. This is what makes paired comparisons (same thresholds
and refresh noise, different integrators) well defined even when the two
runs disagree on event times.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1

# Draw purposes. Values are part of the reproducibility contract: changing
# them changes every seeded output.
PURPOSE_INIT_Q = 0
PURPOSE_INIT_P = 1
PURPOSE_U = 2
PURPOSE_REFRESH = 3


@dataclass(frozen=True)
class TrajectoryStreams:
    """Family of independent generators owned by one trajectory."""

    seed: int
    trajectory: int

    def generator(self, event_index: int, purpose: int) -> np.random.Generator:
        """Fresh generator for one (event, purpose) slot.

        The (event, purpose) pair occupies the high counter words; in-stream
        draws advance the low words, so no two slots can ever overlap.
        """
        key = np.array([self.seed & _MASK64, self.trajectory & _MASK64],
                       dtype=np.uint64)
        counter = np.array([0, 0, event_index & _MASK64, purpose & _MASK64],
                           dtype=np.uint64)
        return np.random.Generator(np.random.Philox(counter=counter, key=key))
