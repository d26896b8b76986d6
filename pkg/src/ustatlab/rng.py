"""Counter-based noise streams.

Every (replica, particle, step block) owns an independent Philox stream
keyed by ``SeedSequence(master_seed, spawn_key=(stream_id, replica,
particle, block))``. A particle's noise therefore never depends on how many
other particles, replicas or workers exist, which gives reproducibility
under parallelism and makes exchangeability testable: relabelling the
particle keys relabels the noise.
"""
from __future__ import annotations

import numpy as np

BLOCK_STEPS = 256
INIT_BLOCK = 2 ** 31


def particle_generator(master_seed, stream_id, replica, particle, block):
    ss = np.random.SeedSequence(int(master_seed),
                                spawn_key=(int(stream_id), int(replica), int(particle), int(block)))
    return np.random.Generator(np.random.Philox(ss))


class NoiseSource:
    """Standard normals indexed by (step, replica, particle, coordinate)."""

    def __init__(self, master_seed, replica_keys, particle_keys, d, stream_id=0,
                 block_steps=BLOCK_STEPS):
        self.master_seed = int(master_seed)
        self.stream_id = int(stream_id)
        self.replica_keys = np.asarray(replica_keys, dtype=np.int64)
        self.particle_keys = np.asarray(particle_keys, dtype=np.int64)
        self.d = int(d)
        self.block_steps = int(block_steps)
        self._block_index = None
        self._block = None

    def _fill(self, block, steps, width):
        R, n = self.replica_keys.size, self.particle_keys.size
        out = np.empty((steps, R, n, width))
        for a, rk in enumerate(self.replica_keys):
            for b, pk in enumerate(self.particle_keys):
                g = particle_generator(self.master_seed, self.stream_id, rk, pk, block)
                out[:, a, b, :] = g.standard_normal((steps, width))
        return out

    def step(self, k) -> np.ndarray:
        """Normals for step k, shape (R, n, d)."""
        blk, off = divmod(int(k), self.block_steps)
        if blk != self._block_index:
            self._block = self._fill(blk, self.block_steps, self.d)
            self._block_index = blk
        return self._block[off]

    def initial(self, width) -> np.ndarray:
        """Normals reserved for initial-condition sampling, shape (R, n, width)."""
        return self._fill(INIT_BLOCK, 1, width)[0]
