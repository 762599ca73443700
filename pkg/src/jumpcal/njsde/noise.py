"""Pre-drawn random numbers shared by every epoch of a training run."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import BadSpec


@dataclass(frozen=True)
class NoiseBank:
    """Normals, uniforms and Gumbel vectors for ``paths`` x ``steps``.

    ``eps_v`` doubles as the increment of the independent Brownian motion
    that is mixed with ``eps_s`` to give the variance shock.
    """

    eps_s: np.ndarray   # (M, m)
    eps_v: np.ndarray   # (M, m)
    u_s: np.ndarray     # (M, m)
    u_v: np.ndarray     # (M, m)
    gumbel: np.ndarray  # (M, m, n+1)
    seed: int | None = None

    def __post_init__(self):
        shape = self.eps_s.shape
        if len(shape) != 2:
            raise BadSpec("noise arrays must be (paths, steps)")
        for name in ("eps_v", "u_s", "u_v"):
            if getattr(self, name).shape != shape:
                raise BadSpec(f"{name} shape {getattr(self, name).shape} != {shape}")
        if self.gumbel.ndim != 3 or self.gumbel.shape[:2] != shape:
            raise BadSpec(f"gumbel shape {self.gumbel.shape} incompatible with {shape}")

    @classmethod
    def generate(cls, paths: int, steps: int, n_jumps: int, seed: int) -> "NoiseBank":
        if paths < 1 or steps < 1 or n_jumps < 1:
            raise BadSpec("paths, steps and n_jumps must be >= 1")
        rng = np.random.default_rng(seed)
        eps_s = rng.standard_normal((paths, steps))
        eps_v = rng.standard_normal((paths, steps))
        u_s = rng.random((paths, steps))
        u_v = rng.random((paths, steps))
        gumbel = rng.gumbel(size=(paths, steps, n_jumps + 1))
        return cls(eps_s, eps_v, u_s, u_v, gumbel, seed)

    @property
    def w(self) -> np.ndarray:
        return self.eps_v

    @property
    def paths(self) -> int:
        return self.eps_s.shape[0]

    @property
    def steps(self) -> int:
        return self.eps_s.shape[1]

    @property
    def n_jumps(self) -> int:
        return self.gumbel.shape[2] - 1

    def tiled(self, n_contracts: int) -> "NoiseBank":
        """Repeat the bank contract-major so row ``j*M + k`` is path ``k``."""
        if n_contracts == 1:
            return self
        rep = lambda a: np.tile(a, (n_contracts,) + (1,) * (a.ndim - 1))
        return NoiseBank(rep(self.eps_s), rep(self.eps_v), rep(self.u_s), rep(self.u_v),
                         rep(self.gumbel), self.seed)
