"""Seeded q-dimensional Wiener increments on a uniform time grid.

Streams come from the counter-based Philox generator keyed by
(seed, stream): stream 0 is the default path, Monte Carlo sample s uses
stream s, so distinct samples are independent without coordination and any
sample can be regenerated in isolation. Within a stream the J*q standard
normals are drawn step-major, component-minor.

Refinement studies generate the finest path once and sum consecutive
increments (never re-draw), so coarse and fine levels share the same
Brownian path exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class WienerPath:
    """Increments dW[j, i] ~ Normal(0, k) for steps j < J, components i < q."""

    q: int
    J: int
    k: float
    T: float
    seed: int
    level: int
    increments: np.ndarray

    def __post_init__(self):
        if self.increments.shape != (self.J, self.q):
            raise ValueError("increments shape does not match (J, q)")
        if not np.isfinite(self.increments).all():
            raise ValueError("non-finite Wiener increment")
        self.increments.setflags(write=False)

    def cumulative(self):
        """W_i(t_j) for j = 0..J, starting at 0."""
        W = np.zeros((self.J + 1, self.q))
        np.cumsum(self.increments, axis=0, out=W[1:])
        return W

    @property
    def times(self):
        return self.k * np.arange(self.J + 1)


def sample_path(seed, q, J, T, stream=0):
    """Draw a WienerPath with step k = T/J from stream (seed, stream)."""
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    if J < 1:
        raise ValueError(f"J must be >= 1, got {J}")
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    key = np.array([np.uint64(int(seed) & (2**64 - 1)),
                    np.uint64(int(stream) & (2**64 - 1))])
    rng = np.random.Generator(np.random.Philox(key=key))
    k = T / J
    increments = rng.standard_normal((J, q)) * np.sqrt(k)
    return WienerPath(q=q, J=J, k=k, T=float(T), seed=int(seed),
                      level=0, increments=increments)


def coarsen(path, factor):
    """Sum groups of `factor` consecutive increments (factor a power of 2).

    The coarse path covers the same Brownian path with step factor*k; the
    level tag increases by log2(factor).
    """
    factor = int(factor)
    if factor < 1 or (factor & (factor - 1)) != 0:
        raise ValueError(f"factor must be a positive power of 2, got {factor}")
    if path.J % factor != 0:
        raise ValueError(f"factor {factor} does not divide J = {path.J}")
    if factor == 1:
        return path
    J = path.J // factor
    increments = path.increments.reshape(J, factor, path.q).sum(axis=1)
    return WienerPath(q=path.q, J=J, k=path.k * factor, T=path.T,
                      seed=path.seed, level=path.level + factor.bit_length() - 1,
                      increments=increments)


def dump_csv(path, file):
    """Write step, t, dW_1..dW_q rows with 17 significant digits."""
    header = "step,t," + ",".join(f"dW_{i + 1}" for i in range(path.q))
    lines = [header]
    for j in range(path.J):
        vals = ",".join(f"{x:.17g}" for x in path.increments[j])
        lines.append(f"{j},{j * path.k:.17g},{vals}")
    text = "\n".join(lines) + "\n"
    if hasattr(file, "write"):
        file.write(text)
    else:
        with open(file, "w", encoding="ascii") as fh:
            fh.write(text)
