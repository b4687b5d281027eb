"""Noiseless OR outcomes and the binary symmetric noise channel."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .designs import TestMatrix


@dataclass(frozen=True, eq=False)
class Outcomes:
    """Observed outcomes ``y`` with optional noise flips ``z`` and clean ``y0``."""

    y: np.ndarray
    z: np.ndarray | None = None
    y0: np.ndarray | None = None

    def __post_init__(self):
        if self.z is not None and self.y0 is not None:
            if not np.array_equal(self.y, self.y0 ^ self.z):
                raise ValueError("y must equal y0 XOR z")

    @property
    def n(self) -> int:
        return int(self.y.size)

    @property
    def mask(self) -> int:
        """Positive tests as a Python int bitmask (bit i = test i)."""
        return bits_to_mask(self.y)


def bits_to_mask(bits: np.ndarray) -> int:
    """Pack a 0/1 vector into an int with bit i set iff bits[i] == 1."""
    packed = np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")


def mask_to_bits(mask: int, n: int) -> np.ndarray:
    raw = np.frombuffer(mask.to_bytes((n + 7) // 8, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:n].copy()


def noiseless_outcomes(matrix: TestMatrix, S: Iterable[int]) -> np.ndarray:
    """OR of the columns in ``S`` as a uint8 vector of length n."""
    y0 = np.zeros(matrix.n, dtype=np.uint8)
    for j in S:
        y0[matrix.supports[j]] = 1
    return y0


def apply_noise(y0: np.ndarray, rho: float, seed: int) -> Outcomes:
    """Flip each test independently with probability ``rho``.

    ``rho = 0`` is accepted for noiseless baselines.
    """
    if not 0.0 <= rho < 0.5:
        raise ValueError(f"rho must lie in [0, 0.5), got {rho}")
    y0 = np.asarray(y0, dtype=np.uint8)
    rng = np.random.default_rng(seed)
    z = (rng.random(y0.size) < rho).astype(np.uint8)
    return Outcomes(y=y0 ^ z, z=z, y0=y0)
