"""Shared primitives: bit arrays, LLR conventions, reproducible random streams.

Conventions used throughout the package:

* Bits are numpy uint8 arrays containing only 0 and 1.
* LLR(x) = ln(P(x=0) / P(x=1)), so a positive LLR favors bit 0.
* Randomness always flows through RandomStream(seed, stream). Equal
  (seed, stream) pairs give byte-identical draws on every platform;
  distinct stream indices are statistically independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def as_bits(seq) -> np.ndarray:
    """Validate and convert a 0/1 sequence to a uint8 array."""
    arr = np.asarray(seq)
    if arr.ndim != 1:
        raise ValueError(f"bit array must be 1-D, got shape {arr.shape}")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError("bit array may contain only 0 and 1")
    return arr.astype(np.uint8)


def hard_decision(llr) -> np.ndarray:
    """Map LLRs to bits: positive -> 0, negative -> 1, exact zero -> 0."""
    llr = np.asarray(llr, dtype=np.float64)
    if llr.size == 0:
        raise ValueError("hard_decision needs a non-empty LLR vector")
    return (llr < 0).astype(np.uint8)


def count_errors(reference, decoded) -> tuple[int, bool]:
    """Return (bit error count, frame error flag) between two bit arrays.

    A length mismatch is a contract violation, not a frame error.
    """
    ref = as_bits(reference)
    dec = as_bits(decoded)
    if ref.shape != dec.shape:
        raise ValueError(f"length mismatch: reference {ref.size}, decoded {dec.size}")
    n_err = int(np.count_nonzero(ref != dec))
    return n_err, n_err > 0


@dataclass(frozen=True)
class RandomStream:
    """Counter-based random source addressed by (seed, stream index).

    Wraps numpy's Philox bit generator keyed with the pair, which is
    platform-stable and cheap to construct, so batch workers can derive
    their own streams without coordinating.
    """

    seed: int
    stream: int = 0

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed out of range: {self.seed}")
        if not 0 <= self.stream < 2**64:
            raise ValueError(f"stream index out of range: {self.stream}")

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def bits(self, n: int) -> np.ndarray:
        """n uniform random bits."""
        return self.generator().integers(0, 2, size=n, dtype=np.uint8)
