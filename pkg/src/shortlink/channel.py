"""AWGN channel and Eb/N0 bookkeeping.

Energy accounting: constellation symbols have unit average energy, and Eb
counts delivered message bits only (CRC and convolutional tail bits are
rate loss). With code rate R and b bits per symbol,

    Es/N0 = R * b * Eb/N0,   sigma^2 = 1 / (2 * Es/N0)   per real dimension.

Noise samples are drawn through RandomStream in a pinned order (one
standard-normal block, I components first at even offsets), so simulated
curves are reproducible across platforms and worker counts.
"""

from __future__ import annotations

import numpy as np

from .core import RandomStream


def ebn0_to_sigma2(ebn0_db: float, code_rate: float, bits_per_symbol: int) -> float:
    """Noise variance per real dimension for unit-energy symbols."""
    if code_rate <= 0 or code_rate > 1:
        raise ValueError(f"code rate must be in (0, 1], got {code_rate}")
    if bits_per_symbol < 1:
        raise ValueError(f"bits_per_symbol must be >= 1, got {bits_per_symbol}")
    es_n0 = code_rate * bits_per_symbol * 10.0 ** (ebn0_db / 10.0)
    return 1.0 / (2.0 * es_n0)


def gaussian_pair(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard-normal draws of `shape + (2,)` in the pinned order."""
    return rng.standard_normal(tuple(np.atleast_1d(shape)) + (2,))


def awgn(signal: np.ndarray, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """Add white Gaussian noise with variance sigma2 per real dimension.

    Complex inputs get independent noise on I and Q; real inputs get a
    single real component. The input array is not modified.
    """
    if sigma2 <= 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    sigma = np.sqrt(sigma2)
    if np.iscomplexobj(signal):
        pair = gaussian_pair(rng, signal.shape)
        noise = (pair[..., 0] + 1j * pair[..., 1]) * sigma
    else:
        noise = rng.standard_normal(signal.shape) * sigma
    return signal + noise


def awgn_stream(signal: np.ndarray, sigma2: float, stream: RandomStream) -> np.ndarray:
    """awgn() drawing from a fresh generator of the given stream."""
    return awgn(signal, sigma2, stream.generator())
