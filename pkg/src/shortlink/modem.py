"""Gray-mapped BPSK / QPSK / 16-QAM / 64-QAM with soft demapping.

Bit-to-symbol convention (pinned, see data/constellations.txt): the first
half of a symbol's bits selects the I axis, the second half the Q axis,
MSB first within an axis. BPSK uses the I axis only. Per axis, bit
pattern gray(i) maps to level (M - 1 - 2i), so the all-zero pattern
lands on the most positive level: BPSK bit 0 -> +1, QPSK [0,0] ->
(+1+j)/sqrt(2). Amplitudes are scaled for unit average symbol energy.

Demapping produces LLR = ln(P(0)/P(1)) per bit. Both axes are handled
with the max-log rule (difference of nearest-point squared distances over
the axis levels, divided by 2 sigma^2); for the 2-level axes of BPSK and
QPSK this is the exact LLR, e.g. 2y/sigma^2 for BPSK.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def gray_code(i: int) -> int:
    return i ^ (i >> 1)


def _axis_table(n_bits: int) -> np.ndarray:
    """Map axis bit pattern (as integer) to unnormalized level."""
    m = 1 << n_bits
    table = np.zeros(m, dtype=np.float64)
    for i in range(m):
        table[gray_code(i)] = m - 1 - 2 * i
    return table


@dataclass(frozen=True)
class ModulationScheme:
    name: str
    bits_per_symbol: int
    normalization: float
    i_bits: int
    q_bits: int
    # per-axis lookup: bit pattern -> unnormalized level
    i_table: np.ndarray = field(repr=False)
    q_table: np.ndarray = field(repr=False)

    def constellation(self) -> tuple[np.ndarray, np.ndarray]:
        """All 2^b points: (bit patterns as (2^b, b) array, complex points)."""
        b = self.bits_per_symbol
        patterns = ((np.arange(1 << b)[:, None] >> np.arange(b - 1, -1, -1)) & 1).astype(np.uint8)
        return patterns, modulate(patterns.reshape(-1), self)


def _make_scheme(name: str, i_bits: int, q_bits: int, norm: float) -> ModulationScheme:
    return ModulationScheme(
        name=name,
        bits_per_symbol=i_bits + q_bits,
        normalization=norm,
        i_bits=i_bits,
        q_bits=q_bits,
        i_table=_axis_table(i_bits),
        q_table=_axis_table(q_bits) if q_bits else np.zeros(1),
    )


SCHEMES: dict[str, ModulationScheme] = {
    "bpsk": _make_scheme("bpsk", 1, 0, 1.0),
    "qpsk": _make_scheme("qpsk", 1, 1, 1.0 / np.sqrt(2.0)),
    "qam16": _make_scheme("qam16", 2, 2, 1.0 / np.sqrt(10.0)),
    "qam64": _make_scheme("qam64", 3, 3, 1.0 / np.sqrt(42.0)),
}


def get_scheme(scheme) -> ModulationScheme:
    if isinstance(scheme, ModulationScheme):
        return scheme
    key = str(scheme).lower().replace("-", "")
    if key not in SCHEMES:
        raise ValueError(f"unknown modulation {scheme!r}, expected one of {sorted(SCHEMES)}")
    return SCHEMES[key]


def _pack(bits: np.ndarray) -> np.ndarray:
    """Rows of bits (MSB first) to integers."""
    weights = 1 << np.arange(bits.shape[-1] - 1, -1, -1)
    return bits @ weights


def modulate(bits, scheme) -> np.ndarray:
    """Map a bit array to unit-energy complex symbols."""
    sch = get_scheme(scheme)
    bits = np.asarray(bits, dtype=np.uint8)
    b = sch.bits_per_symbol
    if bits.ndim != 1:
        raise ValueError("modulate expects a flat bit array")
    if bits.size % b:
        raise ValueError(f"bit count {bits.size} not divisible by {b} ({sch.name})")
    groups = bits.reshape(-1, b)
    i_level = sch.i_table[_pack(groups[:, : sch.i_bits])]
    if sch.q_bits:
        q_level = sch.q_table[_pack(groups[:, sch.i_bits :])]
    else:
        q_level = np.zeros_like(i_level)
    return (i_level + 1j * q_level) * sch.normalization


def _axis_llrs(y: np.ndarray, table: np.ndarray, n_bits: int, norm: float, sigma2: float) -> np.ndarray:
    """Max-log LLRs for one axis; returns shape (len(y), n_bits)."""
    levels = table * norm  # indexed by bit pattern
    d2 = (y[:, None] - levels[None, :]) ** 2
    patterns = np.arange(1 << n_bits)
    out = np.empty((y.size, n_bits))
    for j in range(n_bits):
        bit = (patterns >> (n_bits - 1 - j)) & 1
        d0 = d2[:, bit == 0].min(axis=1)
        d1 = d2[:, bit == 1].min(axis=1)
        out[:, j] = (d1 - d0) / (2.0 * sigma2)
    return out


def demodulate(symbols, scheme, noise_var_per_dim: float) -> np.ndarray:
    """Soft-demap received symbols to per-bit LLRs (positive favors 0)."""
    sch = get_scheme(scheme)
    if noise_var_per_dim <= 0:
        raise ValueError(f"noise variance must be positive, got {noise_var_per_dim}")
    y = np.asarray(symbols, dtype=np.complex128)
    llr_i = _axis_llrs(y.real, sch.i_table, sch.i_bits, sch.normalization, noise_var_per_dim)
    if sch.q_bits:
        llr_q = _axis_llrs(y.imag, sch.q_table, sch.q_bits, sch.normalization, noise_var_per_dim)
        return np.concatenate([llr_i, llr_q], axis=1).reshape(-1)
    return llr_i.reshape(-1)


def exact_llrs(symbols, scheme, noise_var_per_dim: float) -> np.ndarray:
    """Exact log-sum-exp LLRs over the full constellation (reference only).

    Slower than demodulate(); kept as the oracle the max-log demapper is
    tested against.
    """
    sch = get_scheme(scheme)
    patterns, points = sch.constellation()
    y = np.asarray(symbols, dtype=np.complex128).reshape(-1, 1)
    metric = -np.abs(y - points[None, :]) ** 2 / (2.0 * noise_var_per_dim)
    b = sch.bits_per_symbol
    out = np.empty((y.size, b))
    from scipy.special import logsumexp

    for j in range(b):
        mask0 = patterns[:, j] == 0
        out[:, j] = logsumexp(metric[:, mask0], axis=1) - logsumexp(metric[:, ~mask0], axis=1)
    return out.reshape(-1)
