"""Uniform codec adapters used by the OFDM pipelines and the Monte Carlo
engine.

Every adapter exposes k (message bits), n (transmitted coded bits), rate
(k/n, the rate used for Eb/N0 accounting: CRC and tail bits count as rate
loss), encode(msg) and decode(llr). encode_calls / decode_calls counters
make the call-count contracts testable.
"""

from __future__ import annotations

import numpy as np

from . import fec_conv, fec_ldpc, fec_polar
from .core import as_bits, hard_decision

CODE_KINDS = ("polar", "ldpc", "cc", "none")


class _Counted:
    def __init__(self):
        self.encode_calls = 0
        self.decode_calls = 0

    def reset_counters(self) -> None:
        self.encode_calls = 0
        self.decode_calls = 0

    @property
    def rate(self) -> float:
        return self.k / self.n


class PolarCodec(_Counted):
    """CRC-16 inside the polar payload, CRC-aided SCL(16) decoding."""

    kind = "polar"

    def __init__(self, k_msg: int, list_size: int = fec_polar.DEFAULT_LIST_SIZE):
        super().__init__()
        self.spec = fec_polar.make_polar_spec(k_msg, list_size=list_size)
        self.k = k_msg
        self.n = self.spec.n
        self.last_ok: bool | None = None

    def encode(self, msg) -> np.ndarray:
        self.encode_calls += 1
        return fec_polar.polar_encode(fec_polar.crc16_append(msg), self.spec)

    def decode(self, llr) -> np.ndarray:
        self.decode_calls += 1
        bits, ok = fec_polar.crc_scl_decode(llr, self.spec)
        self.last_ok = ok
        return bits


class LdpcCodec(_Counted):
    kind = "ldpc"

    def __init__(self, k_msg: int, seed: int = fec_ldpc.DEFAULT_SEED):
        super().__init__()
        self.spec = fec_ldpc.default_spec(2 * k_msg, seed)
        self.k = k_msg
        self.n = self.spec.n
        self.last_ok: bool | None = None

    def encode(self, msg) -> np.ndarray:
        self.encode_calls += 1
        return fec_ldpc.ldpc_encode(msg, self.spec)

    def decode(self, llr) -> np.ndarray:
        self.decode_calls += 1
        bits, _iterations, ok = fec_ldpc.ldpc_decode_logbp(llr, self.spec)
        self.last_ok = ok
        return bits


class ConvBlockCodec(_Counted):
    """Whole-message zero-tail convolutional coding (one trellis per frame)."""

    kind = "cc"

    def __init__(self, k_msg: int, spec: fec_conv.ConvCodeSpec = fec_conv.WIFI_CC):
        super().__init__()
        self.spec = spec
        self.k = k_msg
        self.n = 2 * (k_msg + spec.memory)

    def encode(self, msg) -> np.ndarray:
        self.encode_calls += 1
        return fec_conv.conv_encode(msg, self.spec)

    def decode(self, llr) -> np.ndarray:
        self.decode_calls += 1
        return fec_conv.viterbi_decode(llr, self.k, self.spec)


class ConvChunkCoder(_Counted):
    """Variable-length convolutional coder for the per-symbol pipeline.

    Unlike the block adapters this one takes a fresh zero-tailed trellis
    per call, so k/n/rate are undefined; only the call counters matter.
    """

    kind = "cc"

    def __init__(self, spec: fec_conv.ConvCodeSpec = fec_conv.WIFI_CC):
        super().__init__()
        self.spec = spec

    def encode(self, msg) -> np.ndarray:
        self.encode_calls += 1
        return fec_conv.conv_encode(msg, self.spec)

    def decode(self, llr, msg_len: int) -> np.ndarray:
        self.decode_calls += 1
        return fec_conv.viterbi_decode(llr, msg_len, self.spec)


class NoCodec(_Counted):
    kind = "none"

    def __init__(self, k_msg: int):
        super().__init__()
        self.k = k_msg
        self.n = k_msg

    def encode(self, msg) -> np.ndarray:
        self.encode_calls += 1
        return as_bits(msg).copy()

    def decode(self, llr) -> np.ndarray:
        self.decode_calls += 1
        return hard_decision(llr)


def make_codec(kind: str, k_msg: int):
    kind = kind.lower()
    if kind == "polar":
        return PolarCodec(k_msg)
    if kind == "ldpc":
        return LdpcCodec(k_msg)
    if kind == "cc":
        return ConvBlockCodec(k_msg)
    if kind == "none":
        return NoCodec(k_msg)
    raise ValueError(f"unknown code kind {kind!r}, expected one of {CODE_KINDS}")
