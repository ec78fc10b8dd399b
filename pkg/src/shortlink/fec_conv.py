"""Rate-1/2 convolutional code (constraint length 7) with soft Viterbi decoding.

Generators are the 802.11a polynomials 133 and 171 (octal). Encoding is
zero-tail terminated: six zero bits flush the register, so the codeword
has 2 * (k + 6) bits with the g0 and g1 outputs interleaved per input
bit. Tail bits are accounted as rate loss by callers.

The decoder maximizes the correlation of the LLR vector with the +/-1
image of each zero-terminated path (exactly ML for the soft metric) and
tracebacks over the whole block. Ties in add-compare-select keep the
path whose older decision bit is 0, so results are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import as_bits


@dataclass(frozen=True)
class ConvCodeSpec:
    constraint_length: int = 7
    g0_octal: int = 0o133
    g1_octal: int = 0o171

    @property
    def memory(self) -> int:
        return self.constraint_length - 1

    def generator_taps(self) -> tuple[np.ndarray, np.ndarray]:
        """Tap vectors, index 0 = current input bit."""
        k = self.constraint_length
        g0 = np.array([(self.g0_octal >> (k - 1 - i)) & 1 for i in range(k)], dtype=np.uint8)
        g1 = np.array([(self.g1_octal >> (k - 1 - i)) & 1 for i in range(k)], dtype=np.uint8)
        return g0, g1


WIFI_CC = ConvCodeSpec()


def conv_encode(msg, spec: ConvCodeSpec = WIFI_CC) -> np.ndarray:
    """Encode with zero-tail termination; output has 2*(len(msg)+m) bits."""
    msg = as_bits(msg)
    if msg.size == 0:
        raise ValueError("conv_encode needs a non-empty message")
    g0, g1 = spec.generator_taps()
    stream = np.concatenate([msg, np.zeros(spec.memory, dtype=np.uint8)])
    c0 = np.convolve(stream, g0) % 2
    c1 = np.convolve(stream, g1) % 2
    out = np.empty(2 * stream.size, dtype=np.uint8)
    out[0::2] = c0[: stream.size]
    out[1::2] = c1[: stream.size]
    return out


def _transition_tables(spec: ConvCodeSpec) -> tuple[np.ndarray, np.ndarray]:
    """Per (state, input) next state and +/-1 branch symbols.

    State encodes the last m input bits, newest in the MSB, so the two
    trellis predecessors of a state differ in their LSB (the oldest bit).
    """
    m = spec.memory
    n_states = 1 << m
    g0, g1 = spec.generator_taps()
    weights = 1 << np.arange(spec.constraint_length - 1, -1, -1)
    g0_mask = int(g0 @ weights)
    g1_mask = int(g1 @ weights)
    next_state = np.zeros((n_states, 2), dtype=np.int64)
    branch = np.zeros((n_states, 2, 2), dtype=np.float64)
    for s in range(n_states):
        for b in (0, 1):
            reg = (b << m) | s  # current input in the MSB position
            out0 = bin(reg & g0_mask).count("1") & 1
            out1 = bin(reg & g1_mask).count("1") & 1
            next_state[s, b] = (b << (m - 1)) | (s >> 1)
            branch[s, b, 0] = 1.0 - 2.0 * out0
            branch[s, b, 1] = 1.0 - 2.0 * out1
    return next_state, branch


_TABLE_CACHE: dict[ConvCodeSpec, tuple[np.ndarray, np.ndarray]] = {}


def _tables(spec: ConvCodeSpec):
    if spec not in _TABLE_CACHE:
        _TABLE_CACHE[spec] = _transition_tables(spec)
    return _TABLE_CACHE[spec]


@njit(cache=True)
def _viterbi_kernel(llr, n_steps, m, next_state, branch):
    n_states = next_state.shape[0]
    neg_inf = -1e30
    metric = np.full(n_states, neg_inf)
    metric[0] = 0.0  # encoder starts in the zero state
    new_metric = np.empty(n_states)
    choice = np.zeros((n_steps, n_states), dtype=np.uint8)
    for t in range(n_steps):
        l0 = llr[2 * t]
        l1 = llr[2 * t + 1]
        new_metric[:] = neg_inf
        for ns in range(n_states):
            # predecessors share all but the oldest register bit
            base = (ns << 1) & (n_states - 1)
            b = ns >> (m - 1)
            best = neg_inf
            pick = 0
            for par in (0, 1):
                s = base | par
                cand = metric[s] + branch[s, b, 0] * l0 + branch[s, b, 1] * l1
                if cand > best:  # strict: ties keep par = 0
                    best = cand
                    pick = par
            new_metric[ns] = best
            choice[t, ns] = pick
        metric[:] = new_metric
    # traceback from the zero state (zero-tail termination)
    bits = np.zeros(n_steps, dtype=np.uint8)
    state = 0
    for t in range(n_steps - 1, -1, -1):
        bits[t] = state >> (m - 1)
        state = ((state << 1) & (n_states - 1)) | choice[t, state]
    return bits


def viterbi_decode(llr, msg_len: int, spec: ConvCodeSpec = WIFI_CC) -> np.ndarray:
    """ML decode of a zero-terminated block; returns the msg_len data bits."""
    llr = np.ascontiguousarray(llr, dtype=np.float64)
    n_steps = msg_len + spec.memory
    if llr.size != 2 * n_steps:
        raise ValueError(f"LLR length {llr.size} does not match 2*({msg_len}+{spec.memory})")
    next_state, branch = _tables(spec)
    bits = _viterbi_kernel(llr, n_steps, spec.memory, next_state, branch)
    return bits[:msg_len]
