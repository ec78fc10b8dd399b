"""Polar codes: Bhattacharyya construction, Arikan encoding, SC / SCL /
CRC-aided SCL decoding.

Construction starts from Z0 = exp(-10^(designSNR_dB/10)) and doubles with
child- = 2Z - Z^2, child+ = Z^2, worst child first inside each index pair,
which keeps everything in natural (non bit-reversed) order: the encoder
applies x = u F^{kron n} as an in-place butterfly and the decoders walk
the same recursion with min-sum f nodes and exact g nodes.

The 16-bit CRC (polynomial 0x1021, initial register all ones, no final
XOR, MSB first) travels inside the polar payload: a spec for K message
bits uses N = 2K and an information set of K + 16 indices, so the channel
rate is exactly 1/2 while the internal polar rate is (K+16)/N.

Path metrics are additive: a decision that contradicts the sign of its
LLR pays |llr|. List pruning keeps the lowest-metric paths, ties resolved
by path index, so decode results are bit-reproducible.
"""

from __future__ import annotations

import importlib.resources
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .core import as_bits

CRC_POLY = 0x1021
CRC_INIT = 0xFFFF
CRC_LEN = 16
DEFAULT_DESIGN_SNR_DB = 2.0
DEFAULT_LIST_SIZE = 16


def bhattacharyya_construct(n: int, design_snr_db: float = DEFAULT_DESIGN_SNR_DB, z0: float | None = None) -> np.ndarray:
    """Bhattacharyya parameters of the N synthetic channels, natural order.

    z0 overrides the SNR-derived initial value (test hook).
    """
    if n < 1 or n & (n - 1):
        raise ValueError(f"code length must be a power of two, got {n}")
    z = np.array([math.exp(-(10.0 ** (design_snr_db / 10.0))) if z0 is None else z0])
    while z.size < n:
        nxt = np.empty(2 * z.size)
        nxt[0::2] = 2.0 * z - z * z  # worse child first in each pair
        nxt[1::2] = z * z
        z = nxt
    return z


def select_info_set(z: np.ndarray, k_total: int) -> np.ndarray:
    """Indices of the k_total most reliable channels (smallest Z), sorted.

    Equal Z values are won by the lower index.
    """
    if not 0 <= k_total <= z.size:
        raise ValueError(f"k_total={k_total} out of range for N={z.size}")
    order = np.argsort(z, kind="stable")
    return np.sort(order[:k_total])


def polar_transform(u) -> np.ndarray:
    """x = u F^{kron n} over GF(2), natural order. Self-inverse."""
    x = as_bits(u).copy()
    n = x.size
    if n & (n - 1):
        raise ValueError(f"length must be a power of two, got {n}")
    half = 1
    while half < n:
        for start in range(0, n, 2 * half):
            x[start : start + half] ^= x[start + half : start + 2 * half]
        half *= 2
    return x


def crc16_bits(msg_bits) -> np.ndarray:
    """CRC register after feeding msg_bits MSB-first, as 16 bits."""
    reg = CRC_INIT
    for b in as_bits(msg_bits):
        fb = (reg >> 15) ^ int(b)
        reg = ((reg << 1) & 0xFFFF) ^ (CRC_POLY if fb else 0)
    return np.array([(reg >> (15 - i)) & 1 for i in range(16)], dtype=np.uint8)


def crc16_append(msg) -> np.ndarray:
    msg = as_bits(msg)
    return np.concatenate([msg, crc16_bits(msg)])


def crc16_check(msg_plus_crc) -> bool:
    bits = as_bits(msg_plus_crc)
    if bits.size < CRC_LEN:
        raise ValueError(f"need at least {CRC_LEN} bits, got {bits.size}")
    return bool(np.array_equal(crc16_bits(bits[:-CRC_LEN]), bits[-CRC_LEN:]))


def _crc_syndrome_map(length: int) -> tuple[np.ndarray, np.ndarray]:
    """Affine map: bits x of `length` validate iff (x @ mat + offs) % 2 == 0.

    Derived from the bitwise reference, exploiting that the register is an
    affine function of the input bits. Feeding a message followed by its
    own CRC drives the register to zero for this parameterization.
    """
    zero = np.zeros(length, dtype=np.uint8)
    reg_zero_init = _crc_register_linear(zero, init=0)
    offs = _crc_register_linear(zero, init=CRC_INIT)
    mat = np.zeros((length, 16), dtype=np.uint8)
    for j in range(length):
        e = zero.copy()
        e[j] = 1
        mat[j] = _crc_register_linear(e, init=0) ^ reg_zero_init
    return mat, offs


def _crc_register_linear(bits: np.ndarray, init: int) -> np.ndarray:
    reg = init
    for b in bits:
        fb = (reg >> 15) ^ int(b)
        reg = ((reg << 1) & 0xFFFF) ^ (CRC_POLY if fb else 0)
    return np.array([(reg >> (15 - i)) & 1 for i in range(16)], dtype=np.uint8)


@dataclass(frozen=True, eq=False)
class PolarCodeSpec:
    n: int
    k_msg: int
    crc_len: int
    info_set: np.ndarray = field(repr=False)
    frozen_set: np.ndarray = field(repr=False)
    frozen_mask: np.ndarray = field(repr=False)
    list_size: int = DEFAULT_LIST_SIZE
    design_snr_db: float = DEFAULT_DESIGN_SNR_DB
    crc_mat: np.ndarray | None = field(default=None, repr=False)
    crc_offs: np.ndarray | None = field(default=None, repr=False)

    @property
    def k_total(self) -> int:
        return self.k_msg + self.crc_len


def make_polar_spec(
    k_msg: int,
    n: int | None = None,
    crc_len: int = CRC_LEN,
    design_snr_db: float = DEFAULT_DESIGN_SNR_DB,
    list_size: int = DEFAULT_LIST_SIZE,
) -> PolarCodeSpec:
    """Spec for K message bits; defaults to the rate-1/2 mother code N = 2K."""
    if n is None:
        n = 2 * k_msg
    k_total = k_msg + crc_len
    if n < 1 or n & (n - 1):
        raise ValueError(f"N must be a power of two, got {n}")
    if not 0 <= k_total <= n:
        raise ValueError(f"K_msg + crc = {k_total} does not fit in N = {n}")
    z = bhattacharyya_construct(n, design_snr_db)
    info = select_info_set(z, k_total)
    mask = np.ones(n, dtype=np.uint8)
    mask[info] = 0
    crc_mat, crc_offs = _crc_syndrome_map(k_total) if crc_len == CRC_LEN else (None, None)
    return PolarCodeSpec(
        n=n,
        k_msg=k_msg,
        crc_len=crc_len,
        info_set=info,
        frozen_set=np.flatnonzero(mask),
        frozen_mask=mask,
        list_size=list_size,
        design_snr_db=design_snr_db,
        crc_mat=crc_mat,
        crc_offs=crc_offs,
    )


def polar_encode(msg_plus_crc, spec: PolarCodeSpec) -> np.ndarray:
    """Place payload on the information set and apply the butterfly."""
    payload = as_bits(msg_plus_crc)
    if payload.size != spec.k_total:
        raise ValueError(f"payload length {payload.size} != K_total={spec.k_total}")
    u = np.zeros(spec.n, dtype=np.uint8)
    u[spec.info_set] = payload
    return polar_transform(u)


@njit(cache=True, inline="always")
def _f_node(a: float, b: float, exact: bool) -> float:
    if exact:
        pa = min(max(a, -40.0), 40.0)
        pb = min(max(b, -40.0), 40.0)
        p = np.tanh(0.5 * pa) * np.tanh(0.5 * pb)
        p = min(max(p, -(1.0 - 1e-15)), 1.0 - 1e-15)
        return 2.0 * np.arctanh(p)
    s = 1.0 if (a >= 0.0) == (b >= 0.0) else -1.0
    return s * min(abs(a), abs(b))


@njit(cache=True, inline="always")
def _refresh_llrs(llr_mem, bit_mem, phi: int, n_levels: int, exact_f: bool) -> None:
    # leaf phi done means: g-update at the lowest flipped level, f below it
    if phi == 0:
        top = n_levels
    else:
        lev = 0
        while (phi >> lev) & 1 == 0:
            lev += 1
        size = 1 << lev
        off_c = size - 1
        off_p = 2 * size - 1
        for i in range(size):
            a = llr_mem[off_p + i]
            b = llr_mem[off_p + i + size]
            u = bit_mem[off_c + i]
            llr_mem[off_c + i] = b + (1.0 - 2.0 * u) * a
        top = lev
    for lev in range(top - 1, -1, -1):
        size = 1 << lev
        off_c = size - 1
        off_p = 2 * size - 1
        for i in range(size):
            llr_mem[off_c + i] = _f_node(llr_mem[off_p + i], llr_mem[off_p + i + size], exact_f)


@njit(cache=True, inline="always")
def _propagate_bits(bit_mem, phi: int, n_levels: int, u: int, cur, nxt) -> None:
    cur[0] = u
    size = 1
    lev = 0
    while lev < n_levels and (phi >> lev) & 1:
        off = size - 1
        for i in range(size):
            nxt[i] = bit_mem[off + i] ^ cur[i]
            nxt[size + i] = cur[i]
        size *= 2
        cur[:size] = nxt[:size]
        lev += 1
    if lev < n_levels:
        off = size - 1
        bit_mem[off : off + size] = cur[:size]


@njit(cache=True)
def _sc_kernel(chan_llr, frozen_mask, exact_f):
    n = chan_llr.size
    n_levels = 0
    while (1 << n_levels) < n:
        n_levels += 1
    llr_mem = np.empty(2 * n - 1)
    llr_mem[n - 1 :] = chan_llr
    bit_mem = np.zeros(max(n - 1, 1), dtype=np.uint8)
    u_hat = np.zeros(n, dtype=np.uint8)
    cur = np.empty(n, dtype=np.uint8)
    nxt = np.empty(n, dtype=np.uint8)
    for phi in range(n):
        _refresh_llrs(llr_mem, bit_mem, phi, n_levels, exact_f)
        if frozen_mask[phi]:
            u = 0
        else:
            u = 1 if llr_mem[0] < 0.0 else 0
        u_hat[phi] = u
        _propagate_bits(bit_mem, phi, n_levels, u, cur, nxt)
    return u_hat


@njit(cache=True)
def _scl_kernel(chan_llr, frozen_mask, list_size, exact_f):
    n = chan_llr.size
    n_levels = 0
    while (1 << n_levels) < n:
        n_levels += 1
    lmax = list_size
    llr_mem = np.empty((lmax, 2 * n - 1))
    bit_mem = np.zeros((lmax, max(n - 1, 1)), dtype=np.uint8)
    u_hist = np.zeros((lmax, n), dtype=np.uint8)
    pm = np.full(lmax, np.inf)
    active = np.zeros(lmax, dtype=np.uint8)
    llr_mem[0, n - 1 :] = chan_llr
    pm[0] = 0.0
    active[0] = 1
    cur = np.empty(n, dtype=np.uint8)
    nxt = np.empty(n, dtype=np.uint8)

    cand_slot = np.empty(2 * lmax, dtype=np.int64)
    cand_u = np.empty(2 * lmax, dtype=np.uint8)
    cand_pm = np.empty(2 * lmax)
    src_of = np.empty(lmax, dtype=np.int64)
    u_of = np.empty(lmax, dtype=np.uint8)
    slot_taken = np.zeros(lmax, dtype=np.uint8)

    for phi in range(n):
        for s in range(lmax):
            if active[s]:
                _refresh_llrs(llr_mem[s], bit_mem[s], phi, n_levels, exact_f)
        if frozen_mask[phi]:
            for s in range(lmax):
                if active[s]:
                    l0 = llr_mem[s, 0]
                    if l0 < 0.0:
                        pm[s] += -l0
                    u_hist[s, phi] = 0
                    _propagate_bits(bit_mem[s], phi, n_levels, 0, cur, nxt)
            continue

        # fork every active path on u in {0, 1}
        n_cand = 0
        for s in range(lmax):
            if active[s]:
                l0 = llr_mem[s, 0]
                for u in range(2):
                    cand_slot[n_cand] = s
                    cand_u[n_cand] = u
                    penalty = 0.0
                    if u == 0 and l0 < 0.0:
                        penalty = -l0
                    elif u == 1 and l0 > 0.0:
                        penalty = l0
                    cand_pm[n_cand] = pm[s] + penalty
                    n_cand += 1
        n_keep = min(lmax, n_cand)
        order = np.argsort(cand_pm[:n_cand], kind="mergesort")  # stable: index tie-break
        keep = np.zeros(n_cand, dtype=np.uint8)
        for i in range(n_keep):
            keep[order[i]] = 1

        # assign surviving candidates to slots: first use keeps its slot,
        # a sibling clone takes the lowest free slot
        for s in range(lmax):
            slot_taken[s] = 0
            src_of[s] = -1
        clone_src = np.empty(n_keep, dtype=np.int64)
        clone_u = np.empty(n_keep, dtype=np.uint8)
        clone_pm = np.empty(n_keep)
        n_clone = 0
        for c in range(n_cand):
            if not keep[c]:
                continue
            s = cand_slot[c]
            if not slot_taken[s]:
                slot_taken[s] = 1
                src_of[s] = s
                u_of[s] = cand_u[c]
                pm[s] = cand_pm[c]
            else:
                clone_src[n_clone] = s
                clone_u[n_clone] = cand_u[c]
                clone_pm[n_clone] = cand_pm[c]
                n_clone += 1
        free_ptr = 0
        for i in range(n_clone):
            while slot_taken[free_ptr]:
                free_ptr += 1
            t = free_ptr
            slot_taken[t] = 1
            src = clone_src[i]
            llr_mem[t] = llr_mem[src]
            bit_mem[t] = bit_mem[src]
            u_hist[t] = u_hist[src]
            src_of[t] = src
            u_of[t] = clone_u[i]
            pm[t] = clone_pm[i]
        for s in range(lmax):
            if slot_taken[s]:
                active[s] = 1
                u_hist[s, phi] = u_of[s]
                _propagate_bits(bit_mem[s], phi, n_levels, u_of[s], cur, nxt)
            else:
                active[s] = 0
                pm[s] = np.inf
    return u_hist, pm, active


def sc_decode(llr, spec: PolarCodeSpec, exact_f: bool = False) -> np.ndarray:
    """Successive cancellation; returns the info-set bits (message + CRC)."""
    llr = np.ascontiguousarray(llr, dtype=np.float64)
    if llr.size != spec.n:
        raise ValueError(f"LLR length {llr.size} != N={spec.n}")
    u_hat = _sc_kernel(llr, spec.frozen_mask, exact_f)
    return u_hat[spec.info_set]


def scl_decode(llr, spec: PolarCodeSpec, list_size: int | None = None, exact_f: bool = False):
    """List decode; returns [(info_bits, path_metric)] sorted by metric."""
    llr = np.ascontiguousarray(llr, dtype=np.float64)
    if llr.size != spec.n:
        raise ValueError(f"LLR length {llr.size} != N={spec.n}")
    lsz = spec.list_size if list_size is None else int(list_size)
    if lsz < 1:
        raise ValueError(f"list size must be >= 1, got {list_size}")
    u_hist, pm, active = _scl_kernel(llr, spec.frozen_mask, lsz, exact_f)
    slots = np.flatnonzero(active)
    order = slots[np.argsort(pm[slots], kind="stable")]
    return [(u_hist[s][spec.info_set].copy(), float(pm[s])) for s in order]


def crc_scl_decode(llr, spec: PolarCodeSpec):
    """CRC-aided list decode with the spec's list size.

    Returns (message bits, crc_ok): the best path that passes CRC, or the
    best path overall with crc_ok False. CRC bits are stripped.
    """
    paths = scl_decode(llr, spec)
    if spec.crc_mat is None:
        raise ValueError("spec carries no CRC")
    for bits, _metric in paths:
        syndrome = (bits @ spec.crc_mat + spec.crc_offs) & 1
        if not syndrome.any():
            return bits[: spec.k_msg].copy(), True
    return paths[0][0][: spec.k_msg].copy(), False


def frozen_set_text(spec: PolarCodeSpec) -> str:
    """Plain-text export of the frozen indices (diffable pin)."""
    head = f"# N={spec.n} design_snr_db={spec.design_snr_db} k_total={spec.k_total}\n"
    return head + "\n".join(str(i) for i in spec.frozen_set) + "\n"


def pinned_frozen_set(n: int, design_snr_db: float = DEFAULT_DESIGN_SNR_DB) -> np.ndarray | None:
    """Frozen set shipped under data/polar for the rate-1/2 spec, if present."""
    name = f"frozen_n{n}_snr{design_snr_db:g}.txt"
    res = importlib.resources.files("shortlink").joinpath("data", "polar", name)
    if not res.is_file():
        return None
    lines = [ln for ln in res.read_text().splitlines() if ln and not ln.startswith("#")]
    return np.array([int(x) for x in lines], dtype=np.int64)
