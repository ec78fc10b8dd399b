"""Monte Carlo BER/PER engine.

Determinism contract: every (link, point, batch) triple owns a counter-mode
random stream, so results are byte-identical for any worker count and any
stopping decision. Batches are always applied in index order; a stop that
triggers at batch j discards any batches > j that finished early.
"""

from __future__ import annotations

import csv
import io
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import fec_conv, ofdm_phy
from .channel import awgn, ebn0_to_sigma2
from .codecs import CODE_KINDS, make_codec
from .core import RandomStream, count_errors, hard_decision
from .modem import demodulate, get_scheme, modulate

BATCH_FRAMES = 256
CODE_DIMENSIONS = (64, 128, 256, 512)
GRIDS = ("subcarrier", "ofdm")

CSV_HEADER = ("code,K,N,rate,mod,framed,ebn0_db,frames,bits,bit_errors,frame_errors,"
              "ber,per,ber_ci_lo,ber_ci_hi,per_ci_lo,per_ci_hi,pdet,serr,derr,seed,elapsed_s")


def _bit_coded_n(k: int, mod: str, spec: fec_conv.ConvCodeSpec = fec_conv.WIFI_CC) -> int:
    chunk = ofdm_phy.bit_coded_chunk_len(ofdm_phy.DEFAULT_CFG, mod, spec)
    sizes = [chunk] * (k // chunk) + ([k % chunk] if k % chunk else [])
    return sum(2 * (s + spec.memory) for s in sizes)


@dataclass(frozen=True)
class LinkConfig:
    """One simulated link: code family, message size, mapping and pipeline.

    grid "subcarrier" evaluates symbols straight over AWGN; "ofdm" runs the
    full waveform chain. framed adds preamble + SIGNAL and classifies
    errors (implies the ofdm grid). The cc code is block-coded on the
    subcarrier grid and per-symbol coded on the ofdm grid, mirroring the
    two transmitter architectures.
    """

    code: str = "none"
    k: int = 256
    mod: str = "bpsk"
    grid: str = "subcarrier"
    framed: bool = False
    seed: int = 1
    bandwidth_mhz: float = 20.0

    def __post_init__(self):
        if self.code not in CODE_KINDS:
            raise ValueError(f"code must be one of {CODE_KINDS}")
        if self.code != "none" and self.k not in CODE_DIMENSIONS:
            raise ValueError(f"K={self.k} unsupported, pick from {CODE_DIMENSIONS}")
        if self.k < 1:
            raise ValueError("k must be positive")
        if self.grid not in GRIDS:
            raise ValueError(f"grid must be one of {GRIDS}")
        if self.framed and self.grid != "ofdm":
            object.__setattr__(self, "grid", "ofdm")
        if self.bandwidth_mhz <= 0:
            raise ValueError("bandwidth_mhz must be positive")
        get_scheme(self.mod)

    @property
    def ofdm_cfg(self) -> ofdm_phy.OfdmConfig:
        return ofdm_phy.OfdmConfig(bandwidth_hz=self.bandwidth_mhz * 1e6)

    @property
    def bit_coded(self) -> bool:
        """True when the cc payload restarts per OFDM symbol."""
        return self.code == "cc" and self.grid == "ofdm"

    @property
    def n_coded(self) -> int:
        if self.code == "none":
            return self.k
        if self.code in ("polar", "ldpc"):
            return 2 * self.k
        return (_bit_coded_n(self.k, self.mod) if self.bit_coded
                else 2 * (self.k + fec_conv.WIFI_CC.memory))

    @property
    def rate(self) -> float:
        """Eb/N0 accounting rate: message bits over transmitted coded bits
        (CRC and tail bits are rate loss; pad/preamble/SIGNAL are not)."""
        return self.k / self.n_coded


@dataclass(frozen=True)
class StoppingRule:
    max_frames: int = 1_000_000
    min_bit_errors: int = 100
    min_frame_errors: int = 0

    def satisfied(self, bit_errors: int, frame_errors: int) -> bool:
        return bit_errors >= self.min_bit_errors and frame_errors >= self.min_frame_errors


def wilson_interval(successes: int, trials: int, z: float = 1.959964) -> tuple[float, float]:
    """95% Wilson score interval; (0, 0) for zero trials."""
    if trials == 0:
        return 0.0, 0.0
    p = successes / trials
    z2 = z * z
    mid = (p + z2 / (2 * trials)) / (1 + z2 / trials)
    half = z * np.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials)) / (1 + z2 / trials)
    # exact endpoints at 0 or n successes, not a ~1e-21 rounding residue
    lo = 0.0 if successes == 0 else max(mid - half, 0.0)
    hi = 1.0 if successes == trials else min(mid + half, 1.0)
    return lo, hi


@dataclass
class PointResult:
    link: LinkConfig
    ebn0_db: float
    frames: int = 0
    bits: int = 0
    bit_errors: int = 0
    frame_errors: int = 0
    pdet: int = 0
    serr: int = 0
    derr: int = 0
    elapsed_s: float = 0.0

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else 0.0

    @property
    def per(self) -> float:
        return self.frame_errors / self.frames if self.frames else 0.0

    def ber_ci(self) -> tuple[float, float]:
        return wilson_interval(self.bit_errors, self.bits)

    def per_ci(self) -> tuple[float, float]:
        return wilson_interval(self.frame_errors, self.frames)

    def csv_row(self) -> list:
        # floats as shortest round-trip decimals; only elapsed_s is lossy
        blo, bhi = self.ber_ci()
        plo, phi = self.per_ci()
        return [self.link.code, self.link.k, self.link.n_coded, str(self.link.rate),
                self.link.mod, int(self.link.framed), str(float(self.ebn0_db)), self.frames,
                self.bits, self.bit_errors, self.frame_errors,
                str(self.ber), str(self.per), str(blo), str(bhi), str(plo), str(phi),
                self.pdet, self.serr, self.derr, self.link.seed, f"{self.elapsed_s:.3f}"]


def classify_frame(counts: np.ndarray, outcome: ofdm_phy.ClassifyResult) -> None:
    """Tally one framed outcome into the [.., pdet, serr, derr] counter row;
    the classes are mutually exclusive, NONE leaves the tallies unchanged."""
    if outcome.error_class is ofdm_phy.ErrorClass.DETECTION:
        counts[4] += 1
    elif outcome.error_class is ofdm_phy.ErrorClass.SIGNAL:
        counts[5] += 1
    elif outcome.error_class is ofdm_phy.ErrorClass.DATA:
        counts[6] += 1


# Block codecs are stateless apart from call counters; one per process.
_CODEC_CACHE: dict[tuple[str, int], object] = {}


def _codec_for(code: str, k: int):
    key = (code, k)
    if key not in _CODEC_CACHE:
        _CODEC_CACHE[key] = make_codec(code, k)
    return _CODEC_CACHE[key]


def _batch_counts(link: LinkConfig, ebn0_db: float, stream: RandomStream,
                  n_frames: int) -> np.ndarray:
    """Simulate one batch; returns int64 counters
    [frames, bits, bit_errors, frame_errors, pdet, serr, derr]."""
    sigma2 = ebn0_to_sigma2(ebn0_db, link.rate, get_scheme(link.mod).bits_per_symbol)
    rng = stream.generator()
    msgs = (rng.random((n_frames, link.k)) < 0.5).astype(np.uint8)
    out = np.zeros(7, dtype=np.int64)
    out[0] = n_frames
    out[1] = n_frames * link.k

    if link.framed:
        cfg = link.ofdm_cfg
        codec = None if link.code == "cc" else _codec_for(link.code, link.k)
        for msg in msgs:
            wf = ofdm_phy.transmit_frame(msg, codec, link.mod, cfg)
            rx = awgn(wf, sigma2, rng)
            res = ofdm_phy.detect_and_classify(rx, sigma2,
                                               ofdm_phy.FrameTruth(msg, codec, link.mod), cfg)
            out[2] += res.bit_errors
            classify_frame(out, res)
        out[3] = out[4] + out[5] + out[6]
        return out

    if link.grid == "subcarrier":
        if link.code == "none":
            # uncoded fast path: whole batch in one vectorized pass
            sym = modulate(msgs.reshape(-1), link.mod)
            llr = demodulate(awgn(sym, sigma2, rng), link.mod, sigma2)
            errs = (hard_decision(llr) != msgs.reshape(-1)).reshape(n_frames, -1)
            out[2] = int(errs.sum())
            out[3] = int(errs.any(axis=1).sum())
            return out
        codec = _codec_for(link.code, link.k)
        for msg in msgs:
            sym = modulate(codec.encode(msg), link.mod)
            llr = demodulate(awgn(sym, sigma2, rng), link.mod, sigma2)
            n_err, _ = count_errors(msg, codec.decode(llr))
            out[2] += n_err
            out[3] += bool(n_err)
        return out

    # unframed full chain
    cfg = link.ofdm_cfg
    if link.bit_coded:
        for msg in msgs:
            wf, _ = ofdm_phy.transmit_bit_coded(msg, link.mod, cfg)
            rx = awgn(wf, sigma2, rng)
            dec, _ = ofdm_phy.receive_bit_coded(rx, sigma2, link.k, link.mod, cfg)
            n_err, _ = count_errors(msg, dec)
            out[2] += n_err
            out[3] += bool(n_err)
        return out
    codec = _codec_for(link.code, link.k)
    if link.code == "none":
        # one waveform per batch keeps the chain exact and the loop short
        padded, _ = ofdm_phy.add_padding_bits(msgs.reshape(-1), cfg, link.mod)
        wf = ofdm_phy.ofdm_modulate_symbols(modulate(padded, link.mod), cfg)
        tones = ofdm_phy.ofdm_demodulate_symbols(awgn(wf, sigma2, rng), cfg)
        llr = demodulate(tones, link.mod, sigma2)[: n_frames * link.k]
        errs = (hard_decision(llr) != msgs.reshape(-1)).reshape(n_frames, -1)
        out[2] = int(errs.sum())
        out[3] = int(errs.any(axis=1).sum())
        return out
    for msg in msgs:
        wf, _ = ofdm_phy.transmit_block_coded(msg, codec, link.mod, cfg)
        rx = awgn(wf, sigma2, rng)
        dec, _ = ofdm_phy.receive_block_coded(rx, sigma2, codec, link.mod, cfg)
        n_err, _ = count_errors(msg, dec)
        out[2] += n_err
        out[3] += bool(n_err)
    return out


def _batch_stream(link: LinkConfig, point_index: int, batch_index: int) -> RandomStream:
    return RandomStream(link.seed, (point_index << 32) + batch_index)


def _batch_job(args) -> tuple[int, np.ndarray]:
    link, ebn0_db, point_index, batch_index, n_frames = args
    stream = _batch_stream(link, point_index, batch_index)
    return batch_index, _batch_counts(link, ebn0_db, stream, n_frames)


def run_point(link: LinkConfig, ebn0_db: float, stop: StoppingRule | None = None,
              workers: int = 1, point_index: int = 0,
              executor: ProcessPoolExecutor | None = None) -> PointResult:
    """Accumulate batches until the stopping rule fires (checked per batch,
    in batch order, so the outcome is independent of worker count)."""
    stop = stop or StoppingRule()
    res = PointResult(link, ebn0_db)
    t0 = time.perf_counter()
    max_batches = -(-stop.max_frames // BATCH_FRAMES)

    def batch_args(i):
        n = min(BATCH_FRAMES, stop.max_frames - i * BATCH_FRAMES)
        return (link, ebn0_db, point_index, i, n)

    def apply(counts: np.ndarray) -> bool:
        res.frames += int(counts[0])
        res.bits += int(counts[1])
        res.bit_errors += int(counts[2])
        res.frame_errors += int(counts[3])
        res.pdet += int(counts[4])
        res.serr += int(counts[5])
        res.derr += int(counts[6])
        return stop.satisfied(res.bit_errors, res.frame_errors)

    if workers <= 1 and executor is None:
        for i in range(max_batches):
            if apply(_batch_counts(link, ebn0_db, _batch_stream(link, point_index, i),
                                   batch_args(i)[4])):
                break
    else:
        own = executor is None
        pool = executor or ProcessPoolExecutor(max_workers=workers)
        try:
            done = False
            for wave_start in range(0, max_batches, max(workers, 1)):
                wave = range(wave_start, min(wave_start + max(workers, 1), max_batches))
                for _idx, counts in sorted(pool.map(_batch_job, [batch_args(i) for i in wave])):
                    if apply(counts):
                        done = True
                        break
                if done:
                    break
        finally:
            if own:
                pool.shutdown()
    res.elapsed_s = time.perf_counter() - t0
    return res


def run_sweep(link: LinkConfig, ebn0_grid, stop: StoppingRule | None = None,
              workers: int = 1) -> list[PointResult]:
    grid = [float(x) for x in ebn0_grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("ebn0 grid must be strictly increasing")
    return [run_point(link, ebn0, stop, workers, point_index=i)
            for i, ebn0 in enumerate(grid)]


def write_csv(results, out) -> None:
    """Write PointResults as CSV (path or writable text file)."""
    close = False
    if isinstance(out, (str, os.PathLike)):
        out = open(out, "w", newline="")
        close = True
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(CSV_HEADER.split(","))
        for r in results:
            writer.writerow(r.csv_row())
    finally:
        if close:
            out.close()


def csv_text(results) -> str:
    buf = io.StringIO()
    write_csv(results, buf)
    return buf.getvalue()
