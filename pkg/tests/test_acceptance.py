"""End-to-end acceptance gate.

One test per numbered acceptance criterion; each prints a single
"[criterion N] PASS/FAIL" line straight to the terminal (bypassing pytest
capture) and then asserts. Every Monte Carlo point runs with a pinned seed,
so each verdict is deterministic and reproducible bit for bit.

Criterion 6 is known to fail: the measured Eb/N0 gap between the
convolutional and polar systems at PER = 1e-3 is about 2.7 dB against a
required 3.0 dB. The test asserts the requirement as stated and reports
the measured crossings rather than relaxing the threshold.
"""

import math
import time

import numpy as np
import pytest

from conftest import random_bits
from shortlink import analysis, fec_conv, fec_ldpc, fec_polar, ofdm_phy
from shortlink import montecarlo as mc
from shortlink.analysis import STANDARD_ROWS, capacity, packet_duration_80211, qfunc
from shortlink.codecs import ConvChunkCoder, make_codec
from shortlink.core import RandomStream
from shortlink.modem import SCHEMES, get_scheme


def _report(capsys, num: int, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\n[criterion {num:2d}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"criterion {num}: {detail}"


def _sweep(code, k, grid_pts, stop, *, mod="bpsk", link_grid="subcarrier",
           framed=False, seed=1):
    link = mc.LinkConfig(code=code, k=k, mod=mod, grid=link_grid, framed=framed, seed=seed)
    return mc.run_sweep(link, grid_pts, stop)


# ---------------------------------------------------------------------------


def test_criterion_01_uncoded_bpsk_matches_q(capsys):
    """Uncoded BPSK BER equals Q(sqrt(2 Eb/N0)) on both pipelines,
    within 3 binomial standard deviations at 1e6 bits per point."""
    t0 = time.perf_counter()
    points = [0.0, 2.0, 4.0, 6.0]
    worst = 0.0
    for link_grid, k, frames in (("subcarrier", 1000, 1000), ("ofdm", 4000, 250)):
        stop = mc.StoppingRule(max_frames=frames, min_bit_errors=10**9)
        for r in _sweep("none", k, points, stop, link_grid=link_grid, seed=301):
            p = qfunc(math.sqrt(2.0 * 10 ** (r.ebn0_db / 10)))
            z = abs(r.ber - p) / math.sqrt(p * (1 - p) / r.bits)
            worst = max(worst, z)
            assert r.bits == 10**6
    _report(capsys, 1, worst < 3.0,
            f"uncoded BER matches the Q-function oracle on both pipelines, "
            f"worst |z| = {worst:.2f} (< 3), 1e6 bits x 8 points, "
            f"{time.perf_counter() - t0:.0f}s")


def test_criterion_02_packet_durations_exact(capsys):
    expected = {"802.11a/g": 32.0, "802.11n-20": 40.0, "802.11n-40": 36.0,
                "802.11ac-80": 44.0, "802.11ac-160": 44.0}
    got = {row.name: packet_duration_80211(row, 100) for row in STANDARD_ROWS}
    ok = set(got) == set(expected) and all(
        got[name] == pytest.approx(expected[name], abs=1e-9) for name in expected)
    _report(capsys, 2, ok,
            "100-bit packet durations are exactly "
            + ", ".join(f"{got[r.name]:g} us" for r in STANDARD_ROWS)
            + " across the five standard configurations")


def test_criterion_03_codec_call_counts(capsys):
    """One 128-bit frame costs 2 codec calls for the block-coded polar
    pipeline and 2 per OFDM symbol for the per-symbol convolutional one."""
    rng = RandomStream(303, 0).generator()
    msg = random_bits(rng, 128)

    polar = make_codec("polar", 128)
    wf, n_enc = ofdm_phy.transmit_block_coded(msg, polar, "bpsk")
    dec, n_dec = ofdm_phy.receive_block_coded(wf, 1e-6, polar, "bpsk")
    ok_polar = (n_enc == 1 and n_dec == 1
                and polar.encode_calls + polar.decode_calls == 2
                and np.array_equal(dec, msg))

    coder = ConvChunkCoder()
    wf, n_enc = ofdm_phy.transmit_bit_coded(msg, "bpsk", coder=coder)
    n_sym = wf.size // 80
    dec, n_dec = ofdm_phy.receive_bit_coded(wf, 1e-6, 128, "bpsk", coder=coder)
    ok_cc = (n_sym == 8 and n_enc == n_sym and n_dec == n_sym
             and coder.encode_calls + coder.decode_calls == 2 * n_sym
             and np.array_equal(dec, msg))

    _report(capsys, 3, ok_polar and ok_cc,
            f"polar pipeline: 2 codec calls per frame; convolutional pipeline: "
            f"2*N_sym = {2 * n_sym} calls at N_sym = {n_sym} (one restarted "
            f"trellis per symbol; 6 symbols would need whole-message coding)")


def test_criterion_04_polar_waterfall(capsys):
    """CRC-aided SCL(16) reaches BER <= 1e-4 at 3.5 dB (K=128) and at
    2.7 dB (K=256), full 1e5 frames per point.

    No early stop: list-decoder frame errors arrive as ~K/2-bit bursts, so
    stopping at the first batch that crosses an error quota would condition
    the estimate on an unlucky prefix and bias it upward."""
    t0 = time.perf_counter()
    stop = mc.StoppingRule(max_frames=100_000, min_bit_errors=10**9)
    details = []
    ok = True
    for k, ebn0 in ((128, 3.5), (256, 2.7)):
        link = mc.LinkConfig(code="polar", k=k, mod="bpsk", seed=401)
        r = mc.run_point(link, ebn0, stop)
        ok = ok and r.ber <= 1e-4
        details.append(f"K={k} @{ebn0} dB: BER={r.ber:.2e} "
                       f"({r.bit_errors} errs / {r.frames} frames)")
    _report(capsys, 4, ok,
            "; ".join(details) + f" (both <= 1e-4), {time.perf_counter() - t0:.0f}s")


def test_criterion_05_code_ordering_at_3db(capsys):
    """PER(polar) < PER(LDPC) < PER(CC) at 3 dB, K = 256, rate 1/2,
    each point run to 100 frame errors or the 1e5-frame cap."""
    t0 = time.perf_counter()
    stop = mc.StoppingRule(max_frames=100_000, min_bit_errors=1, min_frame_errors=100)
    per = {}
    for code in ("polar", "ldpc", "cc"):
        link = mc.LinkConfig(code=code, k=256, mod="bpsk", seed=501)
        r = mc.run_point(link, 3.0, stop)
        assert r.frame_errors >= 100 or r.frames >= 100_000
        per[code] = (r.per, r.frame_errors, r.frames)
    ok = per["polar"][0] < per["ldpc"][0] < per["cc"][0]
    _report(capsys, 5, ok,
            "PER ordering at 3 dB, K=256: "
            + " < ".join(f"{c} {per[c][0]:.2e} ({per[c][1]} fe)"
                         for c in ("polar", "ldpc", "cc"))
            + f", {time.perf_counter() - t0:.0f}s")


def _per_crossing(grid_pts, pers, target=1e-3):
    """Eb/N0 where log-linear interpolated PER hits the target; the grid
    must bracket it with nonzero estimates on both sides."""
    for (e0, p0), (e1, p1) in zip(zip(grid_pts, pers), zip(grid_pts[1:], pers[1:])):
        if p0 > target >= p1 > 0.0:
            t = (math.log10(p0) - math.log10(target)) / (math.log10(p0) - math.log10(p1))
            return e0 + t * (e1 - e0)
    raise AssertionError(f"PER sweep does not bracket {target}: {list(zip(grid_pts, pers))}")


def test_criterion_06_cc_polar_gap(capsys):
    """Eb/N0 at PER = 1e-3 (K = 256) must be >= 3 dB higher for the
    convolutional system than for polar.

    Known failure: the measured gap is about 2.7 dB for the per-symbol
    convolutional pipeline (the weaker, architecture-faithful variant;
    whole-message coding narrows it to about 1.7 dB). The assertion keeps
    the stated threshold and the report carries the measured crossings.
    """
    t0 = time.perf_counter()
    polar = _sweep("polar", 256, [2.3, 2.4, 2.5],
                   mc.StoppingRule(max_frames=61_440, min_bit_errors=1,
                                   min_frame_errors=100), seed=601)
    cc = _sweep("cc", 256, [5.0, 5.2, 5.4],
                mc.StoppingRule(max_frames=122_880, min_bit_errors=1,
                                min_frame_errors=100), link_grid="ofdm", seed=601)
    polar_cross = _per_crossing([r.ebn0_db for r in polar], [r.per for r in polar])
    cc_cross = _per_crossing([r.ebn0_db for r in cc], [r.per for r in cc])
    gap = cc_cross - polar_cross
    _report(capsys, 6, gap >= 3.0,
            f"PER=1e-3 crossings: polar {polar_cross:.2f} dB, per-symbol cc "
            f"{cc_cross:.2f} dB, gap {gap:.2f} dB (requirement >= 3.0 dB), "
            f"{time.perf_counter() - t0:.0f}s")


def test_criterion_07_modulation_ordering(capsys):
    """At fixed Es/N0 = 10 dB (uncoded, 1e6 bits each):
    BER(BPSK) < BER(QPSK) < BER(16QAM) < BER(64QAM) and BER(BPSK) <= 1e-5."""
    t0 = time.perf_counter()
    ber = {}
    for mod in ("bpsk", "qpsk", "qam16", "qam64"):
        b = get_scheme(mod).bits_per_symbol
        ebn0 = 10.0 - 10 * math.log10(b)
        link = mc.LinkConfig(code="none", k=1200, mod=mod, seed=302)
        r = mc.run_point(link, ebn0, mc.StoppingRule(max_frames=834, min_bit_errors=10**9))
        assert r.bits == 834 * 1200
        ber[mod] = r.ber
    order = ["bpsk", "qpsk", "qam16", "qam64"]
    ok = all(ber[a] < ber[b] for a, b in zip(order, order[1:])) and ber["bpsk"] <= 1e-5
    _report(capsys, 7, ok,
            "Es/N0 = 10 dB: " + " < ".join(f"{m} {ber[m]:.2e}" for m in order)
            + f", BPSK <= 1e-5, {time.perf_counter() - t0:.0f}s")


def test_criterion_08_error_class_shares(capsys):
    """Framed runs at 2/3/4 dB with >= 200 classified error frames per
    point: data errors dominate the convolutional pipeline (share >= 0.6);
    detection plus SIGNAL errors dominate the polar one (share >= 0.5)."""
    t0 = time.perf_counter()
    points = [2.0, 3.0, 4.0]
    cc = _sweep("cc", 512, points,
                mc.StoppingRule(max_frames=250_000, min_bit_errors=1,
                                min_frame_errors=400), framed=True, seed=801)
    polar = _sweep("polar", 512, points,
                   mc.StoppingRule(max_frames=250_000, min_bit_errors=1,
                                   min_frame_errors=200), framed=True, seed=801)
    ok = True
    cc_shares, polar_shares = [], []
    for r in cc:
        ok = ok and r.frame_errors >= 200
        cc_shares.append(r.derr / r.frame_errors)
        ok = ok and cc_shares[-1] >= 0.6
    for r in polar:
        ok = ok and r.frame_errors >= 200
        polar_shares.append((r.pdet + r.serr) / r.frame_errors)
        ok = ok and polar_shares[-1] >= 0.5
    _report(capsys, 8, ok,
            "error-class shares at 2/3/4 dB: cc D_err "
            + "/".join(f"{s:.2f}" for s in cc_shares)
            + " (>= 0.6), polar P_det+S_err "
            + "/".join(f"{s:.2f}" for s in polar_shares)
            + f" (>= 0.5), {time.perf_counter() - t0:.0f}s")


# ------------------------------------------------------------ criterion 9


def _check_linearity(rng) -> None:
    conv = fec_conv.conv_encode
    for _ in range(50):
        a, b = random_bits(rng, 96), random_bits(rng, 96)
        assert np.array_equal(conv(a ^ b), conv(a) ^ conv(b))
    spec = fec_ldpc.default_spec(256)
    for _ in range(50):
        a, b = random_bits(rng, 128), random_bits(rng, 128)
        assert np.array_equal(fec_ldpc.ldpc_encode((a ^ b) & 1, spec),
                              fec_ldpc.ldpc_encode(a, spec) ^ fec_ldpc.ldpc_encode(b, spec))
    pspec = fec_polar.make_polar_spec(64)
    for _ in range(50):
        a, b = random_bits(rng, pspec.k_total), random_bits(rng, pspec.k_total)
        assert np.array_equal(fec_polar.polar_encode(a ^ b, pspec),
                              fec_polar.polar_encode(a, pspec)
                              ^ fec_polar.polar_encode(b, pspec))


def _check_loopbacks(rng) -> None:
    # noiseless full-chain identity for every codec, constellation and K
    for kind in ("none", "cc", "ldpc", "polar"):
        for mod in SCHEMES:
            for k in (64, 128, 256, 512):
                codec = make_codec(kind, k)
                msg = random_bits(rng, k)
                wf, _ = ofdm_phy.transmit_block_coded(msg, codec, mod)
                dec, _ = ofdm_phy.receive_block_coded(wf, 1e-8, codec, mod)
                assert np.array_equal(dec, msg), (kind, mod, k)
    for mod in SCHEMES:  # per-symbol convolutional flavor
        msg = random_bits(rng, 256)
        wf, _ = ofdm_phy.transmit_bit_coded(msg, mod)
        dec, _ = ofdm_phy.receive_bit_coded(wf, 1e-8, 256, mod)
        assert np.array_equal(dec, msg)


def _check_ldpc_syndromes(rng) -> None:
    for k in (64, 128, 256, 512):
        spec = fec_ldpc.default_spec(2 * k)
        for _ in range(25):
            cw = fec_ldpc.ldpc_encode(random_bits(rng, k), spec)
            assert fec_ldpc.syndrome_ok(cw, spec)


def _check_scl1_equals_sc(rng) -> None:
    spec = fec_polar.make_polar_spec(128)
    for _ in range(200):
        llr = rng.normal(0.0, 4.0, spec.n)
        sc = fec_polar.sc_decode(llr, spec)
        scl1 = fec_polar.scl_decode(llr, spec, list_size=1)[0][0]
        assert np.array_equal(sc, scl1)


def _check_scl_metrics_exhaustive(rng) -> None:
    # list large enough to keep every leaf: path metrics must equal the
    # sum of |llr| over positions where the re-encoded word flips the
    # channel hard decision
    spec = fec_polar.make_polar_spec(4, n=8, crc_len=0, list_size=16)
    for _ in range(20):
        llr = rng.normal(0.0, 3.0, 8)
        paths = fec_polar.scl_decode(llr, spec)
        assert len(paths) == 16
        seen = set()
        for bits, metric in paths:
            cw = fec_polar.polar_encode(bits, spec)
            signs = 1.0 - 2.0 * cw
            oracle = float(np.abs(llr[signs * llr < 0]).sum())
            assert metric == pytest.approx(oracle, abs=1e-9)
            seen.add(tuple(bits))
        assert len(seen) == 16


def _check_viterbi_is_ml(rng) -> None:
    k = 10
    msgs = ((np.arange(2**k)[:, None] >> np.arange(k)[::-1]) & 1).astype(np.uint8)
    cws = np.array([fec_conv.conv_encode(m) for m in msgs])
    signs = 1.0 - 2.0 * cws
    for _ in range(20):
        llr = rng.normal(0.6, 2.0, 2 * (k + 6))
        best = int(np.argmax(signs @ llr))
        dec = fec_conv.viterbi_decode(llr, k)
        assert np.array_equal(dec, msgs[best])


def _check_z_mean() -> None:
    z0 = math.exp(-(10.0 ** 0.2))
    for n in (2, 8, 64, 512, 1024):
        z = fec_polar.bhattacharyya_construct(n, z0=z0)
        assert np.mean(z) == pytest.approx(z0, abs=1e-12)


def _check_ofdm_unitarity(rng) -> None:
    cfg = ofdm_phy.DEFAULT_CFG
    for _ in range(50):
        tones = (rng.normal(size=cfg.n_data * 4) + 1j * rng.normal(size=cfg.n_data * 4))
        wf = ofdm_phy.ofdm_modulate_symbols(tones, cfg)
        back = ofdm_phy.ofdm_demodulate_symbols(wf, cfg)
        assert np.max(np.abs(back - tones)) < 1e-10


def _check_mc_determinism() -> None:
    link = mc.LinkConfig(code="cc", k=128, mod="bpsk", seed=909)
    stop = mc.StoppingRule(max_frames=512, min_bit_errors=10**9)
    rows = [(r.frames, r.bits, r.bit_errors, r.frame_errors)
            for r in (mc.run_point(link, 2.0, stop, workers=w) for w in (1, 2))]
    assert rows[0] == rows[1]


def test_criterion_09_property_suite(capsys):
    t0 = time.perf_counter()
    rng = RandomStream(909, 1).generator()
    _check_linearity(rng)
    _check_loopbacks(rng)
    _check_ldpc_syndromes(rng)
    _check_scl1_equals_sc(rng)
    _check_scl_metrics_exhaustive(rng)
    _check_viterbi_is_ml(rng)
    _check_z_mean()
    _check_ofdm_unitarity(rng)
    _check_mc_determinism()
    _report(capsys, 9, True,
            "property families all hold: encoder linearity x3, 68-combination "
            "noiseless loopbacks, LDPC syndromes, SCL(1)=SC, exhaustive SCL "
            "metrics at N=8, Viterbi=ML at k=10, Z-mean preservation, OFDM "
            f"unitarity < 1e-10, worker-count determinism, "
            f"{time.perf_counter() - t0:.0f}s")


def test_criterion_10_bounds_sanity(capsys):
    snr, eps = 2.0, 1e-5
    cap = capacity(snr)
    grid = (10, 30, 100, 300, 1_000, 10_000, 100_000, 1_000_000, 100_000_000)
    fracs = [analysis.normal_approx_rate(n, eps, snr) / cap for n in grid]
    monotone = all(b > a for a, b in zip(fracs, fracs[1:]))
    converges = fracs[-1] > 0.999
    r300 = analysis.normal_approx_rate(300, eps, snr)
    plug_in_ok = abs(r300 - 0.859 * cap) < 1e-3
    note_recorded = "0.859" in analysis.normal_approx_rate.__doc__
    _report(capsys, 10, monotone and converges and plug_in_ok and note_recorded,
            f"rate fraction monotone over {len(grid)} blocklengths, reaches "
            f"{fracs[-1]:.4f} at n=1e8; R*(300) = {r300:.4f} = "
            f"{r300 / cap:.4f}C (0.859C within 1e-3; recorded docstring note "
            f"supersedes coarser ~0.6 readings)")
