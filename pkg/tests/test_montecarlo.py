import io

import numpy as np
import pytest

from shortlink import montecarlo as mc
from shortlink.analysis import qfunc


def quick_link(**kw):
    base = dict(code="none", k=512, mod="bpsk", grid="subcarrier", framed=False, seed=11)
    base.update(kw)
    return mc.LinkConfig(**base)


def test_uncoded_matches_analytic_q():
    link = quick_link(k=1000)
    stop = mc.StoppingRule(max_frames=1000, min_bit_errors=10**9)
    r = mc.run_point(link, 0.0, stop)
    assert r.bits == 10**6
    p = qfunc(np.sqrt(2.0))
    assert p == pytest.approx(0.0786, abs=5e-4)
    sigma = np.sqrt(p * (1 - p) / r.bits)
    assert abs(r.ber - p) < 3 * sigma


def test_high_snr_stops_at_max_frames():
    link = quick_link(code="polar", k=64)
    stop = mc.StoppingRule(max_frames=512, min_bit_errors=100)
    r = mc.run_point(link, 30.0, stop)
    assert r.frames == 512
    assert r.bit_errors == 0
    assert r.per == 0.0


def test_worker_count_does_not_change_counters():
    link = quick_link(code="cc", k=128, seed=3)
    stop = mc.StoppingRule(max_frames=1024, min_bit_errors=200)
    rows = []
    for workers in (1, 2, 3):
        r = mc.run_point(link, 2.0, stop, workers=workers)
        rows.append((r.frames, r.bits, r.bit_errors, r.frame_errors, r.pdet, r.serr, r.derr))
    assert rows[0] == rows[1] == rows[2]


def test_stopping_at_batch_boundary():
    # error rate ~0.08 at 0 dB: one 256-frame batch of 512-bit frames is
    # already thousands of bit errors, so the run must stop at frame 256
    link = quick_link()
    r = mc.run_point(link, 0.0, mc.StoppingRule(max_frames=10_000, min_bit_errors=100))
    assert r.frames == 256
    assert r.bit_errors >= 100


def test_stopping_respects_frame_cap():
    link = quick_link()
    r = mc.run_point(link, 20.0, mc.StoppingRule(max_frames=300, min_bit_errors=10**9))
    assert r.frames == 300  # 256 + truncated remainder of the second batch


def test_min_frame_errors_extends_run():
    link = quick_link()
    r = mc.run_point(link, 0.0, mc.StoppingRule(max_frames=2000, min_bit_errors=1,
                                                min_frame_errors=300))
    assert r.frame_errors >= 300


def test_run_sweep_grid_validation():
    link = quick_link()
    stop = mc.StoppingRule(max_frames=10, min_bit_errors=1)
    assert mc.run_sweep(link, [], stop) == []
    with pytest.raises(ValueError):
        mc.run_sweep(link, [2.0, 1.0], stop)


def test_ber_decreases_along_grid():
    link = quick_link(code="cc", k=128)
    stop = mc.StoppingRule(max_frames=4000, min_bit_errors=150)
    results = mc.run_sweep(link, [0.0, 4.0], stop)
    lo, hi = results[0], results[1]
    assert lo.bit_errors >= 150
    # CI separation, not just point estimates
    assert hi.ber_ci()[1] < lo.ber_ci()[0]


def test_wilson_interval_coverage():
    """Empirical 95% coverage on Bernoulli(0.01), 1e4 repetitions."""
    p, n = 0.01, 1000
    rng = np.random.default_rng(17)
    hits = 0
    reps = 10_000
    counts = rng.binomial(n, p, size=reps)
    for c in counts:
        lo, hi = mc.wilson_interval(int(c), n)
        hits += lo <= p <= hi
    assert abs(hits / reps - 0.95) < 0.02


def test_wilson_edge_cases():
    assert mc.wilson_interval(0, 0) == (0.0, 0.0)
    lo, hi = mc.wilson_interval(0, 100)
    assert lo == 0.0 and hi > 0
    lo, hi = mc.wilson_interval(100, 100)
    assert hi == 1.0 and lo < 1


def test_classify_frame_tally_exhaustive():
    from shortlink.ofdm_phy import ClassifyResult, ErrorClass
    counts = np.zeros(7, dtype=np.int64)
    outcomes = [ErrorClass.DETECTION, ErrorClass.SIGNAL, ErrorClass.DATA, ErrorClass.NONE,
                ErrorClass.DATA, ErrorClass.DETECTION]
    for oc in outcomes:
        mc.classify_frame(counts, ClassifyResult(oc, bit_errors=1, timing_offset=0))
    assert counts[4:].tolist() == [2, 1, 2]  # pdet, serr, derr
    assert counts[4:].sum() == sum(oc is not ErrorClass.NONE for oc in outcomes)


def test_framed_tallies_sum_to_frame_errors():
    link = quick_link(code="polar", k=128, framed=True)
    r = mc.run_point(link, 1.0, mc.StoppingRule(max_frames=256, min_bit_errors=10**9))
    assert r.link.grid == "ofdm"
    assert r.pdet + r.serr + r.derr == r.frame_errors
    assert r.frame_errors > 0


def test_csv_schema_and_roundtrip():
    link = quick_link(k=100)
    results = mc.run_sweep(link, [1.0, 2.0],
                           mc.StoppingRule(max_frames=256, min_bit_errors=10**9))
    text = mc.csv_text(results)
    lines = text.strip().split("\n")
    assert lines[0] == mc.CSV_HEADER
    assert len(lines) == 3
    row = dict(zip(lines[0].split(","), lines[1].split(",")))
    assert row["code"] == "none" and row["mod"] == "bpsk"
    assert int(row["frames"]) == 256
    # floats serialize at full precision: parsing recovers the exact value
    assert float(row["ber"]) == results[0].ber
    assert float(row["ber_ci_hi"]) == results[0].ber_ci()[1]
    buf = io.StringIO()
    mc.write_csv(results, buf)
    assert buf.getvalue() == text


def test_link_config_validation():
    with pytest.raises(ValueError):
        quick_link(code="turbo")
    with pytest.raises(ValueError):
        quick_link(code="polar", k=100)  # coded runs pin K to 64..512
    with pytest.raises(ValueError):
        quick_link(mod="qam32")
    with pytest.raises(ValueError):
        quick_link(grid="fsk")
    # framed implies the full chain
    assert quick_link(code="polar", k=128, framed=True).grid == "ofdm"


def test_rate_accounting():
    assert quick_link(code="polar", k=128).rate == pytest.approx(0.5)
    assert quick_link(code="ldpc", k=256).rate == pytest.approx(0.5)
    # zero-tail block CC: 2*(k+6) coded bits
    assert quick_link(code="cc", k=128).rate == pytest.approx(128 / 268)
    assert quick_link().rate == 1.0


def test_bit_coded_rate_counts_whole_symbols():
    link = quick_link(code="cc", k=128, grid="ofdm")
    assert link.bit_coded
    # 7 full 18-bit chunks fill a 48-bit symbol each; the 2-bit tail chunk
    # carries 16 coded bits and its pad tones are not charged to Eb
    assert link.n_coded == 7 * 48 + 16
