"""Command-line front end: link sweeps, finite-blocklength bounds, latency
tables, framed error classification and code inventory.

Configuration comes from an optional key=value file plus flags (flags win).
Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys

import numpy as np

from . import __version__, analysis, fec_conv, fec_ldpc, fec_polar
from . import montecarlo as mc
from .core import RandomStream
from .modem import modulate

WORKERS_ENV = "SHORTLINK_WORKERS"

# key -> (parser, default) for sweep/classify config files and flags
_CONFIG_KEYS = {
    "code": (str, "none"),
    "k": (int, 256),
    "mod": (str, "bpsk"),
    "grid": (str, "subcarrier"),
    "framed": (lambda s: s.lower() in ("1", "true", "yes"), False),
    "ebn0": (str, "0:1:4"),
    "ebn0_step": (float, None),
    "frames_max": (int, 1_000_000),
    "min_errors": (int, 100),
    "seed": (int, 1),
    "bandwidth_mhz": (float, 20.0),
    "workers": (int, None),
}


class ConfigError(ValueError):
    pass


def parse_grid(text: str, step: float | None = None) -> list[float]:
    """Grid strings: '3', '1,2,3', 'start:step:end', or 'start:end' with a
    separate step. Ends are inclusive (within 1e-9 of a step)."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) == 3:
            start, step, end = map(float, parts)
        elif len(parts) == 2:
            start, end = map(float, parts)
            if step is None:
                raise ConfigError(f"grid {text!r} needs a step (use start:step:end)")
        else:
            raise ConfigError(f"bad grid {text!r}, expected start:step:end")
        if step <= 0 or end < start:
            raise ConfigError(f"bad grid {text!r}: step must be > 0 and end >= start")
        n = int(np.floor((end - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(n)]
    if "," in text:
        return [float(x) for x in text.split(",") if x.strip()]
    return [float(text)]


def load_config(path: str) -> dict:
    """Plaintext key = value configuration, '#' comments allowed."""
    out = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, _, value = (x.strip() for x in line.partition("="))
            if key not in _CONFIG_KEYS:
                raise ConfigError(
                    f"{path}:{lineno}: unknown key {key!r}; allowed: {', '.join(sorted(_CONFIG_KEYS))}")
            try:
                out[key] = _CONFIG_KEYS[key][0](value)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {value!r}") from exc
    return out


def _resolve(args) -> dict:
    cfg = {k: d for k, (_p, d) in _CONFIG_KEYS.items()}
    if getattr(args, "config", None):
        cfg.update(load_config(args.config))
    for key in _CONFIG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if cfg["workers"] is None:
        cfg["workers"] = int(os.environ.get(WORKERS_ENV, "1"))
    return cfg


def _build_link(cfg: dict) -> mc.LinkConfig:
    try:
        return mc.LinkConfig(code=cfg["code"], k=cfg["k"], mod=cfg["mod"], grid=cfg["grid"],
                             framed=cfg["framed"], seed=cfg["seed"],
                             bandwidth_mhz=cfg["bandwidth_mhz"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _manifest_lines(cfg: dict, grid: list[float], command: str) -> list[str]:
    """Resolved run configuration; itself a valid --config file, so a run can
    be regenerated from its manifest alone (elapsed_s aside)."""
    lines = [f"# shortlink {__version__} {command} manifest"]
    for key in sorted(_CONFIG_KEYS):
        if key in ("ebn0", "ebn0_step") or cfg[key] is None:
            continue
        lines.append(f"{key} = {cfg[key]}")
    lines.append("ebn0 = " + ",".join(str(x) for x in grid))
    return lines


def _write_output(text: str, out_path: str | None, manifest: list[str]) -> None:
    """CSV to stdout or --out; the manifest rides as a sidecar file (or on
    stderr when printing to stdout) so every output is reproducible."""
    body = "\n".join(manifest) + "\n"
    if out_path:
        with open(out_path, "w") as f:
            f.write(text)
        with open(out_path + ".manifest", "w") as f:
            f.write(body)
    else:
        sys.stdout.write(text)
        sys.stderr.write(body)


def _dump_waveform(link: mc.LinkConfig, path: str) -> None:
    """First frame of batch 0 as little-endian float32 interleaved I/Q."""
    from . import ofdm_phy
    from .codecs import make_codec

    rng = RandomStream(link.seed, 0).generator()
    msg = (rng.random(link.k) < 0.5).astype(np.uint8)
    if link.framed:
        codec = None if link.code == "cc" else make_codec(link.code, link.k)
        wf = ofdm_phy.transmit_frame(msg, codec, link.mod, link.ofdm_cfg)
    elif link.grid == "ofdm":
        if link.bit_coded:
            wf, _ = ofdm_phy.transmit_bit_coded(msg, link.mod, link.ofdm_cfg)
        else:
            codec = make_codec(link.code, link.k)
            wf, _ = ofdm_phy.transmit_block_coded(msg, codec, link.mod, link.ofdm_cfg)
    else:
        codec = make_codec(link.code, link.k)
        wf = modulate(codec.encode(msg), link.mod)
    np.asarray(wf, dtype=np.complex128).astype(np.complex64).view("<f4").tofile(path)


def cmd_sweep(args) -> int:
    cfg = _resolve(args)
    link = _build_link(cfg)
    cfg["grid"] = link.grid  # framed runs resolve to the full OFDM chain
    grid = parse_grid(cfg["ebn0"], cfg["ebn0_step"])
    stop = mc.StoppingRule(max_frames=cfg["frames_max"], min_bit_errors=cfg["min_errors"])
    if stop.max_frames <= 0 or stop.min_bit_errors <= 0:
        raise ConfigError("frames_max and min_errors must be positive")
    results = mc.run_sweep(link, grid, stop, workers=cfg["workers"])
    if args.dump_waveform:
        _dump_waveform(link, args.dump_waveform)
    _write_output(mc.csv_text(results), args.out, _manifest_lines(cfg, grid, "sweep"))
    return 0


def cmd_classify(args) -> int:
    cfg = _resolve(args)
    cfg["framed"] = True
    link = _build_link(cfg)
    cfg["grid"] = link.grid
    grid = parse_grid(cfg["ebn0"], cfg["ebn0_step"])
    stop = mc.StoppingRule(max_frames=cfg["frames_max"], min_bit_errors=cfg["min_errors"])
    results = mc.run_sweep(link, grid, stop, workers=cfg["workers"])
    if args.dump_waveform:
        _dump_waveform(link, args.dump_waveform)
    lines = [mc.CSV_HEADER + ",pdet_share,serr_share,derr_share"]
    for r in results:
        row = ",".join(str(x) for x in r.csv_row())
        if r.frame_errors:
            shares = [str(r.pdet / r.frame_errors), str(r.serr / r.frame_errors),
                      str(r.derr / r.frame_errors)]
        else:
            shares = ["", "", ""]  # declared degenerate case: no NaN in output
        lines.append(row + "," + ",".join(shares))
    _write_output("\n".join(lines) + "\n", args.out, _manifest_lines(cfg, grid, "classify"))
    return 0


def cmd_bounds(args) -> int:
    if not 0 < args.per < 1:
        raise ConfigError(f"--per must be in (0, 1), got {args.per}")
    kinds = list(analysis.CHANNEL_KINDS) if args.kind == "all" else [args.kind]
    try:
        n_grid = [int(x) for x in parse_grid(args.n_range, args.n_step)]
    except ConfigError:
        raise
    if min(n_grid) < 8:
        raise ConfigError("blocklengths below 8 are not meaningful here")
    snr = 10 ** (args.snr_db / 10)
    lines = ["kind,n,rate,fraction,per"]
    for kind in kinds:
        cap = analysis.capacity(snr, kind)
        for n in n_grid:
            rate = analysis.normal_approx_rate(n, args.per, snr, kind)
            lines.append(f"{kind},{n},{rate},{rate / cap},{args.per}")
    manifest = [f"tool = shortlink {__version__}", "command = bounds",
                f"snr_db = {args.snr_db}", f"per = {args.per}", f"kind = {args.kind}",
                f"n_range = {args.n_range}", f"n_step = {args.n_step}"]
    _write_output("\n".join(lines) + "\n", args.out, manifest)
    return 0


def cmd_latency(args) -> int:
    if args.payload <= 0:
        raise ConfigError(f"--payload must be positive, got {args.payload}")
    if args.eq1:
        bws = [float(x) for x in args.bandwidth.split(",") if x.strip()]
        if not bws or any(b <= 0 for b in bws):
            raise ConfigError(f"bad --bandwidth list {args.bandwidth!r}")
        print(f"Airtime T = L/(2BS) for L = {args.payload} bits at S = {args.spectral_eff} b/s/Hz")
        print(f"{'bandwidth_mhz':>14}  {'latency_us':>10}")
        for bw in bws:
            t = analysis.eq1_latency(args.payload, bw * 1e6, args.spectral_eff)
            print(f"{bw:>14g}  {t * 1e6:>10.4g}")
        return 0
    rows = [r for r in analysis.STANDARD_ROWS
            if args.standard == "all" or r.name == args.standard]
    if not rows:
        names = ", ".join(r.name for r in analysis.STANDARD_ROWS)
        raise ConfigError(f"unknown standard {args.standard!r}; known: {names}, all")
    print(f"802.11 packet duration for L = {args.payload} bits")
    print(f"{'standard':>13} {'bw_mhz':>7} {'n_fft':>6} {'n_ds':>5} {'duration_us':>12}")
    for r in rows:
        t_us = analysis.packet_duration_80211(r, args.payload)
        print(f"{r.name:>13} {r.bandwidth_mhz:>7g} {r.n_fft:>6} {r.n_data_subcarriers:>5} {t_us:>12.4g}")
    return 0


def cmd_codes(args) -> int:
    """Inventory of the shipped code constructions with content hashes."""
    sha = lambda text: hashlib.sha256(text.encode()).hexdigest()[:16]
    taps = f"g0={fec_conv.WIFI_CC.g0_octal:o} g1={fec_conv.WIFI_CC.g1_octal:o} K={fec_conv.WIFI_CC.constraint_length}"
    print(f"cc     (133,171) octal, constraint length 7, zero tail   sha256:{sha(taps)}")
    for n in (128, 256, 512, 1024):
        spec = fec_ldpc.default_spec(n)
        print(f"ldpc   n={n:<5} k={n // 2:<4} (3,6)-regular PEG girth>=6      "
              f"sha256:{sha(fec_ldpc.to_alist(spec))}  [{spec.origin}]")
    for n in (128, 256, 512, 1024):
        spec = fec_polar.make_polar_spec(n // 2, n=n)
        print(f"polar  n={n:<5} k={n // 2:<4} crc16 list={spec.list_size:<3} design 2 dB  "
              f"sha256:{sha(fec_polar.frozen_set_text(spec))}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shortlink",
                                description="Short-packet FEC / OFDM link simulator")
    p.add_argument("--version", action="version", version=f"shortlink {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add_link_flags(sp):
        sp.add_argument("--config", help="key = value configuration file")
        sp.add_argument("--code", choices=("none", "cc", "ldpc", "polar"),
                        help="FEC family (default none)")
        sp.add_argument("--k", type=int, help="message bits per frame (coded: 64/128/256/512)")
        sp.add_argument("--mod", choices=("bpsk", "qpsk", "qam16", "qam64"),
                        help="constellation (default bpsk)")
        sp.add_argument("--grid", choices=("subcarrier", "ofdm"),
                        help="subcarrier-level symbols or full OFDM chain")
        sp.add_argument("--framed", action=argparse.BooleanOptionalAction, default=None,
                        help="add preamble/SIGNAL and classify errors")
        sp.add_argument("--ebn0", help="Eb/N0 grid in dB: 'a', 'a,b,c' or 'start:step:end'")
        sp.add_argument("--ebn0-step", dest="ebn0_step", type=float,
                        help="step for 'start:end' grids")
        sp.add_argument("--frames-max", dest="frames_max", type=int,
                        help="frame budget per point (default 1e6)")
        sp.add_argument("--min-errors", dest="min_errors", type=int,
                        help="bit errors that allow early stop (default 100)")
        sp.add_argument("--seed", type=int, help="simulation seed (default 1)")
        sp.add_argument("--bandwidth-mhz", dest="bandwidth_mhz", type=float,
                        help="channel bandwidth in MHz (timing metadata, default 20)")
        sp.add_argument("--workers", type=int,
                        help=f"parallel workers (default ${WORKERS_ENV} or 1)")
        sp.add_argument("--out", help="CSV output path (default stdout); manifest sidecar")
        sp.add_argument("--dump-waveform", help="write one frame as float32 I/Q to this path")

    sp = sub.add_parser("sweep", help="BER/PER vs Eb/N0 curves (CSV)")
    add_link_flags(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("classify", help="framed run with error-class shares (CSV)")
    add_link_flags(sp)
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("bounds", help="finite-blocklength normal approximation (CSV)")
    sp.add_argument("--snr-db", dest="snr_db", type=float, required=True)
    sp.add_argument("--per", type=float, default=1e-5, help="target error probability")
    sp.add_argument("--kind", choices=("gaussian", "biawgn", "all"), default="gaussian")
    sp.add_argument("--n-range", dest="n_range", default="50:2000",
                    help="blocklength grid 'a:b' or 'a:step:b'")
    sp.add_argument("--n-step", dest="n_step", type=float, default=1.0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("latency", help="802.11 packet durations / L/(2BS) airtime")
    sp.add_argument("--payload", type=int, default=100, help="payload bits (default 100)")
    sp.add_argument("--standard", default="all", help="standard name or 'all'")
    sp.add_argument("--eq1", action="store_true", help="print L/(2BS) airtime instead")
    sp.add_argument("--bandwidth", default="20,80", help="MHz list for --eq1")
    sp.add_argument("--spectral-eff", dest="spectral_eff", type=float, default=0.5)
    sp.set_defaults(func=cmd_latency)

    sp = sub.add_parser("codes", help="available code constructions and pinned hashes")
    sp.set_defaults(func=cmd_codes)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"shortlink: config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"shortlink: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"shortlink: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 1


if __name__ == "__main__":
    sys.exit(main())
