"""Command-line front end: ``pairfringe {scan,visibility,nosignal,subpackets}``.

Settings come from built-in defaults, then an optional ``--config`` file,
then command-line flags.  Outputs go to ``--out`` (or stdout) as CSV with
``#`` metadata lines carrying the seed and config fingerprint.
"""
from __future__ import annotations

import argparse
import io
import math
import sys
from pathlib import Path

from . import experiment
from .analysis import (expected_visibility, extract_visibility, visibility_analytic,
                       visibility_paper)
from .config import RunConfig, describe_keys, parse_quantity
from .errors import AnalysisError, QuadratureError
from .pair_source import conditional_spectrum
from .spectral import Shape, Spectrum
from .subpackets import barrier_demo, decompose, graded_barrier, write_envelopes_csv


def _parent_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", metavar="PATH", help="key = value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--pairs", help="pairs per scan point (clears duration)")
    p.add_argument("--duration", help="seconds per scan point, e.g. 10s (clears pairs)")
    p.add_argument("--filter", choices=("none", "f1", "f2", "custom"))
    p.add_argument("--delta", metavar="VALUE", help="optical path difference, e.g. 220um")
    p.add_argument("--shape", choices=[s.value for s in Shape], help="remote filter shape")
    p.add_argument("--out", metavar="PATH", help="output file (default stdout)")
    p.add_argument("--workers", type=int, help="worker processes for scan points")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key; repeatable")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _parent_parser()
    parser = argparse.ArgumentParser(
        prog="pairfringe",
        description="Monte Carlo of two-photon fringes behind a remote frequency filter.",
        epilog="config keys (default, canonical unit):\n" + describe_keys(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    scan_args = argparse.ArgumentParser(add_help=False)
    scan_args.add_argument("--kind", choices=("fine_phase", "coarse_delta"))
    scan_args.add_argument("--start", type=float, help="phase in rad, or path in um")
    scan_args.add_argument("--stop", type=float)
    scan_args.add_argument("--steps", type=int, help="number of intervals; 0 gives one point")

    sub.add_parser("scan", parents=[common, scan_args], help="count rates along a scan")
    sub.add_parser("visibility", parents=[common, scan_args],
                   help="fine scan, fitted visibility and the analytic values")
    p = sub.add_parser("nosignal", parents=[common], help="repeated no-signaling tests")
    p.add_argument("--repetitions", type=int)
    p = sub.add_parser("subpackets", parents=[common], help="colour subpacket envelopes")
    p.add_argument("--n-bands", type=int, dest="n_bands")
    p.add_argument("--chirp", help="um per nm; default spreads offsets over +-W/4")
    p.add_argument("--barrier", help="graded, flat or comma-separated transmissions")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.load(args.config) if args.config else RunConfig()
    values = {}
    flag_keys = {"seed": "seed", "pairs": "pairs", "duration": "duration", "filter": "filter",
                 "shape": "filter_shape", "out": "out", "workers": "workers",
                 "kind": "scan_kind", "start": "scan_start", "stop": "scan_stop",
                 "steps": "scan_steps", "repetitions": "repetitions", "n_bands": "n_bands",
                 "chirp": "chirp", "barrier": "barrier"}
    for flag, key in flag_keys.items():
        value = getattr(args, flag, None)
        if value is not None:
            values[key] = value
    if args.delta is not None:
        values["path_difference"] = parse_quantity(args.delta, "path")
    for item in args.set:
        if "=" not in item:
            raise SystemExit(f"--set expects KEY=VALUE, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        values[key] = value
    return RunConfig.from_mapping(values, config)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text, encoding="utf-8", newline="")
    except OSError as exc:
        raise SystemExit(f"cannot write {out}: {exc}") from exc


def _check_writable(out: str | None) -> None:
    # fail before a long simulation, not after it
    if out is not None:
        parent = Path(out).resolve().parent
        if not parent.is_dir():
            raise SystemExit(f"cannot write {out}: no directory {parent}")


def cmd_scan(config: RunConfig) -> str:
    _check_writable(config.out)
    scan = experiment.run_scan(config)
    text = experiment.scan_csv(scan, config)
    _emit(text, config.out)
    return text


def visibility_values(config: RunConfig) -> dict:
    """Analytic visibilities at the configured path difference.

    ``analytic`` uses the conditional spectrum (pinhole times filter at the
    conjugate idler); ``filter_only`` ignores the pinhole; ``formula`` is
    the triangular overlap ``1 - delta/W``.
    """
    delta = config.path_difference
    filt = config.filter_spec()
    cond = conditional_spectrum(config.source(), filt)
    if filt is None:
        alone = config.spectrum()
        width = alone.coherence_length
    else:
        alone = Spectrum(filt.center, filt.bandwidth, filt.shape)
        width = filt.coherence_length
    return {"delta": delta, "width": width,
            "formula": visibility_paper(delta, width),
            "analytic": visibility_analytic(cond, delta),
            "filter_only": visibility_analytic(alone, delta),
            "shape": alone.shape.value, "conditional": cond}


def visibility_report(config: RunConfig, scan, values: dict) -> str:
    coinc = extract_visibility(scan, "coincidences")
    singles = extract_visibility(scan, "singles_D2")
    mean = float(scan.counts("coincidences").mean())
    oracle = expected_visibility(values["conditional"], scan, mean, config.phase_offset)
    lines = [
        f"filter = {config.filter} ({values['shape']}), path difference = {values['delta']:.6g} um, "
        f"W = {values['width']:.6g} um, pairs/point = {config.pairs}, seed = {config.seed}",
        f"  monte carlo (D1xD2)     V = {coinc.visibility:.4f} +- {coinc.standard_error:.4f}",
        f"  analytic (conditional)  V = {values['analytic']:.4f}",
        f"  analytic over the scan  V = {oracle.visibility:.4f}",
        f"  analytic (filter only)  V = {values['filter_only']:.4f}",
        f"  overlap formula 1-D/W   V = {values['formula']:.4f}",
        f"  singles D2              V = {singles.visibility:.4f} +- {singles.standard_error:.4f}",
    ]
    if not math.isnan(coinc.period_estimate):
        lines.append(f"  fringe period            {coinc.period_estimate:.2f} nm of optical path")
    notes = []
    se = coinc.standard_error
    if se > 0:
        z = (coinc.visibility - oracle.visibility) / se
        notes.append(f"monte carlo differs from the noiseless scan fit by {z:+.2f} standard errors")
    drift = oracle.visibility - values["analytic"]
    if se > 0 and abs(drift) > se:
        notes.append(f"fringe contrast drifts along the scan; the fit sees {drift:+.4f} "
                     "relative to the value at the start point")
    d_alone = values["filter_only"] - values["formula"]
    if abs(d_alone) > 1e-6:
        notes.append(f"overlap formula is exact only for a sinc2 passband; "
                     f"{values['shape']} differs by {d_alone:+.4f}")
    d_pin = values["analytic"] - values["filter_only"]
    if abs(d_pin) > 1e-4:
        notes.append(f"the pinhole passband shifts the conditional value by {d_pin:+.4f}")
    lines += ["note: " + n for n in notes]
    return "\n".join(lines) + "\n"


def cmd_visibility(config: RunConfig) -> str:
    config = RunConfig.from_mapping({"scan_kind": "fine_phase"}, config)
    _check_writable(config.out)
    values = visibility_values(config)
    scan = experiment.run_scan(config)
    report = visibility_report(config, scan, values)
    sys.stdout.write(report)
    if config.out is not None:
        _emit(experiment.scan_csv(scan, config), config.out)
    return report


def cmd_nosignal(config: RunConfig) -> str:
    _check_writable(config.out)
    summary = experiment.run_nosignal(config)
    p_min = min(r.p_value for r in summary.reports)
    lines = [
        f"no-signaling: {summary.passed}/{summary.total} repetitions with p > "
        f"{summary.reports[0].alpha:g} ({summary.reports[0].method} test on D2 singles)",
        f"  smallest p = {p_min:.3g}",
        f"  power check (D2 singles halved): z = {summary.power.statistic:.1f}, "
        f"p = {summary.power.p_value:.3g}",
    ]
    report = "\n".join(lines) + "\n"
    sys.stdout.write(report)
    if config.out is not None:
        buf = io.StringIO()
        for line in experiment.metadata_lines(config, "nosignal"):
            buf.write(line + "\n")
        buf.write("repetition,singles_D2_with,pairs_with,singles_D2_without,pairs_without,z,p\n")
        fmt = experiment.fmt_number
        for r, ((w, wo), rep) in enumerate(zip(summary.records, summary.reports)):
            buf.write(",".join([str(r), fmt(w.singles_D2), fmt(w.pairs_emitted),
                                fmt(wo.singles_D2), fmt(wo.pairs_emitted),
                                fmt(rep.statistic), fmt(rep.p_value)]) + "\n")
        _emit(buf.getvalue(), config.out)
    return report


def parse_barrier(spec: str, n_bands: int):
    """Band transmissions from ``graded``, ``flat`` or ``t1,t2,...``; None for ``none``."""
    spec = spec.strip().lower()
    if spec == "none":
        return None
    if spec == "flat":
        return [1.0] * n_bands
    if spec == "graded":
        if n_bands == 5:
            return graded_barrier()
        return [0.5**k for k in range(n_bands)]
    try:
        return [float(v) for v in spec.split(",")]
    except ValueError:
        raise SystemExit(f"cannot parse barrier {spec!r}") from None


def cmd_subpackets(config: RunConfig) -> str:
    _check_writable(config.out)
    spectrum = config.spectrum()
    subset = decompose(spectrum, config.n_bands, config.chirp)
    envelopes = [subset.parent_envelope]
    if config.n_bands > 1:
        envelopes += [s.envelope for s in subset.bands]
    meta = {"command": "subpackets", "seed": config.seed, "fingerprint": config.fingerprint,
            "n_bands": config.n_bands,
            "chirp_um_per_nm": experiment.fmt_number(subset.chirp_coefficient)}
    for s in subset.bands:
        meta[f"band {s.band.label}"] = (
            f"{experiment.fmt_number(s.band.lo)}..{experiment.fmt_number(s.band.hi)} nm "
            f"weight {experiment.fmt_number(s.band.weight)} "
            f"offset {experiment.fmt_number(s.center_offset)} um")
    barrier = parse_barrier(config.barrier, config.n_bands)
    report = ""
    if barrier is not None:
        result = barrier_demo(subset, barrier)
        envelopes.append(result.transmitted)
        meta["incident_peak_um"] = experiment.fmt_number(result.incident_peak)
        meta["transmitted_peak_um"] = experiment.fmt_number(result.transmitted_peak)
        meta["advance_um"] = experiment.fmt_number(result.advance)
        report = (f"barrier: incident peak {result.incident_peak:.4f} um, transmitted peak "
                  f"{result.transmitted_peak:.4f} um, advance {result.advance:.4f} um\n")
    for line in config.canonical_text().splitlines():
        meta[f"config {line.split(' = ')[0]}"] = line.split(" = ", 1)[1]
    buf = io.StringIO()
    write_envelopes_csv(buf, envelopes, meta)
    if report and config.out is not None:
        sys.stdout.write(report)
    _emit(buf.getvalue(), config.out)
    return report


COMMANDS = {"scan": cmd_scan, "visibility": cmd_visibility,
            "nosignal": cmd_nosignal, "subpackets": cmd_subpackets}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = config_from_args(args)
        COMMANDS[args.command](config)
    except (ValueError, AnalysisError, QuadratureError) as exc:
        print(f"pairfringe: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
