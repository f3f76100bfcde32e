"""Experiment drivers: one count record, parameter scans and repeated
no-signaling runs, plus the scan CSV format.

Every record draws from random streams keyed by ``(seed, key)``; scan point
``p`` uses ``key = (p,)``.  Results therefore do not depend on how many
worker processes evaluate the points.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .analysis import FringeScan, NoSignalingReport, no_signaling_test
from .coincidence import CountRecord, count
from .config import RunConfig
from .errors import DomainError
from .interferometer import dark_counts, route_idler, route_signal
from .pair_source import Outcome, derive_rng, generate_pairs

# stream labels below a record key; 0 is taken by the source slices
_STREAM_SIGNAL, _STREAM_IDLER, _STREAM_DARK = 1, 2, 3

SCAN_COLUMNS = ("abscissa", "singles_D1", "singles_D2", "singles_D3",
                "coincidences_D1D2", "coincidences_D1D3", "duration_s")


def run_record(config: RunConfig, key: tuple = (), *, path_difference: float | None = None,
               filter_choice: str | None = None) -> CountRecord:
    """Simulate one counting interval and return its record."""
    seed = config.seed
    dets = config.detectors()
    batch = generate_pairs(config.source(), config.duration, n_pairs=config.pairs,
                           seed=seed, key=key, workers=1)
    batch = route_signal(config.michelson(path_difference), dets[2], batch,
                         derive_rng(seed, *key, _STREAM_SIGNAL), det_d3=dets[3])
    batch = route_idler(config.filter_spec(filter_choice), dets[1], batch,
                        derive_rng(seed, *key, _STREAM_IDLER))
    darks = {}
    for port in (Outcome.D1, Outcome.D2, Outcome.D3):
        rng = derive_rng(seed, *key, _STREAM_DARK, int(port))
        darks[port] = dark_counts(dets[int(port)], batch.duration, rng)
    return count(batch, config.coincidence(), darks=darks,
                 snapshot={"fingerprint": config.fingerprint, "seed": seed, "key": key})


def scan_abscissa(config: RunConfig) -> np.ndarray:
    """Scan points from ``scan_start`` to ``scan_stop`` in ``scan_steps`` intervals."""
    if config.scan_steps == 0:
        return np.array([float(config.scan_start)])
    if not config.scan_stop > config.scan_start:
        raise DomainError("scan_stop must exceed scan_start")
    return np.linspace(config.scan_start, config.scan_stop, config.scan_steps + 1)


def scan_paths(config: RunConfig, abscissa: np.ndarray, reference_wavelength: float = 702.0):
    """Optical path difference (um) at each scan point."""
    if config.scan_kind == "fine_phase":
        return config.path_difference + abscissa * reference_wavelength / (2.0 * math.pi) / 1000.0
    return np.asarray(abscissa, dtype=float)


def _point(args):
    config, p, path = args
    return run_record(config, (p,), path_difference=path)


def _map(fn, items, workers: int):
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def run_scan(config: RunConfig, reference_wavelength: float = 702.0) -> FringeScan:
    """Run every scan point of ``config`` and collect a :class:`FringeScan`."""
    x = scan_abscissa(config)
    paths = scan_paths(config, x, reference_wavelength)
    if np.any(paths < 0):
        raise DomainError("scan reaches a negative path difference")
    records = _map(_point, [(config, p, float(d)) for p, d in enumerate(paths)], config.workers)
    return FringeScan(x, records, config.scan_kind, reference_wavelength,
                      base_delta=config.path_difference if config.scan_kind == "fine_phase" else 0.0,
                      metadata={"seed": config.seed, "fingerprint": config.fingerprint})


def _nosignal_pair(args):
    config, r, filter_choice = args
    with_f = run_record(config, (r, 0), filter_choice=filter_choice)
    without = run_record(config, (r, 1), filter_choice="none")
    return with_f, without


def biased_record(record: CountRecord, factor: float = 0.5) -> CountRecord:
    """Copy of ``record`` with its D2 singles scaled by ``factor``."""
    d2 = int(round(record.singles_D2 * factor))
    return dataclasses.replace(record, singles_D2=d2,
                               coincidences=min(record.coincidences, d2))


@dataclasses.dataclass(frozen=True)
class NoSignalingSummary:
    reports: tuple
    power: NoSignalingReport
    records: tuple

    @property
    def passed(self) -> int:
        return sum(r.passed for r in self.reports)

    @property
    def total(self) -> int:
        return len(self.reports)


def run_nosignal(config: RunConfig, repetitions: int | None = None, alpha: float = 0.01,
                 filter_choice: str | None = None) -> NoSignalingSummary:
    """Paired runs with and without the remote filter, one test per pair.

    The two runs of a repetition use independent streams, so the test sees
    genuine shot noise.  The power check halves the D2 singles of the first
    filtered record.
    """
    reps = config.repetitions if repetitions is None else repetitions
    if reps < 1:
        raise DomainError("repetitions must be >= 1")
    choice = config.filter if filter_choice is None else filter_choice
    if choice == "none":
        choice = "f1"
    pairs = _map(_nosignal_pair, [(config, r, choice) for r in range(reps)], config.workers)
    reports = tuple(no_signaling_test(w, wo, alpha) for w, wo in pairs)
    power = no_signaling_test(biased_record(pairs[0][0]), pairs[0][1], alpha)
    return NoSignalingSummary(reports, power, tuple(pairs))


def fmt_number(value) -> str:
    """Full-precision scientific notation, shortest round-trip form."""
    return np.format_float_scientific(float(value), unique=True)


def metadata_lines(config: RunConfig, command: str, extra: dict | None = None) -> list[str]:
    lines = [f"# command = {command}",
             f"# seed = {config.seed}",
             f"# fingerprint = {config.fingerprint}"]
    for key, value in (extra or {}).items():
        lines.append(f"# {key} = {value}")
    lines += ["# config " + line for line in config.canonical_text().splitlines()]
    return lines


def scan_csv(scan: FringeScan, config: RunConfig) -> str:
    """CSV text for a scan: metadata lines, column header, one row per point."""
    unit = "rad" if scan.scan_kind == "fine_phase" else "um"
    extra = {"scan_kind": scan.scan_kind, "abscissa_unit": unit,
             "reference_wavelength_nm": fmt_number(scan.reference_wavelength),
             "base_delta_um": fmt_number(scan.base_delta)}
    buf = io.StringIO()
    for line in metadata_lines(config, "scan", extra):
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SCAN_COLUMNS)
    for x, r in zip(scan.abscissa, scan.records):
        writer.writerow([fmt_number(x), fmt_number(r.singles_D1), fmt_number(r.singles_D2),
                         fmt_number(r.singles_D3), fmt_number(r.coincidences),
                         fmt_number(r.coincidences_D1D3), fmt_number(r.duration)])
    return buf.getvalue()


def read_scan_csv(text: str) -> tuple[dict, np.ndarray]:
    """Parse :func:`scan_csv` output into (metadata, rows array)."""
    meta, rows, header = {}, [], None
    for line in text.splitlines():
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body and not body.startswith("config "):
                k, v = (s.strip() for s in body.split("=", 1))
                meta[k] = v
            continue
        if header is None:
            header = line.split(",")
            continue
        rows.append([float(v) for v in line.split(",")])
    if header != list(SCAN_COLUMNS):
        raise ValueError("not a scan CSV")
    return meta, np.array(rows, dtype=float).reshape(-1, len(SCAN_COLUMNS))

