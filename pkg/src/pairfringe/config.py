"""Run configuration: a flat ``key = value`` text format with unit suffixes.

Lines look like ``path_difference = 220 um``; ``#`` starts a comment.  Every
key has a canonical unit (wavelengths in nm, optical paths in um, times in
s, rates in 1/s) and values may be given in any unit of the same kind.
Unknown keys are rejected.  :func:`RunConfig.canonical_text` renders the
physics-relevant keys in canonical units and :attr:`RunConfig.fingerprint`
hashes that text, so two configs that simulate the same thing share a
fingerprint whatever units they were written in.
"""
from __future__ import annotations

import dataclasses
import hashlib
import math
import re
from decimal import Decimal
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Mapping

from .coincidence import CoincidenceConfig
from .errors import DomainError
from .interferometer import DetectorConfig, MichelsonConfig
from .pair_source import SourceConfig
from .spectral import FilterSpec, Shape, Spectrum, filter_preset

# unit -> decimal exponent into the base of its kind (m, s, 1/s); decimal
# arithmetic keeps "0.22 mm" and "220 um" bit-identical
_UNITS = {
    "length": {"nm": -9, "um": -6, "μm": -6, "micron": -6, "mm": -3, "m": 0},
    "time": {"fs": -15, "ps": -12, "ns": -9, "us": -6, "μs": -6, "ms": -3, "s": 0},
    "rate": {"hz": 0, "/s": 0, "1/s": 0, "khz": 3, "mhz": 6},
}
# kind, canonical unit for each dimensional key kind
_CANON = {"wavelength": ("length", "nm"), "path": ("length", "um"),
          "time": ("time", "s"), "rate": ("rate", "hz")}

FILTER_CHOICES = ("none", "f1", "f2", "custom")
SCAN_KINDS = ("fine_phase", "coarse_delta")
_NUMBER = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(.*?)\s*$")


def parse_quantity(text: str, kind: str) -> float:
    """Parse ``"220um"`` style text into the canonical unit of ``kind``.

    ``kind`` is one of ``wavelength`` (nm), ``path`` (um), ``time`` (s),
    ``rate`` (1/s) or ``number``.  A bare number is taken as canonical.
    """
    m = _NUMBER.match(str(text))
    if not m:
        raise DomainError(f"cannot parse {text!r} as a number")
    value, unit = float(m.group(1)), m.group(2)
    if kind == "number":
        if unit:
            raise DomainError(f"{text!r}: dimensionless value takes no unit")
        return value
    dim, canon = _CANON[kind]
    if not unit:
        return value
    table = _UNITS[dim]
    key = unit if unit in table else unit.lower()
    if key not in table:
        raise DomainError(f"{text!r}: unit {unit!r} is not a {dim} unit")
    return float(Decimal(m.group(1)).scaleb(table[key] - table[canon]))


def _field(kind="number", default=None, *, physics=True, doc=""):
    return dataclasses.field(default=default,
                             metadata={"kind": kind, "physics": physics, "doc": doc})


@dataclass
class RunConfig:
    """Everything one simulation run needs.  See the module docstring."""

    # source
    pump_wavelength: float = _field("wavelength", 351.0, doc="pump laser wavelength")
    pinhole_center: float = _field("wavelength", 702.0, doc="pinhole passband center")
    pinhole_bandwidth: float = _field("wavelength", 25.0, doc="pinhole passband width")
    pinhole_shape: str = _field("shape", "rect", doc="pinhole passband shape")
    pair_rate: float = _field("rate", 1.0e5, doc="mean pair emission rate")
    emission_jitter: float = _field("time", 0.0, doc="rms emission-time jitter")
    # interferometer
    path_difference: float = _field("path", 220.0, doc="optical path difference 2(L2 - L1)")
    phase_offset: float = _field("number", 0.0, doc="extra interferometer phase, rad")
    # remote filter
    filter: str = _field("filter", "f1", doc="none, f1, f2 or custom")
    filter_shape: str = _field("shape", "sinc2", doc="filter transmission shape")
    filter_center: float = _field("wavelength", 702.0, doc="custom filter center")
    filter_bandwidth: float = _field("wavelength", 0.86, doc="custom filter width")
    filter_peak: float = _field("number", 1.0, doc="filter peak transmission")
    # detectors
    d1_efficiency: float = _field("number", 1.0)
    d2_efficiency: float = _field("number", 1.0)
    d3_efficiency: float = _field("number", 1.0)
    d1_dark_rate: float = _field("rate", 0.0)
    d2_dark_rate: float = _field("rate", 0.0)
    d3_dark_rate: float = _field("rate", 0.0)
    d1_jitter: float = _field("time", 0.0)
    d2_jitter: float = _field("time", 0.0)
    d3_jitter: float = _field("time", 0.0)
    # coincidence unit
    window: float = _field("time", 1.0e-9, doc="full coincidence window")
    delay_d1: float = _field("time", 0.0)
    delay_d2: float = _field("time", 0.0)
    # run size, exactly one of the two
    pairs: int | None = _field("count", 1_000_000, doc="pairs per scan point")
    duration: float | None = _field("time", None, doc="seconds per scan point")
    seed: int = _field("count", 0)
    # scans
    scan_kind: str = _field("scan_kind", "fine_phase")
    scan_start: float = _field("number", 0.0, doc="phase (rad) or path (um)")
    scan_stop: float = _field("number", 4.0 * math.pi, doc="phase (rad) or path (um)")
    scan_steps: int = _field("count", 32, doc="number of intervals")
    repetitions: int = _field("count", 100)
    # subpackets
    n_bands: int = _field("count", 5)
    chirp: float | None = _field("number", None, doc="um per nm; default spans +-W/4")
    barrier: str = _field("barrier", "none", doc="none, graded, flat or comma-separated list")
    # plumbing; not part of the fingerprint
    out: str | None = _field("str", None, physics=False)
    workers: int = _field("count", 1, physics=False)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if (self.pairs is None) == (self.duration is None):
            raise DomainError("set exactly one of pairs and duration")
        if self.pairs is not None and not (self.pairs >= 1 and float(self.pairs).is_integer()):
            raise DomainError("pairs must be a positive integer")
        if self.duration is not None and not self.duration > 0:
            raise DomainError("duration must be > 0")
        if self.filter not in FILTER_CHOICES:
            raise DomainError(f"filter must be one of {FILTER_CHOICES}")
        if self.scan_kind not in SCAN_KINDS:
            raise DomainError(f"scan_kind must be one of {SCAN_KINDS}")
        Shape.parse(self.pinhole_shape)
        Shape.parse(self.filter_shape)
        if self.scan_steps < 0 or self.repetitions < 1 or self.workers < 1 or self.n_bands < 1:
            raise DomainError("scan_steps >= 0, repetitions >= 1, workers >= 1, n_bands >= 1")

    # construction -----------------------------------------------------------

    @classmethod
    def from_mapping(cls, values: Mapping[str, object], base: "RunConfig | None" = None) -> "RunConfig":
        """New config from ``base`` (or defaults) overridden by ``values``.

        String values are parsed with units; other values are taken as given,
        already in canonical units.  Setting one of pairs/duration clears the
        other.
        """
        known = {f.name: f for f in fields(cls)}
        current = dataclasses.asdict(base) if base is not None else {
            f.name: f.default for f in fields(cls)}
        for key, raw in values.items():
            if key not in known:
                raise DomainError(f"unknown config key {key!r}")
            current[key] = _coerce(known[key], raw)
        if "pairs" in values and current["pairs"] is not None and "duration" not in values:
            current["duration"] = None
        if "duration" in values and current["duration"] is not None and "pairs" not in values:
            current["pairs"] = None
        return cls(**current)

    @classmethod
    def parse(cls, text: str, base: "RunConfig | None" = None) -> "RunConfig":
        values = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DomainError(f"line {lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key in values:
                raise DomainError(f"line {lineno}: duplicate key {key!r}")
            values[key] = value
        return cls.from_mapping(values, base)

    @classmethod
    def load(cls, path, base: "RunConfig | None" = None) -> "RunConfig":
        return cls.parse(Path(path).read_text(encoding="utf-8"), base)

    # derived objects --------------------------------------------------------

    def source(self) -> SourceConfig:
        pinhole = Spectrum(self.pinhole_center, self.pinhole_bandwidth, self.pinhole_shape)
        return SourceConfig(self.pump_wavelength, pinhole, self.pair_rate, self.emission_jitter)

    def michelson(self, path_difference: float | None = None) -> MichelsonConfig:
        delta = self.path_difference if path_difference is None else path_difference
        return MichelsonConfig(delta, self.phase_offset)

    def detectors(self) -> dict[int, DetectorConfig]:
        return {i: DetectorConfig(getattr(self, f"d{i}_efficiency"),
                                  getattr(self, f"d{i}_dark_rate"),
                                  getattr(self, f"d{i}_jitter")) for i in (1, 2, 3)}

    def coincidence(self) -> CoincidenceConfig:
        return CoincidenceConfig(self.window, self.delay_d1, self.delay_d2)

    def filter_spec(self, choice: str | None = None) -> FilterSpec | None:
        choice = self.filter if choice is None else choice
        if choice == "custom":
            return FilterSpec(self.filter_center, self.filter_bandwidth, self.filter_shape,
                              self.filter_peak)
        filt = filter_preset(choice, self.filter_shape)
        if filt is not None and self.filter_peak != 1.0:
            filt = dataclasses.replace(filt, peak_transmission=self.filter_peak)
        return filt

    def spectrum(self) -> Spectrum:
        """Spectrum used for the subpacket picture: the pinhole passband."""
        return Spectrum(self.pinhole_center, self.pinhole_bandwidth, self.pinhole_shape)

    # provenance -------------------------------------------------------------

    def canonical_text(self, physics_only: bool = True) -> str:
        lines = []
        for f in fields(self):
            if physics_only and not f.metadata["physics"]:
                continue
            lines.append(f"{f.name} = {_render(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    @property
    def fingerprint(self) -> str:
        return hashlib.sha256(self.canonical_text().encode("utf-8")).hexdigest()


def _render(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _coerce(f: dataclasses.Field, raw):
    kind = f.metadata["kind"]
    if raw is None:
        return None
    if isinstance(raw, str):
        text = raw.strip()
        if text.lower() == "none" and f.name in ("pairs", "duration", "chirp", "out"):
            return None
        if kind == "str":
            return text
        if kind in ("shape",):
            return Shape.parse(text).value
        if kind in ("filter", "scan_kind", "barrier"):
            return text.lower()
        if kind == "count":
            value = parse_quantity(text, "number")
            if not float(value).is_integer():
                raise DomainError(f"{f.name} must be an integer, got {raw!r}")
            return int(value)
        return parse_quantity(text, kind)
    if kind == "count":
        if not float(raw).is_integer():
            raise DomainError(f"{f.name} must be an integer, got {raw!r}")
        return int(raw)
    if kind == "shape":
        return Shape.parse(raw).value
    if kind in ("str", "filter", "scan_kind", "barrier"):
        return str(raw)
    return float(raw)


def describe_keys() -> str:
    """One line per config key with its canonical unit, for ``--help``."""
    unit = {"wavelength": "nm", "path": "um", "time": "s", "rate": "1/s"}
    out = []
    for f in fields(RunConfig):
        kind = f.metadata["kind"]
        u = unit.get(kind, "")
        doc = f.metadata["doc"]
        out.append(f"  {f.name:<18} {_render(f.default):<22} {u:<4} {doc}".rstrip())
    return "\n".join(out)
