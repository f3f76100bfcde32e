"""Wavepacket envelopes and their decomposition into colour subpackets.

An envelope is the intensity of the transform-limited Fourier synthesis of a
spectrum, positioned along the propagation axis (um).  Positions are delays
behind the packet reference; negative positions are the packet front.

Envelope width per spectral shape, with ``W = center**2 / bandwidth``:

* ``sinc2``: rectangular envelope of full width ``W``;
* ``rect``: ``sinc^2`` envelope, FWHM ``0.886 W``;
* ``gaussian``: gaussian envelope, FWHM ``0.441 W``.

Only intensities are kept.  Interference is handled in ``analysis``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.integrate import quad

from .errors import DegenerateError, DomainError, ResolutionError
from .spectral import C_NM_PER_PS, Shape, Spectrum

MIN_POINTS_PER_WIDTH = 32
SINC2_SYNTH_LOBES = 400  # sinc2 amplitude truncation, at most half the center frequency
_NU_POINTS_PER_LOBE = 24
COLOR_LABELS = ("V", "B", "G", "Y", "R")  # short to long wavelength

ENVELOPE_FWHM_FACTOR = {Shape.SINC2: 1.0, Shape.RECT: 0.8859, Shape.GAUSSIAN: 0.4413}


@dataclass
class Envelope:
    positions: np.ndarray
    intensity: np.ndarray
    total_weight: float
    label: str = ""

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        self.intensity = np.asarray(self.intensity, dtype=float)
        if self.positions.shape != self.intensity.shape:
            raise ValueError("positions and intensity differ in length")
        if np.any(np.diff(self.positions) <= 0):
            raise ValueError("positions must be strictly increasing")
        if np.any(self.intensity < 0):
            raise ValueError("intensities must be >= 0")

    @property
    def samples(self):
        return list(zip(self.positions.tolist(), self.intensity.tolist()))

    def integral(self) -> float:
        return float(np.trapezoid(self.intensity, self.positions))

    def peak(self) -> float:
        return peak_position(self.positions, self.intensity)

    def fwhm(self) -> float:
        return fwhm(self.positions, self.intensity)


def peak_position(x: np.ndarray, y: np.ndarray) -> float:
    """Grid maximum refined by a parabola through its neighbours."""
    i = int(np.argmax(y))
    if 0 < i < len(y) - 1:
        y0, y1, y2 = y[i - 1], y[i], y[i + 1]
        denom = y0 - 2.0 * y1 + y2
        if denom < 0:
            shift = 0.5 * (y0 - y2) / denom
            return float(x[i] + shift * (x[i + 1] - x[i - 1]) / 2.0)
    return float(x[i])


def fwhm(x: np.ndarray, y: np.ndarray) -> float:
    """Distance between the outermost half-maximum crossings (linear interpolation)."""
    half = 0.5 * float(np.max(y))
    above = np.nonzero(y >= half)[0]
    i, j = above[0], above[-1]
    if i == 0 or j == len(y) - 1:
        raise ResolutionError("envelope is not contained in the grid")
    left = x[i - 1] + (half - y[i - 1]) * (x[i] - x[i - 1]) / (y[i] - y[i - 1])
    right = x[j] + (half - y[j]) * (x[j + 1] - x[j]) / (y[j + 1] - y[j])
    return float(right - left)


@dataclass(frozen=True)
class Band:
    """The part of ``parent`` between wavelengths ``lo`` and ``hi`` (nm)."""

    parent: Spectrum
    lo: float
    hi: float
    weight: float
    center: float
    label: str = ""

    @property
    def bandwidth(self) -> float:
        return self.hi - self.lo

    @property
    def coherence_length(self) -> float:
        return self.center**2 / self.bandwidth / 1000.0

    def as_spectrum(self) -> Spectrum:
        """Exact :class:`Spectrum` for bands of a rectangular parent."""
        if self.parent.shape is not Shape.RECT:
            raise ValueError("only bands of a rectangular parent are themselves rectangular")
        return Spectrum(0.5 * (self.lo + self.hi), self.bandwidth, Shape.RECT, self.weight)

    def density(self, lam):
        lam = np.asarray(lam, dtype=float)
        return np.where((lam >= self.lo) & (lam <= self.hi), self.parent.density(lam), 0.0)


def _nu_window(spec: Spectrum, lo_lam: float, hi_lam: float) -> tuple[float, float]:
    """Frequency interval for synthesis, clipped to a finite range."""
    if spec.shape is Shape.SINC2:
        reach = min(SINC2_SYNTH_LOBES * spec.nu_width, 0.5 * spec.center_nu)
        nu_lo, nu_hi = spec.center_nu - reach, spec.center_nu + reach
    else:
        s_lo, s_hi = spec.support()
        nu_lo, nu_hi = C_NM_PER_PS / s_hi, C_NM_PER_PS / s_lo
    if math.isfinite(hi_lam):
        nu_lo = max(nu_lo, C_NM_PER_PS / hi_lam)
    if lo_lam > 0:
        nu_hi = min(nu_hi, C_NM_PER_PS / lo_lam)
    return nu_lo, nu_hi


def _amplitude(spec: Spectrum, nu: np.ndarray) -> np.ndarray:
    if spec.shape is Shape.SINC2:
        return np.sinc((nu - spec.center_nu) / spec.nu_width)
    return np.sqrt(spec.density_nu(nu))


def _field(spec: Spectrum, lo_lam: float, hi_lam: float, x: np.ndarray) -> np.ndarray:
    """Complex field at positions ``x`` (um) synthesised from part of a spectrum."""
    nu_lo, nu_hi = _nu_window(spec, lo_lam, hi_lam)
    tau = x * 1000.0 / C_NM_PER_PS  # ps
    # the discrete sum repeats in tau with period 1/dnu; keep copies beyond the grid
    per_lobe = _NU_POINTS_PER_LOBE * (nu_hi - nu_lo) / spec.nu_width
    no_alias = 4.0 * (nu_hi - nu_lo) * float(np.max(np.abs(tau)))
    n_nu = int(max(256.0, per_lobe, no_alias)) | 1
    if n_nu > 200_000:
        raise ResolutionError(f"Fourier synthesis needs {n_nu} frequency samples")
    nu = np.linspace(nu_lo, nu_hi, n_nu)
    amp = _amplitude(spec, nu)
    # Simpson weights
    w = np.ones(n_nu)
    w[1:-1:2], w[2:-1:2] = 4.0, 2.0
    coef = amp * w * (nu[1] - nu[0]) / 3.0
    out = np.empty(x.size, dtype=complex)
    step = max(1, 4_000_000 // n_nu)
    for s in range(0, x.size, step):
        phase = np.exp(2j * np.pi * np.outer(tau[s:s + step], nu - spec.center_nu))
        out[s:s + step] = phase @ coef
    return out


def _grid(resolution: float, span: float) -> np.ndarray:
    n = int(round(span / resolution))
    return np.linspace(-0.5 * span, 0.5 * span, n + 1)


def _normalised(x, intensity, weight):
    area = np.trapezoid(intensity, x)
    if not area > 0:
        raise ResolutionError("envelope vanishes on the grid")
    return intensity * (weight / area)


def envelope_from_spectrum(spectrum: Spectrum, resolution: float, span: float,
                           label: str = "") -> Envelope:
    """Intensity envelope of ``spectrum`` on a grid of step ``resolution`` um over ``span`` um."""
    if not (resolution > 0 and span > 0):
        raise DomainError("resolution and span must be > 0")
    width = spectrum.coherence_length
    if width / resolution < MIN_POINTS_PER_WIDTH:
        raise ResolutionError(
            f"grid step {resolution} um gives fewer than {MIN_POINTS_PER_WIDTH} points "
            f"across the {width:.4g} um wavepacket"
        )
    if span < 2.0 * width:
        raise ResolutionError(f"span {span} um is shorter than twice the {width:.4g} um width")
    x = _grid(resolution, span)
    intensity = np.abs(_field(spectrum, 0.0, math.inf, x)) ** 2
    return Envelope(x, _normalised(x, intensity, spectrum.weight), spectrum.weight, label)


def band_envelope(band: Band, positions: np.ndarray, offset: float = 0.0) -> Envelope:
    x = np.asarray(positions, dtype=float)
    intensity = np.abs(_field(band.parent, band.lo, band.hi, x - offset)) ** 2
    return Envelope(x, _normalised(x, intensity, band.weight), band.weight, band.label)


@dataclass
class Subpacket:
    band: Band
    center_offset: float
    envelope: Envelope


@dataclass
class SubpacketSet:
    parent: Spectrum
    bands: list
    chirp_coefficient: float
    parent_envelope: Envelope

    @property
    def positions(self) -> np.ndarray:
        return self.parent_envelope.positions

    def band_sum(self, weights: Sequence[float] | None = None) -> np.ndarray:
        weights = np.ones(len(self.bands)) if weights is None else np.asarray(weights, float)
        total = np.zeros_like(self.positions)
        for w, sub in zip(weights, self.bands):
            total += w * sub.envelope.intensity
        return total


def band_labels(n_bands: int) -> list[str]:
    if n_bands == 5:
        return list(COLOR_LABELS)
    if n_bands == 1:
        return ["all"]
    return [f"band{k}" for k in range(n_bands)]


def default_chirp(spectrum: Spectrum, n_bands: int) -> float:
    """Chirp (um/nm) placing the outermost band centers at +/- W_band / 4.

    ``W_band`` is the coherence length of one band of nominal width
    ``bandwidth / n_bands``.
    """
    if n_bands < 2:
        return 0.0
    band_width = spectrum.center**2 / (spectrum.bandwidth / n_bands) / 1000.0
    centers = [spectrum.ppf((k + 0.5) / n_bands) for k in range(n_bands)]
    reach = max(abs(c - spectrum.center) for c in centers)
    return 0.25 * band_width / reach


def decompose(spectrum: Spectrum, n_bands: int = 5, chirp_coefficient: float | None = None,
              resolution: float | None = None, span: float | None = None) -> SubpacketSet:
    """Split ``spectrum`` into ``n_bands`` equal-weight colour bands.

    Each band sits at ``chirp_coefficient * (band center - parent center)``
    um, so with a positive chirp the shorter wavelengths lead.  The grid
    defaults to resolving the parent and holding every band envelope.
    """
    if n_bands < 1:
        raise DomainError("n_bands must be >= 1")
    if chirp_coefficient is None:
        chirp_coefficient = default_chirp(spectrum, n_bands)

    edges = [spectrum.ppf(k / n_bands) for k in range(n_bands + 1)]
    cdf_edges = [0.0] + [float(spectrum.cdf(e)) for e in edges[1:-1]] + [1.0]
    labels = band_labels(n_bands)
    bands = []
    for k in range(n_bands):
        center = spectrum.ppf((k + 0.5) / n_bands) if n_bands > 1 else spectrum.center
        weight = spectrum.weight * (cdf_edges[k + 1] - cdf_edges[k])
        bands.append(Band(spectrum, edges[k], edges[k + 1], weight, center, labels[k]))
    offsets = [chirp_coefficient * (b.center - spectrum.center) for b in bands]

    parent_width = spectrum.coherence_length
    nominal_band_width = parent_width * n_bands
    if resolution is None:
        resolution = parent_width / (2 * MIN_POINTS_PER_WIDTH)
    if span is None:
        reach = max(abs(o) for o in offsets)
        span = 2.0 * (4.0 * nominal_band_width + reach)
    if span < 2.0 * nominal_band_width:
        raise ResolutionError(
            f"{n_bands} bands have {nominal_band_width:.4g} um envelopes; span {span} um "
            "cannot resolve them"
        )
    n_points = span / resolution
    if n_points > 200_000:
        raise ResolutionError(f"{n_bands} bands need {n_points:.3g} grid points")

    parent_env = envelope_from_spectrum(spectrum, resolution, span, label="parent")
    x = parent_env.positions
    subs = [Subpacket(b, off, band_envelope(b, x, off)) for b, off in zip(bands, offsets)]
    return SubpacketSet(spectrum, subs, float(chirp_coefficient), parent_env)


@dataclass(frozen=True)
class BarrierResult:
    incident_peak: float
    transmitted_peak: float
    advance: float
    transmissions: tuple
    transmitted: Envelope


def band_transmissions(subset: SubpacketSet, barrier) -> np.ndarray:
    """Per-band transmission from a callable, a sequence, or a label mapping."""
    if callable(barrier):
        out = []
        for sub in subset.bands:
            b = sub.band
            lo, hi = max(b.lo, subset.parent.support()[0]), min(b.hi, subset.parent.support()[1])
            if subset.parent.shape is Shape.SINC2:
                # bands are integrated over the synthesised frequency window
                nu_lo, nu_hi = _nu_window(b.parent, b.lo, b.hi)
                lo, hi = C_NM_PER_PS / nu_hi, C_NM_PER_PS / nu_lo
            num = quad(lambda lam: b.density(lam) * barrier(lam), lo, hi, limit=500)[0]
            den = quad(b.density, lo, hi, limit=500)[0]
            out.append(num / den if den > 0 else 0.0)
        return np.array(out)
    if isinstance(barrier, Mapping):
        try:
            return np.array([float(barrier[s.band.label]) for s in subset.bands])
        except KeyError as exc:
            raise ValueError(f"barrier gives no transmission for band {exc}") from None
    values = np.asarray(list(barrier), dtype=float)
    if values.size != len(subset.bands):
        raise ValueError(f"need {len(subset.bands)} band transmissions, got {values.size}")
    return values


def barrier_demo(subset: SubpacketSet, barrier) -> BarrierResult:
    """Peak advance of the packet left after a frequency-selective barrier.

    The incident packet is the band sum and the transmitted packet the same
    sum weighted by band transmissions.  ``advance`` is the incident peak
    minus the transmitted peak (positive when the transmitted peak leads).
    """
    t = band_transmissions(subset, barrier)
    if np.any((t < 0) | (t > 1)):
        raise DomainError("transmissions must lie in [0, 1]")
    if np.any(np.diff(t) > 1e-12):
        raise DomainError("barrier transmission must not increase with wavelength")
    if not np.any(t > 0):
        raise DegenerateError("barrier is opaque: nothing is transmitted")
    x = subset.positions
    incident = subset.band_sum()
    transmitted = subset.band_sum(t)
    inc_peak = peak_position(x, incident)
    tr_peak = peak_position(x, transmitted)
    weight = float(sum(ti * s.band.weight for ti, s in zip(t, subset.bands)))
    env = Envelope(x, transmitted, weight, "transmitted")
    return BarrierResult(inc_peak, tr_peak, inc_peak - tr_peak, tuple(t.tolist()), env)


def graded_barrier() -> dict:
    return {"V": 1.0, "B": 0.5, "G": 0.25, "Y": 0.1, "R": 0.05}


def write_envelopes_csv(path_or_file, envelopes: Sequence[Envelope], metadata: Mapping | None = None,
                        fmt: Callable[[float], str] | None = None) -> None:
    """Long-format CSV (position_um, intensity, band) for plotting."""
    fmt = fmt or (lambda v: np.format_float_scientific(v, unique=True))
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        for key, value in (metadata or {}).items():
            fh.write(f"# {key} = {value}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["position_um", "intensity", "band"])
        for env in envelopes:
            for xi, yi in zip(env.positions, env.intensity):
                writer.writerow([fmt(xi), fmt(yi), env.label])
    finally:
        if own:
            fh.close()
