"""Energy-anticorrelated signal/idler pairs from a monochromatic pump.

The pump linewidth is zero, so each pair satisfies
``1/signal + 1/idler = 1/pump`` exactly.  The signal wavelength is drawn from
the pinhole passband; the idler follows from conservation.

Events are produced as a :class:`PairBatch` (one array per field).  Indexing
or iterating a batch yields :class:`PhotonPairEvent` objects.
"""
from __future__ import annotations

import enum
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np
from scipy.integrate import quad

from .errors import DomainError
from .spectral import C_NM_PER_PS, FilterSpec, Spectrum, sample_wavelength, transmission

# Pairs per generation slice.  Part of the seeding contract: changing it
# changes every generated stream.
SLICE_PAIRS = 1 << 18


class Outcome(enum.IntEnum):
    LOST = 0
    D1 = 1
    D2 = 2
    D3 = 3


def idler_wavelength(pump, signal):
    """Idler wavelength (nm) conjugate to ``signal`` for pump wavelength ``pump``."""
    pump = np.asarray(pump, dtype=float)
    signal = np.asarray(signal, dtype=float)
    if np.any(pump <= 0):
        raise DomainError("pump wavelength must be > 0")
    if np.any(signal <= pump):
        raise DomainError("signal wavelength must exceed the pump wavelength")
    out = pump * signal / (signal - pump)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SourceConfig:
    pump_wavelength: float = 351.0
    pinhole_spectrum: Spectrum = field(default_factory=lambda: Spectrum(702.0, 25.0))
    mean_pair_rate: float = 1.0e5
    emission_jitter: float = 0.0

    def __post_init__(self):
        if not self.pump_wavelength > 0:
            raise DomainError("pump_wavelength must be > 0")
        if not self.mean_pair_rate > 0:
            raise DomainError("mean_pair_rate must be > 0")
        if self.emission_jitter < 0:
            raise DomainError("emission_jitter must be >= 0")
        if self.pinhole_spectrum.center <= self.pump_wavelength:
            raise DomainError("pinhole center must lie on the red side of the pump")
        degenerate = 2.0 * self.pump_wavelength
        if abs(self.pinhole_spectrum.center - degenerate) > 1e-6 * degenerate:
            warnings.warn(
                f"pinhole center {self.pinhole_spectrum.center} nm is not the degenerate "
                f"wavelength {degenerate} nm",
                stacklevel=2,
            )

    @property
    def pump_nu(self) -> float:
        return C_NM_PER_PS / self.pump_wavelength


@dataclass(frozen=True)
class PhotonPairEvent:
    emission_time: float
    signal_wavelength: float
    idler_wavelength: float
    signal_outcome: Outcome = Outcome.LOST
    idler_outcome: Outcome = Outcome.LOST
    signal_detect_time: Optional[float] = None
    idler_detect_time: Optional[float] = None


def _maybe_time(value: float) -> Optional[float]:
    return None if math.isnan(value) else float(value)


@dataclass
class PairBatch:
    """Time-ordered pairs stored column-wise.

    Absent detection times are NaN.
    """

    pump_wavelength: float
    emission_time: np.ndarray
    signal_wavelength: np.ndarray
    idler_wavelength: np.ndarray
    signal_outcome: np.ndarray = None
    idler_outcome: np.ndarray = None
    signal_detect_time: np.ndarray = None
    idler_detect_time: np.ndarray = None
    duration: float = 0.0

    def __post_init__(self):
        n = len(self.emission_time)
        if self.signal_outcome is None:
            self.signal_outcome = np.zeros(n, dtype=np.int8)
        if self.idler_outcome is None:
            self.idler_outcome = np.zeros(n, dtype=np.int8)
        if self.signal_detect_time is None:
            self.signal_detect_time = np.full(n, np.nan)
        if self.idler_detect_time is None:
            self.idler_detect_time = np.full(n, np.nan)

    def __len__(self) -> int:
        return len(self.emission_time)

    def __getitem__(self, i: int) -> PhotonPairEvent:
        return PhotonPairEvent(
            emission_time=float(self.emission_time[i]),
            signal_wavelength=float(self.signal_wavelength[i]),
            idler_wavelength=float(self.idler_wavelength[i]),
            signal_outcome=Outcome(int(self.signal_outcome[i])),
            idler_outcome=Outcome(int(self.idler_outcome[i])),
            signal_detect_time=_maybe_time(self.signal_detect_time[i]),
            idler_detect_time=_maybe_time(self.idler_detect_time[i]),
        )

    def __iter__(self) -> Iterator[PhotonPairEvent]:
        for i in range(len(self)):
            yield self[i]

    def copy(self) -> "PairBatch":
        return PairBatch(
            self.pump_wavelength,
            self.emission_time.copy(),
            self.signal_wavelength.copy(),
            self.idler_wavelength.copy(),
            self.signal_outcome.copy(),
            self.idler_outcome.copy(),
            self.signal_detect_time.copy(),
            self.idler_detect_time.copy(),
            self.duration,
        )

    @classmethod
    def from_events(cls, events: Sequence[PhotonPairEvent], pump_wavelength: float,
                    duration: float | None = None) -> "PairBatch":
        def col(name, dtype=float):
            return np.array([getattr(e, name) for e in events], dtype=dtype)

        def times(name):
            return np.array(
                [np.nan if getattr(e, name) is None else getattr(e, name) for e in events],
                dtype=float,
            )

        t = col("emission_time")
        return cls(
            pump_wavelength,
            t,
            col("signal_wavelength"),
            col("idler_wavelength"),
            col("signal_outcome", np.int8),
            col("idler_outcome", np.int8),
            times("signal_detect_time"),
            times("idler_detect_time"),
            duration if duration is not None else (float(t.max()) if len(t) else 0.0),
        )

    @classmethod
    def concatenate(cls, batches: Sequence["PairBatch"], duration: float) -> "PairBatch":
        pump = batches[0].pump_wavelength
        cat = lambda name: np.concatenate([getattr(b, name) for b in batches])  # noqa: E731
        return cls(
            pump,
            cat("emission_time"),
            cat("signal_wavelength"),
            cat("idler_wavelength"),
            cat("signal_outcome"),
            cat("idler_outcome"),
            cat("signal_detect_time"),
            cat("idler_detect_time"),
            duration,
        )

    def conservation_error(self) -> np.ndarray:
        """Relative violation of ``1/s + 1/i = 1/pump`` per pair."""
        lhs = 1.0 / self.signal_wavelength + 1.0 / self.idler_wavelength
        rhs = 1.0 / self.pump_wavelength
        return np.abs(lhs - rhs) / rhs


def _seed_sequence(seed, key: tuple) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(key))
    return np.random.SeedSequence(int(seed), spawn_key=tuple(key))


def derive_rng(seed, *key: int) -> np.random.Generator:
    """Independent generator for the stream labelled ``key`` under ``seed``."""
    return np.random.default_rng(_seed_sequence(seed, key))


def _slice_events(config: SourceConfig, rng: np.random.Generator, times: np.ndarray) -> PairBatch:
    signal = sample_wavelength(
        config.pinhole_spectrum, rng, size=len(times), nu_max=config.pump_nu
    )
    idler = config.pump_wavelength * signal / (signal - config.pump_wavelength)
    return PairBatch(config.pump_wavelength, times, signal, idler)


def generate_pairs(config: SourceConfig, duration: float | None = None, *,
                   n_pairs: int | None = None, seed=0, key: tuple = (),
                   workers: int = 1) -> PairBatch:
    """Emit pairs over ``duration`` seconds, or exactly ``n_pairs`` pairs.

    Emission times form a Poisson process at ``config.mean_pair_rate``.  The
    stream is cut into fixed slices with independently seeded generators,
    so the result does not depend on ``workers``.
    """
    if (duration is None) == (n_pairs is None):
        raise ValueError("give exactly one of duration or n_pairs")
    rate = config.mean_pair_rate

    if duration is not None:
        if not duration > 0:
            raise DomainError("duration must be > 0")
        slice_len = SLICE_PAIRS / rate
        n_slices = max(1, math.ceil(duration / slice_len))

        def make(s):
            rng = derive_rng(seed, *key, 0, s)
            t0 = s * slice_len
            t1 = min(duration, (s + 1) * slice_len)
            n = rng.poisson(rate * (t1 - t0))
            times = np.sort(rng.uniform(t0, t1, n))
            return _slice_events(config, rng, times), 0.0

        total = float(duration)
    else:
        if n_pairs < 0:
            raise DomainError("n_pairs must be >= 0")
        n_slices = max(1, math.ceil(n_pairs / SLICE_PAIRS))

        def make(s):
            rng = derive_rng(seed, *key, 0, s)
            n = min(SLICE_PAIRS, n_pairs - s * SLICE_PAIRS)
            gaps = rng.exponential(1.0 / rate, n)
            times = np.cumsum(gaps)
            return _slice_events(config, rng, times), float(gaps.sum())

        total = None

    if workers > 1 and n_slices > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(make, range(n_slices)))
    else:
        parts = [make(s) for s in range(n_slices)]

    if total is None:
        offset = 0.0
        for batch, span in parts:
            batch.emission_time += offset
            offset += span
        total = offset

    batch = PairBatch.concatenate([b for b, _ in parts], duration=total)
    if config.emission_jitter > 0:
        rng = derive_rng(seed, *key, 4)
        batch.emission_time += rng.normal(0.0, config.emission_jitter, len(batch))
        order = np.argsort(batch.emission_time, kind="stable")
        for name in ("emission_time", "signal_wavelength", "idler_wavelength"):
            setattr(batch, name, getattr(batch, name)[order])
    return batch


class ConditionalSpectrum:
    """Spectrum of signal photons whose idler partner passes ``filt``.

    Built from the pinhole density and the filter transmission evaluated at
    the conjugate idler wavelength.  Not normalised; ``weight`` is the
    fraction of pairs whose idler is transmitted.
    """

    def __init__(self, pinhole: Spectrum, filt: FilterSpec | None, pump_wavelength: float):
        self.pinhole = pinhole
        self.filter = filt
        self.pump_wavelength = pump_wavelength
        self.pump_nu = C_NM_PER_PS / pump_wavelength
        self._pinhole_mass = self._positive_mass()

    def _positive_mass(self) -> float:
        # pinhole mass that the source can actually emit (0 < nu < nu_pump)
        lo, hi = self.pinhole.support_nu()
        lo, hi = max(lo, 0.0), min(hi, self.pump_nu)
        return _quad_density(self.pinhole.density_nu, lo, hi, self.pinhole.center_nu)

    @property
    def center_nu(self) -> float:
        return self.pinhole.center_nu

    def density_nu(self, nu):
        nu = np.asarray(nu, dtype=float)
        ok = (nu > 0) & (nu < self.pump_nu)
        nu_idler = np.where(ok, self.pump_nu - nu, 1.0)
        t = transmission(self.filter, C_NM_PER_PS / nu_idler)
        return np.where(ok, self.pinhole.density_nu(nu) * t / self._pinhole_mass, 0.0)

    def support_nu(self) -> tuple[float, float]:
        lo, hi = self.pinhole.support_nu()
        lo, hi = max(lo, 0.0), min(hi, self.pump_nu)
        if self.filter is not None:
            f_lo, f_hi = self.filter.support()
            idler_lo = C_NM_PER_PS / f_hi
            idler_hi = C_NM_PER_PS / f_lo if f_lo > 0 else math.inf
            lo = max(lo, self.pump_nu - idler_hi)
            hi = min(hi, self.pump_nu - idler_lo)
        if not lo < hi:
            raise DomainError("filter passband and pinhole do not overlap")
        return lo, hi

    @property
    def weight(self) -> float:
        lo, hi = self.support_nu()
        return _quad_density(self.density_nu, lo, hi, self.center_nu)


def _quad_density(f, lo: float, hi: float, ref: float) -> float:
    ref = min(max(ref, lo), hi)
    total = 0.0
    for a, b in ((lo, ref), (ref, hi)):
        if a < b:
            total += quad(f, a, b, limit=2000, epsabs=0.0, epsrel=1e-12)[0]
    return total


def conditional_spectrum(config: SourceConfig, filt: FilterSpec | None) -> ConditionalSpectrum:
    return ConditionalSpectrum(config.pinhole_spectrum, filt, config.pump_wavelength)
