"""Per-photon transport: Michelson interferometer on the signal side, remote
filter on the idler side, and threshold detectors.

Each photon has a definite wavelength and picks an output port with the
single-wavelength fringe probability.  Fringe washout is then purely an
ensemble effect.  The two routing functions take disjoint inputs: the signal
side never sees the filter and the idler side never sees the interferometer.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .pair_source import Outcome, PairBatch, PhotonPairEvent
from .spectral import FilterSpec, transmission


@dataclass(frozen=True)
class MichelsonConfig:
    """``path_difference`` is the optical path difference 2(L2 - L1) in um."""

    path_difference: float = 220.0
    phase_offset: float = 0.0

    def __post_init__(self):
        if not self.path_difference >= 0:
            raise DomainError("path_difference must be >= 0")


@dataclass(frozen=True)
class DetectorConfig:
    efficiency: float = 1.0
    dark_rate: float = 0.0
    jitter: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise DomainError("efficiency must lie in [0, 1]")
        if self.dark_rate < 0 or self.jitter < 0:
            raise DomainError("dark_rate and jitter must be >= 0")


def michelson_probabilities(cfg: MichelsonConfig, lam):
    """Probabilities of leaving through D2 and D3 at wavelength ``lam`` (nm)."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise DomainError("wavelength must be > 0")
    phase = 2.0 * math.pi * (cfg.path_difference * 1000.0) / lam + cfg.phase_offset
    p_d2 = 0.5 * (1.0 + np.cos(phase))
    p_d2 = float(p_d2) if p_d2.ndim == 0 else p_d2
    return p_d2, 1.0 - p_d2


def _as_batch(events):
    if isinstance(events, PhotonPairEvent):
        # a lone event has no pump reference; conservation is not re-checked
        return PairBatch.from_events([events], pump_wavelength=math.nan), True
    return events.copy(), False


def _detect_times(rng, emission, detected, jitter):
    times = np.full(len(emission), np.nan)
    times[detected] = emission[detected]
    if jitter > 0:
        times[detected] += rng.normal(0.0, jitter, int(detected.sum()))
    return times


def route_signal(cfg: MichelsonConfig, det: DetectorConfig, events, rng: np.random.Generator,
                 *, det_d3: DetectorConfig | None = None):
    """Send signal photons through the interferometer to D2 or D3.

    ``det`` describes D2 and, unless ``det_d3`` is given, D3 as well.
    Accepts a :class:`PairBatch` or a single :class:`PhotonPairEvent` and
    returns the same kind.
    """
    batch, single = _as_batch(events)
    det_d3 = det if det_d3 is None else det_d3
    n = len(batch)
    p_d2, _ = michelson_probabilities(cfg, batch.signal_wavelength)
    to_d2 = rng.random(n) < p_d2
    eff = np.where(to_d2, det.efficiency, det_d3.efficiency)
    if det.efficiency < 1.0 or det_d3.efficiency < 1.0:
        detected = rng.random(n) < eff
    else:
        detected = np.ones(n, dtype=bool)
    outcome = np.where(to_d2, Outcome.D2, Outcome.D3).astype(np.int8)
    outcome[~detected] = Outcome.LOST
    batch.signal_outcome = outcome

    times = np.full(n, np.nan)
    for port, d in ((Outcome.D2, det), (Outcome.D3, det_d3)):
        mask = outcome == port
        times[mask] = _detect_times(rng, batch.emission_time, mask, d.jitter)[mask]
    batch.signal_detect_time = times
    return batch[0] if single else batch


def route_idler(filt: FilterSpec | None, det: DetectorConfig, events, rng: np.random.Generator):
    """Pass idler photons through the optional remote filter onto D1."""
    batch, single = _as_batch(events)
    n = len(batch)
    p_pass = transmission(filt, batch.idler_wavelength) * det.efficiency
    if filt is None and det.efficiency >= 1.0:
        detected = np.ones(n, dtype=bool)
    else:
        detected = rng.random(n) < p_pass
    outcome = np.where(detected, Outcome.D1, Outcome.LOST).astype(np.int8)
    batch.idler_outcome = outcome
    batch.idler_detect_time = _detect_times(rng, batch.emission_time, detected, det.jitter)
    return batch[0] if single else batch


def dark_counts(det: DetectorConfig, duration: float, rng: np.random.Generator) -> np.ndarray:
    """Sorted dark-count times over ``[0, duration)``."""
    if det.dark_rate == 0 or duration <= 0:
        return np.empty(0)
    n = rng.poisson(det.dark_rate * duration)
    return np.sort(rng.uniform(0.0, duration, n))
