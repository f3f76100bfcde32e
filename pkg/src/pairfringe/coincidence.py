"""The AND unit: singles counters plus windowed D1 x D2 coincidences.

Detections are matched one-to-one, greedily in time order.  A D1 click and a
D2 click coincide when their delayed times differ by at most half the
(full-width) window.  D1 x D3 coincidences go to an auxiliary counter.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numba
import numpy as np

from .errors import ContractViolation, DomainError
from .pair_source import Outcome, PairBatch


@dataclass(frozen=True)
class CoincidenceConfig:
    window: float = 1.0e-9
    delay_D1: float = 0.0
    delay_D2: float = 0.0

    def __post_init__(self):
        if not self.window > 0:
            raise DomainError("coincidence window must be > 0")


@dataclass(frozen=True)
class CountRecord:
    singles_D1: int
    singles_D2: int
    singles_D3: int
    coincidences: int
    duration: float
    coincidences_D1D3: int = 0
    pairs_emitted: int | None = None
    config: Mapping = field(default_factory=dict)

    def __post_init__(self):
        counts = (self.singles_D1, self.singles_D2, self.singles_D3,
                  self.coincidences, self.coincidences_D1D3)
        if min(counts) < 0:
            raise ValueError("counts must be >= 0")
        if self.coincidences > min(self.singles_D1, self.singles_D2):
            raise ValueError("coincidences exceed a singles count")
        if self.coincidences_D1D3 > min(self.singles_D1, self.singles_D3):
            raise ValueError("D1xD3 coincidences exceed a singles count")


@numba.njit(cache=True)
def _greedy_matches(a, b, half_window):  # pragma: no cover - compiled
    i = 0
    j = 0
    n = 0
    while i < a.size and j < b.size:
        d = a[i] - b[j]
        if abs(d) <= half_window:
            n += 1
            i += 1
            j += 1
        elif d < 0:
            i += 1
        else:
            j += 1
    return n


def greedy_matches(a: np.ndarray, b: np.ndarray, half_window: float) -> int:
    """Number of one-to-one earliest-first matches between sorted ``a`` and ``b``."""
    return int(_greedy_matches(np.ascontiguousarray(a, dtype=np.float64),
                               np.ascontiguousarray(b, dtype=np.float64),
                               float(half_window)))


def _channel(times: np.ndarray, extra) -> np.ndarray:
    if extra is not None and len(extra):
        times = np.concatenate([times, np.asarray(extra, dtype=float)])
    if times.size > 1 and np.any(np.diff(times) < 0):
        times = np.sort(times)
    return times


def count(events: PairBatch, cfg: CoincidenceConfig, *, darks: Mapping | None = None,
          snapshot: Mapping | None = None) -> CountRecord:
    """Fold a routed, emission-ordered pair stream into a :class:`CountRecord`.

    ``darks`` optionally maps ``Outcome.D1/D2/D3`` to extra detection times.
    """
    t = events.emission_time
    if len(t) > 1 and np.any(np.diff(t) < 0):
        raise ContractViolation("events must be ordered by emission_time")
    darks = darks or {}

    sig, idl = events.signal_outcome, events.idler_outcome
    t1 = _channel(events.idler_detect_time[idl == Outcome.D1], darks.get(Outcome.D1)) + cfg.delay_D1
    t2 = _channel(events.signal_detect_time[sig == Outcome.D2], darks.get(Outcome.D2)) + cfg.delay_D2
    t3 = _channel(events.signal_detect_time[sig == Outcome.D3], darks.get(Outcome.D3)) + cfg.delay_D2

    half = 0.5 * cfg.window
    return CountRecord(
        singles_D1=int(t1.size),
        singles_D2=int(t2.size),
        singles_D3=int(t3.size),
        coincidences=greedy_matches(t1, t2, half),
        coincidences_D1D3=greedy_matches(t1, t3, half),
        duration=float(events.duration),
        pairs_emitted=len(events),
        config=dict(snapshot or {}),
    )
