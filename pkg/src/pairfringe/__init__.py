"""Monte Carlo of photon-pair interference behind a remote frequency filter.

Pairs from a down-conversion source are split: the signal photon crosses an
unbalanced Michelson interferometer, the idler crosses an optional narrow
filter.  Coincidences between the two sides show fringes whose visibility is
set by the spectrum of the post-selected subensemble, while the signal-side
singles stay flat whatever the filter does.
"""
from .analysis import (FringeScan, NoSignalingReport, VisibilityResult, complex_coherence,
                       expected_visibility, extract_visibility, fit_fringe, no_signaling_test, visibility_analytic, visibility_paper)
from .coincidence import CoincidenceConfig, CountRecord, count
from .config import RunConfig
from .interferometer import (DetectorConfig, MichelsonConfig, michelson_probabilities,
                             route_idler, route_signal)
from .pair_source import (Outcome, PairBatch, PhotonPairEvent, SourceConfig,
                          conditional_spectrum, generate_pairs, idler_wavelength)
from .spectral import F1, F2, FilterSpec, Shape, Spectrum, coherence_length, filter_preset
from .subpackets import Envelope, SubpacketSet, barrier_demo, decompose, envelope_from_spectrum

__version__ = "0.1.0"

__all__ = [
    "CoincidenceConfig", "CountRecord", "DetectorConfig", "Envelope", "F1", "F2", "FilterSpec",
    "FringeScan", "MichelsonConfig", "NoSignalingReport", "Outcome", "PairBatch",
    "PhotonPairEvent", "RunConfig", "Shape", "SourceConfig", "Spectrum", "SubpacketSet",
    "VisibilityResult", "barrier_demo", "coherence_length", "complex_coherence", "conditional_spectrum", "count",
    "decompose", "envelope_from_spectrum", "expected_visibility", "extract_visibility", "filter_preset", "fit_fringe",
    "generate_pairs", "idler_wavelength", "michelson_probabilities", "no_signaling_test",
    "route_idler", "route_signal", "visibility_analytic", "visibility_paper",
]
