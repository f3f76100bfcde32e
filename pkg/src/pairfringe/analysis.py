"""Fringe scans, visibility estimates and the no-signaling test."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special, stats
from scipy.integrate import IntegrationWarning, quad
from scipy.optimize import curve_fit

from .coincidence import CountRecord
from .errors import AnalysisError, DomainError, QuadratureError
from .spectral import C_NM_PER_PS, Shape

SCAN_KINDS = ("coarse_delta", "fine_phase")
SINC2_CORE_LOBES = 64  # sinc2 lobes integrated numerically on each side
CHANNELS = ("coincidences", "coincidences_D1D3", "singles_D1", "singles_D2", "singles_D3")


def visibility_paper(delta: float, width: float) -> float:
    """Triangular overlap visibility ``1 - delta/width``, zero once ``delta >= width``.

    ``delta`` is the optical path difference and ``width`` the wavepacket
    width, both in um.
    """
    if not width > 0:
        raise DomainError(f"wavepacket width must be > 0, got {width!r}")
    if not delta >= 0:
        raise DomainError(f"path difference must be >= 0, got {delta!r}")
    return max(0.0, 1.0 - delta / width)


def _oscillatory(g, a, b, omega, kind, tol):
    """``int_a^b g(x) w(omega x) dx`` for ``w`` in {cos, sin, None}, ``a`` finite."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", IntegrationWarning)
        if kind is None:
            val, err = quad(g, a, b, limit=2000, epsabs=tol, epsrel=1e-10)
        elif math.isinf(b):
            val, err = quad(g, a, b, weight=kind, wvar=omega, limlst=200, limit=2000,
                            epsabs=tol)
        else:
            val, err = quad(g, a, b, weight=kind, wvar=omega, limit=2000, epsabs=tol,
                            epsrel=1e-10)
    messages = [str(w.message).splitlines()[0] for w in caught]
    return val, err, messages


def _inverse_square_moments(a: float, x0: float) -> tuple[float, float]:
    """``int_x0^inf cos(a x) / x^2 dx`` and the sine analogue, for ``a >= 0``."""
    if a == 0.0:
        return 1.0 / x0, 0.0
    si, ci = special.sici(a * x0)
    c = math.cos(a * x0) / x0 - a * (0.5 * math.pi - si)
    s = math.sin(a * x0) / x0 - a * ci
    return c, s


def _sinc2_tail(x0: float, w: float) -> tuple[float, float, float]:
    """``int_x0^inf sinc^2(x) (1, cos wx, sin wx) dx`` in closed form.

    Uses ``sinc^2(x) = (1 - cos 2 pi x) / (2 pi^2 x^2)``.
    """
    out = [0.0, 0.0, 0.0]
    for coef, a in ((1.0, 0.0), (-0.5, 2 * math.pi), (-0.5, -2 * math.pi)):
        out[0] += coef * _inverse_square_moments(abs(a), x0)[0]
    for coef, a in ((1.0, w), (-0.5, w + 2 * math.pi), (-0.5, w - 2 * math.pi)):
        c, s = _inverse_square_moments(abs(a), x0)
        out[1] += coef * c
        out[2] += coef * (s if a >= 0 else -s)
    scale = 1.0 / (2.0 * math.pi**2)
    return out[0] * scale, out[1] * scale, out[2] * scale


def _fourier_moments(spectrum, omega, tol_scale=1e-11):
    lo, hi = spectrum.support_nu()
    ref = float(spectrum.center_nu)
    if not (lo <= ref <= hi):
        ref = 0.5 * (lo + hi) if math.isfinite(lo + hi) else ref
    f = spectrum.density_nu
    right = lambda x: f(ref + x)  # noqa: E731
    left = lambda x: f(ref - x)  # noqa: E731
    b_r, b_l = hi - ref, ref - lo

    # sinc2 tails decay like 1/x^2 and defeat extrapolated Fourier quadrature
    # near commensurate delays; integrate a finite core and add exact tails
    tail = None
    n_pieces = 1
    if getattr(spectrum, "shape", None) is Shape.SINC2 and math.isinf(lo) and math.isinf(hi):
        dnu = spectrum.nu_width
        b_r = b_l = SINC2_CORE_LOBES * dnu
        n_pieces = SINC2_CORE_LOBES
        n_t, c_t, _ = _sinc2_tail(SINC2_CORE_LOBES, omega * dnu)
        w = spectrum.weight
        # both sides carry the same tail; the sine parts cancel by symmetry
        tail = {None: 2 * w * n_t, "cos": 2 * w * c_t, "sin": 0.0}

    diagnostics = {"support_nu": (lo, hi), "center_nu": ref, "omega": omega, "pieces": []}
    parts = {}
    peak = max(float(f(ref)), 1e-300)
    for kind in (None, "cos", "sin"):
        total = 0.0
        error = 0.0
        for side, g, b in (("right", right, b_r), ("left", left, b_l)):
            if not b > 0:
                continue
            tol = tol_scale * peak * (min(b, 1e3) if math.isfinite(b) else 1.0) / n_pieces
            edges = np.linspace(0.0, b, n_pieces + 1) if n_pieces > 1 else (0.0, b)
            for a_k, b_k in zip(edges[:-1], edges[1:]):
                val, err, msgs = _oscillatory(g, a_k, b_k, omega, kind, tol)
                diagnostics["pieces"].append((kind, side, val, err, msgs))
                # int_{-inf}^0 g(x) sin(wx) dx = -int_0^inf g(-x) sin(wx) dx
                total += -val if (kind == "sin" and side == "left") else val
                error += err
        if tail is not None:
            total += tail[kind]
        parts[kind] = (total, error)
    return parts, diagnostics


def complex_coherence(spectrum, delta: float) -> complex:
    """Normalised Fourier transform of ``spectrum`` at delay ``delta/c``.

    ``spectrum`` is any object with ``density_nu``, ``support_nu`` and
    ``center_nu`` (a :class:`~pairfringe.spectral.Spectrum` or a conditional
    spectrum); ``delta`` is an optical path difference in um.  The D2 port then
    fires with probability ``(1 + Re g) / 2``.
    """
    if not delta >= 0:
        raise DomainError(f"path difference must be >= 0, got {delta!r}")
    tau = delta * 1000.0 / C_NM_PER_PS  # ps
    omega = 2.0 * math.pi * tau
    if omega == 0.0:
        parts, diag = _fourier_moments(spectrum, 1.0)
        if not parts[None][0] > 0:
            raise QuadratureError("spectrum has no weight", diag)
        return 1.0 + 0.0j
    parts, diag = _fourier_moments(spectrum, omega)
    norm, norm_err = parts[None]
    re, re_err = parts["cos"]
    im, im_err = parts["sin"]
    if not norm > 0:
        raise QuadratureError("spectrum has no weight", diag)
    budget = 1e-7 * norm
    if norm_err > budget or re_err > budget or im_err > budget:
        diag.update(norm=norm, errors=(norm_err, re_err, im_err))
        raise QuadratureError("Fourier quadrature did not converge", diag)
    # moments were taken about the reference frequency
    return complex(re, im) / norm * complex(math.cos(omega * diag["center_nu"]),
                                             math.sin(omega * diag["center_nu"]))


def visibility_analytic(spectrum, delta: float) -> float:
    """Fringe visibility ``|g(delta)|`` of ``spectrum`` at path difference ``delta`` (um)."""
    return float(min(1.0, abs(complex_coherence(spectrum, delta))))


@dataclass
class FringeScan:
    """Count records along a scan.

    ``coarse_delta`` scans step the path difference (abscissa in um).
    ``fine_phase`` scans step the optical path around ``base_delta`` by
    ``phase * reference_wavelength / 2 pi`` (abscissa in radians).
    """

    abscissa: np.ndarray
    records: list
    scan_kind: str = "fine_phase"
    reference_wavelength: float = 702.0
    base_delta: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.abscissa = np.asarray(self.abscissa, dtype=float)
        if self.scan_kind not in SCAN_KINDS:
            raise ValueError(f"scan_kind must be one of {SCAN_KINDS}")
        if len(self.abscissa) == 0 or len(self.abscissa) != len(self.records):
            raise ValueError("scan needs one record per abscissa and at least one point")
        if np.any(np.diff(self.abscissa) <= 0):
            raise ValueError("abscissae must be strictly increasing")

    @property
    def points(self):
        return list(zip(self.abscissa.tolist(), self.records))

    def counts(self, channel: str) -> np.ndarray:
        if channel not in CHANNELS:
            raise ValueError(f"unknown channel {channel!r}")
        return np.array([getattr(r, channel) for r in self.records], dtype=float)

    def durations(self) -> np.ndarray:
        return np.array([r.duration for r in self.records], dtype=float)


@dataclass(frozen=True)
class VisibilityResult:
    visibility: float
    max_rate: float
    min_rate: float
    period_estimate: float
    standard_error: float
    phase: float = 0.0


def _wls(design, y, sigma):
    w = 1.0 / sigma
    a = design * w[:, None]
    beta, *_ = np.linalg.lstsq(a, y * w, rcond=None)
    cov = np.linalg.inv(a.T @ a)
    return beta, cov


def _visibility_from(beta, cov):
    c0, c1, c2 = beta[:3]
    amp = math.hypot(c1, c2)
    v = amp / c0
    if amp > 0:
        grad = np.array([-v / c0, c1 / (c0 * amp), c2 / (c0 * amp)])
        se = math.sqrt(max(float(grad @ cov[:3, :3] @ grad), 0.0))
    else:
        se = math.sqrt(max(0.5 * (cov[1, 1] + cov[2, 2]), 0.0)) / c0
    return v, se, math.atan2(c2, c1)


def fit_fringe(phase, counts, durations, reference_wavelength: float = 702.0,
               significance: float = 5.0) -> VisibilityResult:
    """Least-squares fit of ``rate = A (1 + V cos(k phase - phi0))``.

    Rates carry Poisson errors.  The wavenumber ``k`` is fitted only when the
    fringe is significant at ``significance`` standard errors; otherwise it
    is held at 1 and the period is reported as NaN.
    """
    phase = np.asarray(phase, dtype=float)
    counts = np.asarray(counts, dtype=float)
    durations = np.asarray(durations, dtype=float)
    if np.any(durations <= 0):
        raise DomainError("scan points need positive durations")
    y = counts / durations
    sigma = np.sqrt(np.maximum(counts, 1.0)) / durations
    design = np.column_stack([np.ones_like(phase), np.cos(phase), np.sin(phase)])
    beta, cov = _wls(design, y, sigma)
    if not beta[0] > 0:
        raise AnalysisError("fringe fit has non-positive mean rate")
    v, se, phi0 = _visibility_from(beta, cov)
    period = math.nan

    if v > 0 and (se == 0 or v / se >= significance):
        def model(x, c0, c1, c2, k):
            return c0 + c1 * np.cos(k * x) + c2 * np.sin(k * x)

        try:
            popt, pcov = curve_fit(model, phase, y, p0=[*beta, 1.0], sigma=sigma,
                                   absolute_sigma=True, bounds=([-np.inf] * 3 + [0.5],
                                                                [np.inf] * 3 + [2.0]))
        except (RuntimeError, ValueError) as exc:
            raise AnalysisError(f"fringe fit failed: {exc}") from exc
        if not np.all(np.isfinite(pcov)):
            raise AnalysisError("fringe fit covariance is degenerate")
        if not popt[0] > 0:
            raise AnalysisError("fringe fit has non-positive mean rate")
        beta, cov = popt, pcov
        v, se, phi0 = _visibility_from(beta, cov)
        period = reference_wavelength / popt[3]

    v = min(v, 1.0)
    c0 = float(beta[0])
    return VisibilityResult(
        visibility=float(v),
        max_rate=c0 * (1.0 + v),
        min_rate=c0 * (1.0 - v),
        period_estimate=float(period),
        standard_error=float(se),
        phase=float(phi0),
    )


def extract_visibility(scan: FringeScan, channel: str = "coincidences",
                       significance: float = 5.0) -> VisibilityResult:
    """Fringe visibility of one count channel of a fine-phase scan."""
    if scan.scan_kind != "fine_phase":
        raise AnalysisError("visibility needs a fine_phase scan")
    x = scan.abscissa
    span = x[-1] - x[0]
    periods = span / (2.0 * math.pi)
    if periods < 2.0 - 1e-9:
        raise AnalysisError(f"scan covers {periods:.3g} fringe periods, need at least 2")
    if (len(x) - 1) / periods < 16.0 - 1e-9:
        raise AnalysisError("scan needs at least 16 points per fringe period")
    return fit_fringe(x, scan.counts(channel), scan.durations(),
                      scan.reference_wavelength, significance)


def scan_path_differences(scan: FringeScan) -> np.ndarray:
    """Optical path difference (um) at each point of ``scan``."""
    if scan.scan_kind == "fine_phase":
        return scan.base_delta + scan.abscissa * scan.reference_wavelength / (2.0 * math.pi) / 1000.0
    return scan.abscissa.copy()


def expected_visibility(spectrum, scan: FringeScan, mean_counts: float = 1.0e6,
                        phase_offset: float = 0.0, significance: float = 5.0) -> VisibilityResult:
    """What :func:`extract_visibility` returns on a noiseless version of ``scan``.

    Each point gets ``mean_counts * (1 + Re[g e^{i phase_offset}])``
    counts, with ``g`` from :func:`complex_coherence`.  Over a fine scan the
    modulus of ``g`` can drift when the spectrum has sharp features, so this
    can differ from the point value at ``base_delta``.  Pass the observed
    mean count so the fit makes the same significance decisions.
    """
    if scan.scan_kind != "fine_phase":
        raise AnalysisError("visibility needs a fine_phase scan")
    rot = complex(math.cos(phase_offset), math.sin(phase_offset))
    g = np.array([complex_coherence(spectrum, d) * rot for d in scan_path_differences(scan)])
    durations = scan.durations()
    counts = mean_counts * (1.0 + g.real) * durations / durations.mean()
    return fit_fringe(scan.abscissa, counts, durations, scan.reference_wavelength, significance)


@dataclass(frozen=True)
class NoSignalingReport:
    statistic: float
    p_value: float
    alpha: float
    method: str

    @property
    def passed(self) -> bool:
        return self.p_value > self.alpha


def no_signaling_test(record_with_filter: CountRecord, record_without: CountRecord,
                      alpha: float = 0.01) -> NoSignalingReport:
    """Test whether D2 singles depend on the remote filter.

    With known emitted pair counts this is a two-proportion z-test on
    ``singles_D2 / pairs``; otherwise a pooled Poisson rate comparison.
    """
    r1, r2 = record_with_filter, record_without
    if not (r1.duration > 0 and r2.duration > 0):
        raise DomainError("records need positive durations")
    x1, x2 = r1.singles_D2, r2.singles_D2
    if r1.pairs_emitted and r2.pairs_emitted:
        n1, n2 = r1.pairs_emitted, r2.pairs_emitted
        pooled = (x1 + x2) / (n1 + n2)
        denom = math.sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2))
        diff = x1 / n1 - x2 / n2
        method = "two-proportion z"
    else:
        t1, t2 = r1.duration, r2.duration
        pooled = (x1 + x2) / (t1 + t2)
        denom = math.sqrt(pooled * (1.0 / t1 + 1.0 / t2))
        diff = x1 / t1 - x2 / t2
        method = "poisson rate z"
    if denom == 0:
        z = 0.0 if diff == 0 else math.copysign(math.inf, diff)
    else:
        z = diff / denom
    p = float(2.0 * stats.norm.sf(abs(z)))
    return NoSignalingReport(statistic=float(z), p_value=min(p, 1.0), alpha=alpha, method=method)


def summarize_calibration(reports: Sequence[NoSignalingReport]) -> tuple[int, int]:
    """(passed, total) over repeated no-signaling tests."""
    return sum(r.passed for r in reports), len(reports)
