"""Spectral densities, filter passbands, coherence lengths and wavelength sampling.

Units: wavelengths in nm, optical frequencies in THz, path lengths in um.
With these units ``C_NM_PER_PS`` converts both ways (``nu = C / lam``).

Shape conventions
-----------------
``rect``
    Uniform in wavelength over ``center +/- bandwidth/2`` (full width).
``gaussian``
    Gaussian in wavelength, ``bandwidth`` is the FWHM.
``sinc2``
    ``sinc^2`` in optical frequency, ``S(nu) ~ sinc^2((nu - nu0) / dnu)`` with
    ``dnu = c * bandwidth / center^2``.  ``dnu`` is the equivalent width
    (area over peak) and puts the first zero of ``|g1|`` at the delay
    ``W / c`` with ``W = center^2 / bandwidth``.  The density is defined
    on the whole frequency axis; its normalisation holds there.  Wavelength
    views and samplers only see the positive-frequency part.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats
from scipy.optimize import brentq

from .errors import DomainError

C_NM_PER_PS = 299_792.458  # nm/ps, equivalently nm*THz

_FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))
_GAUSS_SUPPORT_SIGMAS = 12.0


class Shape(str, enum.Enum):
    RECT = "rect"
    GAUSSIAN = "gaussian"
    SINC2 = "sinc2"

    @classmethod
    def parse(cls, value: "Shape | str") -> "Shape":
        if isinstance(value, Shape):
            return value
        key = str(value).strip().lower()
        aliases = {"rectangular": "rect", "gauss": "gaussian", "sinc^2": "sinc2"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown spectral shape {value!r}") from None


def coherence_length(center: float, bandwidth: float) -> float:
    """Coherence length (wavepacket width) ``center**2 / bandwidth`` in um.

    Both arguments are wavelengths in nm.
    """
    if not (center > 0 and bandwidth > 0):
        raise DomainError(f"center and bandwidth must be > 0, got {center!r}, {bandwidth!r}")
    return center * center / bandwidth / 1000.0


def _sinc2_cdf_x(x):
    """CDF of the unit ``sinc^2`` density ``(sin(pi x) / (pi x))**2``."""
    x = np.asarray(x, dtype=float)
    si, _ = special.sici(2.0 * np.pi * x)
    px = np.pi * x
    with np.errstate(invalid="ignore", divide="ignore"):
        tail = np.where(x == 0.0, 0.0, np.sin(px) ** 2 / np.where(x == 0.0, 1.0, px))
    out = 0.5 + (si - tail) / np.pi
    out = np.where(np.isneginf(x), 0.0, out)
    out = np.where(np.isposinf(x), 1.0, out)
    return np.clip(out, 0.0, 1.0)


@dataclass(frozen=True)
class Spectrum:
    """Spectral density of a photon ensemble.

    ``center`` and ``bandwidth`` are wavelengths in nm (see the module
    docstring for the per-shape bandwidth convention); ``weight`` is the
    total integrated intensity.
    """

    center: float
    bandwidth: float
    shape: Shape = Shape.RECT
    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "shape", Shape.parse(self.shape))
        if not self.center > 0:
            raise DomainError(f"center must be > 0, got {self.center!r}")
        if not self.bandwidth > 0:
            raise DomainError(f"bandwidth must be > 0, got {self.bandwidth!r}")
        if not 0.0 <= self.weight <= 1.0:
            raise DomainError(f"weight must lie in [0, 1], got {self.weight!r}")

    @property
    def center_nu(self) -> float:
        return C_NM_PER_PS / self.center

    @property
    def nu_width(self) -> float:
        """Frequency width in THz matching ``bandwidth`` at the center."""
        return C_NM_PER_PS * self.bandwidth / (self.center * self.center)

    @property
    def sigma(self) -> float:
        return self.bandwidth / _FWHM_PER_SIGMA

    @property
    def coherence_length(self) -> float:
        return coherence_length(self.center, self.bandwidth)

    def support(self) -> tuple[float, float]:
        """Wavelength interval (nm) outside which the density is negligible."""
        if self.shape is Shape.RECT:
            return self.center - 0.5 * self.bandwidth, self.center + 0.5 * self.bandwidth
        if self.shape is Shape.GAUSSIAN:
            half = _GAUSS_SUPPORT_SIGMAS * self.sigma
            return max(self.center - half, 0.0), self.center + half
        return 0.0, math.inf

    def support_nu(self) -> tuple[float, float]:
        """Frequency interval (THz) carrying the density."""
        if self.shape is Shape.SINC2:
            return -math.inf, math.inf
        lo, hi = self.support()
        return C_NM_PER_PS / hi, (C_NM_PER_PS / lo if lo > 0 else math.inf)

    def density(self, lam):
        """Spectral density per nm at wavelength(s) ``lam``."""
        lam = np.asarray(lam, dtype=float)
        if self.shape is Shape.RECT:
            lo, hi = self.support()
            inside = (lam >= lo) & (lam <= hi)
            return np.where(inside, self.weight / self.bandwidth, 0.0)
        if self.shape is Shape.GAUSSIAN:
            return self.weight * stats.norm.pdf(lam, loc=self.center, scale=self.sigma)
        with np.errstate(divide="ignore"):
            nu = C_NM_PER_PS / lam
        return np.where(lam > 0, self.density_nu(nu) * C_NM_PER_PS / lam**2, 0.0)

    def density_nu(self, nu):
        """Spectral density per THz at optical frequency(ies) ``nu``."""
        nu = np.asarray(nu, dtype=float)
        if self.shape is Shape.SINC2:
            dnu = self.nu_width
            return self.weight / dnu * np.sinc((nu - self.center_nu) / dnu) ** 2
        positive = nu > 0
        safe = np.where(positive, nu, 1.0)
        lam = C_NM_PER_PS / safe
        return np.where(positive, self.density(lam) * C_NM_PER_PS / safe**2, 0.0)

    def _sinc2_x(self, nu):
        return (np.asarray(nu, dtype=float) - self.center_nu) / self.nu_width

    def cdf(self, lam):
        """Probability that a sampled wavelength is <= ``lam``."""
        lam = np.asarray(lam, dtype=float)
        if self.shape is Shape.RECT:
            lo, _ = self.support()
            return np.clip((lam - lo) / self.bandwidth, 0.0, 1.0)
        if self.shape is Shape.GAUSSIAN:
            return stats.norm.cdf(lam, loc=self.center, scale=self.sigma)
        # sinc2: conditional on positive frequency; lam <= L  <=>  nu >= c / L
        f0 = _sinc2_cdf_x(self._sinc2_x(0.0))
        with np.errstate(divide="ignore"):
            nu = np.where(lam > 0, C_NM_PER_PS / np.where(lam > 0, lam, 1.0), np.inf)
        upper = 1.0 - _sinc2_cdf_x(self._sinc2_x(nu))
        return np.where(lam > 0, np.clip(upper / (1.0 - f0), 0.0, 1.0), 0.0)

    def ppf(self, q: float) -> float:
        """Inverse of :meth:`cdf` for a scalar probability ``q``."""
        if not 0.0 <= q <= 1.0:
            raise DomainError(f"quantile must lie in [0, 1], got {q!r}")
        if self.shape is Shape.RECT:
            lo, _ = self.support()
            return lo + q * self.bandwidth
        if self.shape is Shape.GAUSSIAN:
            return float(stats.norm.ppf(q, loc=self.center, scale=self.sigma))
        if q == 0.0:
            return 0.0
        if q == 1.0:
            return math.inf
        f0 = float(_sinc2_cdf_x(self._sinc2_x(0.0)))
        target = 1.0 - q * (1.0 - f0)
        x0 = float(self._sinc2_x(0.0))
        x = brentq(lambda x: float(_sinc2_cdf_x(x)) - target, x0, 1e9, xtol=1e-13, rtol=1e-15)
        return C_NM_PER_PS / (self.center_nu + x * self.nu_width)


@dataclass(frozen=True)
class FilterSpec:
    """Spectral filter in front of a detector.

    Shapes follow :class:`Spectrum`; the transmission equals
    ``peak_transmission`` at ``center``.
    """

    center: float
    bandwidth: float
    shape: Shape = Shape.RECT
    peak_transmission: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "shape", Shape.parse(self.shape))
        if not (self.center > 0 and self.bandwidth > 0):
            raise DomainError("filter center and bandwidth must be > 0")
        if not 0.0 < self.peak_transmission <= 1.0:
            raise DomainError(
                f"peak_transmission must lie in (0, 1], got {self.peak_transmission!r}"
            )

    @property
    def coherence_length(self) -> float:
        return coherence_length(self.center, self.bandwidth)

    def support(self) -> tuple[float, float]:
        return Spectrum(self.center, self.bandwidth, self.shape).support()

    def transmission(self, lam):
        lam = np.asarray(lam, dtype=float)
        peak = self.peak_transmission
        if self.shape is Shape.RECT:
            half = 0.5 * self.bandwidth
            return np.where(np.abs(lam - self.center) <= half, peak, 0.0)
        if self.shape is Shape.GAUSSIAN:
            return peak * np.exp(-4.0 * math.log(2.0) * ((lam - self.center) / self.bandwidth) ** 2)
        dnu = C_NM_PER_PS * self.bandwidth / self.center**2
        positive = lam > 0
        nu = C_NM_PER_PS / np.where(positive, lam, 1.0)
        t = peak * np.sinc((nu - C_NM_PER_PS / self.center) / dnu) ** 2
        return np.where(positive, t, 0.0)


F1 = FilterSpec(702.0, 0.86)
F2 = FilterSpec(702.0, 10.0)


def filter_preset(name: str, shape: Shape | str = Shape.RECT) -> FilterSpec | None:
    """Built-in remote filters: ``f1`` (702/0.86 nm), ``f2`` (702/10 nm) or ``none``."""
    key = name.strip().lower()
    if key == "none":
        return None
    presets = {"f1": F1, "f2": F2}
    if key not in presets:
        raise ValueError(f"unknown filter preset {name!r}")
    base = presets[key]
    return FilterSpec(base.center, base.bandwidth, Shape.parse(shape), base.peak_transmission)


def density(spectrum: Spectrum, lam):
    return spectrum.density(lam)


def transmission(filt: FilterSpec | None, lam):
    if filt is None:
        return np.ones_like(np.asarray(lam, dtype=float))
    return filt.transmission(lam)


def _fill(draw, n: int, rng: np.random.Generator, oversample: float) -> np.ndarray:
    """Collect ``n`` accepted values from a batch rejection sampler."""
    out = np.empty(n)
    filled = 0
    while filled < n:
        need = n - filled
        batch = draw(rng, max(16, int(need * oversample) + 16))
        take = min(need, batch.size)
        out[filled:filled + take] = batch[:take]
        filled += take
    return out


def sample_wavelength(spectrum: Spectrum, rng: np.random.Generator, size=None, nu_max=None):
    """Draw wavelengths (nm) from ``spectrum``.

    ``nu_max`` (THz) optionally truncates the draw to lower frequencies,
    which the pair source uses to keep the idler energy positive.
    """
    n = 1 if size is None else int(size)
    shape = spectrum.shape
    limit = math.inf if nu_max is None else float(nu_max)

    if shape is Shape.SINC2:
        nu0, dnu = spectrum.center_nu, spectrum.nu_width

        def draw(r, m):
            # Cauchy envelope: sinc^2(x) <= 2 / (1 + pi^2 x^2)
            x = r.standard_cauchy(m) / np.pi
            u = r.random(m)
            keep = u * 2.0 < np.sinc(x) ** 2 * (1.0 + (np.pi * x) ** 2)
            nu = nu0 + x[keep] * dnu
            nu = nu[(nu > 0) & (nu < limit)]
            return C_NM_PER_PS / nu
    else:
        lo, hi = spectrum.support()

        def draw(r, m):
            if shape is Shape.RECT:
                lam = r.uniform(lo, hi, m)
            else:
                lam = r.normal(spectrum.center, spectrum.sigma, m)
            ok = lam > 0
            if nu_max is not None:
                ok &= lam > C_NM_PER_PS / limit
            return lam[ok]

    oversample = 2.2 if shape is Shape.SINC2 else 1.0
    samples = _fill(draw, n, rng, oversample)
    return float(samples[0]) if size is None else samples
