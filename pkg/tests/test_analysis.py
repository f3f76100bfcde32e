import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from pairfringe import analysis
from pairfringe.analysis import (FringeScan, complex_coherence, expected_visibility,
                                 extract_visibility, fit_fringe, no_signaling_test,
                                 summarize_calibration, visibility_analytic, visibility_paper)
from pairfringe.coincidence import CountRecord
from pairfringe.config import RunConfig
from pairfringe.errors import AnalysisError, DomainError, QuadratureError
from pairfringe.experiment import biased_record, run_scan
from pairfringe.pair_source import SourceConfig, conditional_spectrum
from pairfringe.spectral import Shape, Spectrum, filter_preset

LAM = 702.0


def width_spectrum(shape, w_um):
    """Spectrum at 702 nm whose coherence length is ``w_um``."""
    return Spectrum(LAM, LAM**2 / (w_um * 1000.0), shape)


# values frozen from tests/oracles.py (dense trapezoid Fourier sums)
CONDITIONAL_220 = {
    ("none", "rect"): 0.014098327345,
    ("f1", "rect"): 0.774576204365,
    ("f1", "gaussian"): 0.591732810640,
    ("f1", "sinc2"): 0.620364198879,
    ("f2", "rect"): 0.070862090812,
    ("f2", "gaussian"): 0.000376615838,
    ("f2", "sinc2"): 0.001670301859,
}


def test_paper_formula_values():
    assert round(visibility_paper(220, 570), 3) == 0.614
    assert visibility_paper(0, 570) == 1.0
    assert visibility_paper(220, 50) == 0.0
    assert visibility_paper(570, 570) == 0.0


@pytest.mark.parametrize("delta,width", [(1, 0), (1, -2), (-1, 5)])
def test_paper_formula_domain(delta, width):
    with pytest.raises(DomainError):
        visibility_paper(delta, width)


def test_sinc2_matches_triangle_exactly():
    s = width_spectrum("sinc2", 570.0)
    assert visibility_analytic(s, 220) == pytest.approx(1 - 220 / 570, abs=1e-6)
    assert visibility_analytic(s, 220) == pytest.approx(0.614, abs=5e-4)


@pytest.mark.parametrize("delta", [0.0, 50.0, 300.0, 569.0, 700.0])
def test_sinc2_triangle_grid(delta):
    s = width_spectrum("sinc2", 570.0)
    assert visibility_analytic(s, delta) == pytest.approx(oracles.triangle(delta, 570.0), abs=1e-6)


def test_rect_spectrum_matches_closed_form_sinc():
    s = width_spectrum("rect", 570.0)
    v = visibility_analytic(s, 220)
    assert v == pytest.approx(0.77, abs=0.005)
    # rect in wavelength is rect in frequency up to the narrowband Jacobian
    assert v == pytest.approx(oracles.rect_closed_form(220, 570), abs=2e-4)
    f, (lo, hi) = oracles.shape_density_nu("rect", LAM, s.bandwidth)
    assert v == pytest.approx(oracles.coherence_brute(f, lo, hi, 220), abs=1e-9)


def test_gaussian_against_brute_force():
    s = width_spectrum("gaussian", 570.0)
    f, (lo, hi) = oracles.shape_density_nu("gaussian", LAM, s.bandwidth)
    assert visibility_analytic(s, 220) == pytest.approx(oracles.coherence_brute(f, lo, hi, 220),
                                                        abs=1e-9)


@pytest.mark.parametrize("shape", list(Shape))
def test_zero_delay_gives_one(shape):
    assert visibility_analytic(Spectrum(LAM, 3.0, shape), 0.0) == 1.0
    cs = conditional_spectrum(SourceConfig(), filter_preset("f1", shape))
    assert visibility_analytic(cs, 0.0) == 1.0


@pytest.mark.parametrize("shape", list(Shape))
def test_non_increasing_over_one_width(shape):
    s = width_spectrum(shape, 200.0)
    grid = np.linspace(0.0, 200.0, 41)
    v = [visibility_analytic(s, d) for d in grid]
    assert np.all(np.diff(v) <= 1e-9)


@pytest.mark.parametrize("shape", ["rect", "gaussian"])
def test_formula_discrepancy_for_other_shapes(shape):
    s = width_spectrum(shape, 570.0)
    assert abs(visibility_analytic(s, 220) - visibility_paper(220, 570)) > 1e-2


@pytest.mark.parametrize("key,expected", CONDITIONAL_220.items())
def test_conditional_spectra_against_oracle(key, expected):
    choice, shape = key
    cs = conditional_spectrum(SourceConfig(), filter_preset(choice, shape))
    assert visibility_analytic(cs, 220.0) == pytest.approx(expected, abs=1e-9)


def test_coherence_phase_convention():
    # the D2 fraction of a monochromatic-like narrow line follows the Michelson law
    s = Spectrum(LAM, 1e-4, "gaussian")
    g = complex_coherence(s, 0.3)
    assert g.real == pytest.approx(math.cos(2 * math.pi * 300 / LAM), abs=1e-6)


def test_quadrature_failure_reports_diagnostics(monkeypatch):
    monkeypatch.setattr(analysis, "_oscillatory",
                        lambda g, a, b, omega, kind, tol: (1.0, 1.0, ["forced"]))
    with pytest.raises(QuadratureError) as info:
        visibility_analytic(Spectrum(LAM, 1.0), 10.0)
    assert "errors" in info.value.diagnostics


def test_negative_delta_rejected():
    with pytest.raises(DomainError):
        visibility_analytic(Spectrum(LAM, 1.0), -1.0)


def _record(n):
    return CountRecord(0, int(n), 0, 0, 1.0)


def _synthetic_scan(v, npts=33, periods=2.0, mean=1e6, phase0=0.3):
    x = np.linspace(0, 2 * math.pi * periods, npts)
    counts = mean * (1 + v * np.cos(x - phase0))
    return FringeScan(x, [CountRecord(0, 0, 0, 0, 1.0)] * npts), counts


def test_noiseless_roundtrip():
    scan, counts = _synthetic_scan(0.5)
    r = fit_fringe(scan.abscissa, counts, np.ones_like(counts))
    assert r.visibility == pytest.approx(0.5, abs=1e-6)
    assert r.period_estimate == pytest.approx(LAM, rel=1e-6)
    assert r.phase == pytest.approx(0.3, abs=1e-6)
    assert r.visibility == pytest.approx((r.max_rate - r.min_rate) / (r.max_rate + r.min_rate))


def test_extract_from_scan_records():
    x = np.linspace(0, 4 * math.pi, 33)
    recs = [CountRecord(10**6, 500_000, 500_000, int(2e5 * (1 + 0.25 * math.cos(v))), 2.0)
            for v in x]
    r = extract_visibility(FringeScan(x, recs))
    assert r.visibility == pytest.approx(0.25, abs=1e-5)
    assert r.max_rate == pytest.approx(1e5 * 1.25, rel=1e-4)


def test_constant_scan_has_zero_visibility():
    x = np.linspace(0, 4 * math.pi, 33)
    recs = [CountRecord(1000, 1000, 0, 1000, 1.0)] * 33
    r = extract_visibility(FringeScan(x, recs))
    assert r.visibility == pytest.approx(0.0, abs=1e-12)
    assert math.isnan(r.period_estimate)


def test_scan_requirements():
    recs = [CountRecord(1, 1, 0, 1, 1.0)] * 33
    with pytest.raises(AnalysisError):
        extract_visibility(FringeScan(np.linspace(0, 3 * math.pi, 33), recs))
    with pytest.raises(AnalysisError):
        extract_visibility(FringeScan(np.linspace(0, 4 * math.pi, 20), recs[:20]))
    with pytest.raises(AnalysisError):
        extract_visibility(FringeScan(np.linspace(0, 4 * math.pi, 33), recs, "coarse_delta"))
    with pytest.raises(ValueError):
        FringeScan([0.0, 0.0], recs[:2])
    with pytest.raises(ValueError):
        FringeScan([], [])


@given(st.floats(0.0, 0.95), st.floats(-3, 3))
def test_fit_recovers_injected_visibility(v, phase0):
    x = np.linspace(0, 4 * math.pi, 49)
    counts = 1e6 * (1 + v * np.cos(x - phase0))
    r = fit_fringe(x, counts, np.ones_like(x))
    assert r.visibility == pytest.approx(v, abs=1e-6)


def test_fit_period_from_stretched_fringe():
    x = np.linspace(0, 4 * math.pi, 65)
    counts = 1e6 * (1 + 0.6 * np.cos(1.01 * x))
    r = fit_fringe(x, counts, np.ones_like(x))
    assert r.period_estimate == pytest.approx(LAM / 1.01, rel=1e-6)


def test_mc_scan_matches_scan_oracle():
    cfg = RunConfig(pairs=200_000, seed=4, filter="f1", filter_shape="sinc2")
    scan = run_scan(cfg)
    res = extract_visibility(scan)
    cs = conditional_spectrum(cfg.source(), cfg.filter_spec())
    oracle = expected_visibility(cs, scan, scan.counts("coincidences").mean())
    assert abs(res.visibility - oracle.visibility) <= 3 * res.standard_error
    assert res.visibility == pytest.approx(0.614, abs=0.02)


def test_expected_visibility_tracks_point_value_for_narrow_lines():
    cfg = RunConfig(pairs=10, filter="f1", filter_shape="sinc2")
    x = np.linspace(0, 4 * math.pi, 33)
    scan = FringeScan(x, [CountRecord(0, 0, 0, 0, 1.0)] * 33, base_delta=220.0)
    cs = conditional_spectrum(cfg.source(), cfg.filter_spec())
    assert expected_visibility(cs, scan).visibility == pytest.approx(
        visibility_analytic(cs, 220.0), abs=2e-3)


def test_identical_records_p_one():
    r = CountRecord(0, 500_000, 500_000, 0, 10.0, pairs_emitted=10**6)
    rep = no_signaling_test(r, r)
    assert rep.p_value == 1.0 and rep.statistic == 0.0 and rep.passed


def test_halved_d2_is_detected():
    r = CountRecord(0, 500_000, 500_000, 0, 10.0, pairs_emitted=10**6)
    rep = no_signaling_test(biased_record(r), r)
    assert rep.p_value < 1e-6 and not rep.passed
    # two-proportion z by hand
    p1, p2, n = 0.25, 0.5, 10**6
    pooled = (p1 + p2) / 2
    z = (p1 - p2) / math.sqrt(pooled * (1 - pooled) * 2 / n)
    assert rep.statistic == pytest.approx(z, rel=1e-12)


def test_poisson_rate_branch():
    a = CountRecord(0, 1000, 0, 0, 1.0)
    b = CountRecord(0, 1000, 0, 0, 2.0)
    rep = no_signaling_test(a, b)
    assert rep.method == "poisson rate z" and rep.p_value < 1e-6


def test_zero_duration_rejected():
    r = CountRecord(0, 0, 0, 0, 0.0)
    with pytest.raises(DomainError):
        no_signaling_test(r, r)


def test_null_calibration_by_binomial_draws():
    rng = np.random.default_rng(12)
    n = 10**6
    reports = []
    for _ in range(400):
        a, b = rng.binomial(n, 0.5, size=2)
        reports.append(no_signaling_test(CountRecord(0, int(a), 0, 0, 10.0, pairs_emitted=n),
                                         CountRecord(0, int(b), 0, 0, 10.0, pairs_emitted=n)))
    passed, total = summarize_calibration(reports)
    assert total == 400 and passed >= 0.97 * total
