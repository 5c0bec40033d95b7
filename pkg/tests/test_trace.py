import math
from dataclasses import replace

import numpy as np
import pytest

import spdcsim.trace as trace_module
from spdcsim.dispersion import C_LIGHT
from spdcsim.kernel import (
    MODE_GAUSSIAN_APPROX,
    PumpEnvelope,
    SpdcGeometry,
    TransverseWavevector,
    mode_function,
)
from spdcsim.trace import (
    ComplexQuadraticForm,
    DetectionAssignment,
    DivergingIntegralError,
    FourierPlaneMap,
    OpticalSystem,
    QuadratureAccuracyWarning,
    SpectralFilter,
    build_quadratic_form,
    coincidence_rate,
    integrate_gaussian,
    integrate_gaussian_antidiagonal,
    integrate_quadrature,
    pinhole_smooth,
    spatial_biphoton,
)

EA = DetectionAssignment.E_AT_A
OA = DetectionAssignment.O_AT_A


def qvec(qx=0.0, qy=0.0):
    return TransverseWavevector(qx=qx, qy=qy)


@pytest.fixture(scope="module")
def gaussian_pump_system(system):
    pump = replace(
        system.pump, spectral_mode="gaussian", spectral_sigma=2.4e12
    )
    return replace(system, pump=pump)


# ---------------------------------------------------------------- filters

def test_filter_sigma_follows_stated_conversion():
    filt = SpectralFilter.from_fwhm_nm(814.0, 5.0)
    delta_omega = 2.0 * math.pi * C_LIGHT * 5e-9 / (814e-9) ** 2
    sigma = delta_omega / (2.0 * math.sqrt(2.0 * math.log(2.0)))
    assert filt.sigma == pytest.approx(sigma, rel=1e-12)


def test_filter_roundtrip_is_exact():
    filt = SpectralFilter.from_fwhm_nm(814.0, 5.0)
    assert filt.fwhm_nm == pytest.approx(5.0, rel=1e-12)


def test_filter_validation():
    with pytest.raises(ValueError):
        SpectralFilter(center_wavelength=814e-9, sigma=0.0)


def test_assignment_parse():
    assert DetectionAssignment.parse("ea") is EA
    assert DetectionAssignment.parse("OA") is OA
    with pytest.raises(ValueError, match="assignment"):
        DetectionAssignment.parse("both")


# ---------------------------------------------------------------- Fourier map

def test_fourier_map_matches_direct_arithmetic():
    fmap = FourierPlaneMap(focal_length=0.75, wavelength_e=814e-9, wavelength_o=814e-9)
    expected = 2.0 * math.pi * 1e-3 / (814e-9 * 0.75)
    assert fmap.position_to_momentum(1e-3, 814e-9) == pytest.approx(expected, rel=1e-15)
    assert fmap.momentum_to_position(expected, 814e-9) == pytest.approx(1e-3, rel=1e-15)


def test_fourier_map_origin_maps_to_zero():
    fmap = FourierPlaneMap(focal_length=0.75, wavelength_e=814e-9, wavelength_o=814e-9)
    for assignment in (EA, OA):
        for detector in ("A", "B"):
            lam = fmap.wavelength_at(detector, assignment)
            assert fmap.position_to_momentum(0.0, lam) == 0.0


def test_fourier_map_routes_wavelengths_by_assignment():
    fmap = FourierPlaneMap(focal_length=0.75, wavelength_e=810e-9, wavelength_o=818e-9)
    assert fmap.wavelength_at("A", EA) == 810e-9
    assert fmap.wavelength_at("B", EA) == 818e-9
    assert fmap.wavelength_at("A", OA) == 818e-9
    assert fmap.wavelength_at("B", OA) == 810e-9


# ---------------------------------------------------------------- quadratic form

def test_form_reproduces_integrand_pointwise(system):
    rng = np.random.default_rng(21)
    for assignment in (EA, OA):
        q_A = qvec(*rng.uniform(-3e4, 3e4, 2))
        q_B = qvec(*rng.uniform(-3e4, 3e4, 2))
        form = build_quadratic_form(
            q_A, q_B, assignment, system.geometry, system.pump,
            system.filter_e, system.filter_o,
        )
        q_e, q_o = (q_A, q_B) if assignment is EA else (q_B, q_A)
        for _ in range(25):
            oe, oo = rng.uniform(-1.5e13, 1.5e13, 2)
            direct = (
                system.filter_e.amplitude(oe)
                * system.filter_o.amplitude(oo)
                * mode_function(
                    q_e, oe, q_o, oo, system.geometry, system.pump,
                    MODE_GAUSSIAN_APPROX,
                )
            )
            value = form.evaluate(oe, oo)
            assert abs(value - direct) <= 1e-12 * abs(direct)


def test_form_reproduces_integrand_with_gaussian_pump(gaussian_pump_system):
    system = gaussian_pump_system
    rng = np.random.default_rng(22)
    q_A = qvec(qy=1.2e4)
    q_B = qvec(qy=-0.7e4)
    form = build_quadratic_form(
        q_A, q_B, EA, system.geometry, system.pump, system.filter_e, system.filter_o
    )
    for _ in range(25):
        oe, oo = rng.uniform(-1.0e13, 1.0e13, 2)
        direct = (
            system.filter_e.amplitude(oe)
            * system.filter_o.amplitude(oo)
            * mode_function(
                q_A, oe, q_B, oo, system.geometry, system.pump, MODE_GAUSSIAN_APPROX
            )
        )
        assert abs(form.evaluate(oe, oo) - direct) <= 1e-12 * abs(direct)


def test_form_real_linear_term_vanishes_at_zero_momenta(system):
    # at q = 0 the surviving linear term is the purely imaginary phase
    # contribution, so only its real part can be required to vanish
    form = build_quadratic_form(
        qvec(), qvec(), EA, system.geometry, system.pump,
        system.filter_e, system.filter_o,
    )
    assert np.allclose(np.real(form.linear), 0.0, atol=1e-30)
    assert np.all(np.imag(form.linear) != 0.0)


def test_form_real_part_positive_definite_at_defaults(system):
    form = build_quadratic_form(
        qvec(qy=1e4), qvec(qy=1e4), EA, system.geometry, system.pump,
        system.filter_e, system.filter_o,
    )
    eigenvalues = np.linalg.eigvalsh(np.real(form.matrix))
    assert np.all(eigenvalues > 0.0)
    re_m = np.real(form.matrix)
    assert re_m[0, 0] > 0.0 and np.linalg.det(re_m) > 0.0


def test_form_batched_momenta_share_one_matrix(system):
    qy = np.linspace(-2e4, 2e4, 7)
    form = build_quadratic_form(
        qvec(qy=qy), qvec(qy=0.5 * qy), EA, system.geometry, system.pump,
        system.filter_e, system.filter_o,
    )
    assert form.matrix.shape == (2, 2)
    assert form.linear.shape == (7, 2)
    assert form.constant.shape == (7,)


# ---------------------------------------------------------------- closed forms

def test_separable_integral_value():
    a = 3.7e-26
    form = ComplexQuadraticForm(
        matrix=np.diag([2.0 * a, 2.0 * a]).astype(complex),
        linear=np.zeros(2, dtype=complex),
        constant=np.array(0.0, dtype=complex),
    )
    assert integrate_gaussian(form) == pytest.approx(math.pi / a, rel=1e-12)


def test_integral_scaling_law():
    rng = np.random.default_rng(23)
    base = np.array([[4.0, 1.0], [1.0, 3.0]], dtype=complex) * 1e-26
    form = ComplexQuadraticForm(
        matrix=base, linear=np.zeros(2, dtype=complex), constant=np.array(0.0, dtype=complex)
    )
    for scale in rng.uniform(0.5, 4.0, 5):
        scaled = ComplexQuadraticForm(
            matrix=scale * base,
            linear=np.zeros(2, dtype=complex),
            constant=np.array(0.0, dtype=complex),
        )
        assert integrate_gaussian(scaled) == pytest.approx(
            integrate_gaussian(form) / scale, rel=1e-12
        )


def test_non_positive_definite_form_raises():
    form = ComplexQuadraticForm(
        matrix=np.diag([-1.0, 1.0]).astype(complex),
        linear=np.zeros(2, dtype=complex),
        constant=np.array(0.0, dtype=complex),
    )
    with pytest.raises(DivergingIntegralError):
        integrate_gaussian(form)
    with pytest.raises(DivergingIntegralError):
        integrate_gaussian_antidiagonal(
            ComplexQuadraticForm(
                matrix=np.array([[1.0, 2.0], [2.0, 1.0]], dtype=complex),
                linear=np.zeros(2, dtype=complex),
                constant=np.array(0.0, dtype=complex),
            )
        )


def test_closed_form_matches_quadrature_on_sample_grid(system):
    offsets = np.linspace(-2e4, 2e4, 5)
    for qa in offsets:
        for qb in offsets:
            q_A, q_B = qvec(qy=float(qa)), qvec(qy=float(qb))
            closed = spatial_biphoton(q_A, q_B, system, EA, method="closed_form")
            quad = integrate_quadrature(q_A, q_B, system, EA, check_convergence=False)
            assert abs(closed - quad) <= 1e-6 * abs(closed)


def test_closed_form_matches_quadrature_with_gaussian_pump(gaussian_pump_system):
    system = gaussian_pump_system
    for qa, qb in ((0.0, 0.0), (1.5e4, 1.1e4), (-2e4, 0.6e4)):
        q_A, q_B = qvec(qy=qa), qvec(qy=qb)
        closed = spatial_biphoton(q_A, q_B, system, EA, method="closed_form")
        quad = integrate_quadrature(q_A, q_B, system, EA, check_convergence=False)
        assert abs(closed - quad) <= 1e-6 * abs(closed)


def test_tiny_filter_bandwidth_recovers_central_mode_values(system):
    narrow = SpectralFilter(center_wavelength=814e-9, sigma=5e8)
    pinched = replace(system, filter_e=narrow, filter_o=narrow)
    q_ref = qvec(qy=0.4e4)
    ref_amp = spatial_biphoton(q_ref, q_ref, pinched, EA)
    ref_mode = mode_function(
        q_ref, 0.0, q_ref, 0.0, system.geometry, system.pump, MODE_GAUSSIAN_APPROX
    )
    for q in (0.8e4, 1.5e4, -1.1e4):
        q_t = qvec(qy=q)
        amp_ratio = spatial_biphoton(q_t, q_t, pinched, EA) / ref_amp
        mode_ratio = (
            mode_function(
                q_t, 0.0, q_t, 0.0, system.geometry, system.pump, MODE_GAUSSIAN_APPROX
            )
            / ref_mode
        )
        assert amp_ratio == pytest.approx(mode_ratio, rel=1e-6)


def test_quadrature_is_silent_at_defaults(system, recwarn):
    integrate_quadrature(qvec(qy=1e4), qvec(qy=0.8e4), system, EA)
    assert not [w for w in recwarn.list if issubclass(w.category, QuadratureAccuracyWarning)]


def test_quadrature_warns_when_underresolved(system, monkeypatch):
    monkeypatch.setattr(trace_module, "_node_count", lambda *args: 5)
    with pytest.warns(QuadratureAccuracyWarning):
        integrate_quadrature(qvec(qy=1e4), qvec(qy=0.8e4), system, EA)


def test_exact_sinc_routes_through_quadrature(system):
    sinc_system = replace(system, mode="exact_sinc")
    with pytest.raises(ValueError, match="closed-form"):
        spatial_biphoton(qvec(), qvec(), sinc_system, EA, method="closed_form")
    value = spatial_biphoton(qvec(), qvec(), sinc_system, EA)
    assert np.isfinite(value)


# ---------------------------------------------------------------- rates

def test_coincidence_rate_nonnegative_and_origin_peak(system):
    rate0 = coincidence_rate((0.0, 0.0), (0.0, 0.0), system, EA)
    assert rate0 > 0.0
    rng = np.random.default_rng(24)
    for _ in range(10):
        x_a = rng.uniform(-3e-3, 3e-3, 2)
        x_b = rng.uniform(-3e-3, 3e-3, 2)
        assert coincidence_rate(x_a, x_b, system, EA) >= 0.0


def test_rate_invariant_under_consistent_unit_rescaling(system):
    # express every length in km instead of m; the rate is dimensionless
    scale = 1e-3
    geom = system.geometry
    geom_scaled = SpdcGeometry(
        emission_angle_e=geom.emission_angle_e,
        emission_angle_o=geom.emission_angle_o,
        walkoff_pump=geom.walkoff_pump,
        walkoff_e=geom.walkoff_e,
        group_slowness_pump=geom.group_slowness_pump / scale,
        group_slowness_e=geom.group_slowness_e / scale,
        group_slowness_o=geom.group_slowness_o / scale,
        crystal_length=geom.crystal_length * scale,
    )
    pump_scaled = PumpEnvelope(
        waist_x=system.pump.waist_x * scale,
        waist_y=system.pump.waist_y * scale,
        spectral_mode=system.pump.spectral_mode,
        spectral_sigma=system.pump.spectral_sigma,
    )
    fourier_scaled = FourierPlaneMap(
        focal_length=system.fourier.focal_length * scale,
        wavelength_e=system.fourier.wavelength_e * scale,
        wavelength_o=system.fourier.wavelength_o * scale,
    )
    scaled = OpticalSystem(
        geometry=geom_scaled,
        pump=pump_scaled,
        filter_e=SpectralFilter(
            center_wavelength=system.filter_e.center_wavelength * scale,
            sigma=system.filter_e.sigma,
        ),
        filter_o=SpectralFilter(
            center_wavelength=system.filter_o.center_wavelength * scale,
            sigma=system.filter_o.sigma,
        ),
        fourier=fourier_scaled,
        mode=system.mode,
    )
    for x_a, x_b in (((0.0, 1e-3), (0.0, 0.8e-3)), ((0.5e-3, -0.2e-3), (0.0, 0.0))):
        si = coincidence_rate(x_a, x_b, system, EA)
        km = coincidence_rate(
            tuple(v * scale for v in x_a), tuple(v * scale for v in x_b), scaled, EA
        )
        assert km == pytest.approx(si, rel=1e-12)


# ---------------------------------------------------------------- pinhole

def test_pinhole_zero_diameter_is_identity():
    rng = np.random.default_rng(25)
    grid = rng.uniform(0.0, 1.0, (16, 16))
    out = pinhole_smooth(grid, (1e-4, 1e-4), 0.0)
    assert np.array_equal(out, grid)


def test_pinhole_preserves_total_and_peak_bound():
    rng = np.random.default_rng(26)
    for _ in range(10):
        grid = rng.uniform(0.0, 1.0, (32, 32))
        out = pinhole_smooth(grid, (1e-4, 1e-4), 7.5e-4)
        assert out.sum() == pytest.approx(grid.sum(), rel=1e-9)
        assert out.max() <= grid.max() * (1.0 + 1e-12)


def test_pinhole_larger_than_window_rejected():
    grid = np.ones((16, 16))
    with pytest.raises(ValueError, match="exceeds the scan span"):
        pinhole_smooth(grid, (1e-4, 1e-4), 1.0)
