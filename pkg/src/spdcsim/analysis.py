"""Joint-distribution scans, correlation statistics and waist sweeps.

A scan steps both detectors along one Fourier-plane axis and collects the
coincidence rate on the Cartesian product of positions. The resulting grid,
normalized to unit total, is treated as a probability mass function on the
momentum nodes; its second moments give the Pearson coefficient and the
principal-axis orientation used throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernel import MODE_GAUSSIAN_APPROX, SPECTRAL_MONOCHROMATIC, TransverseWavevector
from .trace import (
    DetectionAssignment,
    OpticalSystem,
    build_quadratic_form,
    integrate_gaussian,
    integrate_gaussian_antidiagonal,
    integrate_quadrature,
    pinhole_smooth,
    spatial_biphoton,
)

AXES = ("x", "y")

# softest-direction variance is capped at this multiple of the stiffest one
# when sizing windows for ridge-like distributions (e.g. zero walk-off)
_VARIANCE_RATIO_CAP = 25.0

_WINDOW_SIGMAS = 3.0
_PRESCAN_POINTS = 16


class DegenerateDistributionError(ValueError):
    """Joint distribution carries no usable two-dimensional support."""


class BracketError(ValueError):
    """Root bracket endpoints do not straddle a sign change."""


@dataclass(frozen=True)
class ScanPlan:
    """One-axis-by-one-axis scan layout in the two Fourier planes.

    Ranges are detector positions in meters; the coordinate orthogonal to
    the scanned axis stays fixed at ``orthogonal`` for the whole scan.
    """

    axis: str
    assignment: DetectionAssignment
    range_a: tuple[float, float]
    range_b: tuple[float, float]
    points: int
    orthogonal: float = 0.0

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"axis must be 'x' or 'y', got {self.axis!r}")
        if self.points < 8:
            raise ValueError(f"points must be >= 8, got {self.points}")
        for label, rng in (("range_a", self.range_a), ("range_b", self.range_b)):
            if not rng[0] < rng[1]:
                raise ValueError(f"{label} must satisfy min < max, got {rng}")


@dataclass(frozen=True)
class JointDistribution:
    """Coincidence-rate grid over detector A (rows) and detector B (columns)."""

    axis: str
    assignment: DetectionAssignment
    positions_a: np.ndarray  # m
    positions_b: np.ndarray  # m
    momenta_a: np.ndarray  # rad/m
    momenta_b: np.ndarray  # rad/m
    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (len(self.positions_a), len(self.positions_b)):
            raise ValueError("values shape does not match the scan axes")
        if not np.all(np.isfinite(v)):
            raise ValueError("distribution contains non-finite entries")
        if np.any(v < 0.0):
            raise ValueError("distribution contains negative entries")
        if not np.any(v > 0.0):
            raise ValueError("distribution has no positive entries")


@dataclass(frozen=True)
class CorrelationSummary:
    """Second-moment reduction of a joint distribution in momentum space."""

    pearson: float
    covariance: np.ndarray  # 2x2, rad^2/m^2
    principal_angle: float  # rad, in (-pi/2, pi/2]
    peak: tuple[float, float]  # rad/m


@dataclass(frozen=True)
class AssignmentComparison:
    """Summaries of the same scan axis under both polarizer settings."""

    pearson_ea: float
    pearson_oa: float
    angle_ea: float
    angle_oa: float

    @property
    def angle_difference(self) -> float:
        """Smallest angle between the two principal axes (orientations)."""
        diff = abs(self.angle_ea - self.angle_oa)
        return min(diff, math.pi - diff)


def _momentum_pair(plan: ScanPlan, system: OpticalSystem, grid_a, grid_b):
    """Detector momenta as TransverseWavevectors for the plan's axis."""
    lam_a = system.fourier.wavelength_at("A", plan.assignment)
    lam_b = system.fourier.wavelength_at("B", plan.assignment)
    ortho_a = system.fourier.position_to_momentum(plan.orthogonal, lam_a)
    ortho_b = system.fourier.position_to_momentum(plan.orthogonal, lam_b)
    if plan.axis == "y":
        q_A = TransverseWavevector(qx=ortho_a, qy=grid_a)
        q_B = TransverseWavevector(qx=ortho_b, qy=grid_b)
    else:
        q_A = TransverseWavevector(qx=grid_a, qy=ortho_a)
        q_B = TransverseWavevector(qx=grid_b, qy=ortho_b)
    return q_A, q_B


def run_scan(
    plan: ScanPlan,
    system: OpticalSystem,
    *,
    pinhole_diameter: float = 0.0,
    normalize: bool = True,
    method: str | None = None,
) -> JointDistribution:
    """Evaluate the coincidence rate over the plan's Cartesian position grid."""
    positions_a = np.linspace(plan.range_a[0], plan.range_a[1], plan.points)
    positions_b = np.linspace(plan.range_b[0], plan.range_b[1], plan.points)
    lam_a = system.fourier.wavelength_at("A", plan.assignment)
    lam_b = system.fourier.wavelength_at("B", plan.assignment)
    momenta_a = system.fourier.position_to_momentum(positions_a, lam_a)
    momenta_b = system.fourier.position_to_momentum(positions_b, lam_b)

    resolved_method = method
    if resolved_method is None:
        resolved_method = (
            "closed_form" if system.mode == MODE_GAUSSIAN_APPROX else "quadrature"
        )
    grid_a, grid_b = np.meshgrid(momenta_a, momenta_b, indexing="ij")
    q_A, q_B = _momentum_pair(plan, system, grid_a, grid_b)
    q_A.check_paraxial(lam_a)
    q_B.check_paraxial(lam_b)
    if resolved_method == "closed_form":
        amplitude = spatial_biphoton(q_A, q_B, system, plan.assignment, method="closed_form")
        values = np.abs(amplitude) ** 2
    else:
        values = np.empty((plan.points, plan.points))
        for i, qa in enumerate(momenta_a):
            for j, qb in enumerate(momenta_b):
                q_A, q_B = _momentum_pair(plan, system, float(qa), float(qb))
                amplitude = integrate_quadrature(q_A, q_B, system, plan.assignment)
                values[i, j] = abs(amplitude) ** 2

    if pinhole_diameter:
        steps = (positions_a[1] - positions_a[0], positions_b[1] - positions_b[0])
        values = pinhole_smooth(values, steps, pinhole_diameter)
    if normalize:
        peak = values.max()
        if peak <= 0.0:
            raise DegenerateDistributionError("scan produced an all-zero grid")
        values = values / peak
    return JointDistribution(
        axis=plan.axis,
        assignment=plan.assignment,
        positions_a=positions_a,
        positions_b=positions_b,
        momenta_a=np.asarray(momenta_a),
        momenta_b=np.asarray(momenta_b),
        values=values,
        normalized=normalize,
    )


def summarize(dist: JointDistribution) -> CorrelationSummary:
    """Pearson coefficient, covariance and principal axis of a distribution.

    The normalized grid is read as a probability mass function on the
    momentum nodes (no interpolation); the principal angle is the
    orientation of the covariance eigenvector with the larger eigenvalue,
    reported in (-pi/2, pi/2].
    """
    weights = np.asarray(dist.values, dtype=float)
    total = weights.sum()
    if total <= 0.0:
        raise DegenerateDistributionError("distribution has zero total weight")
    weights = weights / total
    qa = np.asarray(dist.momenta_a)[:, np.newaxis]
    qb = np.asarray(dist.momenta_b)[np.newaxis, :]
    mean_a = float((weights * qa).sum())
    mean_b = float((weights * qb).sum())
    var_a = float((weights * (qa - mean_a) ** 2).sum())
    var_b = float((weights * (qb - mean_b) ** 2).sum())
    cov_ab = float((weights * (qa - mean_a) * (qb - mean_b)).sum())
    if var_a <= 0.0 or var_b <= 0.0:
        raise DegenerateDistributionError(
            "zero variance along a scan axis; correlation is undefined"
        )
    pearson = cov_ab / math.sqrt(var_a * var_b)
    # orientation of the major covariance eigenvector; atan2 keeps it in (-pi/2, pi/2]
    angle = 0.5 * math.atan2(2.0 * cov_ab, var_a - var_b)
    i_peak, j_peak = np.unravel_index(np.argmax(dist.values), dist.values.shape)
    return CorrelationSummary(
        pearson=pearson,
        covariance=np.array([[var_a, cov_ab], [cov_ab, var_b]]),
        principal_angle=angle,
        peak=(float(dist.momenta_a[i_peak]), float(dist.momenta_b[j_peak])),
    )


def _model_log_intensity(system, axis, assignment, q_a, q_b) -> float:
    """log |amplitude|^2 of the Gaussian-model trace at scalar scan momenta."""
    if axis == "y":
        q_A = TransverseWavevector(qx=0.0, qy=q_a)
        q_B = TransverseWavevector(qx=0.0, qy=q_b)
    else:
        q_A = TransverseWavevector(qx=q_a, qy=0.0)
        q_B = TransverseWavevector(qx=q_b, qy=0.0)
    form = build_quadratic_form(
        q_A, q_B, assignment, system.geometry, system.pump,
        system.filter_e, system.filter_o,
    )
    if system.pump.spectral_mode == SPECTRAL_MONOCHROMATIC:
        amplitude = integrate_gaussian_antidiagonal(form)
    else:
        amplitude = integrate_gaussian(form)
    return 2.0 * math.log(abs(complex(amplitude)))


def _gaussian_model_covariance(system, axis, assignment) -> np.ndarray:
    """Momentum covariance of the scan predicted by the Gaussian model.

    The traced log-intensity is exactly quadratic in the scan momenta for
    the Gaussian-approximated mode, so six samples recover its Hessian; the
    same estimate sizes windows for the exact-sinc mode. Directions the
    model leaves unconstrained (pure ridges) are capped at a fixed variance
    ratio to the constrained one.
    """
    h = 1.0e4  # rad/m; any value works on an exact quadratic, this one conditions well
    e00 = _model_log_intensity(system, axis, assignment, 0.0, 0.0)
    ep0 = _model_log_intensity(system, axis, assignment, h, 0.0)
    em0 = _model_log_intensity(system, axis, assignment, -h, 0.0)
    e0p = _model_log_intensity(system, axis, assignment, 0.0, h)
    e0m = _model_log_intensity(system, axis, assignment, 0.0, -h)
    epp = _model_log_intensity(system, axis, assignment, h, h)
    precision = np.array(
        [
            [-(ep0 + em0 - 2.0 * e00), -(epp - ep0 - e0p + e00)],
            [-(epp - ep0 - e0p + e00), -(e0p + e0m - 2.0 * e00)],
        ]
    ) / h**2
    eigenvalues, vectors = np.linalg.eigh(precision)
    stiffest = eigenvalues.max()
    if stiffest <= 0.0:
        raise DegenerateDistributionError(
            "scan model predicts an unbounded distribution in every direction"
        )
    eigenvalues = np.maximum(eigenvalues, stiffest / _VARIANCE_RATIO_CAP)
    return vectors @ np.diag(1.0 / eigenvalues) @ vectors.T


def auto_plan(
    axis: str,
    assignment: DetectionAssignment,
    system: OpticalSystem,
    points: int,
    *,
    orthogonal: float = 0.0,
    prescan_points: int = _PRESCAN_POINTS,
) -> ScanPlan:
    """Scan window of +-3 marginal widths around the peak of a coarse pre-scan.

    A 16x16 pre-scan over the Gaussian-model prediction locates the
    distribution peak and measures its marginal widths; the returned plan
    spans peak +- 3 widths per detector.
    """
    model_cov = _gaussian_model_covariance(system, axis, assignment)
    lam_a = system.fourier.wavelength_at("A", assignment)
    lam_b = system.fourier.wavelength_at("B", assignment)
    half_a = _WINDOW_SIGMAS * math.sqrt(model_cov[0, 0])
    half_b = _WINDOW_SIGMAS * math.sqrt(model_cov[1, 1])
    prescan = ScanPlan(
        axis=axis,
        assignment=assignment,
        range_a=(
            system.fourier.momentum_to_position(-half_a, lam_a),
            system.fourier.momentum_to_position(half_a, lam_a),
        ),
        range_b=(
            system.fourier.momentum_to_position(-half_b, lam_b),
            system.fourier.momentum_to_position(half_b, lam_b),
        ),
        points=prescan_points,
        orthogonal=orthogonal,
    )
    coarse = run_scan(prescan, system, normalize=False)
    summary = summarize(coarse)
    width_a = _WINDOW_SIGMAS * math.sqrt(summary.covariance[0, 0])
    width_b = _WINDOW_SIGMAS * math.sqrt(summary.covariance[1, 1])
    center_a, center_b = summary.peak
    return ScanPlan(
        axis=axis,
        assignment=assignment,
        range_a=(
            system.fourier.momentum_to_position(center_a - width_a, lam_a),
            system.fourier.momentum_to_position(center_a + width_a, lam_a),
        ),
        range_b=(
            system.fourier.momentum_to_position(center_b - width_b, lam_b),
            system.fourier.momentum_to_position(center_b + width_b, lam_b),
        ),
        points=points,
        orthogonal=orthogonal,
    )


def assignment_sensitivity(
    axis: str,
    system: OpticalSystem,
    points: int = 64,
    *,
    pinhole_diameter: float = 0.0,
    method: str | None = None,
) -> AssignmentComparison:
    """Run both polarizer assignments on one axis and compare summaries."""
    summaries = {}
    for assignment in DetectionAssignment:
        plan = auto_plan(axis, assignment, system, points)
        dist = run_scan(
            plan, system, pinhole_diameter=pinhole_diameter, method=method
        )
        summaries[assignment] = summarize(dist)
    ea = summaries[DetectionAssignment.E_AT_A]
    oa = summaries[DetectionAssignment.O_AT_A]
    return AssignmentComparison(
        pearson_ea=ea.pearson,
        pearson_oa=oa.pearson,
        angle_ea=ea.principal_angle,
        angle_oa=oa.principal_angle,
    )


def waist_sweep(
    axis: str,
    waists,
    system: OpticalSystem,
    *,
    plan: ScanPlan | None = None,
    points: int = 64,
    pinhole_diameter: float = 0.0,
    method: str | None = None,
) -> list[tuple[float, float]]:
    """Pearson coefficient per isotropic pump waist, on one fixed scan plan."""
    waists = [float(w) for w in waists]
    if any(w <= 0.0 for w in waists):
        raise ValueError("all waists must be positive")
    if plan is None:
        plan = auto_plan(axis, DetectionAssignment.E_AT_A, system, points)
    results = []
    for waist in waists:
        swept = system.with_isotropic_waist(waist)
        dist = run_scan(plan, swept, pinhole_diameter=pinhole_diameter, method=method)
        results.append((waist, summarize(dist).pearson))
    return results


def find_sign_transition(
    axis: str,
    waist_lo: float,
    waist_hi: float,
    tol: float,
    system: OpticalSystem,
    *,
    plan: ScanPlan | None = None,
    points: int = 64,
    pinhole_diameter: float = 0.0,
    method: str | None = None,
) -> float:
    """Bisect the isotropic pump waist where the scan's Pearson sign flips.

    Endpoints must straddle a sign change; bisection proceeds until the
    bracket is narrower than ``tol`` (m) and returns its midpoint.
    """
    if not (0.0 < waist_lo < waist_hi):
        raise ValueError("need 0 < waist_lo < waist_hi")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if plan is None:
        plan = auto_plan(axis, DetectionAssignment.E_AT_A, system, points)

    def pearson_at(waist: float) -> float:
        swept = system.with_isotropic_waist(waist)
        dist = run_scan(plan, swept, pinhole_diameter=pinhole_diameter, method=method)
        return summarize(dist).pearson

    p_lo = pearson_at(waist_lo)
    p_hi = pearson_at(waist_hi)
    if p_lo == 0.0:
        return waist_lo
    if p_hi == 0.0:
        return waist_hi
    if (p_lo > 0.0) == (p_hi > 0.0):
        raise BracketError(
            f"pearson has the same sign at both endpoints "
            f"({p_lo:+.4f} at {waist_lo:g} m, {p_hi:+.4f} at {waist_hi:g} m)"
        )
    lo, hi = waist_lo, waist_hi
    while (hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        p_mid = pearson_at(mid)
        if p_mid == 0.0:
            return mid
        if (p_mid > 0.0) == (p_lo > 0.0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
