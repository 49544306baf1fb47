"""Two-particle dilation model: momentum conserving, pointer Q_A (Yanase condition fails).

The coupling maps ``phi(x) phi_p(y)`` to

    Psi(x, y) = e^{lam/2} phi(x) phi_p(y e^lam - x (e^lam - 1)),

so with ``Z ~ |phi_p|^2`` the pointer reads ``y = e^{-lam} Z + (1 - e^{-lam}) x``.
Calibrating with ``w = y / (1 - e^{-lam})`` gives ``w = x + Z/(e^lam - 1)``: the
inaccuracy density is

    e(s) = (e^lam - 1) |phi_p(-s (e^lam - 1))|^2,

whose width shrinks like ``e^{-lam}`` with no floor set by the apparatus.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import LeakageError, SupportError
from .grid import (
    POLICY, Density, GridSpec, JointDensity, WaveFunction, density_of,
    effective_support, joint_from_error, lattice_grid, pushforward_affine,
)

MIN_LAMBDA = 1e-9
MAX_FINAL_STATE_POINTS = 1 << 16


@dataclass(frozen=True, eq=False)
class AltProbe:
    phi_probe: WaveFunction

    def __post_init__(self):
        if abs(self.phi_probe.norm_sq - 1) > 1e-9:
            raise ValueError(f"probe is not normalized (norm^2 = {self.phi_probe.norm_sq})")


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not math.isfinite(lam) or lam <= MIN_LAMBDA:
        raise ValueError(f"lambda-too-small: calibration undefined for lambda <= {MIN_LAMBDA} (got {lam})")
    return lam


@dataclass(frozen=True, eq=False)
class FinalState:
    """Amplitudes ``Psi(x_i, y_j)`` on a product grid."""

    x_grid: GridSpec
    y_grid: GridSpec
    amps: np.ndarray

    @property
    def norm_sq(self) -> float:
        return float(self.x_grid.dx * self.y_grid.dx * np.sum(np.abs(self.amps) ** 2))

    def pointer_density(self) -> Density:
        return Density(self.y_grid, self.x_grid.dx * np.sum(np.abs(self.amps) ** 2, axis=0))


def _pointer_range(obj: Density, probe: Density, lam: float) -> tuple[float, float]:
    lo_x, hi_x = effective_support(obj)
    lo_z, hi_z = effective_support(probe)
    a, b = math.exp(-lam), -math.expm1(-lam)
    return a * lo_z + b * lo_x, a * hi_z + b * hi_x


def final_state(obj: WaveFunction, probe: AltProbe, lam: float,
                y_grid: GridSpec | None = None) -> FinalState:
    """Evolved two-particle amplitude on ``obj.grid`` x ``y_grid``.

    The default y-grid covers the contracted pointer image with spacing
    ``min(dx_obj, dx_probe * e^{-lam})`` so the contracted probe stays
    resolved; it refuses to exceed ``MAX_FINAL_STATE_POINTS`` samples.
    """
    lam = _check_lambda(lam)
    fo, fp = density_of(obj), density_of(probe.phi_probe)
    if y_grid is None:
        lo, hi = _pointer_range(fo, fp, lam)
        dy = min(obj.grid.dx, probe.phi_probe.grid.dx * math.exp(-lam))
        if (hi - lo) / dy > MAX_FINAL_STATE_POINTS:
            raise SupportError(f"final-state y-grid would need more than {MAX_FINAL_STATE_POINTS} points")
        y_grid = lattice_grid(lo - 2 * dy, hi + 2 * dy, dy)
    x = obj.grid.points
    y = y_grid.points
    el, em1 = math.exp(lam), math.expm1(lam)
    # probe mass whose contracted image misses [y_0, y_last], for each x
    hw = 0.5 * y_grid.dx
    z_lo = (y[0] - hw) * el - x * em1
    z_hi = (y[-1] + hw) * el - x * em1
    missed = obj.grid.dx * np.sum(fo.vals * (1.0 - (fp.cdf(z_hi) - fp.cdf(z_lo))))
    if missed > POLICY.mass:
        raise LeakageError(f"contracted probe leaves the y-grid (lost mass {missed:.3g})")
    arg = y[None, :] * el - x[:, None] * em1
    amps = math.exp(0.5 * lam) * obj.amps[:, None] * probe.phi_probe(arg)
    return FinalState(obj.grid, y_grid, amps)


def _trimmed(d: Density):
    lo, hi = effective_support(d)
    pts = d.grid.points
    keep = (pts >= lo) & (pts <= hi)
    w = np.full(int(keep.sum()), d.grid.dx)
    w[0] = w[-1] = 0.5 * d.grid.dx
    return pts[keep], d.vals[keep] * w


def _pointer_at(obj: Density, probe: Density, lam: float, y: np.ndarray) -> np.ndarray:
    """``p(y) = int |phi(x)|^2 e^lam |phi_p(y e^lam - x (e^lam - 1))|^2 dx`` by trapezoid.

    For ``e^lam - 1 > 1`` the probe factor varies faster than the object grid
    resolves, so the integral is taken over ``z = y e^lam - x (e^lam - 1)``
    on the probe grid instead.
    """
    el, em1 = math.exp(lam), math.expm1(lam)
    if em1 <= 1:
        nodes, weights = _trimmed(obj)
        arg = lambda yy: probe.at(yy[:, None] * el - nodes[None, :] * em1)
        scale = el
    else:
        nodes, weights = _trimmed(probe)
        arg = lambda yy: obj.at((yy[:, None] * el - nodes[None, :]) / em1)
        scale = el / em1
    out = np.empty(len(y))
    chunk = max(1, (1 << 22) // len(nodes))
    for s in range(0, len(y), chunk):
        out[s:s + chunk] = scale * (arg(y[s:s + chunk]) @ weights)
    return out


def _check_mass(d: Density, what: str) -> None:
    if abs(d.mass - 1) > POLICY.oracle_mass:
        raise LeakageError(f"{what} has mass {d.mass:.8f}; states leak off the grids")


def pointer_density_numeric(obj: WaveFunction, probe: AltProbe, lam: float,
                            grid: GridSpec | None = None) -> Density:
    """Raw pointer density ``p(y)`` by direct quadrature over x (the oracle)."""
    lam = _check_lambda(lam)
    fo, fp = density_of(obj), density_of(probe.phi_probe)
    if grid is None:
        lo, hi = _pointer_range(fo, fp, lam)
        dy = min(obj.grid.dx, probe.phi_probe.grid.dx * math.exp(-lam))
        grid = lattice_grid(lo - 2 * dy, hi + 2 * dy, dy)
    d = Density(grid, _pointer_at(fo, fp, lam, grid.points))
    _check_mass(d, "pointer density")
    return d


def calibration_factor(lam: float) -> float:
    """``1 - e^{-lam}``: pointer value per unit of calibrated outcome."""
    return -math.expm1(-_check_lambda(lam))


def scaled_outcome_density(obj: WaveFunction, probe: AltProbe, lam: float,
                           grid: GridSpec | None = None) -> Density:
    """Density of ``w = y / (1 - e^{-lam})`` evaluated by the same quadrature."""
    lam = _check_lambda(lam)
    c = calibration_factor(lam)
    fo, fp = density_of(obj), density_of(probe.phi_probe)
    if grid is None:
        lo_x, hi_x = effective_support(fo)
        lo_z, hi_z = effective_support(fp)
        k = 1.0 / math.expm1(lam)
        grid = lattice_grid(lo_x + k * lo_z, hi_x + k * hi_z, obj.grid.dx)
    d = Density(grid, c * _pointer_at(fo, fp, lam, c * grid.points))
    _check_mass(d, "outcome density")
    return d


def error_density(probe: AltProbe, lam: float, dx: float | None = None) -> Density:
    """``e(s) = (e^lam - 1)|phi_p(-s (e^lam - 1))|^2`` binned onto ``dx * Z``.

    ``dx`` defaults to the probe grid spacing; pass the object grid spacing
    to smear an object density with it.
    """
    lam = _check_lambda(lam)
    fp = density_of(probe.phi_probe)
    dx = probe.phi_probe.grid.dx if dx is None else dx
    k = 1.0 / math.expm1(lam)
    lo, hi = effective_support(fp)
    grid = lattice_grid(-k * hi - dx, -k * lo + dx, dx)
    return pushforward_affine(fp, -k, 0.0, grid)


def joint_object_outcome_density(obj: WaveFunction, probe: AltProbe, lam: float,
                                 w_grid: GridSpec | None = None) -> JointDensity:
    """``p(x, w) = |Psi(x, y(w))|^2 |dy/dw| = |phi(x)|^2 e(x - w)``."""
    return joint_from_error(density_of(obj), error_density(probe, lam, obj.grid.dx), w_grid)
