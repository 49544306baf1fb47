"""Four-particle momentum-conserving position measurement (Yanase condition holds).

Object position ``x``; apparatus variables ``y`` (reference position Q_A),
``u`` (pointer P_C - P_B) and ``v`` (P_B + P_C).  After the interaction the
state is ``phi(x) Phi1(y) Phi2(u + lam/2 (x - y)) phi_v(v)``.  The pointer is
calibrated by ``w = -(2/lam) u``, which gives ``w = x - y - (2/lam) u0``: the
outcome is the true position smeared by ``E = Y + S`` with ``Y ~ |Phi1|^2``
and ``S = (2/lam) U0``.  Hence

    e(s) = (|Phi1|^2 * g)(s),   g(s) = (lam/2) |Phi2(lam s / 2)|^2,

and ``Var e = Var|Phi1|^2 + (4/lam^2) Var|Phi2|^2``, which stays above
``Var|Phi1|^2`` however strong the coupling.

The v-mode never enters outcome statistics; it is kept only because it
contributes to the apparatus momentum spread.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import LeakageError
from .grid import (
    POLICY, Density, GridSpec, JointDensity, WaveFunction, convolve, density_of,
    effective_support, joint_from_error, lattice_grid, pushforward_affine, variance,
)


@dataclass(frozen=True, eq=False)
class OzawaProbe:
    phi1: WaveFunction
    phi2: WaveFunction
    phi_v: WaveFunction | None = None

    def __post_init__(self):
        for name in ("phi1", "phi2", "phi_v"):
            psi = getattr(self, name)
            if psi is not None and abs(psi.norm_sq - 1) > 1e-9:
                raise ValueError(f"{name} is not normalized (norm^2 = {psi.norm_sq})")


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not lam > 0 or not math.isfinite(lam):
        raise ValueError(f"coupling lambda must be positive and finite, got {lam}")
    return lam


def evolved_component(probe: OzawaProbe, lam: float, x, y, u):
    """``Phi1(y) * Phi2(u + lam/2 (x - y))`` (broadcasting over the arguments)."""
    lam = _check_lambda(lam)
    x, y, u = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, y, u)))
    arg = u + 0.5 * lam * (x - y)
    a1 = probe.phi1(y)
    pts = probe.phi2.grid.points
    off = (arg < pts[0]) | (arg > pts[-1])
    if np.any(off & (np.abs(a1) > 0)):
        warnings.warn("shifted pointer argument leaves the Phi2 grid; treated as zero",
                      RuntimeWarning, stacklevel=2)
    return a1 * probe.phi2(arg)


def _trap_weights(n: int, dx: float) -> np.ndarray:
    w = np.full(n, dx)
    w[0] = w[-1] = 0.5 * dx
    return w


def _trimmed(d: Density):
    """Sample points, values and trapezoid weights restricted to the effective support."""
    lo, hi = effective_support(d)
    pts = d.grid.points
    keep = (pts >= lo) & (pts <= hi)
    return pts[keep], d.vals[keep], _trap_weights(int(keep.sum()), d.grid.dx)


def _outcome_at(obj: Density, p1: Density, p2: Density, lam: float, w: np.ndarray) -> np.ndarray:
    """Brute-force density of ``w = x - y - (2/lam) u0`` by 2D quadrature.

    For ``lam <= 2`` integrate over (x, y) and evaluate ``|Phi2|^2`` at
    ``u0 = (lam/2)(x - y - w)``; for stronger coupling that factor is narrower
    than the grid, so integrate over (x, u0) and evaluate ``|Phi1|^2`` at
    ``y = x - w - (2/lam) u0`` instead.
    """
    xs, fx, wx = _trimmed(obj)
    ax = fx * wx
    out = np.empty(len(w))
    if lam <= 2:
        ys, fy, wy = _trimmed(p1)
        ay = fy * wy
        half = 0.5 * lam
        shift = half * (xs[:, None] - ys[None, :])
        for k, wk in enumerate(w):
            out[k] = half * (ax @ p2.at(shift - half * wk) @ ay)
    else:
        us, fu, wu = _trimmed(p2)
        au = fu * wu
        base = xs[:, None] - (2 / lam) * us[None, :]
        for k, wk in enumerate(w):
            out[k] = ax @ p1.at(base - wk) @ au
    return out


def _outcome_grid(obj: Density, p1: Density, p2: Density, lam: float) -> GridSpec:
    lo_x, hi_x = effective_support(obj)
    lo_y, hi_y = effective_support(p1)
    lo_u, hi_u = effective_support(p2)
    # w = x - y - (2/lam) u0
    return lattice_grid(lo_x - hi_y - 2 / lam * hi_u, hi_x - lo_y - 2 / lam * lo_u, obj.grid.dx)


def pointer_density_numeric(obj: WaveFunction, probe: OzawaProbe, lam: float,
                            grid: GridSpec | None = None) -> Density:
    """Raw pointer density ``p(u)`` by direct 2D quadrature (the independent oracle).

    The default u-grid has the spacing of ``Phi2``'s grid and covers the
    shifted support ``u0 - lam/2 (x - y)``.
    """
    lam = _check_lambda(lam)
    fo, f1, f2 = density_of(obj), density_of(probe.phi1), density_of(probe.phi2)
    if grid is None:
        lo_x, hi_x = effective_support(fo)
        lo_y, hi_y = effective_support(f1)
        lo_u, hi_u = effective_support(f2)
        grid = lattice_grid(lo_u - 0.5 * lam * (hi_x - lo_y), hi_u - 0.5 * lam * (lo_x - hi_y),
                            probe.phi2.grid.dx)
    vals = (2 / lam) * _outcome_at(fo, f1, f2, lam, -(2 / lam) * grid.points)
    d = Density(grid, vals)
    _check_mass(d, "pointer density")
    return d


def scaled_outcome_density(obj: WaveFunction, probe: OzawaProbe, lam: float,
                           grid: GridSpec | None = None) -> Density:
    """Density of the calibrated outcome ``w = -(2/lam) u``, by the same quadrature.

    Evaluated directly on the outcome grid, so no interpolation of the raw
    pointer density is needed.  Default grid: the object's lattice,
    covering the predicted outcome range.
    """
    lam = _check_lambda(lam)
    fo, f1, f2 = density_of(obj), density_of(probe.phi1), density_of(probe.phi2)
    if grid is None:
        grid = _outcome_grid(fo, f1, f2, lam)
    vals = _outcome_at(fo, f1, f2, lam, grid.points)
    d = Density(grid, vals)
    _check_mass(d, "outcome density")
    return d


def _check_mass(d: Density, what: str) -> None:
    if abs(d.mass - 1) > POLICY.oracle_mass:
        raise LeakageError(f"{what} has mass {d.mass:.8f}; states leak off the grids")


def pointer_term(probe: OzawaProbe, lam: float) -> Density:
    """Density of ``S = (2/lam) U0``, ``g(s) = (lam/2)|Phi2(lam s/2)|^2``, on Phi1's lattice."""
    lam = _check_lambda(lam)
    f2 = density_of(probe.phi2)
    lo, hi = effective_support(f2)
    dx = probe.phi1.grid.dx
    grid = lattice_grid(2 / lam * lo - dx, 2 / lam * hi + dx, dx)
    return pushforward_affine(f2, 2 / lam, 0.0, grid)


def error_density(probe: OzawaProbe, lam: float) -> Density:
    """Inaccuracy density ``e = |Phi1|^2 * g``; outcome = ``smear(|phi|^2, e)``."""
    return convolve(density_of(probe.phi1), pointer_term(probe, lam))


def variance_identity_check(probe: OzawaProbe, lam: float) -> tuple[float, float]:
    """``(Var e, Var|Phi1|^2 + 4/lam^2 Var|Phi2|^2)``."""
    lam = _check_lambda(lam)
    lhs = variance(error_density(probe, lam))
    rhs = variance(density_of(probe.phi1)) + 4.0 / lam ** 2 * variance(density_of(probe.phi2))
    return lhs, rhs


def joint_object_outcome_density(obj: WaveFunction, probe: OzawaProbe, lam: float,
                                 w_grid: GridSpec | None = None) -> JointDensity:
    """``p(x, w) = |phi(x)|^2 q(w|x)`` with ``q(w|x) = e(x - w)``.

    The y-integral in ``q(w|x) = int |Phi1(y)|^2 g(x - y - w) dy`` is the
    convolution defining ``e``, evaluated once per lattice difference.
    """
    return joint_from_error(density_of(obj), error_density(probe, lam), w_grid)
