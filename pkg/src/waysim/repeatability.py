"""Approximate (delta-) repeatability of position measurements.

After an outcome ``w`` in a set ``X`` an accurate control measurement of
position should find the particle within ``X_delta`` (points no farther
than ``delta`` from ``X``).  Both implemented models leave the object
position unchanged, so the control measurement reads the x-marginal of the
joint (position, outcome) density.

"For all sets X" is approximated by a finite family of grid-aligned
intervals partitioning a window of the outcome grid, plus unions of up to
``union_order`` adjacent intervals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import WaysimError
from .grid import GridSpec, JointDensity, effective_support

__all__ = [
    "JointDensity", "IntervalFamily", "NullEventError", "NoFiniteDeltaError",
    "conditional_prob", "repeatability_width", "predicted_halfwidth",
]

NULL_MASS = 1e-8


class NullEventError(WaysimError, ValueError):
    """Conditioning event ``w in X`` has (numerically) zero probability."""


class NoFiniteDeltaError(WaysimError):
    """Even the widest admissible delta fails; mass lies outside the window."""


@dataclass(frozen=True)
class IntervalFamily:
    """Half-open outcome intervals ``[a, b)``, grid aligned and non-overlapping."""

    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self):
        ivs = tuple(sorted((float(a), float(b)) for a, b in self.intervals))
        for (a, b) in ivs:
            if not b > a:
                raise ValueError(f"empty interval [{a}, {b})")
        object.__setattr__(self, "intervals", ivs)

    @classmethod
    def partition(cls, grid: GridSpec, lo: float, hi: float, width: float,
                  union_order: int = 2) -> IntervalFamily:
        """Cells of ``width`` (rounded to whole grid cells) tiling ``[lo, hi)``.

        Unions of up to ``union_order`` adjacent cells are appended; they are
        themselves intervals, so the family may overlap but each member is
        grid aligned.
        """
        dx = grid.dx
        cells = max(1, round(width / dx))
        k0 = math.floor((lo - grid.x_min) / dx + 1e-9)
        k1 = math.ceil((hi - grid.x_min) / dx - 1e-9)
        k0, k1 = max(k0, 0), min(k1, grid.n)
        edges = list(range(k0, k1, cells)) + [k1]
        base = [(grid.x_min + a * dx, grid.x_min + b * dx) for a, b in zip(edges[:-1], edges[1:])]
        out = list(base)
        for order in range(2, union_order + 1):
            for i in range(len(base) - order + 1):
                out.append((base[i][0], base[i + order - 1][1]))
        return cls(tuple(out))

    @classmethod
    def for_joint(cls, j: JointDensity, width: float = 0.5, union_order: int = 2,
                  tail: float = 1e-9) -> IntervalFamily:
        """Partition of the outcome window carrying all but ``2*tail`` of the mass."""
        lo, hi = effective_support(j.marginal_w(), tail)
        return cls.partition(j.w_grid, lo, hi, width, union_order)


def _w_slice(j: JointDensity, a: float, b: float) -> slice:
    g = j.w_grid
    ka = max(0, math.ceil((a - g.x_min) / g.dx - 1e-9))
    kb = min(g.n, math.ceil((b - g.x_min) / g.dx - 1e-9))
    return slice(ka, kb)


def _row_profile(j: JointDensity, a: float, b: float) -> np.ndarray:
    """Unnormalized x-density given ``w in [a, b)``."""
    return j.vals[:, _w_slice(j, a, b)].sum(axis=1)


def conditional_prob(j: JointDensity, X: tuple[float, float], delta: float) -> float:
    """``P(x in X_delta | w in X)`` for ``X = [a, b)``; ``X_delta = [a - delta, b + delta)``."""
    a, b = X
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    r = _row_profile(j, a, b)
    total = r.sum()
    if j.x_grid.dx * j.w_grid.dx * total <= NULL_MASS:
        raise NullEventError(f"P(w in [{a}, {b})) is below {NULL_MASS:g}")
    x = j.x_grid.points
    tol = 1e-9 * j.x_grid.dx
    inside = (x >= a - delta - tol) & (x < b + delta - tol)
    return float(r[inside].sum() / total)


def _min_cells(j: JointDensity, a: float, b: float, eps: float) -> int | None:
    """Smallest ``k`` such that ``delta = k*dx`` meets ``1 - eps`` on ``[a, b)``; None if null."""
    r = _row_profile(j, a, b)
    total = r.sum()
    if j.x_grid.dx * j.w_grid.dx * total <= NULL_MASS:
        return None
    g = j.x_grid
    # x-index of the first sample >= a and of the first sample >= b
    ia = math.ceil((a - g.x_min) / g.dx - 1e-9)
    ib = math.ceil((b - g.x_min) / g.dx - 1e-9)
    n = g.n
    cum = np.concatenate(([0.0], np.cumsum(r)))
    kmax = n
    k = np.arange(kmax + 1)
    lo = np.clip(ia - k, 0, n)
    hi = np.clip(ib + k, 0, n)
    frac = (cum[hi] - cum[lo]) / total
    ok = np.nonzero(frac >= 1.0 - eps)[0]
    if ok.size == 0:
        raise NoFiniteDeltaError(f"no delta reaches 1 - {eps:g} on [{a}, {b})")
    return int(ok[0])


def repeatability_width(j: JointDensity, family: IntervalFamily | None = None,
                        eps: float = 1e-6) -> float:
    """Smallest grid multiple ``delta`` with ``P(x in X_delta | w in X) >= 1 - eps`` for all X.

    Intervals whose conditioning probability is below ``NULL_MASS`` are skipped.
    """
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if family is None:
        family = IntervalFamily.for_joint(j)
    worst = 0
    seen = False
    for a, b in family.intervals:
        k = _min_cells(j, a, b, eps)
        if k is None:
            continue
        seen = True
        worst = max(worst, k)
    if not seen:
        raise NullEventError("every interval in the family has null probability")
    return worst * j.x_grid.dx


def predicted_halfwidth(model: str, lam: float, *, ell: float | None = None,
                        m: float | None = None, n: float | None = None) -> float:
    """Support halfwidth ``d`` of the inaccuracy density for compact probes.

    ozawa: ``Phi1`` on ``[-ell, ell]`` and ``Phi2`` on ``[-m, m]`` give
    ``d = ell + 2 m / lam`` (the pointer spread enters through the calibration
    ``w = -(2/lam) u``).  alt: probe on ``[-n, n]`` gives ``d = n / (e^lam - 1)``.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if model == "ozawa":
        if ell is None or m is None:
            raise ValueError("non-compact-probe: ozawa needs support halfwidths ell and m")
        return ell + 2.0 * m / lam
    if model == "alt":
        if n is None:
            raise ValueError("non-compact-probe: alt needs the probe support halfwidth n")
        return n / math.expm1(lam)
    raise ValueError(f"unknown model {model!r}")
