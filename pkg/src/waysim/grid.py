"""Uniform 1D grids, sampled wavefunctions and probability densities.

A grid ``(x_min, x_max, n)`` carries the samples ``x_min + k*dx`` for
``k = 0..n-1`` with ``dx = (x_max - x_min)/n``; ``x_max`` itself is not a
sample.  Integrals are Riemann sums ``dx * sum(...)``, identical to the
trapezoid rule for data that vanish at the grid ends (which the boundary
policy guarantees).

Grids produced internally (convolution outputs, rescaled densities, outcome
grids) live on the lattice ``dx * Z``.  Grids whose ``x_min`` is an integer
multiple of ``dx`` (e.g. ``(-L, L, 2**k)``) interoperate without
interpolation.

Between samples a density is read as the piecewise-linear interpolant of its
samples, extended by zero one cell beyond each end.  Its integral is exactly
``dx * sum(vals)``.  Rebinning onto another grid assigns mass to nodes with
tent weights, which conserves mass and mean exactly and adds at most
``dx^2/4`` of variance (``dx^2/6`` for well-resolved densities).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import signal, special
from scipy.interpolate import CubicSpline

from .errors import GridError, LeakageError, SupportError

__all__ = [
    "NumericPolicy", "POLICY", "GridSpec", "make_grid", "lattice_grid",
    "WaveFunction", "Density", "JointDensity", "ProbeFamily",
    "sample_wavefunction", "density_of", "momentum_wavefunction",
    "momentum_density", "mean", "variance", "overall_width", "convolve",
    "reflect", "smear", "on_grid", "l1_distance", "pushforward_affine",
    "effective_support", "joint_from_error", "spike_density",
]


@dataclass(frozen=True)
class NumericPolicy:
    """Tolerances used throughout the package (one knob for refinement studies)."""

    mass: float = 1e-6
    oracle_mass: float = 1e-4
    moment_abs: float = 1e-4
    moment_rel: float = 0.01
    width_cells: int = 2
    boundary_amp: float = 1e-6
    boundary_frac: float = 0.02
    tail: float = 1e-14
    oracle_l1: float = 1e-3
    bound_slack: float = 0.02


POLICY = NumericPolicy()


def _next_pow2(k: int) -> int:
    return max(8, 1 << max(0, int(k) - 1).bit_length())


@dataclass(frozen=True)
class GridSpec:
    """Uniform sampling domain of ``n`` points (a power of two, at least 8)."""

    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if not (math.isfinite(self.x_min) and math.isfinite(self.x_max)) or self.x_max <= self.x_min:
            raise GridError(f"invalid-range: need x_max > x_min, got [{self.x_min}, {self.x_max}]")
        if int(self.n) != self.n or self.n < 8 or (int(self.n) & (int(self.n) - 1)):
            raise GridError(f"n-not-power-of-two: n must be a power of two >= 8, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "x_min", float(self.x_min))
        object.__setattr__(self, "x_max", float(self.x_max))

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n

    @cached_property
    def points(self) -> np.ndarray:
        pts = self.x_min + self.dx * np.arange(self.n)
        pts.setflags(write=False)
        return pts

    def conjugate(self) -> GridSpec:
        """Centered momentum grid with spacing ``2*pi/(n*dx)`` (hbar = 1)."""
        dk = 2 * np.pi / (self.n * self.dx)
        return GridSpec(-0.5 * self.n * dk, 0.5 * self.n * dk, self.n)

    def same_spacing(self, other: GridSpec) -> bool:
        return abs(self.dx - other.dx) <= 1e-9 * self.dx

    def lattice_index(self) -> int:
        """Index of ``x_min`` on the lattice ``dx * Z``; raises if off-lattice."""
        k = self.x_min / self.dx
        kr = round(k)
        if abs(k - kr) > 1e-6:
            raise GridError(f"grid-mismatch: x_min={self.x_min} is not on the lattice dx*Z (dx={self.dx})")
        return int(kr)


def make_grid(x_min: float, x_max: float, n: int) -> GridSpec:
    return GridSpec(x_min, x_max, n)


def lattice_grid(lo: float, hi: float, dx: float, min_n: int = 8) -> GridSpec:
    """Smallest power-of-two grid on ``dx * Z`` covering ``[lo, hi]``, padded symmetrically."""
    k_lo = math.floor(lo / dx + 1e-9)
    k_hi = math.ceil(hi / dx - 1e-9)
    count = k_hi - k_lo + 1
    n = max(_next_pow2(count), min_n)
    k_lo -= (n - count) // 2
    return GridSpec(k_lo * dx, (k_lo + n) * dx, n)


def _check_boundary(amps: np.ndarray, what: str = "state") -> None:
    mag = np.abs(amps)
    peak = mag.max()
    if peak == 0:
        raise SupportError(f"{what} is identically zero")
    band = max(1, math.ceil(POLICY.boundary_frac * len(amps)))
    edge = max(mag[:band].max(), mag[-band:].max())
    if edge > POLICY.boundary_amp * peak:
        raise SupportError(
            f"boundary-leakage: {what} has relative amplitude {edge / peak:.3g} "
            f"in the outer {POLICY.boundary_frac:.0%} of its grid")


class WaveFunction:
    """Complex amplitudes on a grid; ``dx * sum(|amps|**2)`` is the squared norm."""

    def __init__(self, grid: GridSpec, amps):
        amps = np.array(amps, dtype=complex)
        if amps.shape != (grid.n,):
            raise GridError(f"amplitude array has shape {amps.shape}, grid expects ({grid.n},)")
        amps.setflags(write=False)
        self.grid = grid
        self.amps = amps

    def __repr__(self):
        return f"WaveFunction(grid={self.grid!r}, norm_sq={self.norm_sq:.12g})"

    @property
    def norm_sq(self) -> float:
        return float(self.grid.dx * np.sum(np.abs(self.amps) ** 2))

    def normalized(self) -> WaveFunction:
        return WaveFunction(self.grid, self.amps / math.sqrt(self.norm_sq))

    @cached_property
    def _spline(self):
        return CubicSpline(self.grid.points, self.amps, bc_type="natural")

    def __call__(self, t):
        """Amplitude at arbitrary positions (cubic spline, zero off the grid)."""
        t = np.asarray(t, dtype=float)
        pts = self.grid.points
        inside = (t >= pts[0]) & (t <= pts[-1])
        out = np.zeros(t.shape, dtype=complex)
        if np.any(inside):
            out[inside] = self._spline(t[inside])
        return out


class Density:
    """Nonnegative samples on a grid, read as a probability density."""

    def __init__(self, grid: GridSpec, vals):
        vals = np.array(vals, dtype=float)
        if vals.shape != (grid.n,):
            raise GridError(f"value array has shape {vals.shape}, grid expects ({grid.n},)")
        if not np.all(np.isfinite(vals)):
            raise ValueError("density values must be finite")
        top = vals.max() if vals.size else 0.0
        if vals.min() < -1e-12 * max(top, 1e-300):
            raise ValueError("density values must be nonnegative")
        np.clip(vals, 0.0, None, out=vals)
        vals.setflags(write=False)
        self.grid = grid
        self.vals = vals

    def __repr__(self):
        return f"Density(grid={self.grid!r}, mass={self.mass:.12g})"

    @property
    def mass(self) -> float:
        return float(self.grid.dx * np.sum(self.vals))

    def mean(self) -> float:
        return mean(self)

    def variance(self) -> float:
        return variance(self)

    def normalized(self) -> Density:
        return Density(self.grid, self.vals / self.mass)

    @cached_property
    def _ext(self):
        # zero-extended nodes and trapezoid cumulative sums
        dx = self.grid.dx
        v = np.concatenate(([0.0], self.vals, [0.0]))
        cum = np.concatenate(([0.0], np.cumsum(0.5 * dx * (v[:-1] + v[1:]))))
        return self.grid.x_min - dx, v, cum

    @cached_property
    def _nodes(self):
        z0, v, _ = self._ext
        return z0 + self.grid.dx * np.arange(len(v)), v

    def at(self, t):
        """Piecewise-linear density value at arbitrary positions."""
        z, v = self._nodes
        return np.interp(t, z, v, left=0.0, right=0.0)

    def cdf(self, t):
        """Exact integral of the piecewise-linear density up to ``t``."""
        z0, v, cum = self._ext
        dx = self.grid.dx
        s = (np.asarray(t, dtype=float) - z0) / dx
        k = np.clip(np.floor(s).astype(np.int64), 0, len(v) - 2)
        theta = np.clip(s - k, 0.0, 1.0)
        f = cum[k] + dx * (v[k] * theta + 0.5 * (v[k + 1] - v[k]) * theta ** 2)
        return np.where(s <= 0, 0.0, np.where(s >= len(v) - 1, cum[-1], f))

    @cached_property
    def _cdf_integral_nodes(self):
        z0, v, cum = self._ext
        dx = self.grid.dx
        steps = dx * (cum[:-1] + dx * (v[:-1] / 2 + (v[1:] - v[:-1]) / 6))
        return np.concatenate(([0.0], np.cumsum(steps)))

    def cdf_integral(self, t):
        """``S(t) = integral of cdf up to t`` (exact, piecewise cubic); ``S'' = density``."""
        z0, v, cum = self._ext
        big = self._cdf_integral_nodes
        dx = self.grid.dx
        last = len(v) - 1
        s = (np.asarray(t, dtype=float) - z0) / dx
        k = np.clip(np.floor(s).astype(np.int64), 0, last - 1)
        theta = np.clip(s - k, 0.0, 1.0)
        inner = big[k] + dx * (cum[k] * theta
                               + dx * (v[k] * theta ** 2 / 2 + (v[k + 1] - v[k]) * theta ** 3 / 6))
        beyond = big[-1] + cum[-1] * dx * (s - last)
        return np.where(s <= 0, 0.0, np.where(s >= last, beyond, inner))

    @cached_property
    def _mirror(self) -> Density:
        g = self.grid
        return Density(GridSpec(-g.x_max + g.dx, -g.x_min + g.dx, g.n), self.vals[::-1])

    def second_difference_of_cdf_integral(self, t) -> np.ndarray:
        """``S(t[i+1]) - 2 S(t[i]) + S(t[i-1])`` for increasing or decreasing ``t``.

        ``S`` grows linearly to the right of the support, so stencils whose
        centre lies past the median use the mirrored integral
        ``int_t^inf (mass - cdf)``, which differs from ``S`` by a linear
        function and stays small there.
        """
        t = np.asarray(t, dtype=float)
        left = self.cdf_integral(t)
        right = self._mirror.cdf_integral(-t)
        d_left = left[2:] - 2 * left[1:-1] + left[:-2]
        d_right = right[2:] - 2 * right[1:-1] + right[:-2]
        past = self.cdf(t[1:-1]) > 0.5 * self.mass
        return np.where(past, d_right, d_left)


class JointDensity:
    """Density of (object position x, calibrated outcome w) on a product grid."""

    def __init__(self, x_grid: GridSpec, w_grid: GridSpec, vals):
        vals = np.array(vals, dtype=float)
        if vals.shape != (x_grid.n, w_grid.n):
            raise GridError(f"joint array has shape {vals.shape}, expected ({x_grid.n}, {w_grid.n})")
        if vals.min() < 0:
            raise ValueError("joint density values must be nonnegative")
        vals.setflags(write=False)
        self.x_grid = x_grid
        self.w_grid = w_grid
        self.vals = vals

    @property
    def mass(self) -> float:
        return float(self.x_grid.dx * self.w_grid.dx * np.sum(self.vals))

    def marginal_x(self) -> Density:
        return Density(self.x_grid, self.w_grid.dx * self.vals.sum(axis=1))

    def marginal_w(self) -> Density:
        return Density(self.w_grid, self.x_grid.dx * self.vals.sum(axis=0))


_KINDS = ("gaussian", "box", "triangle", "skewed_gaussian")


@dataclass(frozen=True)
class ProbeFamily:
    """Parametric single-particle state.

    ``gaussian``/``skewed_gaussian`` use ``sigma`` (the position-density
    standard deviation of the unskewed profile); ``box``/``triangle`` use
    ``halfwidth`` and have support exactly ``[center - halfwidth, center + halfwidth]``.
    ``momentum`` multiplies the amplitude by ``exp(i*momentum*x)``.
    """

    kind: str
    center: float = 0.0
    sigma: float | None = None
    halfwidth: float | None = None
    edge_smoothing: float = 0.0
    skew: float = 0.0
    momentum: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown probe kind {self.kind!r}; expected one of {_KINDS}")
        if self.kind in ("gaussian", "skewed_gaussian"):
            if self.sigma is None or not self.sigma > 0:
                raise ValueError(f"{self.kind} needs sigma > 0")
        else:
            if self.halfwidth is None or not self.halfwidth > 0:
                raise ValueError(f"{self.kind} needs halfwidth > 0")
            if not 0 <= self.edge_smoothing < self.halfwidth:
                raise ValueError("edge_smoothing must satisfy 0 <= edge_smoothing < halfwidth")

    @classmethod
    def gaussian(cls, center=0.0, sigma=1.0, momentum=0.0):
        return cls("gaussian", center=center, sigma=sigma, momentum=momentum)

    @classmethod
    def box(cls, center=0.0, halfwidth=1.0, edge_smoothing=0.0, momentum=0.0):
        return cls("box", center=center, halfwidth=halfwidth,
                   edge_smoothing=edge_smoothing, momentum=momentum)

    @classmethod
    def triangle(cls, center=0.0, halfwidth=1.0, momentum=0.0):
        return cls("triangle", center=center, halfwidth=halfwidth, momentum=momentum)

    @classmethod
    def skewed_gaussian(cls, center=0.0, sigma=1.0, skew=0.0, momentum=0.0):
        return cls("skewed_gaussian", center=center, sigma=sigma, skew=skew, momentum=momentum)

    @property
    def compact(self) -> bool:
        return self.kind in ("box", "triangle")

    def to_dict(self) -> dict:
        keys = {"gaussian": ("center", "sigma"), "skewed_gaussian": ("center", "sigma", "skew"),
                "box": ("center", "halfwidth", "edge_smoothing"), "triangle": ("center", "halfwidth")}
        out = {"kind": self.kind}
        out.update({k: getattr(self, k) for k in keys[self.kind]})
        if self.momentum:
            out["momentum"] = self.momentum
        return out

    @classmethod
    def from_dict(cls, spec: dict) -> ProbeFamily:
        spec = dict(spec)
        kind = spec.pop("kind", None)
        return cls(kind, **spec)


def _profile(x: np.ndarray, dx: float, fam: ProbeFamily) -> np.ndarray:
    """Unnormalized position density of ``fam`` at the samples ``x``."""
    c = fam.center
    if fam.kind in ("gaussian", "skewed_gaussian"):
        z = (x - c) / fam.sigma
        dens = np.exp(-0.5 * z * z)
        if fam.kind == "skewed_gaussian":
            dens = dens * special.ndtr(fam.skew * z)
        return dens
    h = fam.halfwidth
    if fam.kind == "triangle":
        return np.clip(1.0 - np.abs(x - c) / h, 0.0, None)
    if fam.edge_smoothing == 0:
        # fraction of each sample cell inside the box: exact support, exact mass
        lo = np.maximum(x - 0.5 * dx, c - h)
        hi = np.minimum(x + 0.5 * dx, c + h)
        return np.clip(hi - lo, 0.0, None) / dx
    inside = h - np.abs(x - c)
    s = fam.edge_smoothing
    ramp = np.sin(0.5 * np.pi * np.clip(inside, 0.0, s) / s) ** 2
    return np.where(inside <= 0, 0.0, ramp)


def sample_wavefunction(grid: GridSpec, family: ProbeFamily) -> WaveFunction:
    """Sample and normalize ``family`` on ``grid``.

    Raises SupportError if the state does not fit (compact support outside
    the grid, a Gaussian closer than 3 sigma to an edge, edge amplitude above
    the boundary policy) or if the grid is too coarse to resolve it.
    """
    dx = grid.dx
    c = family.center
    if family.compact:
        h = family.halfwidth
        if c - h < grid.x_min or c + h > grid.points[-1]:
            raise SupportError(f"support-exceeds-grid: [{c - h}, {c + h}] not inside grid {grid}")
        if h < 2 * dx:
            raise SupportError(f"grid too coarse: halfwidth {h} < 2*dx = {2 * dx}")
    else:
        s = family.sigma
        if c - 3 * s < grid.x_min or c + 3 * s > grid.x_max:
            raise SupportError(f"support-exceeds-grid: {c} +/- 3*{s} not inside grid {grid}")
        if s < dx:
            raise SupportError(f"grid too coarse: sigma {s} < dx = {dx}")
    x = grid.points
    amps = np.sqrt(_profile(x, dx, family)).astype(complex)
    if family.momentum:
        amps = amps * np.exp(1j * family.momentum * x)
    try:
        _check_boundary(amps, f"{family.kind} state")
    except SupportError as exc:
        raise SupportError(f"support-exceeds-grid: {exc}") from None
    return WaveFunction(grid, amps).normalized()


def density_of(psi: WaveFunction) -> Density:
    return Density(psi.grid, np.abs(psi.amps) ** 2)


def spike_density(grid: GridSpec, x0: float) -> Density:
    """All mass in the single cell nearest to ``x0``."""
    k = int(round((x0 - grid.x_min) / grid.dx))
    if not 0 <= k < grid.n:
        raise SupportError(f"spike at {x0} is off the grid {grid}")
    vals = np.zeros(grid.n)
    vals[k] = 1.0 / grid.dx
    return Density(grid, vals)


def momentum_wavefunction(psi: WaveFunction) -> WaveFunction:
    """Continuum-normalized Fourier transform on the conjugate grid."""
    _check_boundary(psi.amps, "wavefunction")
    g = psi.grid
    kg = g.conjugate()
    k = kg.points
    phi = np.fft.fftshift(np.fft.fft(psi.amps)) * (g.dx / math.sqrt(2 * np.pi))
    return WaveFunction(kg, phi * np.exp(-1j * k * g.x_min))


def momentum_density(psi: WaveFunction) -> Density:
    return density_of(momentum_wavefunction(psi))


def mean(d: Density) -> float:
    return float(d.grid.dx * np.sum(d.grid.points * d.vals) / d.mass)


def variance(d: Density) -> float:
    m = mean(d)
    return float(d.grid.dx * np.sum((d.grid.points - m) ** 2 * d.vals) / d.mass)


def overall_width(d: Density, eps: float) -> float:
    """Length of the shortest run of grid cells holding mass at least ``1 - eps``."""
    if not 0 < eps < 1:
        raise ValueError(f"invalid-eps: eps must lie in (0, 1), got {eps}")
    dx = d.grid.dx
    cum = np.concatenate(([0.0], np.cumsum(d.vals * dx))).tolist()
    target = 1.0 - eps - 1e-12
    n = d.grid.n
    if cum[-1] < target:
        raise ValueError(f"density mass {cum[-1]:.6g} is below the requested level {1 - eps}")
    best = n
    j = 0
    for i in range(n):
        if j < i:
            j = i
        while j < n and cum[j] - cum[i] < target:
            j += 1
        if cum[j] - cum[i] < target:
            break
        best = min(best, j - i)
    return best * dx


def _require_spacing(a: GridSpec, b: GridSpec) -> None:
    if not a.same_spacing(b):
        raise GridError(f"grid-mismatch: spacings {a.dx} and {b.dx} differ")


def _clean(vals: np.ndarray) -> np.ndarray:
    # FFT round-off leaves ~1e-17 relative noise where the exact result is zero
    top = vals.max()
    vals[vals < 1e-15 * top] = 0.0
    return vals


def convolve(d1: Density, d2: Density, grid: GridSpec | None = None) -> Density:
    """Density of the sum of independent variables distributed as ``d1`` and ``d2``.

    The full linear convolution is kept (output spans the sum of the input
    ranges, padded to a power of two). If ``grid`` is given the result is
    restricted to it, and truncating more than the mass tolerance raises.
    """
    _require_spacing(d1.grid, d2.grid)
    dx = d1.grid.dx
    vals = _clean(signal.fftconvolve(d1.vals, d2.vals) * dx)
    count = len(vals)
    n = _next_pow2(count)
    left = (n - count) // 2
    x0 = d1.grid.x_min + d2.grid.x_min - left * dx
    full = np.zeros(n)
    full[left:left + count] = vals
    out = Density(GridSpec(x0, x0 + n * dx, n), full)
    return out if grid is None else on_grid(out, grid)


def reflect(d: Density) -> Density:
    """Density of ``-X``: ``vals'(x) = vals(-x)``."""
    g = d.grid
    return Density(GridSpec(-g.x_max + g.dx, -g.x_min + g.dx, g.n), d.vals[::-1])


def smear(obj: Density, e: Density, grid: GridSpec | None = None) -> Density:
    """``m(w) = integral obj(w + x') e(x') dx'``, i.e. ``obj * reflect(e)``."""
    return convolve(obj, reflect(e), grid)


def _offset(src: GridSpec, dst: GridSpec) -> int:
    _require_spacing(src, dst)
    k = (src.x_min - dst.x_min) / dst.dx
    kr = round(k)
    if abs(k - kr) > 1e-6:
        raise GridError("grid-mismatch: grids are not on a common lattice")
    return int(kr)


def on_grid(d: Density, grid: GridSpec, tol: float | None = None) -> Density:
    """Restrict/extend ``d`` onto a lattice-compatible grid; raise if > ``tol`` mass is cut."""
    tol = POLICY.mass if tol is None else tol
    off = _offset(d.grid, grid)
    out = np.zeros(grid.n)
    lo = max(0, off)
    hi = min(grid.n, off + d.grid.n)
    if hi > lo:
        out[lo:hi] = d.vals[lo - off:hi - off]
    lost = d.mass - grid.dx * out.sum()
    if lost > tol:
        raise LeakageError(f"restriction onto {grid} cuts mass {lost:.3g} (> {tol:g})")
    return Density(grid, out)


def l1_distance(a: Density, b: Density) -> float:
    """``integral |a - b|`` for densities on a common lattice."""
    off = _offset(b.grid, a.grid)
    dx = a.grid.dx
    lo = min(0, off)
    hi = max(a.grid.n, off + b.grid.n)
    va = np.zeros(hi - lo)
    vb = np.zeros(hi - lo)
    va[-lo:-lo + a.grid.n] = a.vals
    vb[off - lo:off - lo + b.grid.n] = b.vals
    return float(dx * np.sum(np.abs(va - vb)))


def pushforward_affine(d: Density, scale: float, shift: float, grid: GridSpec,
                       tol: float | None = None) -> Density:
    """Density of ``scale*X + shift`` for ``X ~ d``, binned onto ``grid`` with tent weights.

    Node ``k`` receives ``integral hat_k(y) p(y) dy``, computed exactly as a
    second difference of the integrated CDF.  Mass and mean are exact even
    when the image is narrower than one cell.  Raises LeakageError if more
    than ``tol`` mass misses ``grid``.
    """
    if scale == 0:
        raise ValueError("scale must be nonzero")
    tol = POLICY.mass if tol is None else tol
    dy = grid.dx
    nodes = grid.x_min + dy * np.arange(-1, grid.n + 1)
    masses = abs(scale) * d.second_difference_of_cdf_integral((nodes - shift) / scale) / dy
    masses = np.clip(masses, 0.0, None)
    lost = d.mass - masses.sum()
    if lost > tol:
        raise LeakageError(f"rescaled density loses mass {lost:.3g} off grid {grid}")
    return Density(grid, masses / dy)


def effective_support(d: Density, tail: float | None = None) -> tuple[float, float]:
    """Interval outside of which at most ``tail`` mass lies on each side."""
    tail = POLICY.tail if tail is None else tail
    cum = np.cumsum(d.vals) * d.grid.dx
    total = cum[-1]
    pts = d.grid.points
    i = int(np.searchsorted(cum, tail * total, side="right"))
    j = int(np.searchsorted(cum, (1 - tail) * total, side="left"))
    i = min(i, d.grid.n - 1)
    j = min(j, d.grid.n - 1)
    return float(pts[i] - d.grid.dx), float(pts[j] + d.grid.dx)


def joint_from_error(obj: Density, e: Density, w_grid: GridSpec | None = None) -> JointDensity:
    """Joint density ``p(x, w) = obj(x) * e(x - w)`` on a common lattice.

    This is the joint law of ``(X, X - E)`` with ``E ~ e`` independent of
    ``X ~ obj``; its w-marginal is ``smear(obj, e)``.
    """
    _require_spacing(obj.grid, e.grid)
    dx = obj.grid.dx
    if w_grid is None:
        lo_x, hi_x = effective_support(obj)
        lo_e, hi_e = effective_support(e)
        w_grid = lattice_grid(lo_x - hi_e, hi_x - lo_e, dx)
    _require_spacing(obj.grid, w_grid)
    ix = obj.grid.lattice_index() + np.arange(obj.grid.n)
    iw = w_grid.lattice_index() + np.arange(w_grid.n)
    idx = ix[:, None] - iw[None, :] - e.grid.lattice_index()
    valid = (idx >= 0) & (idx < e.grid.n)
    ev = np.where(valid, e.vals[np.where(valid, idx, 0)], 0.0)
    return JointDensity(obj.grid, w_grid, obj.vals[:, None] * ev)
