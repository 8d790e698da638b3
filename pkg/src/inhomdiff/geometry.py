"""Geometric and density-derived functions on a model manifold.

A model manifold carries the metric ``dr^2 + f(r)^2 dxi^2`` on ``[0, inf) x S^{N-1}``;
all the volume bookkeeping therefore reduces to one-dimensional integrals of
``f^{N-1}`` (optionally weighted by the radial density ``rho``).

The central object is :class:`GeometricBundle`, which tabulates

* ``V(R)``, the volume of the geodesic ball ``B_R``,
* ``h(v)``, the ball isoperimetric profile, and ``omega(v) = v^{(N-1)/N} / h(v)``,
* ``V_rho(R) = rho(R) V(R)`` and its inverse ``R_rho``,
* ``psi(R) = V_rho(R)^{p+m-3} rho(R) R^p`` and its inverse ``Z~``,

on a log-uniform radial grid and evaluates them exactly (quadrature + root
finding) between the nodes.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import PchipInterpolator

from .errors import (
    InvalidAssumptionError,
    InvalidSpecError,
    NumericError,
    RangeError,
    RegimeError,
)

GAUSS_ORDER = 16
_GX, _GW = np.polynomial.legendre.leggauss(GAUSS_ORDER)
# sub-panels per integration piece; graded towards 0 for pieces starting at the origin
_N_SUB = 6


def sphere_area(N: int) -> float:
    """Area of the unit sphere S^{N-1} in R^N."""
    return 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)


def gauss_integrate(fn, a, b):
    """Fixed-order Gauss-Legendre rule on each interval ``[a_i, b_i]``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    x = mid[..., None] + half[..., None] * _GX
    return half * (fn(x) @ _GW)


def _subdivide(a, b, n):
    # geometric panels if a > 0, dyadic grading towards 0 otherwise
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    frac = np.linspace(0.0, 1.0, n + 1)
    pos = a > 0
    safe_a = np.where(pos, a, 1.0)
    safe_b = np.where(pos, b, 1.0)
    geo = safe_a[..., None] * (safe_b / safe_a)[..., None] ** frac
    dyadic = np.concatenate(([0.0], 2.0 ** np.arange(-(n - 1), 1.0)))
    grad = b[..., None] * dyadic
    pts = np.where(pos[..., None], geo, grad)
    pts[..., 0] = a
    pts[..., -1] = b
    return pts


def radial_integral(fn, a, b, breakpoints=()):
    """Integrate ``fn`` over ``[a_i, b_i]`` (vectorized), splitting at kinks.

    Each piece between consecutive breakpoints is cut into graded sub-panels and
    integrated with a 16-point Gauss rule, which is exact to rounding for the
    piecewise power-log integrands used here.
    """
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    a = a.ravel()
    b = b.ravel()
    out = np.zeros(a.shape)
    cuts = [0.0, *sorted(bp for bp in breakpoints if bp > 0), np.inf]
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        aa = np.clip(a, lo, hi)
        bb = np.clip(b, lo, hi)
        mask = bb > aa
        if not mask.any():
            continue
        pts = _subdivide(aa[mask], bb[mask], _N_SUB)
        out[mask] += gauss_integrate(fn, pts[:, :-1], pts[:, 1:]).sum(axis=1)
    return out


# ---------------------------------------------------------------------------
# profiles


def _power_log_warp(beta, nu, A):
    C = A ** (beta - 1.0) * math.log(A) ** nu

    def warp(r):
        r = np.asarray(r, dtype=float)
        outer = np.maximum(r, A)
        return np.where(r <= A, C * r, outer**beta * np.log(outer) ** nu)

    return warp, C


def _power_log_density(alpha, mu, B, scale):
    core = scale * B ** (-alpha) * math.log(B) ** mu

    def density(r):
        r = np.asarray(r, dtype=float)
        outer = np.maximum(r, B)
        return np.where(r <= B, core, scale * outer ** (-alpha) * np.log(outer) ** mu)

    return density, core


@dataclass(frozen=True)
class ManifoldProfile:
    """Warping function ``f`` of a model manifold of dimension ``N``.

    Use :meth:`power_log` for the family ``f = C(A) r`` on ``[0, A]``,
    ``f = r^beta (ln r)^nu`` beyond, or pass any vectorized callable with
    ``f(0) = 0`` and ``f > 0`` elsewhere.
    """

    dimension: int
    warp: Callable[[np.ndarray], np.ndarray]
    warp_params: dict | None = None
    sphere_area: float = field(default=float("nan"))
    breakpoints: tuple[float, ...] = ()

    def __post_init__(self):
        if self.dimension < 2:
            raise InvalidSpecError(f"dimension must be >= 2, got {self.dimension}")
        if math.isnan(self.sphere_area):
            object.__setattr__(self, "sphere_area", sphere_area(self.dimension))

    @classmethod
    def power_log(cls, N: int, beta: float = 1.0, nu: float = 0.0, A: float = math.e):
        if A < math.e:
            raise InvalidSpecError(f"A must be >= e, got {A}")
        warp, C = _power_log_warp(beta, nu, A)
        params = {"beta": beta, "nu": nu, "A": A, "C": C}
        return cls(N, warp, params, breakpoints=(A,))

    @classmethod
    def euclidean(cls, N: int):
        return cls.power_log(N, 1.0, 0.0, math.e)

    @property
    def is_power_log(self) -> bool:
        return self.warp_params is not None

    def area_density(self, r):
        """``omega_N f(r)^{N-1}``: area of the geodesic sphere of radius r."""
        return self.sphere_area * self.warp(r) ** (self.dimension - 1)


@dataclass(frozen=True)
class DensityProfile:
    """Positive, nonincreasing radial density ``rho``.

    ``window = (alpha1, alpha2)`` is the monotonicity window of
    ``rho(s) s^alpha1`` (nonincreasing) and ``rho(s) s^alpha2`` (nondecreasing).
    """

    density: Callable[[np.ndarray], np.ndarray]
    decay_alpha: float
    params: dict | None = None
    window: tuple[float, float] | None = None
    breakpoints: tuple[float, ...] = ()

    @classmethod
    def power_log(cls, alpha: float, mu: float = 0.0, B: float = math.e,
                  window=None, scale: float = 1.0):
        if B < math.e:
            raise InvalidSpecError(f"B must be >= e, got {B}")
        if alpha < 0:
            raise InvalidSpecError("alpha must be >= 0")
        if scale <= 0:
            raise InvalidSpecError("density scale must be positive")
        density, core = _power_log_density(alpha, mu, B, scale)
        params = {"alpha": alpha, "mu": mu, "B": B, "scale": scale, "core": core}
        win = None if window is None else (float(window[0]), float(window[1]))
        return cls(density, alpha, params, win, breakpoints=(B,))

    @classmethod
    def uniform(cls, window=None):
        return cls.power_log(0.0, 0.0, math.e, window=window)

    def scaled(self, c: float) -> "DensityProfile":
        """Same profile multiplied by the positive constant ``c``."""
        if c <= 0:
            raise InvalidSpecError("scale must be positive")
        if self.params is not None:
            p = self.params
            return DensityProfile.power_log(p["alpha"], p["mu"], p["B"], self.window,
                                            p["scale"] * c)
        base = self.density
        return DensityProfile(lambda r: c * base(r), self.decay_alpha, None,
                              self.window, self.breakpoints)

    def __call__(self, r):
        return self.density(r)


# ---------------------------------------------------------------------------
# tabulation


class CumulativeIntegral:
    """``F(x) = int_0^x g(r) dr`` for an integrand behaving like ``c r^e`` near 0.

    Values at the nodes are accumulated once; evaluation between nodes adds a
    Gauss panel on the last partial interval, so the result is exact up to
    quadrature rounding rather than an interpolant.
    """

    def __init__(self, integrand, nodes, zero_power, breakpoints=()):
        self.g = integrand
        self.nodes = np.asarray(nodes, dtype=float)
        self.e = float(zero_power)
        if self.e <= -1:
            raise NumericError("integrand not integrable at the origin")
        self.breakpoints = breakpoints
        x = self.nodes
        pieces = np.empty(x.size - 1)
        pieces[0] = self._head(x[1])
        pieces[1:] = radial_integral(self.g, x[1:-1], x[2:], breakpoints)
        if not np.all(np.isfinite(pieces)):
            raise NumericError("non-finite quadrature on tabulation grid")
        self.values = np.concatenate(([0.0], np.cumsum(pieces)))

    def _head(self, x):
        # leading-order power law on [0, r_min]
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, self.g(np.maximum(x, 1e-300)) * x / (self.e + 1.0), 0.0)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        idx = np.clip(np.searchsorted(self.nodes, x, side="right") - 1, 0, self.nodes.size - 2)
        out = np.empty(x.shape)
        head = idx == 0
        out[head] = self._head(x[head])
        rest = ~head
        if rest.any():
            lo = self.nodes[idx[rest]]
            out[rest] = self.values[idx[rest]] + radial_integral(self.g, lo, x[rest])
        return out[0] if scalar else out

    def adaptive(self, x, tol=1e-10):
        """Adaptive (QUADPACK) value and error estimate, for cross-checks."""
        pts = [bp for bp in self.breakpoints if 0 < bp < x]
        val, err = integrate.quad(lambda r: float(self.g(np.asarray(r))), 0.0, x,
                                  points=pts or None, epsabs=tol, epsrel=tol, limit=500)
        return val, err


def _strictly_increasing(y, rtol=0.0):
    dy = np.diff(y)
    return bool(np.all(dy > rtol * np.abs(y[1:])))


class MonotoneTable:
    """Strictly increasing tabulation ``x -> y`` with exact-function inversion.

    ``__call__`` evaluates the exact function when one is given and otherwise
    interpolates (monotone cubic in log-log coordinates); :meth:`invert`
    brackets on the table and then solves ``exact(x) = y`` by Brent's method
    inside the bracket.
    """

    def __init__(self, x, y, exact=None, name="table"):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if not _strictly_increasing(x):
            raise ValueError("abscissae must be strictly increasing")
        if not _strictly_increasing(y):
            bad = int(np.argmin(np.diff(y)))
            raise InvalidAssumptionError(
                f"{name} is not strictly increasing near r={x[bad]:.6g}")
        self.x, self.y, self.exact, self.name = x, y, exact, name
        pos = (x > 0) & (y > 0)
        self._interp = PchipInterpolator(np.log(x[pos]), np.log(y[pos]), extrapolate=False)
        self._xmin = x[pos][0]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x > self.x[-1] * (1 + 1e-12)):
            raise RangeError(f"{self.name}: argument beyond tabulated range {self.x[-1]:.6g}")
        if self.exact is not None:
            return self.exact(np.maximum(x, 0.0))
        with np.errstate(divide="ignore"):
            return np.exp(self._interp(np.log(np.maximum(x, self._xmin))))

    def interpolate(self, x):
        """Monotone log-log interpolant (no exact-function evaluation)."""
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return np.exp(self._interp(np.log(np.maximum(x, self._xmin))))

    def invert(self, y):
        y = np.asarray(y, dtype=float)
        scalar = y.ndim == 0
        ys = np.atleast_1d(y)
        out = np.array([self._invert_one(v) for v in ys])
        return out[0] if scalar else out

    def _invert_one(self, v):
        if v < 0 or not np.isfinite(v):
            raise RangeError(f"{self.name}: cannot invert {v}")
        if v > self.y[-1] * (1 + 1e-12):
            raise RangeError(
                f"{self.name}: value {v:.6g} beyond tabulated range {self.y[-1]:.6g}")
        if v == 0.0:
            if self.y[0] == 0.0 or self.x[0] == 0.0:
                return 0.0
            raise RangeError(f"{self.name}: zero not attained")
        j = int(np.searchsorted(self.y, v))
        if j < self.y.size and self.y[j] == v:
            return float(self.x[j])
        if j == self.y.size:
            return float(self.x[-1])
        if self.exact is None:
            return float(np.exp(np.interp(np.log(v), np.log(self.y[self.y > 0]),
                                          np.log(self.x[self.y > 0]))))
        if j == 0:
            lo = self.x[0]
            hi = self.x[0]
            for _ in range(200):
                lo *= 1e-3
                if self.exact(lo) < v:
                    break
            else:
                raise RangeError(f"{self.name}: cannot bracket {v}")
        else:
            lo, hi = self.x[j - 1], self.x[j]
        fn = lambda r: float(self.exact(r)) - v  # noqa: E731
        return optimize.brentq(fn, lo, hi, xtol=1e-300 if lo == 0 else 1e-15 * lo,
                               rtol=4 * np.finfo(float).eps, maxiter=400)


class GeometricBundle:
    """Immutable tabulation of the geometric functions for one (manifold, density).

    Parameters
    ----------
    manifold, density:
        the profiles.
    r_max:
        upper end of the tabulation; evaluations beyond it raise ``RangeError``.
    nodes:
        number of log-uniform nodes on ``[r_min, r_max]``.
    """

    def __init__(self, manifold: ManifoldProfile, density: DensityProfile,
                 r_max: float = 1e6, nodes: int = 2048, r_min: float = 1e-6):
        if r_max <= r_min:
            raise RangeError("r_max must exceed r_min")
        if manifold.is_power_log and density.params is not None:
            if density.params["B"] < manifold.warp_params["A"]:
                raise InvalidSpecError("B >= A >= e is required")
        self.manifold = manifold
        self.density = density
        self.N = manifold.dimension
        self.r_max = float(r_max)
        self.r_min = float(r_min)
        self.breakpoints = tuple(sorted(set(manifold.breakpoints + density.breakpoints)))
        grid = np.geomspace(r_min, r_max, nodes)
        extra = [bp for bp in self.breakpoints if r_min < bp < r_max]
        self.r = np.unique(np.concatenate(([0.0], grid, extra)))
        N = self.N
        self._vol = CumulativeIntegral(manifold.area_density, self.r, N - 1, self.breakpoints)
        self._wvol = CumulativeIntegral(
            lambda s: density(s) * manifold.area_density(s), self.r, N - 1, self.breakpoints)
        self._psi_cache: dict = {}

    # -- basic profiles --------------------------------------------------
    def rho(self, r):
        return self.density(r)

    def warp(self, r):
        return self.manifold.warp(r)

    def _check_radius(self, R):
        R = np.asarray(R, dtype=float)
        if np.any(R < 0):
            raise RangeError("radius must be nonnegative")
        if np.any(R > self.r_max * (1 + 1e-12)):
            raise RangeError(f"radius beyond tabulation r_max={self.r_max:.6g}")
        return R

    # -- volume ----------------------------------------------------------
    def volume(self, R):
        """``V(R) = omega_N int_0^R f^{N-1}``."""
        return self._vol(self._check_radius(R))

    def volume_adaptive(self, R, tol=1e-10):
        """Adaptive-quadrature ``V(R)`` with its error estimate."""
        self._check_radius(R)
        return self._vol.adaptive(float(R), tol)

    def weighted_volume(self, R):
        """``int_{B_R} rho dmu``."""
        return self._wvol(self._check_radius(R))

    @cached_property
    def volume_table(self) -> MonotoneTable:
        return MonotoneTable(self.r, self._vol.values, self.volume, "V")

    def inv_volume(self, v):
        return self.volume_table.invert(v)

    def area(self, R):
        """``omega_N f(R)^{N-1} = V'(R)``."""
        return self.manifold.area_density(self._check_radius(R))

    def isoperimetric_h(self, v):
        """Ball isoperimetric profile ``h(v) = omega_N f(V^{-1}(v))^{N-1}``."""
        v = np.asarray(v, dtype=float)
        if np.any(v <= 0):
            raise RangeError("h is evaluated for v > 0")
        return self.area(self.inv_volume(v))

    def omega_iso(self, v):
        """``omega(v) = v^{(N-1)/N} / h(v)``."""
        v = np.asarray(v, dtype=float)
        return v ** ((self.N - 1) / self.N) / self.isoperimetric_h(v)

    def omega_of_radius(self, R):
        """``omega(V(R))`` without inversion."""
        R = self._check_radius(R)
        return self.volume(R) ** ((self.N - 1) / self.N) / self.area(R)

    # -- weighted volume --------------------------------------------------
    def vol_rho(self, R):
        """``V_rho(R) = rho(R) V(R)``."""
        R = self._check_radius(R)
        return self.rho(R) * self.volume(R)

    @cached_property
    def vol_rho_values(self) -> np.ndarray:
        return self.rho(self.r) * self._vol.values

    @cached_property
    def vol_rho_table(self) -> MonotoneTable:
        return MonotoneTable(self.r, self.vol_rho_values, self.vol_rho, "V_rho")

    def inv_vol_rho(self, s):
        """``R_rho = V_rho^{-1}``; raises ``InvalidAssumptionError`` if V_rho is not monotone."""
        return self.vol_rho_table.invert(s)

    # -- characteristic function ------------------------------------------
    def psi(self, p, m, R):
        """``psi(R) = V_rho(R)^{p+m-3} rho(R) R^p``."""
        R = self._check_radius(R)
        e = p + m - 3.0
        Rs = np.atleast_1d(R)
        out = np.empty(Rs.shape)
        pos = Rs > 0
        out[pos] = self.vol_rho(Rs[pos]) ** e * self.rho(Rs[pos]) * Rs[pos] ** p
        # psi(0+) = 0 iff N(p+m-3) + p > 0 (psi ~ R^{N(p+m-3)+p} near the origin)
        out[~pos] = 0.0 if self.N * e + p > 0 else np.inf
        return float(out[0]) if R.ndim == 0 else out

    def psi_values(self, p, m) -> np.ndarray:
        """psi on the positive tabulation nodes."""
        return self.psi(p, m, self.r[1:])

    def psi_table(self, p, m) -> MonotoneTable:
        key = (float(p), float(m))
        if key not in self._psi_cache:
            vals = self.psi_values(p, m)
            try:
                tab = MonotoneTable(self.r[1:], vals, lambda R: self.psi(p, m, R), "psi")
            except InvalidAssumptionError as exc:
                self._psi_cache[key] = exc
            else:
                self._psi_cache[key] = tab
        tab = self._psi_cache[key]
        if isinstance(tab, Exception):
            raise RegimeError(
                "psi not invertible; the increasing-psi hypotheses of the sup "
                f"estimate fail ({tab})")
        return tab

    def psi_increasing(self, p, m) -> bool:
        try:
            self.psi_table(p, m)
        except RegimeError:
            return False
        return True

    def z_tilde(self, p, m, s):
        """``Z~ = psi^{-1}``."""
        s = np.asarray(s, dtype=float)
        tab = self.psi_table(p, m)
        if np.any(s < 0):
            raise RangeError("z_tilde needs s >= 0")
        if np.ndim(s) == 0:
            return 0.0 if s == 0 else float(tab.invert(s))
        out = np.zeros(s.shape)
        pos = s > 0
        out[pos] = tab.invert(s[pos])
        return out

    def characteristic_W(self, p, s):
        """``W(s) = rho(R_rho(s)) R_rho(s)^p s^{-(p-alpha2)/(N-alpha1)}``."""
        if self.density.window is None:
            raise InvalidSpecError("characteristic_W needs the density window (alpha1, alpha2)")
        a1, a2 = self.density.window
        s = np.asarray(s, dtype=float)
        if np.any(s <= 0):
            raise RangeError("W is defined for s > 0")
        R = self.inv_vol_rho(s)
        return self.rho(R) * R**p * s ** (-(p - a2) / (self.N - a1))

    # -- export ----------------------------------------------------------
    def to_csv(self, path, p=None, m=None):
        """Write ``r, V, h, omega, vol_rho[, psi]`` at the positive nodes."""
        r = self.r[1:]
        V = self._vol.values[1:]
        h = self.manifold.area_density(r)
        cols = {"r": r, "V": V, "h": h, "omega": V ** ((self.N - 1) / self.N) / h,
                "vol_rho": self.vol_rho_values[1:]}
        if p is not None and m is not None:
            cols["psi"] = self.psi_values(p, m)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(list(cols))
            for row in zip(*cols.values()):
                w.writerow([repr(float(x)) for x in row])


# module-level aliases mirroring the method names
def volume(bundle: GeometricBundle, R):
    return bundle.volume(R)


def isoperimetric_h(bundle: GeometricBundle, v):
    return bundle.isoperimetric_h(v)


def vol_rho(bundle: GeometricBundle, R):
    return bundle.vol_rho(R)


def inv_vol_rho(bundle: GeometricBundle, s):
    return bundle.inv_vol_rho(s)


def psi(bundle: GeometricBundle, p, m, R):
    return bundle.psi(p, m, R)


def z_tilde(bundle: GeometricBundle, p, m, s):
    return bundle.z_tilde(p, m, s)


def characteristic_W(bundle: GeometricBundle, p, s):
    return bundle.characteristic_W(p, s)
