"""Empirical constants of the functional inequalities on radial test functions.

Test functions are piecewise linear in r on a node array.  Every integral is
evaluated cell by cell with a Gauss rule on the exact set where the integrand
is active, so level sets {u > k} are resolved by the exact linear root in each
crossing cell and gradients are the exact slopes of the interpolant.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidAssumptionError, InvalidSpecError
from .geometry import GeometricBundle, gauss_integrate
from .theory import AssumptionReport, _window

INEQUALITY_IDS = ("sobolev_weighted", "hardy", "faber_krahn", "faber_krahn_s",
                  "emb_old", "emb_old_p", "sgn", "sgns", "sgn_W", "sgns_W")


# ---------------------------------------------------------------------------
# test functions


def radial_nodes(bundle: GeometricBundle, R_max: float, K: int) -> np.ndarray:
    """Uniform nodes on [0, R_max] with the profile kinks inserted."""
    r = np.linspace(0.0, R_max, K + 1)
    kinks = [b for b in (*bundle.manifold.breakpoints, *bundle.density.breakpoints)
             if 0 < b < R_max]
    return np.unique(np.concatenate([r, kinks]))


@dataclass
class RadialTestFunction:
    """Nonnegative piecewise-linear radial function u(r) with compact support."""

    r: np.ndarray
    u: np.ndarray
    bundle: GeometricBundle
    label: str = ""

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        if self.r.shape != self.u.shape or self.r[0] != 0 or np.any(np.diff(self.r) <= 0):
            raise InvalidSpecError("nodes must start at 0 and increase")
        if np.any(self.u < 0):
            raise InvalidSpecError("test functions must be nonnegative")
        if self.u[-1] != 0:
            raise InvalidSpecError("test function must vanish at the last node")

    @classmethod
    def sample(cls, bundle, fn, R_max: float, K: int, label: str = ""):
        r = radial_nodes(bundle, R_max, K)
        u = np.clip(np.asarray(fn(r), dtype=float), 0.0, None)
        u[-1] = 0.0
        return cls(r, u, bundle, label)

    def scaled(self, c: float) -> "RadialTestFunction":
        return RadialTestFunction(self.r, c * self.u, self.bundle, self.label)

    @property
    def sup(self) -> float:
        return float(self.u.max())

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.u) / np.diff(self.r)

    def __call__(self, x):
        return np.interp(x, self.r, self.u)

    # -- cellwise integration ------------------------------------------------
    def _active(self, k):
        """Per-cell sub-intervals where u > k (exact linear roots)."""
        a, b = self.r[:-1], self.r[1:]
        ua, ub = self.u[:-1], self.u[1:]
        lo, hi = a.copy(), b.copy()
        on = (ua > k) | (ub > k)
        with np.errstate(divide="ignore", invalid="ignore"):
            root = a + (k - ua) * (b - a) / (ub - ua)
        up = on & (ua <= k)           # enters the set inside the cell
        down = on & (ub <= k)         # leaves the set inside the cell
        lo[up] = root[up]
        hi[down] = root[down]
        return on, lo, hi

    def integrate(self, g, k: float = 0.0, weighted: bool = False):
        """int_{u>k} g(u(r), r) dmu  (or rho dmu), g vectorized in (u, r)."""
        on, lo, hi = self._active(k)
        if not on.any():
            return 0.0
        idx = np.nonzero(on)[0]
        r0, u0, sl = self.r[idx], self.u[idx], self.slopes[idx]
        area = self.bundle.manifold.area_density
        rho = self.bundle.rho

        def integrand(x):
            uu = u0[:, None] + sl[:, None] * (x - r0[:, None])
            val = g(uu, x) * area(x)
            return val * rho(x) if weighted else val

        return float(gauss_integrate(integrand, lo[idx], hi[idx]).sum())

    def moment(self, q: float, k: float = 0.0, weighted: bool = False) -> float:
        """int_{u>k} (u-k)^q dmu  (rho-weighted if requested)."""
        return self.integrate(lambda uu, x: np.clip(uu - k, 0.0, None) ** q, k, weighted)

    def grad_moment(self, p: float, k: float = 0.0) -> float:
        """int_{u>k} |u_r|^p dmu with the exact slope of the interpolant."""
        on, lo, hi = self._active(k)
        if not on.any():
            return 0.0
        vol = self.bundle._vol
        cell = vol(hi[on]) - vol(lo[on])
        return float(np.dot(np.abs(self.slopes[on]) ** p, cell))

    def level_measure(self, k: float, weighted: bool = False) -> float:
        """mu({u > k}) or mu_rho({u > k})."""
        return self.integrate(lambda uu, x: np.ones_like(uu), k, weighted)

    def support_radius(self) -> float:
        nz = np.nonzero(self.u > 0)[0]
        return 0.0 if nz.size == 0 else float(self.r[min(nz[-1] + 1, self.r.size - 1)])


# ---------------------------------------------------------------------------
# rearrangement


@dataclass
class Rearrangement:
    """Decreasing rearrangement u*(s) = inf{lam : mu_lam < s} of a test function.

    The distribution mu_lam is assembled cell by cell: a cell is fully inside
    {u > lam} below its smaller end value and contributes V(root) - V(end)
    between its end values, with the exact linear root.
    """

    fn: RadialTestFunction
    levels: np.ndarray = field(init=False)
    measures: np.ndarray = field(init=False)

    def __post_init__(self):
        f = self.fn
        V = f.bundle._vol
        self._Vn = V(f.r)
        self._cell = np.diff(self._Vn)
        self._lo = np.minimum(f.u[:-1], f.u[1:])
        self._hi = np.maximum(f.u[:-1], f.u[1:])
        self.levels = np.unique(np.concatenate([[0.0], f.u]))
        self.measures = self.distribution(self.levels)

    def _partial(self, cells, lam):
        """Measure of {u > lam} inside the given crossing cells."""
        f = self.fn
        a, b = f.r[cells], f.r[cells + 1]
        ua, ub = f.u[cells], f.u[cells + 1]
        root = a + (lam - ua) * (b - a) / (ub - ua)
        Vr = f.bundle._vol(root)
        return np.where(ub > ua, self._Vn[cells + 1] - Vr, Vr - self._Vn[cells])

    def distribution(self, lam):
        """mu({u > lam}) for scalar or array lam."""
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        order = np.argsort(self._lo)
        lo_sorted = self._lo[order]
        csum = np.concatenate([[0.0], np.cumsum(self._cell[order][::-1])])[::-1]
        # full cells: lo_c > lam
        out = csum[np.searchsorted(lo_sorted, lam, side="right")].copy()
        for j, x in enumerate(lam):
            cells = np.nonzero((self._lo <= x) & (self._hi > x))[0]
            if cells.size:
                out[j] += self._partial(cells, x).sum()
        return out if out.size > 1 else float(out[0])

    @property
    def support_measure(self) -> float:
        return float(self.measures[0])

    def __call__(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.empty(s.shape)
        lv, ms = self.levels, self.measures   # ms is nonincreasing in lv
        for i, si in enumerate(s):
            if si >= ms[0]:
                out[i] = 0.0
                continue
            if si <= 0:
                out[i] = lv[-1]
                continue
            j = int(np.searchsorted(-ms, -si, side="right"))   # first level with mu < s
            lo, hi = lv[j - 1], lv[j]
            g = lambda x: self.distribution(x) - si
            if g(lo) <= 0:
                out[i] = lo
            elif g(hi) >= 0:
                out[i] = hi
            else:
                out[i] = brentq(g, lo, hi, xtol=1e-15 * max(hi, 1e-300), rtol=1e-15)
        return out if out.size > 1 else float(out[0])

    def moment(self, q: float) -> float:
        """int_0^inf u*(s)^q ds via the layer-cake formula int q lam^{q-1} mu_lam dlam."""
        total = float(np.dot(self._lo ** q, self._cell))
        cells = np.nonzero(self._hi > self._lo)[0]
        lo = self._lo[cells]
        hi = self._hi[cells]

        def integrand(lam):
            c = np.broadcast_to(cells[:, None], lam.shape)
            return q * lam ** (q - 1.0) * self._partial(c, lam)

        total += float(gauss_integrate(integrand, lo, hi).sum())
        return total


def rearrange(fn: RadialTestFunction) -> Rearrangement:
    return Rearrangement(fn)


# ---------------------------------------------------------------------------
# families


def bump_family(bundle, n: int = 100, seed: int = 0, R_max: float = 20.0,
                K: int = 1024, max_bumps: int = 3):
    """Seeded mixtures of 1..max_bumps bumps a(1-((r-c)/w)^2)_+^2.

    Widths are log-uniform in [R_max/100, R_max/4], centres uniform in
    [0, R_max/2], amplitudes uniform in [0.5, 2].
    """
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        nb = int(rng.integers(1, max_bumps + 1))
        c = rng.uniform(0.0, R_max / 2, nb)
        w = np.exp(rng.uniform(np.log(R_max / 100), np.log(R_max / 4), nb))
        a = rng.uniform(0.5, 2.0, nb)

        def fn(r, c=c, w=w, a=a):
            z = (r[:, None] - c) / w
            return (a * np.clip(1.0 - z**2, 0.0, None) ** 2).sum(axis=1)

        out.append(RadialTestFunction.sample(bundle, fn, R_max, K, f"bumps{i}"))
    return out


# ---------------------------------------------------------------------------
# records


@dataclass
class InequalityRecord:
    id: str
    params: dict
    lhs: np.ndarray
    rhs: np.ndarray
    flagged: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def ratios(self) -> np.ndarray:
        lhs, rhs = np.asarray(self.lhs), np.asarray(self.rhs)
        out = np.zeros(lhs.shape)
        nz = rhs > 0
        out[nz] = lhs[nz] / rhs[nz]
        out[~nz & (lhs > 0)] = np.inf
        return out

    @property
    def constant(self) -> float:
        r = self.ratios
        return float(r.max()) if r.size else 0.0

    @property
    def worst_index(self) -> int:
        return int(np.argmax(self.ratios)) if len(self.lhs) else -1

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.constant))

    def to_dict(self) -> dict:
        return {"id": self.id, "params": self.params, "constant": self.constant,
                "worst_index": self.worst_index, "passed": self.passed,
                "n": len(self.lhs), "flagged": self.flagged, "notes": self.notes,
                "lhs": list(map(float, self.lhs)), "rhs": list(map(float, self.rhs))}


def _require(report: AssumptionReport | None, *ids):
    if report is None:
        return
    bad = [i for i in ids if not report[i].passed]
    if bad:
        raise InvalidAssumptionError(f"assumptions failed: {', '.join(bad)}")


def _check_p(bundle, p):
    if not (1 < p < bundle.N):
        raise InvalidSpecError("inequalities need 1 < p < N")


def verify_hardy(family, p, report=None) -> InequalityRecord:
    """int u^p / r^p dmu <= gamma int |u_r|^p dmu."""
    if not family:
        return InequalityRecord("hardy", {"p": p}, np.zeros(0), np.zeros(0))
    bundle = family[0].bundle
    _require(report, "M_iso", "M_phyp", "M_isoup")
    flagged, lhs, rhs = [], [], []
    for i, fn in enumerate(family):
        if p >= bundle.N and fn.u[0] != 0:
            flagged.append(i)           # expected divergence at the origin
            lhs.append(0.0)
            rhs.append(1.0)
            continue
        lhs.append(fn.integrate(lambda uu, x: np.abs(uu) ** p / x ** p))
        rhs.append(fn.grad_moment(p))
    return InequalityRecord("hardy", {"p": p}, np.array(lhs), np.array(rhs), flagged)


def verify_weighted_sobolev(family, p, report=None) -> InequalityRecord:
    """(int u^{p*} omega(V(r))^{-p*} dmu)^{(N-p)/N} <= C int |u_r|^p dmu."""
    bundle = family[0].bundle
    _check_p(bundle, p)
    _require(report, "M_iso", "M_grow", "M_growup", "M_phyp")
    N = bundle.N
    ps = p * N / (N - p)
    lhs, rhs = [], []
    for fn in family:
        val = fn.integrate(lambda uu, x: np.abs(uu) ** ps * bundle.omega_of_radius(x) ** (-ps))
        lhs.append(val ** ((N - p) / N))
        rhs.append(fn.grad_moment(p))
    return InequalityRecord("sobolev_weighted", {"p": p, "p_star": ps},
                            np.array(lhs), np.array(rhs))


def _rho_R(bundle, s, p):
    """rho(R_rho(s)) R_rho(s)^p."""
    R = bundle.inv_vol_rho(s)
    return float(bundle.rho(R) * R ** p)


def verify_faber_krahn(family, p, k_levels=(0.0, 0.25, 0.5, 0.75, 0.95),
                       s=None, report=None) -> InequalityRecord:
    """int_{u>k} rho (u-k)^s dmu against the level-set bound; s=None means s=p.

    ``k_levels`` are fractions of sup u; empty level sets are skipped.
    """
    bundle = family[0].bundle
    _check_p(bundle, p)
    if s is None:
        _require(report, "dnf_inc", "close")
        ident, s = "faber_krahn", p
    else:
        _require(report, "close")
        ident = "faber_krahn_s"
    lhs, rhs, notes = [], [], []
    for i, fn in enumerate(family):
        for frac in k_levels:
            k = frac * fn.sup
            nu = fn.level_measure(k, weighted=True)
            if nu <= 0:
                notes.append(f"f{i} k={frac}: empty level set skipped")
                continue
            g = fn.grad_moment(p, k)
            lhs.append(fn.moment(s, k, weighted=True))
            rhs.append(_rho_R(bundle, nu, p) ** (s / p) * nu ** (1 - s / p) * g ** (s / p))
    params = {"p": p, "s": s, "k_levels": list(k_levels)}
    return InequalityRecord(ident, params, np.array(lhs), np.array(rhs), notes=notes)


def verify_faber_krahn_s(family, p, s, k_levels=(0.0, 0.25, 0.5, 0.75, 0.95),
                         report=None) -> InequalityRecord:
    if not (p < s < p * family[0].bundle.N / (family[0].bundle.N - p)):
        raise InvalidSpecError("need p < s < p*")
    return verify_faber_krahn(family, p, k_levels, s=s, report=report)


def fks_condition(bundle, p, s, n=400):
    """Quasi-monotonicity constant of rho(R) R^{N - s(N-p)/p}.

    Returns (C, tail_slope): C = max_{R<R1} g(R)/g(R1) over the tabulated range.
    """
    N = bundle.N
    R = np.geomspace(bundle.r_min * 10, bundle.r_max, n)
    g = bundle.rho(R) * R ** (N - s * (N - p) / p)
    C = float(np.max(np.maximum.accumulate(g) / g))
    tail = R > R[-1] / 10
    slope = float(np.polyfit(np.log(R[tail]), np.log(g[tail]), 1)[0])
    return C, slope


def _W(bundle, p, s, window):
    a1, a2 = window
    return _rho_R(bundle, s, p) * s ** (-(p - a2) / (bundle.N - a1))


def verify_interpolation(family, p, r, s, report=None) -> dict:
    """Records for emb_old (q=s), emb_old_p, sgn, sgns and their W forms."""
    bundle = family[0].bundle
    _check_p(bundle, p)
    N = bundle.N
    ps = p * N / (N - p)
    if not (0 < r < p < s < ps):
        raise InvalidSpecError("need 0 < r < p < s < p*")
    C_fks, slope = fks_condition(bundle, p, s)
    window, _ = _window(bundle, p)
    recs = {k: ([], []) for k in ("emb_old", "emb_old_p", "sgn", "sgns", "sgn_W", "sgns_W")}
    D = N * (p - r) + r * p
    for fn in family:
        I_r, I_q = fn.moment(r), fn.moment(s)
        G = fn.grad_moment(p)
        Sq = I_r ** (s / (s - r)) * I_q ** (-r / (s - r))
        recs["emb_old"][0].append(I_q)
        recs["emb_old"][1].append(float(bundle.omega_iso(Sq)) ** s
                                  * Sq ** (1 + s / N - s / p) * G ** (s / p))
        supp = fn.level_measure(0.0)
        recs["emb_old_p"][0].append(fn.moment(p))
        recs["emb_old_p"][1].append(float(bundle.omega_iso(supp)) ** (p * N * (p - r) / D)
                                    * I_r ** (p * p / D) * G ** (N * (p - r) / D))
        E_r, E_p, E_s = (fn.moment(x, weighted=True) for x in (r, p, s))
        S = E_r ** (p / (p - r)) / E_p ** (r / (p - r))
        Sig = E_r ** (s / (s - r)) * E_s ** (-r / (s - r))
        recs["sgn"][0].append(E_p)
        recs["sgn"][1].append(_rho_R(bundle, S, p) * G)
        recs["sgns"][0].append(E_s)
        recs["sgns"][1].append(_rho_R(bundle, Sig, p) ** (s / p) * Sig ** (1 - s / p)
                               * G ** (s / p))
        if window is not None:
            a1, a2 = window
            H = lambda x: (p - x) * (N - a1) + x * (p - a2)
            e = (p - r) * (N - a1) / H(r)
            recs["sgn_W"][0].append(E_p)
            recs["sgn_W"][1].append(E_r ** (p * (p - a2) / H(r))
                                    * (_W(bundle, p, S, window) * G) ** e)
            e = (s - r) * (N - a1) / H(r)
            recs["sgns_W"][0].append(E_s)
            recs["sgns_W"][1].append(E_r ** (H(s) / H(r))
                                     * (_W(bundle, p, Sig, window) * G) ** e)
    params = {"p": p, "r": r, "s": s, "fks_constant": C_fks, "fks_tail_slope": slope,
              "window": list(window) if window is not None else None}
    out = {}
    for k, (lh, rh) in recs.items():
        if lh:
            notes = [] if slope >= -0.02 else ["s outside the admissible fks range"]
            out[k] = InequalityRecord(k, dict(params), np.array(lh), np.array(rh), notes=notes)
    return out


def run_suite(family, p=2.0, r=1.0, s=2.5, report=None) -> dict:
    """All records on one family, keyed by inequality id."""
    recs = {"hardy": verify_hardy(family, p, report),
            "sobolev_weighted": verify_weighted_sobolev(family, p, report),
            "faber_krahn": verify_faber_krahn(family, p, report=report),
            "faber_krahn_s": verify_faber_krahn_s(family, p, s, report=report)}
    recs.update(verify_interpolation(family, p, r, s, report))
    return recs


def write_report(records: dict, path, extra=None):
    data = {"records": {k: v.to_dict() for k, v in records.items()},
            "constants": {k: v.constant for k, v in records.items()},
            "worst_index": {k: v.worst_index for k, v in records.items()}}
    if extra:
        data.update(extra)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2)
    return data


__all__ = ["RadialTestFunction", "Rearrangement", "rearrange", "bump_family",
           "InequalityRecord", "verify_hardy", "verify_weighted_sobolev",
           "verify_faber_krahn", "verify_faber_krahn_s", "verify_interpolation",
           "fks_condition", "run_suite", "write_report", "INEQUALITY_IDS"]
