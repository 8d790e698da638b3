"""Radial finite-volume integrator for the weighted doubly nonlinear equation.

The state is a vector of rho-weighted cell averages on a radial grid.  Fluxes
are written for w = u^q, q = (p+m-2)/(p-1), which turns the edge law into a
p-Laplacian flux of w and makes vacuum an exact fixed point.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import _kernels as kern
from .errors import (InvalidSpecError, RangeError, SchemeFailureError,
                     StiffnessError)
from .geometry import GeometricBundle, radial_integral


# ---------------------------------------------------------------------------
# grid


@dataclass
class RadialGrid:
    """Cells [r_i, r_{i+1}] with plain and rho-weighted volumes."""

    edges: np.ndarray
    bundle: GeometricBundle
    kind: str = "uniform"
    stretch: float = 1.0
    w: np.ndarray = field(init=False, repr=False)
    wrho: np.ndarray = field(init=False, repr=False)
    area: np.ndarray = field(init=False, repr=False)
    centers: np.ndarray = field(init=False, repr=False)
    dcen: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=float)
        if e.ndim != 1 or e.size < 3 or e[0] != 0.0 or np.any(np.diff(e) <= 0):
            raise InvalidSpecError("edges must start at 0 and increase strictly")
        self.edges = e
        man = self.bundle.manifold
        bps = tuple(man.breakpoints) + tuple(self.bundle.density.breakpoints)
        a, b = e[:-1], e[1:]
        self.w = radial_integral(man.area_density, a, b, bps)
        self.wrho = radial_integral(
            lambda r: man.area_density(r) * self.bundle.rho(r), a, b, bps)
        if np.any(self.w <= 0) or np.any(self.wrho <= 0):
            raise InvalidSpecError("degenerate cell volumes")
        self.area = man.area_density(e)
        self.centers = 0.5 * (a + b)
        d = np.empty(e.size)
        d[1:-1] = np.diff(self.centers)
        d[0] = d[-1] = 1.0  # boundary edges carry no flux
        self.dcen = d

    @classmethod
    def uniform(cls, bundle, K: int, R_max: float) -> "RadialGrid":
        if K < 4 or R_max <= 0:
            raise InvalidSpecError("need K >= 4 and R_max > 0")
        return cls(np.linspace(0.0, R_max, K + 1), bundle, "uniform")

    @classmethod
    def stretched(cls, bundle, dr: float, r_core: float, R_max: float,
                  ratio: float = 1.01) -> "RadialGrid":
        """Uniform spacing dr up to r_core, then cells growing by ``ratio``."""
        if not (dr > 0 and r_core >= 2 * dr and R_max > r_core and ratio >= 1):
            raise InvalidSpecError("bad stretched-grid parameters")
        n_core = int(round(r_core / dr))
        edges = list(np.linspace(0.0, n_core * dr, n_core + 1))
        edges = _grow(edges, dr, ratio, R_max)
        return cls(np.array(edges), bundle, "stretched", ratio)

    @property
    def K(self) -> int:
        return self.w.size

    @property
    def R_max(self) -> float:
        return float(self.edges[-1])

    @property
    def dr(self) -> float:
        """Width of the outermost cell (the uniform spacing on uniform grids)."""
        return float(self.edges[-1] - self.edges[-2])

    def extended(self, u: np.ndarray):
        """Grid with doubled R_max and the state re-embedded conservatively.

        Uniform grids are coarsened pairwise so the cell count stays fixed;
        stretched grids keep their cells and append geometric ones.
        """
        m = self.wrho * u
        if self.kind == "uniform":
            K = self.K - (self.K % 2)
            new = RadialGrid.uniform(self.bundle, self.K, 2 * self.R_max)
            mass = np.zeros(new.K)
            mass[: K // 2] = m[:K:2] + m[1:K:2]
            if K != self.K:
                mass[K // 2] += m[-1]
            return new, mass / new.wrho
        edges = _grow(list(self.edges), self.dr, self.stretch, 2 * self.R_max)
        new = RadialGrid(np.array(edges), self.bundle, "stretched", self.stretch)
        out = np.zeros(new.K)
        out[: self.K] = m / new.wrho[: self.K]
        return new, out

    def params(self) -> dict:
        return {"kind": self.kind, "stretch": self.stretch,
                "edges": self.edges.tolist()}


def _grow(edges, dr, ratio, R_max):
    h = dr
    while edges[-1] < R_max * (1 - 1e-12):
        h *= ratio
        edges.append(edges[-1] + h)
    return edges


# ---------------------------------------------------------------------------
# state and configuration


@dataclass
class RadialState:
    """Cell averages u_i >= 0 at time t."""

    t: float
    u: np.ndarray
    grid: RadialGrid
    eps_supp: float = 1e-10

    @property
    def sup(self) -> float:
        return float(self.u.max())

    @property
    def mass(self) -> float:
        return float(np.dot(self.grid.wrho, self.u))

    @property
    def support_radius(self) -> float:
        i = kern.support_index(self.u, self.eps_supp)
        return 0.0 if i < 0 else float(self.grid.edges[i + 1])

    def mass_in_ball(self, R: float) -> float:
        """rho-weighted mass in B_R, counting a partial cell by volume fraction."""
        g = self.grid
        j = int(np.searchsorted(g.edges, R, side="right")) - 1
        j = min(max(j, 0), g.K)
        total = float(np.dot(g.wrho[:j], self.u[:j]))
        if j < g.K and R > g.edges[j]:
            part = radial_integral(
                lambda r: g.bundle.manifold.area_density(r) * g.bundle.rho(r),
                g.edges[j], min(R, g.edges[j + 1]),
                tuple(g.bundle.manifold.breakpoints) + tuple(g.bundle.density.breakpoints))[0]
            total += part * self.u[j]
        return total

    def copy(self) -> "RadialState":
        return replace(self, u=self.u.copy())

    def to_json(self, path=None) -> str:
        text = json.dumps({"t": self.t, "eps_supp": self.eps_supp,
                           "grid": self.grid.params(), "u": self.u.tolist()})
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_json(cls, text_or_path, bundle: GeometricBundle) -> "RadialState":
        text = str(text_or_path)
        if not text.lstrip().startswith("{"):
            with open(text) as fh:
                text = fh.read()
        d = json.loads(text)
        g = d["grid"]
        grid = RadialGrid(np.array(g["edges"]), bundle, g["kind"], g["stretch"])
        return cls(float(d["t"]), np.array(d["u"], dtype=float), grid,
                   float(d["eps_supp"]))


@dataclass
class SolverConfig:
    p: float
    m: float
    K: int = 2048
    R_max: float = 10.0
    cfl: float = 0.4
    eps_supp: float = 1e-10
    eps_grad: float = 1e-12
    max_steps: int = 10 ** 10
    auto_extend: bool = True
    r_max_limit: float = math.inf
    grid: str = "uniform"
    r_core: float | None = None
    stretch: float = 1.01

    def __post_init__(self):
        if not (self.p > 1):
            raise InvalidSpecError("p must exceed 1")
        if self.p + self.m - 3 <= 0:
            raise InvalidSpecError("time integration needs p + m - 3 > 0")
        if not (0 < self.cfl <= 1):
            raise InvalidSpecError("cfl must lie in (0, 1]")
        if self.eps_supp <= 0:
            raise InvalidSpecError("eps_supp must be positive")
        if self.grid not in ("uniform", "stretched"):
            raise InvalidSpecError("grid must be 'uniform' or 'stretched'")

    @property
    def q(self) -> float:
        return kern.kappa_and_power(self.p, self.m)[0]

    @property
    def kappa(self) -> float:
        return kern.kappa_and_power(self.p, self.m)[1]

    def make_grid(self, bundle: GeometricBundle) -> RadialGrid:
        if self.grid == "uniform":
            return RadialGrid.uniform(bundle, self.K, self.R_max)
        r_core = self.r_core if self.r_core is not None else self.R_max / 4
        dr = r_core / self.K
        return RadialGrid.stretched(bundle, dr, r_core, self.R_max, self.stretch)

    def to_dict(self) -> dict:
        d = asdict(self)
        if math.isinf(d["r_max_limit"]):
            d["r_max_limit"] = None
        return d


# ---------------------------------------------------------------------------
# initial data


def _snap_radius(grid: RadialGrid, R0: float) -> float:
    j = int(np.searchsorted(grid.edges, R0 * (1 + 1e-12), side="right")) - 1
    if j < 2:
        raise InvalidSpecError("R0 must span at least two cells")
    return float(grid.edges[j])


def bump_profile(R0: float):
    return lambda r: np.clip(1.0 - (np.asarray(r) / R0) ** 2, 0.0, None) ** 2


def cell_averages(grid: RadialGrid, fn, support=None) -> np.ndarray:
    """rho-weighted cell averages of ``fn``; kinks at ``support`` are respected."""
    b = grid.bundle
    bps = tuple(b.manifold.breakpoints) + tuple(b.density.breakpoints)
    if support is not None:
        bps = bps + (support,)
    ints = radial_integral(lambda r: fn(r) * b.manifold.area_density(r) * b.rho(r),
                           grid.edges[:-1], grid.edges[1:], bps)
    return ints / grid.wrho


def bump_amplitude(grid: RadialGrid, R0: float, mass: float) -> float:
    """Peak value c making c(1-(r/R0)^2)_+^2 carry the given weighted mass."""
    R = _snap_radius(grid, R0)
    b = grid.bundle
    bps = tuple(b.manifold.breakpoints) + tuple(b.density.breakpoints)
    bump = bump_profile(R)
    total = radial_integral(lambda r: bump(r) * b.manifold.area_density(r) * b.rho(r),
                            0.0, R, bps)[0]
    return mass / total


def init_bump(grid: RadialGrid, R0: float, mass: float, t0: float = 0.0,
              eps_supp: float = 1e-10) -> RadialState:
    """Compactly supported bump c(1-(r/R0)^2)_+^2 normalized to ``mass``.

    R0 is snapped down to the nearest cell edge so the discrete support stays
    inside B_{R0}.
    """
    if mass <= 0:
        raise InvalidSpecError("mass must be positive")
    if not (0 < R0 < grid.R_max / 4):
        raise InvalidSpecError("need 0 < R0 < R_max/4")
    R = _snap_radius(grid, R0)
    u = cell_averages(grid, bump_profile(R), support=R)
    u[grid.edges[1:] > R] = 0.0
    u *= mass / float(np.dot(grid.wrho, u))
    return RadialState(float(t0), u, grid, eps_supp)


def init_profile(grid: RadialGrid, fn, t0: float, support=None,
                 eps_supp: float = 1e-10) -> RadialState:
    u = np.clip(cell_averages(grid, fn, support), 0.0, None)
    return RadialState(float(t0), u, grid, eps_supp)


# ---------------------------------------------------------------------------
# single-step API


def all_fluxes(state: RadialState, config: SolverConfig):
    """Interface fluxes F_0..F_K (positive = outward) and the secant coefficients."""
    g = state.grid
    K = g.K
    F, c, s = np.empty(K + 1), np.empty(K + 1), np.empty(K + 1)
    eps = config.eps_grad if config.p < 2 else 0.0
    kern.edge_fluxes(state.u, g.area, g.dcen, config.q, config.kappa,
                     float(config.p), eps, F, c, s)
    return F, c * s


def flux(state: RadialState, i_edge: int, config: SolverConfig) -> float:
    """Flux through edge ``i_edge`` (0 = origin, K = outer wall)."""
    if not (0 <= i_edge <= state.grid.K):
        raise RangeError("edge index out of range")
    if i_edge in (0, state.grid.K):
        return 0.0
    return float(all_fluxes(state, config)[0][i_edge])


def stable_dt(state: RadialState, config: SolverConfig) -> float:
    """Largest step keeping every update a convex combination of neighbours."""
    _, cs = all_fluxes(state, config)
    rate = (cs[:-1] + cs[1:]) / state.grid.wrho
    top = rate.max()
    return math.inf if top == 0 else config.cfl / top


def step(state: RadialState, config: SolverConfig, dt: float | None = None) -> RadialState:
    """One explicit conservative update; returns a new state."""
    g = state.grid
    F, cs = all_fluxes(state, config)
    rate = ((cs[:-1] + cs[1:]) / g.wrho).max()
    if dt is None:
        dt = 1.0 if rate == 0 else config.cfl / rate
    if state.t > 0 and dt < 1e-15 * state.t:
        raise StiffnessError(f"time step {dt:g} underflows at t={state.t:g}")
    u = state.u + dt * (F[:-1] - F[1:]) / g.wrho
    sup = state.sup
    neg = u < 0
    if neg.any():
        worst = -u[neg].min() / sup
        if worst > kern.UNDERSHOOT_TOL:
            raise SchemeFailureError(f"undershoot {worst:.3e} x sup")
        u[neg] = 0.0
    return RadialState(state.t + dt, u, g, state.eps_supp)


# ---------------------------------------------------------------------------
# long runs


@dataclass
class RunSeries:
    """Observation time series of a run plus bookkeeping."""

    t: np.ndarray
    sup: np.ndarray
    support_radius: np.ndarray
    mass: np.ndarray
    rmax: np.ndarray
    mass_in_ball: np.ndarray | None
    steps: int
    worst_undershoot: float
    max_mass_drift: float
    extensions: int
    truncated: bool
    warnings: list
    final: RadialState
    interior_mass_drift: float = 0.0
    interior_steps: int = 0

    def to_csv(self, path):
        cols = ["t", "sup", "support_radius", "mass", "rmax"]
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(cols + (["mass_in_ball"] if self.mass_in_ball is not None else []))
            for i in range(self.t.size):
                row = [repr(float(getattr(self, c)[i])) for c in cols]
                if self.mass_in_ball is not None:
                    row.append(repr(float(self.mass_in_ball[i])))
                wr.writerow(row)

    def drift_per_million_steps(self, interior=False) -> float:
        if interior:
            return self.interior_mass_drift / max(1.0, self.interior_steps / 1e6)
        return self.max_mass_drift / max(1.0, self.steps / 1e6)


def observation_times(t0, t_end, observe_every=None, n_log=None):
    if observe_every is not None:
        n = int(math.floor((t_end - t0) / observe_every + 1e-9))
        ts = t0 + observe_every * np.arange(1, n + 1)
        if ts.size == 0 or ts[-1] < t_end * (1 - 1e-12):
            ts = np.append(ts, t_end)
        return ts
    n = n_log or 40
    return np.geomspace(max(t0, 1e-300), t_end, n + 1)[1:]


def run(state: RadialState, config: SolverConfig, t_end: float,
        observe_every: float | None = None, times=None, ball_radius=None,
        check_every: int = 64) -> RunSeries:
    """March to ``t_end`` recording (t, sup, support_radius, mass) at observations.

    With ``auto_extend`` the domain doubles whenever the support comes within
    four cells of the outer wall (until ``r_max_limit``); otherwise a
    truncation warning is recorded once the wall is reached.  Mass drift is
    tracked over the whole run and, separately, up to the first truncation.
    """
    if t_end < state.t:
        raise RangeError("t_end precedes the current time")
    st = state.copy()
    if times is None:
        times = [] if t_end == st.t else observation_times(st.t, t_end, observe_every)
    times = np.asarray(sorted(x for x in times if st.t < x <= t_end), dtype=float)
    q, kappa = config.q, config.kappa
    eps = config.eps_grad if config.p < 2 else 0.0
    m0 = st.mass
    rec = {k: [] for k in ("t", "sup", "support_radius", "mass", "rmax", "ball")}
    steps, worst, drift, n_ext = 0, 0.0, 0.0, 0
    truncated = False
    drift_in, steps_in = 0.0, 0
    notes = []
    can_extend = config.auto_extend
    watch = True
    for t_obs in times:
        while st.t < t_obs:
            g = st.grid
            ext_index = g.K - 4 if watch else -1
            t_new, n, status, wst = kern.march(
                st.u, g.wrho, g.area, g.dcen, q, kappa, float(config.p), config.cfl,
                eps, st.t, float(t_obs), config.max_steps - steps, st.eps_supp,
                ext_index, check_every)
            st.t = float(t_new)
            steps += int(n)
            worst = max(worst, float(wst))
            if status == kern.UNDERSHOOT:
                raise SchemeFailureError(f"undershoot {wst:.3e} x sup at t={st.t:g}")
            if status == kern.STIFF:
                raise StiffnessError(f"time step underflow at t={st.t:g}")
            if status == kern.MAX_STEPS:
                raise StiffnessError(f"max_steps={config.max_steps} exhausted at t={st.t:g}")
            if status == kern.EXTEND:
                if can_extend and 2 * g.R_max <= config.r_max_limit * (1 + 1e-12):
                    grid, u = g.extended(st.u)
                    st = RadialState(st.t, u, grid, st.eps_supp)
                    n_ext += 1
                else:
                    if not truncated:
                        drift = max(drift, abs(st.mass - m0) / m0 if m0 else 0.0)
                        drift_in, steps_in = drift, steps
                    truncated = True
                    watch = False
                    msg = (f"support reached the outer wall R_max={g.R_max:g} "
                           f"at t={st.t:g}; later values are truncated")
                    notes.append(msg)
                    warnings.warn(msg, RuntimeWarning, stacklevel=2)
        mass = st.mass
        drift = max(drift, abs(mass - m0) / m0 if m0 else 0.0)
        if not truncated:
            drift_in, steps_in = drift, steps
        rec["t"].append(st.t)
        rec["sup"].append(st.sup)
        rec["support_radius"].append(st.support_radius)
        rec["mass"].append(mass)
        rec["rmax"].append(st.grid.R_max)
        if ball_radius is not None:
            rec["ball"].append(st.mass_in_ball(ball_radius))
    arr = {k: np.asarray(v, dtype=float) for k, v in rec.items()}
    return RunSeries(arr["t"], arr["sup"], arr["support_radius"], arr["mass"],
                     arr["rmax"], arr["ball"] if ball_radius is not None else None,
                     steps, worst, drift, n_ext, truncated, notes, st, drift_in, steps_in)
