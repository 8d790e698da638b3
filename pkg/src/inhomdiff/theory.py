"""Assumption checks, regime classification and predicted rates.

Every structural hypothesis on the manifold and the density is turned into a
numerical predicate evaluated on the bundle's tabulation nodes.  Monotonicity
predicates are adjacent-node comparisons with a relative tolerance; "bounded"
predicates fit the best constant over the grid and fail when the defining
ratio keeps growing like a power over the last decade of the tabulation.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidSpecError, RangeError, RegimeError
from .geometry import GeometricBundle, radial_integral

MONO_RTOL = 1e-8
TAIL_SLOPE_TOL = 0.02
IBL_R0 = 0.01

ASSUMPTION_IDS = (
    "M_iso", "M_grow", "M_growup", "M_phyp", "M_inc", "M_isoup",
    "dnf_dec", "dnf_inc", "dnf_vol", "close",
    "fsp_doubling", "unb_decay", "ibl_integral",
)
GEOMETRIC_IDS = ("M_iso", "M_grow", "M_growup", "M_phyp", "M_inc", "M_isoup")


@dataclass
class AssumptionCheck:
    id: str
    passed: bool
    fitted_constant: float
    worst_point: float
    detail: str = ""


@dataclass
class AssumptionReport:
    checks: dict[str, AssumptionCheck]

    def __getitem__(self, key) -> AssumptionCheck:
        return self.checks[key]

    def passed(self, *ids) -> bool:
        return all(self.checks[i].passed for i in ids)

    def to_dict(self):
        return {k: asdict(v) for k, v in self.checks.items()}


@dataclass
class TheoryReport:
    case: str
    lambda_: float
    sigma: float
    delta1: float
    delta2: float
    alpha_star: float
    eta: float
    flags: dict[str, bool]
    psi_increasing: bool = False
    assumptions: AssumptionReport | None = field(default=None, repr=False)

    def to_dict(self):
        d = asdict(self)
        d["lambda"] = d.pop("lambda_")
        d["assumptions"] = None if self.assumptions is None else self.assumptions.to_dict()
        return d


# ---------------------------------------------------------------------------
# helpers


def _validate(bundle: GeometricBundle, p, m):
    if not p > 1:
        raise InvalidSpecError(f"need p > 1, got p={p}")
    k = p + m - 3
    if k == 0:
        raise InvalidSpecError("p + m - 3 = 0 is excluded")
    if k < 0 and m <= 0:
        raise InvalidSpecError("singular case needs m > 0")
    win = bundle.density.window
    if win is not None:
        a1, a2 = win
        if not 0 < a1 < a2 < p:
            raise InvalidSpecError(f"window must satisfy 0 < alpha1 < alpha2 < p, got {win}")


def _window(bundle: GeometricBundle, p):
    """Configured window, or a default bracketing the decay exponent."""
    if bundle.density.window is not None:
        return bundle.density.window, "configured"
    a = bundle.density.decay_alpha
    if 0 < a < p:
        return (0.5 * a, 0.5 * (a + p)), "default (alpha/2, (alpha+p)/2)"
    return None, "no admissible default window"


def tail_start(bundle: GeometricBundle) -> float:
    """Radius beyond which the built-in profiles are pure power-log."""
    pts = [1.0]
    if bundle.manifold.is_power_log:
        pts.append(bundle.manifold.warp_params["A"])
    if bundle.density.params is not None:
        pts.append(bundle.density.params["B"])
    return max(pts)


def _monotone(r, g, increasing, start=0.0, rtol=MONO_RTOL):
    """Adjacent-node monotonicity test on ``r >= start``.

    Returns ``(passed, C, worst_point)`` where ``C`` is the quasi-monotonicity
    constant over the whole sample (``C = 1`` for an exactly monotone g).
    """
    sel = r >= start
    rs, gs = r[sel], g[sel]
    d = np.diff(gs)
    scale = np.maximum(np.abs(gs[1:]), np.abs(gs[:-1]))
    viol = (-d if increasing else d) / scale
    passed = bool(np.all(viol <= rtol))
    worst = float(rs[1:][np.argmax(viol)]) if viol.size else float("nan")
    if increasing:
        # max_{s>r} g(r)/g(s)
        run = np.maximum.accumulate(g)
        C = float(np.max(run / g))
    else:
        run = np.maximum.accumulate(g[::-1])[::-1]
        C = float(np.max(run / g))
    return passed, C, worst


def _bounded(r, ratio, slope_tol=TAIL_SLOPE_TOL):
    """Fitted sup of ``ratio`` and whether it stays bounded over the last decade."""
    if not np.all(np.isfinite(ratio)):
        return False, float("inf"), float(r[np.argmax(~np.isfinite(ratio))])
    i = int(np.argmax(ratio))
    tail = r >= r[-1] / 10.0
    slope = np.polyfit(np.log(r[tail]), np.log(ratio[tail]), 1)[0]
    return bool(slope <= slope_tol), float(ratio[i]), float(r[i])


def tail_slope(r, y, decades=1.0):
    """Least-squares log-log slope of y over the last ``decades`` of r."""
    sel = r >= r[-1] / 10.0**decades
    return float(np.polyfit(np.log(r[sel]), np.log(y[sel]), 1)[0])


# ---------------------------------------------------------------------------
# assumptions


def check_assumptions(bundle: GeometricBundle, p, m, r0=IBL_R0) -> AssumptionReport:
    """Evaluate every structural hypothesis on the tabulation grid."""
    _validate(bundle, p, m)
    r = bundle.r[1:]
    N = bundle.N
    s0 = tail_start(bundle)
    if math.log10(bundle.r_max / bundle.r_min) < 4 or bundle.r_max < 100 * s0:
        raise RangeError("tabulation must span 4 decades and reach 100*s0")
    V = bundle._vol.values[1:]
    dV = bundle.manifold.area_density(r)
    if not (np.all(np.isfinite(V)) and np.all(np.isfinite(dV))):
        raise RangeError("NaN in geometric tabulation")
    rho = bundle.rho(r)
    checks: dict[str, AssumptionCheck] = {}

    def add(cid, passed, C, worst, detail=""):
        checks[cid] = AssumptionCheck(cid, bool(passed), float(C), float(worst), detail)

    # M_iso: omega(v) = v^{(N-1)/N}/h(v) nondecreasing and h nondecreasing, h = ball profile
    omega = V ** ((N - 1) / N) / dV
    ok_w, C_w, w_w = _monotone(r, omega, increasing=True)
    ok_h, _, w_h = _monotone(r, dV, increasing=True)
    add("M_iso", ok_w and ok_h, C_w, w_w if not ok_w else w_h,
        "ball profile h(V(R)) = omega_N f(R)^{N-1}; omega and h nondecreasing")

    # M_grow / M_growup: with the ball profile V' = h(V) identically
    ratio = dV / bundle.manifold.area_density(r)
    add("M_grow", np.allclose(ratio, 1.0), float(np.min(ratio)), float(r[0]),
        "c h(V) <= V' with the ball profile: best c = 1 (any c in (0,1) works)")
    add("M_growup", np.allclose(ratio, 1.0), float(np.max(ratio)), float(r[0]),
        "V' <= h(V)/c with the ball profile: best 1/c = 1")

    # M_phyp: int_0^R V'(t) t^{-p} dt <= (1/c) V(R) R^{-p}   (substituting t = V(s))
    if p < N:
        phyp_int = _phyp_integral(bundle, p)
        ratio = phyp_int / (V / r**p)
        ok, C, w = _bounded(r, ratio)
        add("M_phyp", ok, C, w, "fitted constant is 1/c; fails if the ratio grows in the tail")
    else:
        add("M_phyp", False, math.inf, 0.0, "integral diverges at the origin for p >= N")

    # M_inc: V' <= N V / R
    ratio = r * dV / (N * V)
    add("M_inc", bool(np.all(ratio <= 1 + MONO_RTOL)), float(np.max(ratio)),
        float(r[np.argmax(ratio)]), "max of R V'/(N V)")

    # M_isoup: V/R <= h(V)/c
    ratio = V / (r * dV)
    ok, C, w = _bounded(r, ratio)
    add("M_isoup", ok, C, w, "fitted constant is 1/c")

    # density window
    win, how = _window(bundle, p)
    dens_tail = s0
    gt1 = r > 1.0
    if win is None:
        for cid in ("dnf_dec", "dnf_inc"):
            add(cid, False, float("nan"), float("nan"), how)
    else:
        a1, a2 = win
        ok, C, w = _monotone(r[gt1], rho[gt1] * r[gt1] ** a1, increasing=False, start=dens_tail)
        add("dnf_dec", ok, C, w,
            f"rho s^{a1:g} nonincreasing for s >= {dens_tail:.4g}; C = quasi-monotonicity "
            f"constant on (1, r_max); window {how}")
        ok, C, w = _monotone(r[gt1], rho[gt1] * r[gt1] ** a2, increasing=True, start=dens_tail)
        add("dnf_inc", ok, C, w,
            f"rho s^{a2:g} nondecreasing for s >= {dens_tail:.4g}; window {how}")

    vr = bundle.vol_rho_values
    dvr = np.diff(vr)
    ok = bool(np.all(dvr > 0))
    worst = float(bundle.r[1:][np.argmin(dvr)])
    add("dnf_vol", ok, float(np.min(dvr[1:] / vr[2:])) if vr.size > 2 else 0.0, worst,
        "V_rho strictly increasing; constant = min relative increment")

    # close: rho(s) omega(V(s))^{p*} nonincreasing for s > s0
    if p < N:
        pstar = N * p / (N - p)
        ok, C, w = _monotone(r, rho * omega**pstar, increasing=False, start=s0)
        add("close", ok, C, w, f"s0 = {s0:.4g}")
    else:
        add("close", False, math.nan, math.nan, "p* is undefined for p >= N")

    # fsp doubling: rho(r) <= C rho(2r)
    half = r <= bundle.r_max / 2
    ratio = rho[half] / bundle.rho(2 * r[half])
    ok, C, w = _bounded(r[half], ratio)
    add("fsp_doubling", ok, C, w, "C = max rho(r)/rho(2r)")

    add(*_unb_decay(bundle, p, r, rho))
    add(*_ibl_integral(bundle, p, m, r0))
    return AssumptionReport(checks)


def _phyp_integral(bundle, p):
    """``int_0^R omega_N f^{N-1} t^{-p} dt`` on the positive nodes."""
    from .geometry import CumulativeIntegral

    g = lambda t: bundle.manifold.area_density(t) * t ** (-p)  # noqa: E731
    ci = CumulativeIntegral(g, bundle.r, bundle.N - 1 - p, bundle.breakpoints)
    return ci.values[1:]


def _unb_decay(bundle, p, r, rho):
    gt1 = r > 1.0
    if bundle.density.params is not None:
        a_eff = bundle.density.decay_alpha
    else:
        a_eff = -tail_slope(r[gt1], rho[gt1])
    if not a_eff > p:
        return ("unb_decay", False, float("inf"), float("nan"),
                f"decay exponent {a_eff:.4g} <= p")
    a_use = 0.5 * (a_eff + p)
    ratio = rho[gt1] * r[gt1] ** a_use
    ok, C, w = _bounded(r[gt1], ratio)
    return ("unb_decay", ok, C, w, f"rho(t) <= C t^-{a_use:.4g} with {a_use:.4g} > p")


def _ibl_exponents(bundle, p, m, r):
    """Power and log exponents of ``(t^p rho)^r psi^{1/(p+m-3)}`` for the built-in family."""
    k = p + m - 3
    mp, dp = bundle.manifold.warp_params, bundle.density.params
    N = bundle.N
    alpha, mu = dp["alpha"], dp["mu"]
    beta, nu = mp["beta"], mp["nu"]
    lam = p - alpha + (1 + beta * (N - 1) - alpha) * k
    sig = nu * (N - 1) * k + mu * (p + m - 2)
    return r * (p - alpha) + lam / k, r * mu + sig / k


def _ibl_integral(bundle, p, m, r0):
    k = p + m - 3
    if k <= 0:
        return ("ibl_integral", False, float("nan"), float("nan"), "degenerate case only")
    nodes = bundle.r[bundle.r >= 1.0]
    nodes = np.concatenate(([1.0], nodes[nodes > 1.0]))
    builtin = bundle.manifold.is_power_log and bundle.density.params is not None
    values, converge = [], []
    for rr in (-r0, 0.0, r0):
        def g(t, rr=rr):
            t = np.asarray(t, dtype=float)
            flat = t.ravel()
            val = (flat**p * bundle.rho(flat)) ** rr * bundle.psi(p, m, flat) ** (1.0 / k) / flat
            return val.reshape(t.shape)

        body = float(np.sum(radial_integral(g, nodes[:-1], nodes[1:])))
        if not math.isfinite(body):
            raise RangeError("NaN in ibl integrand")
        if builtin:
            e, l = _ibl_exponents(bundle, p, m, rr)
            conv = e < -1e-12 or (abs(e) <= 1e-12 and l < -1)
        else:
            e = tail_slope(nodes, g(nodes) * nodes)
            conv = e < -TAIL_SLOPE_TOL
        tail = g(nodes[-1]) * nodes[-1] / (-e) if conv and e < 0 else (
            0.0 if conv else float("inf"))
        values.append(body + float(tail))
        converge.append(conv)
    ok = all(converge)
    return ("ibl_integral", ok, max(values), float(nodes[-1]),
            f"r in (-{r0}, 0, {r0}): integrals {['%.4g' % v for v in values]}")


# ---------------------------------------------------------------------------
# structural lemmas


@dataclass
class LemmaCheck:
    id: str
    passed: bool
    fitted_constant: float
    detail: str = ""


def _max_later_ratio(g, later_over_earlier):
    """max over s > r of g(s)/g(r) (or g(r)/g(s))."""
    if later_over_earlier:
        run = np.maximum.accumulate(g[::-1])[::-1]
        return float(np.max(run[1:] / g[:-1]))
    run = np.maximum.accumulate(g)
    return float(np.max(run[:-1] / g[1:]))


def check_structural_lemmas(bundle: GeometricBundle, p, report: AssumptionReport | None = None):
    """Numerical counterparts of the monotonicity/comparability lemmas.

    Each entry carries the best constant over all node pairs ``s > r``.
    """
    N = bundle.N
    if not 1 < p < N:
        raise InvalidSpecError(f"structural lemmas need 1 < p < N, got p={p}, N={N}")
    r = bundle.r[1:]
    V = bundle._vol.values[1:]
    rho = bundle.rho(r)
    out: dict[str, LemmaCheck] = {}
    phyp_inv_c = float(np.max(_phyp_integral(bundle, p) / (V / r**p)))
    c = 1.0 / phyp_inv_c

    # V(s) >= c (s/r)^p V(r)
    g = V / r**p
    run = np.minimum.accumulate(g[::-1])[::-1]
    worst = float(np.min(run[1:] / g[:-1]))
    out["aux_vold"] = LemmaCheck("aux_vold", worst >= c * (1 - 1e-9), worst,
                                 f"min V(s) r^p/(V(r) s^p) vs c = {c:.6g}")

    # rho(R)V(R) <= int_{B_R} rho <= gamma rho(R)V(R)
    wv = bundle._wvol.values[1:]
    ratio = wv / (rho * V)
    out["aux_density"] = LemmaCheck(
        "aux_density", bool(np.min(ratio) >= 1 - 1e-10), float(np.max(ratio)),
        f"lower ratio {np.min(ratio):.6g}; gamma = max ratio")

    # gamma^-1 lam V(R) <= V(lam R) <= gamma lam^N V(R), lam >= 1
    g1 = _max_later_ratio(V / r, later_over_earlier=False)
    g2 = _max_later_ratio(V / r**N, later_over_earlier=True)
    gam = max(g1, g2)
    out["aux_vol"] = LemmaCheck("aux_vol", math.isfinite(gam), gam, "gamma over node pairs")

    win, _ = _window(bundle, p)
    if win is not None:
        a1, a2 = win
        s = rho * V
        pos = s > 0
        W = rho[pos] * r[pos] ** p * s[pos] ** (-(p - a2) / (N - a1))
        gam = _max_later_ratio(W, later_over_earlier=False)
        out["aux_function"] = LemmaCheck("aux_function", math.isfinite(gam), gam,
                                         "W(r) <= gamma W(s), s > r")
    return out


# ---------------------------------------------------------------------------
# classification and rates


def closed_form_exponents(N, p, m, alpha, beta=1.0, nu=0.0, mu=0.0):
    """Exponents of the power-log example family.

    Returns ``(lambda, sigma, delta1, delta2, alpha_star)``.
    """
    k = p + m - 3
    lam = p - alpha + (1 + beta * (N - 1) - alpha) * k
    sig = nu * (N - 1) * k + mu * (p + m - 2)
    astar = ((beta * (N - 1) + 1) * k + p) / (p + m - 2)
    d1 = (beta * (N - 1) + 1 - alpha) / lam if lam != 0 else math.nan
    d2 = sig * d1 - mu - nu * (N - 1)
    return lam, sig, d1, d2, astar


def _builtin(bundle):
    return bundle.manifold.is_power_log and bundle.density.params is not None


def numerical_delta1(bundle, p, m, mass=1.0, t_range=(1e3, 1e6), n=25):
    """Log-log slope of ``t -> 1/V_rho(Z~(t M^{p+m-3}))``."""
    t = np.geomspace(*t_range, n)
    y = 1.0 / bundle.vol_rho(bundle.z_tilde(p, m, t * mass ** (p + m - 3)))
    return -float(np.polyfit(np.log(t), np.log(y), 1)[0])


def predicted_rates(bundle: GeometricBundle, p, m, mass=1.0):
    """``(lambda, sigma, delta1, delta2)``; numerical slopes for custom profiles."""
    if _builtin(bundle):
        mp, dp = bundle.manifold.warp_params, bundle.density.params
        lam, sig, d1, d2, _ = closed_form_exponents(
            bundle.N, p, m, dp["alpha"], mp["beta"], mp["nu"], dp["mu"])
    else:
        r = bundle.r[1:]
        lam = tail_slope(r, bundle.psi_values(p, m))
        sig, d2 = math.nan, math.nan
        d1 = numerical_delta1(bundle, p, m, mass) if lam > 0 else math.nan
    if not lam > 0:
        raise RegimeError(f"lambda = {lam:.6g} <= 0: no sup-decay prediction")
    return lam, sig, d1, d2


def classify(bundle: GeometricBundle, p, m, report: AssumptionReport | None = None) -> TheoryReport:
    """Regime flags and exponents for the problem (bundle, p, m)."""
    _validate(bundle, p, m)
    if report is None:
        report = check_assumptions(bundle, p, m)
    N = bundle.N
    k = p + m - 3
    degenerate = k > 0
    alpha = bundle.density.decay_alpha
    win, _ = _window(bundle, p)
    eta = math.nan if win is None else (N - win[0]) * k + p - win[1]
    psi_inc = bundle.psi_increasing(p, m)
    geometric = report.passed(*GEOMETRIC_IDS)

    if _builtin(bundle):
        mp, dp = bundle.manifold.warp_params, bundle.density.params
        beta, nu, mu = mp["beta"], mp["nu"], dp["mu"]
        lam, sig, d1, d2, astar = closed_form_exponents(N, p, m, alpha, beta, nu, mu)
        exa_nn = alpha < astar
        # p >= N leaves the range where the sup estimate is proved
        exa_nnn = p < N and p > alpha > (N - 1) / N * (1 - beta) * (N * p / (N - p))
        exa_n = N * k + p > 0
        sup_core = exa_nn and exa_nnn and geometric
    else:
        r = bundle.r[1:]
        lam = tail_slope(r, bundle.psi_values(p, m))
        sig = d2 = astar = math.nan
        d1 = numerical_delta1(bundle, p, m) if psi_inc and lam > 0 else math.nan
        exa_n = True
        sup_core = geometric and psi_inc and report.passed("dnf_dec", "dnf_inc", "dnf_vol", "close")

    if degenerate:
        sup = sup_core
    else:
        psi_ok = psi_inc and _psi_unbounded(bundle, p, m)
        sup = sup_core and exa_n and (eta > 0) and psi_ok
    flags = {
        "sup_estimate": bool(sup),
        "fsp": bool(degenerate and psi_inc and report["fsp_doubling"].passed),
        "universal_bound": bool(degenerate and alpha > p and geometric
                                and report["unb_decay"].passed),
        "interface_blowup": bool(degenerate and report["ibl_integral"].passed),
    }
    return TheoryReport("degenerate" if degenerate else "singular", lam, sig, d1, d2,
                        astar, eta, flags, psi_inc, report)


def _psi_unbounded(bundle, p, m):
    vals = bundle.psi_values(p, m)
    return bool(tail_slope(bundle.r[1:], vals) > TAIL_SLOPE_TOL)


def sup_bound_curve(bundle: GeometricBundle, p, m, mass, times, gamma0=1.0):
    """``M / V_rho(Z~(gamma0 t M^{p+m-3}))`` for each time."""
    t = np.asarray(times, dtype=float)
    s = gamma0 * t * mass ** (p + m - 3)
    R = bundle.z_tilde(p, m, s)
    with np.errstate(divide="ignore"):
        return mass / bundle.vol_rho(R)


def fsp_radius(bundle: GeometricBundle, p, m, mass, R0, t, gamma=1.0):
    """``4 R0 + Z~(gamma t M^{p+m-3})``."""
    return 4.0 * R0 + bundle.z_tilde(p, m, gamma * np.asarray(t, dtype=float) * mass ** (p + m - 3))


def threshold_sweep(make_bundle, p, m, alphas):
    """Rows ``(alpha, alpha_star, lambda, flags...)`` for a phase diagram.

    ``make_bundle(alpha)`` must return a bundle for the given decay exponent.
    """
    rows = []
    for a in alphas:
        rep = classify(make_bundle(a), p, m)
        rows.append({"alpha": a, "alpha_star": rep.alpha_star, "lambda": rep.lambda_,
                     **{k: int(v) for k, v in rep.flags.items()}})
    return rows
