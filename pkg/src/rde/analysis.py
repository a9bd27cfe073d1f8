"""Verification harness: rescaling, KS distances, convergence studies,
the small-scale consistency expansion, property suites and front speed."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import mc_engine as mc
from .cdf import LINEAR, STEP, ExtendedCDF, LatticeCDF
from .cdf_evolution import (_admissible, apply_L_smooth, apply_T_lattice, apply_T_lognat, apply_T_smooth,
                            lattice_params, lognat_from_distance_law, lognat_nodes,
                            one_step_enumeration, support_to_lattice)
from .coefficients import EffectiveCoefficients, effective_coefficients
from .forcing import ForcingLaw, LogExp
from .pde_ref import DEGENERATE, LimitLaw, limit_law

N_QUANTILES = 512


# ---------------------------------------------------------------------------
# rescaling and distances

def _as_extended(F):
    return F.to_extended() if isinstance(F, LatticeCDF) else F


def conditional_cdf(F: ExtendedCDF) -> ExtendedCDF:
    """Law conditioned on X > -inf."""
    m = F.mass_neg_inf
    if m >= 1.0:
        raise ValueError("all mass sits at -inf; the conditional law is undefined")
    return ExtendedCDF(F.grid, np.clip((F.values - m) / (1.0 - m), 0.0, 1.0), 0.0,
                       F.mass_pos_inf / (1.0 - m), F.mode)


def rescale_cdf(F_n, N, coeffs: EffectiveCoefficients | None, limit: LimitLaw) -> ExtendedCDF:
    """CDF of the rescaled variable y = slope * X + shift of the limit law.

    ``coeffs`` is accepted for symmetry with the rest of the harness; the
    scaling is read off ``limit``.  A negative slope reverses order, so
    P(Y <= y) = 1 - F((y - shift) / slope -).
    """
    F = _as_extended(F_n)
    if limit.conditional:
        F = conditional_cdf(F)
    if limit.kind == DEGENERATE:
        return F
    m, c = limit.scale_coeffs(N)
    y = m * F.grid + c
    if m > 0:
        y, v = _merge_ties(y, F.values)
        return ExtendedCDF(y, v, F.mass_neg_inf, F.mass_pos_inf, F.mode)
    vals = 1.0 - (F.left_limit(F.grid) if F.mode == STEP else F.values)
    y, v = _merge_ties(y[::-1], np.clip(vals[::-1], 0.0, 1.0))
    return ExtendedCDF(y, v, F.mass_pos_inf, F.mass_neg_inf, F.mode)


def _merge_ties(y, v):
    # distinct samples a few ulps apart can land on the same rescaled float
    keep = np.append(np.diff(y) > 0, True)
    return y[keep], v[keep]


def _reference_parts(G):
    """(callable, left-limit callable, extra evaluation points)."""
    if isinstance(G, (ExtendedCDF, LatticeCDF)):
        G = _as_extended(G)
        return G, G.left_limit, G.grid
    if isinstance(G, LimitLaw):
        q = G.quantile((np.arange(N_QUANTILES) + 0.5) / N_QUANTILES)
        pts = np.array([]) if q is None else np.asarray(q, float)
        if G.kind == DEGENERATE and isinstance(G.reference, ExtendedCDF):
            r = G.reference
            return r, r.left_limit, np.union1d(pts, r.grid)
        return G.cdf, G.cdf, pts
    return G, G, np.array([])


def ks_distance(F, G, points=None) -> float:
    """sup_x |F(x) - G(x)|, over the grid of F, the reference's own grid or
    quantiles, and ``points``; both one-sided limits are compared, and the
    limits at +-inf are included."""
    F = _as_extended(F)
    g, g_left, extra = _reference_parts(G)
    xs = np.union1d(F.grid, extra)
    if points is not None:
        xs = np.union1d(xs, np.asarray(points, float))
    d_right = np.abs(np.asarray(F(xs)) - np.asarray(g(xs)))
    d_left = np.abs(np.asarray(F.left_limit(xs)) - np.asarray(g_left(xs)))
    ends = np.array([-np.inf, np.inf])
    d_end = np.abs(np.asarray(F(ends)) - np.asarray(g(ends)))
    return float(min(1.0, max(d_right.max(), d_left.max(), d_end.max())))


# ---------------------------------------------------------------------------
# convergence studies

@dataclass
class ConvergenceReport:
    engine: str
    law_id: str
    limit: dict
    checkpoints: list            # (N, ks, sup_norm_to_reference)
    fitted_rate: float
    fit_points: int
    coefficients: dict
    note: str = ""
    runtime: dict = field(default_factory=dict)
    profiles: dict = field(default_factory=dict, repr=False)   # N -> rescaled ExtendedCDF
    limit_law: LimitLaw | None = field(default=None, repr=False)

    def ks(self):
        return [c[1] for c in self.checkpoints]

    def to_json(self):
        """Deterministic part of the report (runtime stats live elsewhere)."""
        return {"engine": self.engine, "law_id": self.law_id, "limit": self.limit,
                "checkpoints": [{"N": n, "ks": k, "sup_norm": s} for n, k, s in self.checkpoints],
                "fitted_rate": None if math.isnan(self.fitted_rate) else self.fitted_rate,
                "fit_points": self.fit_points, "coefficients": self.coefficients,
                "note": self.note}


def fit_rate(ns, ks):
    """Least-squares slope of log KS on log N, or nan with fewer than two points."""
    ns, ks = np.asarray(ns, float), np.asarray(ks, float)
    ok = ks > 0
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(ns[ok]), np.log(ks[ok]), 1)[0])


def init_cdf(init: mc.InitialDistribution) -> ExtendedCDF:
    if init.kind == "uniform":
        a, b = init.params
        return ExtendedCDF(np.array([a, b]), np.array([0.0, 1.0]), 0.0, 0.0, LINEAR)
    sup = init.support()
    fin = [(v, p) for v, p in sup if np.isfinite(v)]
    neg = sum(p for v, p in sup if v == -np.inf)
    pos = sum(p for v, p in sup if v == np.inf)
    if not fin:
        return ExtendedCDF(np.array([0.0]), np.array([neg]), neg, pos, STEP)
    grid = np.array([v for v, _ in fin])
    vals = np.minimum(neg + np.cumsum([p for _, p in fin]), 1.0 - pos)
    return ExtendedCDF(grid, vals, neg, pos, STEP)


def _distance_law_from_init(init):
    sup = init.support()
    if sup is None:
        raise ValueError("the log N engine needs a discrete initial law")
    out = {}
    for v, p in sup:
        if v == -np.inf:
            out[0] = out.get(0, 0.0) + p
            continue
        d = math.exp(v)
        if not np.isfinite(v) or abs(d - round(d)) > 1e-9 * max(1.0, d):
            raise ValueError(f"log N engine: exp({v}) is not an integer")
        out[int(round(d))] = out.get(int(round(d)), 0.0) + p
    return out


def is_distance_law(law: ForcingLaw):
    return all(c.fp == LogExp and c.fm.kind == "zero" for c in law.components)


def _mc_floor(pool):
    return 5.0 / math.sqrt(pool)


def convergence_study(engine, law: ForcingLaw, init, checkpoints, pool=10**6, seed=0,
                      threads=1, stratified=False, conditional=None, delta=0.05,
                      log_max=None, keep_profiles=False, callback=None) -> ConvergenceReport:
    """Evolve X^(n) with ``engine`` in {mc, lattice, lognat} and measure the
    KS distance of the rescaled CDF to the limit law at each checkpoint.

    ``conditional`` (default: automatic) conditions on X > -inf, which is
    the right normalization for the distance RDE with an atom at D = 0.
    ``callback(n, F)`` receives the raw CDF at every checkpoint.
    """
    init = mc.InitialDistribution.parse(init)
    checkpoints = sorted(set(int(n) for n in checkpoints))
    if not checkpoints or checkpoints[0] < 1:
        raise ValueError("checkpoints must be positive integers")
    if law.p != 0.5:
        raise ValueError("scaling limits are only available at p = 1/2")
    coeffs = effective_coefficients(law)
    F0 = init_cdf(init)
    if conditional is None:
        conditional = (not coeffs.sigma_is_zero) and F0.mass_neg_inf > 0
    q = (1.0 - F0.mass_neg_inf) if conditional else None
    limit = limit_law(coeffs, q, reference=F0)
    note = ""
    if limit.kind == DEGENERATE:
        note = "degenerate limit: sigma = a = 0, so X^(N) has the law of X^(0); compared with X^(0)"

    t0 = time.perf_counter()
    rows, profiles = [], {}
    last = checkpoints[-1]

    def record(n, F):
        if callback is not None:
            callback(n, F)
        G = rescale_cdf(F, n, coeffs, limit)
        ks = ks_distance(G, limit)
        ref = limit.cdf(G.grid) if limit.kind != DEGENERATE else F0(G.grid)
        sup = float(np.max(np.abs(G.values - ref)))
        rows.append((n, ks, sup))
        if keep_profiles:
            profiles[n] = G

    if engine == "mc":
        pop = mc.init_population(init, pool, seed, law.law_id, stratified)
        for n in range(1, last + 1):
            pop = mc.step_population(pop, law, threads)
            if n in checkpoints:
                record(n, mc.empirical_cdf(pop))
    elif engine == "lattice":
        qp, qm = lattice_params(law)
        F = support_to_lattice(init.support())
        for n in range(1, last + 1):
            F = apply_T_lattice(F, qp, qm, law.p)
            if n in checkpoints:
                record(n, F)
    elif engine == "lognat":
        if not is_distance_law(law):
            raise ValueError("the log N engine evolves the distance law (f+ = LogExp, f- = Zero)")
        dl = _distance_law_from_init(init)
        if log_max is None:
            top = math.log(max(max(dl), 1))
            log_max = top + 2.5 * math.sqrt(abs(coeffs.sigma) * last) + 10.0
        F = lognat_from_distance_law(dl, lognat_nodes(log_max, delta=delta))
        for n in range(1, last + 1):
            F = apply_T_lognat(F, law.p)
            if n in checkpoints:
                record(n, F)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    elapsed = time.perf_counter() - t0

    ns = [r[0] for r in rows]
    ks = [r[1] for r in rows]
    if engine == "mc":
        keep = [i for i, k in enumerate(ks) if k > _mc_floor(pool)]
        ns_fit, ks_fit = [ns[i] for i in keep], [ks[i] for i in keep]
    else:
        ns_fit, ks_fit = ns, ks
    return ConvergenceReport(engine, law.law_id, limit.describe(), rows,
                             fit_rate(ns_fit, ks_fit), len(ns_fit), coeffs.to_json(), note,
                             {"seconds": elapsed, "pool": pool if engine == "mc" else None},
                             profiles, limit)


# ---------------------------------------------------------------------------
# consistency expansion

def _logistic(x):
    F = 1.0 / (1.0 + np.exp(-x))
    f = F * (1.0 - F)
    return F, f, f * (1.0 - 2.0 * F)


def _gaussian(x):
    f = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    return 0.5 * (1.0 + special.erf(x / math.sqrt(2.0))), f, -x * f


PROBES = {"logistic": _logistic, "gaussian": _gaussian}


def _probe(name):
    """(Phi, Phi', Phi'') for a named probe."""
    if name not in PROBES:
        raise ValueError(f"unknown probe {name!r}; choose from {sorted(PROBES)}")
    fn = PROBES[name]
    return (lambda x: fn(x)[0]), (lambda x: fn(x)[1]), (lambda x: fn(x)[2])


@dataclass
class ConsistencyTable:
    law_id: str
    probe: str
    deltas: list
    remainders: list
    points: list
    sigma: float
    a: float
    fits: list = field(default_factory=list)   # per fit point: {x, c2, c3, ...}
    window: float = 40.0
    h: float = 0.01

    def to_json(self):
        return {"law_id": self.law_id, "probe": self.probe, "deltas": self.deltas,
                "remainders": self.remainders, "sigma": self.sigma, "a": self.a,
                "probe_points": self.points, "fits": self.fits,
                "window": self.window, "h": self.h}


def scaled_L(law, probe, delta, x, window=40.0, h=0.01):
    """(L Phi_delta)(x / delta) for Phi_delta(y) = Phi(delta y), with Phi
    sampled on a local window of half-width ``window`` in y around x/delta."""
    cdf = _probe(probe)[0]
    y0 = x / delta
    m = int(round(window / h))
    y = y0 + h * np.arange(-m, m + 1)
    v = np.maximum.accumulate(cdf(delta * y))
    F = ExtendedCDF(y, v, float(v[0]), float(1.0 - v[-1]), LINEAR)
    return float(apply_L_smooth(F, law, y0))


def consistency_check(law: ForcingLaw, probe="logistic", deltas=(0.2, 0.1, 0.05, 0.025),
                      points=None, fit_points=(-1.5, -0.75, 1.0), window=40.0, h=0.01):
    """R(delta; x) = (L Phi_delta(x/delta) - delta^2 sigma Phi'^2 - delta^3 a Phi' Phi'') / delta^3,
    maximized over the probe points, plus a polynomial fit in delta of
    L Phi_delta(x/delta) at ``fit_points``."""
    deltas = sorted((float(d) for d in deltas), reverse=True)
    if any(d <= 0 for d in deltas):
        raise ValueError("deltas must be positive")
    _, d1, d2 = _probe(probe)
    coeffs = effective_coefficients(law)
    sigma, a = coeffs.sigma, coeffs.a
    pts = np.linspace(-3.0, 3.0, 25) if points is None else np.asarray(points, float)
    fit_pts = np.asarray(fit_points, float)
    all_pts = np.union1d(pts, fit_pts)
    vals = {d: np.array([scaled_L(law, probe, d, x, window, h) for x in all_pts]) for d in deltas}
    p1, p2 = d1(all_pts), d2(all_pts)
    rem = []
    in_probe = np.isin(all_pts, pts)
    for d in deltas:
        r = (vals[d] - d * d * sigma * p1**2 - d**3 * a * np.abs(p1) * p2) / d**3
        rem.append(float(np.max(np.abs(r[in_probe]))))
    fits = []
    D = np.array(deltas)
    design = np.stack([D**2, D**3, D**4], axis=1)
    for x in fit_pts:
        i = int(np.nonzero(all_pts == x)[0][0])
        ys = np.array([vals[d][i] for d in deltas])
        c2, c3, c4 = np.linalg.lstsq(design, ys, rcond=None)[0]
        fits.append({"x": float(x), "c2": float(c2), "c3": float(c3), "c4": float(c4),
                     "phi1": float(p1[i]), "phi2": float(p2[i]),
                     "sigma_hat": float(c2 / p1[i] ** 2),
                     "c2_expected": float(sigma * p1[i] ** 2),
                     "c3_expected": float(a * abs(p1[i]) * p2[i])})
    return ConsistencyTable(law.law_id, probe, deltas, rem, [float(x) for x in pts], sigma, a,
                            fits, window, h)


# ---------------------------------------------------------------------------
# property suites

@dataclass
class PropertyReport:
    law_id: str
    trials: int
    counts: dict                          # check -> number of trials run
    failures: list = field(default_factory=list)   # (check, trial, witness)

    @property
    def ok(self):
        return not self.failures

    def failed(self, check):
        return [f for f in self.failures if f[0] == check]

    def to_json(self):
        return {"law_id": self.law_id, "trials": self.trials, "counts": self.counts,
                "failures": [{"check": c, "trial": t, "witness": w} for c, t, w in self.failures],
                "ok": self.ok}


def _random_mixture(gen, grid, atoms=True):
    k = gen.integers(1, 4)
    mu = gen.uniform(-4, 4, k)
    s = gen.uniform(0.5, 2.0, k)
    w = gen.dirichlet(np.ones(k))
    core = sum(wi / (1 + np.exp(-(grid - m) / si)) for wi, m, si in zip(w, mu, s))
    lo, hi = (gen.uniform(0, 0.15, 2) if atoms else (0.0, 0.0))
    # renormalize the core so F(grid[0]) = lo and F(grid[-1]) = 1 - hi exactly
    core = (core - core[0]) / (core[-1] - core[0])
    return lo + (1.0 - lo - hi) * core, lo, hi


def _smooth_pair(gen, grid):
    va, la, ha = _random_mixture(gen, grid)
    vb, lb, hb = _random_mixture(gen, grid)
    return va, (la, ha), vb, (lb, hb)


def _ext(grid, v, lo, hi):
    return ExtendedCDF(grid, v, lo, hi, LINEAR)


def _random_lattice(gen, lo_site, m, left, right):
    v = np.sort(gen.uniform(left, right, m))
    return LatticeCDF(lo_site, v, left, right)


def _ordered_supports(gen, size=4, spread=2.0, shift=0.3):
    """Random finite law X and a pointwise larger Y (a monotone coupling)."""
    xs = gen.uniform(0, spread, size)
    ps = gen.dirichlet(np.ones(size))
    ys = xs + gen.uniform(0, shift, size) * (gen.random(size) < 0.7)
    return list(zip(xs, ps)), list(zip(ys, ps))


def _support_cdf(sup, t):
    v = np.array([x for x, _ in sup])
    p = np.array([q for _, q in sup])
    return np.array([p[v <= ti].sum() for ti in t])


def _smooth_ok(law):
    try:
        for f in law.functions():
            _admissible(f)
    except ValueError:
        return False
    return True


def property_suite(law: ForcingLaw, trials=100, seed=0, tol=1e-9, smooth=True,
                   smooth_grid=None):
    """Randomized checks of monotonicity, contractivity, commutation with
    constants and conservation of the masses at +-inf.

    Lattice checks use the law's (q+, q-) when its forcing is lattice-type
    and random parameters otherwise.  Smooth checks run when every forcing
    function is admissible for the quadrature operator.  The enumeration
    monotonicity check runs for any forcing and is the one that exposes
    forcing outside class S.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    gen = np.random.Generator(np.random.Philox(key=np.random.SeedSequence(seed).generate_state(2, np.uint64)))
    try:
        fixed_lattice = lattice_params(law)
    except ValueError:
        fixed_lattice = None
    run_smooth = smooth and _smooth_ok(law)
    grid = np.linspace(-25, 25, 501) if smooth_grid is None else np.asarray(smooth_grid, float)
    half = law.with_p(0.5)
    counts = {k: 0 for k in ("lattice_monotone", "lattice_mass", "enumeration_monotone",
                             "smooth_monotone", "smooth_contractive", "smooth_commutation")}
    fails = []

    for t in range(trials):
        # lattice
        if fixed_lattice is None:
            qp, qm, p = gen.random(3)
        else:
            (qp, qm), p = fixed_lattice, law.p
        m = int(gen.integers(3, 12))
        left, right = sorted(gen.uniform(0, 0.2, 2) * np.array([1, -1]) + np.array([0, 1]))
        F = _random_lattice(gen, -m // 2, m, left, right)
        bump = np.maximum(F.values - gen.uniform(0, 0.2, m), left)
        G = LatticeCDF(F.offset, np.maximum.accumulate(bump), left, right)  # G <= F
        TF, TG = apply_T_lattice(F, qp, qm, p), apply_T_lattice(G, qp, qm, p)
        counts["lattice_monotone"] += 1
        if np.any(TG.values > TF.values):
            i = int(np.argmax(TG.values - TF.values))
            fails.append(("lattice_monotone", t, {"site": int(TF.offset + i), "q_plus": qp,
                                                  "q_minus": qm, "p": p,
                                                  "excess": float(TG.values[i] - TF.values[i])}))
        Th = apply_T_lattice(F, qp, qm, 0.5)
        counts["lattice_mass"] += 1
        if Th.left_value != F.left_value or Th.right_value != F.right_value:
            fails.append(("lattice_mass", t, {"before": [F.left_value, F.right_value],
                                              "after": [Th.left_value, Th.right_value]}))

        # enumeration: X <= Y pointwise must give Phi(X) <= Phi(Y) in law
        sx, sy = _ordered_supports(gen)
        ox, oy = one_step_enumeration(sx, law), one_step_enumeration(sy, law)
        ts = np.union1d([v for v, _ in ox], [v for v, _ in oy])
        # ties such as min(x, y) - f(|x - y|) are exact only up to rounding in x
        diff = _support_cdf(oy, ts) - _support_cdf(ox, ts + 1e-9 * (1.0 + np.abs(ts)))
        counts["enumeration_monotone"] += 1
        if np.any(diff > tol):
            i = int(np.argmax(diff))
            fails.append(("enumeration_monotone", t, {"x": float(ts[i]), "excess": float(diff[i]),
                                                      "lower": [list(map(float, s)) for s in sx],
                                                      "upper": [list(map(float, s)) for s in sy]}))

        if not run_smooth:
            continue
        va, (la, ha), vb, (lb, hb) = _smooth_pair(gen, grid)
        A, B = _ext(grid, va, la, ha), _ext(grid, vb, lb, hb)
        # pointwise max/min of two CDFs are CDFs and are ordered
        hi_v, lo_v = np.maximum(va, vb), np.minimum(va, vb)
        Hi = _ext(grid, hi_v, max(la, lb), min(ha, hb))
        Lo = _ext(grid, lo_v, min(la, lb), max(ha, hb))
        THi, TLo = apply_T_smooth(Hi, law), apply_T_smooth(Lo, law)
        counts["smooth_monotone"] += 1
        ex = float(np.max(TLo.values - THi.values))
        if ex > tol:
            i = int(np.argmax(TLo.values - THi.values))
            fails.append(("smooth_monotone", t, {"x": float(grid[i]), "excess": ex}))
        TA, TB = apply_T_smooth(A, law), apply_T_smooth(B, law)
        counts["smooth_contractive"] += 1
        lhs = float(np.max(np.abs(TA.values - TB.values)))
        rhs = float(max(np.max(np.abs(va - vb)), abs(la - lb), abs(ha - hb)))
        if lhs > rhs + tol:
            fails.append(("smooth_contractive", t, {"lhs": lhs, "rhs": rhs}))
        c = float(gen.uniform(-la, ha))
        TAh, TAc = apply_T_smooth(A, half), apply_T_smooth(A.shifted(c), half)
        counts["smooth_commutation"] += 1
        err = float(np.max(np.abs(TAc.values - (TAh.values + c))))
        if err > tol:
            fails.append(("smooth_commutation", t, {"c": c, "error": err}))

    return PropertyReport(law.law_id, trials, counts, fails)


# ---------------------------------------------------------------------------
# front speed

@dataclass
class FrontSpeed:
    p: float
    slope_estimate: float
    stderr: float
    lower_bound: float
    passed: bool
    means: list

    def to_json(self):
        return {"p": self.p, "slope_estimate": self.slope_estimate, "stderr": self.stderr,
                "lower_bound": self.lower_bound, "pass": self.passed, "mean_log_R": self.means}


def front_speed(p, law: ForcingLaw | None = None, pool=10**5, N=200, seed=0, threads=1):
    """Slope of mean log R^(n) against n over the second half of the run,
    checked against the lower bound (2p - 1) log 2."""
    if not p > 0.5:
        raise ValueError(f"front speed needs p > 1/2, got {p}")
    if law is None:
        law = ForcingLaw.single(p, LogExp, LogExp, "resistance")
    law = law.with_p(p)
    pop = mc.init_population(mc.InitialDistribution.point_mass(0.0), pool, seed, law.law_id)
    means = [0.0]
    for _ in range(N):
        pop = mc.step_population(pop, law, threads)
        means.append(float(np.mean(pop.samples)))
    n = np.arange(N + 1, dtype=float)
    lo = N // 2
    x, y = n[lo:], np.array(means[lo:])
    xc = x - x.mean()
    slope = float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))
    resid = y - y.mean() - slope * xc
    dof = max(x.size - 2, 1)
    stderr = float(math.sqrt(np.dot(resid, resid) / dof / np.dot(xc, xc)))
    bound = (2 * p - 1) * math.log(2.0)
    return FrontSpeed(p, slope, stderr, bound, slope >= bound - 3 * stderr - 1e-12, means)


__all__ = ["ConvergenceReport", "ConsistencyTable", "PropertyReport", "FrontSpeed",
           "rescale_cdf", "conditional_cdf", "ks_distance", "convergence_study", "fit_rate",
           "consistency_check", "scaled_L", "property_suite", "front_speed", "init_cdf",
           "is_distance_law"]
