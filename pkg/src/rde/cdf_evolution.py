"""Deterministic evolution of CDFs under the RDE operator T.

Three representations are supported: piecewise-linear CDFs on a real grid
(quadrature of the jump-process form of L), CDFs on the integers (the exact
finite-difference recursion for forcing in {0, (1-u)_+}), and CDFs of
log D for the graph-distance RDE on a log-spaced set of integers.
Exhaustive enumeration over finite supports is the oracle for all three.
"""
from __future__ import annotations

import functools
import math

import numpy as np

from .cdf import INTEGERS, LINEAR, LOG_NATURALS, ExtendedCDF, IntegrityError, LatticeCDF
from .forcing import ForcingFunction, ForcingLaw, apply_phi, validate_class_S
from .quadrature import gauss_legendre

MAX_PAIRS = 10_000
_GL_X, _GL_W = gauss_legendre(16)


# ---------------------------------------------------------------------------
# enumeration oracles

def _merge_values(pairs, rel=1e-12):
    pairs = sorted((float(v), float(p)) for v, p in pairs if p > 0)
    out = []
    for v, p in pairs:
        if out and (v == out[-1][0] or (np.isfinite(v) and np.isfinite(out[-1][0])
                                         and abs(v - out[-1][0]) <= rel * max(1.0, abs(v)))):
            out[-1] = (out[-1][0], out[-1][1] + p)
        else:
            out.append((v, p))
    return out


def _normalize_support(support):
    if isinstance(support, dict):
        support = list(support.items())
    sup = _merge_values(support)
    if not sup:
        raise ValueError("empty support")
    if len(sup) ** 2 > MAX_PAIRS:
        raise ValueError(f"support of size {len(sup)} gives {len(sup) ** 2} pairs; "
                         f"enumeration is limited to {MAX_PAIRS}")
    return sup


def one_step_enumeration(support, law: ForcingLaw):
    """Exact law of Phi(X1, X2) for X1, X2 i.i.d. on a finite support.

    ``support`` is a list of (value, prob) pairs or a dict; the result is a
    sorted list of (value, prob) pairs.
    """
    sup = _normalize_support(support)
    out = []
    for x1, p1 in sup:
        for x2, p2 in sup:
            pp = p1 * p2
            for c in law.components:
                fpair = (c.fp, c.fm)
                if law.p > 0:
                    out.append((apply_phi(x1, x2, 1, fpair), pp * c.w * law.p))
                if law.p < 1:
                    out.append((apply_phi(x1, x2, 0, fpair), pp * c.w * (1.0 - law.p)))
    return _merge_values(out)


def enumerate_update(support, rule):
    """Exact one-step law for an update given as [(prob, fn(x1, x2)), ...]."""
    sup = _normalize_support(support)
    out = []
    for x1, p1 in sup:
        for x2, p2 in sup:
            for pr, fn in rule:
                if pr > 0:
                    out.append((fn(x1, x2), p1 * p2 * pr))
    return _merge_values(out)


def iterate_enumeration(support, law, n):
    sup = _normalize_support(support)
    for _ in range(n):
        sup = one_step_enumeration(sup, law)
    return sup


def _eq(x1, x2):
    return 1.0 if x1 == x2 else 0.0


def symmetric_hipster_rule():
    return [(0.5, lambda a, b: a + _eq(a, b)), (0.5, lambda a, b: b - _eq(a, b))]


def symmetric_cooperative_rule():
    return [(0.5, lambda a, b: a + _eq(a, b)), (0.5, lambda a, b: a - _eq(a, b))]


def asymmetric_hipster_rule(q):
    """Totally asymmetric hipster walk, P(Xi = 1) = q, Theta fair."""
    return [(0.5 * q, lambda a, b: a + _eq(a, b)), (0.5 * (1 - q), lambda a, b: a),
            (0.5 * q, lambda a, b: b + _eq(a, b)), (0.5 * (1 - q), lambda a, b: b)]


def lazy_cooperative_rule(r, q):
    """Two-player totally asymmetric q-lazy cooperative motion."""
    return [(r * q, lambda a, b: a + _eq(a, b)), ((1 - r) * q, lambda a, b: a - _eq(a, b)),
            (1 - q, lambda a, b: a)]


def support_to_lattice(support):
    """Integer-valued finite support -> LatticeCDF on the integers."""
    sup = _merge_values(support if not isinstance(support, dict) else support.items())
    vals = [v for v, _ in sup]
    if not all(np.isfinite(v) and float(v).is_integer() for v in vals):
        raise ValueError("lattice CDFs need finite integer support")
    lo, hi = int(min(vals)), int(max(vals))
    pmf = np.zeros(hi - lo + 1)
    for v, p in sup:
        pmf[int(v) - lo] += p
    return LatticeCDF(lo, np.minimum(np.cumsum(pmf), 1.0), 0.0, 1.0)


def lattice_to_support(F: LatticeCDF, tol=0.0):
    v = np.concatenate([[F.left_value], F.values])
    pmf = np.diff(v)
    sites = F.sites
    return [(float(s), float(p)) for s, p in zip(sites, pmf) if p > tol]


# ---------------------------------------------------------------------------
# integer lattice

def apply_T_lattice(F: LatticeCDF, q_plus, q_minus, p) -> LatticeCDF:
    """F' = F - p q+ (F - F(x-1))^2 + (1-p) q- (F(x+1) - F)^2 + (1-2p) F (1-F),
    on a window grown by one site per side."""
    if F.lattice != INTEGERS:
        raise ValueError("apply_T_lattice works on the integer lattice")
    for name, v in (("q_plus", q_plus), ("q_minus", q_minus), ("p", p)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} = {v} is not a probability")
    L, R = F.left_value, F.right_value
    v = np.concatenate([[L], F.values, [R]])
    lo = np.concatenate([[L], v[:-1]])
    hi = np.concatenate([v[1:], [R]])
    new = v - p * q_plus * (v - lo) ** 2 + (1 - p) * q_minus * (hi - v) ** 2 + (1 - 2 * p) * v * (1 - v)
    nl = L + (1 - 2 * p) * L * (1 - L)
    nr = R + (1 - 2 * p) * R * (1 - R)
    _check_range(new, nl, nr)
    return LatticeCDF(F.offset - 1, np.clip(new, nl, nr), nl, nr)


def apply_T_lattice_fd(F: LatticeCDF, q_plus, q_minus, p) -> LatticeCDF:
    """The same update written as a grad_sym * Laplacian + sigma (grad+)^2 + reaction."""
    L, R = F.left_value, F.right_value
    v = np.concatenate([[L], F.values, [R]])
    lo = np.concatenate([[L], v[:-1]])
    hi = np.concatenate([v[1:], [R]])
    a_z = 2 * p * q_plus
    sigma = (1 - p) * q_minus - p * q_plus
    grad_sym = 0.5 * (hi - lo)
    lap = hi + lo - 2 * v
    new = v + a_z * grad_sym * lap + sigma * (hi - v) ** 2 + (1 - 2 * p) * v * (1 - v)
    nl = L + (1 - 2 * p) * L * (1 - L)
    nr = R + (1 - 2 * p) * R * (1 - R)
    _check_range(new, nl, nr)
    return LatticeCDF(F.offset - 1, np.clip(new, nl, nr), nl, nr)


def _check_range(new, lo, hi, tol=1e-12):
    if np.any(new < lo - tol) or np.any(new > hi + tol) or np.any(np.diff(new) < -tol):
        raise IntegrityError("lattice update left the space of CDFs")


def lattice_params(law: ForcingLaw):
    """(q+, q-) for a law whose forcing functions are Zero or LinearCap."""
    qp = qm = 0.0
    for c in law.components:
        for f in (c.fp, c.fm):
            if f.kind not in ("zero", "linearcap"):
                raise ValueError("lattice evolution needs forcing in {Zero, LinearCap}")
        qp += c.w * (c.fp.kind == "linearcap")
        qm += c.w * (c.fm.kind == "linearcap")
    return qp, qm


# ---------------------------------------------------------------------------
# smooth operator

@functools.lru_cache(maxsize=256)
def _admissible(f: ForcingFunction):
    rep = validate_class_S(f)
    if not rep.ok:
        raise ValueError(f"{f!r} is not in class S: {rep.violations[0]}")
    if f.at_infinity != 0.0:
        raise ValueError(f"{f!r} has f(inf) = {f.at_infinity:g}; the smooth operator needs 0")
    return f.gap_support(), f.gap(f.f0)


def _check_smooth_input(F: ExtendedCDF, atom_tol):
    if F.mode != LINEAR:
        raise ValueError("the smooth operator needs a piecewise-linear CDF; "
                         "use the lattice or Monte Carlo path for step CDFs")
    if F.values[0] - F.mass_neg_inf > atom_tol or F.upper - F.values[-1] > atom_tol:
        raise ValueError("CDF has an atom at a grid edge; widen the grid")


def _side_integral(F, f, x, sign, s_cut, top_gap):
    """int_{s>=0} [F(x + sign*gap(s)) - F(x)] rho(x + sign*s) ds, with rho the
    piecewise constant density of F.  sign=-1 is the max side."""
    grid, vals = F.grid, F.values
    lo_s = sign * (grid - x)          # s-coordinates of the grid nodes
    if sign < 0:
        lo_s = lo_s[::-1]
    s_far = lo_s[-1]
    if s_far <= 0:
        return 0.0
    s_end = min(s_far, s_cut)
    if s_end <= 0:
        return 0.0
    pts = [lo_s[(lo_s > 0) & (lo_s < s_end)]]
    pts.append(np.array([k for k in f.gap_kinks() if 0 < k < s_end]))
    # on the tail of the gap, x + sign*gap(s) crosses the grid nodes within top_gap of x
    c = lo_s[(lo_s > 0) & (lo_s <= top_gap)]
    if c.size:
        levels = np.array([f.gap_level(ci) for ci in c])
        pts.append(levels[(levels > 0) & (levels < s_end)])
    br = np.unique(np.concatenate([[0.0, s_end], *pts]))
    a, b = br[:-1], br[1:]
    keep = b - a > 1e-15
    a, b = a[keep], b[keep]
    if a.size == 0:
        return 0.0
    mids = 0.5 * (a + b)
    x1 = x + sign * mids
    k = np.clip(np.searchsorted(grid, x1, side="right") - 1, 0, grid.size - 2)
    dens = (vals[k + 1] - vals[k]) / (grid[k + 1] - grid[k])
    inside = (x1 > grid[0]) & (x1 < grid[-1])
    dens = np.where(inside, dens, 0.0)
    live = dens != 0
    if not live.any():
        return 0.0
    a, b, dens = a[live], b[live], dens[live]
    s = a[:, None] + (b - a)[:, None] * _GL_X[None, :]
    arg = x + sign * np.asarray(f.gap(s))
    fx = np.interp(x, grid, vals)
    integrand = np.interp(arg, grid, vals) - fx
    return float(np.sum(dens * (b - a) * (integrand @ _GL_W)))


def apply_L_smooth(F: ExtendedCDF, law: ForcingLaw, x, atom_tol=1e-6):
    """The nonlocal part L F of TF - F, at one point or an array of points."""
    _check_smooth_input(F, atom_tol)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    plus = [(w, f, *_admissible(f)) for w, f in law.plus_parts()]
    minus = [(w, f, *_admissible(f)) for w, f in law.minus_parts()]
    out = np.zeros(xs.shape)
    for i, xi in enumerate(xs):
        if not np.isfinite(xi):
            continue
        tot = 0.0
        if law.p > 0:
            tot += 2 * law.p * sum(w * _side_integral(F, f, xi, -1, cut, top)
                                   for w, f, cut, top in plus if f.kind != "zero")
        if law.p < 1:
            tot += 2 * (1 - law.p) * sum(w * _side_integral(F, f, xi, 1, cut, top)
                                         for w, f, cut, top in minus if f.kind != "zero")
        out[i] = tot
    return out if np.ndim(x) else float(out[0])


def apply_T_smooth(F: ExtendedCDF, law: ForcingLaw, atom_tol=1e-6, max_fix=1e-8) -> ExtendedCDF:
    """TF = F + L F + (1 - 2p) F (1 - F) on the grid of F."""
    p = law.p
    lf = apply_L_smooth(F, law, F.grid, atom_tol)
    v = F.values
    tf = v + lf + (1 - 2 * p) * v * (1 - v)
    m_lo = F.mass_neg_inf + (1 - 2 * p) * F.mass_neg_inf * (1 - F.mass_neg_inf)
    up = F.upper + (1 - 2 * p) * F.upper * (1 - F.upper)
    clipped = np.clip(tf, m_lo, up)
    fixed = np.maximum.accumulate(clipped)
    fix = max(float(np.max(np.abs(fixed - tf))), 0.0)
    if fix > max_fix:
        raise IntegrityError(f"monotonization moved TF by {fix:.3g} > {max_fix:g}")
    return ExtendedCDF(F.grid, fixed, m_lo, 1.0 - up, LINEAR)


# ---------------------------------------------------------------------------
# log N lattice for the graph distance

def lognat_nodes(log_max, exact_upto=64, delta=0.05):
    """Integers 1..exact_upto, then integers spaced ~delta apart in log, up to
    exp(log_max).  Large nodes are kept as floats."""
    # below ~2/delta rounding would produce unit-width geometric cells
    exact_upto = max(int(exact_upto), int(math.ceil(2.0 / delta)))
    exact = np.arange(1, exact_upto + 1, dtype=float)
    start = math.log(exact_upto)
    if log_max <= start:
        return exact
    n = int(math.ceil((log_max - start) / delta))
    geo = np.round(np.exp(start + delta * np.arange(1, n + 1)))
    nodes = np.unique(np.concatenate([exact, geo]))
    return nodes


def lognat_from_distance_law(law_d, nodes=None, log_max=None):
    """CDF of log D from a dict {D: prob} on {0, 1, 2, ...}."""
    items = dict(law_d)
    p0 = float(items.pop(0, 0.0))
    if nodes is None:
        top = max(items) if items else 1
        nodes = lognat_nodes(max(log_max or 0.0, math.log(max(top, 1))))
    nodes = np.asarray(nodes, float)
    vals = np.full(nodes.size, p0)
    for d, pr in items.items():
        if d < 1 or float(d) != int(d):
            raise ValueError("distance laws live on the nonnegative integers")
        k = np.searchsorted(nodes, d)
        if k >= nodes.size or nodes[k] != d:
            raise ValueError(f"D = {d} is not a node of the log N grid")
        vals[k:] += pr
    return LatticeCDF(0, np.minimum(vals, 1.0), p0, 1.0, LOG_NATURALS, nodes)


class _LogNatPlan:
    """Static quadrature plan for the exact distance operator on fixed nodes.

    For a node d, T F(d) = p P(D1 + D2 <= d) + (1 - p)(1 - (1 - F(d))^2) and

        P(D1 + D2 <= d) = 2 sum_{y <= d/2} P(D = y) F(d - y) - F(d/2)^2.

    F between geometric nodes is linear in log D (mass spread log-uniformly
    over the cell); on 1..K every integer is a node.  Small y <= eps*d are
    summed through partial moments and a third-order expansion of
    log(1 - y/d); the rest is a fixed list of (target, cell, weight, eval)
    entries, so a step is one gather and one bincount.
    """

    GL = 3

    def __init__(self, nodes):
        self.nodes = nodes = np.asarray(nodes, float)
        M = nodes.size
        self.M = M
        run = np.nonzero(nodes != np.arange(1, M + 1))[0]
        self.K = K = int(run[0]) if run.size else M
        self.logn = logn = np.log(nodes)
        # cell k is (nodes[k-1], nodes[k]], cell 0 is the atom at D = 1
        prev = np.concatenate([[0.0], nodes[:-1]])
        self.atom = (nodes - prev) <= 1.0
        self.lam = np.where(self.atom, 0.0, logn - np.log(np.maximum(prev, 1.0)))
        ratio_gap = 1.0 - prev[K:] / nodes[K:] if K < M else np.array([1.0])
        self.eps = eps = min(0.9 / K, 0.5 * float(ratio_gap.min()))
        glx, glw = gauss_legendre(self.GL)

        tgt, cell, wt, ys_all = [], [], [], []
        for j in range(M):
            d = nodes[j]
            lo_y, hi_y = eps * d, 0.5 * d
            if hi_y < 1.0:
                continue
            # cells (nodes[k-1], nodes[k]] overlapping (lo_y, hi_y]
            k0 = int(np.searchsorted(nodes, lo_y, side="left"))
            k1 = min(int(np.searchsorted(nodes, hi_y, side="left")), M - 1)
            ks = np.arange(k0, k1 + 1)
            at = ks[self.atom[ks]]
            at = at[(nodes[at] > lo_y) & (nodes[at] <= hi_y)]
            if at.size:
                tgt.append(np.full(at.size, j))
                cell.append(at)
                wt.append(np.ones(at.size))
                ys_all.append(nodes[at])
            ct = ks[~self.atom[ks]]
            if ct.size:
                a_ = np.maximum(prev[ct], lo_y)
                b_ = np.minimum(nodes[ct], hi_y)
                ok = b_ > a_
                ct, a_, b_ = ct[ok], a_[ok], b_[ok]
                va, vb = np.log(a_), np.log(b_)
                ys = np.exp(va[:, None] + (vb - va)[:, None] * glx[None, :])
                ws = glw[None, :] * ((vb - va) / self.lam[ct])[:, None]
                tgt.append(np.full(ys.size, j))
                cell.append(np.repeat(ct, self.GL))
                wt.append(ws.ravel())
                ys_all.append(ys.ravel())
        cat = lambda xs, dt=float: np.concatenate(xs).astype(dt) if xs else np.zeros(0, dt)
        self.tgt = cat(tgt, np.int64)
        self.cell = cat(cell, np.int64)
        self.wt = cat(wt)
        self.i1, self.i2, self.al = self._interp_coeffs(nodes[self.tgt] - cat(ys_all))
        self.half = self._interp_coeffs(nodes / 2.0)
        thr = eps * nodes
        self.thr = thr
        self.thr_eval = self._interp_coeffs(thr)
        # cell containing each threshold and the partial-cell geometry
        kt = np.searchsorted(nodes, thr, side="left")
        self.kt = kt
        self.geo_target = np.arange(M) >= K

    def _interp_coeffs(self, t):
        """Indices into Fext = [L, F_0 .. F_{M-1}, R] and weights, so that
        F(t) = (1 - a) Fext[i1] + a Fext[i2]."""
        t = np.asarray(t, float)
        nodes, M, K = self.nodes, self.M, self.K
        i1 = np.zeros(t.shape, dtype=np.int64)
        i2 = np.zeros(t.shape, dtype=np.int64)
        a = np.zeros(t.shape)
        big = t > nodes[-1]
        i1[big] = i2[big] = M + 1
        # exact integers: floor
        small = (t >= 1.0) & (t <= K) & ~big
        fl = np.floor(t[small]).astype(np.int64)
        fl = np.minimum(fl, K)
        i1[small] = i2[small] = fl  # node index fl-1 -> Fext index fl
        geo = ~big & ~small & (t >= 1.0)
        if geo.any():
            tg = t[geo]
            k = np.searchsorted(nodes, tg, side="left")  # nodes[k-1] < t <= nodes[k]
            k = np.clip(k, 1, M - 1)
            lt = np.log(tg)
            frac = (lt - self.logn[k - 1]) / (self.logn[k] - self.logn[k - 1])
            frac = np.clip(frac, 0.0, 1.0)
            i1[geo] = k
            i2[geo] = k + 1
            a[geo] = frac
        return i1, i2, a

    def step(self, F_vals, L, R, p, moments_order=3):
        M = self.M
        fext = np.concatenate([[L], F_vals, [R]])
        mass = np.diff(fext[:-1])  # mass of cell k = Fext[k+1] - Fext[k]

        def at(coeffs):
            c1, c2, ca = coeffs
            return (1 - ca) * fext[c1] + ca * fext[c2]

        contrib = self.wt * mass[self.cell] * ((1 - self.al) * fext[self.i1] + self.al * fext[self.i2])
        explicit = np.bincount(self.tgt, weights=contrib, minlength=M)

        # y in [0, eps d]: F(d - y) = F_j + c_j log(1 - y/d) on the left cell of d
        p_small = at(self.thr_eval)
        taylor = F_vals * p_small
        geo = self.geo_target
        if geo.any():
            c = np.zeros(M)
            jj = np.nonzero(geo)[0]
            c[jj] = (F_vals[jj] - F_vals[jj - 1]) / (self.logn[jj] - self.logn[jj - 1])
            mom = self._partial_moments(mass, moments_order)
            d = self.nodes
            series = np.zeros(M)
            for r in range(1, moments_order + 1):
                series += mom[r - 1] / (r * d**r)
            taylor = taylor - c * series
        half = at(self.half)
        ssum = 2.0 * (taylor + explicit) - half**2
        new = p * ssum + (1 - p) * (1.0 - (1.0 - F_vals) ** 2)
        nl = L + (1 - 2 * p) * L * (1 - L)
        nr = R + (1 - 2 * p) * R * (1 - R)
        return new, nl, nr

    def _partial_moments(self, mass, order):
        """E[D^r; D <= eps * d] for every node d and r = 1..order."""
        nodes = self.nodes
        prev = np.concatenate([[0.0], nodes[:-1]])
        lam = np.where(self.atom, 1.0, self.lam)
        out = []
        thr = self.thr
        kt = self.kt
        for r in range(1, order + 1):
            full = np.where(self.atom, nodes**r,
                            (nodes**r - np.maximum(prev, 1.0) ** r) / (r * lam)) * mass
            cum = np.concatenate([[0.0], np.cumsum(full)])
            # cells strictly below the one holding the threshold
            k = np.minimum(kt, self.M)
            base = cum[k]
            part = np.zeros_like(thr)
            inside = k < self.M
            kk = np.minimum(k, self.M - 1)
            # atom exactly at the threshold counts; log-uniform cells count partially
            at_atom = inside & self.atom[kk] & (nodes[kk] <= thr)
            part = np.where(at_atom, full[kk], part)
            cont = inside & ~self.atom[kk]
            lo = np.maximum(prev[kk], 1.0)
            part = np.where(cont, mass[kk] * (np.maximum(thr, lo) ** r - lo**r) / (r * lam[kk]), part)
            out.append(base + part)
        return out


@functools.lru_cache(maxsize=8)
def _plan_for(key):
    size, data = key
    return _LogNatPlan(np.frombuffer(data, dtype=float))


def _plan(nodes):
    nodes = np.ascontiguousarray(nodes, dtype=float)
    return _plan_for((nodes.size, nodes.tobytes()))


def apply_T_lognat(F: LatticeCDF, p, scheme="exact") -> LatticeCDF:
    """One step of the graph-distance RDE for the CDF of log D.

    ``scheme="exact"`` applies D = D1 + D2 (prob p) or min(D1, D2) on the
    node set, exactly on 1..K and with log-linear cells above.
    ``scheme="local"`` is the sitewise closure
    F' = F - p (grad- F)^2 + (1 - 2p) F (1 - F); it agrees with the exact
    operator for one step from D = 1 but not beyond.
    """
    if F.lattice != LOG_NATURALS:
        raise ValueError("apply_T_lognat needs a log-naturals CDF")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p = {p} is not a probability")
    L, R, v = F.left_value, F.right_value, F.values
    if scheme == "local":
        back = v - np.concatenate([[L], v[:-1]])
        new = v - p * back**2 + (1 - 2 * p) * v * (1 - v)
        nl = L + (1 - 2 * p) * L * (1 - L)
        nr = R + (1 - 2 * p) * R * (1 - R)
    elif scheme == "exact":
        new, nl, nr = _plan(F.nodes).step(v, L, R, p)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    _check_range(new, nl, nr, tol=1e-8)
    new = np.maximum.accumulate(np.clip(new, nl, nr))
    return LatticeCDF(0, new, nl, nr, LOG_NATURALS, F.nodes)


def lognat_to_distance_law(F: LatticeCDF, tol=0.0):
    """{D: prob} from a log-naturals CDF (geometric cells are reported at
    their upper node)."""
    pmf = np.diff(np.concatenate([[F.left_value], F.values]))
    out = {0: F.left_value} if F.left_value > tol else {}
    for d, pr in zip(F.nodes, pmf):
        if pr > tol:
            out[int(d)] = float(pr)
    return out
