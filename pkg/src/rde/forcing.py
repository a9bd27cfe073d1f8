"""Forcing functions, forcing laws and the random map Phi.

Extended reals are plain floats: ``-inf`` and ``inf`` stand for the two
points at infinity and numpy's ordering and arithmetic do the rest.  The
only special case is the gap between two equal infinities, which is 0.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .quadrature import TailIntegral, integrate_halfline

LOG2 = float(np.log(2.0))

KINDS = ("logexp", "linearcap", "zero", "tabulated")


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class ForcingFunction:
    """A bounded nonincreasing f on [0, inf).

    ``knots`` is only used by the tabulated kind: (u, f(u)) pairs starting at
    u = 0, linearly interpolated and held constant past the last knot.
    """

    kind: str
    knots: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown forcing kind {self.kind!r}")
        if self.kind == "tabulated":
            k = tuple((float(u), float(v)) for u, v in self.knots)
            if len(k) < 1:
                raise ValueError("tabulated forcing needs at least one knot")
            us = np.array([u for u, _ in k])
            if us[0] != 0.0:
                raise ValueError("first knot must sit at u = 0")
            if np.any(np.diff(us) <= 0):
                raise ValueError("knot abscissae must be strictly increasing")
            if not all(np.isfinite(v) and v >= 0 for _, v in k):
                raise ValueError("knot values must be finite and nonnegative")
            object.__setattr__(self, "knots", k)
        elif self.knots:
            raise ValueError(f"{self.kind} takes no knots")

    # -- constructors --------------------------------------------------
    @classmethod
    def logexp(cls):
        return cls("logexp")

    @classmethod
    def linearcap(cls):
        return cls("linearcap")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def tabulated(cls, knots):
        return cls("tabulated", tuple(knots))

    @classmethod
    def from_json(cls, obj):
        kind = obj["kind"].lower()
        if kind == "tabulated":
            return cls.tabulated(obj["knots"])
        return cls(kind)

    def to_json(self):
        if self.kind == "tabulated":
            return {"kind": "tabulated", "knots": [list(k) for k in self.knots]}
        return {"kind": self.kind}

    # -- tabulated helpers ---------------------------------------------
    @property
    def _us(self):
        return np.array([u for u, _ in self.knots])

    @property
    def _fs(self):
        return np.array([v for _, v in self.knots])

    # -- evaluation ----------------------------------------------------
    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(u < 0) or np.any(np.isnan(u)):
            raise DomainError("forcing functions are defined on [0, inf) only")
        if self.kind == "logexp":
            out = np.logaddexp(0.0, -u)
        elif self.kind == "linearcap":
            out = np.maximum(1.0 - u, 0.0)
        elif self.kind == "zero":
            out = np.zeros_like(u)
        else:
            out = np.interp(u, self._us, self._fs)
        return out if out.ndim else float(out)

    @property
    def f0(self):
        return float(self(0.0))

    @property
    def at_infinity(self):
        """lim f(u) as u -> inf."""
        return float(self._fs[-1]) if self.kind == "tabulated" else 0.0

    def right_inverse(self, s):
        """g(s) = sup{u >= 0 : u + f(u) <= s}, and 0 below f(0)."""
        s = np.asarray(s, dtype=float)
        if np.any(s < 0) or np.any(~np.isfinite(s)):
            raise DomainError("right inverse needs finite s >= 0")
        if self.kind == "logexp":
            with np.errstate(divide="ignore"):
                out = np.where(s >= LOG2, s - self._logexp_gap(s), 0.0)
        elif self.kind == "linearcap":
            out = np.where(s >= 1.0, s, 0.0)
        elif self.kind == "zero":
            out = s.copy()
        else:
            out = self._tab_inverse(s)
        return out if out.ndim else float(out)

    def gap(self, s):
        """s - g(s), computed without cancellation where a closed form exists.

        Equals s on [0, f(0)) and is nonincreasing on [f(0), inf) for class S.
        """
        s = np.asarray(s, dtype=float)
        if self.kind == "logexp":
            out = np.where(s >= LOG2, self._logexp_gap(np.maximum(s, LOG2)), s)
        elif self.kind == "linearcap":
            out = np.where(s >= 1.0, 0.0, s)
        elif self.kind == "zero":
            out = np.zeros_like(s)
        else:
            out = s - self._tab_inverse(s)
        return out if out.ndim else float(out)

    @staticmethod
    def _logexp_gap(s):
        # s - log(e^s - 1) = -log(1 - e^-s)
        return -np.log1p(-np.exp(-s))

    def _tab_inverse(self, s):
        us, fs = self._us, self._fs
        hs = us + fs
        if np.all(np.diff(hs) >= 0):
            k = np.searchsorted(hs, s, side="right") - 1
            kk = np.clip(k, 0, len(us) - 1)
            nxt = np.minimum(kk + 1, len(us) - 1)
            du = us[nxt] - us[kk]
            dh = hs[nxt] - hs[kk]
            last = kk == len(us) - 1
            with np.errstate(divide="ignore", invalid="ignore"):
                inner = us[kk] + (s - hs[kk]) * np.where(dh > 0, du / np.where(dh > 0, dh, 1.0), 0.0)
            g = np.where(last, s - fs[-1], inner)
            return np.where(k < 0, 0.0, np.minimum(g, s))
        return self._tab_inverse_scan(s)

    def _tab_inverse_scan(self, s):
        # u + f(u) not monotone: take the sup segment by segment
        us, fs = self._us, self._fs
        hs = us + fs
        flat = s.reshape(-1)
        best = np.full(flat.shape, -np.inf)
        for k in range(len(us) - 1):
            h0, h1 = hs[k], hs[k + 1]
            u0, u1 = us[k], us[k + 1]
            with np.errstate(divide="ignore", invalid="ignore"):
                cross = u0 + (flat - h0) * (u1 - u0) / (h1 - h0)
            top = np.where(h1 <= flat, u1, np.where(h0 <= flat, cross, np.nan))
            best = np.fmax(best, top)
        tail = np.where(flat >= hs[-1], flat - fs[-1], np.nan)
        best = np.fmax(best, tail)
        out = np.where(flat < fs[0], 0.0, np.where(np.isfinite(best), best, 0.0))
        return out.reshape(s.shape)

    # -- structure of the gap, used to place quadrature breakpoints ------
    def gap_kinks(self):
        """Points in s where s - g(s) is not smooth."""
        if self.kind == "logexp":
            return (LOG2,)
        if self.kind == "linearcap":
            return (1.0,)
        if self.kind == "zero":
            return ()
        return tuple(sorted({self.f0, *(float(h) for h in self._us + self._fs)}))

    def gap_level(self, c):
        """inf{s >= f(0) : gap(s) <= c}, for c > 0.  May be +inf."""
        if c <= 0:
            raise ValueError("level must be positive")
        f0 = self.f0
        if self.kind == "logexp":
            return f0 if c >= LOG2 else float(-np.log(-np.expm1(-c)))
        if self.kind in ("linearcap", "zero"):
            return f0
        if self.gap(f0) <= c:
            return f0
        if self.at_infinity > c:
            return float("inf")
        lo, hi = f0, max(2.0 * f0, f0 + 1.0)
        while self.gap(hi) > c:
            lo, hi = hi, 2.0 * hi
        for _ in range(200):
            if hi - lo <= 1e-13 * max(1.0, hi):
                break
            mid = 0.5 * (lo + hi)
            if self.gap(mid) > c:
                lo = mid
            else:
                hi = mid
        return hi

    def gap_support(self, eps=1e-18):
        """A point beyond which the gap is below ``eps``."""
        if self.kind == "zero":
            return 0.0
        if self.at_infinity > eps:
            return float("inf")
        return self.gap_level(eps)

    def __repr__(self):
        if self.kind == "tabulated":
            return f"Tabulated({len(self.knots)} knots)"
        return {"logexp": "LogExp", "linearcap": "LinearCap", "zero": "Zero"}[self.kind]


LogExp = ForcingFunction.logexp()
LinearCap = ForcingFunction.linearcap()
Zero = ForcingFunction.zero()


def eval_f(f: ForcingFunction, u):
    return f(u)


def right_inverse(f: ForcingFunction, s):
    return f.right_inverse(s)


def gap(f: ForcingFunction, s):
    return f.gap(s)


@dataclass(frozen=True)
class Violation:
    condition: str
    u: float
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple = ()

    @property
    def ok(self):
        return not self.violations

    def __bool__(self):
        return self.ok


def validate_class_S(f: ForcingFunction, grid_points=4001, slack=1e-12):
    """Audit both monotonicity conditions on a dense grid plus all knots."""
    top = 10.0
    if f.kind == "tabulated":
        top = max(top, 2.0 * f.knots[-1][0])
    u = np.linspace(0.0, top, grid_points)
    if f.kind == "tabulated":
        us = f._us
        u = np.union1d(u, np.concatenate([us, us + 1e-9, np.maximum(us - 1e-9, 0)]))
    v = np.asarray(f(u))
    found = []
    if not np.isfinite(f.f0):
        found.append(Violation("bounded", 0.0, "f(0) is not finite"))
    neg = np.nonzero(v < -slack)[0]
    if neg.size:
        found.append(Violation("nonnegative", float(u[neg[0]]), f"f = {v[neg[0]]:.3g}"))
    up = np.nonzero(np.diff(v) > slack)[0]
    if up.size:
        found.append(Violation("nonincreasing", float(u[up[0]]), "f increases after this point"))
    h = u + v
    down = np.nonzero(np.diff(h) < -slack)[0]
    if down.size:
        found.append(Violation("u + f(u) nondecreasing", float(u[down[0]]),
                               "u + f(u) decreases after this point"))
    return ValidationReport(tuple(found))


# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Component:
    w: float
    fp: ForcingFunction
    fm: ForcingFunction


@dataclass(frozen=True)
class ForcingLaw:
    """Finite mixture of (f_plus, f_minus) pairs, independent of the bias Theta."""

    p: float
    components: tuple = field(default_factory=tuple)
    name: str = ""

    def __post_init__(self):
        comps = tuple(c if isinstance(c, Component) else Component(*c) for c in self.components)
        if not comps:
            raise ValueError("a forcing law needs at least one component")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p = {self.p} is not a probability")
        ws = np.array([c.w for c in comps], dtype=float)
        if np.any(ws <= 0):
            raise ValueError("component weights must be positive")
        if abs(ws.sum() - 1.0) > 1e-12:
            raise ValueError(f"component weights sum to {ws.sum():.15g}, not 1")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "p", float(self.p))

    @classmethod
    def single(cls, p, fp, fm, name=""):
        return cls(p, (Component(1.0, fp, fm),), name)

    @property
    def weights(self):
        return np.array([c.w for c in self.components])

    def plus_parts(self):
        """Distinct f_plus functions with their total weights."""
        return _merge((c.w, c.fp) for c in self.components)

    def minus_parts(self):
        return _merge((c.w, c.fm) for c in self.components)

    def functions(self):
        seen = []
        for c in self.components:
            for f in (c.fp, c.fm):
                if f not in seen:
                    seen.append(f)
        return seen

    def to_json(self):
        out = {"p": self.p,
               "components": [{"w": c.w, "fp": c.fp.to_json(), "fm": c.fm.to_json()}
                              for c in self.components]}
        if self.name:
            out["name"] = self.name
        return out

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, str):
            obj = json.loads(obj)
        comps = tuple(Component(float(c["w"]), ForcingFunction.from_json(c["fp"]),
                                ForcingFunction.from_json(c["fm"]))
                      for c in obj["components"])
        return cls(float(obj["p"]), comps, obj.get("name", ""))

    @property
    def law_id(self):
        body = json.dumps({k: v for k, v in self.to_json().items() if k != "name"},
                          sort_keys=True)
        digest = hashlib.sha1(body.encode()).hexdigest()[:10]
        return f"{self.name}-{digest}" if self.name else digest

    def with_p(self, p):
        return ForcingLaw(p, self.components, self.name)


def _merge(pairs):
    out = []
    for w, f in pairs:
        for i, (w0, f0) in enumerate(out):
            if f0 == f:
                out[i] = (w0 + w, f0)
                break
        else:
            out.append((w, f))
    return out


# ---------------------------------------------------------------------------
def decay_integral(law: ForcingLaw, tol=1e-10):
    """Integral of (1 + s) E[|g+(s) - s| + |g-(s) - s|] over s >= 0.

    Returns a TailIntegral; ``value`` is +inf with a diagnostic when the
    tail does not decay.
    """
    for f in law.functions():
        rep = validate_class_S(f)
        if not rep.ok:
            raise DomainError(f"{f!r} is not in class S: {rep.violations[0]}")
    parts = law.plus_parts() + law.minus_parts()
    for _, f in parts:
        if f.at_infinity > 0:
            return TailIntegral(float("inf"), float("inf"), False,
                                f"{f!r} has f(inf) = {f.at_infinity:g} > 0, so s - g(s) does not decay")

    def integrand(s):
        tot = np.zeros_like(s)
        for w, f in parts:
            tot += w * f.gap(s)
        return (1.0 + s) * tot

    kinks = sorted({k for _, f in parts for k in f.gap_kinks()})
    return integrate_halfline(integrand, kinks, tol)


def apply_phi_array(x, y, theta, law: ForcingLaw, comp=None):
    """Vectorized Phi.  ``theta`` is boolean (True = max branch), ``comp``
    holds mixture component indices (defaults to component 0)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    with np.errstate(invalid="ignore"):
        d = np.abs(x - y)
    d = np.where(np.isnan(d), 0.0, d)
    hi = np.maximum(x, y)
    lo = np.minimum(x, y)
    if len(law.components) == 1 or comp is None:
        c = law.components[0]
        up = c.fp(d)
        dn = c.fm(d)
    else:
        up = np.empty_like(d)
        dn = np.empty_like(d)
        for k, c in enumerate(law.components):
            m = comp == k
            if m.any():
                up[m] = c.fp(d[m])
                dn[m] = c.fm(d[m])
    return np.where(theta, hi + up, lo - dn)


def apply_phi(x, y, theta, fpair):
    """Scalar Phi(x, y) for a fixed pair (f_plus, f_minus)."""
    fp, fm = fpair
    x, y = float(x), float(y)
    d = 0.0 if x == y else abs(x - y)
    if theta:
        return max(x, y) + float(fp(d))
    return min(x, y) - float(fm(d))
