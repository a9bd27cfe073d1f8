"""Population dynamics and exact tree samplers for the RDE."""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .cdf import STEP, ExtendedCDF
from .forcing import ForcingLaw, apply_phi_array

MAX_DEPTH = 30
_TREE_CHUNK = 1 << 22


@dataclass(frozen=True)
class InitialDistribution:
    """Law of X^(0).

    kinds: ``point`` (x), ``twopoint`` (x1, p1, x2), ``atom`` (q, x: the
    finite point x with mass q, -inf with mass 1-q), ``uniform`` (a, b),
    ``empirical`` (values), ``discrete`` (values, probs).
    """

    kind: str
    params: tuple = field(default_factory=tuple)

    def __post_init__(self):
        k, prm = self.kind, self.params
        if k == "point":
            _finite(prm[0])
        elif k == "twopoint":
            x1, p1, x2 = prm
            _finite(x1), _finite(x2), _prob(p1)
        elif k == "atom":
            q, x = prm
            _prob(q), _finite(x)
        elif k == "uniform":
            a, b = prm
            _finite(a), _finite(b)
            if not a < b:
                raise ValueError("uniform needs a < b")
        elif k == "empirical":
            if len(prm) == 0:
                raise ValueError("empirical needs at least one value")
        elif k == "discrete":
            vals, probs = prm
            probs = np.asarray(probs, float)
            if len(vals) != len(probs) or len(vals) == 0 or np.any(probs < 0) or abs(probs.sum() - 1) > 1e-12:
                raise ValueError("discrete needs matching values and probabilities summing to 1")
        else:
            raise ValueError(f"unknown initial distribution {k!r}")

    # constructors matching the usual names
    @classmethod
    def point_mass(cls, x=0.0):
        return cls("point", (float(x),))

    @classmethod
    def two_point(cls, x1, p1, x2):
        return cls("twopoint", (float(x1), float(p1), float(x2)))

    @classmethod
    def atom_at_neg_inf(cls, q, x=0.0):
        return cls("atom", (float(q), float(x)))

    @classmethod
    def uniform(cls, a=0.0, b=1.0):
        return cls("uniform", (float(a), float(b)))

    @classmethod
    def empirical(cls, values):
        return cls("empirical", tuple(float(v) for v in values))

    @classmethod
    def discrete(cls, support):
        vals = tuple(float(v) for v, _ in support)
        probs = tuple(float(p) for _, p in support)
        return cls("discrete", (vals, probs))

    def support(self):
        """Finite support as [(value, prob)], or None for continuous kinds."""
        k, prm = self.kind, self.params
        if k == "point":
            return [(prm[0], 1.0)]
        if k == "twopoint":
            x1, p1, x2 = prm
            return _collapse([(x1, p1), (x2, 1.0 - p1)])
        if k == "atom":
            q, x = prm
            return _collapse([(-np.inf, 1.0 - q), (x, q)])
        if k == "empirical":
            n = len(prm)
            return _collapse([(v, 1.0 / n) for v in prm])
        if k == "discrete":
            return _collapse(list(zip(*prm)))
        return None

    def sample(self, gen: np.random.Generator, n: int):
        if self.kind == "uniform":
            a, b = self.params
            return a + (b - a) * gen.random(n)
        sup = self.support()
        vals = np.array([v for v, _ in sup])
        cum = np.cumsum([p for _, p in sup])
        idx = np.searchsorted(cum, gen.random(n) * cum[-1], side="right")
        return vals[np.minimum(idx, len(vals) - 1)]

    def stratified(self, n: int):
        """n points at the quantiles (k + 1/2)/n: an exact-proportion pool."""
        u = (np.arange(n) + 0.5) / n
        if self.kind == "uniform":
            a, b = self.params
            return a + (b - a) * u
        sup = self.support()
        vals = np.array([v for v, _ in sup])
        cum = np.cumsum([p for _, p in sup])
        return vals[np.minimum(np.searchsorted(cum, u, side="right"), len(vals) - 1)]

    def to_json(self):
        k, prm = self.kind, self.params
        if k == "discrete":
            return {"kind": k, "values": list(prm[0]), "probs": list(prm[1])}
        if k == "empirical":
            return {"kind": k, "values": list(prm)}
        names = {"point": ("x",), "twopoint": ("x1", "p1", "x2"), "atom": ("q", "x"),
                 "uniform": ("a", "b")}[k]
        return {"kind": k, **dict(zip(names, prm))}

    @classmethod
    def parse(cls, spec):
        """Accepts a JSON object or a short form such as ``point:0``,
        ``twopoint:0,0.5,1``, ``atom:0.5,0``, ``uniform:0,1``,
        ``empirical:1,2,3`` or ``discrete:0=0.5,1=0.5``."""
        if isinstance(spec, InitialDistribution):
            return spec
        if isinstance(spec, dict):
            obj = spec
        else:
            spec = spec.strip()
            if spec.startswith("{"):
                obj = json.loads(spec)
            else:
                kind, _, rest = spec.partition(":")
                kind = kind.strip().lower()
                items = [t for t in rest.split(",") if t.strip()]
                if kind == "discrete":
                    pairs = [t.split("=") for t in items]
                    return cls.discrete([(float(v), float(p)) for v, p in pairs])
                nums = [float(t) for t in items]
                if kind == "empirical":
                    return cls.empirical(nums)
                return cls(kind, tuple(nums))
        kind = obj["kind"].lower()
        if kind == "discrete":
            return cls("discrete", (tuple(map(float, obj["values"])), tuple(map(float, obj["probs"]))))
        if kind == "empirical":
            return cls.empirical(obj["values"])
        names = {"point": ("x",), "twopoint": ("x1", "p1", "x2"), "atom": ("q", "x"),
                 "uniform": ("a", "b")}[kind]
        return cls(kind, tuple(float(obj[nm]) for nm in names))


def _finite(x):
    if not np.isfinite(x):
        raise ValueError("parameters must be finite")


def _prob(p):
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{p} is not a probability")


def _collapse(pairs):
    out = {}
    for v, p in pairs:
        if p > 0:
            out[float(v)] = out.get(float(v), 0.0) + float(p)
    return sorted(out.items())


@dataclass(frozen=True, eq=False)
class SamplePopulation:
    samples: np.ndarray
    generation: int
    law_id: str
    seed: int

    @property
    def size(self):
        return int(self.samples.size)

    def counts_at_infinity(self):
        s = self.samples
        return int(np.sum(s == -np.inf)), int(np.sum(s == np.inf))


def init_population(init: InitialDistribution, size: int, seed: int, law_id="",
                    stratified=False) -> SamplePopulation:
    """i.i.d. draws from ``init`` (or its quantiles when ``stratified``)."""
    if size < 2:
        raise ValueError("population size must be at least 2")
    if stratified:
        x = init.stratified(size)
    else:
        x = np.empty(size)
        for b, lo, hi in rngmod.blocks(size):
            x[lo:hi] = init.sample(rngmod.stream(seed, 0, b, rngmod.INIT), hi - lo)
    return SamplePopulation(x, 0, law_id, int(seed))


def _draw_block(x, law, gen, n_out):
    n = x.size
    i = gen.integers(0, n, n_out)
    j = gen.integers(0, n, n_out)
    theta = gen.random(n_out) < law.p
    comp = None
    if len(law.components) > 1:
        cum = np.cumsum(law.weights)
        comp = np.minimum(np.searchsorted(cum, gen.random(n_out) * cum[-1], side="right"),
                          len(law.components) - 1)
    return apply_phi_array(x[i], x[j], theta, law, comp)


def step_population(pop: SamplePopulation, law: ForcingLaw, threads: int = 1) -> SamplePopulation:
    """One generation: each output is Phi(X_i, X_j) with i, j uniform with
    replacement and fresh (Theta, component).  The randomness for output
    block b of generation g comes from the stream (seed, g, b), so the
    result does not depend on ``threads``."""
    x = pop.samples
    n = x.size
    out = np.empty(n)
    gen_no = pop.generation + 1

    def work(task):
        b, lo, hi = task
        out[lo:hi] = _draw_block(x, law, rngmod.stream(pop.seed, gen_no, b), hi - lo)

    tasks = rngmod.blocks(n)
    if threads > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(threads) as ex:
            list(ex.map(work, tasks))
    else:
        for t in tasks:
            work(t)
    return SamplePopulation(out, gen_no, pop.law_id or law.law_id, pop.seed)


def run_population(init, law, size, steps, seed, threads=1, stratified=False, callback=None):
    """Evolve ``steps`` generations; ``callback(pop)`` sees every generation."""
    pop = init_population(init, size, seed, law.law_id, stratified)
    if callback:
        callback(pop)
    for _ in range(steps):
        pop = step_population(pop, law, threads)
        if callback:
            callback(pop)
    return pop


# ---------------------------------------------------------------------------
def _check_depth(n):
    if not 0 <= n <= MAX_DEPTH:
        raise ValueError(f"tree depth must be in [0, {MAX_DEPTH}], got {n}")


def _tree_batches(n, count):
    per = max(1, _TREE_CHUNK >> n)
    return [(b, lo, min(lo + per, count)) for b, lo in enumerate(range(0, count, per))]


def exact_samples(law: ForcingLaw, init: InitialDistribution, n: int, count: int, seed: int):
    """``count`` independent draws of X^(n) from full binary trees of depth n."""
    _check_depth(n)
    out = np.empty(count)
    cum = np.cumsum(law.weights)
    for b, lo, hi in _tree_batches(n, count):
        gen = rngmod.stream(seed, 1 << 20, n, b)
        x = init.sample(gen, (hi - lo) << n)
        while x.size > hi - lo:
            pair = x.reshape(-1, 2)
            theta = gen.random(pair.shape[0]) < law.p
            comp = None
            if len(law.components) > 1:
                comp = np.minimum(np.searchsorted(cum, gen.random(pair.shape[0]), side="right"),
                                  len(law.components) - 1)
            x = apply_phi_array(pair[:, 0], pair[:, 1], theta, law, comp)
        out[lo:hi] = x
    return out


def exact_sample(law: ForcingLaw, init: InitialDistribution, n: int, seed: int):
    return float(exact_samples(law, init, n, 1, seed)[0])


def exact_resistance_samples(p: float, n: int, count: int, seed: int):
    """log R^(n) of the series-parallel graph: series w.p. p, else parallel."""
    _check_depth(n)
    out = np.empty(count)
    for b, lo, hi in _tree_batches(n, count):
        gen = rngmod.stream(seed, 2 << 20, n, b)
        x = np.zeros((hi - lo) << n)
        while x.size > hi - lo:
            a, c = x[0::2], x[1::2]
            series = gen.random(a.size) < p
            x = np.where(series, np.logaddexp(a, c), -np.logaddexp(-a, -c))
        out[lo:hi] = x
    return out


def exact_distance_samples(p: float, n: int, count: int, seed: int):
    """Graph distance D^(n): series sums, parallel takes the minimum."""
    _check_depth(n)
    out = np.empty(count, dtype=np.int64)
    for b, lo, hi in _tree_batches(n, count):
        gen = rngmod.stream(seed, 3 << 20, n, b)
        x = np.ones((hi - lo) << n, dtype=np.int64)
        while x.size > hi - lo:
            a, c = x[0::2], x[1::2]
            series = gen.random(a.size) < p
            x = np.where(series, a + c, np.minimum(a, c))
        out[lo:hi] = x
    return out


def exact_resistance_sample(p: float, n: int, seed: int) -> float:
    return float(exact_resistance_samples(p, n, 1, seed)[0])


def exact_distance_sample(p: float, n: int, seed: int) -> int:
    return int(exact_distance_samples(p, n, 1, seed)[0])


# ---------------------------------------------------------------------------
def empirical_cdf(pop, grid=None) -> ExtendedCDF:
    """Step CDF of a population (or raw sample array).

    With no grid, the grid is the set of distinct finite samples, which
    gives the exact empirical CDF.
    """
    s = pop.samples if isinstance(pop, SamplePopulation) else np.asarray(pop, float)
    n = s.size
    neg = int(np.sum(s == -np.inf))
    pos = int(np.sum(s == np.inf))
    fin = np.sort(s[np.isfinite(s)])
    if grid is None:
        grid = np.unique(fin)
        if grid.size == 0:
            grid = np.array([0.0])
    grid = np.asarray(grid, float)
    if grid.size == 0:
        raise ValueError("empty grid")
    counts = np.searchsorted(fin, grid, side="right")
    vals = (counts + neg) / n
    return ExtendedCDF(grid, vals, neg / n, pos / n, STEP)
