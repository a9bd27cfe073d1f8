"""CDFs on the extended real line and on lattices."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STEP = "step"
LINEAR = "piecewise_linear"
INTEGERS = "integers"
LOG_NATURALS = "log_naturals"

_SLACK = 1e-12


class IntegrityError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ExtendedCDF:
    """F on a grid, with atoms at -inf (``mass_neg_inf`` = F(-inf)) and at
    +inf (``mass_pos_inf`` = 1 - F(+inf)).

    Step mode is right-continuous and constant between grid points; below
    the first point it equals F(-inf).  Linear mode interpolates and holds
    the boundary values outside the grid.
    """

    grid: np.ndarray
    values: np.ndarray
    mass_neg_inf: float = 0.0
    mass_pos_inf: float = 0.0
    mode: str = STEP

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or g.size == 0 or g.shape != v.shape:
            raise ValueError("grid and values must be equal-length, nonempty 1-d arrays")
        if np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing")
        if self.mode not in (STEP, LINEAR):
            raise ValueError(f"unknown mode {self.mode!r}")
        lo, hi = float(self.mass_neg_inf), 1.0 - float(self.mass_pos_inf)
        if not (-_SLACK <= lo and hi <= 1 + _SLACK):
            raise ValueError("masses at infinity must lie in [0, 1]")
        if np.any(np.diff(v) < -_SLACK) or v[0] < lo - _SLACK or v[-1] > hi + _SLACK:
            raise ValueError("values must be nondecreasing within [F(-inf), F(+inf)]")
        g.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "mass_neg_inf", lo)
        object.__setattr__(self, "mass_pos_inf", float(self.mass_pos_inf))

    @property
    def upper(self):
        """F(+inf)."""
        return 1.0 - self.mass_pos_inf

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.mode == LINEAR:
            out = np.interp(x, self.grid, self.values)
        else:
            k = np.searchsorted(self.grid, x, side="right") - 1
            out = np.where(k >= 0, self.values[np.clip(k, 0, None)], self.mass_neg_inf)
        out = np.where(x == np.inf, self.upper, np.where(x == -np.inf, self.mass_neg_inf, out))
        return out if out.ndim else float(out)

    def left_limit(self, x):
        x = np.asarray(x, dtype=float)
        if self.mode == LINEAR:
            return self(x)
        k = np.searchsorted(self.grid, x, side="left") - 1
        out = np.where(k >= 0, self.values[np.clip(k, 0, None)], self.mass_neg_inf)
        return out if out.ndim else float(out)

    def shifted(self, c):
        """F + c, for -F(-inf) <= c <= 1 - F(+inf)."""
        return ExtendedCDF(self.grid, self.values + c, self.mass_neg_inf + c,
                           self.mass_pos_inf - c, self.mode)

    def with_values(self, values, mass_neg_inf=None, mass_pos_inf=None):
        return ExtendedCDF(self.grid, values,
                           self.mass_neg_inf if mass_neg_inf is None else mass_neg_inf,
                           self.mass_pos_inf if mass_pos_inf is None else mass_pos_inf,
                           self.mode)

    @classmethod
    def from_callable(cls, cdf, grid, mode=LINEAR, mass_neg_inf=None, mass_pos_inf=None):
        """Sample a continuous CDF on ``grid``; mass outside the grid goes to
        the atoms at infinity unless given explicitly."""
        grid = np.asarray(grid, dtype=float)
        v = np.clip(np.asarray(cdf(grid), dtype=float), 0.0, 1.0)
        v = np.maximum.accumulate(v)
        lo = float(v[0]) if mass_neg_inf is None else mass_neg_inf
        hi = 1.0 - float(v[-1]) if mass_pos_inf is None else mass_pos_inf
        return cls(grid, v, lo, hi, mode)

    def to_rows(self):
        return list(zip(self.grid.tolist(), self.values.tolist()))


@dataclass(frozen=True, eq=False)
class LatticeCDF:
    """F at consecutive lattice sites.

    For the integers, site k is the point ``offset + k``.  For log ℕ the
    sites are ``log(nodes[offset + k])``; ``nodes`` lists the represented
    positive integers (consecutive at first, geometrically spaced later)
    and the point D = 0 sits at -inf with mass ``left_value``.
    """

    offset: int
    values: np.ndarray
    left_value: float
    right_value: float
    lattice: str = INTEGERS
    nodes: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("values must be a nonempty 1-d array")
        if self.lattice not in (INTEGERS, LOG_NATURALS):
            raise ValueError(f"unknown lattice {self.lattice!r}")
        if (np.any(np.diff(v) < -_SLACK) or v[0] < self.left_value - _SLACK
                or v[-1] > self.right_value + _SLACK or self.right_value > 1 + _SLACK
                or self.left_value < -_SLACK):
            raise ValueError("lattice CDF values must be nondecreasing within [left, right]")
        if self.lattice == LOG_NATURALS:
            nodes = np.arange(1, v.size + 1, dtype=float) if self.nodes is None else np.asarray(self.nodes, float)
            if self.offset != 0 or nodes.size != v.size:
                raise ValueError("log-naturals CDFs carry one value per node, offset 0")
            object.__setattr__(self, "nodes", nodes)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def sites(self):
        if self.lattice == INTEGERS:
            return np.arange(self.offset, self.offset + self.values.size, dtype=float)
        return np.log(self.nodes)

    def __call__(self, x):
        return self.to_extended()(x)

    def to_extended(self):
        """Step-mode ExtendedCDF on the lattice sites."""
        return ExtendedCDF(self.sites, self.values, self.left_value, 1.0 - self.right_value, STEP)
