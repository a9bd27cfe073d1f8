"""Experiment configs, named forcing-law presets and the frozen tolerance file."""
from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .forcing import Component, ForcingLaw, LinearCap, LogExp, Zero
from .mc_engine import InitialDistribution

ENGINES = ("mc", "lattice", "lognat", "smooth")
ACCEPTANCE_ENV = "RDE_ACCEPTANCE_CONFIG"


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# presets

def resistance_law(p=0.5):
    return ForcingLaw.single(p, LogExp, LogExp, "resistance")


def distance_law(p=0.5):
    return ForcingLaw.single(p, LogExp, Zero, "distance")


def lattice_law(q_plus, q_minus, p=0.5, name="lattice"):
    """f+ = (1-u)_+ w.p. q+, f- = (1-u)_+ w.p. q-, independently, else 0."""
    for nm, v in (("q_plus", q_plus), ("q_minus", q_minus), ("p", p)):
        if not 0.0 <= v <= 1.0:
            raise ConfigError(f"{nm} = {v} must lie in [0, 1]")
    comps = []
    for fp, wp in ((LinearCap, q_plus), (Zero, 1.0 - q_plus)):
        for fm, wm in ((LinearCap, q_minus), (Zero, 1.0 - q_minus)):
            if wp * wm > 0:
                comps.append(Component(wp * wm, fp, fm))
    # products of exact weights can miss 1 by an ulp
    s = sum(c.w for c in comps)
    comps = [Component(c.w / s, c.fp, c.fm) for c in comps]
    return ForcingLaw(p, tuple(comps), name)


def hipster_law(q):
    if not 0.0 <= q <= 0.5:
        raise ConfigError(f"hipster(q={q}): needs q <= 1/2 (q = q+/2 with q+ <= 1; "
                          "the asymmetric hipster walk is a monotone RDE only if q <= 1/2)")
    return lattice_law(2.0 * q, 0.0, 0.5, "hipster")


def cooperative_law(r, q):
    if not (0.0 <= r <= 1.0 and 0.0 < q <= 1.0):
        raise ConfigError(f"cooperative(r={r}, q={q}): needs r in [0, 1] and q in (0, 1]")
    if abs(r - 0.5) > 0.5 * (1.0 / q - 1.0) + 1e-12:
        raise ConfigError(f"cooperative(r={r}, q={q}) violates |r - 1/2| <= (1/q - 1)/2: "
                          f"{abs(r - 0.5):.6g} > {0.5 * (1.0 / q - 1.0):.6g}")
    qp = min(2.0 * r * q, 1.0)
    qm = min(2.0 * (1.0 - r) * q, 1.0)
    return lattice_law(qp, qm, 0.5, "cooperative")


_PRESET_ARGS = {
    "resistance": (resistance_law, ("p",)),
    "distance": (distance_law, ("p",)),
    "lattice": (lattice_law, ("q_plus", "q_minus", "p")),
    "hipster": (hipster_law, ("q",)),
    "cooperative": (cooperative_law, ("r", "q")),
}


def preset_law(name, *args, **kwargs):
    if name not in _PRESET_ARGS:
        raise ConfigError(f"unknown preset {name!r}; known: {sorted(_PRESET_ARGS)}")
    fn, _ = _PRESET_ARGS[name]
    return fn(*args, **kwargs)


def preset_path(name):
    return resources.files("rde") / "presets" / f"{name}.json"


def _law_from_obj(obj):
    if "preset" in obj:
        name = obj["preset"]
        if name not in _PRESET_ARGS:
            raise ConfigError(f"unknown preset {name!r}; known: {sorted(_PRESET_ARGS)}")
        names = _PRESET_ARGS[name][1]
        kwargs = {k: float(obj[k]) for k in names if k in obj}
        return preset_law(name, **kwargs)
    try:
        return ForcingLaw.from_json(obj)
    except (KeyError, TypeError) as e:
        raise ConfigError(f"malformed forcing law: {e}") from e


_CALL = re.compile(r"^\s*([a-z_]+)\s*\(([^)]*)\)\s*$")


def parse_law(spec) -> ForcingLaw:
    """A ForcingLaw from a preset name (``resistance``), a preset call
    (``cooperative(0.5, 1)``), a JSON file, a bundled preset file name, or
    inline JSON."""
    if isinstance(spec, ForcingLaw):
        return spec
    if isinstance(spec, dict):
        return _law_from_obj(spec)
    s = str(spec).strip()
    if s.startswith("{"):
        try:
            return _law_from_obj(json.loads(s))
        except json.JSONDecodeError as e:
            raise ConfigError(f"malformed JSON law: {e}") from e
    m = _CALL.match(s)
    if m:
        args = [float(a) for a in m.group(2).split(",") if a.strip()]
        return preset_law(m.group(1), *args)
    path = Path(s)
    if path.is_file():
        return _law_from_obj(_read_json(path))
    stem = path.stem if path.suffix == ".json" else s
    bundled = preset_path(stem)
    if bundled.is_file():
        return _law_from_obj(json.loads(bundled.read_text()))
    if stem in _PRESET_ARGS:
        return preset_law(stem)
    raise ConfigError(f"cannot resolve forcing law {spec!r}")


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: malformed JSON: {e}") from e


# ---------------------------------------------------------------------------
# experiment config

@dataclass
class ExperimentConfig:
    law: ForcingLaw
    init: InitialDistribution | str
    engine: str = "mc"
    steps: int = 0
    checkpoints: list = field(default_factory=list)
    pool: int = 10**5
    seed: int = 0
    threads: int = 1
    out: str | None = None
    grid: tuple = (-20.0, 20.0, 401)
    delta: float = 0.05
    checks: dict = field(default_factory=dict)

    def to_json(self):
        init = self.init if isinstance(self.init, str) else self.init.to_json()
        return {"law": self.law.to_json(), "init": init, "engine": self.engine,
                "steps": self.steps, "checkpoints": self.checkpoints, "pool": self.pool,
                "seed": self.seed, "grid": list(self.grid), "delta": self.delta,
                "checks": self.checks}


_SMOOTH_INITS = ("logistic", "gaussian")


def parse_init(spec):
    if isinstance(spec, str) and spec.strip().lower() in _SMOOTH_INITS:
        return spec.strip().lower()
    try:
        return InitialDistribution.parse(spec)
    except (ValueError, KeyError, TypeError) as e:
        raise ConfigError(f"bad initial distribution {spec!r}: {e}") from e


def parse_config(source) -> ExperimentConfig:
    """From a path, inline JSON text, or a dict."""
    if isinstance(source, dict):
        obj = source
    else:
        s = str(source).strip()
        if s.startswith("{"):
            try:
                obj = json.loads(s)
            except json.JSONDecodeError as e:
                raise ConfigError(f"malformed JSON config: {e}") from e
        else:
            obj = _read_json(s)
    if "law" not in obj:
        raise ConfigError("config needs a 'law'")
    law = parse_law(obj["law"])
    init = parse_init(obj.get("init", "point:0"))
    engine = obj.get("engine", "mc")
    if engine not in ENGINES:
        raise ConfigError(f"engine must be one of {ENGINES}, got {engine!r}")
    cks = sorted(int(n) for n in obj.get("checkpoints", []))
    steps = int(obj.get("steps", cks[-1] if cks else 0))
    if steps < 0 or any(n < 1 or n > steps for n in cks):
        raise ConfigError("checkpoints must lie in [1, steps]")
    pool = int(obj.get("pool", 10**5))
    if pool < 2:
        raise ConfigError("pool must be at least 2")
    grid = tuple(obj.get("grid", (-20.0, 20.0, 401)))
    if len(grid) != 3 or not grid[0] < grid[1] or int(grid[2]) < 2:
        raise ConfigError("grid is [lo, hi, points] with lo < hi and points >= 2")
    if engine == "smooth" and not isinstance(init, str) and init.kind != "uniform":
        raise ConfigError("the smooth engine needs a continuous init: logistic, gaussian or uniform:a,b")
    if engine != "smooth" and isinstance(init, str):
        raise ConfigError(f"init {init!r} is only available for the smooth engine")
    return ExperimentConfig(law, init, engine, steps, cks, pool, int(obj.get("seed", 0)),
                            int(obj.get("threads", 1)), obj.get("out"),
                            (float(grid[0]), float(grid[1]), int(grid[2])),
                            float(obj.get("delta", 0.05)), dict(obj.get("checks", {})))


# ---------------------------------------------------------------------------
# frozen tolerances

def load_acceptance(path=None):
    """Tolerance file: ``path``, else $RDE_ACCEPTANCE_CONFIG, else the bundled copy."""
    path = path or os.environ.get(ACCEPTANCE_ENV)
    if path:
        return _read_json(path)
    return json.loads((resources.files("rde") / "acceptance.json").read_text())
