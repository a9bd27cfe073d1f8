"""Command line runner: ``rde <subcommand> ...``."""
from __future__ import annotations

import argparse
import datetime as _dt
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import analysis as an
from . import mc_engine as mc
from .cdf import LINEAR, ExtendedCDF, LatticeCDF
from .cdf_evolution import (apply_T_lattice, apply_T_lognat, apply_T_smooth, lattice_params,
                            lognat_from_distance_law, lognat_nodes, one_step_enumeration,
                            iterate_enumeration, support_to_lattice)
from .coefficients import effective_coefficients
from .config import (ConfigError, ExperimentConfig, cooperative_law, distance_law,
                     load_acceptance, parse_config, parse_init, parse_law, resistance_law)

CASES = ("resistance-beta22", "distance-beta21", "lattice-beta22", "conditional-distance")
PLOT_POINTS = 801


# ---------------------------------------------------------------------------
# artifact writers

def cdf_csv(F, generation=None):
    """CSV text: comment lines with the masses at +-inf, then x,F rows."""
    if isinstance(F, LatticeCDF):
        F = F.to_extended()
    buf = io.StringIO()
    buf.write(f"# neg_inf_mass={F.mass_neg_inf!r}\n")
    buf.write(f"# pos_inf_mass={F.mass_pos_inf!r}\n")
    if generation is not None:
        buf.write(f"# generation={int(generation)}\n")
    buf.write("x,F\n")
    for x, v in zip(F.grid.tolist(), F.values.tolist()):
        buf.write(f"{x!r},{v!r}\n")
    return buf.getvalue()


def dump_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


class Artifacts:
    """Writes into ``out`` when given; otherwise the primary text goes to stdout
    and side artifacts are dropped."""

    def __init__(self, out):
        self.out = Path(out) if out else None
        if self.out:
            self.out.mkdir(parents=True, exist_ok=True)
        self.files = []

    def primary(self, name, text):
        if self.out is None:
            sys.stdout.write(text)
        else:
            self.write(name, text)

    def write(self, name, text):
        if self.out is None:
            return None
        path = self.out / name
        path.write_text(text)
        self.files.append(name)
        return path

    def path(self, name):
        if self.out is None:
            return None
        self.files.append(name)
        return self.out / name

    def metadata(self, args, started, extra=None):
        if self.out is None:
            return
        meta = {"timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
                "seconds": round(time.perf_counter() - started, 3), "argv": sys.argv[1:],
                "version": __version__, "files": sorted(set(self.files))}
        if extra:
            meta.update(extra)
        (self.out / "metadata.json").write_text(dump_json(meta))


def profile_tsv(G, ref, ys):
    rows = ["x\tempirical\treference"]
    for y, f, r in zip(ys.tolist(), np.asarray(G(ys)).tolist(), np.asarray(ref(ys)).tolist()):
        rows.append(f"{y!r}\t{f!r}\t{r!r}")
    return "\n".join(rows) + "\n"


def _plot_grid(limit):
    lo, hi = (-0.25, 1.25)
    if limit is not None and limit.kind == "conditional_distance":
        hi = np.sqrt(limit.q) + 0.25
    return np.linspace(lo, hi, PLOT_POINTS)


def write_study(art, report, stem, title):
    """Per-checkpoint profile TSVs and the two figures."""
    from . import plotting
    if not report.profiles:
        return
    limit = report.limit_law
    ys = _plot_grid(limit)
    ref = limit.cdf if limit.kind != "degenerate" else limit.reference
    curves = {}
    for n, G in sorted(report.profiles.items()):
        art.write(f"{stem}_profile_N{n}.tsv", profile_tsv(G, ref, ys))
        curves[n] = (ys, np.asarray(G(ys)), np.asarray(ref(ys)))
    if art.out:
        plotting.plot_profiles(curves, art.path(f"{stem}_profiles.png"), title)
        plotting.plot_ks(report.checkpoints, art.path(f"{stem}_ks.png"), title)


# ---------------------------------------------------------------------------
# subcommands

def cmd_coeffs(args, art):
    law = parse_law(args.law)
    c = effective_coefficients(law, tol=args.tol)
    out = {"law_id": law.law_id, **c.to_json()}
    art.primary("coeffs.json", dump_json(out))
    return 0


def cmd_simulate(args, art):
    law = parse_law(args.law)
    init = parse_init(args.init)
    if isinstance(init, str):
        raise ConfigError("simulate needs a sampleable init, not a smooth probe")
    cks = set(_int_list(args.checkpoints))
    if args.exact_tree:
        x = mc.exact_samples(law, init, args.steps, args.pool, args.seed)
        art.primary("simulate.csv", cdf_csv(mc.empirical_cdf(x), args.steps))
        return 0
    pop = mc.init_population(init, args.pool, args.seed, law.law_id, args.stratified)
    for _ in range(args.steps):
        pop = mc.step_population(pop, law, args.threads)
        if pop.generation in cks:
            art.write(f"simulate_N{pop.generation}.csv", cdf_csv(mc.empirical_cdf(pop), pop.generation))
    art.primary("simulate.csv", cdf_csv(mc.empirical_cdf(pop), pop.generation))
    return 0


def _smooth_initial(init, grid):
    g = np.linspace(grid[0], grid[1], int(grid[2]))
    if init == "logistic":
        v = 1.0 / (1.0 + np.exp(-g))
    elif init == "gaussian":
        from scipy.special import ndtr
        v = ndtr(g)
    else:
        a, b = init.params
        v = np.clip((g - a) / (b - a), 0.0, 1.0)
    return ExtendedCDF(g, v, float(v[0]), float(1.0 - v[-1]), LINEAR)


def evolve(cfg: ExperimentConfig, callback=None):
    """Deterministic evolution; ``callback(n, F)`` sees every generation."""
    law = cfg.law
    if cfg.engine == "lattice":
        qp, qm = lattice_params(law)
        F = support_to_lattice(cfg.init.support())
        step = lambda F: apply_T_lattice(F, qp, qm, law.p)  # noqa: E731
    elif cfg.engine == "lognat":
        if not an.is_distance_law(law):
            raise ConfigError("the lognat engine evolves the distance law")
        dl = an._distance_law_from_init(cfg.init)
        c = effective_coefficients(law)
        top = np.log(max(max(dl), 1))
        log_max = top + 2.5 * np.sqrt(abs(c.sigma) * max(cfg.steps, 1)) + 10.0
        F = lognat_from_distance_law(dl, lognat_nodes(log_max, delta=cfg.delta))
        step = lambda F: apply_T_lognat(F, law.p)  # noqa: E731
    elif cfg.engine == "smooth":
        F = _smooth_initial(cfg.init, cfg.grid)
        step = lambda F: apply_T_smooth(F, law)  # noqa: E731
    else:
        raise ConfigError(f"evolve does not run the {cfg.engine!r} engine; use simulate")
    for n in range(1, cfg.steps + 1):
        F = step(F)
        if callback:
            callback(n, F)
    return F


def cmd_evolve(args, art):
    cks = set(_int_list(args.checkpoints))
    grid = _float_list(args.grid)
    cfg = parse_config({"law": args.law, "init": args.init, "engine": args.engine,
                        "steps": args.steps, "checkpoints": sorted(cks),
                        "grid": [grid[0], grid[1], int(grid[2])], "delta": args.delta})

    def cb(n, F):
        if n in cks:
            art.write(f"evolve_N{n}.csv", cdf_csv(F, n))

    F = evolve(cfg, cb)
    art.primary("evolve.csv", cdf_csv(F, cfg.steps))
    return 0


def _case(name, acc, pool=None, N=None):
    """(engine, law, init, checkpoints, kwargs, check)."""
    if name == "lattice-beta22":
        a = acc["lattice_beta22"]
        cks = a["checkpoints"] if N is None else _scaled_checkpoints(a["checkpoints"], N)
        return ("lattice", cooperative_law(0.5, 1.0), "point:0", cks, {},
                {"ks_max": a["ks_max"], "decreasing": True})
    if name == "resistance-beta22":
        a = acc["resistance_beta22"]
        cks = a["checkpoints"] if N is None else _scaled_checkpoints(a["checkpoints"], N)
        return ("mc", resistance_law(), "point:0", cks,
                {"pool": pool or a["pool"], "seed": a["seed"]}, {"ks_max": a["ks_max"]})
    if name == "distance-beta21":
        a = acc["distance_beta21"]
        cks = a["checkpoints"] if N is None else _scaled_checkpoints(a["checkpoints"], N)
        return ("lognat", distance_law(), "point:0", cks, {"delta": a["delta"]},
                {"decreasing": True})
    if name == "conditional-distance":
        a = acc["conditional_distance"]
        cks = a["checkpoints"] if N is None else _scaled_checkpoints(a["checkpoints"], N)
        return ("lognat", distance_law(), f"atom:{a['q']},0", cks, {"delta": a["delta"]},
                {"ks_max": a["ks_max"], "atom_preserved": True})
    raise ConfigError(f"unknown case {name!r}; choose from {CASES}")


def _scaled_checkpoints(cks, N):
    top = max(cks)
    return sorted({max(1, round(c * N / top)) for c in cks})


def evaluate_checks(report, checks, atom=None):
    ks = report.ks()
    out = {}
    if "ks_max" in checks:
        out["ks_max"] = {"value": ks[-1], "limit": checks["ks_max"], "pass": ks[-1] <= checks["ks_max"]}
    if checks.get("decreasing"):
        out["decreasing"] = {"value": ks, "pass": all(b < a for a, b in zip(ks, ks[1:]))}
    if checks.get("atom_preserved"):
        out["atom_preserved"] = {"value": atom, "pass": bool(atom)}
    return out


def run_study(art, engine, law, init, cks, kwargs, checks, threads, stem, title):
    atoms = []
    F0_neg = an.init_cdf(mc.InitialDistribution.parse(init)).mass_neg_inf

    def cb(n, F):
        neg = F.left_value if isinstance(F, LatticeCDF) else F.mass_neg_inf
        atoms.append(neg == F0_neg)
        if engine != "mc":
            art.write(f"{stem}_cdf_N{n}.csv", cdf_csv(F, n))

    rep = an.convergence_study(engine, law, init, cks, threads=threads, keep_profiles=True,
                               callback=cb, **kwargs)
    res = evaluate_checks(rep, checks, all(atoms))
    payload = rep.to_json()
    payload["checks"] = res
    payload["pass"] = all(c["pass"] for c in res.values())
    write_study(art, rep, stem, title)
    art.primary(f"{stem}.json", dump_json(payload))
    return payload, rep


def cmd_verify(args, art):
    acc = load_acceptance(args.acceptance)
    engine, law, init, cks, kw, checks = _case(args.case, acc, args.pool, args.N)
    if args.seed_override is not None and engine == "mc":
        kw["seed"] = args.seed_override
    payload, rep = run_study(art, engine, law, init, cks, kw, checks, args.threads, "report",
                             args.case)
    art.metadata(args, args._started, {"runtime": rep.runtime})
    return 0 if payload["pass"] else 1


def cmd_consistency(args, art):
    from . import plotting
    law = parse_law(args.law)
    deltas = _float_list(args.deltas)
    tab = an.consistency_check(law, args.probe, deltas)
    art.primary("consistency.json", dump_json(tab.to_json()))
    art.write("consistency.tsv", "delta\tremainder\n" + "".join(
        f"{d!r}\t{r!r}\n" for d, r in zip(tab.deltas, tab.remainders)))
    if art.out:
        plotting.plot_remainders(tab.deltas, tab.remainders, art.path("consistency.png"),
                                 f"{law.name or law.law_id}, {args.probe} probe")
    dec = all(b < a for a, b in zip(tab.remainders, tab.remainders[1:]))
    return 0 if dec else 1


def cmd_front_speed(args, art):
    from . import plotting
    law = parse_law(args.law) if args.law else None
    fs = an.front_speed(args.p, law, args.pool, args.N, args.seed, args.threads)
    art.primary("front_speed.json", dump_json(fs.to_json()))
    art.write("front_speed.tsv", "n\tmean_log_R\n" + "".join(
        f"{n}\t{m!r}\n" for n, m in enumerate(fs.means)))
    if art.out:
        n = np.arange(len(fs.means))
        lo = len(n) // 2
        icpt = float(np.mean(fs.means[lo:]) - fs.slope_estimate * np.mean(n[lo:]))
        plotting.plot_series(n, fs.means, art.path("front_speed.png"), "n", "mean log R",
                             f"p = {args.p}", (fs.slope_estimate, icpt))
    return 0 if fs.passed else 1


def _parse_support(text):
    items = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        v, _, p = tok.partition("=")
        items.append((float(v), float(p)))
    return items


def cmd_enumerate(args, art):
    law = parse_law(args.law)
    sup = _parse_support(args.support)
    res = iterate_enumeration(sup, law, args.steps) if args.steps != 1 else one_step_enumeration(sup, law)
    text = "value,prob\n" + "".join(f"{v!r},{p!r}\n" for v, p in res)
    art.primary("enumerate.csv", text)
    return 0


def run(cfg: ExperimentConfig, art=None, started=None):
    """Run a config file; returns the exit code."""
    art = art or Artifacts(cfg.out)
    started = started or time.perf_counter()
    art.write("config.json", dump_json(cfg.to_json()))
    code = 0
    if cfg.engine in ("mc", "lattice", "lognat") and cfg.checkpoints and cfg.law.p == 0.5:
        kw = {"seed": cfg.seed}
        if cfg.engine == "mc":
            kw["pool"] = cfg.pool
        if cfg.engine == "lognat":
            kw["delta"] = cfg.delta
        payload, rep = run_study(art, cfg.engine, cfg.law, cfg.init.to_json(), cfg.checkpoints,
                                 kw, cfg.checks, cfg.threads, "report",
                                 cfg.law.name or cfg.law.law_id)
        code = 0 if payload["pass"] else 1
    elif cfg.engine == "mc":
        pop = mc.init_population(cfg.init, cfg.pool, cfg.seed, cfg.law.law_id)
        cks = set(cfg.checkpoints)
        for _ in range(cfg.steps):
            pop = mc.step_population(pop, cfg.law, cfg.threads)
            if pop.generation in cks:
                art.write(f"cdf_N{pop.generation}.csv", cdf_csv(mc.empirical_cdf(pop), pop.generation))
        art.primary("cdf.csv", cdf_csv(mc.empirical_cdf(pop), pop.generation))
    else:
        cks = set(cfg.checkpoints)

        def cb(n, F):
            if n in cks:
                art.write(f"cdf_N{n}.csv", cdf_csv(F, n))

        F = evolve(cfg, cb)
        art.primary("cdf.csv", cdf_csv(F, cfg.steps))
    art.metadata(None, started)
    return code


def cmd_run(args, art):
    cfg = parse_config(args.config)
    if args.out:
        cfg.out = args.out
    cfg.threads = args.threads
    if args.seed_given:
        cfg.seed = args.seed
    return run(cfg, Artifacts(cfg.out), args._started)


# ---------------------------------------------------------------------------
# argument parsing

def _int_list(text):
    return [int(t) for t in str(text or "").split(",") if t.strip()]


def _float_list(text):
    if isinstance(text, (list, tuple)):
        return [float(t) for t in text]
    return [float(t) for t in str(text).split(",") if t.strip()]


def _globals(parser, suppress):
    d = argparse.SUPPRESS
    parser.add_argument("--seed", type=int, default=d if suppress else 0,
                        help="master seed (default 0)")
    parser.add_argument("--threads", type=int, default=d if suppress else 1,
                        help="worker threads for Monte Carlo (results do not depend on it)")
    parser.add_argument("--out", default=d if suppress else None,
                        help="output directory; without it the main table goes to stdout")


def build_parser():
    ap = argparse.ArgumentParser(prog="rde", description=__doc__)
    _globals(ap, False)
    ap.add_argument("--version", action="version", version=f"rde {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    _globals(common, True)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coeffs", parents=[common], help="effective coefficients sigma, a, alpha")
    p.add_argument("--law", required=True)
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(fn=cmd_coeffs)

    p = sub.add_parser("simulate", parents=[common], help="population dynamics Monte Carlo")
    p.add_argument("--law", default="resistance")
    p.add_argument("--init", default="point:0")
    p.add_argument("--pool", type=int, default=10**5)
    p.add_argument("--steps", type=int, default=0)
    p.add_argument("--checkpoints", default="")
    p.add_argument("--stratified", action="store_true", help="start from the init quantiles")
    p.add_argument("--exact-tree", action="store_true",
                   help="draw --pool independent full-tree samples of depth --steps instead")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("evolve", parents=[common], help="deterministic CDF evolution")
    p.add_argument("--law", default="cooperative")
    p.add_argument("--engine", "--mode", dest="engine", choices=("lattice", "lognat", "smooth"),
                   default="lattice")
    p.add_argument("--init", default="point:0")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--checkpoints", default="")
    p.add_argument("--grid", default="-20,20,401", help="lo,hi,points for the smooth engine")
    p.add_argument("--delta", type=float, default=0.05, help="log spacing of the lognat grid")
    p.set_defaults(fn=cmd_evolve)

    p = sub.add_parser("verify", parents=[common], help="convergence to a limit law")
    p.add_argument("--case", required=True, choices=CASES)
    p.add_argument("--pool", type=int, default=None, help="Monte Carlo pool override")
    p.add_argument("--N", type=int, default=None, help="rescale the checkpoints to end at N")
    p.add_argument("--acceptance", default=None, help="tolerance file (else $RDE_ACCEPTANCE_CONFIG)")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("consistency", parents=[common], help="small-scale expansion remainder")
    p.add_argument("--law", required=True)
    p.add_argument("--probe", default="logistic", choices=sorted(an.PROBES))
    p.add_argument("--deltas", default="0.2,0.1,0.05,0.025")
    p.set_defaults(fn=cmd_consistency)

    p = sub.add_parser("front-speed", parents=[common], help="growth rate of log R for p > 1/2")
    p.add_argument("--p", type=float, default=0.75)
    p.add_argument("--law", default=None, help="defaults to the resistance law")
    p.add_argument("--pool", type=int, default=10**5)
    p.add_argument("--N", type=int, default=200)
    p.set_defaults(fn=cmd_front_speed)

    p = sub.add_parser("enumerate", parents=[common], help="exact one-step law on a finite support")
    p.add_argument("--law", required=True)
    p.add_argument("--support", required=True, help="value=prob,value=prob,...")
    p.add_argument("--steps", type=int, default=1)
    p.set_defaults(fn=cmd_enumerate)

    p = sub.add_parser("run", parents=[common], help="run an experiment config")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=cmd_run)
    return ap


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    ap = build_parser()
    args = ap.parse_args(argv)
    args._started = time.perf_counter()
    args.seed_given = any(a == "--seed" or a.startswith("--seed=") for a in argv)
    args.seed_override = args.seed if args.seed_given else None
    art = Artifacts(args.out)
    try:
        code = args.fn(args, art)
    except (ConfigError, ValueError) as e:
        print(f"rde {args.command}: {e}", file=sys.stderr)
        return 2
    if args.command not in ("verify", "run"):
        art.metadata(args, args._started)
    return code


if __name__ == "__main__":
    sys.exit(main())
