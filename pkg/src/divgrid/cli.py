"""Command-line front end.

Every subcommand writes a JSON summary plus CSV plot data into the output
directory (``--out`` or ``$DIVGRID_OUT``).  Outputs are byte-identical
across runs with the same configuration; ``--seed`` pins every randomized
choice.  ``--check`` reruns solvers against their brute-force oracles
when the instance is small enough and fails loudly on disagreement.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import core, experiments, flows, gridio, measures, norms, whitney
from .errors import DivgridError


@dataclass
class RunConfig:
    subcommand: str
    out: str
    seed: int = 0
    mode: str = core.GRAPH
    tol: float = 1e-6
    check: bool = False
    args: dict = field(default_factory=dict)


def _outdir(cfg):
    os.makedirs(cfg.out, exist_ok=True)
    return cfg.out


def _path(cfg, name):
    return os.path.join(_outdir(cfg), name)


def _load_domain(cfg):
    a = cfg.args
    if a.get("domain"):
        return gridio.read_domain_json(a["domain"])
    if a.get("mask_pgm"):
        cells = gridio.read_mask_image(a["mask_pgm"])
        return core.build_domain(
            cells, h=a.get("h", 1.0), connectivity=a.get("connectivity", "4"),
            basepoint=a.get("basepoint"),
        )
    raise DivgridError("no domain given (need --domain or --mask-pgm)")


def _load_source(cfg, domain):
    a = cfg.args
    if a.get("source"):
        return gridio.read_node_csv(a["source"], domain)
    if a.get("measure"):
        mu = gridio.read_measure_csv(a["measure"])
        return measures.rasterize(mu, domain, mode=cfg.mode)
    raise DivgridError("no source given (need --source or --measure)")


def cmd_domain(cfg):
    a = cfg.args
    if a.get("cells_json"):
        dom = gridio.read_domain_json(a["cells_json"])
    else:
        dom = _load_domain(cfg)
    gridio.write_domain_json(_path(cfg, "domain.json"), dom)
    gridio.write_edge_csv(_path(cfg, "edges.csv"), dom, dom.edge_unit)
    gridio.write_json(_path(cfg, "summary.json"), {
        "n_cells": dom.n_cells, "n_edges": dom.n_edges,
        "n_components": dom.n_components, "h": dom.h,
        "connectivity": dom.connectivity,
        "basepoint": dom.cells[dom.basepoint].tolist(),
        "disconnected": dom.n_components > 1,
    })
    return 0


def cmd_solve_l1(cfg):
    dom = _load_domain(cfg)
    F = _load_source(cfg, dom)
    sol = flows.min_cost_flow(dom, F, mode=cfg.mode)
    gridio.write_edge_csv(_path(cfg, "flow.csv"), dom, sol.v)
    gridio.write_node_csv(_path(cfg, "potential.csv"), dom, sol.potential)
    gap = abs(float(sol.potential @ F) - sol.cost)
    if cfg.check:
        assert gap <= 1e-9 * (1.0 + sol.cost), "duality check failed"
    gridio.write_json(_path(cfg, "summary.json"), {
        "value": sol.cost, "residual": sol.residual,
        "iterations": sol.iterations, "duality_gap": gap,
    })
    return 0


def cmd_solve_linf(cfg):
    dom = _load_domain(cfg)
    f = _load_source(cfg, dom)
    sol = flows.chebyshev_solve(dom, f, tol=cfg.tol, mode=cfg.mode)
    gridio.write_edge_csv(_path(cfg, "flow.csv"), dom, sol.v)
    if cfg.check and dom.n_cells <= 20:
        brute = flows.gale_hoffman_brute(dom, f, mode=cfg.mode)
        assert abs(brute - sol.value) <= cfg.tol * (1.0 + brute), (
            f"oracle disagreement: brute {brute} vs solver {sol.value}"
        )
    gridio.write_json(_path(cfg, "summary.json"), {
        "value": sol.value, "residual": sol.residual,
        "iterations": sol.iterations, "cut_ratio": sol.cut_ratio,
        "cut": None if sol.cut is None else dom.cells[sol.cut].tolist(),
    })
    return 0


def cmd_free_norm(cfg):
    dom = _load_domain(cfg)
    F = _load_source(cfg, dom)
    value, u = norms.free_norm(dom, F, mode=cfg.mode)
    gridio.write_node_csv(_path(cfg, "potential.csv"), dom, u)
    summary = {"value": value}
    if cfg.check:
        support = np.nonzero(F)[0]
        if len(support) == 2 and abs(F.sum()) <= 1e-12 * np.abs(F).sum():
            d = core.graph_distance(dom, int(support[0]), int(support[1]), cfg.mode)
            expected = abs(float(F[support[1]])) * d
            assert abs(value - expected) <= 1e-9 * (1.0 + expected)
            summary["check_dipole_distance"] = expected
    gridio.write_json(_path(cfg, "summary.json"), summary)
    return 0


def cmd_sch_norm(cfg):
    dom = _load_domain(cfg)
    f = _load_source(cfg, dom)
    value, cut = norms.sch_norm(dom, f, mode=cfg.mode, tol=cfg.tol)
    if cfg.check and dom.n_cells <= 20:
        brute = flows.gale_hoffman_brute(dom, f, mode=cfg.mode)
        assert abs(brute - value) <= cfg.tol * (1.0 + brute)
    gridio.write_json(_path(cfg, "summary.json"), {
        "value": value,
        "witness": None if cut is None else dom.cells[cut].tolist(),
    })
    return 0


def cmd_pencil(cfg):
    dom = _load_domain(cfg)
    a = tuple(cfg.args["a"])
    b = tuple(cfg.args["b"])
    theta = cfg.args.get("theta", 1.0)
    F = np.zeros(dom.n_cells)
    F[dom.index_of(b)] += theta
    F[dom.index_of(a)] -= theta
    sol = flows.min_cost_flow(dom, F, mode=cfg.mode)
    dec = flows.decompose_pencil(sol, dom.index_of(a), dom.index_of(b))
    gridio.write_edge_csv(_path(cfg, "flow.csv"), dom, sol.v)
    gridio.write_json(_path(cfg, "summary.json"), {
        "cost": sol.cost,
        "nu_total": dec.nu_total,
        "lambda": dec.lam,
        "weights": dec.weights.tolist(),
        "paths": [dom.cells[p].tolist() for p in dec.paths],
    })
    return 0


def cmd_whitney(cfg):
    dom = _load_domain(cfg)
    tau = cfg.args.get("tau", 0.5)
    spec = whitney.BumpSpec(
        slope=cfg.args.get("slope", 4.5), width=cfg.args.get("width", 0.01)
    )
    scat = whitney.greedy_scattered(dom, tau, order=cfg.args.get("order"),
                                    seed=cfg.seed)
    whitney.verify_scattered(scat)
    gaps = whitney.coverage_gaps(scat)
    cov = whitney.cover(scat)
    rows = [
        tuple(c) + (d, rs, rm, rb)
        for c, d, rs, rm, rb in zip(
            cov.centers.tolist(), cov.deltas.tolist(), cov.r_small.tolist(),
            cov.r_mid.tolist(), cov.r_big.tolist(),
        )
    ]
    hdr = ["x", "y", "z"][: dom.m] + ["delta", "r_small", "r_mid", "r_big"]
    gridio.write_table_csv(_path(cfg, "cover.csv"), hdr, rows)
    part = whitney.partition_of_unity(scat, spec)
    sums = part.sum_phi(scat.points)
    chi = part.chi(scat.points)
    gridio.write_json(_path(cfg, "summary.json"), {
        "tau": tau, "n_centers": scat.n_centers,
        "coverage_gaps": int(len(gaps)),
        "max_overlap": int(whitney.overlap_counts(scat).max()),
        "partition_sum_error": float(np.abs(chi.sum(1) - 1.0).max()),
        "min_bump_sum": float(sums.min()),
    })
    return 0


def cmd_cheeger(cfg):
    dom = _load_domain(cfg)
    method = cfg.args.get("method", "exact")
    value, witness = norms.cheeger_constant(dom, method=method, mode=cfg.mode,
                                            seed=cfg.seed)
    gridio.write_json(_path(cfg, "summary.json"), {
        "value": value, "method": method,
        "witness": None if witness is None else dom.cells[witness].tolist(),
    })
    return 0


def cmd_poincare(cfg):
    dom = _load_domain(cfg)
    p = cfg.args.get("p", 1.0)
    method = cfg.args.get("method", "exact")
    lower, upper = norms.poincare_bracket(dom, p=p, method=method, mode=cfg.mode)
    gridio.write_json(_path(cfg, "summary.json"), {
        "p": p, "lower": lower, "upper": upper, "method": method,
    })
    return 0


_CANONICAL = {
    "indicator": norms.ball_indicator,
    "power": norms.power_decay,
    "logpower": norms.log_damped_power,
}


def cmd_weaklq(cfg):
    a = cfg.args
    q = a.get("q", 2.0)
    if a.get("function"):
        maker = _CANONICAL[a["function"]]
        f = maker(a.get("m", 2)) if a["function"] == "indicator" else maker(a.get("m", 2), q)
    else:
        dom = _load_domain(cfg)
        f = norms.GridFunction(dom, _load_source(cfg, dom))
    y = np.geomspace(a.get("ymin", 1e-3), a.get("ymax", 1e3), a.get("points", 121))
    prof = norms.classify_weak(f, q, y)
    gridio.write_table_csv(_path(cfg, "profile.csv"), ["y", "eps"],
                           list(zip(prof.levels.tolist(), prof.eps.tolist())))
    gridio.write_json(_path(cfg, "summary.json"), {
        "q": q, "verdict": prof.verdict, "diagnostic": prof.diagnostic,
        "quasi_norm": prof.quasi_norm, "slope_low": prof.slope_low,
        "slope_high": prof.slope_high, "thresholds": prof.thresholds,
    })
    return 0


def cmd_mz(cfg):
    a = cfg.args
    mu = gridio.read_measure_csv(a["measure"])
    r_min = a.get("r_min", 1e-3)
    value = measures.mz_norm_above(mu, r_min)
    summary = {"r_min": r_min, "value": value}
    if a.get("radii"):
        radii = np.array(a["radii"], dtype=float)
        prof = measures.upper_regularity_profile(mu, radii)
        gridio.write_table_csv(_path(cfg, "profile.csv"), ["r", "ratio"],
                               list(zip(prof.radii.tolist(), prof.ratios.tolist())))
        summary["profile_slope"] = prof.slope
        summary["vanishing_consistent"] = prof.vanishing_consistent
    if a.get("domain") and a.get("taus"):
        dom = _load_domain(cfg)
        taus = np.array(a["taus"], dtype=float)
        vals = measures.eta_profile(mu, dom, taus)
        gridio.write_table_csv(_path(cfg, "eta.csv"), ["tau", "eta"],
                               list(zip(taus.tolist(), vals.tolist())))
        summary["eta_max"] = float(vals.max())
    gridio.write_json(_path(cfg, "summary.json"), summary)
    return 0


def _angle_value(text):
    num, _, den = text.strip().partition("/")

    def one(t):
        t = t.strip()
        return math.pi if t == "pi" else float(t)

    val = one(num)
    return val / one(den) if den else val


def _parse_angles(text, level):
    if text.startswith("const:"):
        return np.full(max(level, 1), _angle_value(text[6:]))
    if text == "invsqrt":
        return np.array([1.0 / math.sqrt(j) for j in range(1, level + 1)])
    return np.array([_angle_value(x) for x in text.split(",")])


def cmd_koch(cfg):
    a = cfg.args
    spec = measures.KochSpec(
        a=np.array([a.get("ax", 0.0), a.get("ay", 0.0)]),
        b=np.array([a.get("bx", 1.0), a.get("by", 0.0)]),
        angles=_parse_angles(a.get("angles", "const:pi/3"), a.get("level", 3)),
        level=a.get("level", 3),
    )
    curve = measures.koch_curve(spec)
    gridio.write_table_csv(_path(cfg, "polyline.csv"), ["x", "y"],
                           [tuple(p) for p in curve.polyline.tolist()])
    gridio.write_measure_csv(_path(cfg, "measure.csv"), curve.measure)
    gridio.write_json(_path(cfg, "summary.json"), {
        "level": spec.level, "length": curve.length,
        "growth": curve.growth.tolist(),
        "product_converged": curve.product_converged,
        "total_mass": float(curve.measure.weights.sum()),
    })
    return 0


def cmd_experiment(cfg):
    which = cfg.args["which"]
    if which == "nikodym":
        ks = cfg.args.get("ks") or [1, 2, 3, 4, 6, 8]
        rows = experiments.nikodym_sweep(ks, p=cfg.args.get("p", 1.0),
                                         mode=cfg.mode)
        gridio.write_table_csv(_path(cfg, "nikodym.csv"),
                               ["k", "n_cells", "lower", "upper"], rows)
        gridio.write_json(_path(cfg, "summary.json"), {
            "experiment": "nikodym",
            "monotone": bool(np.all(np.diff([r[2] for r in rows]) >= -1e-12)),
            "rows": rows,
        })
        return 0
    if which == "refine":
        sizes = cfg.args.get("sizes") or [8, 16, 32]
        rows = experiments.refine_sweep(sizes)
        gridio.write_table_csv(_path(cfg, "refine.csv"),
                               ["n", "h", "free_norm", "sch_norm"], rows)
        gridio.write_json(_path(cfg, "summary.json"),
                          {"experiment": "refine", "rows": rows})
        return 0
    raise DivgridError(f"unknown experiment {which!r}")


_COMMANDS = {
    "domain": cmd_domain,
    "solve-l1": cmd_solve_l1,
    "solve-linf": cmd_solve_linf,
    "free-norm": cmd_free_norm,
    "sch-norm": cmd_sch_norm,
    "pencil": cmd_pencil,
    "whitney": cmd_whitney,
    "cheeger": cmd_cheeger,
    "poincare": cmd_poincare,
    "weaklq": cmd_weaklq,
    "mz": cmd_mz,
    "koch": cmd_koch,
    "experiment": cmd_experiment,
}


def execute(cfg):
    """Run one configured subcommand; returns the process exit status."""
    try:
        return _COMMANDS[cfg.subcommand](cfg)
    except DivgridError as exc:
        print(f"error {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def _add_common(sp):
    sp.add_argument("--out", default=os.environ.get("DIVGRID_OUT", "divgrid_out"))
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--mode", choices=[core.GRAPH, core.MESH], default=core.GRAPH)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.add_argument("--check", action="store_true")
    sp.add_argument("--domain", help="domain descriptor JSON")
    sp.add_argument("--mask-pgm", dest="mask_pgm", help="PGM/PBM mask image")
    sp.add_argument("--h", type=float, default=1.0)
    sp.add_argument("--connectivity", default="4")


def _int_list(text):
    return [int(x) for x in text.split(",")]


def _float_list(text):
    return [float(x) for x in text.split(",")]


def build_parser():
    ap = argparse.ArgumentParser(prog="divgrid")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    for name in ("domain", "solve-l1", "solve-linf", "free-norm", "sch-norm"):
        sp = sub.add_parser(name)
        _add_common(sp)
        sp.add_argument("--source", help="node function CSV")
        sp.add_argument("--measure", help="atomic measure CSV")
        if name == "domain":
            sp.add_argument("--cells-json", dest="cells_json")

    sp = sub.add_parser("pencil")
    _add_common(sp)
    sp.add_argument("--a", type=_int_list, required=True)
    sp.add_argument("--b", type=_int_list, required=True)
    sp.add_argument("--theta", type=float, default=1.0)

    sp = sub.add_parser("whitney")
    _add_common(sp)
    sp.add_argument("--tau", type=float, default=0.5)
    sp.add_argument("--slope", type=float, default=4.5)
    sp.add_argument("--width", type=float, default=0.01)
    sp.add_argument("--order", default=None)

    sp = sub.add_parser("cheeger")
    _add_common(sp)
    sp.add_argument("--method", choices=["exact", "heuristic"], default="exact")

    sp = sub.add_parser("poincare")
    _add_common(sp)
    sp.add_argument("--p", type=float, default=1.0)
    sp.add_argument("--method", choices=["exact", "heuristic"], default="exact")

    sp = sub.add_parser("weaklq")
    _add_common(sp)
    sp.add_argument("--q", type=float, default=2.0)
    sp.add_argument("--m", type=int, default=2)
    sp.add_argument("--function", choices=sorted(_CANONICAL))
    sp.add_argument("--source", help="node function CSV (grid backend)")
    sp.add_argument("--ymin", type=float, default=1e-3)
    sp.add_argument("--ymax", type=float, default=1e3)
    sp.add_argument("--points", type=int, default=121)

    sp = sub.add_parser("mz")
    _add_common(sp)
    sp.add_argument("--measure", required=True)
    sp.add_argument("--r-min", dest="r_min", type=float, default=1e-3)
    sp.add_argument("--radii", type=_float_list)
    sp.add_argument("--taus", type=_float_list)

    sp = sub.add_parser("koch")
    _add_common(sp)
    sp.add_argument("--ax", type=float, default=0.0)
    sp.add_argument("--ay", type=float, default=0.0)
    sp.add_argument("--bx", type=float, default=1.0)
    sp.add_argument("--by", type=float, default=0.0)
    sp.add_argument("--level", type=int, default=3)
    sp.add_argument("--angles", default="const:pi/3")

    sp = sub.add_parser("experiment")
    _add_common(sp)
    sp.add_argument("which", choices=["nikodym", "refine"])
    sp.add_argument("--ks", type=_int_list)
    sp.add_argument("--sizes", type=_int_list)
    sp.add_argument("--p", type=float, default=1.0)
    return ap


def config_from_args(argv=None):
    ns = vars(build_parser().parse_args(argv))
    cfg = RunConfig(
        subcommand=ns.pop("subcommand"),
        out=ns.pop("out"),
        seed=ns.pop("seed"),
        mode=ns.pop("mode"),
        tol=ns.pop("tol"),
        check=ns.pop("check"),
        args={k: v for k, v in ns.items() if v is not None},
    )
    return cfg


def main(argv=None):
    return execute(config_from_args(argv))


if __name__ == "__main__":
    sys.exit(main())
