"""Command-line interface.

Subcommands: matrices, check, test, bounds, simulate, experiment. Exit
codes: 0 completed, 2 model rejected (check/test), 1 error.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import catalog, io
from .checks import (bm_extension_feasible, check_H, check_d_monotonicity, check_sarpd,
                     check_stability, cone_membership, dominance_from_universe,
                     hierarchy_feasible)
from .counterfactuals import CounterfactualProblem, bound_functional, kron_counterfactual_cone
from .errors import DrumError, ModelRejectedError
from .geometry import Budget, compute_patches, demand_universe
from .inference import TestConfig, run_test, run_test_eu
from .model import estimate_rho
from .representations import (build_static_A, catalog_H, enumerate_orders, kron_dynamic,
                              kron_inequalities)
from .simulate import DgpSpec, run_experiment, simulate


def _load_config(path):
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def _add_common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--tolerance", type=float, default=1e-9)
    p.add_argument("--out", default=None)
    p.add_argument("--config", default=None, help="key=value file merged into options")


def build_parser():
    ap = argparse.ArgumentParser(prog="drum", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    m = sub.add_parser("matrices", help="emit catalog type and facet matrices")
    m.add_argument("--geometry", choices=["simple", "binary3", "demand3x3"], required=True)
    m.add_argument("--T", type=int, default=1)
    _add_common(m)

    c = sub.add_parser("check", help="deterministic consistency checks")
    c.add_argument("--input", required=True, help="rho.csv")
    c.add_argument("--universe", required=True, help="universe.json")
    c.add_argument("--budgets", default=None)
    c.add_argument("--checks", default="stability,dmono,cone",
                   help="comma list: stability,dmono,hrep,cone,bm,hierarchy,sarpd")
    c.add_argument("--report", default=None)
    _add_common(c)

    t = sub.add_parser("test", help="bootstrap cone-projection test")
    t.add_argument("--panel", required=True)
    t.add_argument("--universe", required=True)
    t.add_argument("--budgets", default=None)
    t.add_argument("--eu", default=None, help="lotteries.csv for the EU-restricted test")
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--reps", type=int, default=999)
    t.add_argument("--report", default=None)
    _add_common(t)

    b = sub.add_parser("bounds", help="counterfactual bounds for one extra period")
    b.add_argument("--input", required=True, help="rho.csv")
    b.add_argument("--universe", required=True)
    b.add_argument("--budgets", required=True)
    b.add_argument("--new-budget", required=True,
                   help="semicolon-separated price vectors, e.g. '2,1;1,2'")
    b.add_argument("--g", required=True, help="g.csv with per-patch bounds")
    b.add_argument("--condition", default=None, help="'menu_path:choice_path' e.g. '1|2:1|2'")
    b.add_argument("--target", type=int, default=None)
    _add_common(b)

    s = sub.add_parser("simulate", help="draw a synthetic panel")
    s.add_argument("--dgp", required=True,
                   choices=["dgp1", "dgp2", "binary1", "binary2", "binary3"])
    s.add_argument("--n", type=int, required=True, help="agents per menu path")
    _add_common(s)

    e = sub.add_parser("experiment", help="rejection-rate table over DGPs and sizes")
    e.add_argument("--dgps", required=True, help="comma list of dgp1,dgp2,binary1..binary3")
    e.add_argument("--Ns", required=True, help="comma list of sample sizes")
    e.add_argument("--sims", type=int, default=1000)
    e.add_argument("--reps", type=int, default=999)
    e.add_argument("--alpha", type=float, default=0.05)
    _add_common(e)
    return ap


_DGPS = {
    "dgp1": DgpSpec("cobb-douglas-walk"),
    "dgp2": DgpSpec("cobb-douglas-gaussian-copula"),
    "binary1": DgpSpec("binary1"),
    "binary2": DgpSpec("binary2"),
    "binary3": DgpSpec("binary3"),
}


def _cmd_matrices(args) -> int:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    if args.geometry == "binary3":
        uni = catalog.binary_universe(periods=tuple(range(1, args.T + 1)))
        statics = [build_static_A(uni, t, enumerate_orders(uni, t)) for t in uni.periods]
        H = catalog_H("binary", uni, uni.periods[0])
    else:
        if args.geometry == "simple":
            budgets = catalog.simple_budgets(tuple(range(1, args.T + 1)))
            maps = catalog.SIMPLE_INDEX_MAPS
        else:
            budgets = catalog.demand3x3_budgets(tuple(range(1, args.T + 1)))
            maps = catalog.DEMAND3X3_INDEX_MAPS
        uni, patches, dominance = demand_universe(budgets, tuple(sorted(budgets)), maps)
        from .geometry import enumerate_demand_types
        statics = []
        for t in uni.periods:
            types, _ = enumerate_demand_types(patches[t], budgets[t])
            statics.append(build_static_A(uni, t, types))
        H = catalog_H(args.geometry if args.geometry != "simple" else "simple",
                      uni, uni.periods[0])
    io.export_matrix(statics[0].dense(), statics[0].row_labels, statics[0].col_labels,
                     out / f"A_static_{args.geometry}")
    paths = sorted(itertools.product(*[uni.menu_indices(t) for t in uni.periods]))
    A_T = kron_dynamic(statics, paths, uni)
    io.export_matrix(A_T.dense(), A_T.row_labels, A_T.col_labels,
                     out / f"A_dynamic_{args.geometry}_T{args.T}")
    io.export_matrix(H.full(), [f"row{k}" for k in range(len(H.full()))], H.col_labels,
                     out / f"H_{args.geometry}")
    io.write_universe(uni, out / f"universe_{args.geometry}.json")
    print(f"wrote matrices for {args.geometry} (T={args.T}) to {out}")
    return 0


def _catalog_maps(budgets_t):
    """Published patch numbering when the budget shape matches a catalog."""
    K = budgets_t[0].num_goods
    if len(budgets_t) == 2 and K == 2:
        return catalog.SIMPLE_INDEX_MAPS
    if len(budgets_t) == 3 and K == 3:
        return catalog.DEMAND3X3_INDEX_MAPS
    return None


def _demand_geometry(universe, budgets):
    """Patches and per-period dominance rebuilt from the budgets, using the
    catalog numbering when the shape matches. The rho/universe files must
    have been produced under the same convention (drum matrices emits them)."""
    patches, dominance = {}, {}
    for t, blist in budgets.items():
        maps = _catalog_maps(blist)
        try:
            patches[t], dominance[t] = compute_patches(blist, index_maps=maps)
        except Exception:
            patches[t], dominance[t] = compute_patches(blist)
        labels = {p.label for p in patches[t] if not p.is_intersection}
        if universe is not None and set(universe.alternatives[t]) != labels:
            raise DrumError(f"period {t}: budget patches do not match the universe; "
                            "rebuild universe.json from these budgets")
    return patches, dominance


def _statics_for(universe, budgets, patches=None):
    """Per-period type matrices: SARP-filtered patch tuples when budgets are
    supplied, linear orders otherwise."""
    from .geometry import enumerate_demand_types
    statics = []
    for t in universe.periods:
        if budgets and t in budgets:
            types, _ = enumerate_demand_types(patches[t], budgets[t])
            statics.append(build_static_A(universe, t, types))
        else:
            statics.append(build_static_A(universe, t, enumerate_orders(universe, t)))
    return statics


def _catalog_kind(universe, t):
    menus = universe.menus[t]
    if all(m.size == 2 for m in menus) and len(universe.alternatives[t]) <= 5 \
            and len(menus) == len(universe.alternatives[t]) * (len(universe.alternatives[t]) - 1) // 2:
        return "binary"
    if len(menus) == 2 and all(m.size == 2 for m in menus):
        return "simple"
    if len(menus) == 3 and all(m.size == 4 for m in menus):
        return "demand3x3"
    return None


def _cmd_check(args) -> int:
    uni = io.read_universe(args.universe)
    rho = io.read_rho(args.input, uni)
    budgets = io.read_budgets(args.budgets) if args.budgets else None
    wanted = [c.strip() for c in args.checks.split(",") if c.strip()]
    reports = {}
    patches = dominance = None
    if budgets:
        patches, dominance = _demand_geometry(uni, budgets)
    for name in wanted:
        if name == "stability":
            reports[name] = check_stability(rho, tol=args.tolerance)
        elif name == "dmono":
            # demand patch labels are (budget, index) pairs, which is the
            # replacement-pair format the check expects
            pairs = dict(dominance) if dominance is not None else None
            reports[name] = check_d_monotonicity(rho, dominance=pairs,
                                                 tol=args.tolerance)
        elif name == "hrep":
            kinds = [_catalog_kind(uni, t) for t in uni.periods]
            if any(k is None for k in kinds):
                raise DrumError("no catalog H-matrix matches this geometry; "
                                "use the library convert_V_to_H")
            H = kron_inequalities([catalog_H(k, uni, t) for k, t in zip(kinds, uni.periods)])
            reports[name] = check_H(rho, H, tol=args.tolerance)
        elif name == "cone":
            statics = _statics_for(uni, budgets, patches)
            A = kron_dynamic(statics, rho.observed_paths, uni)
            _, _, rep = cone_membership(rho, A)
            reports[name] = rep
        elif name == "bm":
            _, _, rep = bm_extension_feasible(rho)
            reports[name] = rep
        elif name == "hierarchy":
            kinds = [_catalog_kind(uni, t) for t in uni.periods]
            if any(k is None for k in kinds):
                raise DrumError("hierarchy needs a catalog H-matrix per period")
            H_list = [catalog_H(k, uni, t) for k, t in zip(kinds, uni.periods)]
            k_vec = (1,) + (2,) * (uni.num_periods - 1)
            _, _, rep = hierarchy_feasible(rho, H_list, k_vec)
            reports[name] = rep
        elif name == "sarpd":
            if not budgets:
                raise DrumError("sarpd needs --budgets")
            reports[name] = check_sarpd(rho, budgets, patches, tol=args.tolerance)
        else:
            raise DrumError(f"unknown check {name!r}")
    doc = {k: v.to_dict() for k, v in reports.items()}
    text = json.dumps(doc, indent=1)
    if args.report:
        Path(args.report).write_text(text)
    print(text)
    return 0 if all(v.passed for v in reports.values()) else 2


def _cmd_test(args) -> int:
    uni = io.read_universe(args.universe)
    panel = io.read_panel(args.panel)
    rho = estimate_rho(panel, uni)
    config = TestConfig(reps=args.reps, alpha=args.alpha, seed=args.seed,
                        n_jobs=args.threads)
    if args.eu:
        lotteries = io.read_lotteries(args.eu)
        report = run_test_eu(panel, uni, lotteries, config, rho=rho)
    else:
        budgets = io.read_budgets(args.budgets) if args.budgets else None
        patches = _demand_geometry(uni, budgets)[0] if budgets else None
        statics = _statics_for(uni, budgets, patches)
        A = kron_dynamic(statics, rho.observed_paths, uni)
        report = run_test(rho, A, config)
    text = json.dumps(report.to_dict(), indent=1)
    if args.report:
        Path(args.report).write_text(text)
    print(text)
    return 2 if report.reject else 0


def _cmd_bounds(args) -> int:
    uni = io.read_universe(args.universe)
    rho = io.read_rho(args.input, uni)
    budgets = io.read_budgets(args.budgets)
    price_vecs = [tuple(Fraction(v) for v in part.split(","))
                  for part in args.new_budget.split(";")]
    new_budgets = [Budget("next", j + 1, pv, Fraction(1)) for j, pv in enumerate(price_vecs)]
    g_lower, g_upper = io.read_g(args.g)
    condition = None
    if args.condition:
        mp, cp = args.condition.split(":")
        condition = (tuple(int(v) for v in mp.split("|")),
                     tuple(int(v) for v in cp.split("|")))
    problem = CounterfactualProblem(rho, budgets, new_budgets, g_lower, g_upper,
                                    target_budget=args.target, condition=condition,
                                    index_maps=catalog.SIMPLE_INDEX_MAPS)
    report = bound_functional(problem)
    cross = kron_counterfactual_cone(problem)
    doc = {"lower": report.lower, "upper": report.upper,
           "cross_check_lower": cross.lower, "cross_check_upper": cross.upper,
           "diagnostics": report.diagnostics}
    text = json.dumps(doc, indent=1)
    if args.out:
        Path(args.out).write_text(text)
    print(text)
    return 0


def _cmd_simulate(args) -> int:
    dgp = _DGPS[args.dgp]
    panel, uni = simulate(dgp, args.n, seed=args.seed)
    out = Path(args.out or f"panel_{args.dgp}.csv")
    io.write_panel(panel, uni, out)
    io.write_universe(uni, out.with_suffix(".universe.json"))
    print(f"wrote {out} and {out.with_suffix('.universe.json')}")
    return 0


def _cmd_experiment(args) -> int:
    dgps = [_DGPS[d.strip()] for d in args.dgps.split(",")]
    Ns = [int(v) for v in args.Ns.split(",")]
    report = run_experiment(dgps, Ns, sims=args.sims, reps=args.reps,
                            seed=args.seed, alpha=args.alpha, n_jobs=args.threads)
    print(report.to_text())
    if args.out:
        from .plots import rejection_rate_svg
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "experiment.csv").write_text(report.to_csv())
        (out / "experiment.txt").write_text(report.to_text())
        (out / "experiment.svg").write_text(rejection_rate_svg(report.entries))
    return 0


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "config", None):
        overrides = _load_config(args.config)
        for key, value in overrides.items():
            if hasattr(args, key) and getattr(args, key) in (None, ap.get_default(key)):
                current = getattr(args, key)
                cast = type(current) if current is not None else str
                setattr(args, key, cast(value) if cast is not bool else value == "true")
    handlers = {"matrices": _cmd_matrices, "check": _cmd_check, "test": _cmd_test,
                "bounds": _cmd_bounds, "simulate": _cmd_simulate,
                "experiment": _cmd_experiment}
    try:
        return handlers[args.command](args)
    except ModelRejectedError as exc:
        print(f"model rejected: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # input, schema, or solver failure: exit 1
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
