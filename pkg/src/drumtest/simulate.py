"""Monte Carlo data generators and the experiment runner.

Demand generators draw Cobb-Douglas share parameters (a persistent clipped
walk or a Gaussian-copula pair), solve demand in closed form, and classify
it into patches. Binary-menu generators compose published per-menu
marginals independently across periods. Every simulated agent faces one
menu path; each observed menu path receives the same number of agents, as
in the experimental designs the generators mimic.
"""

from __future__ import annotations

import itertools
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import catalog
from .errors import ParameterError
from .geometry import demand_universe
from .inference import TestConfig, run_test
from .model import PanelDataset, PanelRecord, estimate_rho
from .representations import build_static_A, enumerate_orders, kron_dynamic

BINARY_MARGINALS = {
    "binary1": np.array([1, 4, 4, 1, 1, 4]) / 5.0,
    "binary2": np.array([1 / 5, 4 / 5, 1 / 2, 1 / 2, 1 / 5, 4 / 5]),
    "binary3": np.array([1, 3, 2, 2, 1, 3]) / 4.0,
}


@dataclass(frozen=True)
class DgpSpec:
    """A named data-generating process with its parameters.

    Kinds: ``cobb-douglas-walk`` (persistence 0.9, innovation sd 5, clipped
    to [0,1]), ``cobb-douglas-gaussian-copula`` (correlation 0.5, arctan
    link), ``binary1``/``binary2``/``binary3`` (published binary-menu
    marginals over three periods), and ``order-mixture`` (weights over
    ranking profiles on a supplied universe).
    """

    kind: str
    params: dict = field(default_factory=dict)

    def periods(self):
        if self.kind.startswith("cobb"):
            return (1, 2)
        if self.kind.startswith("binary"):
            return (1, 2, 3)
        return tuple(self.params["universe"].periods)


def build_universe(dgp: DgpSpec):
    """Universe (and budgets where applicable) the generator samples on."""
    if dgp.kind.startswith("cobb"):
        budgets = catalog.simple_budgets(dgp.periods())
        uni, patches, dominance = demand_universe(budgets, dgp.periods(),
                                                  index_maps=catalog.SIMPLE_INDEX_MAPS)
        return uni, budgets
    if dgp.kind.startswith("binary"):
        uni = catalog.binary_universe(("l1", "l2", "l3"), dgp.periods())
        return uni, None
    if dgp.kind == "order-mixture":
        return dgp.params["universe"], None
    raise ParameterError(f"unknown DGP kind {dgp.kind!r}")


def observed_menu_paths(dgp: DgpSpec, universe):
    if dgp.kind.startswith("cobb"):
        return sorted(itertools.product(*[universe.menu_indices(t)
                                          for t in universe.periods]))
    if dgp.kind.startswith("binary"):
        return sorted(itertools.permutations(universe.menu_indices(universe.periods[0])))
    paths = dgp.params.get("menu_paths")
    if paths is None:
        raise ParameterError("order-mixture needs explicit menu paths")
    return sorted(tuple(p) for p in paths)


def simulate(dgp: DgpSpec, agents_per_path: int, seed: int = 0):
    """Draw a panel with ``agents_per_path`` agents on every menu path.

    Returns (panel, universe). Budget indices double as menu ids; demand
    choices are recorded as patch positions within the faced budget.
    """
    rng = np.random.default_rng(seed)
    universe, budgets = build_universe(dgp)
    paths = observed_menu_paths(dgp, universe)
    records = []
    agent = 0
    if dgp.kind.startswith("cobb"):
        walk = dgp.kind == "cobb-douglas-walk"
        persistence = dgp.params.get("persistence", 0.9)
        sd = dgp.params.get("innovation_sd", 5.0)
        corr = dgp.params.get("correlation", 0.5)
        prices = {t: {b.index: b.p() for b in budgets[t]} for t in universe.periods}
        for path in paths:
            for _ in range(agents_per_path):
                agent += 1
                if walk:
                    a1 = rng.uniform()
                    a2 = min(max(persistence * a1 + rng.normal(0.0, sd), 0.0), 1.0)
                    alphas = (a1, a2)
                else:
                    cov = np.array([[1.0, corr], [corr, 1.0]])
                    eps = rng.multivariate_normal(np.zeros(2), cov)
                    alphas = tuple(np.arctan(e) / np.pi + 0.5 for e in eps)
                for t, j, alpha in zip(universe.periods, path, alphas):
                    p = prices[t][j]
                    y = np.array([alpha / p[0], (1 - alpha) / p[1]])
                    other = next(i for i in prices[t] if i != j)
                    above = float(prices[t][other] @ y) > 1.0
                    menu = universe.menu(t, j)
                    # patch 1 of the steep budget is above the other budget;
                    # patch 1 of the flat budget is below it
                    if j == 1:
                        pos = 1 if above else 2
                    else:
                        pos = 2 if above else 1
                    records.append(PanelRecord(agent, t, j, menu.items[pos - 1],
                                               tuple(y.tolist())))
    elif dgp.kind.startswith("binary"):
        marg = dgp.params.get("marginals")
        if marg is None:
            marg = BINARY_MARGINALS[dgp.kind]
        marg = np.asarray(marg, dtype=float)
        first = {}
        for menu in universe.menus[universe.periods[0]]:
            base = 2 * (menu.index - 1)
            first[menu.index] = marg[base]
        for path in paths:
            for _ in range(agents_per_path):
                agent += 1
                for t, j in zip(universe.periods, path):
                    menu = universe.menu(t, j)
                    pick = 0 if rng.uniform() < first[j] else 1
                    records.append(PanelRecord(agent, t, j, menu.items[pick]))
    elif dgp.kind == "order-mixture":
        profiles = dgp.params["profiles"]
        weights = np.asarray(dgp.params["weights"], dtype=float)
        weights = weights / weights.sum()
        for path in paths:
            draws = rng.choice(len(profiles), size=agents_per_path, p=weights)
            for d in draws:
                agent += 1
                profile = profiles[d]
                for t, j, ranking in zip(universe.periods, path, profile):
                    menu = universe.menu(t, j)
                    pos_of = {a: k for k, a in enumerate(ranking)}
                    best = min(menu.items, key=lambda a: pos_of[a])
                    records.append(PanelRecord(agent, t, j, best))
    else:
        raise ParameterError(f"unknown DGP kind {dgp.kind!r}")
    return PanelDataset(tuple(records)), universe


def type_matrix_for(dgp: DgpSpec, universe):
    """Restricted type matrix matching the generator's observed paths."""
    paths = observed_menu_paths(dgp, universe)
    statics = []
    for t in universe.periods:
        if dgp.kind.startswith("cobb"):
            tuples = [tp for tp in itertools.product((1, 2), repeat=2) if tp != (2, 1)]
            statics.append(build_static_A(universe, t, tuples))
        else:
            statics.append(build_static_A(universe, t, enumerate_orders(universe, t)))
    return kron_dynamic(statics, paths, universe)


def agents_per_path_for(dgp: DgpSpec, n: int) -> int:
    """Translate a reported sample size to agents per menu path: demand
    designs report agents per choice path (four per path), binary designs
    report agents per menu path."""
    return 4 * n if dgp.kind.startswith("cobb") else n


@dataclass(frozen=True)
class ExperimentReport:
    entries: tuple

    def to_text(self) -> str:
        lines = [f"{'dgp':<28}{'N':>8}{'sims':>7}{'reps':>7}{'reject_rate':>13}{'seconds':>9}"]
        for e in self.entries:
            lines.append(f"{e['dgp']:<28}{e['N']:>8}{e['sims']:>7}{e['reps']:>7}"
                         f"{e['rejection_rate']:>13.3f}{e['seconds']:>9.1f}")
        return "\n".join(lines)

    def to_csv(self) -> str:
        lines = ["dgp,N,sims,reps,rejection_rate,seconds"]
        for e in self.entries:
            lines.append(f"{e['dgp']},{e['N']},{e['sims']},{e['reps']},"
                         f"{e['rejection_rate']:.6f},{e['seconds']:.2f}")
        return "\n".join(lines)


def _run_sims(dgp: DgpSpec, n: int, sim_seeds, reps: int, alpha: float) -> np.ndarray:
    universe, _ = build_universe(dgp)
    A = type_matrix_for(dgp, universe)
    agents = agents_per_path_for(dgp, n)
    rejects = np.empty(len(sim_seeds), dtype=bool)
    for i, seed in enumerate(sim_seeds):
        panel_seed, boot_seed = seed.spawn(2)
        panel, _ = simulate(dgp, agents, panel_seed)
        rho = estimate_rho(panel, universe)
        config = TestConfig(reps=reps, alpha=alpha,
                            seed=int(boot_seed.generate_state(1, np.uint64)[0]))
        report = run_test(rho, A, config)
        rejects[i] = report.reject
    return rejects


def run_experiment(dgps: list, Ns: list, sims: int = 1000, reps: int = 999,
                   seed: int = 0, alpha: float = 0.05, n_jobs: int = 1) -> ExperimentReport:
    """Rejection rates of the cone test per generator and sample size."""
    entries = []
    master = np.random.SeedSequence(seed)
    for dgp in dgps:
        for n in Ns:
            t0 = time.perf_counter()
            cell = master.spawn(1)[0]
            sim_seeds = cell.spawn(sims)
            if n_jobs > 1:
                chunks = np.array_split(np.arange(sims), n_jobs)
                with ProcessPoolExecutor(max_workers=n_jobs) as pool:
                    futures = [pool.submit(_run_sims, dgp, n,
                                           [sim_seeds[i] for i in chunk], reps, alpha)
                               for chunk in chunks if len(chunk)]
                    rejects = np.concatenate([f.result() for f in futures])
            else:
                rejects = _run_sims(dgp, n, sim_seeds, reps, alpha)
            entries.append({
                "dgp": dgp.kind, "N": n, "sims": sims, "reps": reps,
                "rejection_rate": float(rejects.mean()),
                "seconds": time.perf_counter() - t0,
            })
    return ExperimentReport(tuple(entries))
