"""Deterministic consistency checks for an observed choice-path distribution:
stability, dominance monotonicity, H-systems, exact cone membership,
Block-Marschak extension feasibility, projection-hierarchy feasibility,
revealed-path-dominance, and the sequence-sum audit.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog, nnls

from .errors import GeometryError, SchemaError, SizeError, SolverError
from .geometry import Budget, Patch, _cell_constraints
from .model import ChoiceUniverse, StochasticChoiceFunction
from .representations import (InequalityMatrix, TypeMatrix, bm_matrix, full_pair_lists,
                              kron_inequalities, pair_vector, projection_ops, reduce_H,
                              static_row_labels, virtual_universe)

ALGEBRA_TOL = 1e-12
ESTIMATE_TOL = 1e-9
FEASIBILITY_TOL = 1e-8
KKT_TOL = 1e-10


@dataclass(frozen=True)
class CheckReport:
    name: str
    passed: bool
    worst_violation: float
    violations: tuple = ()
    diagnostics: dict = field(default_factory=dict)
    vacuous: bool = False

    def to_dict(self) -> dict:
        return {
            "check": self.name,
            "passed": bool(self.passed),
            "worst_violation": float(self.worst_violation),
            "violations": [repr(v) for v in self.violations[:20]],
            "vacuous": self.vacuous,
            "diagnostics": {k: _plain(v) for k, v in self.diagnostics.items()},
        }


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return v


# --- stability ------------------------------------------------------------------

def check_stability(rho: StochasticChoiceFunction, tol: float = ESTIMATE_TOL) -> CheckReport:
    """Marginal invariance: summing out the period-t choice must not depend
    on the period-t menu, holding the rest of the path fixed."""
    uni = rho.universe
    worst = 0.0
    violations = []
    testable = False
    for t_pos, t in enumerate(uni.periods):
        groups = {}
        for path in rho.observed_paths:
            off = tuple(v for k, v in enumerate(path) if k != t_pos)
            groups.setdefault(off, []).append(path)
        for off_menus, paths in groups.items():
            if len(paths) < 2:
                continue
            testable = True
            margins = {}
            for path in paths:
                order = uni.choice_paths(path)
                arr = np.asarray(rho.probs[path], dtype=float)
                for cp, p in zip(order, arr):
                    off_choice = tuple(v for k, v in enumerate(cp) if k != t_pos)
                    key = (path[t_pos], off_choice)
                    margins[key] = margins.get(key, 0.0) + p
            off_choices = {key[1] for key in margins}
            for oc in off_choices:
                vals = [(jt, margins.get((jt, oc), 0.0)) for jt in (p[t_pos] for p in paths)]
                for (j1, v1), (j2, v2) in itertools.combinations(vals, 2):
                    gap = abs(v1 - v2)
                    if gap > worst:
                        worst = gap
                    if gap > tol:
                        violations.append((t, off_menus, oc, j1, j2, v1 - v2))
    if not testable:
        return CheckReport("stability", True, 0.0, vacuous=True,
                           diagnostics={"note": "no menu variation off any period"})
    return CheckReport("stability", worst <= tol, worst, tuple(violations),
                       {"tolerance": tol})


# --- dominance monotonicity --------------------------------------------------------

def dominance_from_universe(universe: ChoiceUniverse) -> dict:
    """Per-period replacement pairs ((j', i'), (j, i)) induced by the
    singleton primitive-order pairs, ranging over all menus containing the
    items."""
    out = {}
    for t in universe.periods:
        pairs = []
        for dom, sub in universe.primitive_order.get(t, ()):
            if len(dom) != 1 or len(sub) != 1:
                continue
            dom_item, sub_item = next(iter(dom)), next(iter(sub))
            for m_dom in universe.menus[t]:
                if dom_item not in m_dom.items:
                    continue
                for m_sub in universe.menus[t]:
                    if sub_item not in m_sub.items:
                        continue
                    pairs.append(((m_dom.index, m_dom.position(dom_item)),
                                  (m_sub.index, m_sub.position(sub_item))))
        out[t] = pairs
    return out


def check_d_monotonicity(rho: StochasticChoiceFunction, dominance: dict | None = None,
                         tol: float = ESTIMATE_TOL) -> CheckReport:
    """Signed iterated differences along dominant replacements over every
    increasing period subsequence must be nonnegative.

    Only paths whose replaced coordinates differ enter each difference; a
    combination is skipped (and counted) when one of its menu paths is
    unobserved.
    """
    uni = rho.universe
    if dominance is None:
        dominance = dominance_from_universe(uni)
    lookup = {}
    for path in rho.observed_paths:
        order = uni.choice_paths(path)
        arr = np.asarray(rho.probs[path], dtype=float)
        lookup[path] = dict(zip(order, arr))
    periods = uni.periods
    worst = 0.0
    violations = []
    skipped = 0
    evaluated = 0
    t_positions = [k for k, t in enumerate(periods) if dominance.get(t)]
    for size in range(1, len(t_positions) + 1):
        for subseq in itertools.combinations(t_positions, size):
            pair_choices = [dominance[periods[k]] for k in subseq]
            for combo in itertools.product(*pair_choices):
                base_menu = {k: pair[1][0] for k, pair in zip(subseq, combo)}
                base_choice = {k: pair[1][1] for k, pair in zip(subseq, combo)}
                repl_menu = {k: pair[0][0] for k, pair in zip(subseq, combo)}
                repl_choice = {k: pair[0][1] for k, pair in zip(subseq, combo)}
                off = [k for k in range(len(periods)) if k not in subseq]
                off_combos = _off_combinations(rho, off, base_menu)
                for off_menu, off_choice in off_combos:
                    value = 0.0
                    ok = True
                    for S in itertools.chain.from_iterable(
                            itertools.combinations(subseq, m) for m in range(size + 1)):
                        menu_path = tuple(
                            repl_menu[k] if k in S else base_menu.get(k, off_menu.get(k))
                            for k in range(len(periods)))
                        cp = tuple(
                            repl_choice[k] if k in S else base_choice.get(k, off_choice.get(k))
                            for k in range(len(periods)))
                        sign = (-1) ** (size - len(S))
                        if menu_path not in lookup or cp not in lookup[menu_path]:
                            ok = False
                            break
                        value += sign * lookup[menu_path][cp]
                    if not ok:
                        skipped += 1
                        continue
                    evaluated += 1
                    if value < worst:
                        worst = value
                    if value < -tol:
                        violations.append((tuple(periods[k] for k in subseq), combo,
                                           tuple(sorted(off_menu.items())),
                                           tuple(sorted(off_choice.items())), value))
    return CheckReport("d-monotonicity", worst >= -tol, worst, tuple(violations),
                       {"tolerance": tol, "evaluated": evaluated, "skipped": skipped},
                       vacuous=(evaluated == 0))


def _off_combinations(rho: StochasticChoiceFunction, off_positions, base_menu):
    """(menu, choice) assignments for the unreplaced periods, read from the
    observed paths compatible with the base menus."""
    uni = rho.universe
    combos = []
    seen_menu = set()
    for path in rho.observed_paths:
        if any(path[k] != j for k, j in base_menu.items()):
            continue
        off_menu = {k: path[k] for k in off_positions}
        key = tuple(sorted(off_menu.items()))
        if key in seen_menu:
            continue
        seen_menu.add(key)
        sizes = {k: uni.menu(uni.periods[k], off_menu[k]).size for k in off_positions}
        ranges = [range(1, sizes[k] + 1) for k in off_positions]
        for choice in itertools.product(*ranges):
            combos.append((off_menu, dict(zip(off_positions, choice))))
    if not off_positions:
        combos = [({}, {})]
    return combos


# --- linear inequality systems -----------------------------------------------------

def _pair_lists_from_labels(labels) -> list:
    first = labels[0]
    if isinstance(first[0], tuple):
        n_slots = len(first)
        lists = []
        for slot in range(n_slots):
            seen, ordered = set(), []
            for lab in labels:
                if lab[slot] not in seen:
                    seen.add(lab[slot])
                    ordered.append(lab[slot])
            lists.append(ordered)
        return lists
    return [list(labels)]


def check_H(rho, H: InequalityMatrix, tol: float = ESTIMATE_TOL) -> CheckReport:
    """Minimum of H v over the assembled vector; passes when >= -tol."""
    if isinstance(rho, StochasticChoiceFunction):
        pair_lists = _pair_lists_from_labels(H.col_labels)
        vec = pair_vector(rho, pair_lists)
    else:
        vec = np.asarray(rho, dtype=float)
        if vec.shape[0] != len(H.col_labels):
            raise SchemaError("vector length does not match the H column space")
    vals = np.asarray(H.full(), dtype=float) @ vec
    worst = float(vals.min()) if len(vals) else 0.0
    violations = tuple(int(i) for i in np.nonzero(vals < -tol)[0][:50])
    return CheckReport("h-representation", worst >= -tol, min(worst, 0.0), violations,
                       {"tolerance": tol, "min_row_value": worst, "kind": H.kind})


# --- cone membership ------------------------------------------------------------------

def rho_vector_for(A: TypeMatrix, rho: StochasticChoiceFunction) -> np.ndarray:
    """Flatten rho into A's row order; every A row must be an observed path."""
    uni = rho.universe
    cache = {}
    out = np.empty(len(A.row_labels))
    for k, (path, cp) in enumerate(A.row_labels):
        if path not in cache:
            if path not in rho.probs:
                raise SchemaError(f"menu path {path} in A is not observed in rho")
            order = {c: i for i, c in enumerate(uni.choice_paths(path))}
            cache[path] = (order, np.asarray(rho.probs[path], dtype=float))
        order, vec = cache[path]
        out[k] = vec[order[cp]]
    return out


def nnls_projection(A: np.ndarray, b: np.ndarray, kkt_tol: float = KKT_TOL):
    """Nonnegative least squares with a KKT-residual certificate."""
    try:
        x, rnorm = nnls(A, b)
    except RuntimeError as exc:
        raise SolverError(f"nonnegative least squares failed: {exc}") from exc
    g = A.T @ (A @ x - b)
    active = x > 1e-12
    kkt = max(0.0, float(-g.min())) if len(g) else 0.0
    if active.any():
        kkt = max(kkt, float(np.abs(g[active]).max()))
    if kkt > kkt_tol * max(1.0, float(np.abs(b).max())) * 100:
        raise SolverError("cone projection did not reach the required accuracy",
                          {"kkt_residual": kkt})
    return x, float(rnorm), kkt


def cone_membership(rho, A: TypeMatrix, tol: float = FEASIBILITY_TOL):
    """Euclidean distance from the vector to the column cone of A.

    Returns (distance, weights, report); consistency means distance <= tol.
    """
    dense = A.dense().astype(float)
    if isinstance(rho, StochasticChoiceFunction):
        b = rho_vector_for(A, rho)
    else:
        b = np.asarray(rho, dtype=float)
        if b.shape[0] != dense.shape[0]:
            raise SchemaError("vector length does not match the type-matrix rows")
    x, distance, kkt = nnls_projection(dense, b)
    passed = distance <= tol
    report = CheckReport("cone-membership", passed, max(0.0, distance - tol),
                         diagnostics={"distance": distance, "kkt_residual": kkt,
                                      "tolerance": tol, "weight_mass": float(x.sum())})
    return distance, x, report


# --- unique recovery (two intersecting budgets per period) ----------------------------

SIMPLE_A = np.array([[1, 1, 0],
                     [0, 0, 1],
                     [1, 0, 0],
                     [0, 1, 1]], dtype=int)


def simple_recovery_matrix() -> np.ndarray:
    """Exact left inverse (A'A)^{-1}A' of the one-period simple-setup matrix."""
    A = [[Fraction(int(v)) for v in row] for row in SIMPLE_A]
    AtA = [[sum(A[r][i] * A[r][j] for r in range(4)) for j in range(3)] for i in range(3)]
    inv = _frac_inv(AtA)
    H = [[sum(inv[i][k] * A[r][k] for k in range(3)) for r in range(4)] for i in range(3)]
    return np.array([[float(v) for v in row] for row in H])


def _frac_inv(M):
    n = len(M)
    aug = [[Fraction(M[i][j]) for j in range(n)] + [Fraction(int(i == j)) for j in range(n)]
           for i in range(n)]
    for col in range(n):
        piv = next(r for r in range(col, n) if aug[r][col] != 0)
        aug[col], aug[piv] = aug[piv], aug[col]
        scale = aug[col][col]
        aug[col] = [v / scale for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


def unique_recovery(rho: StochasticChoiceFunction, tol: float = 1e-10):
    """Closed-form mixture recovery for the two-budget setup.

    Applies the Kronecker power of the exact one-period left inverse to the
    full path vector; valid (nonnegative, reproducing rho) exactly when rho
    is stable and dominance-monotone.
    """
    uni = rho.universe
    for t in uni.periods:
        menus = uni.menus[t]
        if len(menus) != 2 or any(m.size != 2 for m in menus):
            raise GeometryError("unique recovery needs 2 budgets with 2 patches each")
    H1 = simple_recovery_matrix()
    H = H1
    for _ in range(uni.num_periods - 1):
        H = np.kron(H, H1)
    vec = pair_vector(rho, full_pair_lists(uni))
    nu = H @ vec
    A = SIMPLE_A.astype(float)
    AT = A
    for _ in range(uni.num_periods - 1):
        AT = np.kron(AT, A)
    residual = float(np.abs(AT @ nu - vec).max())
    diagnostics = {"min_weight": float(nu.min()), "reconstruction_residual": residual,
                   "tolerance": tol}
    return nu, diagnostics


# --- Block-Marschak extension ---------------------------------------------------------

def bm_extension_feasible(rho: StochasticChoiceFunction, entry_guard: int = 2_000_000):
    """Existence of an agreeing, monotonicity-consistent extension of rho to
    full menu variation satisfying the alternating-sum system.

    One period solves the static system; longer windows use the per-period
    Kronecker system plus stability, which characterizes consistency when
    every period's static mixture is unique (up to three alternatives).
    """
    uni = rho.universe
    vuni = virtual_universe(uni)
    pair_lists = full_pair_lists(vuni)
    dims = [len(p) for p in pair_lists]
    n_vars = int(np.prod(dims))
    H_blocks = [np.asarray(bm_matrix(vuni, t).full(), dtype=float) for t in vuni.periods]
    n_ineq = int(np.prod([h.shape[0] for h in H_blocks]))
    if n_ineq * n_vars > entry_guard:
        raise SizeError("Block-Marschak system exceeds the size guard")
    big = H_blocks[0]
    for h in H_blocks[1:]:
        big = np.kron(big, h)

    var_index = {combo: k for k, combo in enumerate(itertools.product(*pair_lists))}
    A_eq, b_eq = [], []

    # simplex per virtual menu path
    menu_lists = [[m.index for m in vuni.menus[t]] for t in vuni.periods]
    for menu_path in itertools.product(*menu_lists):
        row = np.zeros(n_vars)
        for cp in vuni.choice_paths(menu_path):
            row[var_index[tuple(zip(menu_path, cp))]] = 1.0
        A_eq.append(row)
        b_eq.append(1.0)

    # agreement with the observed distribution
    for path in rho.observed_paths:
        arr = np.asarray(rho.probs[path], dtype=float)
        for cp, val in zip(uni.choice_paths(path), arr):
            row = np.zeros(n_vars)
            row[var_index[tuple(zip(path, cp))]] = 1.0
            A_eq.append(row)
            b_eq.append(float(val))

    # stability across virtual menus (needed beyond one period)
    if vuni.num_periods > 1:
        for t_pos, t in enumerate(vuni.periods):
            menus = vuni.menus[t]
            first = menus[0]
            off_lists = [pl for k, pl in enumerate(pair_lists) if k != t_pos]
            for menu in menus[1:]:
                for off in itertools.product(*off_lists):
                    row = np.zeros(n_vars)
                    for i in range(1, menu.size + 1):
                        combo = list(off)
                        combo.insert(t_pos, (menu.index, i))
                        row[var_index[tuple(combo)]] += 1.0
                    for i in range(1, first.size + 1):
                        combo = list(off)
                        combo.insert(t_pos, (first.index, i))
                        row[var_index[tuple(combo)]] -= 1.0
                    A_eq.append(row)
                    b_eq.append(0.0)

    # monotonicity zeros from the primitive order
    upper = np.ones(n_vars)
    for t_pos, t in enumerate(vuni.periods):
        dominated = _iu_dominated_pairs(vuni, t)
        for k, combo in enumerate(itertools.product(*pair_lists)):
            if combo[t_pos] in dominated:
                upper[k] = 0.0

    res = linprog(np.zeros(n_vars), A_ub=-big, b_ub=np.zeros(big.shape[0]),
                  A_eq=np.array(A_eq), b_eq=np.array(b_eq),
                  bounds=list(zip(np.zeros(n_vars), upper)), method="highs")
    feasible = res.status == 0
    if res.status not in (0, 2):
        raise SolverError(f"extension LP returned status {res.status}: {res.message}")
    witness = None
    if feasible:
        probs = {}
        for menu_path in itertools.product(*menu_lists):
            vals = [res.x[var_index[tuple(zip(menu_path, cp))]]
                    for cp in vuni.choice_paths(menu_path)]
            probs[menu_path] = np.clip(np.array(vals), 0.0, None)
        witness = StochasticChoiceFunction(vuni, {p: v / v.sum() for p, v in probs.items()})
    report = CheckReport("bm-extension", feasible, 0.0 if feasible else 1.0,
                         diagnostics={"status": int(res.status), "variables": n_vars,
                                      "inequality_rows": int(big.shape[0])})
    return feasible, witness, report


def _iu_dominated_pairs(universe: ChoiceUniverse, t) -> set:
    """(menu, position) pairs whose item is beaten, inside its own menu, by a
    declared dominant subset."""
    dominated = set()
    for menu in universe.menus[t]:
        items = set(menu.items)
        for dom, sub in universe.primitive_order.get(t, ()):
            if len(sub) == 1 and set(dom) <= items:
                target = next(iter(sub))
                if target in items:
                    dominated.add((menu.index, menu.position(target)))
    return dominated


# --- projection hierarchy ---------------------------------------------------------------

def hierarchy_feasible(rho: StochasticChoiceFunction, H_list: list, k: tuple,
                       entry_guard: int = 5_000_000):
    """Level-k feasibility of the replication hierarchy.

    Feasibility of {Gamma z = rho*, (kron of replicated reduced H) z >= 0} is
    necessary for consistency at every k; infeasibility is a rejection
    certificate. With k = all ones the system pins z = rho* and reduces to
    the reduced Kronecker H-check.
    """
    uni = rho.universe
    reductions = [reduced_static_labels(uni, t) for t in uni.periods]
    H_stars = [reduce_H(H, kept, dropped) for H, (kept, dropped) in zip(H_list, reductions)]
    ops = projection_ops(H_stars, k)
    blocks = []
    for H_star, kt in zip(H_stars, k):
        base = np.asarray(H_star.full(), dtype=float)
        block = base
        for _ in range(kt - 1):
            block = np.kron(block, base)
        blocks.append(block)
    big = blocks[0]
    for b in blocks[1:]:
        big = np.kron(big, b)
    Gamma = ops.Gamma_float()
    if big.shape[0] * big.shape[1] > entry_guard:
        raise SizeError("hierarchy system exceeds the size guard; lower k")
    rho_star = pair_vector(rho, [list(kept) for kept, _ in reductions])
    res = linprog(np.zeros(Gamma.shape[1]), A_ub=-big, b_ub=np.zeros(big.shape[0]),
                  A_eq=Gamma, b_eq=rho_star, bounds=[(None, None)] * Gamma.shape[1],
                  method="highs")
    if res.status not in (0, 2):
        raise SolverError(f"hierarchy LP returned status {res.status}: {res.message}")
    feasible = res.status == 0
    report = CheckReport("hierarchy", feasible, 0.0 if feasible else 1.0,
                         diagnostics={"k": tuple(k), "variables": int(Gamma.shape[1]),
                                      "inequality_rows": int(big.shape[0])})
    return feasible, (res.x if feasible else None), report


def reduced_static_labels(universe: ChoiceUniverse, t):
    """Kept/dropped static labels: the last item of every non-first menu is
    dropped."""
    kept, dropped = [], []
    menus = universe.menus[t]
    for pos, menu in enumerate(menus):
        labels = [(menu.index, i) for i in range(1, menu.size + 1)]
        if pos == 0:
            kept.extend(labels)
        else:
            kept.extend(labels[:-1])
            dropped.append(labels[-1])
    return tuple(kept), tuple(dropped)


# --- revealed path dominance ---------------------------------------------------------

def check_sarpd(rho: StochasticChoiceFunction, budgets_by_period: dict,
                patches_by_period: dict, tol: float = ESTIMATE_TOL) -> CheckReport:
    """Mass on choice paths whose patches contain a revealed-preference cycle.

    The weak relation runs from a chosen patch to every patch reachable in
    its budget (minimum expenditure at the chooser's prices no larger than
    its wealth); any directed cycle over distinct cells marks the path, and
    under constant utility marked paths must carry zero probability.
    """
    uni = rho.universe
    patch_by_label = {t: {p.label: p for p in patches_by_period[t]} for t in patches_by_period}
    budget_by_index = {t: {b.index: b for b in budgets_by_period[t]} for t in budgets_by_period}
    min_cache = {}

    def geom_key(t, patch: Patch):
        own = budget_by_index[t][patch.budget]
        own_key = (tuple(own.prices), own.expenditure)
        signs = tuple(sorted(((tuple(budget_by_index[t][j].prices),
                               budget_by_index[t][j].expenditure), s)
                             for j, s in patch.sign_vector.items()))
        return (own_key, signs)

    def min_spend(t_cell, patch: Patch, prices_key):
        key = (geom_key(t_cell, patch), prices_key)
        if key in min_cache:
            return min_cache[key]
        own = budget_by_index[t_cell][patch.budget]
        others = [b for b in budgets_by_period[t_cell] if b.index != patch.budget]
        A_eq, b_eq, A_ub, b_ub = _cell_constraints(own, others, patch.sign_vector)
        p = np.array(prices_key[0], dtype=float)
        res = linprog(p, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                      bounds=[(None, None)] * own.num_goods, method="highs")
        val = res.fun if res.status == 0 else np.inf
        min_cache[key] = val
        return val

    cyclic_mass = 0.0
    cyclic_paths = []
    for path in rho.observed_paths:
        order = uni.choice_paths(path)
        arr = np.asarray(rho.probs[path], dtype=float)
        for cp, mass in zip(order, arr):
            cells = []
            for t, j, i in zip(uni.periods, path, cp):
                patch = patch_by_label[t][(j, i)]
                cells.append((t, patch))
            keys = [geom_key(t, p) for t, p in cells]
            uniq = {}
            for (t, p), key in zip(cells, keys):
                uniq[key] = (t, p)
            if len(uniq) < 2:
                continue
            nodes = list(uniq)
            adj = {a: set() for a in nodes}
            for a in nodes:
                t_a, p_a = uniq[a]
                own = budget_by_index[t_a][p_a.budget]
                w_a = own.w()
                prices_key = (tuple(float(v) for v in own.prices), float(own.expenditure))
                for b in nodes:
                    if a == b:
                        continue
                    t_b, p_b = uniq[b]
                    other = budget_by_index[t_b][p_b.budget]
                    same_budget = (tuple(float(v) for v in other.prices),
                                   float(other.expenditure)) == prices_key
                    # a reachable point must exist inside the open cell:
                    # strictly cheaper somewhere, or expenditure-tied on the
                    # same hyperplane
                    if same_budget or min_spend(t_b, p_b, prices_key) < w_a - 1e-9:
                        adj[a].add(b)
            if _has_cycle(nodes, adj):
                cyclic_mass += float(mass)
                if mass > tol:
                    cyclic_paths.append((path, cp, float(mass)))
    return CheckReport("sarpd", cyclic_mass <= tol, cyclic_mass, tuple(cyclic_paths),
                       {"tolerance": tol, "cyclic_mass": cyclic_mass})


def _has_cycle(nodes, adj) -> bool:
    color = {n: 0 for n in nodes}

    def dfs(n):
        color[n] = 1
        for m in adj[n]:
            if color[m] == 1:
                return True
            if color[m] == 0 and dfs(m):
                return True
        color[n] = 2
        return False

    return any(dfs(n) for n in nodes if color[n] == 0)


# --- sequence-sum audit ------------------------------------------------------------------

@dataclass(frozen=True)
class AdsrpReport:
    gap: float
    counts: dict
    length: int
    disproves: bool


def adsrp_audit(rho: StochasticChoiceFunction, A: TypeMatrix, max_len: int = 8) -> AdsrpReport:
    """Greedy-plus-swaps search for a sequence of path entries whose summed
    probability exceeds the best single type's score; a positive gap
    disproves consistency, absence at bounded length proves nothing."""
    dense = A.dense().astype(float)
    vec = rho_vector_for(A, rho)
    n = len(vec)

    def score(counts):
        return float(counts @ vec - (counts @ dense).max())

    counts = np.zeros(n)
    best_counts, best_gap = counts.copy(), score(counts)
    for _ in range(max_len):
        gains = [score(counts + _unit(n, r)) for r in range(n)]
        r = int(np.argmax(gains))
        counts = counts + _unit(n, r)
        if gains[r] > best_gap:
            best_gap, best_counts = gains[r], counts.copy()
    improved = True
    while improved:
        improved = False
        support = np.nonzero(best_counts)[0]
        for r_out in support:
            for r_in in range(n):
                if r_in == r_out:
                    continue
                trial = best_counts + _unit(n, r_in) - _unit(n, r_out)
                g = score(trial)
                if g > best_gap + 1e-12:
                    best_gap, best_counts, improved = g, trial, True
    labels = {A.row_labels[r]: int(c) for r, c in enumerate(best_counts) if c > 0}
    return AdsrpReport(best_gap, labels, int(best_counts.sum()), best_gap > FEASIBILITY_TOL)


def _unit(n, r):
    u = np.zeros(n)
    u[r] = 1.0
    return u
