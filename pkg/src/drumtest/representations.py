"""V- and H-representations of the consistency cone.

Canonical orderings, used everywhere:

* static row space: menus in declared order, items in menu order, labelled
  ``(menu_index, position)``;
* type columns: linear orders in lexicographic order of their ranking words
  (demand types in lexicographic order of their patch tuples);
* dynamic spaces: Kronecker products with the period-1 factor slowest, so a
  path entry sits at the product index of its per-period (menu, item) pairs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog

from . import catalog
from .errors import GeometryError, ParameterError, SchemaError, SizeError
from .model import ChoiceUniverse, Menu, StochasticChoiceFunction

DENSE_ENTRY_GUARD = 100_000_000


@dataclass(frozen=True)
class LinearOrder:
    """A strict total order, best to worst."""

    period: object
    ranking: tuple

    def best_of(self, items):
        pos = {a: k for k, a in enumerate(self.ranking)}
        return min(items, key=lambda a: pos[a])


@dataclass(frozen=True)
class TypeMatrix:
    """0/1 matrix whose columns are deterministic rational types."""

    matrix: np.ndarray
    row_labels: tuple
    col_labels: tuple

    def __post_init__(self):
        m = self.matrix
        if m.shape != (len(self.row_labels), len(self.col_labels)):
            raise SchemaError("type matrix labels do not match its shape")
        if m.size and m.size <= 1_000_000:
            groups = {}
            for r, lab in enumerate(self.row_labels):
                groups.setdefault(_menu_key(lab), []).append(r)
            for key, rows in groups.items():
                sums = np.asarray(m[rows, :]).sum(axis=0)
                if not np.all(sums == 1):
                    raise SchemaError(f"adding-up fails in menu group {key}")

    @property
    def shape(self):
        return self.matrix.shape

    def dense(self) -> np.ndarray:
        if hasattr(self.matrix, "toarray"):
            return self.matrix.toarray()
        return np.asarray(self.matrix)


def _menu_key(row_label):
    """Menu grouping key of a row label: (j,) static or the menu path."""
    first = row_label[0]
    return first if isinstance(first, tuple) else row_label[0]


@dataclass(frozen=True)
class InequalityMatrix:
    """Signed integer rows of one H-representation.

    ``rows`` holds the facet block exactly as published (or computed);
    ``include_nonneg`` appends coordinate nonnegativity when materializing
    the full row set.
    """

    kind: str
    rows: np.ndarray
    col_labels: tuple
    include_nonneg: bool = False

    def full(self) -> np.ndarray:
        if not self.include_nonneg:
            return np.asarray(self.rows)
        eye = np.eye(len(self.col_labels), dtype=int)
        if len(self.rows) == 0:
            return eye
        return np.vstack([np.asarray(self.rows), eye])


@dataclass(frozen=True)
class ReducedSystem:
    """Row reduction dropping the last item of every non-first menu."""

    kept_labels: tuple
    dropped_labels: tuple
    kept_indices: tuple
    dropped_indices: tuple
    reconstruction: np.ndarray  # rows of the dropped block as +/-1 combos of kept rows


@dataclass(frozen=True)
class ProjectionOperator:
    """Averaging maps from a replicated time window back to the original one.

    ``phi[t]`` is the exact facet-average vector of period t's reduced
    H-matrix; ``gammas[t]`` the per-period averaging matrix for k_t copies;
    ``Gamma`` their Kronecker composite (period 1 untouched). All entries are
    Fractions.
    """

    k: tuple
    phi: dict
    gammas: dict
    Gamma: np.ndarray

    def gamma_float(self, t) -> np.ndarray:
        return self.gammas[t].astype(float)

    def Gamma_float(self) -> np.ndarray:
        return self.Gamma.astype(float)


# --- linear orders -----------------------------------------------------------

def enumerate_orders(universe: ChoiceUniverse, t, eu_filter: dict | None = None):
    """All strict total extensions of the period's primitive order, in
    lexicographic order of position words; optionally filtered to rankings
    admitting a prize-utility vector that strictly rationalizes them."""
    alts = universe.alternatives[t]
    pairs = universe.primitive_order.get(t, ())
    orders = []
    for perm in itertools.permutations(alts):
        pos = {a: k for k, a in enumerate(perm)}
        ok = True
        for dom, sub in pairs:
            if min(pos[a] for a in dom) >= min(pos[a] for a in sub):
                ok = False
                break
        if ok:
            orders.append(LinearOrder(t, perm))
    if eu_filter is not None:
        orders = [o for o in orders if _eu_consistent(o, eu_filter)]
    return orders


def _eu_consistent(order: LinearOrder, lotteries: dict, margin_tol: float = 1e-9) -> bool:
    """Strict feasibility of u with u.l decreasing along the ranking."""
    mats = [np.array([float(v) for v in lotteries[a]]) for a in order.ranking]
    n_prizes = len(mats[0])
    c = np.zeros(n_prizes + 1)
    c[-1] = -1.0
    A_ub, b_ub = [], []
    for better, worse in zip(mats, mats[1:]):
        row = np.append(-(better - worse), 1.0)
        A_ub.append(row)
        b_ub.append(0.0)
    A_ub.append(np.append(np.zeros(n_prizes), 1.0))
    b_ub.append(1.0)
    res = linprog(c, A_ub=np.array(A_ub), b_ub=np.array(b_ub),
                  bounds=[(-1, 1)] * n_prizes + [(None, None)], method="highs")
    return res.status == 0 and res.x[-1] > margin_tol


# --- static and dynamic type matrices ---------------------------------------

def static_row_labels(universe: ChoiceUniverse, t) -> tuple:
    labels = []
    for menu in universe.menus[t]:
        labels.extend((menu.index, i) for i in range(1, menu.size + 1))
    return tuple(labels)


def build_static_A(universe: ChoiceUniverse, t, types) -> TypeMatrix:
    """One-period type matrix; ``types`` are LinearOrders or patch tuples.

    A linear-order column marks the best item of every menu; a patch-tuple
    column marks its chosen patch per budget. Duplicate columns are merged,
    keeping the first label.
    """
    labels = static_row_labels(universe, t)
    row_index = {lab: r for r, lab in enumerate(labels)}
    cols, col_labels, seen = [], [], {}
    for typ in types:
        col = np.zeros(len(labels), dtype=np.int8)
        if isinstance(typ, LinearOrder):
            for menu in universe.menus[t]:
                best = typ.best_of(menu.items)
                col[row_index[(menu.index, menu.position(best))]] = 1
            label = typ.ranking
        else:
            menus = universe.menus[t]
            if len(typ) != len(menus):
                raise SchemaError("patch tuple length must equal the number of menus")
            for menu, i in zip(menus, typ):
                col[row_index[(menu.index, i)]] = 1
            label = tuple(typ)
        key = col.tobytes()
        if key in seen:
            continue
        seen[key] = label
        cols.append(col)
        col_labels.append(label)
    return TypeMatrix(np.column_stack(cols).astype(np.int8), labels, tuple(col_labels))


def kron_dynamic(statics: list, observed_paths, universe: ChoiceUniverse) -> TypeMatrix:
    """Kronecker product of per-period type matrices, rows restricted to the
    observed menu paths (dropped rows are never materialized)."""
    if len(statics) != universe.num_periods:
        raise SchemaError("need one static matrix per period")
    observed_paths = sorted(tuple(p) for p in observed_paths)
    n_cols = int(np.prod([len(a.col_labels) for a in statics]))
    n_rows = sum(len(universe.choice_paths(p)) for p in observed_paths)
    if n_rows * n_cols > DENSE_ENTRY_GUARD:
        raise SizeError(
            f"{n_rows}x{n_cols} exceeds the size guard; use the H-route instead")
    row_maps = [{lab: r for r, lab in enumerate(a.row_labels)} for a in statics]
    mats = [a.dense() for a in statics]
    rows, labels = [], []
    for path in observed_paths:
        for cp in universe.choice_paths(path):
            vecs = [mats[k][row_maps[k][(path[k], cp[k])]] for k in range(len(statics))]
            row = vecs[0]
            for v in vecs[1:]:
                row = np.kron(row, v)
            rows.append(row.astype(np.int8))
            labels.append((path, cp))
    col_labels = tuple(itertools.product(*[a.col_labels for a in statics]))
    return TypeMatrix(np.array(rows, dtype=np.int8), tuple(labels), col_labels)


# --- row reduction -----------------------------------------------------------

def reduce_star(A: TypeMatrix):
    """Drop the last item of every menu but the first; reconstruct the rest.

    Returns (A_star, A_minus, G, reduction) with A_minus = G @ A_star. The
    k-th row of G carries +1 on the first menu's rows and -1 on the kept rows
    of the (k+1)-th menu.
    """
    menu_order, groups = [], {}
    for r, lab in enumerate(A.row_labels):
        j = lab[0]
        if j not in groups:
            groups[j] = []
            menu_order.append(j)
        groups[j].append(r)
    kept, dropped = [], []
    for pos, j in enumerate(menu_order):
        rows = groups[j]
        if pos == 0:
            kept.extend(rows)
        else:
            kept.extend(rows[:-1])
            dropped.append(rows[-1])
    kept_sorted = sorted(kept)
    dense = A.dense()
    star = _RowBlock(dense[kept_sorted, :], tuple(A.row_labels[r] for r in kept_sorted),
                     A.col_labels)
    if dropped:
        minus_mat = dense[dropped, :]
    else:
        minus_mat = np.zeros((0, dense.shape[1]), dtype=np.int8)
    kept_pos = {r: k for k, r in enumerate(kept_sorted)}
    G = np.zeros((len(dropped), len(kept_sorted)), dtype=int)
    first_rows = groups[menu_order[0]]
    for grow, j in enumerate(menu_order[1:]):
        for r in first_rows:
            G[grow, kept_pos[r]] = 1
        for r in groups[j][:-1]:
            G[grow, kept_pos[r]] = -1
    reduction = ReducedSystem(star.row_labels,
                              tuple(A.row_labels[r] for r in dropped),
                              tuple(kept_sorted), tuple(dropped), G)
    minus = _RowBlock(minus_mat, tuple(A.row_labels[r] for r in dropped), A.col_labels)
    return star, minus, G, reduction


@dataclass(frozen=True)
class _RowBlock:
    """Dropped-row block of a type matrix; no adding-up invariant applies."""

    matrix: np.ndarray
    row_labels: tuple
    col_labels: tuple

    def dense(self):
        return np.asarray(self.matrix)


def reduce_H(H: InequalityMatrix, kept_labels, dropped_labels) -> InequalityMatrix:
    """Reduced H-matrix: facet rows supported on the kept coordinates,
    restricted to them, plus kept-coordinate nonnegativity; duplicates
    removed, facet rows first."""
    label_pos = {lab: k for k, lab in enumerate(H.col_labels)}
    kept_cols = [label_pos[lab] for lab in kept_labels]
    dropped_cols = [label_pos[lab] for lab in dropped_labels]
    out, seen = [], set()
    rows = np.asarray(H.rows)
    for row in rows:
        if len(dropped_cols) and np.any(row[dropped_cols] != 0):
            continue
        red = tuple(int(v) for v in row[kept_cols])
        if red not in seen:
            seen.add(red)
            out.append(red)
    for k in range(len(kept_cols)):
        unit = tuple(1 if i == k else 0 for i in range(len(kept_cols)))
        if unit not in seen:
            seen.add(unit)
            out.append(unit)
    return InequalityMatrix(H.kind + "-reduced", np.array(out, dtype=int),
                            tuple(kept_labels), include_nonneg=False)


# --- catalog H ----------------------------------------------------------------

def catalog_H(kind: str, universe: ChoiceUniverse, t) -> InequalityMatrix:
    """Published facet systems for the catalog geometries.

    ``binary``: ordered-triple triangle rows (complete for up to five
    alternatives) plus nonnegativity; ``simple``: the complete printed
    four-row table; ``demand3x3``: the printed seven facet rows plus
    nonnegativity.
    """
    labels = static_row_labels(universe, t)
    if kind == "binary":
        n = len(universe.alternatives[t])
        if n > 5:
            raise GeometryError("triangle catalog covers at most 5 alternatives; "
                                "use convert_V_to_H")
        rows = catalog.triangle_rows(universe, t)
        return InequalityMatrix("triangle", rows, labels, include_nonneg=True)
    if kind == "simple":
        if len(labels) != 4:
            raise GeometryError("simple catalog expects 2 budgets with 2 patches each")
        return InequalityMatrix("simple-monotone", catalog.H_SIMPLE.copy(), labels,
                                include_nonneg=False)
    if kind == "demand3x3":
        if len(labels) != 12:
            raise GeometryError("demand3x3 catalog expects 3 budgets with 4 patches each")
        return InequalityMatrix("demand-3x3", catalog.H_DEMAND3X3.copy(), labels,
                                include_nonneg=True)
    raise GeometryError(f"unknown catalog geometry {kind!r}; use convert_V_to_H")


def kron_inequalities(H_list: list) -> InequalityMatrix:
    """Kronecker product of per-period full H-matrices; the column space is
    the product of the per-period row spaces, period 1 slowest."""
    mats = [np.asarray(H.full()) for H in H_list]
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    labels = tuple(itertools.product(*[H.col_labels for H in H_list]))
    kinds = "x".join(H.kind for H in H_list)
    return InequalityMatrix(f"kron({kinds})", out, labels, include_nonneg=False)


def pair_vector(rho: StochasticChoiceFunction, pair_lists: list) -> np.ndarray:
    """Flatten a stochastic choice function into the Kronecker pair order.

    ``pair_lists[t]`` enumerates period t's (menu, item-position) pairs; the
    output index runs over their product with period 1 slowest. Every menu
    path in the product must be observed.
    """
    uni = rho.universe
    cache = {}
    out = np.empty(int(np.prod([len(p) for p in pair_lists])))
    for flat, combo in enumerate(itertools.product(*pair_lists)):
        menu_path = tuple(p[0] for p in combo)
        cp = tuple(p[1] for p in combo)
        if menu_path not in cache:
            if menu_path not in rho.probs:
                raise SchemaError(f"menu path {menu_path} not observed; "
                                  "the H-route needs full menu-path coverage")
            order = {c: k for k, c in enumerate(uni.choice_paths(menu_path))}
            cache[menu_path] = (order, np.asarray(rho.probs[menu_path], dtype=float))
        order, vec = cache[menu_path]
        out[flat] = vec[order[cp]]
    return out


def full_pair_lists(universe: ChoiceUniverse) -> list:
    return [list(static_row_labels(universe, t)) for t in universe.periods]


# --- Block-Marschak machinery -------------------------------------------------

def virtual_universe(universe: ChoiceUniverse) -> ChoiceUniverse:
    """Extend every period's menus to all nonempty subsets of its choice set;
    observed menus keep their indices, virtual ones follow by (size, order)."""
    menus = {}
    for t in universe.periods:
        alts = universe.alternatives[t]
        if len(alts) > 12:
            raise SizeError("virtual menu extension capped at 12 alternatives")
        existing = {frozenset(m.items): m for m in universe.menus[t]}
        out = list(universe.menus[t])
        next_id = max(m.index for m in out) + 1
        pos = {a: k for k, a in enumerate(alts)}
        candidates = []
        for size in range(1, len(alts) + 1):
            candidates.extend(itertools.combinations(alts, size))
        for items in sorted(candidates, key=lambda s: (len(s), tuple(pos[a] for a in s))):
            if frozenset(items) not in existing:
                out.append(Menu(next_id, items))
                next_id += 1
        menus[t] = tuple(out)
    return ChoiceUniverse(universe.periods, universe.alternatives, menus,
                          universe.primitive_order)


def bm_matrix(universe: ChoiceUniverse, t) -> InequalityMatrix:
    """Alternating-sum rows over menu supersets, one per (item, menu) pair.

    Requires the period to carry full menu variation (use virtual_universe
    first); the row for (x, B) adds rho(x from B') with sign (-1)^{|B'\\B|}
    over every superset menu B'.
    """
    menus = universe.menus[t]
    sets = {m.index: frozenset(m.items) for m in menus}
    covered = {sets[m.index] for m in menus}
    alts = universe.alternatives[t]
    want = 2 ** len(alts) - 1
    if len(covered) != want:
        raise SchemaError("bm_matrix needs all nonempty subsets as menus")
    labels = static_row_labels(universe, t)
    pos = {lab: k for k, lab in enumerate(labels)}
    rows = np.zeros((len(labels), len(labels)), dtype=int)
    for menu in menus:
        for i in range(1, menu.size + 1):
            item = menu.items[i - 1]
            r = pos[(menu.index, i)]
            for other in menus:
                if sets[menu.index] <= sets[other.index]:
                    sign = (-1) ** (len(sets[other.index]) - len(sets[menu.index]))
                    rows[r, pos[(other.index, other.position(item))]] = sign
    return InequalityMatrix("BM", rows, labels, include_nonneg=True)


def drum_bm_values(rho_bar: StochasticChoiceFunction):
    """Recursive alternating-sum values per starting period.

    Level t applies the per-period superset operator at periods t..T; the
    level-1 tensor is the fully recursed system whose nonnegativity is
    necessary for consistency. Returns {level: tensor}, with axes indexed by
    the per-period (menu, item) pair lists.
    """
    uni = rho_bar.universe
    pair_lists = full_pair_lists(uni)
    tensor = pair_vector(rho_bar, pair_lists).reshape([len(p) for p in pair_lists])
    mats = [np.asarray(bm_matrix(uni, t).rows, dtype=float) for t in uni.periods]
    T = uni.num_periods
    levels = {}
    current = tensor
    for t_pos in range(T - 1, -1, -1):
        current = np.moveaxis(np.tensordot(mats[t_pos], current, axes=([1], [t_pos])),
                              0, t_pos)
        levels[uni.periods[t_pos]] = current
    return levels, pair_lists


# --- projection hierarchy -------------------------------------------------------

def _phi_from_rows(rows: np.ndarray) -> tuple:
    n = len(rows)
    sums = [sum(int(row[k]) for row in rows) for k in range(rows.shape[1])]
    return tuple(Fraction(s, n) for s in sums)


def _frac_eye(d: int) -> np.ndarray:
    eye = np.full((d, d), Fraction(0), dtype=object)
    for i in range(d):
        eye[i, i] = Fraction(1)
    return eye


def _frac_kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.empty((a.shape[0] * b.shape[0], a.shape[1] * b.shape[1]), dtype=object)
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            out[i * b.shape[0]:(i + 1) * b.shape[0],
                j * b.shape[1]:(j + 1) * b.shape[1]] = a[i, j] * b
    return out


def _gamma(phi: tuple, k: int) -> np.ndarray:
    d = len(phi)
    phi_row = np.array([list(phi)], dtype=object)
    eye = _frac_eye(d)
    total = None
    for j in range(1, k + 1):
        term = np.array([[Fraction(1)]], dtype=object)
        for _ in range(j - 1):
            term = _frac_kron(term, phi_row)
        term = _frac_kron(term, eye)
        for _ in range(k - j):
            term = _frac_kron(term, phi_row)
        total = term if total is None else total + term
    return total / k


def projection_ops(H_star_list: list, k: tuple) -> ProjectionOperator:
    """Facet-average vectors and replication-averaging operators.

    ``H_star_list`` holds the reduced per-period H-matrices (facet rows plus
    nonnegativity); ``k`` the per-period replication counts with k_1 = 1.
    """
    if len(k) != len(H_star_list):
        raise ParameterError("k must have one entry per period")
    if k[0] != 1:
        raise ParameterError("the first period is never replicated: k_1 must be 1")
    if any(kt < 1 for kt in k):
        raise ParameterError("replication counts must be >= 1")
    phi, gammas = {}, {}
    blocks = []
    for pos, (H, kt) in enumerate(zip(H_star_list, k)):
        rows = np.asarray(H.full())
        phi[pos] = _phi_from_rows(rows)
        if pos == 0:
            block = _frac_eye(rows.shape[1])
        else:
            block = _gamma(phi[pos], kt)
        gammas[pos] = block
        blocks.append(block)
    Gamma = blocks[0]
    for b in blocks[1:]:
        Gamma = _frac_kron(Gamma, b)
    return ProjectionOperator(tuple(k), phi, gammas, Gamma)
