"""Combinatorial primitives: choice universes, menu/choice paths, and the
observed distribution over choice paths, plus estimation from panel data and
the marginal/conditional/slicing/pooling transforms.

Index conventions used everywhere in the package:

* periods are kept in the order declared by the universe,
* menus are kept in the order declared per period (`Menu.index` is the stable
  1-based id),
* items within a menu are kept in the menu's declared order and addressed by
  1-based position,
* choice paths within a menu path are enumerated with the period-1 index
  varying slowest (row-major), which matches the Kronecker-product row order
  of the type matrices.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import RejectedRecordError, SchemaError

PROB_TOL = 1e-9


@dataclass(frozen=True)
class Menu:
    """A menu: a stable 1-based index and an ordered tuple of item ids."""

    index: int
    items: tuple

    def __post_init__(self):
        if len(self.items) == 0:
            raise SchemaError(f"menu {self.index} is empty")
        if len(set(self.items)) != len(self.items):
            raise SchemaError(f"menu {self.index} has duplicate items")

    @property
    def size(self) -> int:
        return len(self.items)

    def position(self, item) -> int:
        """1-based position of an item inside the menu."""
        try:
            return self.items.index(item) + 1
        except ValueError:
            raise SchemaError(f"item {item!r} not in menu {self.index}")


@dataclass(frozen=True)
class ChoiceUniverse:
    """Per-period alternatives, primitive partial order, and menus.

    ``primitive_order[t]`` is a tuple of ``(dominant, dominated)`` pairs of
    frozensets of alternative ids; singleton sets encode item-level pairs.
    """

    periods: tuple
    alternatives: dict
    menus: dict
    primitive_order: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.periods) < 1:
            raise SchemaError("need at least one period")
        if len(set(self.periods)) != len(self.periods):
            raise SchemaError("duplicate period labels")
        object.__setattr__(self, "periods", tuple(self.periods))
        object.__setattr__(self, "primitive_order",
                           {t: tuple(self.primitive_order.get(t, ()))
                            for t in self.periods})
        for t in self.periods:
            alts = self.alternatives.get(t)
            if not alts:
                raise SchemaError(f"period {t} has no alternatives")
            menus = self.menus.get(t)
            if not menus:
                raise SchemaError(f"period {t} has no menus")
            seen = set()
            for menu in menus:
                if menu.index in seen:
                    raise SchemaError(f"duplicate menu index {menu.index} in period {t}")
                seen.add(menu.index)
                unknown = set(menu.items) - set(alts)
                if unknown:
                    raise SchemaError(f"menu {menu.index} in period {t} has unknown items {unknown}")
            for dom, sub in self.primitive_order.get(t, ()):
                if not (set(dom) <= set(alts) and set(sub) <= set(alts)):
                    raise SchemaError(f"primitive-order pair outside X^{t}")
            if _order_has_cycle(self.primitive_order.get(t, ()), alts):
                raise SchemaError(f"primitive order in period {t} has a cycle")

    @property
    def num_periods(self) -> int:
        return len(self.periods)

    def menu(self, t, j: int) -> Menu:
        for menu in self.menus[t]:
            if menu.index == j:
                return menu
        raise SchemaError(f"unknown menu id {j} in period {t}")

    def menu_indices(self, t) -> tuple:
        return tuple(menu.index for menu in self.menus[t])

    def choice_paths(self, menu_path: tuple):
        """All choice paths for a menu path, period-1 index slowest."""
        sizes = [self.menu(t, j).size for t, j in zip(self.periods, menu_path)]
        return list(itertools.product(*[range(1, s + 1) for s in sizes]))

    def path_items(self, menu_path: tuple, choice_path: tuple) -> tuple:
        """Item ids chosen along a path."""
        out = []
        for t, j, i in zip(self.periods, menu_path, choice_path):
            menu = self.menu(t, j)
            if not 1 <= i <= menu.size:
                raise SchemaError(f"choice index {i} outside menu {j} in period {t}")
            out.append(menu.items[i - 1])
        return tuple(out)


def _order_has_cycle(pairs, alternatives) -> bool:
    """Cycle test for the declared partial order under transitive closure.

    Subset-level pairs are projected to the relation 'some element of the
    dominant set precedes every element of the dominated set', whose
    consistency is equivalent to acyclicity of the induced relation on the
    dominant-set representatives; a sufficient practical test is acyclicity
    of the bipartite expansion linking every dominant element to every
    dominated element, which is exact for singleton pairs.
    """
    edges = set()
    for dom, sub in pairs:
        for a in dom:
            for b in sub:
                edges.add((a, b))
    adjacency = {a: set() for a in alternatives}
    for a, b in edges:
        adjacency[a].add(b)
    visiting, done = set(), set()

    def dfs(node):
        visiting.add(node)
        for nxt in adjacency[node]:
            if nxt in visiting:
                return True
            if nxt not in done and dfs(nxt):
                return True
        visiting.discard(node)
        done.add(node)
        return False

    return any(dfs(a) for a in alternatives if a not in done)


@dataclass(frozen=True)
class StochasticChoiceFunction:
    """Observed probability vectors over choice paths, one per menu path.

    ``probs[j]`` is a vector over the canonical choice-path order of menu
    path ``j``. ``counts[j]`` is the per-menu-path sample size when the
    function was estimated; ``choice_counts[j]`` keeps the exact integer
    tallies so tests can re-derive rationals.
    """

    universe: ChoiceUniverse
    probs: dict
    counts: dict | None = None
    choice_counts: dict | None = None

    def __post_init__(self):
        for path, vec in self.probs.items():
            expected = len(self.universe.choice_paths(path))
            if len(vec) != expected:
                raise SchemaError(f"menu path {path}: expected {expected} entries, got {len(vec)}")
            arr = np.asarray(vec, dtype=float)
            if np.any(arr < -PROB_TOL) or np.any(arr > 1 + PROB_TOL):
                raise SchemaError(f"menu path {path}: probabilities outside [0,1]")
            if abs(arr.sum() - 1.0) > PROB_TOL:
                raise SchemaError(f"menu path {path}: probabilities sum to {arr.sum()}, not 1")

    @property
    def observed_paths(self) -> list:
        return sorted(self.probs)

    def prob(self, menu_path: tuple, choice_path: tuple) -> float:
        idx = self.universe.choice_paths(menu_path).index(tuple(choice_path))
        return float(np.asarray(self.probs[menu_path])[idx])

    def flatten(self):
        """Stacked vector over observed menu paths (sorted) and the canonical
        choice-path order, plus the matching (menu_path, choice_path) labels."""
        vec, labels = [], []
        for path in self.observed_paths:
            arr = np.asarray(self.probs[path], dtype=float)
            vec.extend(arr.tolist())
            labels.extend((path, cp) for cp in self.universe.choice_paths(path))
        return np.array(vec), labels

    def fractions(self, menu_path: tuple):
        """Exact per-path probabilities when integer tallies are available."""
        if not self.choice_counts or menu_path not in self.choice_counts:
            raise SchemaError("no integer tallies recorded for this menu path")
        tallies = self.choice_counts[menu_path]
        total = int(sum(tallies))
        return [Fraction(int(c), total) for c in tallies]


@dataclass(frozen=True)
class PanelRecord:
    agent_id: object
    period: object
    menu_id: int
    choice_id: object
    quantity: tuple | None = None


@dataclass(frozen=True)
class PanelDataset:
    """One record per (agent, period); agents must cover every period."""

    records: tuple

    def by_agent(self, universe: ChoiceUniverse) -> dict:
        grouped = {}
        for rec in self.records:
            grouped.setdefault(rec.agent_id, {})
            if rec.period in grouped[rec.agent_id]:
                raise RejectedRecordError(
                    f"agent {rec.agent_id} has duplicate records for period {rec.period}")
            grouped[rec.agent_id][rec.period] = rec
        for agent, per_period in grouped.items():
            missing = set(universe.periods) - set(per_period)
            if missing:
                raise RejectedRecordError(f"agent {agent} is missing periods {sorted(map(str, missing))}")
            extra = set(per_period) - set(universe.periods)
            if extra:
                raise RejectedRecordError(f"agent {agent} has unknown periods {sorted(map(str, extra))}")
        return grouped


def estimate_rho(panel: PanelDataset, universe: ChoiceUniverse) -> StochasticChoiceFunction:
    """Sample frequencies of choice paths per observed menu path.

    Menu paths never observed are absent from the output rather than
    zero-filled.
    """
    grouped = panel.by_agent(universe)
    tallies = {}
    for agent, per_period in grouped.items():
        menu_path, choice_path = [], []
        for t in universe.periods:
            rec = per_period[t]
            menu = universe.menu(t, rec.menu_id)
            menu_path.append(rec.menu_id)
            choice_path.append(_resolve_choice(menu, rec.choice_id))
        menu_path, choice_path = tuple(menu_path), tuple(choice_path)
        vec = tallies.setdefault(menu_path, {})
        vec[choice_path] = vec.get(choice_path, 0) + 1
    probs, counts, choice_counts = {}, {}, {}
    for path, tally in tallies.items():
        order = universe.choice_paths(path)
        raw = np.array([tally.get(cp, 0) for cp in order], dtype=int)
        total = int(raw.sum())
        probs[path] = raw / total
        counts[path] = total
        choice_counts[path] = raw
    return StochasticChoiceFunction(universe, probs, counts, choice_counts)


def _resolve_choice(menu: Menu, choice_id) -> int:
    """Position of a chosen item, accepting either the item id or its
    1-based position within the menu."""
    try:
        return menu.position(choice_id)
    except SchemaError:
        if isinstance(choice_id, int) and 1 <= choice_id <= menu.size:
            return choice_id
        raise


def path_frequencies(rho: StochasticChoiceFunction, t) -> dict:
    """Conditional menu-path frequencies F(j | j_t) from recorded counts.

    Falls back to the uniform distribution over observed paths sharing each
    period-t menu when no counts are recorded.
    """
    t_pos = rho.universe.periods.index(t)
    weights = {}
    groups = {}
    for path in rho.observed_paths:
        groups.setdefault(path[t_pos], []).append(path)
    for jt, paths in groups.items():
        if rho.counts:
            totals = np.array([rho.counts.get(p, 0) for p in paths], dtype=float)
            if totals.sum() == 0:
                totals = np.ones(len(paths))
        else:
            totals = np.ones(len(paths))
        for p, w in zip(paths, totals / totals.sum()):
            weights[p] = w
    return weights


@dataclass(frozen=True)
class MarginalReport:
    """Conditional, marginal, and slicing transforms for one period.

    ``conditional[(menu_path, off_t_choices)]`` is the distribution over the
    period-t choice given the other periods' choices, or None where the
    conditioning mass is zero (flagged, not a crash). ``marginal[menu_path]``
    is the period-t distribution over the patches of its period-t menu.
    ``slice[j_t]`` mixes the marginals with the supplied path frequencies.
    """

    period: object
    conditional: dict
    marginal: dict
    slice: dict
    zero_mass_flags: tuple


def marginal_conditional_slice(rho: StochasticChoiceFunction, t, weights: dict | None = None) -> MarginalReport:
    """Exact conditional/marginal/slicing transforms at period ``t``."""
    uni = rho.universe
    if t not in uni.periods:
        raise SchemaError(f"unknown period {t}")
    t_pos = uni.periods.index(t)
    if weights is None:
        weights = path_frequencies(rho, t)
    else:
        groups = {}
        for path, w in weights.items():
            groups.setdefault(path[t_pos], 0.0)
            groups[path[t_pos]] += w
        for jt, tot in groups.items():
            if abs(tot - 1.0) > PROB_TOL:
                raise SchemaError(f"weights for period-{t} menu {jt} sum to {tot}, not 1")

    conditional, marginal, flags = {}, {}, []
    for path in rho.observed_paths:
        order = uni.choice_paths(path)
        arr = np.asarray(rho.probs[path], dtype=float)
        menu_t = uni.menu(t, path[t_pos])
        marg = np.zeros(menu_t.size)
        for cp, p in zip(order, arr):
            marg[cp[t_pos] - 1] += p
        marginal[path] = marg
        off_groups = {}
        for cp, p in zip(order, arr):
            key = tuple(v for k, v in enumerate(cp) if k != t_pos)
            off_groups.setdefault(key, np.zeros(menu_t.size))
            off_groups[key][cp[t_pos] - 1] += p
        for key, vec in off_groups.items():
            mass = vec.sum()
            if mass <= PROB_TOL:
                conditional[(path, key)] = None
                flags.append((path, key))
            else:
                conditional[(path, key)] = vec / mass

    slices = {}
    for path, marg in marginal.items():
        jt = path[t_pos]
        w = weights.get(path, 0.0)
        slices.setdefault(jt, np.zeros(len(marg)))
        slices[jt] = slices[jt] + w * marg
    return MarginalReport(t, conditional, marginal, slices, tuple(flags))
