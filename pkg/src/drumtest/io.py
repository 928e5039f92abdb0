"""Flat-file formats: universes (JSON), panels/rho/budgets/lotteries/g
(CSV), and matrix export (Matrix Market plus labelled CSV)."""

from __future__ import annotations

import csv
import json
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.io import mmwrite
from scipy.sparse import coo_matrix

from .errors import SchemaError
from .geometry import Budget
from .model import ChoiceUniverse, Menu, PanelDataset, PanelRecord, StochasticChoiceFunction


def _coerce(value):
    try:
        return int(value)
    except (TypeError, ValueError):
        return value


def _item_from_json(item):
    return tuple(item) if isinstance(item, list) else item


def universe_to_json(universe: ChoiceUniverse) -> dict:
    def items_out(seq):
        return [list(i) if isinstance(i, tuple) else i for i in seq]

    return {
        "periods": list(universe.periods),
        "alternatives": [items_out(universe.alternatives[t]) for t in universe.periods],
        "menus": [[{"id": m.index, "items": items_out(m.items)} for m in universe.menus[t]]
                  for t in universe.periods],
        "primitive_order": [[[items_out(sorted(dom, key=str)), items_out(sorted(sub, key=str))]
                             for dom, sub in universe.primitive_order.get(t, ())]
                            for t in universe.periods],
    }


def universe_from_json(doc: dict) -> ChoiceUniverse:
    periods = tuple(doc["periods"])
    alternatives, menus, order = {}, {}, {}
    for k, t in enumerate(periods):
        alternatives[t] = tuple(_item_from_json(i) for i in doc["alternatives"][k])
        menus[t] = tuple(Menu(m["id"], tuple(_item_from_json(i) for i in m["items"]))
                         for m in doc["menus"][k])
        pairs = doc.get("primitive_order", [[] for _ in periods])[k]
        order[t] = tuple((frozenset(_item_from_json(i) for i in dom),
                          frozenset(_item_from_json(i) for i in sub))
                         for dom, sub in pairs)
    return ChoiceUniverse(periods, alternatives, menus, order)


def write_universe(universe: ChoiceUniverse, path):
    Path(path).write_text(json.dumps(universe_to_json(universe), indent=1))


def read_universe(path) -> ChoiceUniverse:
    return universe_from_json(json.loads(Path(path).read_text()))


def write_panel(panel: PanelDataset, universe: ChoiceUniverse, path):
    """Header agent_id,period,menu_id,choice_id[,q_1..q_K]; choices are
    written as 1-based positions within the faced menu."""
    has_q = any(rec.quantity is not None for rec in panel.records)
    n_q = max((len(rec.quantity) for rec in panel.records if rec.quantity), default=0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["agent_id", "period", "menu_id", "choice_id"]
        if has_q:
            header += [f"q_{k+1}" for k in range(n_q)]
        w.writerow(header)
        for rec in panel.records:
            menu = universe.menu(rec.period, rec.menu_id)
            try:
                pos = menu.position(rec.choice_id)
            except SchemaError:
                pos = rec.choice_id
            row = [rec.agent_id, rec.period, rec.menu_id, pos]
            if has_q:
                row += list(rec.quantity) if rec.quantity else [""] * n_q
            w.writerow(row)


def read_panel(path) -> PanelDataset:
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        q_cols = [c for c in reader.fieldnames or [] if c.startswith("q_")]
        for row in reader:
            quantity = None
            if q_cols and row[q_cols[0]] != "":
                quantity = tuple(float(row[c]) for c in q_cols)
            records.append(PanelRecord(_coerce(row["agent_id"]), _coerce(row["period"]),
                                       int(row["menu_id"]), _coerce(row["choice_id"]),
                                       quantity))
    return PanelDataset(tuple(records))


def write_rho(rho: StochasticChoiceFunction, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["menu_path", "choice_path", "prob", "count"])
        for menu_path in rho.observed_paths:
            arr = np.asarray(rho.probs[menu_path], dtype=float)
            count = rho.counts.get(menu_path, "") if rho.counts else ""
            for cp, p in zip(rho.universe.choice_paths(menu_path), arr):
                w.writerow(["|".join(map(str, menu_path)), "|".join(map(str, cp)),
                            repr(float(p)), count])


def read_rho(path, universe: ChoiceUniverse) -> StochasticChoiceFunction:
    table = {}
    counts = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            menu_path = tuple(int(v) for v in row["menu_path"].split("|"))
            cp = tuple(int(v) for v in row["choice_path"].split("|"))
            table.setdefault(menu_path, {})[cp] = float(row["prob"])
            if row.get("count"):
                counts[menu_path] = int(float(row["count"]))
    probs = {}
    for menu_path, entries in table.items():
        order = universe.choice_paths(menu_path)
        probs[menu_path] = np.array([entries.get(cp, 0.0) for cp in order])
    return StochasticChoiceFunction(universe, probs, counts or None)


def read_budgets(path) -> dict:
    """period,budget_id,price_1..price_K,expenditure -> {period: [Budget]}."""
    out = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        price_cols = sorted((c for c in reader.fieldnames or [] if c.startswith("price_")),
                            key=lambda c: int(c.split("_")[1]))
        if not price_cols:
            raise SchemaError("budgets.csv needs price_1..price_K columns")
        for row in reader:
            t = _coerce(row["period"])
            prices = tuple(Fraction(row[c]) for c in price_cols)
            out.setdefault(t, []).append(Budget(t, int(row["budget_id"]), prices,
                                                Fraction(row["expenditure"])))
    return {t: sorted(bs, key=lambda b: b.index) for t, bs in out.items()}


def write_budgets(budgets_by_period: dict, path):
    periods = sorted(budgets_by_period, key=str)
    K = budgets_by_period[periods[0]][0].num_goods
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["period", "budget_id"] + [f"price_{k+1}" for k in range(K)]
                   + ["expenditure"])
        for t in periods:
            for b in budgets_by_period[t]:
                w.writerow([t, b.index] + [str(p) for p in b.prices] + [str(b.expenditure)])


def read_lotteries(path) -> dict:
    out = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        prize_cols = sorted((c for c in reader.fieldnames or [] if c.startswith("prize_")),
                            key=lambda c: int(c.split("_")[1]))
        for row in reader:
            out[_coerce(row["alternative_id"])] = tuple(Fraction(row[c]) for c in prize_cols)
    return out


def read_g(path):
    lower, upper = {}, {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (int(row["budget_id"]), int(row["patch_id"]))
            lower[key] = float(row["g_lower"])
            upper[key] = float(row["g_upper"])
    return lower, upper


def export_matrix(matrix, row_labels, col_labels, stem):
    """Write <stem>.mtx (coordinate Matrix Market) and <stem>.csv with the
    row/column index maps."""
    dense = np.asarray(matrix)
    mmwrite(str(stem) + ".mtx", coo_matrix(dense))
    with open(str(stem) + ".csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row_label"] + [str(c) for c in col_labels])
        for lab, row in zip(row_labels, dense):
            w.writerow([str(lab)] + [int(v) if float(v).is_integer() else float(v)
                                     for v in row])
