import itertools

import numpy as np
import pytest

from drumtest import catalog
from drumtest.geometry import compute_patches, demand_universe, enumerate_demand_types
from drumtest.model import StochasticChoiceFunction
from drumtest.representations import build_static_A, enumerate_orders, kron_dynamic

SIMPLE_PAIRS = [(1, 1), (1, 2), (2, 1), (2, 2)]


@pytest.fixture(scope="session")
def binary_uni_T1():
    return catalog.binary_universe(periods=(1,))


@pytest.fixture(scope="session")
def binary_uni_T2():
    return catalog.binary_universe(periods=(1, 2))


@pytest.fixture(scope="session")
def simple_setup():
    """Budgets, universe, patches, per-period static matrix, and the
    T=2 dynamic matrix of the two-budget demand geometry."""
    budgets = catalog.simple_budgets((1, 2))
    uni, patches, dominance = demand_universe(budgets, (1, 2),
                                              index_maps=catalog.SIMPLE_INDEX_MAPS)
    types, _ = enumerate_demand_types(patches[1], budgets[1])
    statics = [build_static_A(uni, t, types) for t in (1, 2)]
    paths = sorted(itertools.product((1, 2), repeat=2))
    AT = kron_dynamic(statics, paths, uni)
    return {"budgets": budgets, "universe": uni, "patches": patches,
            "dominance": dominance, "types": types, "statics": statics, "AT": AT}


def rho_from_matrix(uni, M):
    """4x4 layout over pairs (1,1),(1,2),(2,1),(2,2) -> stochastic function."""
    probs = {}
    for (j1, j2) in itertools.product((1, 2), repeat=2):
        vec = []
        for i1 in (1, 2):
            for i2 in (1, 2):
                r = SIMPLE_PAIRS.index((j1, i1))
                c = SIMPLE_PAIRS.index((j2, i2))
                vec.append(M[r][c])
        probs[(j1, j2)] = np.array(vec, dtype=float)
    return StochasticChoiceFunction(uni, probs)


def rho_from_weights(uni, AT, nu):
    """Mixture weights (summing to 1) -> stochastic function on all paths."""
    fitted = AT.dense().astype(float) @ np.asarray(nu, dtype=float)
    probs = {}
    pos = 0
    paths = sorted({p for p, _ in AT.row_labels})
    for path in paths:
        k = len(uni.choice_paths(path))
        probs[path] = fitted[pos:pos + k]
        pos += k
    return StochasticChoiceFunction(uni, probs)


@pytest.fixture(scope="session")
def table5_rho(simple_setup):
    M = [[3 / 4, 0, 3 / 4, 0],
         [0, 1 / 4, 1 / 4, 0],
         [0, 1 / 4, 1 / 4, 0],
         [3 / 4, 0, 3 / 4, 0]]
    return rho_from_matrix(simple_setup["universe"], M)


@pytest.fixture(scope="session")
def table9_rho(simple_setup):
    M = [[1 / 6, 1 / 3, 2 / 3, 0],
         [1 / 3, 1 / 6, 1 / 6, 1 / 6],
         [1 / 6, 1 / 3, 2 / 3, 0],
         [1 / 3, 1 / 6, 1 / 6, 1 / 6]]
    return rho_from_matrix(simple_setup["universe"], M)


@pytest.fixture(scope="session")
def demand3x3_setup():
    budgets = catalog.demand3x3_budgets((1,))
    uni, patches, dominance = demand_universe(budgets, (1,),
                                              index_maps=catalog.DEMAND3X3_INDEX_MAPS)
    types, _ = enumerate_demand_types(patches[1], budgets[1])
    A = build_static_A(uni, 1, types)
    return {"budgets": budgets, "universe": uni, "patches": patches,
            "dominance": dominance, "types": types, "A": A}
