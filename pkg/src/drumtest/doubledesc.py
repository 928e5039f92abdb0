"""Exact facet enumeration for desk-scale cones.

The facets of cone{A v : v >= 0} relative to its linear span are the extreme
rays of the dual cone expressed in span coordinates; those are enumerated
with the double description method using Fraction pivoting throughout, so
the output rows are exact integers.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd

import numpy as np

from .errors import SizeError
from .representations import InequalityMatrix, TypeMatrix

COLUMN_CAP = 200


def _rref(rows):
    """Reduced row echelon form over Fractions; returns (rows, pivot cols)."""
    rows = [list(r) for r in rows]
    n_cols = len(rows[0]) if rows else 0
    pivots = []
    r = 0
    for c in range(n_cols):
        pivot = next((i for i in range(r, len(rows)) if rows[i][c] != 0), None)
        if pivot is None:
            continue
        rows[r], rows[pivot] = rows[pivot], rows[r]
        pv = rows[r][c]
        rows[r] = [v / pv for v in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    return [rows[i] for i in range(r)], pivots


def _primitive(vec):
    """Scale a rational vector to coprime integers, preserving direction."""
    denoms = [v.denominator for v in vec if v != 0]
    if not denoms:
        return tuple(0 for _ in vec)
    scale = 1
    for d in denoms:
        scale = scale * d // gcd(scale, d)
    ints = [int(v * scale) for v in vec]
    g = 0
    for v in ints:
        g = gcd(g, abs(v))
    return tuple(v // g for v in ints)


def _extreme_rays(G):
    """Extreme rays of {y : G y >= 0} for full-column-rank G (pointed cone).

    Incremental double description: start from an invertible subsystem whose
    inverse columns span the initial simplicial cone, then cut with the
    remaining rows, combining adjacent rays across the new hyperplane.
    """
    n, s = len(G), len(G[0])
    order, base_rows = [], []
    rank_rows = []
    for i, row in enumerate(G):
        trial = rank_rows + [row]
        reduced, piv = _rref(trial)
        if len(reduced) == len(trial):
            rank_rows = [list(r) for r in trial]
            base_rows.append(i)
        if len(base_rows) == s:
            break
    if len(base_rows) < s:
        raise SizeError("generator matrix is rank-deficient in span coordinates")
    order = base_rows + [i for i in range(n) if i not in base_rows]

    B = [[G[i][j] for j in range(s)] for i in base_rows]
    inv = _invert(B)
    rays = []
    for k in range(s):
        ray = tuple(inv[j][k] for j in range(s))
        rays.append(ray)
    processed = list(base_rows)

    def dot(row, ray):
        return sum(a * b for a, b in zip(row, ray))

    zero_sets = []
    for ray in rays:
        zero_sets.append(frozenset(i for i in processed if dot(G[i], ray) == 0))

    for i in order[s:]:
        row = G[i]
        vals = [dot(row, ray) for ray in rays]
        keep = [k for k, v in enumerate(vals) if v >= 0]
        neg = [k for k, v in enumerate(vals) if v < 0]
        if not neg:
            processed.append(i)
            zero_sets = [zs | ({i} if vals[k] == 0 else set()) for k, zs in enumerate(zero_sets)]
            continue
        new_rays, new_zero = [], []
        for k in keep:
            new_rays.append(rays[k])
            new_zero.append(zero_sets[k] | ({i} if vals[k] == 0 else set()))
        for kp in keep:
            if vals[kp] <= 0:
                continue
            for kn in neg:
                common = zero_sets[kp] & zero_sets[kn]
                adjacent = True
                for ko in range(len(rays)):
                    if ko in (kp, kn):
                        continue
                    if common <= zero_sets[ko]:
                        adjacent = False
                        break
                if not adjacent:
                    continue
                combo = tuple(vals[kp] * rays[kn][j] - vals[kn] * rays[kp][j]
                              for j in range(s))
                combo = tuple(Fraction(v) for v in _primitive(combo))
                new_rays.append(combo)
                new_zero.append((zero_sets[kp] & zero_sets[kn]) | {i})
        processed.append(i)
        rays, zero_sets = new_rays, [frozenset(z) for z in new_zero]
        dedup = {}
        for ray, zs in zip(rays, zero_sets):
            dedup[_primitive(ray)] = (tuple(Fraction(v) for v in _primitive(ray)), zs)
        rays = [v[0] for v in dedup.values()]
        zero_sets = [v[1] for v in dedup.values()]
    return rays


def _invert(M):
    s = len(M)
    aug = [[Fraction(M[i][j]) for j in range(s)] + [Fraction(int(i == j)) for j in range(s)]
           for i in range(s)]
    reduced, piv = _rref(aug)
    if piv != list(range(s)):
        raise SizeError("initial double-description basis is singular")
    return [row[s:] for row in reduced]


def convert_V_to_H(A: TypeMatrix, within_span: bool = True,
                   column_cap: int = COLUMN_CAP) -> InequalityMatrix:
    """Facets of the column cone of a type matrix, exactly.

    With ``within_span`` the rows describe the cone relative to its linear
    span (the adding-up/stability subspace the generators live in); without
    it, the span's orthogonal-complement equalities are appended as +/- row
    pairs so the row set cuts the cone out of the full ambient space.
    """
    dense = A.dense()
    n_rows, n_cols = dense.shape
    if n_cols > column_cap:
        raise SizeError(f"{n_cols} columns exceed the facet-enumeration cap {column_cap}")
    gens = [[Fraction(int(dense[r, c])) for r in range(n_rows)] for c in range(n_cols)]
    basis, pivots = _rref(gens)
    s = len(basis)
    # generator coordinates in the RREF basis are read off the pivot columns,
    # so the coordinate map is z -> z[pivots] and a facet functional y on the
    # coordinate space embeds as the vector with entries y at the pivots
    coords = [[g[p] for p in pivots] for g in gens]
    rays = _extreme_rays(coords)
    facet_rows = []
    for ray in rays:
        h = [Fraction(0)] * n_rows
        for coef, p in zip(ray, pivots):
            h[p] = coef
        facet_rows.append(_primitive(h))
    facet_rows = sorted(set(facet_rows))
    rows = [list(r) for r in facet_rows]
    if not within_span:
        for null_row in _nullspace_rows(basis, n_rows):
            rows.append(list(null_row))
            rows.append([-v for v in null_row])
    return InequalityMatrix("converted", np.array(rows, dtype=int), A.row_labels,
                            include_nonneg=False)


def _nullspace_rows(basis, dim):
    """Integer basis of the orthogonal complement of the span."""
    if len(basis) == dim:
        return []
    M = [[Fraction(b[j]) for j in range(dim)] for b in basis]
    reduced, piv = _rref(M)
    free = [j for j in range(dim) if j not in piv]
    out = []
    for f in free:
        vec = [Fraction(0)] * dim
        vec[f] = Fraction(1)
        for r, p in enumerate(piv):
            vec[p] = -reduced[r][f]
        out.append(_primitive(vec))
    return out
