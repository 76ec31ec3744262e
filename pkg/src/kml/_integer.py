"""Exact integer elimination: invariant factors (Smith normal form diagonal).

Incidence matrices of simplicial complexes are very sparse with unit
entries, so almost all of the work is unit-pivot elimination on a
dict-of-dicts representation. Whatever survives (entries that are not
units) is handed to a small dense Smith normal form.
"""
from __future__ import annotations

import heapq

import numpy as np
import scipy.sparse as sp


def _to_rows(matrix) -> dict[int, dict[int, int]]:
    coo = sp.coo_matrix(matrix)
    rows: dict[int, dict[int, int]] = {}
    for r, c, v in zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()):
        iv = int(round(v))
        if iv != v:
            raise ValueError("integer elimination needs an integer matrix")
        if iv:
            row = rows.setdefault(r, {})
            row[c] = row.get(c, 0) + iv
            if row[c] == 0:
                del row[c]
    return rows


def _dense_smith_diagonal(a: list[list[int]]) -> list[int]:
    """Invariant factors of a small dense integer matrix."""
    a = [row[:] for row in a]
    m = len(a)
    n = len(a[0]) if m else 0
    diag: list[int] = []
    t = 0
    while t < min(m, n):
        best = None
        for i in range(t, m):
            for j in range(t, n):
                if a[i][j] and (best is None or abs(a[i][j]) < abs(a[best[0]][best[1]])):
                    best = (i, j)
        if best is None:
            break
        i, j = best
        a[t], a[i] = a[i], a[t]
        for row in a:
            row[t], row[j] = row[j], row[t]
        while True:
            changed = False
            for i in range(t + 1, m):
                if a[i][t]:
                    q = a[i][t] // a[t][t]
                    for j in range(t, n):
                        a[i][j] -= q * a[t][j]
                    if a[i][t]:
                        a[t], a[i] = a[i], a[t]
                        changed = True
            for j in range(t + 1, n):
                if a[t][j]:
                    q = a[t][j] // a[t][t]
                    for i in range(t, m):
                        a[i][j] -= q * a[i][t]
                    if a[t][j]:
                        for row in a:
                            row[t], row[j] = row[j], row[t]
                        changed = True
            if changed:
                continue
            # pivot must divide the remaining block
            bad = next(
                (i for i in range(t + 1, m) for j in range(t + 1, n) if a[i][j] % a[t][t]),
                None,
            )
            if bad is None:
                break
            for j in range(t, n):
                a[t][j] += a[bad][j]
        diag.append(abs(a[t][t]))
        t += 1
    return diag


def invariant_factors(matrix) -> list[int]:
    """Nonzero diagonal of the Smith normal form of an integer matrix."""
    rows = _to_rows(matrix)
    cols: dict[int, set[int]] = {}
    for r, row in rows.items():
        for c in row:
            cols.setdefault(c, set()).add(r)

    factors: list[int] = []
    heap = [(len(rs), c) for c, rs in cols.items()]
    heapq.heapify(heap)
    while heap:
        length, c = heapq.heappop(heap)
        rs = cols.get(c)
        if rs is None:
            continue
        if len(rs) != length:
            heapq.heappush(heap, (len(rs), c))
            continue
        if not rs:
            del cols[c]
            continue
        pivot_row = None
        for r in rs:
            if abs(rows[r][c]) == 1 and (pivot_row is None or len(rows[r]) < len(rows[pivot_row])):
                pivot_row = r
        if pivot_row is None:
            # revisited only if the column changes (pushed again on update)
            continue
        prow = rows[pivot_row]
        pval = prow[c]
        touched: set[int] = set()
        for r in list(rs):
            if r == pivot_row:
                continue
            row = rows[r]
            factor = row[c] * pval
            for cc, v in prow.items():
                nv = row.get(cc, 0) - factor * v
                if nv:
                    if cc not in row:
                        cols[cc].add(r)
                    row[cc] = nv
                else:
                    if cc in row:
                        del row[cc]
                        cols[cc].discard(r)
                touched.add(cc)
            if not row:
                del rows[r]
        for cc in prow:
            cols[cc].discard(pivot_row)
            touched.add(cc)
        del rows[pivot_row]
        del cols[c]
        touched.discard(c)
        factors.append(1)
        for cc in touched:
            if cc in cols:
                heapq.heappush(heap, (len(cols[cc]), cc))

    if rows:
        live_cols = sorted({c for row in rows.values() for c in row})
        cidx = {c: i for i, c in enumerate(live_cols)}
        dense = [[0] * len(live_cols) for _ in rows]
        for i, row in enumerate(rows.values()):
            for c, v in row.items():
                dense[i][cidx[c]] = v
        factors.extend(_dense_smith_diagonal(dense))
    return sorted(factors)


def integer_rank(matrix) -> int:
    if min(matrix.shape) == 0:
        return 0
    return len(invariant_factors(matrix))


def torsion(matrix) -> list[int]:
    return [f for f in invariant_factors(matrix) if f > 1]


def restrict(matrix, rows_keep: np.ndarray, cols_keep: np.ndarray):
    m = sp.csr_matrix(matrix)
    return m[np.asarray(rows_keep)][:, np.asarray(cols_keep)]
