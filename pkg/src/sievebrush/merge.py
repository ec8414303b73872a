"""
    Merge: structured Gaussian elimination of light columns.

    Rows are dicts column key -> coefficient (GF(2): coefficient 1 only;
    DLP: signed integer valuations).  Every row carries a recipe, a dict
    relation id -> multiplier, so replaying the recipe over the original
    relations reproduces the row.
"""

from dataclasses import dataclass, field
import heapq
import logging
import math
import struct

import numpy as np

from sievebrush.errors import DomainError
from sievebrush.utils import open_text

MAX_COEFF = 1 << 20


def relation_row(ideals, kind="factor"):
    """Matrix row of one relation: parities for factoring, signed logs for DLP."""
    if kind == "factor":
        return {k: 1 for k, v in ideals.items() if v % 2}
    if kind == "dlp":
        return {k: (v if k[0] == 0 else -v) for k, v in ideals.items() if v}
    raise DomainError(f"kind must be factor or dlp, got {kind!r}")


@dataclass
class Pivot:
    """An eliminated column and the row it was solved from."""

    column: tuple
    row: dict
    recipe: dict


@dataclass
class MergeMatrix:
    rows: list
    recipes: list
    columns: list
    modulus: int
    kind: str = "factor"
    pivots: list = field(default_factory=list)

    @property
    def nrows(self):
        return len(self.rows)

    @property
    def ncols(self):
        return len(self.columns)

    @property
    def density(self):
        return sum(len(r) for r in self.rows) / max(1, len(self.rows))

    def column_index(self):
        return {k: i for i, k in enumerate(self.columns)}

    def sparse_rows(self):
        """Rows as sorted (column number, coefficient) lists."""
        index = self.column_index()
        return [sorted((index[k], v) for k, v in row.items()) for row in self.rows]

    def replay(self, recipe, base_rows):
        return replay(recipe, base_rows, self.modulus)

    def verify(self, base_rows):
        """Whether every row equals the replay of its recipe."""
        for row, recipe in zip(self.rows, self.recipes):
            if _reduce(row, self.modulus) != self.replay(recipe, base_rows):
                return False
        return True

    def dependency(self, vector):
        """Relation ids combined by a GF(2) left-kernel vector."""
        out = {}
        for i, bit in enumerate(vector[: self.nrows]):
            if int(bit) % 2:
                for rid in self.recipes[i]:
                    out[rid] = out.get(rid, 0) ^ 1
        return sorted(r for r, v in out.items() if v)

    def __str__(self):
        return f"{self.nrows} x {self.ncols} matrix, density {self.density:.1f}"


def _reduce(row, modulus):
    if modulus == 0:
        return {k: v for k, v in row.items() if v}
    return {k: v % modulus for k, v in row.items() if v % modulus}


def replay(recipe, base_rows, modulus=2):
    acc = {}
    for rid, mult in recipe.items():
        for k, v in base_rows[rid].items():
            acc[k] = acc.get(k, 0) + mult * v
    return _reduce(acc, modulus)


def _combine(row, prow, col, recipe, precipe, modulus):
    """row - (row[col]/prow[col]) * prow, scaled to stay integral for DLP."""
    if modulus == 2:
        out = dict(row)
        for k in prow:
            if k in out:
                del out[k]
            else:
                out[k] = 1
        rec = dict(recipe)
        for r in precipe:
            if r in rec:
                del rec[r]
            else:
                rec[r] = 1
        return out, rec
    c, cp = row[col], prow[col]
    g = math.gcd(c, cp)
    s, t = cp // g, c // g
    out = {k: s * v for k, v in row.items()}
    for k, v in prow.items():
        out[k] = out.get(k, 0) - t * v
    rec = {r: s * v for r, v in recipe.items()}
    for r, v in precipe.items():
        rec[r] = rec.get(r, 0) - t * v
    return ({k: v for k, v in out.items() if v}, {r: v for r, v in rec.items() if v})


def merge(rs, target_density, kind="factor", k_max=32, max_coeff=MAX_COEFF, ell=0):
    """Eliminate columns of weight <= k_max until the density reaches the target.

    Columns are taken lightest first; the pivot row is the shortest row of
    the column (Markowitz cost (r-1)(c-1) with c fixed).  DLP
    combinations with a coefficient above max_coeff leave the column
    unmerged.
    """
    if rs.excess < 0:
        raise DomainError(f"cannot merge with negative excess {rs.excess}")
    modulus = 2 if kind == "factor" else 0
    rows, recipes = {}, {}
    col_rows = {}
    for rid, ideals in rs.active_rows():
        row = relation_row(ideals, kind)
        rows[rid] = row
        recipes[rid] = {rid: 1}
        for k in row:
            col_rows.setdefault(k, set()).add(rid)
    heap = [(len(ids), k) for k, ids in col_rows.items() if len(ids) <= k_max]
    heapq.heapify(heap)
    nnz = sum(len(r) for r in rows.values())
    pivots = []
    skipped = set()
    merges = 0

    def drop(rid):
        nonlocal nnz
        for k in rows[rid]:
            col_rows[k].discard(rid)
            _push(k)
        nnz -= len(rows[rid])
        del rows[rid]
        del recipes[rid]

    def _push(k):
        w = len(col_rows[k])
        if w and w <= k_max:
            heapq.heappush(heap, (w, k))

    while heap:
        if rows and nnz / len(rows) >= target_density:
            break
        w, k = heapq.heappop(heap)
        ids = col_rows.get(k)
        if not ids or len(ids) != w or k in skipped:
            continue
        if w == 1:
            (rid,) = ids
            pivots.append(Pivot(k, rows[rid], recipes[rid]))
            drop(rid)
            continue
        pid = min(ids, key=lambda r: (len(rows[r]), r))
        prow, precipe = rows[pid], recipes[pid]
        updates = {}
        for rid in sorted(ids - {pid}):
            new, rec = _combine(rows[rid], prow, k, recipes[rid], precipe, modulus)
            if kind == "dlp" and any(abs(v) > max_coeff for v in new.values()):
                break
            updates[rid] = (new, rec)
        else:
            for rid, (new, rec) in updates.items():
                old = rows[rid]
                for c in set(old) | set(new):
                    if c in new and c not in old:
                        col_rows.setdefault(c, set()).add(rid)
                    elif c in old and c not in new:
                        col_rows[c].discard(rid)
                nnz += len(new) - len(old)
                rows[rid], recipes[rid] = new, rec
                for c in set(old) | set(new):
                    _push(c)
            pivots.append(Pivot(k, prow, precipe))
            drop(pid)
            merges += 1
            continue
        skipped.add(k)

    keep = sorted(rows)
    columns = sorted({k for rid in keep for k in rows[rid]})
    mm = MergeMatrix(
        [rows[r] for r in keep],
        [recipes[r] for r in keep],
        columns,
        modulus,
        kind,
        pivots,
    )
    logging.info(f"merge: {mm} after {merges} merges, {len(skipped)} columns left unmerged")
    return mm


#####################
#  File formats     #
#####################


def write_matrix(mm, path, modulus=None):
    """Binary matrix: rows, cols, field modulus (32 bytes), then rows."""
    modulus = modulus if modulus is not None else mm.modulus
    with open(path, "wb") as f:
        f.write(struct.pack("<QQ", mm.nrows, mm.ncols))
        f.write(int(modulus).to_bytes(32, "little"))
        for row in mm.sparse_rows():
            f.write(struct.pack("<I", len(row)))
            for col, coef in row:
                f.write(struct.pack("<Iq", col, coef))


def read_matrix(path):
    with open(path, "rb") as f:
        nrows, ncols = struct.unpack("<QQ", f.read(16))
        modulus = int.from_bytes(f.read(32), "little")
        rows = []
        for _ in range(nrows):
            (length,) = struct.unpack("<I", f.read(4))
            raw = f.read(12 * length)
            rows.append([struct.unpack_from("<Iq", raw, 12 * i) for i in range(length)])
    return nrows, ncols, modulus, rows


def write_recipes(mm, path):
    with open_text(path, "w") as f:
        for recipe in mm.recipes:
            f.write(" ".join(f"{rid}:{mult}" for rid, mult in sorted(recipe.items())) + "\n")


def read_recipes(path):
    out = []
    with open_text(path) as f:
        for line in f:
            pairs = (item.split(":") for item in line.split())
            out.append({int(r): int(m) for r, m in pairs})
    return out


def column_weights(mm):
    """Histogram of final column weights, for the filter report."""
    counts = {}
    for row in mm.rows:
        for k in row:
            counts[k] = counts.get(k, 0) + 1
    return np.bincount(np.array(list(counts.values()), dtype=np.int64)) if counts else np.zeros(1)
