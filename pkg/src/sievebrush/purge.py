"""
    Singleton and clique removal over a relation set.

    A RelSet keeps its rows (Counters of ideal key -> valuation) in CSR
    numpy arrays plus an `active` mask; removal only clears mask bits, so
    row ids stay the indices of the original relations.
"""

import logging

import networkx as nx
import numpy as np

from sievebrush.errors import DomainError
from sievebrush.relations import IdealIndex, relation_ideals


class RelSet:
    def __init__(self, rows, lims=None, relations=None):
        self.rows = rows
        self.relations = relations
        self.lims = lims
        self.index = IdealIndex(k for row in rows for k in row)
        lengths = np.array([len(row) for row in rows], dtype=np.int64)
        self.indptr = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
        self.cols = np.fromiter(
            (self.index[k] for row in rows for k in row), dtype=np.int64, count=int(lengths.sum())
        )
        self.owner = np.repeat(np.arange(len(rows), dtype=np.int64), lengths)
        self.large = np.array(
            [self._is_large(k) for k in self.index.keys()], dtype=bool
        ) if len(self.index) else np.zeros(0, dtype=bool)
        self.active = np.ones(len(rows), dtype=bool)

    @classmethod
    def from_relations(cls, relations, pair, lims=None):
        relations = list(relations)
        return cls([relation_ideals(rel, pair) for rel in relations], lims, relations)

    @classmethod
    def from_rows(cls, rows, lims=None):
        return cls(list(rows), lims)

    def _is_large(self, key):
        if not self.lims:
            return False
        return key[1] > self.lims[key[0]]

    def copy(self):
        other = object.__new__(RelSet)
        other.__dict__.update(self.__dict__)
        other.active = self.active.copy()
        return other

    def counts(self):
        """Exact column weights over the active rows."""
        live = self.active[self.owner]
        return np.bincount(self.cols[live], minlength=len(self.index))

    def weights(self):
        """Column weights saturating at 255."""
        return np.minimum(self.counts(), 255).astype(np.uint8)

    @property
    def nrows(self):
        return int(self.active.sum())

    @property
    def ncols(self):
        return int((self.counts() > 0).sum())

    @property
    def excess(self):
        return self.nrows - self.ncols

    def active_ids(self):
        return np.flatnonzero(self.active).tolist()

    def row_weight(self, rid):
        lo, hi = self.indptr[rid], self.indptr[rid + 1]
        return 1 + int(self.large[self.cols[lo:hi]].sum())

    def removal_change(self, rids):
        """Exact excess change if rids were removed now."""
        rids = np.asarray(rids, dtype=np.int64)
        mask = np.zeros(len(self.rows), dtype=bool)
        mask[rids] = True
        mask &= self.active
        hit = mask[self.owner]
        inside = np.bincount(self.cols[hit], minlength=len(self.index))
        vanished = int(((inside > 0) & (inside == self.counts())).sum())
        return -int(mask.sum()) + vanished

    def remove(self, rids):
        self.active[np.asarray(list(rids), dtype=np.int64)] = False

    def active_rows(self):
        return [(rid, self.rows[rid]) for rid in self.active_ids()]

    def __str__(self):
        return f"{self.nrows} relations x {self.ncols} ideals (excess {self.excess})"


def _singleton_pass(rs):
    single = rs.weights() == 1
    hit = single[rs.cols] & rs.active[rs.owner]
    doomed = np.bincount(rs.owner[hit], minlength=len(rs.rows)) > 0
    return doomed & rs.active


def singleton_removal(rs):
    """Delete every relation touching a weight-1 ideal, until none is left."""
    rs = rs.copy()
    passes = 0
    while True:
        doomed = _singleton_pass(rs)
        if not doomed.any():
            break
        rs.active &= ~doomed
        passes += 1
    logging.info(f"singleton removal: {rs} after {passes} passes")
    return rs


def cliques(rs):
    """Connected components of active relations linked through weight-2 ideals."""
    counts = rs.counts()
    live = rs.active[rs.owner] & (counts[rs.cols] == 2)
    cols, owners = rs.cols[live], rs.owner[live]
    order = np.argsort(cols, kind="stable")
    cols, owners = cols[order], owners[order]
    graph = nx.Graph()
    graph.add_nodes_from(rs.active_ids())
    graph.add_edges_from(zip(owners[0::2].tolist(), owners[1::2].tolist()))
    return [sorted(c) for c in nx.connected_components(graph)]


def clique_removal(rs, target_excess):
    """Remove heaviest cliques, then single relations, down to target_excess.

    A clique's weight is the sum over its relations of 1 + #large ideals.
    Each round removes cliques until half the surplus is gone, never
    dropping below the target, and re-runs singleton removal.
    """
    if rs.excess < target_excess:
        logging.error(f"excess {rs.excess} below target {target_excess}")
        raise DomainError(f"excess {rs.excess} is below the target {target_excess}")
    rs = singleton_removal(rs)
    rounds = 0
    while rs.excess > target_excess:
        surplus = rs.excess - target_excess
        goal = rs.excess - max(1, surplus // 2)
        comps = cliques(rs)
        comps.sort(key=lambda c: (-sum(rs.row_weight(r) for r in c), c[0]))
        removed = 0
        for comp in comps:
            if rs.excess <= goal:
                break
            change = rs.removal_change(comp)
            if rs.excess + change < target_excess:
                continue
            rs.remove(comp)
            removed += len(comp)
        if not removed:
            # no clique fits: trim the heaviest single relation
            ids = rs.active_ids()
            if not ids:
                break
            worst = max(ids, key=lambda r: (rs.row_weight(r), r))
            rs.remove([worst])
            removed = 1
        rs = singleton_removal(rs)
        rounds += 1
        logging.debug(f"clique round {rounds}: removed {removed}, excess {rs.excess}")
    logging.info(f"clique removal: {rs} after {rounds} rounds")
    return rs
