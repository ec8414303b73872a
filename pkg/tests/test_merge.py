import numpy as np
import pytest

from sievebrush.errors import DomainError
from sievebrush.merge import (
    merge,
    read_matrix,
    read_recipes,
    relation_row,
    replay,
    write_matrix,
    write_recipes,
)
from sievebrush.purge import RelSet, clique_removal, singleton_removal
from sievebrush.wiedemann import dense_kernel

from helpers import toy_rows


def _filtered(seed=0, excess=10):
    rows = toy_rows(seed=seed)
    rs = clique_removal(singleton_removal(RelSet.from_rows(rows)), excess)
    return rows, rs


def test_relation_row():
    ideals = {(0, 2, 1): 2, (0, 3, 1): 1, (1, 5, 2): 3}
    assert relation_row(ideals) == {(0, 3, 1): 1, (1, 5, 2): 1}
    assert relation_row(ideals, "dlp") == {(0, 2, 1): 2, (0, 3, 1): 1, (1, 5, 2): -3}
    with pytest.raises(DomainError):
        relation_row(ideals, "other")


def test_merge_rows_replay():
    rows, rs = _filtered()
    mm = merge(rs, target_density=12)
    base = [relation_row(r) for r in rows]
    assert mm.verify(base)
    assert mm.nrows - mm.ncols >= rs.excess
    assert mm.density <= 12 + 32


def test_merge_dlp_rows_replay():
    rows, rs = _filtered(seed=1)
    mm = merge(rs, target_density=12, kind="dlp")
    base = [relation_row(r, "dlp") for r in rows]
    assert mm.modulus == 0
    assert mm.verify(base)


def test_merged_kernel_is_original_kernel():
    rows, rs = _filtered(seed=2)
    mm = merge(rs, target_density=10)
    A = np.zeros((mm.nrows, mm.ncols), dtype=np.int64)
    for i, row in enumerate(mm.sparse_rows()):
        for c, v in row:
            A[i, c] = v % 2
    kernel = dense_kernel(A.T, 2)
    assert kernel
    for w in kernel:
        dep = mm.dependency(w)
        assert dep
        combined = replay({rid: 1 for rid in dep}, [relation_row(r) for r in rows], 2)
        assert combined == {}


def test_merge_needs_excess():
    rows = toy_rows(count=50, nideals=400)
    rs = RelSet.from_rows(rows)
    if rs.excess >= 0:
        pytest.skip("random rows happened to have excess")
    with pytest.raises(DomainError):
        merge(rs, 10)


def test_matrix_files(tmp_path):
    rows, rs = _filtered(seed=3)
    mm = merge(rs, target_density=10)
    write_matrix(mm, tmp_path / "matrix.bin")
    write_recipes(mm, tmp_path / "recipes.txt")

    nrows, ncols, modulus, sparse = read_matrix(tmp_path / "matrix.bin")
    assert (nrows, ncols, modulus) == (mm.nrows, mm.ncols, 2)
    assert sparse == mm.sparse_rows()
    assert read_recipes(tmp_path / "recipes.txt") == mm.recipes
