import math
import random

import flint
import numpy as np
import pytest

from sievebrush import wiedemann
from sievebrush.wiedemann import (
    BwParams,
    Checkpoint,
    KernelError,
    SparseMatrix,
    VectorBlock,
    block_wiedemann,
    cost_summary,
    dense_kernel,
    krylov,
    krylov_length,
    lingen,
    mksol,
    nullspace,
    read_checkpoint,
    spmv_block,
    unit_rows,
    verify_offline,
    write_checkpoint,
)
from sievebrush.errors import ConfigError, DomainError

ELL60 = 1152921504606846883  # 2^60 - 93


def _identity(dim, modulus):
    return SparseMatrix([[(i, 1)] for i in range(dim)], dim, modulus)


def _random_rows(dim, ncols, modulus, per_row, seed):
    rng = random.Random(seed)
    rows = []
    for _ in range(dim):
        cols = rng.sample(range(ncols), per_row)
        rows.append(sorted((c, rng.randrange(1, modulus)) for c in cols))
    return rows


def _singular_rows(dim, modulus, seed):
    """Random sparse rows whose last row is a combination of two others."""
    rng = random.Random(seed)
    rows = _random_rows(dim - 1, dim, modulus, 8, seed)
    a, b = rng.sample(range(dim - 1), 2)
    k = rng.randrange(1, modulus)
    acc = {}
    for c, v in rows[a]:
        acc[c] = (acc.get(c, 0) + v) % modulus
    for c, v in rows[b]:
        acc[c] = (acc.get(c, 0) + k * v) % modulus
    rows.append(sorted((c, v) for c, v in acc.items() if v))
    return rows


def _dense(rows, ncols, modulus):
    out = np.zeros((len(rows), ncols), dtype=np.int64 if modulus == 2 else object)
    for r, row in enumerate(rows):
        for c, v in row:
            out[r, c] = v % modulus
    return out


def test_spmv_identity():
    V = VectorBlock.random(20, 64, 2, seed=1)
    assert (spmv_block(_identity(20, 2), V).columns() == V.columns()).all()


def test_spmv_small_field():
    M = SparseMatrix([[(0, 1), (1, 2)], [(1, 3)], [(0, 5), (2, 1)]], 3, 7)
    e1 = VectorBlock.from_columns([[1], [0], [0]], 7)
    assert spmv_block(M, e1).columns()[:, 0].tolist() == [1, 0, 5]


def test_spmv_is_linear_over_gf2():
    M = SparseMatrix(_random_rows(50, 50, 2, 5, seed=2), 50, 2)
    V1 = VectorBlock.random(50, 64, 2, seed=3)
    V2 = VectorBlock.random(50, 64, 2, seed=4)
    lhs = spmv_block(M, V1 + V2)
    rhs = spmv_block(M, V1) + spmv_block(M, V2)
    assert (lhs.data == rhs.data).all()


def test_spmv_field_mismatch():
    with pytest.raises(DomainError):
        spmv_block(_identity(4, 7), VectorBlock.random(4, 2, 5))


def test_bw_params():
    assert BwParams.default(2) == BwParams(128, 64, modulus=2)
    assert BwParams.default(ELL60).n == 4
    with pytest.raises(ConfigError):
        BwParams(4, 8, modulus=ELL60)
    with pytest.raises(ConfigError):
        BwParams(96, 64, modulus=2)
    params = BwParams(8, 4, checkpoint_interval=100, K=4, modulus=ELL60)
    assert params.interval(200) == 200 // 16


def test_krylov_identity():
    dim = 10
    x = unit_rows(dim, 4, seed=0)
    y = VectorBlock.random(dim, 2, 7, seed=0)
    run = krylov(_identity(dim, 7), x, y, 12)
    assert len(run.sequence) == 12
    for a in run.sequence:
        assert (a == run.sequence[0]).all()


def test_krylov_nilpotent():
    dim = 8
    shift = SparseMatrix([[(i + 1, 1)] for i in range(dim - 1)] + [[]], dim, 7)
    run = krylov(shift, unit_rows(dim, 4), VectorBlock.random(dim, 2, 7, seed=5), 12)
    for a in run.sequence[dim:]:
        assert not np.any(a)


def test_krylov_restart_from_checkpoint(tmp_path):
    dim = 100
    M = SparseMatrix(_random_rows(dim, dim, 2, 6, seed=6), dim, 2)
    x = unit_rows(dim, 64, seed=1)
    y = VectorBlock.random(dim, 64, 2, seed=1)
    L = krylov_length(dim, 64, 64)
    full = krylov(M, x, y, L, checkpoint_interval=10)
    assert [cp.index for cp in full.checkpoints] == list(range(0, L, 10))

    for cp in full.checkpoints[1:]:
        path = tmp_path / f"cp.{cp.index}"
        write_checkpoint(cp, path, M.digest())
        resumed = krylov(M, x, y, L, checkpoint_interval=10, start=read_checkpoint(path))
        assert resumed.start == cp.index
        assert all(
            (a == b).all() for a, b in zip(resumed.sequence, full.sequence[cp.index :])
        )


def test_krylov_cost():
    dim, m, n = 300, 8, 4
    M = SparseMatrix(_random_rows(dim, dim, 1009, 5, seed=7), dim, 1009)
    L = krylov_length(dim, m, n)
    run = krylov(M, unit_rows(dim, m), VectorBlock.random(dim, n, 1009), L)
    assert L == math.ceil(dim / m) + math.ceil(dim / n) + 64
    assert run.spmv == L - 1
    assert cost_summary(dim, BwParams(m, n, modulus=1009))["krylov"] == run.spmv


def test_lingen_scalar_recurrence():
    # s_{i+2} = s_{i+1} + s_i over GF(2)
    s = [1, 0]
    while len(s) < 20:
        s.append((s[-1] + s[-2]) % 2)
    seq = [np.array([[v]]) for v in s]
    gen = lingen(seq, 1, 1, 2)
    assert gen.degrees == [2]
    assert gen.check(seq)


def test_lingen_zero_sequence():
    seq = [np.zeros((4, 2), dtype=np.int64) for _ in range(10)]
    gen = lingen(seq, 4, 2, 2)
    assert gen.degrees == [0, 0]


def test_lingen_degree_bound():
    dim, m, n, p = 200, 8, 4, 1009
    for trial in range(3):
        M = SparseMatrix(_random_rows(dim, dim, p, 10, seed=100 + trial), dim, p)
        x = unit_rows(dim, m, seed=trial)
        y = VectorBlock.random(dim, n, p, seed=trial)
        run = krylov(M, x, y, krylov_length(dim, m, n))
        gen = lingen(run.sequence, m, n, p)
        assert gen.check(run.sequence)
        assert math.ceil(dim / n) - 2 <= gen.degree <= math.ceil(dim / n) + m // n + 2


def test_mksol_identity_has_no_kernel():
    with pytest.raises(KernelError):
        block_wiedemann(_identity(10, 7), BwParams(4, 2, modulus=7), attempts=1)


def test_left_nullspace_gf2():
    dim = 50
    rows = _singular_rows(dim, 2, seed=8)
    kernel = nullspace(rows, dim, 2, side="left")
    B = _dense(rows, dim, 2)
    expected = dense_kernel(B.T, 2)
    assert len(kernel) == len(expected) >= 1
    for w in kernel:
        assert not np.any(np.asarray(w, dtype=np.int64) @ B % 2)


@pytest.mark.parametrize("seed", range(5))
def test_right_nullspace_large_field(seed):
    dim = 100 + 50 * seed
    rows = _singular_rows(dim, ELL60, seed=seed)
    B = _dense(rows, dim, ELL60)
    # right kernel of B^T is the left kernel of B
    BT = SparseMatrix(rows, dim, ELL60).transpose()
    kernel = nullspace(BT.rows(), dim, ELL60, side="right")
    expected = dim - flint.nmod_mat(B.T.tolist(), ELL60).rank()
    assert 1 <= len(kernel) <= expected
    if expected <= 4:
        assert len(kernel) == expected
    for v in kernel:
        assert not np.any(B.T.dot(np.asarray(v, dtype=object)) % ELL60)


def test_mksol_segments_match_serial():
    dim = 120
    M = SparseMatrix(_singular_rows(dim, 1009, seed=9), dim, 1009).transpose()
    params = BwParams(8, 4, checkpoint_interval=5, K=4, modulus=1009)
    x = unit_rows(dim, params.m, seed=2)
    y = VectorBlock.random(dim, params.n, 1009, seed=2)
    run = krylov(M, x, y, params.length(dim), params.interval(dim))
    gen = lingen(run.sequence, params.m, params.n, 1009)
    serial = mksol(M, y, gen, run.checkpoints, segments=1)
    split = mksol(M, y, gen, run.checkpoints, segments=4)
    assert (serial.w.data == split.w.data).all()
    for v in serial.kernel:
        assert not np.any(M.to_dense().dot(np.asarray(v, dtype=object)) % 1009)


def _checkpointed_run(seed=0):
    """Krylov run over an invertible (upper unitriangular) GF(2) matrix.

    No nonzero vector dies under M^g, so every bit flip is visible.
    """
    dim = 100
    rng = random.Random(seed)
    rows = [
        sorted([(i, 1)] + [(c, 1) for c in rng.sample(range(i + 1, dim), min(5, dim - i - 1))])
        for i in range(dim)
    ]
    M = SparseMatrix(rows, dim, 2)
    run = krylov(M, unit_rows(dim, 64), VectorBlock.random(dim, 64, 2, seed=seed),
                 krylov_length(dim, 64, 64), checkpoint_interval=8)
    return M, run.checkpoints


def test_verify_offline_clean():
    M, cps = _checkpointed_run()
    assert verify_offline(M, cps) is None


def _flip_bit(cp, rng):
    bad = cp.block.copy()
    r, w = rng.randrange(bad.dim), rng.randrange(bad.data.shape[1])
    bad.data[r, w] ^= np.uint64(1) << np.uint64(rng.randrange(64))
    return bad


def test_verify_offline_detects_bit_flips():
    M, cps = _checkpointed_run(seed=1)
    rng = random.Random(0)
    for trial in range(100):
        k = rng.randrange(len(cps))
        if trial % 10 == 0:
            k = (0, len(cps) - 1)[trial % 20 == 0]
        bad = _flip_bit(cps[k], rng)
        # stale digest: caught as storage corruption
        tampered = cps[:k] + [Checkpoint(cps[k].index, bad, cps[k].digest)] + cps[k + 1 :]
        assert verify_offline(M, tampered, seed=trial) == cps[k].index
        # consistent digest: caught by the block products
        tampered[k] = Checkpoint(cps[k].index, bad)
        assert verify_offline(M, tampered, seed=trial) == cps[k].index


@pytest.mark.parametrize("k", [0, 1, 2])
def test_verify_offline_blames_the_flipped_checkpoint(k):
    M, cps = _checkpointed_run(seed=2)
    tampered = list(cps)
    tampered[k] = Checkpoint(cps[k].index, _flip_bit(cps[k], random.Random(k)))
    assert verify_offline(M, tampered, seed=5) == cps[k].index


def test_verify_offline_costs_one_checkpoint_gap(monkeypatch):
    M, cps = _checkpointed_run()
    calls = []

    def counting(A, V):
        calls.append(V.width)
        return spmv_block(A, V)

    monkeypatch.setattr(wiedemann, "spmv_block", counting)
    assert verify_offline(M, cps) is None
    assert len(cps) > 4
    assert len(calls) == 8
    assert max(calls) < 64


def test_verify_offline_needs_two_checkpoints():
    M, cps = _checkpointed_run()
    with pytest.raises(DomainError):
        verify_offline(M, cps[:1])
