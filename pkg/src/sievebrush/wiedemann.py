"""
    Block Wiedemann over GF(2) and GF(ell).

    krylov produces the sequence a_i = x^T M^i y (x a block of unit rows,
    y a random block) with checkpoints of M^i y; lingen finds a matrix
    linear generator of the sequence with a quadratic matrix
    Berlekamp-Massey; mksol assembles M-chains from the generator and
    keeps the last nonzero vector of each chain, which lies in the kernel.

    GF(2) vector blocks are packed 64 columns per uint64 word; GF(ell)
    blocks are numpy object arrays of python ints.
"""

from dataclasses import dataclass, field
import hashlib
import json
import logging
import math
import random

import numpy as np

from sievebrush.arith import invert
from sievebrush.errors import ConfigError, DomainError, SievebrushError


class LingenError(SievebrushError):
    pass


class KernelError(SievebrushError):
    pass


def _dtype(modulus):
    return np.int64 if modulus == 2 else object


def _eye(size, modulus):
    out = np.zeros((size, size), dtype=_dtype(modulus))
    out[np.arange(size), np.arange(size)] = 1
    return out


def _matmul(A, B, modulus):
    if modulus == 2:
        return (np.matmul(A.astype(np.float64), B.astype(np.float64)) % 2).astype(np.int64)
    return np.matmul(A, B) % modulus


def _nonzero(arr):
    return bool(np.any(arr != 0))


#####################
#  Matrices         #
#####################


class SparseMatrix:
    """Square sparse matrix over GF(modulus), rows as sorted (column, coef).

    `dense` is an optional nrows x k block of heavy columns appended after
    the sparse ones.  The matrix is padded with zero rows or columns to
    dim = max(rows, columns).
    """

    def __init__(self, rows, ncols, modulus=2, dense=None, dim=None):
        if modulus < 2:
            raise DomainError(f"field modulus must be >= 2, got {modulus}")
        self.modulus = modulus
        self.nrows = len(rows)
        extra = 0 if dense is None else len(dense[0]) if len(dense) else 0
        self.ncols = ncols + extra
        self.dim = dim or max(self.nrows, self.ncols, 1)
        if self.dim < max(self.nrows, self.ncols):
            raise DomainError("dim smaller than the matrix")

        indptr = [0]
        indices, data = [], []
        for r, row in enumerate(rows):
            acc = {}
            for col, coef in row:
                if not 0 <= col < ncols:
                    raise DomainError(f"column {col} out of range in row {r}")
                acc[col] = acc.get(col, 0) + coef
            if dense is not None:
                for k, coef in enumerate(dense[r]):
                    acc[ncols + k] = acc.get(ncols + k, 0) + int(coef)
            for col in sorted(acc):
                coef = acc[col] % modulus
                if coef:
                    indices.append(col)
                    data.append(coef)
            indptr.append(len(indices))
        indptr.extend([len(indices)] * (self.dim - self.nrows))
        self.indptr = np.array(indptr, dtype=np.int64)
        self.indices = np.array(indices, dtype=np.int64)
        self.data = np.array(data, dtype=_dtype(modulus))
        lengths = np.diff(self.indptr)
        self.nonempty = lengths > 0
        self.starts = self.indptr[:-1][self.nonempty]

    @classmethod
    def from_dense(cls, array, modulus=2):
        rows = [[(c, int(v)) for c, v in enumerate(row) if int(v) % modulus] for row in array]
        return cls(rows, len(array[0]) if len(array) else 0, modulus)

    @property
    def nnz(self):
        return len(self.indices)

    def row(self, r):
        lo, hi = self.indptr[r], self.indptr[r + 1]
        return list(zip(self.indices[lo:hi].tolist(), self.data[lo:hi].tolist()))

    def rows(self):
        return [self.row(r) for r in range(self.dim)]

    def transpose(self):
        cols = [[] for _ in range(self.dim)]
        for r in range(self.dim):
            for c, v in self.row(r):
                cols[c].append((r, v))
        return SparseMatrix(cols, self.dim, self.modulus, dim=self.dim)

    def to_dense(self):
        out = np.zeros((self.dim, self.dim), dtype=_dtype(self.modulus))
        for r in range(self.dim):
            for c, v in self.row(r):
                out[r, c] = v
        return out

    def digest(self):
        h = hashlib.blake2b(digest_size=16)
        h.update(str((self.dim, self.modulus)).encode())
        h.update(self.indptr.tobytes())
        h.update(self.indices.tobytes())
        h.update(",".join(str(v) for v in self.data.tolist()).encode())
        return h.hexdigest()


#####################
#  Vector blocks    #
#####################


def _pack(bits):
    width = bits.shape[1]
    words = -(-width // 64)
    padded = np.zeros((bits.shape[0], words * 64), dtype=np.uint8)
    padded[:, :width] = bits & 1
    packed = np.packbits(padded, axis=1, bitorder="little")
    return np.ascontiguousarray(packed).view("<u8").reshape(bits.shape[0], words)


def _unpack(words, width):
    raw = np.ascontiguousarray(words.astype("<u8")).view(np.uint8)
    bits = np.unpackbits(raw.reshape(words.shape[0], -1), axis=1, bitorder="little")
    return bits[:, :width].astype(np.int64)


@dataclass
class VectorBlock:
    """`width` vectors of length dim; GF(2) blocks packed 64 per word."""

    data: np.ndarray
    width: int
    modulus: int

    @property
    def dim(self):
        return self.data.shape[0]

    @classmethod
    def zeros(cls, dim, width, modulus):
        if modulus == 2:
            return cls(np.zeros((dim, -(-width // 64)), dtype=np.uint64), width, 2)
        return cls(np.zeros((dim, width), dtype=object), width, modulus)

    @classmethod
    def from_columns(cls, cols, modulus):
        cols = np.asarray(cols)
        if modulus == 2:
            return cls(_pack(cols.astype(np.int64) % 2), cols.shape[1], 2)
        return cls(np.asarray(cols, dtype=object) % modulus, cols.shape[1], modulus)

    @classmethod
    def random(cls, dim, width, modulus, seed=0):
        if modulus == 2:
            rng = np.random.default_rng(seed)
            words = rng.integers(0, 1 << 63, size=(dim, -(-width // 64)), dtype=np.int64)
            words = words.astype(np.uint64) * np.uint64(2) + rng.integers(
                0, 2, size=words.shape, dtype=np.int64
            ).astype(np.uint64)
            block = cls(words, width, 2)
            if width % 64:
                block = cls.from_columns(block.columns(), 2)
            return block
        rng = random.Random(seed)
        data = np.array(
            [[rng.randrange(modulus) for _ in range(width)] for _ in range(dim)], dtype=object
        ).reshape(dim, width)
        return cls(data, width, modulus)

    def columns(self):
        if self.modulus == 2:
            return _unpack(self.data, self.width)
        return self.data

    def rows(self, idx):
        return self.columns()[np.asarray(idx, dtype=np.int64)]

    def times(self, F):
        """self . F for a width x w matrix F."""
        F = np.asarray(F, dtype=_dtype(self.modulus))
        return VectorBlock.from_columns(_matmul(self.columns(), F, self.modulus), self.modulus)

    def __add__(self, other):
        if self.modulus == 2:
            return VectorBlock(self.data ^ other.data, self.width, 2)
        return VectorBlock((self.data + other.data) % self.modulus, self.width, self.modulus)

    def copy(self):
        return VectorBlock(self.data.copy(), self.width, self.modulus)

    def is_zero(self):
        return not _nonzero(self.data)

    def tobytes(self):
        if self.modulus == 2:
            return self.data.astype("<u8").tobytes()
        size = (self.modulus.bit_length() + 7) // 8
        return b"".join(int(v).to_bytes(size, "little") for v in self.data.ravel())

    @classmethod
    def frombytes(cls, raw, dim, width, modulus):
        if modulus == 2:
            words = np.frombuffer(raw, dtype="<u8").astype(np.uint64)
            return cls(words.reshape(dim, -(-width // 64)).copy(), width, 2)
        size = (modulus.bit_length() + 7) // 8
        vals = [int.from_bytes(raw[i : i + size], "little") for i in range(0, len(raw), size)]
        return cls(np.array(vals, dtype=object).reshape(dim, width), width, modulus)

    def digest(self):
        return hashlib.blake2b(self.tobytes(), digest_size=16).hexdigest()


def spmv_block(M, V):
    """M . V, every column of V transformed independently."""
    if V.modulus != M.modulus:
        raise DomainError(f"field mismatch: matrix mod {M.modulus}, block mod {V.modulus}")
    if V.dim != M.dim:
        raise DomainError(f"dimension mismatch: {M.dim} vs {V.dim}")
    out = VectorBlock.zeros(M.dim, V.width, M.modulus)
    if not M.nnz:
        return out
    gathered = V.data[M.indices]
    if M.modulus == 2:
        sums = np.bitwise_xor.reduceat(gathered, M.starts, axis=0)
    else:
        sums = np.add.reduceat(gathered * M.data[:, None], M.starts, axis=0) % M.modulus
    out.data[M.nonempty] = sums
    return out


#####################
#  Parameters       #
#####################


def krylov_length(dim, m, n, margin=64):
    return -(-dim // m) + -(-dim // n) + margin


@dataclass(frozen=True)
class BwParams:
    """Blocking factors m >= n, checkpoint interval and Mksol split K."""

    m: int
    n: int
    checkpoint_interval: int = 0
    K: int = 1
    margin: int = 64
    modulus: int = 2

    def __post_init__(self):
        if not self.m >= self.n >= 1:
            raise ConfigError(f"blocking factors need m >= n >= 1, got m={self.m}, n={self.n}")
        if self.modulus == 2 and (self.m % 64 or self.n % 64):
            raise ConfigError("GF(2) blocking factors must be multiples of 64")
        if self.K < 1:
            raise ConfigError("K must be positive")

    @classmethod
    def default(cls, modulus, rows=0, m=0, n=0, checkpoint_interval=0, margin=64, segments=1):
        n = n or (64 if modulus == 2 else 4)
        m = m or 2 * n
        return cls(m, n, checkpoint_interval, segments, margin, modulus)

    def length(self, dim):
        return krylov_length(dim, self.m, self.n, self.margin)

    def interval(self, dim):
        cap = max(1, dim // (self.n * self.K))
        return min(self.checkpoint_interval or cap, cap)


#####################
#  Krylov           #
#####################


@dataclass
class Checkpoint:
    index: int
    block: VectorBlock
    digest: str = ""

    def __post_init__(self):
        if not self.digest:
            self.digest = self.block.digest()


def write_checkpoint(cp, path, matrix_digest=""):
    header = {
        "index": cp.index,
        "dim": cp.block.dim,
        "width": cp.block.width,
        "modulus": cp.block.modulus,
        "matrix": matrix_digest,
        "digest": cp.digest,
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header).encode() + b"\n")
        f.write(cp.block.tobytes())


def read_checkpoint(path):
    with open(path, "rb") as f:
        header = json.loads(f.readline())
        raw = f.read()
    block = VectorBlock.frombytes(raw, header["dim"], header["width"], header["modulus"])
    return Checkpoint(header["index"], block, header["digest"])


@dataclass
class KrylovRun:
    sequence: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)
    start: int = 0
    spmv: int = 0


def unit_rows(dim, m, seed=0):
    """The rows picked by the unit-coordinate block x."""
    rng = np.random.default_rng(seed)
    reps = -(-m // dim)
    rows = np.concatenate([rng.permutation(dim) for _ in range(reps)])
    return rows[:m]


def krylov(M, x, y, length, checkpoint_interval=0, start=None):
    """Sequence a_i = x^T M^i y for i < length, with checkpoints.

    x is a list of row indices.  Passing a Checkpoint as `start` resumes
    from it: terms before start.index are not recomputed.
    """
    interval = checkpoint_interval or length
    run = KrylovRun()
    if start is not None:
        V, i0 = start.block.copy(), start.index
    else:
        V, i0 = y.copy(), 0
    run.start = i0
    for i in range(i0, length):
        if i % interval == 0 or i == i0:
            run.checkpoints.append(Checkpoint(i, V.copy()))
        run.sequence.append(V.rows(x))
        if i + 1 < length:
            V = spmv_block(M, V)
            run.spmv += 1
    logging.debug(f"krylov: {length - i0} terms, {run.spmv} products, "
                  f"{len(run.checkpoints)} checkpoints")
    return run


#####################
#  Lingen           #
#####################


@dataclass
class LinearGenerator:
    """Columns of a right generator of a matrix sequence.

    coeffs[k] holds the X^k coefficients (n x t) of the polynomial
    columns f; column c has nominal degree degrees[c], and the relation
    sum_j a_{i+j} F_j = 0 holds with F_j = f_{degrees[c] - j}.
    """

    coeffs: list
    degrees: list
    modulus: int
    length: int = 0

    @property
    def degree(self):
        return max(self.degrees)

    def column(self, c):
        d = self.degrees[c]
        return [
            self.coeffs[d - j][:, c] if d - j < len(self.coeffs) else
            np.zeros(self.coeffs[0].shape[0], dtype=_dtype(self.modulus))
            for j in range(d + 1)
        ]

    def check(self, sequence):
        """Whether every column satisfies its relation over the valid window."""
        for c, d in enumerate(self.degrees):
            F = self.column(c)
            for i in range(len(sequence) - d):
                acc = sum(
                    (np.asarray(sequence[i + j], dtype=_dtype(self.modulus)).dot(F[j])
                     for j in range(d + 1))
                )
                if _nonzero(np.asarray(acc) % self.modulus):
                    return False
        return True


def _eliminate(R, deg, modulus):
    """Column transform zeroing R outside one pivot column per row.

    Pivots are taken by increasing nominal degree and only eliminate
    columns of larger or equal degree.
    """
    m, b = R.shape
    R = R.copy()
    T = _eye(b, modulus)
    used = np.zeros(b, dtype=bool)
    order = sorted(range(b), key=lambda j: (deg[j], j))
    rank = {j: k for k, j in enumerate(order)}
    pivots = []
    for row in range(m):
        live = np.flatnonzero((R[row] % modulus != 0) & ~used)
        if not len(live):
            continue
        piv = min(live, key=lambda j: rank[j])
        used[piv] = True
        pivots.append(piv)
        targets = live[live != piv]
        if len(targets):
            scale = (R[row, targets] * invert(int(R[row, piv]), modulus)) % modulus
            R[:, targets] = (R[:, targets] - R[:, [piv]] * scale) % modulus
            T[:, targets] = (T[:, targets] - T[:, [piv]] * scale) % modulus
    return T, pivots


def lingen(sequence, m, n, modulus):
    """Generator of the m x n matrix sequence by matrix Berlekamp-Massey.

    Works on [A(X) | -I] P(X) = 0 mod X^k, k = 1..len(sequence), with P an
    (m+n) x (m+n) polynomial matrix whose columns carry nominal degrees;
    the n lowest-degree columns with a nonzero top part form the
    generator.
    """
    L = len(sequence)
    if not L:
        raise LingenError("empty sequence")
    b = m + n
    dt = _dtype(modulus)
    seq = [np.asarray(a, dtype=dt).reshape(m, n) % modulus for a in sequence]
    P = _eye(b, modulus)[None, :, :]
    deg = [0] * n + [1] * m
    for k in range(L):
        T = min(k, P.shape[0] - 1)
        stacked = np.concatenate([seq[k - t] for t in range(T + 1)], axis=1)
        top = P[: T + 1, :n, :].reshape((T + 1) * n, b)
        R = _matmul(stacked, top, modulus)
        if k < P.shape[0]:
            R = (R - P[k, n:, :]) % modulus
        if not _nonzero(R):
            continue
        Top, pivots = _eliminate(R, deg, modulus)
        P = _matmul(P, Top, modulus)
        mask = np.zeros(b, dtype=bool)
        mask[pivots] = True
        shifted = np.zeros((P.shape[0] + 1, b, b), dtype=dt)
        shifted[:-1, :, ~mask] = P[:, :, ~mask]
        shifted[1:, :, mask] = P[:, :, mask]
        while shifted.shape[0] > 1 and not _nonzero(shifted[-1]):
            shifted = shifted[:-1]
        P = shifted
        for j in pivots:
            deg[j] += 1

    order = sorted(range(b), key=lambda c: (deg[c], c))
    chosen = [c for c in order if _nonzero(P[:, :n, c]) and deg[c] < L][:n]
    if not chosen:
        raise LingenError(
            f"no generator of degree < {L}: sequence too short or degenerate x, y"
        )
    D = max(deg[c] for c in chosen)
    coeffs = []
    for k in range(D + 1):
        if k < P.shape[0]:
            coeffs.append(P[k, :n, :][:, chosen].copy())
        else:
            coeffs.append(np.zeros((n, len(chosen)), dtype=dt))
    logging.debug(f"lingen: degrees {[deg[c] for c in chosen]} from {L} terms")
    return LinearGenerator(coeffs, [deg[c] for c in chosen], modulus, L)


#####################
#  Mksol            #
#####################


@dataclass
class Solution:
    w: VectorBlock
    kernel: list
    spmv: int = 0


def _horner_coeffs(gen, n):
    """Aligned n x n coefficient list so column c sums M^(df-k) y f_k."""
    t = len(gen.degrees)
    actual = []
    for c in range(t):
        ks = [k for k in range(len(gen.coeffs)) if _nonzero(gen.coeffs[k][:, c])]
        actual.append(max(ks) if ks else 0)
    top = max(actual)
    dt = _dtype(gen.modulus)
    F = [np.zeros((n, n), dtype=dt) for _ in range(top + 1)]
    for c in range(t):
        shift = top - actual[c]
        for k in range(actual[c] + 1):
            F[k + shift][:, c] = gen.coeffs[k][:, c]
    return F, actual


def _segment_starts(checkpoints, top, segments):
    have = sorted(cp.index for cp in checkpoints if cp.index <= top)
    if segments <= 1 or len(have) <= 1:
        return [0]
    step = max(1, (top + 1) // segments)
    starts = {0}
    for s in range(step, top + 1, step):
        starts.add(max(i for i in have if i <= s))
    return sorted(starts)


def _independent(vectors, modulus):
    """A maximal independent subset of vectors, in order."""
    kept, basis = [], []
    for v in vectors:
        w = np.asarray(v, dtype=_dtype(modulus)) % modulus
        for piv, b in basis:
            if w[piv] % modulus:
                w = (w - b * (w[piv] * invert(int(b[piv]), modulus))) % modulus
        nz = np.flatnonzero(w != 0)
        if len(nz):
            basis.append((int(nz[0]), w))
            kept.append(np.asarray(v, dtype=_dtype(modulus)) % modulus)
    return kept


def mksol(M, y, gen, checkpoints=None, segments=1):
    """Solution block w and the kernel vectors extracted from it.

    w column c is sum_k M^(df_c - k) y f_k.  With segments > 1, the sum is
    split at checkpoint boundaries and every segment is evaluated by
    Horner from its own checkpoint.
    """
    n = y.width
    F, actual = _horner_coeffs(gen, n)
    top = len(F) - 1
    spmv = 0
    blocks = {cp.index: cp.block for cp in (checkpoints or [])}
    blocks.setdefault(0, y)
    starts = _segment_starts(list(Checkpoint(i, b, "-") for i, b in blocks.items()),
                             top, segments)
    w = VectorBlock.zeros(y.dim, n, M.modulus)
    for a, s in enumerate(starts):
        e = starts[a + 1] if a + 1 < len(starts) else top + 1
        C = blocks[s]
        part = C.times(F[top - (e - 1)])
        for t in range(e - 2 - s, -1, -1):
            part = spmv_block(M, part) + C.times(F[top - s - t])
            spmv += 1
        w = w + part

    limit = max(d - a for d, a in zip(gen.degrees, actual)) + 4
    V = w
    live = set(range(len(gen.degrees)))
    found = []
    for _ in range(limit + 1):
        MV = spmv_block(M, V)
        spmv += 1
        vcols, mvcols = V.columns(), MV.columns()
        for c in sorted(live):
            if not _nonzero(vcols[:, c]):
                live.discard(c)
            elif not _nonzero(mvcols[:, c]):
                found.append(vcols[:, c].copy())
                live.discard(c)
        if not live:
            break
        V = MV
    kernel = _independent(found, M.modulus)
    if not kernel:
        raise KernelError("all solution columns are trivial; retry with a fresh y")
    logging.debug(f"mksol: {len(kernel)} kernel vectors, {spmv} products")
    return Solution(w, kernel, spmv)


#####################
#  Verification     #
#####################


def _blame(failed):
    """Position of the bad checkpoint given which consecutive pairs failed.

    A corrupted c_k breaks the pairs on both sides of it, so the first
    failing pair names its right end unless it is pair 0 and pair 1 holds.
    """
    k = failed.index(True)
    if k == 0 and len(failed) > 1 and not failed[1]:
        return 0
    return k + 1


def verify_offline(M, checkpoints, seed=0, width=None):
    """None when the checkpoints are consistent, else the index of the bad one.

    Stored digests catch storage corruption.  Then one random block
    u is pushed through M^T once per distinct checkpoint gap g (at most
    the checkpoint interval, far below the Krylov length), and every
    consecutive pair c_i, c_j is checked as ((M^T)^g u) . c_i == u . c_j.
    """
    if len(checkpoints) < 2:
        raise DomainError("need at least two checkpoints")
    cps = sorted(checkpoints, key=lambda cp: cp.index)
    for cp in cps:
        if cp.block.digest() != cp.digest:
            logging.error(f"checkpoint {cp.index}: digest mismatch")
            return cp.index
    modulus = M.modulus
    width = width or (32 if modulus == 2 else 1)
    Mt = M.transpose()
    u = VectorBlock.random(M.dim, width, modulus, seed=seed)
    gaps = sorted({cj.index - ci.index for ci, cj in zip(cps, cps[1:])})
    pushed, z, done = {}, u, 0
    for g in gaps:
        for _ in range(g - done):
            z = spmv_block(Mt, z)
        pushed[g], done = z.columns().T, g
    ut = u.columns().T
    failed = []
    for ci, cj in zip(cps, cps[1:]):
        lhs = _matmul(pushed[cj.index - ci.index], ci.block.columns(), modulus)
        rhs = _matmul(ut, cj.block.columns(), modulus)
        failed.append(_nonzero((lhs - rhs) % modulus))
    logging.debug(f"verify_offline: {done} products for {len(failed)} checkpoint pairs")
    if not any(failed):
        return None
    bad = cps[_blame(failed)]
    if len(cps) == 2:
        logging.warning("two checkpoints only: blaming the later one")
    logging.error(f"checkpoint {bad.index}: inconsistent with its neighbours")
    return bad.index


#####################
#  Drivers          #
#####################


def block_wiedemann(M, params, seed=0, attempts=3):
    """Kernel vectors of the square matrix M (right kernel, M v = 0)."""
    if params.modulus != M.modulus:
        raise DomainError("BwParams and matrix disagree on the field")
    L = params.length(M.dim)
    for attempt in range(attempts):
        s = seed + 1000003 * attempt
        x = unit_rows(M.dim, params.m, s)
        y = VectorBlock.random(M.dim, params.n, M.modulus, s)
        run = krylov(M, x, y, L, params.interval(M.dim))
        try:
            gen = lingen(run.sequence, params.m, params.n, M.modulus)
            sol = mksol(M, y, gen, run.checkpoints, params.K)
        except (LingenError, KernelError) as exc:
            logging.warning(f"block Wiedemann attempt {attempt + 1} failed: {exc}")
            continue
        logging.info(
            f"block Wiedemann on {M.dim}x{M.dim} (m={params.m}, n={params.n}): "
            f"{run.spmv} Krylov products, generator degree {gen.degree}, "
            f"{len(sol.kernel)} kernel vectors"
        )
        return sol.kernel
    raise KernelError(f"no kernel vector after {attempts} attempts")


def nullspace(rows, ncols, modulus, side="right", params=None, seed=0, dense=None):
    """Kernel vectors of the nrows x ncols matrix given by rows.

    side="right" gives v with B v = 0 (length ncols + dense columns);
    side="left" gives w with w^T B = 0 (length nrows), through the
    transposed matrix.
    """
    B = SparseMatrix(rows, ncols, modulus, dense=dense)
    params = params or BwParams.default(modulus, B.nrows)
    if side == "left":
        M = SparseMatrix([r for r in B.rows()[: B.dim]], B.dim, modulus).transpose()
        keep = B.nrows
    elif side == "right":
        M = B
        keep = B.ncols
    else:
        raise DomainError(f"side must be left or right, got {side!r}")
    vectors = [v[:keep] for v in block_wiedemann(M, params, seed)]
    return _independent([v for v in vectors if _nonzero(v)], modulus)


def dense_kernel(A, modulus):
    """Basis of the right kernel of a dense matrix, by Gaussian elimination."""
    A = np.array(A, dtype=_dtype(modulus)) % modulus
    rows, cols = A.shape
    pivots = []
    r = 0
    for c in range(cols):
        nz = [i for i in range(r, rows) if A[i, c] % modulus]
        if not nz:
            continue
        A[[r, nz[0]]] = A[[nz[0], r]]
        A[r] = (A[r] * invert(int(A[r, c]), modulus)) % modulus
        others = np.flatnonzero(A[:, c] % modulus != 0)
        for i in others:
            if i != r:
                A[i] = (A[i] - A[r] * A[i, c]) % modulus
        pivots.append(c)
        r += 1
        if r == rows:
            break
    free = [c for c in range(cols) if c not in set(pivots)]
    basis = []
    for f in free:
        v = np.zeros(cols, dtype=_dtype(modulus))
        v[f] = 1
        for i, c in enumerate(pivots):
            v[c] = (-A[i, f]) % modulus
        basis.append(v)
    return basis


def matrix_rank(A, modulus):
    A = np.array(A)
    return A.shape[1] - len(dense_kernel(A, modulus))


def cost_summary(dim, params):
    """Product counts of the three phases, per the block Wiedemann cost model."""
    krylov_products = krylov_length(dim, params.m, params.n, params.margin) - 1
    mksol_products = math.ceil(dim / params.n)
    return {"krylov": krylov_products, "mksol": mksol_products,
            "lingen_steps": krylov_products + 1}
