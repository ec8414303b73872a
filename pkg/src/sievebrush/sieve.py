"""
    Lattice sieving over special-q.

    The sieve region of a special-q is [-2^(I-1), 2^(I-1)) x [0, J) in
    lattice coordinates (i, j), mapped to (a, b) = i*u + j*v through the
    reduced basis (u, v).  Factor base primes below bkthresh are sieved
    region by region; larger ones go through buckets, filled once per
    special-q and applied one 64 KiB region at a time.

    Logarithms are kept in units of 1/LOG_SCALE bit.
"""

from dataclasses import dataclass, field
import logging
import math

import flint
import numpy as np
import sympy

from sievebrush.arith import (
    EcmChain,
    factor_small,
    homogeneous_norm,
    is_prime,
    lift_roots,
    poly_roots_mod_p,
    primes_between,
)
from sievebrush.batch import batch_smooth_part, build_prime_product
from sievebrush.errors import ConfigError, DomainError, SievebrushError
from sievebrush.filters import YieldFilter
from sievebrush.relations import (
    Relation,
    RelationFormatError,
    online_duplicate_check,
)

LOG_SCALE = 4
REGION_SIZE = 1 << 16
BYTES_PER_UPDATE = 4
BYTES_PER_CELL = 4
SLICE_SIZE = 4096


class MemoryCapError(SievebrushError):
    pass


#####################
#  Parameters       #
#####################


@dataclass(frozen=True)
class SieveParams:
    """Sieving parameters, named as in the campaign configuration.

    I is the log2 of the sieve width; J defaults to half the width.
    bkthresh defaults to 2^I and bkthresh1 to the larger lim.
    """

    I: int = 10
    J: int = 0
    lim0: int = 1 << 14
    lim1: int = 1 << 14
    lpb0: int = 22
    lpb1: int = 22
    mfb0: int = 44
    mfb1: int = 44
    nlp0: int = 2
    nlp1: int = 2
    bkthresh: int = 0
    bkthresh1: int = 0
    batch_side: int = None
    batch_lim: int = 0
    slack0: float = 10.0
    slack1: float = 10.0
    mem_cap: int = 0

    def __post_init__(self):
        if not self.J:
            object.__setattr__(self, "J", 1 << (self.I - 1))
        if not self.bkthresh:
            object.__setattr__(self, "bkthresh", 1 << self.I)
        if self.bkthresh < 1 << self.I:
            raise ConfigError(f"bkthresh must be at least 2^I = {1 << self.I}")
        if not self.bkthresh1:
            object.__setattr__(self, "bkthresh1", max(self.lim0, self.lim1, self.bkthresh))
        for side in (0, 1):
            if self.lim(side) > 1 << self.lpb(side):
                raise ConfigError(f"lim{side} exceeds 2^lpb{side}")
        if not self.bkthresh <= self.bkthresh1:
            raise ConfigError("bkthresh must not exceed bkthresh1")
        if self.batch_side not in (None, 0, 1):
            raise ConfigError(f"batch_side must be 0 or 1, got {self.batch_side}")
        if self.batch_side is not None and not self.batch_lim:
            object.__setattr__(self, "batch_lim", self.lim(self.batch_side))

    @property
    def width(self):
        return 1 << self.I

    @property
    def area(self):
        return self.width * self.J

    def lim(self, side):
        return (self.lim0, self.lim1)[side]

    def lpb(self, side):
        return (self.lpb0, self.lpb1)[side]

    def mfb(self, side):
        return (self.mfb0, self.mfb1)[side]

    def nlp(self, side):
        return (self.nlp0, self.nlp1)[side]

    def slack(self, side):
        return (self.slack0, self.slack1)[side]

    def sieved_sides(self):
        return [s for s in (0, 1) if s != self.batch_side]


#####################
#  Factor bases     #
#####################


@dataclass(frozen=True)
class FactorBaseEntry:
    p: int
    r: int
    side: int
    logp: int
    prime: int = 0

    @property
    def projective(self):
        return self.r == self.p

    @property
    def is_power(self):
        return self.prime not in (0, self.p)


def scaled_log(p):
    return round(LOG_SCALE * math.log2(p))


class FactorBase:
    """The (p, r) pairs of one side, sorted by p, with numpy views."""

    def __init__(self, f, lim, side, entries):
        self.f = f
        self.lim = lim
        self.side = side
        self.entries = sorted(entries, key=lambda e: (e.p, e.r))
        self.p = np.array([e.p for e in self.entries], dtype=np.int64)
        self.r = np.array([e.r for e in self.entries], dtype=np.int64)
        self.logp = np.array([e.logp for e in self.entries], dtype=np.int32)
        self.prime = np.array([e.prime or e.p for e in self.entries], dtype=np.int64)
        self._prime_product = None

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def prime_entries(self):
        return [e for e in self.entries if not e.is_power]

    def prime_product(self):
        if self._prime_product is None:
            self._prime_product = build_prime_product(self.lim, self.f)
        return self._prime_product


def make_factor_base(f, lim, side):
    """Every (p, r) with p <= lim and f(r) = 0 mod p.

    Projective entries use r = p; affine roots of prime powers p^k <= lim
    are added, lifted by brute force.
    """
    entries = []
    for p in primes_between(2, lim + 1):
        roots, projective = poly_roots_mod_p(f, p)
        lp = scaled_log(p)
        entries.extend(FactorBaseEntry(p, r, side, lp, p) for r in roots)
        if projective:
            entries.append(FactorBaseEntry(p, p, side, lp, p))
        k, pk = 2, p * p
        while roots and pk <= lim:
            entries.extend(FactorBaseEntry(pk, r, side, lp, p) for r in lift_roots(f, p, k))
            k, pk = k + 1, pk * p
    fb = FactorBase(f, lim, side, entries)
    logging.debug(f"factor base side {side}: {len(fb)} entries up to {lim}")
    return fb


#####################
#  Survivors        #
#####################


@dataclass(frozen=True)
class Survivor:
    a: int
    b: int
    residues: tuple = (1, 1)

    def with_residue(self, side, value):
        res = list(self.residues)
        res[side] = value
        return Survivor(self.a, self.b, tuple(res))

    def __str__(self):
        return format_survivor(self)


def format_survivor(s):
    return f"{s.a},{s.b}:{s.residues[0]:x}:{s.residues[1]:x}"


def parse_survivor(line, lineno=None):
    parts = line.strip().split(":")
    if len(parts) != 3:
        raise RelationFormatError(f"bad survivor line {line!r}", lineno)
    try:
        a, b = (int(x) for x in parts[0].split(","))
        return Survivor(a, b, (int(parts[1], 16), int(parts[2], 16)))
    except ValueError:
        raise RelationFormatError(f"bad survivor line {line!r}", lineno)


#####################
#  Sieving          #
#####################


@dataclass
class _SideHits:
    """Per special-q hit data for one side of the factor base."""

    small_p: np.ndarray
    small_vu: np.ndarray
    small_logp: np.ndarray
    row_step: np.ndarray
    row_logp: np.ndarray
    full_logp: int
    large_p: np.ndarray
    large_vu: np.ndarray
    large_logp: np.ndarray


def _lattice_hits(fb, q, params):
    """Express each factor base entry in (i, j) coordinates of q.

    An entry (p, r) hits (i, j) iff i*U + j*V = 0 mod p with
    U = u0 - r*u1, V = v0 - r*v1 (U = u1, V = v1 when projective).
    """
    (u0, u1), (v0, v1) = q.basis
    p, r = fb.p, fb.r
    keep = np.ones(len(p), dtype=bool)
    if fb.side == q.side:
        keep &= ~np.isin(fb.prime, np.array(q.q_factors, dtype=np.int64))
    p, r, logp = p[keep], r[keep], fb.logp[keep]

    u0m, u1m = np.mod(u0, p), np.mod(u1, p)
    v0m, v1m = np.mod(v0, p), np.mod(v1, p)
    proj = r == p
    rr = np.where(proj, 0, r)
    U = np.where(proj, u1m, np.mod(u0m - np.mod(rr * u1m, p), p))
    V = np.where(proj, v1m, np.mod(v0m - np.mod(rr * v1m, p), p))

    vu = np.full(len(p), -1, dtype=np.int64)
    for k in np.nonzero(U)[0]:
        try:
            vu[k] = (int(V[k]) * pow(int(U[k]), -1, int(p[k]))) % int(p[k])
        except ValueError:
            pass  # prime power dividing U: not sieved
    affine = vu >= 0
    small = affine & (p < params.bkthresh)
    large = affine & (p >= params.bkthresh)

    rows = (U == 0) & (V != 0)
    steps = p[rows] // np.gcd(V[rows], p[rows])
    everywhere = (U == 0) & (V == 0)
    return _SideHits(
        p[small], vu[small], logp[small],
        steps, logp[rows],
        int(logp[everywhere].sum()),
        p[large], vu[large], logp[large],
    )


def _fill_buckets(hits, params, region_cells, nregions, stats):
    """Updates of the large primes, grouped per region as (offset, logp)."""
    W, J = params.width, params.J
    half = W // 2
    jj = np.arange(J, dtype=np.int64)[:, None]
    parts = [[] for _ in range(nregions)]
    for start in range(0, len(hits.large_p), SLICE_SIZE):
        p = hits.large_p[start : start + SLICE_SIZE][None, :]
        vu = hits.large_vu[start : start + SLICE_SIZE][None, :]
        lp = hits.large_logp[start : start + SLICE_SIZE]
        i0 = np.mod(-jj * vu, p)
        i = np.where(i0 < half, i0, i0 - p)
        rows, cols = np.nonzero(i >= -half)
        flat = rows * W + i[rows, cols] + half
        logs = lp[cols]
        level2 = p[0, cols] >= params.bkthresh1
        stats["updates"] = stats.get("updates", 0) + len(flat)
        stats["updates_level2"] = stats.get("updates_level2", 0) + int(level2.sum())
        region = flat // region_cells
        order = np.argsort(region, kind="stable")
        bounds = np.searchsorted(region[order], np.arange(nregions + 1))
        for k in range(nregions):
            sel = order[bounds[k] : bounds[k + 1]]
            if len(sel):
                parts[k].append((flat[sel] - k * region_cells, logs[sel]))
    return [
        (
            np.concatenate([o for o, _ in bucket]) if bucket else np.zeros(0, np.int64),
            np.concatenate([lg for _, lg in bucket]) if bucket else np.zeros(0, np.int32),
        )
        for bucket in parts
    ]


def _sieve_region(hits, bucket, params, j0, nrows):
    """Summed logp of every cell of rows [j0, j0 + nrows)."""
    W = params.width
    half = W // 2
    size = nrows * W
    idx_parts = [bucket[0]]
    w_parts = [bucket[1]]
    jj = np.arange(j0, j0 + nrows, dtype=np.int64)
    for p, vu, lp in zip(hits.small_p, hits.small_vu, hits.small_logp):
        starts = np.mod(np.mod(-jj * vu, p) + half, p)
        ncols = -(-W // p)
        cols = starts[:, None] + p * np.arange(ncols, dtype=np.int64)[None, :]
        flat = (np.arange(nrows, dtype=np.int64)[:, None] * W + cols)[cols < W]
        idx_parts.append(flat)
        w_parts.append(np.full(len(flat), lp, dtype=np.int32))
    S = np.bincount(
        np.concatenate(idx_parts),
        weights=np.concatenate(w_parts).astype(np.float64),
        minlength=size,
    ).reshape(nrows, W)
    for step, lp in zip(hits.row_step, hits.row_logp):
        hit_rows = (jj % step) == 0
        S[hit_rows] += lp
    return S + hits.full_logp


def _log2_norms(f, q_bits, i, j, basis):
    """log2 |F(a, b)| (minus q_bits) over the grid of (i, j), as floats."""
    (u0, u1), (v0, v1) = basis
    a = i[None, :] * float(u0) + j[:, None] * float(v0)
    b = i[None, :] * float(u1) + j[:, None] * float(v1)
    coeffs = [float(c) for c in f.coeffs]
    acc = np.full(a.shape, coeffs[-1])
    bpow = np.ones(a.shape)
    for c in reversed(coeffs[:-1]):
        bpow = bpow * b
        acc = acc * a + c * bpow
    with np.errstate(divide="ignore"):
        out = np.log2(np.abs(acc))
    out[~np.isfinite(out)] = 0.0
    return out - q_bits


def estimate_sieve_memory(params, fb=None):
    """Bytes needed for the bucket updates of one special-q, plus regions.

    Without a factor base, uses #A * (ln ln lim - ln ln 2^I); when
    bkthresh1 < lim the primes between 2^I and bkthresh1 are counted
    1/256 of the time.  With a factor base the sum of 1/p over its
    bucket-sieved primes replaces the log log approximation.
    """
    area = params.area
    lo = params.bkthresh
    lim = fb.lim if fb is not None else max(params.lim(s) for s in params.sieved_sides())
    mid = min(params.bkthresh1, lim)
    buffers = 2 * REGION_SIZE * BYTES_PER_CELL
    if lim <= lo:
        return buffers

    def loglog(x):
        return math.log(math.log(x))

    if fb is not None:
        ps = fb.p[(fb.prime == fb.p) & (fb.p >= lo)]
        inv = 1.0 / ps.astype(np.float64)
        updates = area * (inv[ps >= mid].sum() + inv[ps < mid].sum() / (256 if mid < lim else 1))
    elif mid < lim:
        updates = area * (loglog(lim) - loglog(mid)) + area / 256 * (loglog(mid) - loglog(lo))
    else:
        updates = area * (loglog(lim) - loglog(lo))
    return int(updates * BYTES_PER_UPDATE) + buffers


def sieve_special_q(q, params, fb0, fb1, stats=None):
    """Survivors of the sieve region of one special-q.

    A cell survives when, on every sieved side, log2|norm| minus the
    sieved logs is at most mfb + slack.  Survivor residues are the norms
    (divided by q on its side) with their lim-smooth part removed on
    sieved sides; the batch side keeps the whole norm.
    """
    stats = stats if stats is not None else {}
    fbs = (fb0, fb1)
    W, J = params.width, params.J
    half = W // 2
    if params.mem_cap:
        for s in params.sieved_sides():
            need = estimate_sieve_memory(params, fbs[s])
            if need > params.mem_cap:
                raise MemoryCapError(f"side {s} needs {need} bytes, cap {params.mem_cap}")

    rows_per_region = max(1, REGION_SIZE // W)
    region_cells = rows_per_region * W
    nregions = -(-J // rows_per_region)
    sides = params.sieved_sides()
    hits = {s: _lattice_hits(fbs[s], q, params) for s in sides}
    buckets = {s: _fill_buckets(hits[s], params, region_cells, nregions, stats) for s in sides}

    i_axis = np.arange(-half, half, dtype=np.int64)
    q_bits = {s: (math.log2(q.q) if s == q.side else 0.0) for s in (0, 1)}
    cand = []
    for k in range(nregions):
        j0 = k * rows_per_region
        nrows = min(rows_per_region, J - j0)
        j_axis = np.arange(j0, j0 + nrows, dtype=np.int64)
        mask = np.ones((nrows, W), dtype=bool)
        for s in sides:
            slack = params.slack(s)
            if slack == math.inf:
                continue
            bucket = buckets[s][k]
            bucket = (bucket[0][bucket[0] < nrows * W], bucket[1][bucket[0] < nrows * W])
            S = _sieve_region(hits[s], bucket, params, j0, nrows)
            lognorm = _log2_norms(fbs[s].f, q_bits[s], i_axis.astype(np.float64),
                                  j_axis.astype(np.float64), q.basis)
            mask &= LOG_SCALE * lognorm - S <= LOG_SCALE * (params.mfb(s) + slack)
        if j0 == 0:
            keep = mask[0, half + 1]
            mask[0, :] = False
            mask[0, half + 1] = keep
        rows, cols = np.nonzero(mask)
        ii, jj = cols - half, rows + j0
        ok = np.gcd(ii, jj) == 1
        cand.extend(zip(ii[ok].tolist(), jj[ok].tolist()))

    pairs = []
    for i, j in cand:
        a, b = q.ab(i, j)
        if b < 0:
            a, b = -a, -b
        if b == 0 or math.gcd(a, b) != 1:
            continue
        pairs.append((a, b))

    residues = []
    for s in (0, 1):
        f = fbs[s].f
        qq = q.q if s == q.side else 1
        norms = [abs(homogeneous_norm(f, a, b)) // qq for a, b in pairs]
        if s in sides:
            norms = [cof for _, cof in batch_smooth_part([max(n, 1) for n in norms],
                                                         fbs[s].prime_product())]
        residues.append(norms)

    survivors = [
        Survivor(a, b, (r0, r1))
        for (a, b), r0, r1 in zip(pairs, residues[0], residues[1])
    ]
    stats["survivors"] = stats.get("survivors", 0) + len(survivors)
    logging.debug(f"{q}: {len(survivors)} survivors")
    return survivors


#####################
#  Cofactorization  #
#####################


def _expand(factorization):
    return [int(p) for p, e in factorization for _ in range(int(e))]


def cofactorize(s, params, chains, pair):
    """The Relation of survivor s, or None if a side is not smooth enough.

    Each residue must have at most mfb bits, split completely with the
    side's chain into at most nlp primes, all below 2^lpb.
    """
    sides = []
    for side in (0, 1):
        res = s.residues[side]
        if res.bit_length() > params.mfb(side):
            return None
        norm = abs(homogeneous_norm(pair.poly(side), s.a, s.b))
        if norm == 0 or norm % res:
            return None
        smooth = norm // res
        primes = _expand(flint.fmpz(smooth).factor()) if smooth > 1 else []
        large = []
        if res > 1:
            if is_prime(res):
                large = [res]
            else:
                found, cof = factor_small(res, chains[side])
                if cof != 1:
                    return None
                large = _expand(found)
        if len(large) > params.nlp(side):
            return None
        bound = 1 << params.lpb(side)
        if any(p > bound for p in primes + large):
            return None
        sides.append(primes + large)
    return Relation(s.a, s.b, (sides[0], sides[1]))


def default_chains(params):
    """Per-side chains sized for the residues of a cofactor of mfb bits."""
    return tuple(
        EcmChain.desk(bits=max(20, min(params.mfb(s) - params.lpb(s), params.lpb(s))))
        for s in (0, 1)
    )


#####################
#  Node layout      #
#####################


def plan_node_layout(mem_per_q, node_mem, virtual_cores):
    """(s, t): most subprocesses s with s*mem_per_q <= node_mem and s*t = cores."""
    if mem_per_q > node_mem:
        raise DomainError(f"one special-q needs {mem_per_q} bytes, node has {node_mem}")
    for t in sympy.divisors(virtual_cores):
        s = virtual_cores // t
        if s * mem_per_q <= node_mem:
            return s, t
    raise DomainError("no feasible layout")


#####################
#  Per-q jobs       #
#####################


class SpecialQSiever(YieldFilter):
    """Filter turning special-q into relations, or survivors on batch runs.

    With a batch side configured the survivors are yielded untouched (to be
    written to survivor files); otherwise each survivor is cofactorized and,
    with online_dedup, relations already produced by a smaller special-q
    are dropped.
    """

    def __init__(self, pair, params, fb0, fb1, chains=None, policy=None,
                 online_dedup=False, qmin=None):
        super().__init__()
        self.pair = pair
        self.params = params
        self.fbs = (fb0, fb1)
        self.chains = chains or default_chains(params)
        self.policy = policy
        self.online_dedup = online_dedup
        self.qmin = qmin
        self.stats = {"special_q": 0, "relations": 0, "dropped": 0}
        self.per_q = []

    def process_record(self, q):
        self.stats["special_q"] += 1
        survivors = sieve_special_q(q, self.params, *self.fbs, stats=self.stats)
        if self.params.batch_side is not None:
            yield from survivors
            return
        found = 0
        for s in survivors:
            rel = cofactorize(s, self.params, self.chains, self.pair)
            if rel is None:
                continue
            if self.online_dedup and not online_duplicate_check(
                rel, q, self.policy, self.params.width, self.params.J, self.qmin
            ):
                self.stats["dropped"] += 1
                continue
            found += 1
            yield rel
        self.stats["relations"] += found
        self.per_q.append((q, found))


@dataclass
class SieveRun:
    relations: list = field(default_factory=list)
    survivors: list = field(default_factory=list)
    per_q: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)


def sieve_range(pair, params, policy, qmin, qmax, fb0=None, fb1=None,
                chains=None, online_dedup=True, special_q=None):
    """Sieve every special-q of [qmin, qmax) (or the given special_q list)."""
    from sievebrush import Recipe
    from sievebrush.sources import SpecialQSource

    if fb0 is None:
        fb0 = make_factor_base(pair.f0, params.lim0, 0)
    if fb1 is None:
        fb1 = make_factor_base(pair.f1, params.lim1, 1)
    source = special_q if special_q is not None else SpecialQSource(
        qmin, qmax, pair.poly(policy.side), policy
    )
    siever = SpecialQSiever(pair, params, fb0, fb1, chains, policy, online_dedup, qmin)
    out = Recipe(siever).collect(source)
    run = SieveRun(per_q=siever.per_q, stats=siever.stats)
    if params.batch_side is None:
        run.relations = out
    else:
        run.survivors = out
    logging.info(
        f"sieved {siever.stats['special_q']} special-q in [{qmin}, {qmax}): "
        f"{siever.stats['relations']} relations, {siever.stats.get('survivors', 0)} survivors"
    )
    return run
