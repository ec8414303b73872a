"""
    Discrete logarithm endgame: Schirokauer maps, the virtual logarithm
    database, smoothing of targets and descent trees.

    Every relation (a, b) gives one linear equation modulo ell:

        sum_side0 v*L(I) - L(lc, 0) + SM0 . lambda0
            = sum_side1 v*L(I) - L(lc, 1) + SM1 . lambda1

    where the L(lc, s) unknowns appear only for non-monic sides and the
    lambda unknowns are the logs attached to the Schirokauer maps.
"""

from dataclasses import dataclass, field, replace
import json
import logging
import math
import random

import flint
import sympy
from sympy.polys.domains import ZZ
from sympy.polys.galoistools import gf_factor

from sievebrush.arith import (
    EcmChain,
    NMOD_LIMIT,
    PolyZ,
    discriminant,
    factor_small,
    gauss_reduce,
    invert,
    is_prime,
    legendre,
    modexp,
    poly_roots_mod_p,
    resultant,
)
from sievebrush.errors import DomainError, SievebrushError
from sievebrush.merge import merge
from sievebrush.purge import RelSet, clique_removal, singleton_removal
from sievebrush.relations import Relation, relation_ideals, validate_relation
from sievebrush.sieve import cofactorize, default_chains, make_factor_base, sieve_special_q
from sievebrush.specialq import SpecialQ
from sievebrush.wiedemann import BwParams, nullspace


class SmoothingError(SievebrushError):
    pass


class DescentError(SievebrushError):
    pass


#####################
#  Schirokauer maps #
#####################


def unit_rank(f):
    """r1 + r2 - 1 for the number field of f; 0 for linear f."""
    if f.degree <= 1:
        return 0
    x = sympy.Symbol("x")
    r1 = sympy.Poly(list(reversed(f.coeffs)), x).count_roots()
    r2 = (f.degree - r1) // 2
    return r1 + r2 - 1


def sm_exponent(f, ell):
    """ell^e - 1 with e the lcm of the residue degrees of ell."""
    if f.degree > 1 and discriminant(f) % ell == 0:
        raise DomainError(f"ell = {ell} divides disc(f): ramified, choose other maps")
    if f.lc % ell == 0:
        raise DomainError(f"ell = {ell} divides the leading coefficient")
    reduced = [c % ell for c in f.coeffs]
    if ell < NMOD_LIMIT:
        _, factors = flint.nmod_poly(reduced, ell).factor()
        degrees = [(fac.degree(), int(e)) for fac, e in factors]
    else:
        _, factors = gf_factor([ZZ(c) for c in reversed(reduced)], ell, ZZ)
        degrees = [(len(fac) - 1, e) for fac, e in factors]
    if any(e > 1 for _, e in degrees):
        raise DomainError(f"f is not squarefree modulo {ell}")
    e = math.lcm(*(d for d, _ in degrees)) if degrees else 1
    return ell**e - 1


def _fp(coeffs):
    return flint.fmpz_poly([int(c) for c in coeffs])


def _reduce(poly, mod):
    return _fp([int(c) % mod for c in poly.coeffs()])


def _powmod(u, e, f, mod):
    out = _fp([1])
    while e:
        if e & 1:
            out = _reduce((out * u) % f, mod)
        u = _reduce((u * u) % f, mod)
        e >>= 1
    return out


def sm_of_element(coeffs, f, ell, r=None, exponent=None):
    """Schirokauer map of the element sum coeffs[i] * alpha^i.

    A non-monic f is scaled by lc^-1 modulo ell^2, which leaves the
    quotient ring (Z/ell^2)[x]/f unchanged.
    """
    r = unit_rank(f) if r is None else r
    if r == 0:
        return []
    exponent = exponent or sm_exponent(f, ell)
    mod = ell * ell
    if f.lc == 1:
        modulus = f.to_flint()
    else:
        inv = invert(f.lc, mod)
        modulus = _fp([c * inv % mod for c in f.coeffs])
    v = [int(c) for c in _powmod(_reduce(_fp(coeffs), mod), exponent, modulus, mod).coeffs()]
    v += [0] * (f.degree - len(v))
    v[0] -= 1
    if any(c % ell for c in v):
        raise DomainError("element is not a unit modulo ell")
    return [(v[i] // ell) % ell for i in range(r)]


def schirokauer_map(rel, side, ell, r=None, pair=None):
    """Map of a - b*alpha on the given side, r coordinates in (Z/ell)."""
    f = pair.poly(side)
    coeffs = [rel.a] if rel.is_free else [rel.a, -rel.b]
    return sm_of_element(coeffs, f, ell, r)


@dataclass(frozen=True)
class SchirokauerMaps:
    ell: int
    ranks: tuple
    exponents: tuple

    @classmethod
    def build(cls, pair, ell):
        ranks = tuple(unit_rank(pair.poly(s)) for s in (0, 1))
        exps = tuple(sm_exponent(pair.poly(s), ell) if ranks[s] else 0 for s in (0, 1))
        return cls(ell, ranks, exps)

    @property
    def count(self):
        return sum(self.ranks)

    def values(self, rel, pair, side):
        if not self.ranks[side]:
            return []
        coeffs = [rel.a] if rel.is_free else [rel.a, -rel.b]
        return sm_of_element(coeffs, pair.poly(side), self.ell, self.ranks[side],
                             self.exponents[side])


#####################
#  Equations        #
#####################


def dense_keys(pair, maps):
    """Unknowns outside the ideal columns: lc logs, then SM logs."""
    keys = [("lc", s) for s in (0, 1) if pair.poly(s).lc != 1]
    keys += [("sm", s, i) for s in (0, 1) for i in range(maps.ranks[s])]
    return keys


def relation_terms(rel, pair, maps):
    """(unknown, coefficient) pairs of the equation of rel."""
    terms = {}
    for (side, p, r), v in relation_ideals(rel, pair).items():
        terms[(side, p, r)] = v if side == 0 else -v
    for s in (0, 1):
        if pair.poly(s).lc != 1:
            terms[("lc", s)] = -1 if s == 0 else 1
        for i, val in enumerate(maps.values(rel, pair, s)):
            if val:
                terms[("sm", s, i)] = val if s == 0 else -val
    return terms


@dataclass
class LogDatabase:
    p: int
    ell: int
    g: int
    pair: object
    maps: SchirokauerMaps
    logs: dict = field(default_factory=dict)

    def __contains__(self, key):
        return key in self.logs

    def __getitem__(self, key):
        return self.logs[key]

    def __len__(self):
        return len(self.logs)

    def residual(self, rel):
        """Value of the equation of rel; None if an unknown is missing."""
        acc = 0
        for key, c in relation_terms(rel, self.pair, self.maps).items():
            if key not in self.logs:
                return None
            acc += c * self.logs[key]
        return acc % self.ell

    def solve_for(self, rel, target):
        """Log of the single unknown `target` of rel."""
        terms = relation_terms(rel, self.pair, self.maps)
        acc = 0
        for key, c in terms.items():
            if key != target:
                acc += c * self.logs[key]
        return (-acc * invert(terms[target], self.ell)) % self.ell

    def verify(self, relations):
        """(checked, failing) counts over relations whose unknowns are all known."""
        checked = bad = 0
        for rel in relations:
            res = self.residual(rel)
            if res is None:
                continue
            checked += 1
            if res:
                bad += 1
        return checked, bad

    def linear_side(self):
        for s in (0, 1):
            if self.pair.poly(s).degree == 1:
                return s
        raise DomainError("no linear side: integer logs need a rational side")

    def lift_side(self):
        """Side targets are lifted on: the linear side, else a monic one."""
        for s in (0, 1):
            if self.pair.poly(s).degree == 1:
                return s
        for s in (1, 0):
            if self.pair.poly(s).lc == 1:
                return s
        raise DomainError("targets need a linear or a monic side")

    def prime_key(self, q):
        side = self.linear_side()
        f = self.pair.poly(side)
        if f.lc % q == 0:
            return (side, q, q)
        return (side, q, poly_roots_mod_p(f, q)[0][0])

    def _known(self, key, descent):
        if key not in self.logs:
            if descent is None:
                raise DescentError(f"log of {key} unknown")
            descent.descend(key)
        return self.logs[key]

    def log_integer(self, n, descent=None):
        """log of the integer n, from its rational-side prime ideals."""
        if n == 0:
            raise DomainError("log of zero")
        acc = 0
        for q, e in sympy.factorint(abs(n)).items():
            acc += e * self._known(self.prime_key(int(q)), descent)
        return acc % self.ell

    def log_element(self, elem, descent=None):
        """log of a SmoothElement: its ideals plus its Schirokauer maps."""
        acc = sum(k * self._known(key, descent) for key, k in elem.ideals.items())
        for i, val in enumerate(elem.sms):
            acc += val * self.logs[("sm", elem.side, i)]
        return acc % self.ell

    def log_generator(self, pool_size=64, seed=0):
        """log of g in the current (possibly unnormalized) logs."""
        side = self.lift_side()
        if self.pair.poly(side).degree == 1:
            return self.log_integer(self.g)
        bits = max((q.bit_length() for s, q, _ in self._ideal_keys() if s == side), default=16)
        res = smooth_element(self.g, self.g, self.p, self.pair, side, self.ell, bits,
                             pool_size=pool_size, seed=seed, known=self.logs.__contains__)
        # g^(1+e) is the element
        if (1 + res.e) % self.ell == 0:
            raise DomainError(f"exponent {res.e} is -1 modulo ell: reseed")
        return self.log_element(res) * invert(1 + res.e, self.ell) % self.ell

    def _ideal_keys(self):
        return (k for k in self.logs if isinstance(k[0], int))

    def normalize(self):
        lg = self.log_generator()
        if lg == 0:
            raise DomainError(f"log of the generator {self.g} vanishes: degenerate kernel vector")
        scale = invert(lg, self.ell)
        self.logs = {k: v * scale % self.ell for k, v in self.logs.items()}

    def write(self, path):
        size = (self.ell.bit_length() + 7) // 8
        ideals = sorted(self._ideal_keys())
        extra = {json.dumps(k): self.logs[k] for k in self.logs if not isinstance(k[0], int)}
        header = {"p": self.p, "ell": self.ell, "g": self.g, "count": len(ideals),
                  "extra": extra}
        with open(path, "wb") as f:
            f.write(json.dumps(header).encode() + b"\n")
            for side, q, r in ideals:
                f.write(bytes([side]) + q.to_bytes(8, "little") + r.to_bytes(8, "little"))
                f.write(self.logs[(side, q, r)].to_bytes(size, "little"))

    @classmethod
    def read(cls, path, pair):
        with open(path, "rb") as f:
            header = json.loads(f.readline())
            raw = f.read()
        ell = header["ell"]
        size = (ell.bit_length() + 7) // 8
        logs = {tuple(json.loads(k)): v for k, v in header["extra"].items()}
        step = 17 + size
        for i in range(header["count"]):
            chunk = raw[i * step : (i + 1) * step]
            key = (chunk[0], int.from_bytes(chunk[1:9], "little"),
                   int.from_bytes(chunk[9:17], "little"))
            logs[key] = int.from_bytes(chunk[17:], "little")
        return cls(header["p"], ell, header["g"], pair, SchirokauerMaps.build(pair, ell), logs)


def propagate(db, relations, max_rounds=64):
    """Fill ideals that are the only unknown of some relation."""
    added = 0
    for _ in range(max_rounds):
        progress = 0
        for rel in relations:
            terms = relation_terms(rel, db.pair, db.maps)
            missing = [k for k in terms if k not in db.logs]
            if len(missing) == 1 and terms[missing[0]] % db.ell:
                db.logs[missing[0]] = db.solve_for(rel, missing[0])
                progress += 1
        added += progress
        if not progress:
            break
    return added


def build_and_solve_log_system(relations, pair, ell, g, target_density=30, bw=None,
                               seed=0, lims=None, target_excess=None):
    """Filter, merge, solve modulo ell and spread logs to every ideal."""
    relations = [rel for rel in relations if not rel.is_free]
    maps = SchirokauerMaps.build(pair, ell)
    extras = dense_keys(pair, maps)
    rs = RelSet.from_relations(relations, pair, lims)
    target = target_excess if target_excess is not None else maps.count + 3
    if rs.excess < len(extras):
        raise DomainError(f"excess {rs.excess} below the {len(extras)} extra unknowns")
    rs = clique_removal(singleton_removal(rs), min(target, max(rs.excess, 0)))
    mm = merge(rs, target_density, kind="dlp")
    dense = []
    for recipe in mm.recipes:
        acc = dict.fromkeys(extras, 0)
        for rid, mult in recipe.items():
            terms = relation_terms(relations[rid], pair, maps)
            for key in extras:
                acc[key] += mult * terms.get(key, 0)
        dense.append([acc[k] % ell for k in extras])
    bw = bw or BwParams.default(ell, mm.nrows)
    kernel = nullspace(mm.sparse_rows(), mm.ncols, ell, "right", bw, seed, dense=dense or None)
    if not kernel:
        raise DomainError("no kernel vector for the log system")
    if len(kernel) > 1:
        logging.warning(f"log system kernel has dimension {len(kernel)}, using the first vector")
    v = [int(x) % ell for x in kernel[0]]
    db = LogDatabase(pair.modulus, ell, g, pair, maps)
    for i, key in enumerate(mm.columns + extras):
        db.logs[key] = v[i]

    # eliminated columns, latest pivot first
    for piv in reversed(mm.pivots):
        others = [k for k in piv.row if k != piv.column]
        if piv.column in db.logs or any(k not in db.logs for k in others):
            continue
        acc = sum(piv.row[k] * db.logs[k] for k in others)
        for rid, mult in piv.recipe.items():
            terms = relation_terms(relations[rid], pair, maps)
            acc += mult * sum(terms.get(k, 0) * db.logs[k] for k in extras)
        coef = piv.row[piv.column] % ell
        if coef:
            db.logs[piv.column] = (-acc * invert(coef, ell)) % ell
    propagate(db, relations)
    db.normalize()
    checked, bad = db.verify(relations)
    logging.info(f"log database: {len(db)} logs, {checked} relations checked, {bad} failing")
    if bad:
        logging.error(f"{bad} relations violate the log equations")
        raise DomainError("inconsistent log system: check the matrix with verify_offline")
    return db


#####################
#  Smoothing        #
#####################


@dataclass
class Candidate:
    e: int
    lift: tuple
    found: list = field(default_factory=list)
    rest: list = field(default_factory=list)

    @property
    def remaining_bits(self):
        return sum(x.bit_length() for x in self.rest)


@dataclass
class SmoothResult:
    """z * g^e = u / v mod p with |u| and v smooth."""

    e: int
    u: int
    v: int
    factors_u: dict
    factors_v: dict

    def check(self, z, g, p, bits):
        if (self.u - z * modexp(g, self.e, p) * self.v) % p:
            return False
        for n, fac in ((abs(self.u), self.factors_u), (self.v, self.factors_v)):
            if math.prod(q**k for q, k in fac.items()) != n:
                return False
            if any(q.bit_length() > bits for q in fac):
                return False
        return True


@dataclass
class SmoothElement:
    """z * g^e = phi(sum coeffs[i] alpha^i) mod p on a nonlinear side,
    with the prime ideals of the element and its Schirokauer map values."""

    e: int
    side: int
    coeffs: tuple
    ideals: dict
    sms: list

    def check(self, z, g, p, m, bits):
        value = sum(c * pow(m, i, p) for i, c in enumerate(self.coeffs))
        if (value - z * modexp(g, self.e, p)) % p:
            return False
        return all(q.bit_length() <= bits for _, q, _ in self.ideals)


def _factor_dict(n):
    return {int(q): int(k) for q, k in sympy.factorint(n).items()}


def lift_target(z, p):
    """Short (u, v) with u = z*v mod p, v > 0."""
    u, v = gauss_reduce((p, 0), (z % p, 1))[0]
    if v < 0:
        u, v = -u, -v
    return u, v


def lift_element(z, p, m, d):
    """Short coefficients c with sum c_i m^i = z mod p.

    z is reduced modulo the degree-1 prime (p, alpha - m): Babai rounding
    of (z, 0, ..., 0) against an LLL basis of the lattice of elements
    that map to 0 mod p.
    """
    rows = [[p] + [0] * (d - 1)]
    for i in range(1, d):
        row = [0] * d
        row[0] = -pow(m, i, p)
        row[i] = 1
        rows.append(row)
    basis = [[int(c) for c in row] for row in flint.fmpz_mat(rows).lll().table()]
    inverse = sympy.Matrix(basis).inv()
    c = [z % p] + [0] * (d - 1)
    for j, row in enumerate(basis):
        x = sympy.Rational(z % p) * inverse[0, j]
        k = (2 * x.p + x.q) // (2 * x.q)
        c = [ci - k * bi for ci, bi in zip(c, row)]
    return tuple(c)


def element_norm(coeffs, f):
    """|N(sum coeffs[i] alpha^i)| for monic f; 0 for the zero element."""
    c = PolyZ(tuple(coeffs))
    return 0 if c.is_zero() else abs(resultant(f, c))


def element_ideals(coeffs, f, side, factors):
    """Prime ideals (side, q, r) of the element, from its factored norm.

    None unless every q is unramified and meets the element in exactly
    one degree-1 ideal, whose valuation is then the exponent of q.
    """
    disc = discriminant(f)
    ideals = {}
    for q, k in factors.items():
        if q >= NMOD_LIMIT or disc % q == 0:
            return None
        common = flint.nmod_poly([c % q for c in coeffs], q).gcd(
            flint.nmod_poly([c % q for c in f.coeffs], q))
        if common.degree() != 1:
            return None
        # the gcd is monic
        ideals[(side, q, -int(common.coeffs()[0]) % q)] = k
    return ideals


def _smoothing(z, g, p, lift, accept, smooth_bits, pool_size, chain, max_rounds, seed):
    """Randomize z by powers of g until lift(z*g^e) = (payload, values)
    has smooth values and accept(candidate) returns a result.

    Each round lifts pool_size fresh candidates; after every stage of the
    chain only the quarter with the least unfactored size survives.
    """
    if z % p == 0:
        raise DomainError("z must be invertible modulo p")
    chain = chain or EcmChain.desk(smooth_bits)
    rng = random.Random(seed)
    exponents = iter([0])
    for round_ in range(max_rounds):
        pool = []
        while len(pool) < pool_size:
            e = next(exponents, None)
            if e is None:
                e = rng.randrange(1, p - 1)
            payload, values = lift(z * modexp(g, e, p) % p)
            if 0 in values:
                continue
            pool.append(Candidate(e, payload, [], list(values)))
        for k in range(1, len(chain.stages) + 1):
            sub = chain.truncated(k)
            for cand in pool:
                rest = []
                for n in cand.rest:
                    found, cof = factor_small(n, sub)
                    cand.found.extend(found)
                    if cof != 1:
                        rest.append(cof)
                cand.rest = rest
            pool = [c for c in pool if all(q.bit_length() <= smooth_bits for q, _ in c.found)]
            for cand in sorted((c for c in pool if not c.rest), key=lambda c: c.e):
                result = accept(cand)
                if result is not None:
                    logging.info(f"smoothing: e={cand.e} after {round_ + 1} rounds")
                    return result
            pool = [c for c in pool if c.rest]
            pool.sort(key=lambda c: c.remaining_bits)
            pool = pool[: max(1, len(pool) // 4)]
        logging.debug(f"smoothing round {round_ + 1}: no {smooth_bits}-bit smooth lift")
    raise SmoothingError(
        f"no {smooth_bits}-bit smooth lift after {max_rounds} rounds: "
        "raise smooth_bits or pool_size"
    )


def smooth_target(z, g, p, smooth_bits, pool_size=256, chain=None, max_rounds=64, seed=0):
    """Find e such that the rational lift u/v of z*g^e is smooth_bits-smooth."""

    def lift(zz):
        u, v = lift_target(zz, p)
        return (u, v), (abs(u), v)

    def accept(cand):
        u, v = cand.lift
        return SmoothResult(cand.e, u, v, _factor_dict(abs(u)), _factor_dict(v))

    return _smoothing(z, g, p, lift, accept, smooth_bits, pool_size, chain, max_rounds, seed)


def smooth_element(z, g, p, pair, side, ell, smooth_bits, pool_size=256, chain=None,
                   max_rounds=64, seed=0, known=None):
    """smooth_target on a nonlinear monic side: z*g^e is lifted by
    lift_element and the element norm must be smooth_bits-smooth.

    With `known`, only elements whose ideals all satisfy it are accepted.
    """
    f = pair.poly(side)
    if f.lc != 1:
        raise DomainError(f"f{side} must be monic to lift targets")
    rank = unit_rank(f)
    exponent = sm_exponent(f, ell) if rank else 0

    def lift(zz):
        coeffs = lift_element(zz, p, pair.m, f.degree)
        norm = element_norm(coeffs, f)
        return (coeffs, norm), (norm,)

    def accept(cand):
        coeffs, norm = cand.lift
        ideals = element_ideals(coeffs, f, side, _factor_dict(norm))
        if ideals is None or (known is not None and not all(known(k) for k in ideals)):
            return None
        try:
            sms = sm_of_element(list(coeffs), f, ell, rank, exponent) if rank else []
        except DomainError:
            return None
        return SmoothElement(cand.e, side, tuple(coeffs), ideals, sms)

    return _smoothing(z, g, p, lift, accept, smooth_bits, pool_size, chain, max_rounds, seed)


#####################
#  Descent          #
#####################


@dataclass
class DescentNode:
    ideal: tuple
    log: int
    relation: Relation = None
    children: list = field(default_factory=list)

    @property
    def norm(self):
        return self.ideal[1]


@dataclass
class DescentTree:
    root: DescentNode

    def nodes(self):
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(node.children)

    @property
    def size(self):
        return sum(1 for _ in self.nodes())

    def depth(self, node=None):
        node = node or self.root
        return 1 + max((self.depth(c) for c in node.children), default=0)

    def verify(self, db):
        """Every node relation is valid, contains its ideal, has smaller
        children and satisfies its log equation."""
        for node in self.nodes():
            if node.relation is None:
                if node.ideal not in db or db[node.ideal] != node.log:
                    return False
                continue
            if validate_relation(node.relation, db.pair) is not None:
                return False
            if node.ideal not in relation_ideals(node.relation, db.pair):
                return False
            if any(c.norm >= node.norm for c in node.children):
                return False
            if db.residual(node.relation) != 0:
                return False
        return True


class Descent:
    """Special-q descent of ideals of unknown log, down to the database."""

    def __init__(self, db, params, max_extra_I=3, max_depth=32):
        self.db = db
        self.params = params
        self.max_extra_I = max_extra_I
        self.max_depth = max_depth
        pair = db.pair
        self.fbs = (make_factor_base(pair.f0, params.lim0, 0),
                    make_factor_base(pair.f1, params.lim1, 1))

    def _relations(self, ideal, I):
        side, q, r = ideal
        lpb = max(self.params.lpb0, self.params.lpb1, q.bit_length())
        params = replace(self.params, I=I, J=0, lpb0=lpb, lpb1=lpb, mfb0=3 * lpb,
                         mfb1=3 * lpb, nlp0=3, nlp1=3, bkthresh=0, bkthresh1=0,
                         batch_side=None, batch_lim=0)
        sq = SpecialQ.build(side, (q,), r)
        chains = default_chains(params)
        for s in sieve_special_q(sq, params, *self.fbs):
            rel = cofactorize(s, params, chains, self.db.pair)
            if rel is not None:
                yield rel

    def _pick(self, ideal, I):
        best = None
        for rel in self._relations(ideal, I):
            ideals = relation_ideals(rel, self.db.pair)
            if ideal not in ideals:
                continue
            others = [k for k in ideals if k != ideal]
            if any(k[1] >= ideal[1] for k in others):
                continue
            unknown = sum(1 for k in others if k not in self.db)
            score = (unknown, max((k[1] for k in others), default=0))
            if best is None or score < best[0]:
                best = (score, rel, others)
        return best

    def descend(self, ideal, depth=0):
        db = self.db
        if ideal in db:
            return DescentNode(ideal, db[ideal])
        if depth > self.max_depth:
            raise DescentError(f"descent deeper than {self.max_depth} at {ideal}")
        if ideal[2] == ideal[1]:
            raise DescentError(f"projective ideal {ideal} cannot be a special-q")
        for I in range(self.params.I, self.params.I + self.max_extra_I + 1):
            best = self._pick(ideal, I)
            if best is not None:
                break
            logging.debug(f"descent: no relation for {ideal} at I={I}")
        else:
            raise DescentError(f"no relation for ideal {ideal}: widen the sieve area")
        _, rel, others = best
        children = [self.descend(k, depth + 1) for k in others]
        db.logs[ideal] = db.solve_for(rel, ideal)
        logging.debug(f"descent: {ideal} from {rel}")
        return DescentNode(ideal, db.logs[ideal], rel, children)


def descend(ideal, logdb, pair, params):
    """Descent tree of ideal; its log is added to logdb."""
    if logdb.pair is not pair:
        logdb.pair = pair
    return DescentTree(Descent(logdb, params).descend(ideal))


#####################
#  Queries          #
#####################


def query_log(y, g, p, ell, logdb, params=None, smooth_bits=None, pool_size=256, seed=0):
    """x with g^x = y mod p: modulo ell, or modulo p - 1 for safe primes."""
    y %= p
    if y == 0:
        raise DomainError("0 has no logarithm")
    if y == 1:
        x = 0
    else:
        descent = Descent(logdb, params) if params is not None else None
        bits = smooth_bits or max(8, p.bit_length() // 4)
        side = logdb.lift_side()
        if logdb.pair.poly(side).degree == 1:
            res = smooth_target(y, g, p, bits, pool_size=pool_size, seed=seed)
            x = logdb.log_integer(res.u, descent) - logdb.log_integer(res.v, descent)
        else:
            res = smooth_element(y, g, p, logdb.pair, side, ell, bits, pool_size=pool_size,
                                 seed=seed)
            x = logdb.log_element(res, descent)
        x = (x - res.e) % ell
    if p - 1 == 2 * ell and is_prime(ell):
        g_qr = legendre(g, p) == 1
        y_qr = legendre(y, p) == 1
        if g_qr:
            if not y_qr:
                raise DomainError(f"{y} is not in the subgroup generated by {g}")
        else:
            parity = 0 if y_qr else 1
            if x % 2 != parity:
                x += ell
            x %= p - 1
        if modexp(g, x, p) != y:
            logging.error(f"log of {y}: g^{x} != y")
            raise DescentError(f"verification failed for y = {y}")
        return x
    h = y * invert(modexp(g, x, p), p) % p
    if modexp(h, (p - 1) // ell, p) != 1:
        logging.error(f"log of {y} modulo {ell} does not verify")
        raise DescentError(f"verification failed for y = {y}")
    return x


def verify_log(g, x, y, p):
    return modexp(g, x, p) == y % p
