"""
    Factoring endgame: quadratic characters, dependencies, rational and
    algebraic square roots, and the final gcd.

    The algebraic side works in Z[theta] with theta = c*alpha, c = lc(f1),
    root of the monic g(x) = c^(d-1) f1(x/c).  The square root of
    delta = g'(theta)^2 * prod(c*a - b*theta) is found modulo an inert
    prime q, lifted q-adically with Newton's iteration for the inverse
    square root, and checked exactly.
"""

from dataclasses import dataclass
import itertools
import logging
import math

import flint
import numpy as np
from sympy.ntheory import sqrt_mod

from sievebrush.arith import (
    PolyZ,
    discriminant,
    homogeneous_norm,
    invert,
    is_prime,
    isqrt,
    legendre,
    poly_roots_mod_p,
    primes_between,
)
from sievebrush.errors import SievebrushError
from sievebrush.relations import relation_ideals
from sievebrush.wiedemann import KernelError, dense_kernel

INERT_BOUND = 1 << 20


class SqrtError(SievebrushError):
    pass


#####################
#  Characters       #
#####################


@dataclass(frozen=True)
class CharacterSet:
    """Degree-1 ideals (q, s) of side 1 with q beyond the large prime bound.

    Every relation maps to a bit vector: one bit per ideal, set when
    (a - b*s | q) = -1, followed by three fixed bits (sign of F0(a, b),
    relation parity, free relation parity).
    """

    ideals: tuple

    @property
    def k(self):
        return len(self.ideals)

    @property
    def width(self):
        return len(self.ideals) + 3

    def bits(self, rel, pair):
        out = []
        for q, s in self.ideals:
            value = rel.a if rel.is_free else rel.a - rel.b * s
            out.append(1 if legendre(value, q) == -1 else 0)
        out.append(1 if homogeneous_norm(pair.f0, rel.a, rel.b) < 0 else 0)
        out.append(1)
        out.append(1 if rel.is_free else 0)
        return out


def build_characters(pair, k=64, start=None, lpb=None):
    """k degree-1 ideals of side 1 just above 2^lpb (or above start)."""
    f = pair.f1
    start = start or (1 << lpb if lpb else 1 << 20)
    disc = discriminant(f) if f.degree > 1 else 1
    ideals = []
    q = start + 1
    while len(ideals) < k:
        if is_prime(q) and f.lc % q and disc % q:
            roots, _ = poly_roots_mod_p(f, q)
            for s in roots:
                if len(ideals) < k:
                    ideals.append((q, s))
        q += 1
    return CharacterSet(tuple(ideals))


def character_matrix(relations, chars, pair):
    return np.array([chars.bits(rel, pair) for rel in relations], dtype=np.uint8).reshape(
        len(relations), chars.width
    )


def character_columns(mm, char_bits):
    """Character bits of every merged row, the XOR over its recipe."""
    out = np.zeros((mm.nrows, char_bits.shape[1]), dtype=np.uint8)
    for i, recipe in enumerate(mm.recipes):
        for rid in recipe:
            out[i] ^= char_bits[rid]
    return out


#####################
#  Dependencies     #
#####################


@dataclass(frozen=True)
class Dependency:
    ids: tuple

    def relations(self, relations):
        return [relations[i] for i in self.ids]

    def is_square(self, relations, pair):
        """Recount: every ideal valuation even on both sides."""
        total = {}
        for rel in self.relations(relations):
            for key, v in relation_ideals(rel, pair).items():
                total[key] = total.get(key, 0) + v
        return all(v % 2 == 0 for v in total.values())

    def characters_ok(self, relations, chars, pair):
        acc = np.zeros(chars.width, dtype=np.uint8)
        for rel in self.relations(relations):
            acc ^= np.array(chars.bits(rel, pair), dtype=np.uint8)
        return not acc.any()

    def __len__(self):
        return len(self.ids)


def apply_characters(kernel, relations, chars, pair, mm=None):
    """Dependencies in the kernel of the character map.

    kernel holds GF(2) left-kernel vectors of the merged matrix (replayed
    through mm's recipes) or, without mm, sets of relation ids.
    """
    deps = [mm.dependency(v) for v in kernel] if mm is not None else [sorted(v) for v in kernel]
    deps = [d for d in deps if d]
    if not deps:
        raise KernelError("empty kernel: collect more relations")
    bits = np.zeros((len(deps), chars.width), dtype=np.int64)
    for i, ids in enumerate(deps):
        for rid in ids:
            bits[i] ^= np.array(chars.bits(relations[rid], pair), dtype=np.int64)
    combos = dense_kernel(bits.T, 2)
    out = []
    for combo in combos:
        acc = set()
        for i in np.flatnonzero(np.asarray(combo, dtype=np.int64) % 2):
            acc ^= set(deps[i])
        if acc:
            out.append(Dependency(tuple(sorted(acc))))
    if not out:
        raise KernelError("no kernel vector survives the quadratic characters")
    logging.info(f"{len(out)} dependencies from {len(deps)} kernel vectors")
    return out


def write_dependencies(deps, path):
    with open(path, "w") as f:
        for dep in deps:
            f.write(" ".join(str(i) for i in dep.ids) + "\n")


def read_dependencies(path):
    with open(path) as f:
        return [Dependency(tuple(int(x) for x in line.split())) for line in f if line.strip()]


#####################
#  Rational side    #
#####################


def _product(values):
    values = list(values)
    while len(values) > 1:
        values = [
            values[i] * values[i + 1] if i + 1 < len(values) else values[i]
            for i in range(0, len(values), 2)
        ]
    return values[0] if values else 1


def rational_sqrt(dep, f0, m, N):
    """isqrt of prod F0(a, b) over the relations of dep, reduced mod N."""
    product = _product(homogeneous_norm(f0, rel.a, rel.b) for rel in dep)
    if product < 0:
        raise SqrtError("rational product is negative: sign character missing")
    root = isqrt(product)
    if root * root != product:
        logging.error(f"rational product of {len(dep)} relations is not a square")
        raise SqrtError("rational product is not a perfect square: parity bug")
    return root % N


#####################
#  Algebraic side   #
#####################


def monic_form(f):
    """g(x) = c^(d-1) f(x/c), monic with root c*alpha."""
    d, c = f.degree, f.lc
    return PolyZ(tuple(f[i] * c ** (d - 1 - i) if i < d else 1 for i in range(d + 1)))


def _fp(coeffs):
    return flint.fmpz_poly([int(x) for x in coeffs])


def _coeffs(p):
    return [int(x) for x in p.coeffs()]


def _mod_coeffs(p, mod, symmetric=False):
    out = []
    for x in _coeffs(p):
        x %= mod
        if symmetric and x > mod // 2:
            x -= mod
        out.append(x)
    return _fp(out)


def _delta(dep, f, g):
    c = f.lc
    gf = g.to_flint()
    factors = [
        _fp([c * rel.a]) if rel.is_free else _fp([c * rel.a, -rel.b]) for rel in dep
    ]
    while len(factors) > 1:
        factors = [
            (factors[i] * factors[i + 1]) % gf if i + 1 < len(factors) else factors[i]
            for i in range(0, len(factors), 2)
        ]
    dg = g.derivative().to_flint()
    return (dg * dg % gf * factors[0]) % gf


class _ResidueField:
    """F_q[x]/(g) for g irreducible mod q."""

    def __init__(self, g, q):
        self.q = q
        self.g = flint.nmod_poly([c % q for c in g.coeffs], q)
        self.order = q ** g.degree

    def elem(self, coeffs):
        return flint.nmod_poly([int(c) % self.q for c in coeffs], self.q) % self.g

    def mul(self, a, b):
        return (a * b) % self.g

    def pow(self, a, e):
        out = self.elem([1])
        while e:
            if e & 1:
                out = self.mul(out, a)
            a = self.mul(a, a)
            e >>= 1
        return out

    @staticmethod
    def is_one(a):
        return [int(x) for x in a.coeffs()] == [1]

    def sqrt(self, a):
        """Tonelli-Shanks in a field of odd order."""
        if self.pow(a, (self.order - 1) // 2) != self.elem([1]):
            raise SqrtError(f"not a square modulo {self.q}")
        Q, S = self.order - 1, 0
        while Q % 2 == 0:
            Q //= 2
            S += 1
        z = next(
            self.elem([t, 1])
            for t in itertools.count(1)
            if not self.is_one(self.pow(self.elem([t, 1]), (self.order - 1) // 2))
        )
        M, c, t, R = S, self.pow(z, Q), self.pow(a, Q), self.pow(a, (Q + 1) // 2)
        while not self.is_one(t):
            i, tt = 0, t
            while not self.is_one(tt):
                tt = self.mul(tt, tt)
                i += 1
            b = self.pow(c, 1 << (M - i - 1))
            M, c = i, self.mul(b, b)
            t, R = self.mul(t, c), self.mul(R, b)
        return R


def find_inert_prime(g, bound=INERT_BOUND, avoid=1):
    """Smallest odd prime q < bound with g irreducible mod q, or None."""
    for q in primes_between(3, bound):
        if avoid % q == 0:
            continue
        _, factors = flint.nmod_poly([c % q for c in g.coeffs], q).factor()
        if len(factors) == 1 and int(factors[0][1]) == 1 and factors[0][0].degree() == g.degree:
            return q
    return None


def _newton_inverse_sqrt(delta, r0, gf, q, precision):
    """r with delta*r^2 = 1 mod (g, q^precision), lifted from r0 mod q."""
    r, k = r0, 1
    while k < precision:
        k = min(2 * k, precision)
        mod = q**k
        inv2 = invert(2, mod)
        e = _mod_coeffs(_fp([1]) - (delta * ((r * r) % gf)) % gf, mod)
        r = _mod_coeffs(r + ((r * e) % gf) * inv2, mod)
    return r


def _sqrt_inert(delta, g, q, bits):
    gf = g.to_flint()
    field = _ResidueField(g, q)
    s = field.sqrt(field.elem(_coeffs(delta)))
    r0 = _fp([int(x) for x in field.pow(s, field.order - 2).coeffs()])
    limit = 8 * bits + 256
    while bits <= limit:
        precision = max(1, math.ceil((bits + 2) / math.log2(q)))
        r = _newton_inverse_sqrt(delta, r0, gf, q, precision)
        gamma = _mod_coeffs((delta * r) % gf, q**precision, symmetric=True)
        if (gamma * gamma) % gf == delta:
            return gamma
        logging.debug(f"q-adic square root: {bits} bits not enough, doubling")
        bits *= 2
    raise SqrtError("lifting precision exhausted")


def _interpolate(xs, ys, mod):
    """Coefficients (low first) of the polynomial through (xs, ys) mod mod."""
    out = [0] * len(xs)
    for i, (xi, yi) in enumerate(zip(xs, ys)):
        basis, denom = [1], 1
        for j, xj in enumerate(xs):
            if j != i:
                basis = [(a - xj * b) % mod for a, b in zip([0] + basis, basis + [0])]
                denom = denom * (xi - xj) % mod
        scale = yi * invert(denom, mod) % mod
        out = [(o + scale * b) % mod for o, b in zip(out, basis)]
    return out


def _sqrt_split(delta, g, bits, avoid):
    """Square root through a totally split prime, trying every sign pattern."""
    gf = g.to_flint()
    d = g.degree
    dg = g.derivative()
    for q in primes_between(3, INERT_BOUND):
        if avoid % q == 0:
            continue
        roots, projective = poly_roots_mod_p(g, q)
        if projective or len(roots) != d:
            continue
        values = [PolyZ(tuple(_coeffs(delta))).eval_mod(r, q) for r in roots]
        sq = [sqrt_mod(v, q) for v in values]
        if any(s is None or s == 0 for s in sq):
            continue
        precision = max(1, math.ceil((2 * bits + 2) / math.log2(q)))
        mod = q**precision
        lifted_roots, lifted_sqrt = [], []
        for r, s in zip(roots, sq):
            k = 1
            while k < precision:
                k = min(2 * k, precision)
                mk = q**k
                r = (r - g.eval_mod(r, mk) * invert(dg.eval_mod(r, mk), mk)) % mk
            v = PolyZ(tuple(_coeffs(delta))).eval_mod(r, mod)
            k = 1
            while k < precision:
                k = min(2 * k, precision)
                mk = q**k
                s = (s - (s * s - v) * invert(2 * s, mk)) % mk
            lifted_roots.append(r)
            lifted_sqrt.append(s)
        for signs in itertools.product((1, -1), repeat=d - 1):
            ys = [lifted_sqrt[0]] + [sg * s for sg, s in zip(signs, lifted_sqrt[1:])]
            gamma = _mod_coeffs(_fp(_interpolate(lifted_roots, ys, mod)), mod, symmetric=True)
            if (gamma * gamma) % gf == delta:
                return gamma
        break
    raise SqrtError("no square root through a split prime")


def algebraic_sqrt(dep, f1, N, pair):
    """y with y^2 = x^2 mod N for x = rational_sqrt of the same dependency."""
    k = len(dep)
    if k % 2:
        raise SqrtError("odd number of relations: parity character missing")
    c = f1.lc
    g = monic_form(f1)
    delta = _delta(dep, f1, g)
    if g.degree == 1:
        value = _coeffs(delta)[0] if _coeffs(delta) else 0
        gamma = isqrt(value) if value >= 0 else -1
        if gamma < 0 or gamma * gamma != value:
            raise SqrtError("algebraic product is not a square")
        gamma = _fp([gamma])
    else:
        bits = max((abs(x).bit_length() for x in _coeffs(delta)), default=1) // 2 + 64
        avoid = discriminant(g) * c
        q = find_inert_prime(g, avoid=avoid)
        if q is not None:
            gamma = _sqrt_inert(delta, g, q, bits)
        else:
            logging.warning("no inert prime below 2^20, using a split prime")
            gamma = _sqrt_split(delta, g, bits, avoid)
    l = pair.f0.lc
    point = c * pair.m % N
    value = PolyZ(tuple(_coeffs(gamma))).eval_mod(point, N)
    denom = g.derivative().eval_mod(point, N) * pow(c, k // 2, N) % N
    return value * pow(l, k // 2, N) * invert(denom, N) % N


#####################
#  Factors          #
#####################


def extract_factors(x, y, N):
    """(p, N // p) from gcd(x - y, N), or None when the gcd is trivial."""
    p = math.gcd((x - y) % N, N)
    if p in (1, N):
        return None
    return p, N // p


@dataclass
class SqrtResult:
    dependency: Dependency
    x: int
    y: int
    gcd: int

    def __str__(self):
        return f"x={self.x} y={self.y} gcd={self.gcd}"


def square_root_phase(deps, relations, pair, N, attempts=None):
    """Try dependencies in order until one splits N; returns (factors, results)."""
    results = []
    for dep in deps[:attempts]:
        rels = dep.relations(relations)
        try:
            x = rational_sqrt(rels, pair.f0, pair.m, N)
            y = algebraic_sqrt(rels, pair.f1, N, pair)
        except SqrtError as exc:
            logging.warning(f"dependency of {len(dep)} relations: {exc}")
            continue
        factors = extract_factors(x, y, N)
        results.append(SqrtResult(dep, x, y, factors[0] if factors else math.gcd(x - y, N)))
        logging.info(f"dependency {len(results)}: {results[-1]}")
        if factors:
            return factors, results
    return None, results
