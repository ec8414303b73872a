"""
    Special-q ideals and the 2D lattices they cut out of the (a, b) plane.
"""

from dataclasses import dataclass
import heapq
import math

import gmpy2
import sympy
from sympy.ntheory.modular import crt

from sievebrush.arith import gauss_reduce, poly_roots_mod_p, primes_between


@dataclass(frozen=True)
class SpecialQ:
    side: int
    q: int
    q_factors: tuple
    root: int
    basis: tuple

    @classmethod
    def build(cls, side, q_factors, root):
        q = math.prod(q_factors)
        basis = gauss_reduce((q, 0), (root % q, 1))
        return cls(side, q, tuple(q_factors), root % q, basis)

    @property
    def is_composite(self):
        return len(self.q_factors) > 1

    def ideals(self):
        """The prime ideals (side, p, r) whose product is this special-q."""
        return [(self.side, p, self.root % p) for p in self.q_factors]

    def ab(self, i, j):
        (u0, u1), (v0, v1) = self.basis
        return i * u0 + j * v0, i * u1 + j * v1

    def ij(self, a, b):
        """Lattice coordinates of (a, b), or None if it is not in the lattice."""
        (u0, u1), (v0, v1) = self.basis
        det = u0 * v1 - u1 * v0
        i, ri = divmod(a * v1 - b * v0, det)
        j, rj = divmod(u0 * b - u1 * a, det)
        if ri or rj:
            return None
        return i, j

    def in_region(self, a, b, width, height):
        """Whether +-(a, b) lies in [-width/2, width/2) x [0, height)."""
        ij = self.ij(a, b)
        if ij is None:
            return False
        i, j = ij
        if j < 0 or (j == 0 and i < 0):
            i, j = -i, -j
        return -width // 2 <= i < width // 2 and 0 <= j < height

    def __str__(self):
        return f"q={self.q} ({'*'.join(map(str, self.q_factors))}) r={self.root} side {self.side}"


@dataclass(frozen=True)
class SpecialQPolicy:
    """Which special-q a campaign uses.

    kind "prime" takes every prime q with a root on `side`; kind
    "composite" takes q = q1*q2 with pmin <= q1 < q2 <= pmax.
    """

    side: int = 1
    kind: str = "prime"
    pmin: int = 2
    pmax: int = 0

    def admits(self, factors):
        if self.kind == "prime":
            return len(factors) == 1
        if len(factors) != 2 or len(set(factors)) != 2:
            return False
        return all(self.pmin <= p <= (self.pmax or p) for p in factors)


class _RootCache(dict):
    def __init__(self, f):
        super().__init__()
        self.f = f

    def __missing__(self, p):
        roots, _ = poly_roots_mod_p(self.f, p)
        self[p] = roots
        return roots


def _prime_q(qmin, qmax, f, side):
    for q in primes_between(qmin, qmax):
        roots, _ = poly_roots_mod_p(f, q)
        for r in roots:
            yield SpecialQ.build(side, (q,), r)


def _composite_products(qmin, qmax, pmin, pmax):
    """(q1*q2, q1, q2) in increasing order, merging one stream per q1."""

    def stream(q1):
        lo = max(q1 + 1, -(-qmin // q1))
        hi = min(pmax, (qmax - 1) // q1)
        for q2 in sympy.sieve.primerange(lo, hi + 1):
            yield q1 * int(q2), q1, int(q2)

    top = int(gmpy2.isqrt(qmax - 1))
    streams = [stream(q1) for q1 in primes_between(pmin, min(top, pmax) + 1)]
    return heapq.merge(*streams)


def enumerate_special_q(qmin, qmax, f, policy):
    """Special-q in [qmin, qmax) ordered by (q, root).

    An unsatisfiable policy gives an empty stream.
    """
    if qmin >= qmax:
        return
    if policy.kind == "prime":
        yield from _prime_q(qmin, qmax, f, policy.side)
        return

    pmax = policy.pmax or qmax
    if policy.pmin * policy.pmin > qmax:
        return
    roots = _RootCache(f)
    for q, q1, q2 in _composite_products(qmin, qmax, policy.pmin, pmax):
        r1, r2 = roots[q1], roots[q2]
        if not r1 or not r2:
            continue
        combined = sorted({int(crt([q1, q2], [x, y])[0]) for x in r1 for y in r2})
        for r in combined:
            yield SpecialQ.build(policy.side, (q1, q2), r)
