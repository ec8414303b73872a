"""
    Integer, modular and polynomial arithmetic that every other sievebrush
    module builds on.

    Big integers are plain python ints; gmpy2 does the heavy modular work,
    python-flint handles polynomials and integer matrices and sympy supplies
    prime ranges and the factoring methods of the ECM chain.
"""

from dataclasses import dataclass, field
import collections
import logging

import flint
import gmpy2
import sympy
from sympy.ntheory import pollard_pm1, pollard_rho, perfect_power
from sympy.polys.domains import ZZ
from sympy.polys.galoistools import gf_factor

from sievebrush.errors import DomainError

# nmod_poly works on word-size moduli
NMOD_LIMIT = 1 << 63


def modexp(base, exponent, modulus):
    """base^exponent mod modulus in [0, modulus)."""
    if modulus < 2:
        raise DomainError(f"modulus must be >= 2, got {modulus}")
    return int(gmpy2.powmod(base, exponent, modulus))


def is_prime(n):
    """BPSW below 2^64, Miller-Rabin with 64 bases above."""
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    if n < 1 << 64:
        return bool(gmpy2.is_bpsw_prp(n))
    return bool(gmpy2.is_prime(n, 64))


def is_safe_prime(p):
    return p > 4 and is_prime(p) and is_prime((p - 1) // 2)


def primes_between(lo, hi):
    """Primes in [lo, hi)."""
    return [int(p) for p in sympy.sieve.primerange(max(lo, 2), hi)]


def invert(a, m):
    try:
        return int(gmpy2.invert(a, m))
    except ZeroDivisionError:
        raise DomainError(f"{a} is not invertible modulo {m}")


def legendre(a, p):
    return int(gmpy2.legendre(a % p, p))


def isqrt(n):
    return int(gmpy2.isqrt(n))


def iroot(n, k):
    """Integer k-th root, rounded down, and whether it is exact."""
    r, exact = gmpy2.iroot(n, k)
    return int(r), bool(exact)


###################
#  Polynomials    #
###################


@dataclass(frozen=True)
class PolyZ:
    """Dense integer polynomial, coefficients stored low degree first.

    The zero polynomial has an empty coefficient tuple and degree 0.
    """

    coeffs: tuple = ()

    def __post_init__(self):
        c = [int(x) for x in self.coeffs]
        while c and c[-1] == 0:
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c))

    @classmethod
    def from_flint(cls, f):
        return cls(tuple(int(c) for c in f.coeffs()))

    @property
    def degree(self):
        return max(len(self.coeffs) - 1, 0)

    @property
    def lc(self):
        return self.coeffs[-1] if self.coeffs else 0

    def is_zero(self):
        return not self.coeffs

    def __getitem__(self, i):
        return self.coeffs[i] if 0 <= i < len(self.coeffs) else 0

    def __call__(self, x):
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def eval_mod(self, x, m):
        acc = 0
        for c in reversed(self.coeffs):
            acc = (acc * x + c) % m
        return acc

    def derivative(self):
        return PolyZ(tuple(i * c for i, c in enumerate(self.coeffs))[1:])

    def to_flint(self):
        return flint.fmpz_poly(list(self.coeffs))

    def content(self):
        g = 0
        for c in self.coeffs:
            g = gmpy2.gcd(g, c)
        return int(g)

    def max_coeff_bits(self):
        return max((abs(c).bit_length() for c in self.coeffs), default=0)

    def __str__(self):
        terms = []
        for i in range(len(self.coeffs) - 1, -1, -1):
            c = self.coeffs[i]
            if c == 0:
                continue
            mono = "" if i == 0 else ("x" if i == 1 else f"x^{i}")
            if mono and c == 1:
                terms.append(f"+{mono}")
            elif mono and c == -1:
                terms.append(f"-{mono}")
            else:
                terms.append(f"{c:+d}{'*' if mono else ''}{mono}")
        return "".join(terms).lstrip("+") or "0"


def homogeneous_norm(f, a, b):
    """F(a, b) = b^deg(f) * f(a/b), equal to +-Res(a - b*x, f)."""
    coeffs = f.coeffs
    if not coeffs:
        return 0
    acc = coeffs[-1]
    bpow = 1
    for c in reversed(coeffs[:-1]):
        bpow *= b
        acc = acc * a + c * bpow
    return acc


_CRT_PRIMES = []


def _crt_primes():
    """62-bit primes for multi-modular arithmetic, found on demand."""
    k = 0
    while True:
        if k == len(_CRT_PRIMES):
            start = _CRT_PRIMES[-1] if _CRT_PRIMES else 1 << 62
            _CRT_PRIMES.append(int(gmpy2.next_prime(start)))
        yield _CRT_PRIMES[k]
        k += 1


def _resultant_mod(f, g, q):
    """Res(f, g) mod q by the Euclidean remainder sequence over GF(q)."""
    f = flint.nmod_poly([c % q for c in f.coeffs], q)
    g = flint.nmod_poly([c % q for c in g.coeffs], q)
    res = 1
    while g.degree() > 0:
        r = f % g
        if r.degree() < 0:
            return 0
        m, n = f.degree(), g.degree()
        if m * n % 2:
            res = -res
        res = res * pow(int(g.coeffs()[-1]), m - r.degree(), q) % q
        f, g = g, r
    return res * pow(int(g.coeffs()[0]), f.degree(), q) % q


def _norm_bits(f):
    return (sum(c * c for c in f.coeffs).bit_length() + 1) // 2


def resultant(f, g):
    """Exact resultant: Res mod 62-bit primes combined by CRT past the
    Hadamard bound, symmetric remainder."""
    if f.is_zero() or g.is_zero():
        raise DomainError("resultant of the zero polynomial")
    m, n = f.degree, g.degree
    if m == 0:
        return f.lc**n
    if n == 0:
        return g.lc**m
    bound = n * _norm_bits(f) + m * _norm_bits(g) + 2
    value, modulus = 0, 1
    for q in _crt_primes():
        if f.lc % q == 0 or g.lc % q == 0:
            continue
        r = _resultant_mod(f, g, q)
        value += modulus * ((r - value) * invert(modulus, q) % q)
        modulus *= q
        if modulus.bit_length() > bound:
            break
    return value - modulus if 2 * value > modulus else value


def discriminant(f):
    d = f.degree
    r = resultant(f, f.derivative())
    sign = -1 if (d * (d - 1) // 2) % 2 else 1
    return sign * r // f.lc


def poly_roots_mod_p(f, p):
    """Roots of f modulo the prime p.

    Returns (sorted roots, projective) where projective is set when p
    divides the leading coefficient.
    """
    reduced = [c % p for c in f.coeffs]
    while reduced and reduced[-1] == 0:
        reduced.pop()
    projective = f.lc % p == 0
    if not reduced:
        if p > 1 << 16:
            raise DomainError(f"polynomial vanishes identically modulo {p}")
        return list(range(p)), True
    if len(reduced) == 1:
        return [], projective
    if len(reduced) == 2:
        return [(-reduced[0] * invert(reduced[1], p)) % p], projective

    roots = set()
    if p < NMOD_LIMIT:
        _, factors = flint.nmod_poly(reduced, p).factor()
        for fac, _ in factors:
            if fac.degree() == 1:
                c0, c1 = (int(x) for x in fac.coeffs())
                roots.add((-c0 * invert(c1, p)) % p)
    else:
        _, factors = gf_factor([ZZ(c) for c in reversed(reduced)], p, ZZ)
        for fac, _ in factors:
            if len(fac) == 2:
                roots.add(int(-fac[1] * invert(int(fac[0]), p)) % p)
    return sorted(roots), projective


def lift_roots(f, p, k):
    """Roots of f modulo p^k, lifted one digit at a time from roots mod p.

    Brute force over each digit, so only meant for small p.
    """
    roots, _ = poly_roots_mod_p(f, p)
    pk = p
    for _ in range(1, k):
        nxt = pk * p
        roots = [
            r + t * pk for r in roots for t in range(p) if f.eval_mod(r + t * pk, nxt) == 0
        ]
        pk = nxt
    return sorted(roots)


def splits_completely(f, p):
    roots, projective = poly_roots_mod_p(f, p)
    return not projective and len(roots) == f.degree


##########################
#  Lattice reduction     #
##########################


def _dot(u, v):
    return u[0] * v[0] + u[1] * v[1]


def gauss_reduce(u, v):
    """Lagrange-Gauss reduction of a 2D lattice basis.

    Returns (u', v') spanning the same lattice with |u'| <= |v'| and
    2|<u', v'>| <= |u'|^2.
    """
    u = (int(u[0]), int(u[1]))
    v = (int(v[0]), int(v[1]))
    if u[0] * v[1] - u[1] * v[0] == 0:
        raise DomainError(f"dependent vectors {u}, {v}")
    nu, nv = _dot(u, u), _dot(v, v)
    if nu > nv:
        u, v, nu, nv = v, u, nv, nu
    while True:
        mu = (2 * _dot(u, v) + nu) // (2 * nu)
        v = (v[0] - mu * u[0], v[1] - mu * u[1])
        nv = _dot(v, v)
        if nv >= nu:
            return u, v
        u, v, nu, nv = v, u, nv, nu


##########################
#  Small factor chains   #
##########################

_STAGE_ORDER = {"trial": 0, "rho": 1, "pm1": 2, "ecm": 3}


@dataclass(frozen=True)
class Stage:
    """One step of a factoring chain.

    bound is the trial division limit, the rho step count, or B1;
    bound2 is B2 for pm1 and ecm.  bits is the factor size the stage
    extracts with high probability.
    """

    method: str
    bound: int
    bound2: int = 0
    curves: int = 1
    bits: int = 0

    def __post_init__(self):
        if self.method not in _STAGE_ORDER:
            raise DomainError(f"unknown factoring method {self.method!r}")


@dataclass(frozen=True)
class EcmChain:
    stages: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        for prev, cur in zip(self.stages, self.stages[1:]):
            if cur.bits < prev.bits:
                raise DomainError("chain stages must be ordered by increasing cost")

    @classmethod
    def desk(cls, bits=30):
        """The default chain, tuned for desk-size cofactors."""
        bits = max(bits, 10)
        b1 = max(500, 2000 * (1 << max(bits - 30, 0)))
        return cls(
            (
                Stage("trial", 1 << 10, bits=10),
                Stage("rho", 1 << 14, bits=min(20, bits)),
                Stage("pm1", b1, bound2=25 * b1, bits=min(24, bits)),
                Stage("ecm", b1, bound2=25 * b1, curves=20, bits=bits),
            )
        )

    @property
    def extraction_bits(self):
        return max((s.bits for s in self.stages), default=0)

    @property
    def trial_bound(self):
        return max((s.bound for s in self.stages if s.method == "trial"), default=1)

    def truncated(self, stages):
        """The chain limited to its first `stages` steps."""
        return EcmChain(self.stages[:stages])


def _even(n):
    return n + (n & 1)


def find_factor(n, stage):
    """Try to split the composite n with one chain stage; None on failure."""
    d = None
    try:
        if stage.method == "trial":
            for p in primes_between(2, min(stage.bound, isqrt(n)) + 1):
                if n % p == 0:
                    return p
            return None
        if stage.method == "rho":
            d = pollard_rho(n, retries=2, max_steps=stage.bound)
        elif stage.method == "pm1":
            d = pollard_pm1(n, B=stage.bound)
        elif stage.method == "ecm":
            found = sympy.ntheory.ecm(
                n,
                B1=_even(stage.bound),
                B2=_even(max(stage.bound2, stage.bound + 2)),
                max_curve=stage.curves,
            )
            d = min((f for f in found if 1 < f < n), default=None)
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        logging.debug(f"{stage.method} failed on {n}: {exc}")
        return None
    if d is not None and 1 < d < n:
        return int(d)
    return None


def factor_small(n, chain):
    """Extract prime factors of n with the given chain.

    Returns ([(p, e), ...] sorted by p, cofactor) where cofactor is the
    product of the composites the chain could not split.
    """
    if n < 1:
        raise DomainError(f"factor_small needs n >= 1, got {n}")
    found = collections.Counter()
    for p in primes_between(2, chain.trial_bound + 1):
        if n % p == 0:
            n, e = gmpy2.remove(n, p)
            n = int(n)
            found[p] += int(e)
        if n == 1:
            break

    cofactor = 1
    stack = [(n, 1)]
    stages = [s for s in chain.stages if s.method != "trial"]
    while stack:
        m, mult = stack.pop()
        if m == 1:
            continue
        if is_prime(m):
            found[m] += mult
            continue
        pw = perfect_power(m)
        if pw:
            base, e = pw
            stack.append((int(base), mult * e))
            continue
        for stage in stages:
            d = find_factor(m, stage)
            if d is not None:
                stack.append((d, mult))
                stack.append((m // d, mult))
                break
        else:
            cofactor *= m**mult
    return sorted(found.items()), cofactor
