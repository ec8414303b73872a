"""
    Polynomial selection: Kleinjung-style search for factoring, Joux-Lercier
    search for prime field discrete logarithms, and the estimators used to
    rank the candidates (Murphy-E, E' and sample sieving).
"""

from dataclasses import dataclass, replace
import itertools
import logging
import math
import random

import flint
import numpy as np
from sympy.ntheory.modular import crt

from sievebrush.arith import (
    PolyZ,
    discriminant,
    invert,
    iroot,
    is_prime,
    lift_roots,
    poly_roots_mod_p,
    primes_between,
    resultant,
)
from sievebrush.errors import ConfigError, DomainError
from sievebrush.relations import remove_duplicates
from sievebrush.sieve import sieve_range
from sievebrush.specialq import SpecialQPolicy, enumerate_special_q
from sievebrush.utils import open_text

DEFAULT_BOUNDS = (1 << 24, 1 << 24)
DEFAULT_AREA = float(1 << 31)
DEFAULT_SAMPLE_POINTS = 2000
ALPHA_BOUND = 2000
VALUATION_LIMIT = 1 << 12
RHO_STEP = 1 / 20
RHO_MAX = 20


#####################
#  Pairs            #
#####################


def is_irreducible(f):
    if f.degree < 1:
        return False
    _, factors = f.to_flint().factor()
    return len(factors) == 1 and int(factors[0][1]) == 1 and factors[0][0].degree() == f.degree


@dataclass(frozen=True)
class PolyPair:
    """Two polynomials sharing the root m modulo N (factoring) or p (dlp)."""

    f0: PolyZ
    f1: PolyZ
    m: int
    modulus: int
    kind: str = "factoring"
    skew: float = 0.0

    def poly(self, side):
        return (self.f0, self.f1)[side]

    @property
    def resultant(self):
        return resultant(self.f0, self.f1)

    def check(self):
        """Raise DomainError unless the pair invariants hold."""
        if self.kind not in ("factoring", "dlp"):
            raise DomainError(f"unknown pair kind {self.kind!r}")
        for side in (0, 1):
            f = self.poly(side)
            if f.eval_mod(self.m, self.modulus):
                raise DomainError(f"f{side}(m) != 0 mod {self.modulus}")
            if not is_irreducible(f):
                raise DomainError(f"f{side} = {f} is not irreducible")
        res = self.resultant
        if res == 0 or res % self.modulus:
            raise DomainError(f"resultant {res} is not a nonzero multiple of the modulus")
        return self

    def __str__(self):
        return format_pair(self)


def base_m_pair(N, d, m=None):
    """The naive pair x - m, f1 = digits of N in base m."""
    m = m or iroot(N, d)[0]
    while m > 1:
        digits, rest = [], N
        for _ in range(d):
            rest, digit = divmod(rest, m)
            digits.append(digit)
        digits.append(rest)
        f1 = PolyZ(tuple(digits))
        if f1.degree == d and is_irreducible(f1):
            return PolyPair(PolyZ((-m, 1)), f1, m % N, N, "factoring")
        m -= 1
    raise DomainError(f"no base-m expansion of degree {d} for {N}")


#####################
#  Size estimates   #
#####################


def lognorm(f, s):
    """log of the L2 norm of f with coefficients weighted by skew s."""
    d = f.degree
    return 0.5 * math.log(sum((float(c) * s ** (i - d / 2)) ** 2 for i, c in enumerate(f.coeffs)))


def optimal_skew(f):
    """Skew minimizing lognorm(f, s), by golden section search on log s."""
    if f.degree < 1:
        return 1.0
    a0 = abs(f[0]) or 1
    center = (math.log(a0) - math.log(abs(f.lc))) / f.degree
    lo, hi = center - 8.0, center + 8.0
    g = (math.sqrt(5) - 1) / 2
    x1, x2 = hi - g * (hi - lo), lo + g * (hi - lo)
    y1, y2 = lognorm(f, math.exp(x1)), lognorm(f, math.exp(x2))
    for _ in range(60):
        if y1 < y2:
            hi, x2, y2 = x2, x1, y1
            x1 = hi - g * (hi - lo)
            y1 = lognorm(f, math.exp(x1))
        else:
            lo, x1, y1 = x1, x2, y2
            x2 = lo + g * (hi - lo)
            y2 = lognorm(f, math.exp(x2))
    return math.exp((lo + hi) / 2)


def _skewed_lognorm(f):
    return lognorm(f, optimal_skew(f))


def _expected_valuation(f, p):
    """Average p-valuation of F(a, b) over coprime (a, b), for ramified p."""
    rev = PolyZ(tuple(reversed(f.coeffs)))
    total = 0.0
    k, pk = 1, p
    while pk <= VALUATION_LIMIT:
        affine = len(lift_roots(f, p, k))
        projective = sum(1 for y in lift_roots(rev, p, k) if y % p == 0) if f.lc % p == 0 else 0
        total += (affine + projective) / pk * p / (p + 1)
        k, pk = k + 1, pk * p
    return total


def alpha(f, bound=ALPHA_BOUND):
    """Root property of f over the primes below bound.

    Negative values mean F(a, b) is more often divisible by small primes
    than a random integer of the same size.
    """
    disc = discriminant(f) if f.degree > 1 else 1
    total = 0.0
    for p in primes_between(2, bound):
        if disc % p:
            roots, projective = poly_roots_mod_p(f, p)
            expected = (len(roots) + projective) * p / (p * p - 1)
        else:
            expected = _expected_valuation(f, p)
        total += (1 / (p - 1) - expected) * math.log(p)
    return total


def _rho_table():
    n = int(round(RHO_MAX / RHO_STEP))
    per_unit = int(round(1 / RHO_STEP))
    u = np.arange(n + 1) * RHO_STEP
    rho = np.ones(n + 1)
    for k in range(per_unit + 1, n + 1):
        rho[k] = rho[k - 1] - RHO_STEP / 2 * (
            rho[k - 1 - per_unit] / u[k - 1] + rho[k - per_unit] / u[k]
        )
    return u, rho


_RHO_U, _RHO = _rho_table()


def dickman_rho(u):
    """Dickman's rho, interpolated from a table on [0, 20]; 0 beyond."""
    return np.interp(u, _RHO_U, _RHO, left=1.0, right=0.0)


def _log_abs_norm(f, x, y):
    acc = np.full(np.shape(x), float(f.lc))
    ypow = np.ones(np.shape(x))
    for c in reversed(f.coeffs[:-1]):
        ypow = ypow * y
        acc = acc * x + float(c) * ypow
    with np.errstate(divide="ignore"):
        return np.log(np.abs(acc))


def _smoothness(pair, x, y, alphas, bounds):
    prob = np.ones(np.shape(x))
    for side in (0, 1):
        u = (_log_abs_norm(pair.poly(side), x, y) + alphas[side]) / math.log(bounds[side])
        prob = prob * dickman_rho(u)
    return prob


@dataclass
class ScoreReport:
    murphy_e: float
    murphy_e_prime: float = None
    sample_yield: float = None
    lognorm: float = 0.0
    skew: float = 1.0
    alpha: tuple = (0.0, 0.0)


def murphy_e(pair, bounds=DEFAULT_BOUNDS, sample_points=DEFAULT_SAMPLE_POINTS,
             area=DEFAULT_AREA, skew=None, e_prime=False):
    """Murphy-E of a pair, averaged over sample_points directions.

    Points (x, y) = (sqrt(area*s) cos t, sqrt(area/s) sin t) for t in
    (0, pi) sample the boundary of the skewed sieve region.  With e_prime,
    E' averages the same integrand over a grid filling the rectangle
    [-A, A) x (0, B] of the given area and aspect ratio s instead.
    """
    main = pair.f1 if pair.f1.degree >= pair.f0.degree else pair.f0
    s = skew or pair.skew or optimal_skew(main)
    alphas = (alpha(pair.f0), alpha(pair.f1))
    t = (np.arange(sample_points) + 0.5) * math.pi / sample_points
    x = math.sqrt(area * s) * np.cos(t)
    y = math.sqrt(area / s) * np.sin(t)
    report = ScoreReport(
        murphy_e=float(_smoothness(pair, x, y, alphas, bounds).mean()),
        lognorm=lognorm(main, s),
        skew=s,
        alpha=alphas,
    )
    if e_prime:
        side = max(2, int(math.isqrt(sample_points)))
        A = math.sqrt(area * s / 2)
        B = math.sqrt(area / (2 * s))
        gx = (np.arange(side) + 0.5) / side * 2 * A - A
        gy = (np.arange(side) + 0.5) / side * B
        xx, yy = np.meshgrid(gx, gy)
        report.murphy_e_prime = float(_smoothness(pair, xx, yy, alphas, bounds).mean())
    return report


#####################
#  Size optimizing  #
#####################


def _shift(f, k):
    """f(x + k)."""
    out = [0] * len(f.coeffs)
    for i, c in enumerate(f.coeffs):
        for t in range(i + 1):
            out[t] += c * math.comb(i, t) * k ** (i - t)
    return PolyZ(tuple(out))


def _translate(pair, k):
    return replace(
        pair, f0=_shift(pair.f0, k), f1=_shift(pair.f1, k), m=(pair.m - k) % pair.modulus
    )


def _rotate(pair, lam, j):
    g = [0] * j + [lam * c for c in pair.f0.coeffs]
    n = max(len(g), len(pair.f1.coeffs))
    return replace(pair, f1=PolyZ(tuple(pair.f1[i] + (g[i] if i < len(g) else 0) for i in range(n))))


def size_optimize(pair, rounds=64):
    """Greedy local descent on the skewed lognorm of f1.

    Moves are translations x -> x + k and rotations f1 + lam*x^j*f0 with
    j <= deg f1 - 2, which keep the resultant and the common root.  Step
    sizes double while a move keeps improving.
    """
    if pair.f0.degree != 1 or pair.f1.degree < 2:
        return pair
    moves = [_translate] + [
        (lambda p, k, j=j: _rotate(p, k, j)) for j in range(min(2, pair.f1.degree - 1))
    ]
    best, score = pair, _skewed_lognorm(pair.f1)
    for _ in range(rounds):
        improved = False
        for move in moves:
            step = 1
            while step < 1 << 128:
                cands = [move(best, sign * step) for sign in (1, -1)]
                scored = min((_skewed_lognorm(c.f1), i) for i, c in enumerate(cands))
                if scored[0] >= score - 1e-12:
                    break
                best, score = cands[scored[1]], scored[0]
                improved = True
                step *= 2
        if not improved:
            break
    return replace(best, skew=optimal_skew(best.f1))


#####################
#  Factoring search #
#####################


def _round_div(a, b):
    return (2 * a + b) // (2 * b)


def lm_expansion(N, d, ad, l, m):
    """Coefficients a_0..a_d with sum a_i m^i l^(d-i) = N and a_d = ad.

    Needs ad*m^d = N mod l.  Each a_i (0 < i < d) is the member of its
    forced residue class mod l closest to the remaining quotient.
    """
    coeffs = [0] * (d + 1)
    coeffs[d] = ad
    r = N - ad * m**d
    for i in range(d - 1, 0, -1):
        lw = l ** (d - i)
        t = r // lw
        c = 0 if l == 1 else (t * invert(pow(m, i, l), l)) % l
        scale = m**i * lw
        coeffs[i] = c + l * _round_div(r - c * scale, l * scale)
        r -= coeffs[i] * scale
    if r % l**d:
        raise DomainError(f"ad*m^d != N mod l for l={l}")
    coeffs[0] = r // l**d
    return coeffs


def _aux_primes(N, d, ad, P, count):
    target = PolyZ((-N,) + (0,) * (d - 1) + (ad,))
    found = []
    for p in primes_between(max(P // 2, 3), P + 1):
        if (ad * N) % p == 0:
            continue
        roots, _ = poly_roots_mod_p(target, p)
        if roots:
            found.append((p, roots))
            if len(found) >= count:
                break
    return found


def _collisions(N, d, ad, P, nprimes, aux_count):
    """Candidate pairs of leading coefficient ad, best lognorm first."""
    aux = _aux_primes(N, d, ad, P, aux_count)
    if not aux:
        return []
    m0 = iroot(N // ad, d)[0]
    seen, candidates = set(), []
    for combo in itertools.combinations(aux, min(nprimes, len(aux))):
        moduli = [p for p, _ in combo]
        l = math.prod(moduli)
        for residues in itertools.product(*(roots for _, roots in combo)):
            ml = int(crt(moduli, list(residues))[0])
            m = ml + l * _round_div(m0 - ml, l)
            if (l, m) in seen or m <= 0:
                continue
            seen.add((l, m))
            f1 = PolyZ(tuple(lm_expansion(N, d, ad, l, m)))
            pair = PolyPair(PolyZ((-m, l)), f1, (m * invert(l, N)) % N, N, "factoring")
            candidates.append((_skewed_lognorm(f1), pair))
    candidates.sort(key=lambda c: c[0])
    return [pair for _, pair in candidates]


def kleinjung_search(N, d, lc_multiplier=60, ad_max=None, P=1000, budget=8,
                     ad_min=None, nprimes=2, aux_count=8):
    """Pairs (l*x - m, f1) with lc(f1) a multiple of lc_multiplier.

    For each leading coefficient ad in [ad_min, ad_max], auxiliary primes
    in [P/2, P] where ad*x^d - N has roots give moduli l; every root
    combination gives an m near (N/ad)^(1/d) with ad*m^d = N mod l, and
    f1 comes from the (l, m) expansion of N.  The best candidate of each
    ad is size optimized and emitted.
    """
    if is_prime(N):
        raise DomainError(f"{N} is prime")
    if d < 2 or lc_multiplier < 1:
        raise DomainError(f"need d >= 2 and lc_multiplier >= 1, got {d}, {lc_multiplier}")
    ad_max = ad_max or 100 * lc_multiplier
    ad = lc_multiplier * max(1, -(-(ad_min or 0) // lc_multiplier))
    emitted = 0
    while ad <= ad_max and emitted < budget:
        for pair in _collisions(N, d, ad, P, nprimes, aux_count):
            if not is_irreducible(pair.f1):
                continue
            pair = size_optimize(pair)
            if abs(pair.resultant) % N:
                continue
            logging.debug(f"ad={ad}: lognorm {_skewed_lognorm(pair.f1):.2f}")
            yield pair
            emitted += 1
            break
        ad += lc_multiplier


#####################
#  DLP search       #
#####################


def _root_lattice_poly(p, r, deg):
    """Short irreducible polynomial of degree deg vanishing at r mod p."""
    rows = [[p] + [0] * deg]
    for i in range(1, deg + 1):
        row = [0] * (deg + 1)
        row[0] = -pow(r, i, p)
        row[i] = 1
        rows.append(row)
    reduced = flint.fmpz_mat(rows).lll()
    vectors = [[int(c) for c in reduced.table()[i]] for i in range(deg + 1)]
    vectors.sort(key=lambda v: sum(c * c for c in v))
    for v in vectors + [[x + y for x, y in zip(vectors[0], vectors[1])]]:
        g = PolyZ(tuple(v))
        if g.degree == deg and is_irreducible(g):
            return g if g.lc > 0 else PolyZ(tuple(-c for c in g.coeffs))
    return None


def _squarefree(n):
    return n != 0 and all(int(e) == 1 for _, e in flint.fmpz(abs(n)).factor())


def joux_lercier_pair(p, f1):
    """Pairs (f0, f1) for each root of f1 mod p, f0 from the root lattice."""
    roots, _ = poly_roots_mod_p(f1, p)
    for r in roots:
        f0 = _root_lattice_poly(p, r, f1.degree - 1)
        if f0 is not None:
            yield PolyPair(f0, f1, r, p, "dlp")


def joux_lercier_search(p, d, coeff_bound, budget=8, seed=0, max_tries=None, monic=False):
    """Random f1 of degree d with |coefficients| <= coeff_bound, paired
    with an LLL-reduced f0 of degree d - 1 sharing a root mod p.

    With monic, f1 is monic with a squarefree discriminant, so Z[x]/f1 is
    the maximal order and every prime ideal has a degree-1 generator form.
    """
    if not is_prime(p):
        raise DomainError(f"{p} is not prime")
    if d < 2:
        raise DomainError(f"need d >= 2, got {d}")
    rng = random.Random(seed)
    max_tries = max_tries or 1000 * budget
    seen = set()
    emitted = 0
    for _ in range(max_tries):
        if emitted >= budget:
            return
        coeffs = [rng.randint(-coeff_bound, coeff_bound) for _ in range(d)]
        f1 = PolyZ(tuple(coeffs) + (1 if monic else rng.randint(1, coeff_bound),))
        if f1 in seen or f1.content() != 1 or not is_irreducible(f1):
            continue
        if monic and not _squarefree(discriminant(f1)):
            continue
        seen.add(f1)
        for pair in joux_lercier_pair(p, f1):
            yield pair
            emitted += 1
            break


#####################
#  Sample sieving   #
#####################


@dataclass
class RankedPair:
    pair: PolyPair
    sample_yield: float
    relations: int


def _sample_special_q(f, policy, qmin, qmax, count):
    every = list(enumerate_special_q(qmin, qmax, f, policy))
    if len(every) <= count:
        return every
    step = len(every) / count
    return [every[int(k * step)] for k in range(count)]


def sample_sieve_rank(pairs, q_samples, params, policy=None, qmin=None, qmax=None):
    """Rank pairs by unique relations per special-q over evenly spaced samples."""
    if not pairs:
        raise DomainError("no pairs to rank")
    policy = policy or SpecialQPolicy(side=1)
    qmin = qmin or params.lim(policy.side)
    qmax = qmax or 4 * qmin
    params = replace(params, batch_side=None)
    ranked = []
    for pair in pairs:
        qs = _sample_special_q(pair.poly(policy.side), policy, qmin, qmax, q_samples)
        run = sieve_range(pair, params, policy, qmin, qmax, special_q=qs, online_dedup=True)
        unique, _ = remove_duplicates(run.relations)
        ranked.append(RankedPair(pair, len(unique) / max(len(qs), 1), len(unique)))
    ranked.sort(key=lambda r: -r.sample_yield)
    return ranked


#####################
#  Pair files       #
#####################


def format_pair(pair):
    lines = [f"n: {pair.modulus}"]
    if pair.skew:
        lines.append(f"skew: {pair.skew:.3f}")
    lines.extend(f"c{i}: {c}" for i, c in enumerate(pair.f1.coeffs))
    lines.extend(f"Y{i}: {c}" for i, c in enumerate(pair.f0.coeffs))
    lines.append(f"m: {pair.m}")
    lines.append(f"type: {'gnfs' if pair.kind == 'factoring' else 'dlp'}")
    return "\n".join(lines) + "\n"


def write_pair(pair, path):
    with open_text(path, "w") as f:
        f.write(format_pair(pair))


def parse_pair(text):
    fields, c, y = {}, {}, {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise ConfigError(f"pair file line {lineno}: expected 'key: value'")
        key, value = key.strip(), value.strip()
        try:
            if len(key) > 1 and key[0] in "cY" and key[1:].isdigit():
                (c if key[0] == "c" else y)[int(key[1:])] = int(value)
            elif key == "skew":
                fields[key] = float(value)
            elif key == "type":
                fields[key] = value
            elif key in ("n", "m"):
                fields[key] = int(value)
        except ValueError:
            raise ConfigError(f"pair file line {lineno}: bad value {value!r}")
    if "n" not in fields or not c or not y:
        raise ConfigError("pair file needs n, c0..cd and Y0..Yk")
    f1 = PolyZ(tuple(c.get(i, 0) for i in range(max(c) + 1)))
    f0 = PolyZ(tuple(y.get(i, 0) for i in range(max(y) + 1)))
    N = fields["n"]
    kind = "dlp" if fields.get("type") == "dlp" else "factoring"
    m = fields.get("m")
    if m is None:
        if f0.degree != 1:
            raise ConfigError("pair file without m needs a linear f0")
        m = (-f0[0] * invert(f0[1], N)) % N
    return PolyPair(f0, f1, m, N, kind, fields.get("skew", 0.0))


def read_pair(path):
    if hasattr(path, "read"):
        return parse_pair(path.read())
    with open_text(path) as f:
        return parse_pair(f.read())
