"""
    Relations: the (a, b) pairs with fully factored norms on both sides.

    A relation line reads ``a,b:p,p,...:p,p,...`` with a and b in decimal and
    the primes of each side in lowercase hex, repeated per multiplicity.
    Free relations are written with b = 0 and a = p.
"""

from dataclasses import dataclass
import collections
import hashlib
import logging
import math

from sievebrush.arith import homogeneous_norm, is_prime, primes_between
from sievebrush.arith import invert, splits_completely, poly_roots_mod_p
from sievebrush.errors import SievebrushError
from sievebrush.filters import ConditionalFilter
from sievebrush.specialq import SpecialQ
from sievebrush.stats import Average, LargePrimeHistogram, MinMax


class RelationFormatError(SievebrushError, ValueError):
    def __init__(self, msg, lineno=None):
        if lineno is not None:
            msg = f"line {lineno}: {msg}"
        super().__init__(msg)
        self.lineno = lineno


@dataclass(frozen=True)
class Relation:
    a: int
    b: int
    primes: tuple = ((), ())

    def __post_init__(self):
        object.__setattr__(
            self, "primes", (tuple(sorted(self.primes[0])), tuple(sorted(self.primes[1])))
        )

    @property
    def is_free(self):
        return self.b == 0

    def key(self):
        return normalize_ab(self.a, self.b)

    def weight(self):
        return len(self.primes[0]) + len(self.primes[1])

    def large_primes(self, lims):
        return [sum(1 for p in self.primes[s] if p > lims[s]) for s in (0, 1)]

    def __str__(self):
        return format_relation(self)


def normalize_ab(a, b):
    if b < 0 or (b == 0 and a < 0):
        return -a, -b
    return a, b


def format_relation(rel):
    sides = [",".join(f"{p:x}" for p in rel.primes[s]) for s in (0, 1)]
    return f"{rel.a},{rel.b}:{sides[0]}:{sides[1]}"


def _hex_list(text, lineno):
    if not text:
        return ()
    try:
        return tuple(int(x, 16) for x in text.split(","))
    except ValueError:
        raise RelationFormatError(f"bad prime list {text!r}", lineno)


def parse_relation(line, lineno=None):
    line = line.strip()
    parts = line.split(":")
    if len(parts) != 3:
        raise RelationFormatError(f"expected 3 fields, got {len(parts)}: {line!r}", lineno)
    ab = parts[0].split(",")
    if len(ab) != 2:
        raise RelationFormatError(f"bad a,b field {parts[0]!r}", lineno)
    try:
        a, b = int(ab[0]), int(ab[1])
    except ValueError:
        raise RelationFormatError(f"bad a,b field {parts[0]!r}", lineno)
    return Relation(a, b, (_hex_list(parts[1], lineno), _hex_list(parts[2], lineno)))


##################
#  Ideals        #
##################


def ideal_root(a, b, p):
    """Root r of the degree-1 ideal above p dividing a - b*x; p if projective."""
    if b % p == 0:
        return p
    return (a * invert(b, p)) % p


def relation_ideals(rel, pair):
    """Counter mapping (side, p, r) to its valuation in the relation."""
    ideals = collections.Counter()
    if rel.is_free:
        p = rel.a
        for side in (0, 1):
            roots, _ = poly_roots_mod_p(pair.poly(side), p)
            for r in roots:
                ideals[(side, p, r)] += 1
        return ideals
    for side in (0, 1):
        for p in rel.primes[side]:
            ideals[(side, p, ideal_root(rel.a, rel.b, p))] += 1
    return ideals


class IdealIndex:
    """Dense numbering of ideals: side 0 first, then side 1, each by (p, r)."""

    def __init__(self, keys=()):
        self._keys = sorted(set(keys))
        self._index = {k: i for i, k in enumerate(self._keys)}

    @classmethod
    def from_relations(cls, relations, pair):
        keys = set()
        for rel in relations:
            keys.update(relation_ideals(rel, pair))
        return cls(keys)

    def __len__(self):
        return len(self._keys)

    def __getitem__(self, key):
        return self._index[key]

    def __contains__(self, key):
        return key in self._index

    def key(self, column):
        return self._keys[column]

    def keys(self):
        return list(self._keys)


######################
#  Validation        #
######################


def validate_relation(rel, pair, lpb=(None, None)):
    """Return None if rel is sound for pair, else the first failed check."""
    if rel.is_free:
        p = rel.a
        if not is_prime(p):
            return f"free relation at composite {p}"
        for side in (0, 1):
            f = pair.poly(side)
            if not splits_completely(f, p):
                return f"{p} does not split on side {side}"
            if rel.primes[side] != (p,) * f.degree:
                return f"side {side} of free relation must list {p} {f.degree} times"
        return None
    if rel.b < 0:
        return f"b must be nonnegative, got {rel.b}"
    if math.gcd(rel.a, rel.b) != 1:
        return f"gcd({rel.a}, {rel.b}) != 1"
    for side in (0, 1):
        norm = abs(homogeneous_norm(pair.poly(side), rel.a, rel.b))
        if math.prod(rel.primes[side]) != norm:
            return f"side {side} primes do not multiply to the norm {norm}"
        bound = lpb[side]
        for p in rel.primes[side]:
            if bound is not None and p.bit_length() > bound:
                return f"side {side} prime {p} exceeds 2^{bound}"
            if not is_prime(p):
                return f"side {side} factor {p} is not prime"
    return None


class RelationValidator(ConditionalFilter):
    """Pass relations that validate against the polynomial pair.

    With validator=True, unsound relations raise ValidationError and end
    up in the recipe's error stream instead of being dropped silently.
    """

    def __init__(self, pair, lpb=(None, None), validator=False):
        super().__init__()
        self.pair = pair
        self.lpb = lpb
        self.validator = validator
        self.failures = 0

    def test_record(self, record):
        detail = validate_relation(record, self.pair, self.lpb)
        if detail is not None:
            self.failures += 1
            logging.debug(f"rejecting {record}: {detail}")
            return False
        return True


######################
#  Duplicates        #
######################


class DuplicateRemover(ConditionalFilter):
    """Keep the first relation seen for each normalized (a, b).

    Keys are stored as 128-bit digests; a digest hit is checked against the
    full key before the relation is treated as a duplicate.
    """

    def __init__(self):
        super().__init__()
        self._seen = {}
        self.raw = 0
        self.unique = 0

    @staticmethod
    def digest(key):
        return hashlib.blake2b(f"{key[0]},{key[1]}".encode(), digest_size=16).digest()

    def test_record(self, record):
        self.raw += 1
        key = record.key()
        h = self.digest(key)
        if self._seen.get(h) == key:
            return False
        self._seen[h] = key
        self.unique += 1
        return True

    def stats(self):
        ratio = self.unique / self.raw if self.raw else 0.0
        return {"raw": self.raw, "unique": self.unique, "unique_ratio": ratio}

    def done(self):
        stats = self.stats()
        logging.info(
            f"dedup: {stats['raw']} raw, {stats['unique']} unique "
            f"({100 * stats['unique_ratio']:.1f}%)"
        )
        if self.raw and not 0.6 <= stats["unique_ratio"] <= 0.9:
            logging.warning(f"unique ratio {stats['unique_ratio']:.2f} outside 0.60-0.90")


def remove_duplicates(relations):
    """Return (unique relations in first-seen order, stats)."""
    remover = DuplicateRemover()
    unique = list(remover.attach(relations))
    remover.done()
    return unique, remover.stats()


def online_duplicate_check(rel, current_q, policy, width, height, qmin=None):
    """Decide whether rel, found at current_q, was already found earlier.

    Returns True to keep.  A relation is dropped when another admissible
    special-q, built from its own primes on the special-q side and smaller
    than current_q, holds (a, b) inside its sieve region.
    """
    side = current_q.side
    qmin = qmin if qmin is not None else 2
    primes = set(rel.primes[side])
    if policy.kind == "prime":
        factor_sets = [(p,) for p in sorted(primes) if qmin <= p < current_q.q]
    else:
        # factors of a composite q sit in [pmin, pmax], far below qmin
        pmax = policy.pmax or current_q.q
        candidates = sorted(p for p in primes if policy.pmin <= p <= pmax)
        factor_sets = [
            (p1, p2)
            for i, p1 in enumerate(candidates)
            for p2 in candidates[i + 1 :]
            if qmin <= p1 * p2 < current_q.q
        ]

    for factors in factor_sets:
        if tuple(factors) == current_q.q_factors or not policy.admits(factors):
            continue
        if any(rel.b % p == 0 for p in factors):
            continue
        q = math.prod(factors)
        root = (rel.a * invert(rel.b, q)) % q
        earlier = SpecialQ.build(side, factors, root)
        if earlier.in_region(rel.a, rel.b, width, height):
            return False
    return True


######################
#  Free relations    #
######################


def generate_free_relations(pair, bound):
    """Relations for primes p <= bound that split completely on both sides."""
    out = []
    for p in primes_between(2, bound + 1):
        if pair.f0.lc % p == 0 or pair.f1.lc % p == 0:
            continue
        if splits_completely(pair.f0, p) and splits_completely(pair.f1, p):
            out.append(Relation(p, 0, ((p,) * pair.f0.degree, (p,) * pair.f1.degree)))
    logging.info(f"{len(out)} free relations below {bound}")
    return out


######################
#  Statistics        #
######################


def relation_stats(relations, lims):
    """Raw/unique counts, large-prime histograms, average and range of weight."""
    remover = DuplicateRemover()
    hists = [LargePrimeHistogram(0, lims[0]), LargePrimeHistogram(1, lims[1])]
    weight = Average(Relation.weight)
    weight_range = MinMax(Relation.weight)
    stream = remover.attach(relations)
    for fltr in hists + [weight, weight_range]:
        stream = fltr.attach(stream)
    for _ in stream:
        pass
    stats = remover.stats()
    stats["large_primes"] = [h.value() for h in hists]
    stats["average_weight"] = weight.value() if remover.unique else 0.0
    stats["weight_range"] = weight_range.value()
    return stats
