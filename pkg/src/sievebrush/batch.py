"""
    Batch smoothness detection: product and remainder trees over gmpy2
    integers extract the smooth part of many norms at once, replacing
    sieving on one side.
"""

from dataclasses import dataclass, field
import logging

import gmpy2

from sievebrush.arith import poly_roots_mod_p, primes_between
from sievebrush.errors import DomainError


def product_tree(values):
    """Levels of the product tree, leaves first, root last."""
    tree = [[gmpy2.mpz(v) for v in values]]
    while len(tree[-1]) > 1:
        level = tree[-1]
        tree.append(
            [
                level[i] * level[i + 1] if i + 1 < len(level) else level[i]
                for i in range(0, len(level), 2)
            ]
        )
    return tree


def remainder_tree(x, tree):
    """x mod every leaf of tree."""
    rems = [x % tree[-1][0]]
    for level in reversed(tree[:-1]):
        rems = [rems[i // 2] % level[i] for i in range(len(level))]
    return rems


@dataclass
class PrimeProduct:
    bound: int
    primes: list
    tree: list = field(repr=False)

    @property
    def value(self):
        return self.tree[-1][0]

    @property
    def bits(self):
        return int(self.value.bit_length())


def build_prime_product(bound, f=None):
    """Product of the primes <= bound.

    With f, only primes where f has an affine root or divides the leading
    coefficient are kept: no other prime can divide F(a, b) for coprime a, b.
    """
    if bound < 2:
        raise DomainError(f"prime product bound must be >= 2, got {bound}")
    primes = primes_between(2, bound + 1)
    if f is not None:
        primes = [p for p in primes if f.lc % p == 0 or poly_roots_mod_p(f, p)[0]]
    logging.debug(f"prime product up to {bound}: {len(primes)} primes")
    return PrimeProduct(bound, primes, product_tree(primes or [1]))


def batch_smooth_part(values, P):
    """[(smooth_part, cofactor)] for each value, smooth over P's primes."""
    if not values:
        return []
    if any(v < 1 for v in values):
        raise DomainError("batch_smooth_part needs values >= 1")
    tree = product_tree(values)
    rems = remainder_tree(P.value, tree)
    out = []
    for v, z in zip(tree[0], rems):
        g = gmpy2.gcd(z, v)
        smooth = gmpy2.mpz(1)
        while g > 1:
            v //= g
            smooth *= g
            g = gmpy2.gcd(v, g)
        out.append((int(smooth), int(v)))
    return out


class SurvivorBatcher:
    """Accumulate survivors until their product balances the prime product.

    The batch is flushed once the summed bit size of the pending residues
    reaches bits(P) (times `ratio`).
    """

    def __init__(self, side, P, ratio=1.0):
        self.side = side
        self.P = P
        self.limit = int(P.bits * ratio)
        self.pending = []
        self.pending_bits = 0

    def add(self, survivor):
        self.pending.append(survivor)
        self.pending_bits += survivor.residues[self.side].bit_length()
        return self.pending_bits >= self.limit

    def flush(self):
        """Return the pending survivors with the batch side smooth part removed."""
        if not self.pending:
            return []
        if self.pending_bits * 10 < self.P.bits or self.pending_bits > 10 * self.P.bits:
            logging.warning(
                f"unbalanced batch: {self.pending_bits} survivor bits "
                f"against a {self.P.bits}-bit prime product"
            )
        parts = batch_smooth_part([s.residues[self.side] for s in self.pending], self.P)
        out = [s.with_residue(self.side, cof) for s, (_, cof) in zip(self.pending, parts)]
        self.pending = []
        self.pending_bits = 0
        return out


def batch_process_survivors(files, side, params, chain, pair, prime_product=None):
    """Relations from survivor files whose `side` was left unsieved.

    Primes up to params.batch_lim come out of the product tree; the
    remaining cofactors go through cofactorize with `chain` on both sides.
    Malformed survivor lines are counted and skipped.
    """
    from sievebrush.sieve import cofactorize
    from sievebrush.sources import SurvivorSource

    P = prime_product or build_prime_product(params.batch_lim, pair.poly(side))
    source = SurvivorSource(files)
    batcher = SurvivorBatcher(side, P)
    chains = (chain, chain)
    relations = []
    seen = 0

    def drain(batch):
        for s in batch:
            rel = cofactorize(s, params, chains, pair)
            if rel is not None:
                relations.append(rel)

    for survivor in source:
        seen += 1
        if batcher.add(survivor):
            drain(batcher.flush())
    drain(batcher.flush())
    if source.rejected:
        logging.warning(f"{len(source.rejected)} malformed survivor lines skipped")
    logging.info(f"batch side {side}: {seen} survivors -> {len(relations)} relations")
    return relations
