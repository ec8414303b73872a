import dataclasses
import random

import pytest
import sympy

from sievebrush import run_recipe
from sievebrush.arith import EcmChain
from sievebrush.batch import (
    SurvivorBatcher,
    batch_process_survivors,
    batch_smooth_part,
    build_prime_product,
    product_tree,
    remainder_tree,
)
from sievebrush.emitters import SurvivorEmitter
from sievebrush.errors import DomainError
from sievebrush.sieve import Survivor, sieve_range

from conftest import TOY_QMAX, TOY_QMIN


def _trial_smooth_part(v, bound):
    smooth = 1
    for p in sympy.primerange(2, bound + 1):
        while v % p == 0:
            v //= p
            smooth *= p
    return smooth, v


def test_product_tree():
    tree = product_tree([2, 3, 5, 7])
    assert tree[-1] == [210]
    assert [int(x) for x in tree[1]] == [6, 35]
    assert product_tree([2, 5])[-1] == [10]
    assert product_tree([2])[-1] == [2]


def test_remainder_tree():
    tree = product_tree([7, 11, 13])
    assert [int(r) for r in remainder_tree(1000, tree)] == [1000 % 7, 1000 % 11, 1000 % 13]


def test_prime_product():
    P = build_prime_product(7)
    assert P.value == 210
    assert P.primes == [2, 3, 5, 7]
    assert P.bits == 8
    assert build_prime_product(2).value == 2
    with pytest.raises(DomainError):
        build_prime_product(1)


def test_prime_product_restricted_to_roots():
    # x^2 + 1 has no roots mod 3, 7, 11
    from sievebrush.arith import PolyZ

    P = build_prime_product(13, PolyZ((1, 0, 1)))
    assert P.primes == [2, 5, 13]


def test_smooth_part_examples():
    P = build_prime_product(7)
    assert batch_smooth_part([84, 35, 121], P) == [(84, 1), (35, 1), (1, 121)]
    assert batch_smooth_part([1], P) == [(1, 1)]
    assert batch_smooth_part([], P) == []
    with pytest.raises(DomainError):
        batch_smooth_part([0], P)


def test_smooth_part_matches_trial_division():
    rng = random.Random(1)
    bound = 10**4
    P = build_prime_product(bound)
    values = [rng.randrange(1, 1 << 64) for _ in range(2000)]
    # some values with high prime powers
    values += [2**40 * 3, 7**12 * 10007, 9973**3 * 10009]
    assert batch_smooth_part(values, P) == [_trial_smooth_part(v, bound) for v in values]


def test_smooth_part_larger_bound():
    rng = random.Random(2)
    P = build_prime_product(10**6)
    values = [rng.randrange(1, 1 << 80) for _ in range(50)]
    for v, (smooth, cof) in zip(values, batch_smooth_part(values, P)):
        assert smooth * cof == v
        assert all(p > 10**6 for p in sympy.primefactors(cof))
        assert all(p <= 10**6 for p in sympy.primefactors(smooth))


def test_batcher_flushes_when_balanced():
    P = build_prime_product(100)
    batcher = SurvivorBatcher(0, P)
    flags = [batcher.add(Survivor(i, 1, (1 << 40, 1))) for i in range(1, 10)]
    assert flags.index(True) == -(-P.bits // 41) - 1
    out = batcher.flush()
    assert [s.residues[0] for s in out] == [1] * 9
    assert batcher.flush() == []


def test_empty_survivor_file(tmp_path, toy_pair, toy_params):
    path = tmp_path / "surv.0"
    path.write_text("")
    chain = EcmChain.desk(bits=20)
    assert batch_process_survivors([str(path)], 0, toy_params, chain, toy_pair) == []


def test_malformed_survivor_lines_are_skipped(tmp_path, toy_pair, toy_params, caplog):
    path = tmp_path / "surv.0"
    path.write_text("not a survivor\n1,2:3\n")
    chain = EcmChain.desk(bits=20)
    assert batch_process_survivors([str(path)], 0, toy_params, chain, toy_pair) == []
    assert "2 malformed survivor lines skipped" in caplog.text


def test_batch_side_matches_two_sided_sieve(tmp_path, toy_pair, toy_params, toy_policy,
                                            toy_fbs, toy_run):
    params = dataclasses.replace(toy_params, batch_side=0)
    run = sieve_range(toy_pair, params, toy_policy, TOY_QMIN, TOY_QMAX, *toy_fbs)
    assert run.survivors and not run.relations

    emitter = SurvivorEmitter(tmp_path / "surv", per_file=500)
    run_recipe(run.survivors, emitter)
    assert len(emitter.paths) == -(-len(run.survivors) // 500)

    chain = EcmChain.desk(bits=20)
    batched = batch_process_survivors(emitter.paths, 0, params, chain, toy_pair)
    batched_keys = {r.key() for r in batched}
    sieved_keys = {r.key() for r in toy_run.relations}
    assert sieved_keys <= batched_keys
    assert len(batched_keys) <= 1.05 * len(sieved_keys)


def test_batch_bound_below_large_prime_bound():
    from sievebrush.sieve import SieveParams

    params = SieveParams(I=16, lim0=1 << 28, lim1=1 << 28, lpb0=35, lpb1=35, mfb0=70,
                         mfb1=70, batch_side=0, batch_lim=1 << 28)
    assert params.batch_lim < 1 << params.lpb0
