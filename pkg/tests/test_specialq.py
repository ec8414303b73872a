import itertools

from sievebrush.arith import PolyZ
from sievebrush.fixtures import DLP240_F0
from sievebrush.specialq import SpecialQ, SpecialQPolicy, enumerate_special_q


def _check(sq, f):
    assert sq.q == sq.q_factors[0] * (sq.q_factors[1] if sq.is_composite else 1)
    assert f(sq.root) % sq.q == 0
    (u0, u1), (v0, v1) = sq.basis
    assert abs(u0 * v1 - u1 * v0) == sq.q
    assert len(set(sq.q_factors)) == len(sq.q_factors)


def test_prime_special_q():
    f = PolyZ((1, 0, 1))
    qs = list(enumerate_special_q(10, 30, f, SpecialQPolicy(side=1)))
    assert [(sq.q, sq.root) for sq in qs] == [(13, 5), (13, 8), (17, 4), (17, 13), (29, 12), (29, 17)]
    for sq in qs:
        _check(sq, f)
        assert sq.side == 1


def test_composite_special_q():
    f = PolyZ((1, 0, 1))
    policy = SpecialQPolicy(side=0, kind="composite", pmin=100, pmax=10**4)
    qs = list(enumerate_special_q(10**5, 2 * 10**5, f, policy))
    assert qs
    assert [sq.q for sq in qs] == sorted(sq.q for sq in qs)
    for sq in qs:
        _check(sq, f)
        q1, q2 = sq.q_factors
        assert 100 <= q1 < q2 <= 10**4
        assert 10**5 <= sq.q < 2 * 10**5
    # four roots per q: two from each factor
    counts = {q: len(list(group)) for q, group in itertools.groupby(sq.q for sq in qs)}
    assert set(counts.values()) == {4}


def test_composite_special_q_published_range():
    policy = SpecialQPolicy(side=0, kind="composite", pmin=8192, pmax=10**8)
    stream = enumerate_special_q(150 * 10**9, 300 * 10**9, DLP240_F0, policy)
    for sq in itertools.islice(stream, 20):
        assert len(sq.q_factors) == 2
        _check(sq, DLP240_F0)


def test_composite_special_q_has_two_factors():
    # pmin^3 <= qmin would allow three factors, the policy still takes two
    policy = SpecialQPolicy(side=1, kind="composite", pmin=2)
    f = PolyZ((-2, 0, 1))
    qs = list(enumerate_special_q(1000, 1100, f, policy))
    assert qs
    assert all(len(sq.q_factors) == 2 for sq in qs)


def test_unsatisfiable_policy():
    policy = SpecialQPolicy(side=1, kind="composite", pmin=1000)
    assert list(enumerate_special_q(10, 5000, PolyZ((1, 0, 1)), policy)) == []
    assert list(enumerate_special_q(30, 10, PolyZ((1, 0, 1)), SpecialQPolicy())) == []


def test_policy_admits():
    composite = SpecialQPolicy(kind="composite", pmin=10, pmax=100)
    assert composite.admits((11, 13))
    assert not composite.admits((11,))
    assert not composite.admits((11, 11))
    assert not composite.admits((7, 13))
    assert SpecialQPolicy().admits((101,))


def test_lattice_membership():
    sq = SpecialQ.build(1, (13,), 5)
    for i, j in ((1, 0), (0, 1), (3, -2), (-7, 5)):
        a, b = sq.ab(i, j)
        assert (a - 5 * b) % 13 == 0
        assert sq.ij(a, b) == (i, j)
    assert sq.ij(1, 1) is None
    assert sq.ideals() == [(1, 13, 5)]
