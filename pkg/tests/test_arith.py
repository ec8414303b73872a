import math
import random

import pytest
import sympy

from sievebrush.arith import (
    EcmChain,
    PolyZ,
    Stage,
    factor_small,
    gauss_reduce,
    homogeneous_norm,
    is_prime,
    is_safe_prime,
    lift_roots,
    modexp,
    poly_roots_mod_p,
    resultant,
    splits_completely,
)
from sievebrush.errors import DomainError
from sievebrush.fixtures import DLP240_F0, DLP240_F1, DLP240_G, DLP240_LOG, DLP240_P, DLP240_Y


def test_modexp():
    assert modexp(2, 10, 1000) == 24
    assert modexp(5, 0, 7) == 1
    assert modexp(DLP240_G, DLP240_LOG, DLP240_P) == DLP240_Y


def test_modexp_bad_modulus():
    with pytest.raises(DomainError):
        modexp(2, 3, 1)


def test_modexp_is_a_homomorphism():
    rng = random.Random(1)
    for _ in range(100):
        m = rng.randrange(2, 1 << 80)
        g, a, b = rng.randrange(m), rng.randrange(1 << 64), rng.randrange(1 << 64)
        assert modexp(g, a + b, m) == modexp(g, a, m) * modexp(g, b, m) % m


def test_is_prime():
    assert is_prime(97)
    assert not is_prime(91)
    assert not is_prime(0) and not is_prime(1)
    assert is_prime(DLP240_P)
    assert is_prime((DLP240_P - 1) // 2)
    assert is_safe_prime(DLP240_P)
    assert not is_safe_prime(13)


def test_factor_small():
    chain = EcmChain.desk()
    assert factor_small(720, chain) == ([(2, 4), (3, 2), (5, 1)], 1)
    assert factor_small(1, chain) == ([], 1)


def test_factor_small_semiprime():
    a = sympy.nextprime(1 << 24)
    b = sympy.nextprime(a + 1000)
    factors, cofactor = factor_small(a * b, EcmChain.desk(30))
    assert factors == [(a, 1), (b, 1)]
    assert cofactor == 1


def test_factor_small_reassembles():
    rng = random.Random(7)
    chain = EcmChain.desk(20).truncated(2)
    for _ in range(50):
        n = rng.randrange(1, 1 << 60)
        factors, cofactor = factor_small(n, chain)
        assert math.prod(p**e for p, e in factors) * cofactor == n
        assert all(is_prime(p) for p, _ in factors)


def test_chain_must_be_ordered():
    with pytest.raises(DomainError):
        EcmChain((Stage("ecm", 500, bits=30), Stage("trial", 100, bits=10)))
    with pytest.raises(DomainError):
        Stage("squfof", 10)


def test_homogeneous_norm():
    f = PolyZ((1, 0, 1))
    assert homogeneous_norm(f, 1, 1) == 2
    assert homogeneous_norm(f, 1, 0) == 1
    assert homogeneous_norm(DLP240_F1, 1, 1) == 348


def test_homogeneous_norm_is_a_resultant():
    rng = random.Random(3)
    for _ in range(1000):
        d = rng.randint(1, 6)
        f = PolyZ(tuple(rng.randint(-(1 << 32), 1 << 32) for _ in range(d)) + (rng.randint(1, 1 << 32),))
        a, b = rng.randint(-(1 << 20), 1 << 20), rng.randint(1, 1 << 20)
        assert abs(homogeneous_norm(f, a, b)) == abs(resultant(PolyZ((a, -b)), f))


def test_resultant():
    assert resultant(PolyZ((-2, 1)), PolyZ((1, 0, 1))) == 5
    assert resultant(PolyZ((0, 1)), PolyZ((0, 1))) == 0
    with pytest.raises(DomainError):
        resultant(PolyZ(()), PolyZ((0, 1)))


def test_resultant_matches_sympy():
    x = sympy.Symbol("x")
    rng = random.Random(11)
    for _ in range(200):
        f, g = (
            PolyZ(tuple(rng.randint(-(1 << 40), 1 << 40) for _ in range(rng.randint(2, 7))))
            for _ in range(2)
        )
        want = sympy.resultant(sympy.Poly(list(reversed(f.coeffs)), x),
                               sympy.Poly(list(reversed(g.coeffs)), x))
        assert resultant(f, g) == int(want)


def test_resultant_of_published_pair():
    # |Res(f0, f1)| = 540 p for the DLP-240 pair
    assert abs(resultant(DLP240_F0, DLP240_F1)) == 540 * DLP240_P


def test_poly_roots_mod_p():
    f = PolyZ((1, 0, 1))
    assert poly_roots_mod_p(f, 5) == ([2, 3], False)
    assert poly_roots_mod_p(f, 3) == ([], False)
    # 3x + 4 mod 7: x = -4/3 = 1
    assert poly_roots_mod_p(PolyZ((4, 3)), 7) == ([1], False)
    # leading coefficient 39 = 3 * 13
    roots, projective = poly_roots_mod_p(DLP240_F1, 13)
    assert projective
    assert all(DLP240_F1(r) % 13 == 0 for r in roots)


def test_poly_roots_large_prime():
    p = (1 << 127) - 1
    f = PolyZ((-4, 0, 1))
    assert poly_roots_mod_p(f, p) == ([2, p - 2], False)


def test_splits_and_lifts():
    f = PolyZ((1, 0, 1))
    assert splits_completely(f, 13)
    assert not splits_completely(f, 7)
    assert all(f(r) % 125 == 0 for r in lift_roots(f, 5, 3))
    assert len(lift_roots(f, 5, 3)) == 2


def test_gauss_reduce():
    u, v = gauss_reduce((11, 0), (3, 1))
    assert u == (3, 1)
    assert v[0] ** 2 + v[1] ** 2 <= 13
    assert abs(u[0] * v[1] - u[1] * v[0]) == 11

    u, v = gauss_reduce((1, 0), (0, 1))
    assert {(abs(u[0]), abs(u[1])), (abs(v[0]), abs(v[1]))} == {(1, 0), (0, 1)}

    u, v = gauss_reduce((100, 1), (99, 1))
    assert (1, 0) in {u, v} or (-1, 0) in {u, v}


def test_gauss_reduce_properties():
    rng = random.Random(11)
    for _ in range(500):
        u = (rng.randint(-(1 << 30), 1 << 30), rng.randint(-(1 << 30), 1 << 30))
        v = (rng.randint(-(1 << 30), 1 << 30), rng.randint(-(1 << 30), 1 << 30))
        det = u[0] * v[1] - u[1] * v[0]
        if det == 0:
            continue
        r, s = gauss_reduce(u, v)
        nr, ns = r[0] ** 2 + r[1] ** 2, s[0] ** 2 + s[1] ** 2
        assert abs(r[0] * s[1] - r[1] * s[0]) == abs(det)
        assert nr <= ns
        assert 2 * abs(r[0] * s[0] + r[1] * s[1]) <= nr


def test_gauss_reduce_dependent():
    with pytest.raises(DomainError):
        gauss_reduce((2, 4), (1, 2))
