import flint
import numpy as np
import pytest

from sievebrush.arith import PolyZ
from sievebrush.polyselect import PolyPair
from sievebrush.relations import Relation
from sievebrush.sqrt import (
    CharacterSet,
    Dependency,
    SqrtError,
    algebraic_sqrt,
    apply_characters,
    build_characters,
    character_matrix,
    extract_factors,
    find_inert_prime,
    monic_form,
    rational_sqrt,
    read_dependencies,
    square_root_phase,
    write_dependencies,
)
from sievebrush.wiedemann import KernelError

from conftest import TOY_N


def _doubled(pairs):
    rels = [Relation(a, b) for a, b in pairs]
    return rels + rels


def test_monic_form():
    assert monic_form(PolyZ((5, 2, 3))) == PolyZ((15, 2, 1))
    assert monic_form(PolyZ((7, 0, 0, 2))) == PolyZ((28, 0, 0, 1))
    g = PolyZ((99, 3600, 0, 1))
    assert monic_form(g) == g


def test_find_inert_prime():
    assert find_inert_prime(PolyZ((1, 0, 1))) == 3
    assert find_inert_prime(PolyZ((1, 0, 1)), avoid=3) == 7
    g = PolyZ((99, 3600, 0, 1))
    q = find_inert_prime(g)
    _, factors = flint.nmod_poly([c % q for c in g.coeffs], q).factor()
    assert len(factors) == 1 and factors[0][0].degree() == 3
    # x^2 - 1 splits everywhere
    assert find_inert_prime(PolyZ((-1, 0, 1)), bound=1000) is None


def test_extract_factors():
    assert extract_factors(4, 1, 15) == (3, 5)
    assert extract_factors(4, 4, 15) is None
    assert extract_factors(4, 11, 15) is None


def test_rational_sqrt():
    f0 = PolyZ((0, 1))
    rels = [Relation(2, 1), Relation(8, 1), Relation(3, 1), Relation(27, 1)]
    assert rational_sqrt(rels, f0, 0, 1000) == 36
    assert rational_sqrt(rels, f0, 0, 7) == 1
    with pytest.raises(SqrtError, match="not a perfect square"):
        rational_sqrt(rels[:3], f0, 0, 1000)
    with pytest.raises(SqrtError, match="negative"):
        rational_sqrt([Relation(-2, 1), Relation(8, 1)], f0, 0, 1000)


@pytest.mark.parametrize(
    "pair",
    [
        # monic cubic
        PolyPair(PolyZ((-10000, 1)), PolyZ((99, 3600, 0, 1)), 10000, TOY_N),
        # non-monic f1
        PolyPair(PolyZ((-3, 1)), PolyZ((7, 5, 0, 3)), 3, 103),
        # non-monic f0 and an imaginary quadratic f1
        PolyPair(PolyZ((-3, 2)), PolyZ((1, 0, 1)), 8, 13),
    ],
)
def test_algebraic_sqrt_of_a_square(pair):
    N = pair.modulus
    rels = _doubled([(4, 1), (-7, 2), (11, 5), (1, 3), (17, 4)])
    x = rational_sqrt(rels, pair.f0, pair.m, N)
    y = algebraic_sqrt(rels, pair.f1, N, pair)
    assert (x * x - y * y) % N == 0


def test_algebraic_sqrt_with_free_relation():
    pair = PolyPair(PolyZ((-10000, 1)), PolyZ((99, 3600, 0, 1)), 10000, TOY_N)
    rels = [Relation(7, 0), Relation(3, 1)] * 2
    x = rational_sqrt(rels, pair.f0, pair.m, TOY_N)
    y = algebraic_sqrt(rels, pair.f1, TOY_N, pair)
    assert (x * x - y * y) % TOY_N == 0


def test_algebraic_sqrt_odd_dependency():
    pair = PolyPair(PolyZ((-3, 2)), PolyZ((1, 0, 1)), 8, 13)
    with pytest.raises(SqrtError, match="odd"):
        algebraic_sqrt([Relation(3, 1)] * 3, pair.f1, 13, pair)


def test_linear_algebraic_side():
    pair = PolyPair(PolyZ((-5, 1)), PolyZ((-5, 1)), 5, 7)
    rels = _doubled([(2, 1), (9, 1)])
    assert algebraic_sqrt(rels, pair.f1, 7, pair) == rational_sqrt(rels, pair.f0, 5, 7)


def test_characters(toy_pair):
    chars = build_characters(toy_pair, k=8, lpb=14)
    assert chars.k == 8
    assert chars.width == 11
    assert all(q > 1 << 14 for q, _ in chars.ideals)
    for q, s in chars.ideals:
        assert toy_pair.f1.eval_mod(s, q) == 0

    rel = Relation(3, 1)
    free = Relation(7, 0)
    bits = character_matrix([rel, free], chars, toy_pair)
    assert bits.shape == (2, 11)
    # F0(3, 1) = 3 - 10000 < 0, both parity bits
    assert bits[0, -3:].tolist() == [1, 1, 0]
    assert bits[1, -3:].tolist() == [0, 1, 1]


def test_character_bits_are_legendre_symbols():
    pair = PolyPair(PolyZ((-2, 1)), PolyZ((1, 0, 1)), 2, 5)
    chars = CharacterSet(((13, 5),))
    # 3 - 5 = -2 is a non-residue mod 13, 6 - 5 = 1 is a residue
    assert chars.bits(Relation(3, 1), pair)[0] == 1
    assert chars.bits(Relation(6, 1), pair)[0] == 0


def test_apply_characters_pairs_up_relations(toy_pair):
    chars = build_characters(toy_pair, k=4, lpb=14)
    rels = [Relation(3, 1), Relation(3, 1), Relation(5, 1)]
    deps = apply_characters([{0}, {1}], rels, chars, toy_pair)
    assert deps == [Dependency((0, 1))]
    assert deps[0].characters_ok(rels, chars, toy_pair)
    with pytest.raises(KernelError):
        apply_characters([set()], rels, chars, toy_pair)
    with pytest.raises(KernelError):
        apply_characters([{2}], rels, chars, toy_pair)


def test_dependency_is_square(toy_pair):
    rels = [Relation(3, 1, ((13, 769), (2, 3, 3, 607))),
            Relation(5, 1, ((5, 1999), (2, 2, 2, 2, 17, 67)))]
    assert Dependency((0, 0)).is_square(rels + rels, toy_pair)
    assert Dependency((0, 2)).is_square(rels + rels, toy_pair)
    assert not Dependency((0, 1)).is_square(rels, toy_pair)
    assert len(Dependency((0, 2))) == 2


def test_dependency_file(tmp_path):
    deps = [Dependency((0, 3, 8)), Dependency((1, 2))]
    path = tmp_path / "deps.txt"
    write_dependencies(deps, path)
    assert path.read_text() == "0 3 8\n1 2\n"
    assert read_dependencies(path) == deps


def test_square_root_phase_reports_trivial_roots(caplog):
    pair = PolyPair(PolyZ((-10000, 1)), PolyZ((99, 3600, 0, 1)), 10000, TOY_N)
    rels = _doubled([(3, 1), (-7, 2)])
    deps = [Dependency((0, 1, 2)), Dependency((0, 1, 2, 3))]
    factors, results = square_root_phase(deps, rels, pair, TOY_N)
    assert "dependency of 3 relations" in caplog.text
    assert len(results) == 1
    if factors is None:
        assert results[0].gcd in (1, TOY_N)
    else:
        assert factors[0] * factors[1] == TOY_N


def test_character_matrix_dtype(toy_pair):
    chars = build_characters(toy_pair, k=2, lpb=14)
    m = character_matrix([], chars, toy_pair)
    assert m.shape == (0, 5)
    assert m.dtype == np.uint8
