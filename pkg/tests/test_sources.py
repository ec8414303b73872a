from io import StringIO

import pytest

from sievebrush.arith import PolyZ
from sievebrush.relations import Relation, RelationFormatError
from sievebrush.sieve import Survivor
from sievebrush.sources import RelationSource, SurvivorSource, SpecialQSource
from sievebrush.specialq import SpecialQPolicy


def _get_relation_file():
    data = """# relations of a toy run
1,2:3:5,7

-5,1:2,2:b
this is not a relation
3,1:2:zz
"""
    return StringIO(data)


def test_relation_source():
    source = RelationSource(_get_relation_file())
    rels = list(source)

    assert rels == [Relation(1, 2, ((3,), (5, 7))), Relation(-5, 1, ((2, 2), (11,)))]
    assert [lineno for lineno, _, _ in source.rejected] == [5, 6]
    assert all(isinstance(e, RelationFormatError) for _, _, e in source.rejected)


def test_relation_source_strict():
    source = RelationSource(_get_relation_file(), strict=True)
    with pytest.raises(RelationFormatError, match="line 5"):
        list(source)


def test_relation_source_files(tmp_path):
    (tmp_path / "rels.0").write_text("1,2:3:5,7\n")
    (tmp_path / "rels.1").write_text("4,3:2:d\n")
    paths = [str(tmp_path / "rels.0"), str(tmp_path / "rels.1"), str(tmp_path / "missing")]

    assert [r.key() for r in RelationSource(paths)] == [(1, 2), (4, 3)]


def test_survivor_source():
    source = SurvivorSource(StringIO("12,5:1:ff\n-3,7:a:1\nbroken\n"))

    assert list(source) == [Survivor(12, 5, (1, 255)), Survivor(-3, 7, (10, 1))]
    assert len(source.rejected) == 1


def test_special_q_source():
    f = PolyZ((-2, 0, 1))  # x^2 - 2
    policy = SpecialQPolicy(side=1, kind="prime")
    qs = list(SpecialQSource(100, 130, f, policy))

    # x^2 - 2 has roots modulo the primes that are +-1 mod 8
    assert sorted({sq.q for sq in qs}) == [103, 113, 127]
    for sq in qs:
        assert f(sq.root) % sq.q == 0
