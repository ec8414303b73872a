import unittest
import types
from sievebrush.filters import (
    Filter,
    YieldFilter,
    ConditionalFilter,
    FunctionFilter,
    Sampler,
    Unique,
    ValidationError,
)
from sievebrush.relations import Relation, format_relation


class RecordingRecipe:
    def __init__(self):
        self.rejects = []

    def reject_record(self, record, exception):
        self.rejects.append((record, exception))


class Negate(Filter):
    def process_record(self, rel):
        return Relation(-rel.a, rel.b, rel.primes)


class DropFree(Filter):
    def process_record(self, rel):
        return None if rel.is_free else rel


class SplitSides(YieldFilter):
    def process_record(self, rel):
        yield from rel.primes[0]
        yield from rel.primes[1]


class HalfFails(YieldFilter):
    def process_record(self, n):
        yield n
        if n % 2:
            raise ArithmeticError(n)


class PositiveA(ConditionalFilter):
    def test_record(self, rel):
        return rel.a > 0


class StrictPositiveA(PositiveA):
    validator = True


class FilterTestCase(unittest.TestCase):
    def _relations(self):
        return [
            Relation(1, 2, ((3,), (5, 7))),
            Relation(5, 1, ((2, 2), (11,))),
            Relation(-3, 1, ((2,), (13,))),
            Relation(7, 0, ((7,), (7, 7))),
            Relation(1, 2, ((3,), (5, 7))),
        ]

    def test_filter_is_a_generator(self):
        result = Negate().attach(self._relations()[:2])
        self.assertEqual(type(result), types.GeneratorType)
        self.assertEqual([r.a for r in result], [-1, -5])

    def test_returning_none_drops_the_record(self):
        kept = list(DropFree().attach(self._relations()))
        self.assertEqual(len(kept), 4)
        self.assertFalse(any(r.is_free for r in kept))

    def test_exception_rejects_record_and_stream_continues(self):
        recipe = RecordingRecipe()
        result = list(Negate().attach([self._relations()[0], None, self._relations()[1]],
                                      recipe=recipe))

        self.assertEqual([r.a for r in result], [-1, -5])
        self.assertEqual(len(recipe.rejects), 1)
        record, exc = recipe.rejects[0]
        self.assertIsNone(record)
        self.assertIsInstance(exc, AttributeError)

    def test_reject_without_recipe_is_silent(self):
        self.assertEqual(list(Negate().attach([None])), [])

    def test_yield_filter(self):
        self.assertEqual(list(SplitSides().attach(self._relations()[:2])),
                         [3, 5, 7, 2, 2, 11])

    def test_yield_filter_failure_rejects_whole_record(self):
        recipe = RecordingRecipe()
        self.assertEqual(list(HalfFails().attach([2, 3, 4], recipe=recipe)), [2, 4])
        self.assertEqual([r for r, _ in recipe.rejects], [3])

    def test_conditional_filter(self):
        kept = list(PositiveA().attach(self._relations()))
        self.assertEqual([r.a for r in kept], [1, 5, 7, 1])

    def test_conditional_validator(self):
        recipe = RecordingRecipe()
        kept = list(StrictPositiveA().attach(self._relations(), recipe=recipe))

        self.assertEqual(len(kept), 4)
        record, exc = recipe.rejects[0]
        self.assertEqual(record.a, -3)
        self.assertIsInstance(exc, ValidationError)
        self.assertIs(exc.record, record)

    def test_function_filter(self):
        ff = FunctionFilter(format_relation)
        lines = list(ff.attach(self._relations()[:2]))
        self.assertEqual(lines, ["1,2:3:5,7", "5,1:2,2:b"])
        self.assertEqual(str(ff), "FunctionFilter( format_relation )")

    def test_unique_filter(self):
        kept = list(Unique(key=Relation.key).attach(self._relations()))
        self.assertEqual(kept, self._relations()[:4])

    def test_sampler_fraction(self):
        s = Sampler(0.1, seed=7)
        kept = list(s.attach(range(10000)))

        self.assertEqual(len(kept), s.sampled)
        self.assertTrue(800 < len(kept) < 1200)

    def test_sampler_minimum(self):
        # 1% of 20 records is below the minimum of 10: keep half of them
        s = Sampler(0.01, minimum=10, total=20, seed=1)
        kept = list(s.attach(range(20)))
        self.assertTrue(0 < len(kept) < 20)

        # fewer records than the minimum: keep everything
        s = Sampler(0.01, minimum=10, total=5)
        self.assertEqual(list(s.attach(range(5))), [0, 1, 2, 3, 4])

    def test_sampler_is_seeded(self):
        a = list(Sampler(0.3, seed=3).attach(range(100)))
        b = list(Sampler(0.3, seed=3).attach(range(100)))
        self.assertEqual(a, b)


if __name__ == "__main__":
    unittest.main()
