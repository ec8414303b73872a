from sievebrush.relations import Relation, relation_stats
from sievebrush.stats import Sum, Average, Median, MinMax, Histogram, LargePrimeHistogram


def _relations():
    return [
        Relation(1, 2, ((3,), (5, 7))),
        Relation(5, 1, ((2, 2, 1009), (11,))),
        Relation(-1, 2, ((3,), (5, 7, 1013))),
    ]


def test_sum_of_attribute():
    fltr = Sum("b")
    list(fltr.attach(_relations()))
    assert fltr.value() == 5


def test_average_weight():
    fltr = Average(Relation.weight)
    assert fltr.value() is None
    list(fltr.attach(_relations()))
    assert fltr.value() == 11 / 3


def test_median_odd_and_even():
    fltr = Median("a")
    list(fltr.attach(_relations()))
    assert fltr.value() == 1

    fltr = Median("a")
    list(fltr.attach(_relations()[:2]))
    assert fltr.value() == 3


def test_minmax_on_dict_records():
    fltr = MinMax("b")
    list(fltr.attach([{"b": 2}, {"b": 10}, {"b": 5}]))
    assert fltr.value() == (2, 10)


def test_test_argument_filters_records():
    fltr = Sum("a", test=lambda rel: rel.b == 2)
    list(fltr.attach(_relations()))
    assert fltr.value() == 0


def test_stats_pass_records_through():
    assert list(MinMax("a").attach(_relations())) == _relations()


def test_histogram_bars_are_scaled():
    fltr = Histogram("b")
    fltr.label_length = 1
    fltr.width = 4
    list(fltr.attach(_relations()))
    assert fltr.in_order() == [(1, 1), (2, 2)]
    assert fltr.most_common(1) == [(2, 2)]
    assert str(fltr) == "1 ** 1\n2 **** 2\n"


def test_empty_histogram_prints_nothing():
    assert str(Histogram("a")) == ""


def test_large_prime_histogram():
    fltr = LargePrimeHistogram(0, 1000)
    list(fltr.attach(_relations()))
    assert fltr.value() == {0: 2, 1: 1}


def test_relation_stats():
    stats = relation_stats(_relations(), (1000, 1000))
    # (-1, 2) is not the same pair as (1, 2)
    assert stats["raw"] == 3
    assert stats["unique"] == 3
    assert stats["large_primes"][1] == {0: 2, 1: 1}
    assert stats["average_weight"] == 11 / 3
    assert stats["weight_range"] == (3, 4)
