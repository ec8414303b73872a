"""
    Running statistics over relation and survivor streams.

    Each stat is a filter: attach it anywhere in a recipe, let records flow
    through unchanged, read value() at the end.  The field is a callable on
    the record (``Relation.weight``), an attribute name, or a dict key.
"""

import collections
import statistics

from sievebrush.filters import Filter


class StatsFilter(Filter):
    def __init__(self, field, test=None):
        self._field = field
        self._test = test

    def get_field(self, record):
        if callable(self._field):
            return self._field(record)
        if isinstance(record, dict):
            return record[self._field]
        return getattr(record, self._field)

    def process_record(self, record):
        if self._test is None or self._test(record):
            item = self.get_field(record)
            if item is not None:
                self.process_field(item)
        return record

    def process_field(self, item):
        raise NotImplementedError(f"process_field not defined in {type(self).__name__}")

    def value(self):
        raise NotImplementedError(f"value not defined in {type(self).__name__}")


class Sum(StatsFilter):
    def __init__(self, field, initial=0, **kwargs):
        super().__init__(field, **kwargs)
        self._value = initial

    def process_field(self, item):
        self._value += item

    def value(self):
        return self._value


class Average(StatsFilter):
    """Mean of the field; None before any record."""

    def __init__(self, field, **kwargs):
        super().__init__(field, **kwargs)
        self._total = 0
        self._count = 0

    def process_field(self, item):
        self._total += item
        self._count += 1

    def value(self):
        return self._total / self._count if self._count else None


class Median(StatsFilter):
    """Median of the field.  Keeps every value in memory."""

    def __init__(self, field, **kwargs):
        super().__init__(field, **kwargs)
        self._values = []

    def process_field(self, item):
        self._values.append(item)

    def value(self):
        return statistics.median(self._values) if self._values else None


class MinMax(StatsFilter):
    def __init__(self, field, **kwargs):
        super().__init__(field, **kwargs)
        self._min = self._max = None

    def process_field(self, item):
        if self._max is None or item > self._max:
            self._max = item
        if self._min is None or item < self._min:
            self._min = item

    def value(self):
        return (self._min, self._max)


class Histogram(StatsFilter):
    """Occurrence count of each field value.

    str() draws one bar per value, scaled so the longest is `width` marks.
    """

    label_length = 6
    width = 50

    def __init__(self, field, **kwargs):
        super().__init__(field, **kwargs)
        self._counter = collections.Counter()

    def process_field(self, item):
        self._counter[item] += 1

    def value(self):
        return dict(self._counter)

    def in_order(self):
        return sorted(self._counter.items())

    def most_common(self, n=None):
        return self._counter.most_common(n)

    def __str__(self):
        if not self._counter:
            return ""
        top = max(self._counter.values())
        lines = []
        for key, count in self.in_order():
            bar = "*" * max(1, round(self.width * count / top))
            lines.append(f"{str(key).ljust(self.label_length)[:self.label_length]} {bar} {count}")
        return "\n".join(lines) + "\n"


class LargePrimeHistogram(Histogram):
    """Number of primes above lim on one side of each relation."""

    def __init__(self, side, lim, **kwargs):
        super().__init__(lambda rel: sum(1 for p in rel.primes[side] if p > lim), **kwargs)
