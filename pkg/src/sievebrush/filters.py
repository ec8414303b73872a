"""
    sievebrush filters take a stream of records (special-q, survivors,
    relations) and yield the records that come out the other side.

    Subclass Filter for one result per record, YieldFilter for any number,
    ConditionalFilter for pass/drop decisions.  An exception raised while
    handling a record rejects that record to the recipe's error stream and
    the stream carries on.
"""

import random

from sievebrush.errors import SievebrushError

######################
#  Abstract Filters  #
######################


class Filter:
    """process_record(record) returns the replacement record, or None to drop it."""

    _recipe = None

    def process_record(self, record):
        raise NotImplementedError(f"process_record not defined in {type(self).__name__}")

    def reject_record(self, record, exception):
        if self._recipe is not None:
            self._recipe.reject_record(record, exception)

    def _outputs(self, record):
        result = self.process_record(record)
        return () if result is None else (result,)

    def attach(self, source, recipe=None):
        self._recipe = recipe
        for record in source:
            try:
                # materialised so a failure halfway rejects the whole record
                outputs = list(self._outputs(record))
            except Exception as e:
                self.reject_record(record, e)
                continue
            yield from outputs


class YieldFilter(Filter):
    """process_record(record) is a generator.

    A special-q yields many survivors and a survivor may yield no relation.
    """

    def _outputs(self, record):
        return self.process_record(record)


class ValidationError(SievebrushError, ValueError):
    def __init__(self, record):
        super().__init__(repr(record))
        self.record = record


class ConditionalFilter(YieldFilter):
    """test_record(record) decides; with validator = True a failing record
    is rejected as a ValidationError instead of silently dropped.
    """

    validator = False

    def process_record(self, record):
        if self.test_record(record):
            yield record
        elif self.validator:
            raise ValidationError(record)

    def test_record(self, record):
        raise NotImplementedError(f"test_record not defined in {type(self).__name__}")


#####################
#  Generic Filters  #
#####################


class FunctionFilter(Filter):
    """Replace each record by func(record); FunctionFilter(parse_relation)
    turns text lines into relations.
    """

    def __init__(self, func):
        self._func = func

    def process_record(self, record):
        return self._func(record)

    def __str__(self):
        return f"{type(self).__name__}( {self._func.__name__} )"


class Sampler(ConditionalFilter):
    """Pass a seeded random fraction of records, and at least `minimum`.

    Sampler(0.01, minimum=10, total=n) keeps about 1% of n records but
    never fewer than 10 of them.
    """

    def __init__(self, fraction, minimum=0, total=None, seed=0):
        self._rng = random.Random(seed)
        self._fraction = fraction
        if total is not None and minimum:
            self._fraction = min(1.0, max(fraction, minimum / max(total, 1)))
        self.sampled = 0

    def test_record(self, record):
        keep = self._rng.random() < self._fraction
        self.sampled += keep
        return keep


class Unique(ConditionalFilter):
    """Pass the first record seen for each key(record)."""

    def __init__(self, key=None):
        self._key = key or (lambda record: record)
        self._seen = set()

    def test_record(self, record):
        k = self._key(record)
        if k in self._seen:
            return False
        self._seen.add(k)
        return True
