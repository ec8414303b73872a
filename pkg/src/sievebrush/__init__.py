"""
    sievebrush is a desk-scale number field sieve for integer factoring and
    prime-field discrete logarithms, built as a streaming pipeline of
    special-q, survivors and relations.
"""

import logging

from sievebrush.errors import (  # noqa
    SievebrushError,
    OvercookedError,
    DomainError,
    ConfigError,
    ProtocolError,
    PhaseError,
    FixtureError,
)
from . import filters, emitters, sources, utils  # noqa


def _as_recipe(stream):
    """Accept a Recipe, one Filter, or an iterable of filters."""
    if stream is None or isinstance(stream, Recipe):
        return stream
    if isinstance(stream, filters.Filter):
        return Recipe(stream)
    if hasattr(stream, "__iter__"):
        return Recipe(*stream)
    raise SievebrushError("error_stream must be either a filter or an iterable of filters")


class Recipe:
    """A chain of filters pulled by run() or collect().

    Records a filter rejects go to error_stream as
    ``{"record": record, "exception": repr(exc)}``; `rejected` counts them.
    """

    def __init__(self, *filter_args, error_stream=None):
        self.finished = False
        self.rejected = 0
        self.filters = []
        for fltr in filter_args:
            # a nested Recipe contributes its filters
            self.filters.extend(getattr(fltr, "filters", [fltr]))
        self.error_stream = _as_recipe(error_stream)

    def reject_record(self, record, exception):
        self.rejected += 1
        logging.debug(f"rejected {record!r}: {exception!r}")
        if self.error_stream:
            self.error_stream.run([{"record": record, "exception": repr(exception)}])

    def _connect(self, source, caller):
        if self.finished:
            raise OvercookedError(f"{caller}() called on finished recipe")
        data = source
        for fltr in self.filters:
            data = fltr.attach(data, recipe=self)
        return data

    def run(self, source):
        for _ in self._connect(source, "run"):
            pass

    def collect(self, source):
        """Like run(), but return the records that come out of the last filter."""
        return list(self._connect(source, "collect"))

    def done(self):
        if self.finished:
            raise OvercookedError("done() called on finished recipe")
        self.finished = True
        if self.error_stream:
            self.error_stream.done()
        for fltr in self.filters:
            finish = getattr(fltr, "done", None)
            if finish is not None:
                finish()
        if self.rejected:
            logging.info(f"{self.rejected} records rejected")


def run_recipe(source, *filter_args, error_stream=None):
    """Pull every record of source through the filters, then finish them."""
    recipe = Recipe(*filter_args, error_stream=error_stream)
    recipe.run(source)
    recipe.done()
    return recipe
