"""
    sievebrush sources are iterables that yield the records fed into a
    Recipe: relations, survivors or special-q.

    Relation and survivor files may be gzip compressed.  Lines starting with
    '#' and blank lines are skipped; malformed lines are logged and counted,
    or raised when strict=True.
"""

import logging

from sievebrush.utils import Files


class FileSource:
    """Base class for sources which read lines from one or more files.

    Takes as input a file-like, a file path, or a list of file paths.
    """

    def __init__(self, input, strict=False):
        self._input = input
        self.strict = strict
        self.rejected = []

    def _lines(self):
        if hasattr(self._input, "read"):
            yield from enumerate(self._input, 1)
        else:
            yield from Files(self._input)

    def __iter__(self):
        for lineno, line in self._lines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                yield self._process_line(line, lineno)
            except ValueError as e:
                if self.strict:
                    raise
                self.rejected.append((lineno, line, e))
                logging.warning(f"skipping malformed line {lineno}: {e}")

    def _process_line(self, line, lineno):
        raise NotImplementedError(
            "Descendants of FileSource should implement"
            " a custom _process_line method."
        )


class RelationSource(FileSource):
    """Source yielding Relation objects from relation files."""

    def _process_line(self, line, lineno):
        from sievebrush.relations import parse_relation

        return parse_relation(line, lineno)


class SurvivorSource(FileSource):
    """Source yielding Survivor objects from survivor files."""

    def _process_line(self, line, lineno):
        from sievebrush.sieve import parse_survivor

        return parse_survivor(line, lineno)


class SpecialQSource:
    """Source yielding the special-q of [qmin, qmax) on the policy's side."""

    def __init__(self, qmin, qmax, f, policy):
        self.qmin = qmin
        self.qmax = qmax
        self.f = f
        self.policy = policy

    def __iter__(self):
        from sievebrush.specialq import enumerate_special_q

        return enumerate_special_q(self.qmin, self.qmax, self.f, self.policy)
