"""
    Emitters are filters that write each record somewhere and pass it on
    unchanged: relation files, rotated survivor files, progress lines.
"""
import logging
import os

from sievebrush.filters import Filter
from sievebrush.utils import open_text


class Emitter(Filter):
    """Subclasses implement emit_record(record); done() runs after the last one."""

    def process_record(self, record):
        self.emit_record(record)
        return record

    def emit_record(self, record):
        raise NotImplementedError(f"emit_record not defined in {type(self).__name__}")

    def done(self):
        pass


class CountEmitter(Emitter):
    """Log "<label>: <count> of <of>" every `every` records and once at done().

    CountEmitter(every=1, of=len(jobs), label="sieve chunks") reports each
    finished sieve chunk.
    """

    def __init__(self, every=1000, of=None, label="records", level=logging.INFO):
        self._every = every
        self._of = of
        self._label = label
        self._level = level
        self.count = 0

    def format(self):
        total = f" of {self._of}" if self._of is not None else ""
        return f"{self._label}: {self.count}{total}"

    def emit_record(self, record):
        self.count += 1
        if self.count % self._every == 0:
            logging.log(self._level, self.format())

    def done(self):
        if self.count % self._every:
            logging.log(self._level, self.format())


class LineEmitter(Emitter):
    """Write str(record) lines to a file-like object or a path.

    Paths ending in .gz are written compressed.
    """

    def __init__(self, output, header=None):
        if hasattr(output, "write"):
            self._outfile = output
            self._owned = False
        else:
            self._outfile = open_text(output, "w")
            self._owned = True
        self.count = 0
        if header:
            self._outfile.write(f"# {header}\n")

    def emit_record(self, record):
        self._outfile.write(f"{record}\n")
        self.count += 1

    def done(self):
        if self._owned:
            self._outfile.close()
        else:
            self._outfile.flush()


class RelationEmitter(LineEmitter):
    """Relation file writer; str(Relation) is the relation line format."""

    def done(self):
        super().done()
        logging.debug(f"wrote {self.count} relations")


class SurvivorEmitter(Emitter):
    """Write survivors to files rotated every `per_file` lines.

    SurvivorEmitter('work/surv', per_file=1 << 16) writes work/surv.0,
    work/surv.1, ... and records the file names in `paths`.
    """

    def __init__(self, prefix, per_file=1 << 16, compress=False):
        self._prefix = os.fspath(prefix)
        self._per_file = per_file
        self._suffix = ".gz" if compress else ""
        self._current = None
        self._in_file = 0
        self.paths = []

    def _rotate(self):
        if self._current is not None:
            self._current.close()
        path = f"{self._prefix}.{len(self.paths)}{self._suffix}"
        self.paths.append(path)
        self._current = open_text(path, "w")
        self._in_file = 0

    def emit_record(self, record):
        if self._current is None or self._in_file >= self._per_file:
            self._rotate()
        self._current.write(f"{record}\n")
        self._in_file += 1

    def done(self):
        if self._current is not None:
            self._current.close()
            self._current = None
