"""
    File helpers shared by the phases: gzip-transparent text files,
    multi-file line readers and the digests recorded in campaign manifests.
"""

import gzip
import hashlib
import json
import logging
import os


def str_or_list(obj):
    if isinstance(obj, (str, os.PathLike)):
        return [obj]
    return list(obj)


def open_text(path, mode="r"):
    """Open a text file, going through gzip when the name ends in .gz."""
    path = os.fspath(path)
    if path.endswith(".gz"):
        return gzip.open(path, mode + "t")
    return open(path, mode)


def file_digest(path):
    h = hashlib.blake2b(digest_size=16)
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def config_digest(obj):
    """Stable digest of a json-serializable description of a configuration."""
    text = json.dumps(obj, sort_keys=True, default=str)
    return hashlib.blake2b(text.encode(), digest_size=16).hexdigest()


class Files:
    """Lines of several (possibly gzipped) files, read as one stream.

        for lineno, line in Files('surv.0.gz', ['surv.1.gz', 'surv.2.gz']):
            ...

    Line numbers restart in each file, which is what error messages refer
    to.  Missing files are skipped with a warning.
    """

    def __init__(self, *args):
        self.paths = [os.fspath(p) for arg in args for p in str_or_list(arg)]

    def __iter__(self):
        for path in self.paths:
            if not os.path.exists(path):
                logging.warning(f"{path} does not exist, skipping")
                continue
            with open_text(path) as f:
                yield from enumerate(f, 1)
