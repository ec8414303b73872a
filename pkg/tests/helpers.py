import collections
import random


def toy_rows(count=500, nideals=200, seed=0):
    """Relation-like rows over a skewed set of ideals, keyed (side, p, r)."""
    rng = random.Random(seed)
    ideals = list(range(nideals))
    weights = [1 / (i + 1) for i in ideals]
    rows = []
    for _ in range(count):
        row = collections.Counter()
        for i in rng.choices(ideals, weights, k=rng.randint(3, 7)):
            row[(i % 2, 2 * i + 3, i // 2)] += 1
        rows.append(row)
    return rows
