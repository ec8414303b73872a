"""
    Predicting the matrix size and phase costs of a campaign from sample
    sieving.

    Real relations of a few evenly spaced special-q are cloned into fake
    relations for every special-q of the range: the special-q ideal is
    substituted and every other ideal is replaced by a random ideal of
    about the same index (within 20%).  A shrink factor sigma divides the
    relation counts and ideal indices, so the mini-filter runs at 1/sigma
    scale and its output is scaled back.

    Fake rows are Counters keyed (side, index); special-q columns are
    keyed (side, index, "q") and keep their index under shrinking.
"""

from dataclasses import dataclass, field
import bisect
import collections
import logging
import math
import random
import time

import numpy as np

from sievebrush.config import PUBLISHED_SIMULATION
from sievebrush.merge import merge
from sievebrush.purge import RelSet, clique_removal, singleton_removal
from sievebrush.relations import relation_ideals
from sievebrush.sieve import make_factor_base, sieve_range
from sievebrush.specialq import enumerate_special_q
from sievebrush.wiedemann import VectorBlock, krylov_length, lingen, spmv_block

BUCKETS = 16
NORM_WIDTH = 0.2
MIN_ROWS = 1 << 15

SECONDS_PER_YEAR = 365.25 * 24 * 3600


def ideal_index(p):
    """Approximate rank of p among primes."""
    if p < 3:
        return 1
    return max(1, round(p / math.log(p)))


#####################
#  Samples          #
#####################


@dataclass
class SampleSet:
    """Real relations of evenly spaced special-q, with sieving times."""

    pair: object
    qside: int
    relations: dict = field(default_factory=dict)
    seconds: dict = field(default_factory=dict)

    @property
    def qs(self):
        return sorted(self.relations)

    def total(self):
        return sum(len(v) for v in self.relations.values())

    def mean_seconds(self):
        return sum(self.seconds.values()) / max(1, len(self.seconds))

    def rows(self):
        return [relation_ideals(rel, self.pair) for q in self.qs for rel in self.relations[q]]


def pick_samples(special_q, fraction):
    """Evenly spaced subset holding about fraction of special_q (at least one)."""
    special_q = list(special_q)
    if not special_q:
        return []
    count = max(1, round(len(special_q) * fraction))
    step = len(special_q) / count
    return [special_q[int(i * step)] for i in range(count)]


def collect_samples(pair, params, policy, qmin, qmax, fraction, fb0=None, fb1=None):
    """Sieve a fraction of the special-q of [qmin, qmax) with production parameters."""
    if fb0 is None:
        fb0 = make_factor_base(pair.f0, params.lim0, 0)
    if fb1 is None:
        fb1 = make_factor_base(pair.f1, params.lim1, 1)
    chosen = pick_samples(enumerate_special_q(qmin, qmax, pair.poly(policy.side), policy),
                          fraction)
    samples = SampleSet(pair, policy.side)
    for sq in chosen:
        start = time.perf_counter()
        run = sieve_range(pair, params, policy, qmin, qmax, fb0, fb1,
                          online_dedup=True, special_q=[sq])
        samples.seconds[sq.q] = time.perf_counter() - start
        samples.relations.setdefault(sq.q, []).extend(run.relations)
    logging.info(f"sampled {len(chosen)} special-q: {samples.total()} relations")
    return samples


#####################
#  Fake relations   #
#####################


class _Buckets:
    """Sample special-q grouped into logarithmic size buckets."""

    def __init__(self, qs, lo, hi, count=BUCKETS):
        lo, hi = math.log(max(lo, 2)), math.log(max(hi, lo + 1))
        self.edges = [math.exp(lo + (hi - lo) * k / count) for k in range(1, count)]
        self.groups = collections.defaultdict(list)
        for q in qs:
            self.groups[bisect.bisect(self.edges, q)].append(q)

    def pick(self, q, rng):
        k = bisect.bisect(self.edges, q)
        for d in range(BUCKETS + 1):
            for kk in (k - d, k + d):
                if self.groups.get(kk):
                    return rng.choice(self.groups[kk])
        raise ValueError("no samples")


def _fake_row(rel, pair, q_sample, q, qside, rng, width=NORM_WIDTH):
    row = collections.Counter()
    for (side, p, _), v in relation_ideals(rel, pair).items():
        if side == qside and p == q_sample:
            row[(side, ideal_index(q), "q")] += v
            continue
        idx = ideal_index(p)
        lo = max(1, int(idx * (1 - width)))
        hi = max(lo, int(idx * (1 + width)))
        row[(side, rng.randint(lo, hi))] += v
    return row


def generate_fake_relations(special_q, samples, seed=0, qmin=None, qmax=None):
    """Yield (q, rows) per special-q of the range, cloned from samples."""
    qs = [q for q in samples.qs if samples.relations[q]] or samples.qs
    if not qs:
        raise ValueError("empty sample set")
    qmin = qmin or min(qs)
    qmax = qmax or max(qs) + 1
    buckets = _Buckets(qs, qmin, qmax)
    for sq in special_q:
        q = sq.q if hasattr(sq, "q") else sq
        rng = random.Random(hash((seed, q)))
        q_sample = buckets.pick(q, rng)
        source = samples.relations[q_sample]
        rows = [
            _fake_row(rng.choice(source), samples.pair, q_sample, q, samples.qside, rng)
            for _ in range(len(source))
        ]
        yield q, rows


#####################
#  Shrinking        #
#####################


@dataclass(frozen=True)
class ShrinkParams:
    sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 1:
            raise ValueError(f"shrink factor must be >= 1, got {self.sigma}")


def shrink_count(count, sigma, rng):
    """count / sigma, the fractional part resolved by a Bernoulli draw."""
    expected = count / sigma
    whole = int(expected)
    return whole + (1 if rng.random() < expected - whole else 0)


def shrink_row(row, sigma):
    out = collections.Counter()
    for key, v in row.items():
        if len(key) == 3:
            out[key] += v
        else:
            out[(key[0], max(1, round(key[1] / sigma)))] += v
    return out


def shrink(stream, params):
    """Shrink a (q, rows) stream by params.sigma."""
    rng = random.Random(params.seed)
    for q, rows in stream:
        if params.sigma == 1:
            yield q, rows
            continue
        keep = shrink_count(len(rows), params.sigma, rng)
        chosen = rng.sample(rows, keep) if keep <= len(rows) else rows
        yield q, [shrink_row(r, params.sigma) for r in chosen]


#####################
#  Prediction       #
#####################


@dataclass
class Prediction:
    rows: int
    density: float
    sigma: float
    shrunk_rows: int
    relations: int

    def error(self, actual):
        return prediction_error(self.rows, actual)

    def __str__(self):
        return (f"predicted {self.rows} rows (density {self.density:.1f}) "
                f"from {self.shrunk_rows} x sigma {self.sigma:g}")


def prediction_error(predicted, actual):
    return abs(predicted - actual) / actual


def predict_matrix(rows, sigma=1.0, target_excess=0, target_density=30, lims=None):
    """Run the filter on (fake, shrunk) rows and scale the result by sigma."""
    rows = list(rows)
    rs = RelSet.from_rows(rows, lims)
    rs = singleton_removal(rs)
    rs = clique_removal(rs, min(target_excess, max(rs.excess, 0)))
    mm = merge(rs, target_density, kind="factor")
    if mm.nrows < MIN_ROWS and sigma > 1:
        logging.warning(f"shrunk matrix has only {mm.nrows} rows: prediction is noisy")
    pred = Prediction(round(mm.nrows * sigma), mm.density, sigma, mm.nrows, len(rows))
    logging.info(str(pred))
    return pred


def simulate(samples, special_q, sigma=1.0, seed=0, target_excess=0, target_density=30,
             lims=None):
    """Fake relations for special_q, shrunk by sigma, through the filter."""
    stream = generate_fake_relations(special_q, samples, seed)
    rows = [r for _, group in shrink(stream, ShrinkParams(sigma, seed)) for r in group]
    index_lims = tuple(ideal_index(x) for x in lims) if lims else None
    if index_lims and sigma > 1:
        index_lims = tuple(max(1, round(x / sigma)) for x in index_lims)
    return predict_matrix(rows, sigma, target_excess, target_density, index_lims)


def published_prediction_report():
    """Relative error of the published simulator runs, by name."""
    return {
        name: prediction_error(ref["predicted"], ref["actual"])
        for name, ref in PUBLISHED_SIMULATION.items()
    }


#####################
#  Costs            #
#####################


@dataclass
class PhaseCost:
    phase: str
    core_seconds: float
    wall_seconds: float

    @property
    def core_years(self):
        return self.core_seconds / SECONDS_PER_YEAR


@dataclass
class CostReport:
    phases: list = field(default_factory=list)

    def __getitem__(self, phase):
        for p in self.phases:
            if p.phase == phase:
                return p
        raise KeyError(phase)

    @property
    def total_core_years(self):
        return sum(p.core_years for p in self.phases)

    def __str__(self):
        lines = [f"{'phase':<12} {'core-seconds':>16} {'core-years':>12} {'wall-seconds':>14}"]
        for p in self.phases:
            lines.append(f"{p.phase:<12} {p.core_seconds:>16.1f} {p.core_years:>12.4f} "
                         f"{p.wall_seconds:>14.1f}")
        lines.append(f"{'total':<12} {'':>16} {self.total_core_years:>12.4f}")
        return "\n".join(lines)


def time_spmv(M, width, repeats=5, seed=0):
    """Seconds per product of M with a block of the given width."""
    V = VectorBlock.random(M.dim, width, M.modulus, seed)
    start = time.perf_counter()
    for _ in range(repeats):
        V = spmv_block(M, V)
    return (time.perf_counter() - start) / repeats


def time_lingen(m, n, length, modulus=2, seed=0):
    """(length, seconds) of lingen on a random sequence."""
    rng = np.random.default_rng(seed)
    if modulus == 2:
        seq = [rng.integers(0, 2, size=(m, n)) for _ in range(length)]
    else:
        pyrng = random.Random(seed)
        seq = [np.array([[pyrng.randrange(modulus) for _ in range(n)] for _ in range(m)],
                        dtype=object) for _ in range(length)]
    start = time.perf_counter()
    try:
        lingen(seq, m, n, modulus)
    except Exception as exc:  # random sequences may have no short generator
        logging.debug(f"lingen timing: {exc}")
    return length, time.perf_counter() - start


def predict_costs(sample_seconds, n_special_q, spmv_seconds, rows, bw, lingen_timing=None,
                  cores=1, polyselect_seconds=0.0, filter_seconds=0.0):
    """Cost report per phase, in core-seconds and wall-time on `cores` cores.

    Collection is the mean sample time per special-q times their number;
    Krylov runs (1/m + 1/n) rows products and Mksol rows/n; Lingen scales
    quadratically from its timing run.
    """
    krylov = (rows / bw.m + rows / bw.n) * spmv_seconds
    mksol = rows / bw.n * spmv_seconds
    if lingen_timing:
        length, seconds = lingen_timing
        lin = seconds * (krylov_length(rows, bw.m, bw.n, bw.margin) / length) ** 2
    else:
        logging.warning("no lingen timing: lingen cost reported as zero")
        lin = 0.0
    phases = [
        ("polyselect", polyselect_seconds),
        ("collection", sample_seconds * n_special_q),
        ("filtering", filter_seconds),
        ("krylov", krylov),
        ("lingen", lin),
        ("mksol", mksol),
    ]
    report = CostReport([PhaseCost(name, sec, sec / max(1, cores)) for name, sec in phases])
    logging.info(f"predicted cost: {report.total_core_years:.6f} core-years")
    return report
