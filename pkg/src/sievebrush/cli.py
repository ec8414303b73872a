"""
    The sievebrush command line: whole pipelines (factor, dlp) and every
    phase on its own.

    A campaign lives in a work directory.  Each phase writes its artifacts
    there and records them in manifest.json with the configuration digest,
    so re-running a pipeline skips every phase already done under the same
    configuration and restarts from the first phase that is not.
"""

from concurrent.futures import ProcessPoolExecutor
import argparse
import logging
import os
import random
import sys
import time

from sievebrush import run_recipe
from sievebrush.arith import is_prime, is_safe_prime, modexp
from sievebrush.config import (
    PUBLISHED,
    CampaignLock,
    Manifest,
    load_config,
    parse_overrides,
)
from sievebrush.dlog import LogDatabase, SchirokauerMaps, build_and_solve_log_system, query_log
from sievebrush.emitters import CountEmitter, RelationEmitter, SurvivorEmitter
from sievebrush.errors import DomainError, PhaseError, SievebrushError
from sievebrush.fixtures import published_report, verify_published
from sievebrush.batch import batch_process_survivors
from sievebrush.merge import (
    MergeMatrix,
    merge,
    read_matrix,
    read_recipes,
    write_matrix,
    write_recipes,
)
from sievebrush.polyselect import (
    base_m_pair,
    joux_lercier_search,
    kleinjung_search,
    murphy_e,
    read_pair,
    sample_sieve_rank,
    size_optimize,
    write_pair,
)
from sievebrush.purge import RelSet, clique_removal, singleton_removal
from sievebrush.relations import (
    generate_free_relations,
    relation_stats,
    remove_duplicates,
)
from sievebrush.sieve import (
    default_chains,
    estimate_sieve_memory,
    make_factor_base,
    sieve_range,
)
from sievebrush.simulate import (
    collect_samples,
    predict_costs,
    time_lingen,
    time_spmv,
    published_prediction_report,
    simulate,
)
from sievebrush.sources import RelationSource
from sievebrush.specialq import enumerate_special_q
from sievebrush.sqrt import (
    apply_characters,
    build_characters,
    character_columns,
    character_matrix,
    read_dependencies,
    square_root_phase,
    write_dependencies,
)
from sievebrush.wiedemann import SparseMatrix, nullspace
from sievebrush.workunits import (
    Ledger,
    WorkUnitServer,
    create_campaign,
    run_client,
    sample_check,
)

FACTOR_PHASES = ("polyselect", "sieve", "batch", "dedup", "filter", "linalg", "characters",
                 "sqrt")
DLP_PHASES = ("polyselect", "sieve", "batch", "dedup", "logsolve")

JL_COEFF_BOUND = 6

PAIR = "pair.poly"
RAW = "rels.raw.gz"
BATCHED = "rels.batch.gz"
UNIQUE = "rels.unique.gz"
MATRIX = "matrix.bin"
RECIPES = "recipes.txt"
KERNEL = "kernel.txt"
DEPS = "deps.txt"
FACTORS = "factors.txt"
LOGDB = "logdb.bin"


#####################
#  Campaign         #
#####################


class Campaign:
    """A configuration bound to its work directory and manifest."""

    def __init__(self, config, resume=None):
        self.config = config
        self.workdir = config.workdir
        os.makedirs(self.workdir, exist_ok=True)
        self.manifest = Manifest(self.workdir)
        self.phases = FACTOR_PHASES if config.kind == "factor" else DLP_PHASES
        self.resume = resume or f"sievebrush {config.kind} -w {self.workdir}"
        self.digest = config.digest()

    def path(self, name):
        return self.manifest.artifact(name)

    def run(self, phase, func, force=False):
        """Run func(self) -> (artifacts, extra) unless phase is done already."""
        if not force and self.manifest.is_done(phase, self.digest):
            logging.info(f"{phase}: done, skipping")
            return False
        self.manifest.invalidate_from(self.phases, phase)
        start = time.perf_counter()
        with CampaignLock(self.workdir, phase):
            try:
                artifacts, extra = func(self)
            except SievebrushError as exc:
                logging.error(f"{phase} failed: {exc}")
                raise PhaseError(phase, exc, self.resume) from exc
        elapsed = time.perf_counter() - start
        self.manifest.record(phase, self.digest, artifacts, seed=self.config.seed,
                             seconds=elapsed, **extra)
        logging.info(f"{phase}: finished in {elapsed:.1f}s")
        return True

    def pair(self):
        return read_pair(self.path(PAIR))

    def relations(self, name=UNIQUE):
        path = self.path(name)
        if not os.path.exists(path):
            raise DomainError(f"{path} is missing: run the earlier phases first")
        return list(RelationSource(path))

    def lims(self):
        return (self.config.lim0, self.config.lim1)


def _write_relations(path, relations, header=None):
    run_recipe(relations, RelationEmitter(path, header=header))


#####################
#  Phases           #
#####################


def phase_polyselect(c):
    config = c.config
    N = config.modulus
    if N < 2:
        raise DomainError("modulus is not set")
    if config.kind == "factor":
        if is_prime(N):
            raise DomainError(f"{N} is prime")
        d = config.degree or 3
        pairs = list(kleinjung_search(N, d, config.lc_multiplier, budget=config.poly_budget))
        logging.info(f"polyselect: {len(pairs)} Kleinjung candidates")
        pairs.append(size_optimize(base_m_pair(N, d)))
    else:
        if not is_prime(N):
            raise DomainError(f"{N} is not prime")
        pairs = list(joux_lercier_search(N, config.degree or 2, JL_COEFF_BOUND,
                                         budget=config.poly_budget, seed=config.seed,
                                         monic=True))
        if not pairs:
            raise DomainError("Joux-Lercier search found no pair: raise poly_budget")
    bounds = (config.lim0, config.lim1)
    area = float(config.sieve_params().area * config.q_start)
    scored = sorted(pairs, key=lambda p: -murphy_e(p, bounds, area=area).murphy_e)
    top = scored[: max(1, config.poly_samples)]
    if len(top) > 1:
        params = config.sieve_params()
        ranked = sample_sieve_rank(top, 4, params, config.policy(), config.q_start,
                                   min(config.q_end, 2 * config.q_start))
        best = ranked[0].pair
        logging.info(f"polyselect: best sample yield {ranked[0].sample_yield:.1f} per q")
    else:
        best = top[0]
    write_pair(best.check(), c.path(PAIR))
    return [PAIR], {}


def _sieve_chunk(job):
    pair, params, policy, q0, lo, hi = job
    qs = list(enumerate_special_q(lo, hi, pair.poly(policy.side), policy))
    run = sieve_range(pair, params, policy, q0, hi, special_q=qs)
    return run.relations, run.survivors, run.stats


def _chunks(q0, q1, chunk):
    chunk = chunk or max(1, (q1 - q0) // 16)
    return [(lo, min(lo + chunk, q1)) for lo in range(q0, q1, chunk)]


def phase_sieve(c):
    config = c.config
    pair = c.pair()
    policy = config.policy()
    first = min(r.q0 for r in config.all_regimes())
    estimate = estimate_sieve_memory(config.sieve_params())
    logging.info(f"sieve: about {estimate / 2**20:.1f} MiB per special-q")
    relations, survivors = [], {}
    for index, regime in enumerate(config.all_regimes()):
        params = config.sieve_params(regime)
        jobs = [(pair, params, policy, first, lo, hi)
                for lo, hi in _chunks(regime.q0, regime.q1, config.chunk)]
        progress = CountEmitter(every=1, of=len(jobs), label=f"sieve {regime} chunks")
        if config.threads > 1:
            with ProcessPoolExecutor(max_workers=config.threads) as pool:
                results = list(progress.attach(pool.map(_sieve_chunk, jobs)))
        else:
            results = list(progress.attach(map(_sieve_chunk, jobs)))
        found = []
        for rels, survs, _ in results:
            relations.extend(rels)
            found.extend(survs)
        if regime.batch_side is not None:
            emitter = SurvivorEmitter(c.path(f"surv.{index}"), compress=True)
            run_recipe(found, emitter)
            survivors[str(index)] = [os.path.basename(p) for p in emitter.paths]
        logging.info(f"regime {regime}: {len(found)} survivors, {len(relations)} relations so far")
    _write_relations(c.path(RAW), relations)
    artifacts = [RAW] + [p for paths in survivors.values() for p in paths]
    return artifacts, {"survivors": survivors}


def phase_batch(c):
    config = c.config
    pair = c.pair()
    survivors = c.manifest.get("sieve", "survivors", {})
    relations = []
    for index, regime in enumerate(config.all_regimes()):
        files = [c.path(name) for name in survivors.get(str(index), [])]
        if regime.batch_side is None or not files:
            continue
        params = config.sieve_params(regime)
        chain = default_chains(params)[regime.batch_side]
        relations.extend(batch_process_survivors(files, regime.batch_side, params, chain, pair))
    _write_relations(c.path(BATCHED), relations)
    return [BATCHED], {}


def phase_dedup(c):
    config = c.config
    pair = c.pair()
    raw = c.relations(RAW) + c.relations(BATCHED)
    unique, stats = remove_duplicates(raw)
    if config.kind == "factor" and config.free_relations:
        unique.extend(generate_free_relations(pair, min(config.lim0, config.lim1)))
    summary = relation_stats(unique, c.lims())
    logging.info(f"dedup: {len(unique)} relations, average weight "
                 f"{summary['average_weight']:.1f}")
    _write_relations(c.path(UNIQUE), unique)
    return [UNIQUE], {"raw": stats["raw"], "unique": stats["unique"]}


def phase_filter(c):
    config = c.config
    relations = c.relations()
    rs = RelSet.from_relations(relations, c.pair(), c.lims())
    logging.info(f"filter: start with {rs}")
    rs = singleton_removal(rs)
    rs = clique_removal(rs, config.default_target_excess())
    mm = merge(rs, config.target_density, kind="factor", k_max=config.merge_k)
    write_matrix(mm, c.path(MATRIX))
    write_recipes(mm, c.path(RECIPES))
    return [MATRIX, RECIPES], {"rows": mm.nrows, "density": mm.density}


def load_merged(c):
    """The merged matrix and its recipes, as written by the filter phase."""
    nrows, ncols, modulus, rows = read_matrix(c.path(MATRIX))
    recipes = read_recipes(c.path(RECIPES))
    return MergeMatrix([dict(r) for r in rows], recipes, list(range(ncols)), modulus)


def _characters(c, pair):
    lpb = max(c.config.lpb0, c.config.lpb1)
    return build_characters(pair, c.config.characters, lpb=lpb)


def phase_linalg(c):
    config = c.config
    pair = c.pair()
    relations = c.relations()
    mm = load_merged(c)
    chars = _characters(c, pair)
    dense = character_columns(mm, character_matrix(relations, chars, pair))
    bw = config.bw_params(mm.nrows)
    kernel = nullspace(mm.sparse_rows(), mm.ncols, 2, "left", bw, config.seed,
                       dense=dense.tolist())
    deps = [d for d in (mm.dependency(w) for w in kernel) if d]
    with open(c.path(KERNEL), "w") as f:
        for ids in deps:
            f.write(" ".join(str(i) for i in ids) + "\n")
    logging.info(f"linalg: {len(deps)} kernel vectors")
    return [KERNEL], {"kernel": len(deps)}


def phase_characters(c):
    pair = c.pair()
    relations = c.relations()
    kernel = [d.ids for d in read_dependencies(c.path(KERNEL))]
    deps = apply_characters(kernel, relations, _characters(c, pair), pair)
    write_dependencies(deps, c.path(DEPS))
    return [DEPS], {"dependencies": len(deps)}


def phase_sqrt(c):
    pair = c.pair()
    relations = c.relations()
    deps = read_dependencies(c.path(DEPS))
    factors, results = square_root_phase(deps, relations, pair, c.config.modulus)
    if factors is None:
        raise DomainError(f"none of {len(results)} square roots split N: collect more relations")
    with open(c.path(FACTORS), "w") as f:
        f.write(f"{factors[0]}\n{factors[1]}\n")
    return [FACTORS], {"factors": [str(x) for x in factors]}


def dlp_subgroup(p, ell=0, g=0):
    """(ell, g): the large prime order and a generator whose order it divides."""
    if not ell:
        if not is_safe_prime(p):
            raise DomainError(f"{p} is not a safe prime: set ell")
        ell = (p - 1) // 2
    if (p - 1) % ell:
        raise DomainError(f"ell = {ell} does not divide p - 1")
    if not g:
        g = 2
        while modexp(g, (p - 1) // ell, p) == 1:
            g += 1
    return ell, g


def phase_logsolve(c):
    config = c.config
    pair = c.pair()
    ell, g = dlp_subgroup(config.modulus, config.ell, config.generator)
    target = config.target_excess or None
    db = build_and_solve_log_system(c.relations(), pair, ell, g, config.target_density,
                                    seed=config.seed, lims=c.lims(), target_excess=target)
    db.write(c.path(LOGDB))
    return [LOGDB], {"ell": str(ell), "g": g, "logs": len(db)}


PHASE_FUNCS = {
    "polyselect": phase_polyselect,
    "sieve": phase_sieve,
    "batch": phase_batch,
    "dedup": phase_dedup,
    "filter": phase_filter,
    "linalg": phase_linalg,
    "characters": phase_characters,
    "sqrt": phase_sqrt,
    "logsolve": phase_logsolve,
}


#####################
#  Pipelines        #
#####################


def run_factor(config, resume=None):
    """Factor config.modulus, resuming from the work directory; returns (p, q)."""
    if is_prime(config.modulus):
        raise DomainError(f"{config.modulus} is prime")
    c = Campaign(config, resume)
    for phase in FACTOR_PHASES:
        c.run(phase, PHASE_FUNCS[phase])
    p, q = (int(x) for x in c.manifest.get("sqrt", "factors"))
    logging.info(f"{config.modulus} = {p} * {q}")
    return p, q


def open_log_database(c):
    ell = int(c.manifest.get("logsolve", "ell"))
    g = c.manifest.get("logsolve", "g")
    return LogDatabase.read(c.path(LOGDB), c.pair()), ell, g


def run_queries(c, targets):
    """Logs of targets against the campaign's log database, by target."""
    config = c.config
    db, ell, g = open_log_database(c)
    params = config.sieve_params()
    logs = {}
    for i, y in enumerate(targets):
        start = time.perf_counter()
        logs[y] = query_log(y, g, config.modulus, ell, db, params,
                            smooth_bits=config.smooth_bits or None,
                            pool_size=config.pool_size, seed=config.seed + i)
        logging.info(f"log_{g}({y}) = {logs[y]} in {time.perf_counter() - start:.1f}s")
    return logs


def run_dlp(config, targets=(), resume=None):
    """Precompute the log database (once) and answer each target."""
    c = Campaign(config, resume)
    for phase in DLP_PHASES:
        c.run(phase, PHASE_FUNCS[phase])
    return run_queries(c, targets)


#####################
#  Other commands   #
#####################


def cmd_sm(c, args):
    pair = c.pair()
    ell, _ = dlp_subgroup(c.config.modulus, c.config.ell, c.config.generator)
    maps = SchirokauerMaps.build(pair, ell)
    logging.info(f"{maps.count} Schirokauer maps, unit ranks {maps.ranks}")
    relations = c.relations()[: args.count]
    out = c.path("sm.txt")
    with open(out, "w") as f:
        for rel in relations:
            values = [maps.values(rel, pair, side) for side in (0, 1)]
            f.write(f"{rel.a},{rel.b}:" + ";".join(",".join(str(v) for v in vals)
                                                for vals in values) + "\n")
    print(f"{len(relations)} relations written to {out}")


def _random_matrix(dim, density, modulus, seed):
    rng = random.Random(seed)
    rows = [[(c, 1 if modulus == 2 else rng.randrange(1, modulus))
             for c in sorted(rng.sample(range(dim), min(dim, density)))] for _ in range(dim)]
    return SparseMatrix(rows, dim, modulus)


def cmd_simulate(c, args):
    config = c.config
    if args.published:
        for name, err in published_prediction_report().items():
            ref = PUBLISHED[name]
            print(f"{name}: predicted within {100 * err:.1f}% of {ref.final_rows} rows "
                  f"(sigma {ref.sigma:g})")
        return
    pair = c.pair()
    params = config.sieve_params()
    policy = config.policy()
    fb0 = make_factor_base(pair.f0, params.lim0, 0)
    fb1 = make_factor_base(pair.f1, params.lim1, 1)
    samples = collect_samples(pair, params, policy, config.q_start, config.q_end,
                              config.sample_fraction, fb0, fb1)
    special_q = list(enumerate_special_q(config.q_start, config.q_end,
                                         pair.poly(policy.side), policy))
    target = config.default_target_excess()
    pred = simulate(samples, special_q, config.sigma, config.seed, target,
                    config.target_density, c.lims())
    print(pred)
    bw = config.bw_params(pred.rows)
    sample_dim = max(256, min(pred.rows, 1 << 14))
    M = _random_matrix(sample_dim, config.target_density, config.field_modulus, config.seed)
    spmv = time_spmv(M, bw.n) * pred.rows / sample_dim
    lingen_timing = time_lingen(bw.m, bw.n, min(64, bw.length(sample_dim)), config.field_modulus,
                                config.seed)
    report = predict_costs(samples.mean_seconds(), len(special_q), spmv, pred.rows, bw,
                           lingen_timing, cores=config.threads)
    print(report)


def _sieve_work(config, pair):
    policy = config.policy()
    digest = config.digest()

    def work(unit):
        if unit["digest"] and unit["digest"] != digest:
            raise DomainError(f"work unit {unit['id']} was made for another configuration")
        regime = config.regime_for(unit["qmin"])
        params = config.sieve_params(regime)
        rels, _, _ = _sieve_chunk((pair, params, policy, config.q_start,
                                   unit["qmin"], unit["qmax"]))
        return [str(rel) for rel in rels]

    return work


def cmd_server(c, args):
    config = c.config
    pair = c.pair()
    uploads = c.path("uploads")
    os.makedirs(uploads, exist_ok=True)
    lpb = (config.lpb0, config.lpb1)

    def check(lines, unit):
        return sample_check(lines, pair, lpb, seed=config.seed)

    def sink(unit, lines):
        _write_relations(os.path.join(uploads, f"{unit.id}.rels.gz"),
                         [line for line in lines if line.strip()])

    log_path = c.path("workunits.log")
    snapshot = c.path("workunits.json")
    if os.path.exists(snapshot) or os.path.exists(log_path):
        ledger = Ledger.recover(snapshot, log_path, check=check, sink=sink)
    else:
        chunk = config.chunk or max(1, (config.q_end - config.q_start) // 100)
        ledger = create_campaign(config.q_start, config.q_end, chunk, c.digest,
                                 check=check, sink=sink, log_path=log_path,
                                 timeout=args.timeout)
    with WorkUnitServer(ledger, args.host, args.port, snapshot_path=snapshot) as server:
        server.serve_until_finished()
    holes = ledger.holes()
    print(f"campaign finished: {ledger.counts()}, holes: {holes or 'none'}")


def cmd_client(c, args):
    config = c.config
    work = _sieve_work(config, c.pair())
    count = run_client(args.server, work, threads=config.threads, workdir=c.path("client"),
                       max_idle=args.max_idle)
    print(f"{count} work units processed")


def cmd_factor(c, args):
    p, q = run_factor(c.config, c.resume)
    print(f"{p}\n{q}")


def cmd_dlp(c, args):
    logs = run_dlp(c.config, [int(y, 0) for y in args.targets], c.resume)
    for y, x in logs.items():
        print(f"{y} {x}")


def cmd_descent(c, args):
    logs = run_queries(c, [int(y, 0) for y in args.targets])
    for y, x in logs.items():
        print(f"{y} {x}")


def cmd_verify_published(c, args):
    for check in published_report():
        print(check)
    verify_published()


def cmd_phase(c, args):
    c.run(args.command, PHASE_FUNCS[args.command], force=args.force)


#####################
#  Argument parsing #
#####################


def build_parser():
    parser = argparse.ArgumentParser(prog="sievebrush",
                                     description="Desk-scale number field sieve.")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("-c", "--config", help="campaign configuration file")
    parser.add_argument("-w", "--workdir", help="campaign directory")
    parser.add_argument("-t", "--threads", type=int, help="worker processes")
    parser.add_argument("-s", "--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration value")
    sub = parser.add_subparsers(dest="command", required=True)

    for phase in PHASE_FUNCS:
        p = sub.add_parser(phase, help=f"run the {phase} phase")
        p.add_argument("--force", action="store_true", help="redo the phase")
        p.set_defaults(func=cmd_phase)

    p = sub.add_parser("sm", help="Schirokauer map values of the unique relations")
    p.add_argument("--count", type=int, default=100)
    p.set_defaults(func=cmd_sm)

    p = sub.add_parser("descent", help="logs of targets against the log database")
    p.add_argument("targets", nargs="+")
    p.set_defaults(func=cmd_descent)

    p = sub.add_parser("simulate", help="predict matrix size and costs from sample sieving")
    p.add_argument("--published", action="store_true",
                   help="report the accuracy of the published simulations")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("server", help="serve work units of the sieving range")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8012)
    p.add_argument("--timeout", type=float, default=3600.0)
    p.set_defaults(func=cmd_server)

    p = sub.add_parser("client", help="sieve work units from a server")
    p.add_argument("--server", required=True)
    p.add_argument("--max-idle", type=int, default=None)
    p.set_defaults(func=cmd_client)

    p = sub.add_parser("factor", help="factor N")
    p.add_argument("N", nargs="?")
    p.set_defaults(func=cmd_factor)

    p = sub.add_parser("dlp", help="logs modulo the prime p")
    p.add_argument("-p", "--prime", dest="p", help="the prime modulus")
    p.add_argument("targets", nargs="*")
    p.set_defaults(func=cmd_dlp)

    p = sub.add_parser("verify-published", help="check the published record values")
    p.set_defaults(func=cmd_verify_published)
    return parser


def _resume_command(args):
    parts = ["sievebrush"]
    if args.config:
        parts += ["-c", args.config]
    if args.workdir:
        parts += ["-w", args.workdir]
    for item in args.set:
        parts += ["-s", item]
    parts.append(args.command)
    return " ".join(parts)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(message)s",
    )
    try:
        if args.command == "verify-published":
            args.func(None, args)
            return 0
        overrides = parse_overrides(args.set)
        if args.command == "factor" and args.N:
            overrides["modulus"] = args.N
            overrides.setdefault("kind", "factor")
        if args.command == "dlp":
            overrides["kind"] = "dlp"
            if args.p:
                overrides["modulus"] = args.p
        if args.workdir:
            overrides["workdir"] = args.workdir
        if args.threads:
            overrides["threads"] = str(args.threads)
        config = load_config(args.config, overrides)
        args.func(Campaign(config, _resume_command(args)), args)
    except SievebrushError as exc:
        logging.error(str(exc))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
