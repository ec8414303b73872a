import logging
import os

import pytest
import sympy

from conftest import TOY_N, TOY_P, TOY_Q
from sievebrush.arith import is_safe_prime, modexp
from sievebrush.cli import (
    DLP_PHASES,
    FACTOR_PHASES,
    PAIR,
    Campaign,
    _chunks,
    build_parser,
    dlp_subgroup,
    main,
    phase_polyselect,
)
from sievebrush.config import load_config
from sievebrush.errors import DomainError, PhaseError
from sievebrush.polyselect import read_pair

TOY_SETTINGS = ["I=8", "lim0=1024", "lim1=1024", "lpb0=14", "lpb1=14", "mfb0=28", "mfb1=28",
                "poly_budget=0", "poly_samples=1"]


def _args(workdir, settings, *command):
    argv = ["-w", str(workdir)]
    for item in settings:
        argv += ["-s", item]
    return argv + list(command)


def _write_pair(c):
    with open(c.path(PAIR), "w") as f:
        f.write("n: 15\n")
    return [PAIR], {"note": "x"}


def test_parser():
    args = build_parser().parse_args(["-s", "lpb0=17", "-s", "I=9", "-t", "4", "factor", "77"])
    assert args.set == ["lpb0=17", "I=9"]
    assert (args.threads, args.N) == (4, "77")
    args = build_parser().parse_args(["dlp", "-p", "23", "5", "7"])
    assert (args.p, args.targets) == ("23", ["5", "7"])
    args = build_parser().parse_args(["sieve", "--force"])
    assert args.force
    for phase in set(FACTOR_PHASES) | set(DLP_PHASES):
        assert build_parser().parse_args([phase]).command == phase


def test_chunks():
    assert _chunks(0, 10, 4) == [(0, 4), (4, 8), (8, 10)]
    assert len(_chunks(0, 160, 0)) == 16


def test_campaign_runs_each_phase_once(tmp_path, caplog):
    caplog.set_level(logging.INFO)
    c = Campaign(load_config(workdir=str(tmp_path)))
    assert c.run("polyselect", _write_pair)
    assert not c.run("polyselect", _write_pair)
    assert "polyselect: done, skipping" in caplog.text
    assert c.manifest.get("polyselect", "note") == "x"

    c.run("sieve", lambda c: ([], {}))
    assert c.run("polyselect", _write_pair, force=True)
    assert c.manifest.get("sieve", "config") is None

    other = Campaign(load_config(workdir=str(tmp_path), lpb0=21))
    assert other.run("polyselect", _write_pair)


def test_failed_phase_says_how_to_resume(tmp_path):
    c = Campaign(load_config(workdir=str(tmp_path)), resume="sievebrush -w here sieve")

    def broken(c):
        raise DomainError("no relations")

    with pytest.raises(PhaseError, match="resume with: sievebrush -w here sieve") as info:
        c.run("sieve", broken)
    assert info.value.phase == "sieve"
    assert not (tmp_path / ".lock").exists()
    assert c.manifest.get("sieve", "config") is None


def test_missing_relations(tmp_path):
    c = Campaign(load_config(workdir=str(tmp_path)))
    with pytest.raises(DomainError, match="run the earlier phases first"):
        c.relations()


def test_polyselect_phase(tmp_path):
    config = load_config(workdir=str(tmp_path), modulus=TOY_N, poly_budget=0, poly_samples=1)
    c = Campaign(config)
    assert phase_polyselect(c) == ([PAIR], {})
    pair = read_pair(c.path(PAIR))
    pair.check()
    assert pair.modulus == TOY_N
    assert pair.f1.degree == 3


def test_main_errors(tmp_path):
    assert main(_args(tmp_path, ["kind=ecm"], "polyselect")) == 1
    assert main(_args(tmp_path, [], "factor", str(TOY_P))) == 1
    assert main(_args(tmp_path, ["lpb0"], "sieve")) == 1
    assert main(_args(tmp_path, [], "dlp", "-p", "35")) == 1


def test_verify_published(capsys):
    assert main(["verify-published"]) == 0
    assert "dlp240.log" in capsys.readouterr().out


def test_published_simulation_report(tmp_path, capsys):
    assert main(_args(tmp_path, [], "simulate", "--published")) == 0
    out = capsys.readouterr().out
    assert "dlp240: predicted within 8.8%" in out
    assert "rsa240: predicted within 17.0%" in out


@pytest.mark.slow
def test_factor_toy_modulus(tmp_path, capsys, caplog):
    caplog.set_level(logging.INFO)
    argv = _args(tmp_path, TOY_SETTINGS + ["q1=3000"], "factor", str(TOY_N))
    assert main(argv) == 0
    p, q = sorted(int(x) for x in capsys.readouterr().out.split())
    assert (p, q) == (TOY_P, TOY_Q)
    for name in ("pair.poly", "rels.unique.gz", "matrix.bin", "deps.txt", "factors.txt"):
        assert os.path.exists(tmp_path / name)

    caplog.clear()
    assert main(argv) == 0
    assert all(f"{phase}: done, skipping" in caplog.text for phase in FACTOR_PHASES)


@pytest.mark.slow
def test_dlp_toy_prime(tmp_path, capsys):
    p = sympy.nextprime(10**7)
    while not is_safe_prime(p):
        p = sympy.nextprime(p)
    settings = ["I=7", "lim0=256", "lim1=256", "lpb0=11", "lpb1=11", "mfb0=22", "mfb1=22",
                "qside=0", "q0=256", "q1=400", "poly_budget=1", "poly_samples=1"]
    targets = ["12345", "999999"]
    assert main(_args(tmp_path, settings, "dlp", "-p", str(p), *targets)) == 0
    _, g = dlp_subgroup(p)
    logs = dict(line.split() for line in capsys.readouterr().out.splitlines())
    for y in targets:
        assert modexp(g, int(logs[y]), p) == int(y)

    assert main(_args(tmp_path, settings + ["kind=dlp", f"modulus={p}"], "descent", "777")) == 0
    (line,) = capsys.readouterr().out.splitlines()
    y, x = line.split()
    assert modexp(g, int(x), p) == 777
