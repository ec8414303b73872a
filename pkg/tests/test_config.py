import gzip
import logging

import pytest

from conftest import TOY_N
from sievebrush.config import (
    PUBLISHED,
    CampaignConfig,
    CampaignLock,
    Manifest,
    Regime,
    load_config,
    parse_overrides,
    parse_regimes,
    preset_for,
)
from sievebrush.errors import ConfigError
from sievebrush.utils import Files, open_text

CONFIG_TEXT = """\
# toy campaign
modulus = 1000036000099
lpb0 = 17   # larger than the preset
q0 = 4096
regimes = 4096-8192, 8192-16384:0:4096
"""


def test_parse_regimes():
    first, second = parse_regimes("1e6-2e6; 2e6-5e6:0:2147483648")
    assert first == Regime(1_000_000, 2_000_000)
    assert second == Regime(2_000_000, 5_000_000, 0, 1 << 31)
    assert 1_500_000 in first and 2_000_000 not in first
    assert str(second) == "2000000-5000000:0:2147483648"
    assert parse_regimes("10-20:none") == (Regime(10, 20),)
    assert parse_regimes("") == ()
    with pytest.raises(ConfigError, match="empty regime"):
        parse_regimes("20-10")
    with pytest.raises(ConfigError, match="bad regime"):
        parse_regimes("a-b")


def test_presets():
    assert preset_for(40)["I"] == 9
    assert preset_for(80, "dlp")["degree"] == 2
    assert preset_for(121)["lim0"] == 1 << 16


def test_preset_beyond_desk_size(caplog):
    assert preset_for(400)["degree"] == 5
    assert "beyond the desk presets" in caplog.text


def test_load_config_layers(tmp_path):
    path = tmp_path / "toy.cfg"
    path.write_text(CONFIG_TEXT)
    config = load_config(path, parse_overrides(["lpb1=18", " mfb1 = 36 "]), seed=5)
    assert config.modulus == TOY_N
    assert (config.degree, config.I, config.lim0) == (3, 9, 4096)
    assert (config.lpb0, config.lpb1, config.mfb1) == (17, 18, 36)
    assert config.seed == 5
    assert config.q_start == 4096
    assert config.regime_for(9000).batch_side == 0
    assert config.sieve_params(config.regime_for(9000)).batch_lim == 4096
    with pytest.raises(ConfigError, match="outside every regime"):
        config.regime_for(100)

    assert load_config(path, {"lpb0": "19"}).lpb0 == 19
    assert load_config(path, {"lpb0": "19"}, lpb0=20).lpb0 == 20


def test_load_gzipped_config(tmp_path):
    path = tmp_path / "toy.cfg.gz"
    with gzip.open(path, "wt") as f:
        f.write(CONFIG_TEXT)
    assert load_config(path).lpb0 == 17


def test_config_text_round_trip(tmp_path):
    config = load_config(modulus=TOY_N, kind="dlp", batch_side=1, regimes="1000-2000:1")
    path = tmp_path / "again.cfg"
    path.write_text(config.as_text())
    assert load_config(path) == config


@pytest.mark.parametrize(
    "kwargs,message",
    [
        ({"frobnicate": "1"}, "unknown configuration key"),
        ({"lpb0": "x"}, "bad value for lpb0"),
        ({"free_relations": "maybe"}, "bad value"),
        ({"kind": "ecm"}, "kind must be"),
        ({"qside": 2}, "qside"),
        ({"m": 64, "n": 128}, "m >= n"),
        ({"sigma": 0.5}, "sigma"),
        ({"sample_fraction": 0}, "sample_fraction"),
        ({"lpb0": 10}, "lim0 exceeds"),
        ({"bkthresh1": 1 << 20}, "bkthresh1"),
        ({"I": 11, "bkthresh": 1 << 10}, r"at least 2\^I"),
    ],
)
def test_config_errors(kwargs, message):
    with pytest.raises(ConfigError, match=message):
        load_config(**kwargs)


def test_config_file_errors(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("lpb0 = 17\nlpb1 18\n")
    with pytest.raises(ConfigError, match="line 2"):
        load_config(path)
    with pytest.raises(ConfigError, match="not key=value"):
        parse_overrides(["lpb0"])


def test_derived_values():
    config = CampaignConfig()
    assert config.q_start == config.lim1
    assert config.q_end == 64 * config.lim1
    assert CampaignConfig(qside=0, lim0=1 << 12).q_start == 1 << 12
    assert config.all_regimes() == (Regime(config.q_start, config.q_end),)
    bw = config.bw_params()
    assert (bw.m, bw.n, bw.modulus) == (128, 64, 2)
    dlp = CampaignConfig(kind="dlp", ell=1000003)
    assert dlp.bw_params().modulus == 1000003
    assert config.default_target_excess() == 160
    assert dlp.default_target_excess(sm_count=2) == 5


def test_digest():
    config = CampaignConfig(modulus=TOY_N)
    same = CampaignConfig(modulus=TOY_N, workdir="/elsewhere", threads=8)
    other = CampaignConfig(modulus=TOY_N, lpb0=21)
    assert config.digest() == same.digest()
    assert config.digest() != other.digest()


def test_published_parameters():
    rsa240 = PUBLISHED["rsa240"]
    assert rsa240.params_for(10**9).batch_side is None
    assert rsa240.params_for(3 * 10**9).batch_side == 0
    assert rsa240.params_for(3 * 10**9).mfb1 == 74
    assert rsa240.total_core_years == pytest.approx(952.8)
    with pytest.raises(ConfigError):
        rsa240.params_for(10)
    dlp240 = PUBLISHED["dlp240"]
    assert dlp240.policy.kind == "composite"
    assert dlp240.params_for(2 * 10**11).batch_side == 1
    assert PUBLISHED["rsa250"].bits == 829


def test_campaign_lock(tmp_path):
    with CampaignLock(str(tmp_path), "sieve"):
        assert (tmp_path / ".lock").read_text().endswith("sieve\n")
        with pytest.raises(ConfigError, match="another phase is running"):
            CampaignLock(str(tmp_path)).acquire()
    assert not (tmp_path / ".lock").exists()


def test_manifest(tmp_path, caplog):
    caplog.set_level(logging.WARNING)
    (tmp_path / "pair.poly").write_text("n: 15\n")
    manifest = Manifest(str(tmp_path))
    assert not manifest.is_done("polyselect", "d1")
    manifest.record("polyselect", "d1", ["pair.poly"], seed=3, candidates=4)
    manifest.record("sieve", "d1")

    again = Manifest(str(tmp_path))
    assert again.is_done("polyselect", "d1")
    assert not again.is_done("polyselect", "d2")
    assert again.get("polyselect", "candidates") == 4
    assert again.get("polyselect", "seed") == 3
    assert again.get("linalg", "seed", "none") == "none"

    (tmp_path / "pair.poly").write_text("n: 21\n")
    assert not again.is_done("polyselect", "d1")
    assert "artifact pair.poly changed" in caplog.text

    again.invalidate_from(["polyselect", "sieve", "batch"], "polyselect")
    assert Manifest(str(tmp_path)).data["phases"] == {}


def test_files_number_lines_per_file(tmp_path):
    with open_text(tmp_path / "a.gz", "w") as f:
        f.write("x\ny\n")
    (tmp_path / "b").write_text("z\n")
    lines = list(Files([str(tmp_path / "a.gz"), str(tmp_path / "missing")], str(tmp_path / "b")))
    assert lines == [(1, "x\n"), (2, "y\n"), (1, "z\n")]
