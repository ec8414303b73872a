"""
    Campaign configuration.

    A campaign is described by a flat ``key = value`` file using the usual
    NFS parameter names (lim0, lpb1, mfb0, I, q0, q1, m, n, ...).  Values
    missing from the file come from the desk preset matching the size of
    the modulus.  The published parameter sets of the 795- and 829-bit
    records live here too; they feed the estimators and are never run.
"""

from dataclasses import dataclass, field, fields, replace
import errno
import json
import logging
import os
import time

from sievebrush.errors import ConfigError
from sievebrush.sieve import SieveParams
from sievebrush.specialq import SpecialQPolicy
from sievebrush.utils import config_digest, file_digest, open_text
from sievebrush.wiedemann import BwParams


@dataclass(frozen=True)
class Regime:
    """A special-q range sieved with one strategy.

    batch_side is the side left to the product tree (None: sieve both).
    """

    q0: int
    q1: int
    batch_side: int = None
    batch_lim: int = None

    def __contains__(self, q):
        return self.q0 <= q < self.q1

    def __str__(self):
        out = f"{self.q0}-{self.q1}"
        if self.batch_side is not None:
            out += f":{self.batch_side}"
            if self.batch_lim:
                out += f":{self.batch_lim}"
        return out


def parse_regimes(text):
    """``q0-q1[:side[:lim]]`` entries separated by commas or semicolons."""
    regimes = []
    for item in text.replace(";", ",").split(","):
        item = item.strip()
        if not item:
            continue
        bounds, *rest = item.split(":")
        try:
            q0, q1 = (int(float(x)) for x in bounds.split("-"))
            side = int(rest[0]) if rest and rest[0] not in ("", "none") else None
            lim = int(float(rest[1])) if len(rest) > 1 else None
        except ValueError:
            raise ConfigError(f"bad regime {item!r}")
        if q1 <= q0:
            raise ConfigError(f"empty regime {item!r}")
        regimes.append(Regime(q0, q1, side, lim))
    return tuple(regimes)


#####################
#  CampaignConfig   #
#####################


@dataclass(frozen=True)
class CampaignConfig:
    modulus: int = 0
    kind: str = "factor"
    degree: int = 0
    lc_multiplier: int = 60
    poly_budget: int = 8
    poly_samples: int = 4
    generator: int = 0
    ell: int = 0
    # sieving
    I: int = 10
    J: int = 0
    lim0: int = 1 << 14
    lim1: int = 1 << 14
    lpb0: int = 20
    lpb1: int = 20
    mfb0: int = 40
    mfb1: int = 40
    nlp0: int = 2
    nlp1: int = 2
    bkthresh: int = 0
    bkthresh1: int = 0
    batch_side: int = None
    batch_lim: int = 0
    slack0: float = 10.0
    slack1: float = 10.0
    mem_cap: int = 0
    q0: int = 0
    q1: int = 0
    qside: int = 1
    qkind: str = "prime"
    pmin: int = 2
    pmax: int = 0
    chunk: int = 0
    free_relations: bool = True
    # filtering
    target_excess: int = 0
    target_density: int = 30
    merge_k: int = 32
    characters: int = 64
    # linear algebra
    m: int = 0
    n: int = 0
    checkpoint_interval: int = 0
    bw_margin: int = 64
    mksol_segments: int = 1
    # dlp endgame
    smooth_bits: int = 0
    pool_size: int = 256
    smoothing_rounds: int = 64
    # simulation
    sigma: float = 1.0
    sample_fraction: float = 0.02
    # plumbing
    workdir: str = "."
    seed: int = 0
    threads: int = 1
    regimes: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in ("factor", "dlp"):
            raise ConfigError(f"kind must be factor or dlp, got {self.kind!r}")
        if self.qkind not in ("prime", "composite"):
            raise ConfigError(f"qkind must be prime or composite, got {self.qkind!r}")
        if self.qside not in (0, 1):
            raise ConfigError(f"qside must be 0 or 1, got {self.qside}")
        if self.m and self.n and self.m < self.n:
            raise ConfigError(f"blocking factors need m >= n, got m={self.m}, n={self.n}")
        if self.target_density < 1:
            raise ConfigError("target_density must be positive")
        if not 0 < self.sample_fraction <= 1:
            raise ConfigError("sample_fraction must be in (0, 1]")
        if self.sigma < 1:
            raise ConfigError("sigma must be >= 1")
        if self.bkthresh1 and self.bkthresh1 > max(self.lim0, self.lim1):
            raise ConfigError("bkthresh1 exceeds both lim0 and lim1")
        # raises ConfigError on the sieve cross-constraints
        self.sieve_params()

    @property
    def field_modulus(self):
        return 2 if self.kind == "factor" else self.ell

    @property
    def q_start(self):
        return self.q0 or (self.lim1 if self.qside else self.lim0)

    @property
    def q_end(self):
        return self.q1 or 64 * self.q_start

    def sieve_params(self, regime=None):
        kwargs = {f.name: getattr(self, f.name) for f in fields(SieveParams)}
        if regime is not None:
            kwargs["batch_side"] = regime.batch_side
            kwargs["batch_lim"] = regime.batch_lim or 0
        try:
            return SieveParams(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc))

    def policy(self):
        return SpecialQPolicy(side=self.qside, kind=self.qkind, pmin=self.pmin, pmax=self.pmax)

    def all_regimes(self):
        if self.regimes:
            return self.regimes
        return (Regime(self.q_start, self.q_end, self.batch_side, self.batch_lim or None),)

    def regime_for(self, q):
        for regime in self.all_regimes():
            if q in regime:
                return regime
        raise ConfigError(f"special-q {q} is outside every regime")

    def bw_params(self, rows=0):
        return BwParams.default(
            self.field_modulus, rows, m=self.m, n=self.n,
            checkpoint_interval=self.checkpoint_interval, margin=self.bw_margin,
            segments=self.mksol_segments,
        )

    def default_target_excess(self, sm_count=0):
        if self.target_excess:
            return self.target_excess
        if self.kind == "factor":
            return 160
        return sm_count + 3

    def digest(self):
        """Content hash of the settings that change computed artifacts."""
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        for key in ("workdir", "threads"):
            data.pop(key)
        data["regimes"] = [str(r) for r in self.regimes]
        return config_digest(data)

    def as_text(self):
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "regimes":
                value = ", ".join(str(r) for r in value)
            elif value is None:
                value = "none"
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"


_FIELD_TYPES = {f.name: f.type for f in fields(CampaignConfig)}


def _coerce(key, value):
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown configuration key {key!r}")
    if not isinstance(value, str):
        return value
    kind = _FIELD_TYPES[key]
    value = value.strip()
    try:
        if key == "regimes":
            return parse_regimes(value)
        if key == "batch_side":
            return None if value.lower() in ("", "none") else int(value)
        if kind in (int, "int"):
            return int(float(value)) if "e" in value.lower() else int(value, 0)
        if kind in (float, "float"):
            return float(value)
        if kind in (bool, "bool"):
            if value.lower() not in ("1", "0", "true", "false", "yes", "no"):
                raise ValueError(value)
            return value.lower() in ("1", "true", "yes")
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}")
    return value


def parse_config_text(text):
    """Raw key -> string mapping of a ``key = value`` file."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        out[key.strip()] = value.strip()
    return out


def parse_overrides(items):
    """CLI ``key=value`` strings to a mapping."""
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not key=value")
        out[key.strip()] = value.strip()
    return out


def load_config(path=None, overrides=None, **kwargs):
    """Build a CampaignConfig: preset, then file, then overrides, then kwargs."""
    raw = {}
    if path is not None:
        with open_text(path) as f:
            raw.update(parse_config_text(f.read()))
    raw.update(overrides or {})
    raw.update(kwargs)
    values = {k: _coerce(k, v) for k, v in raw.items()}
    modulus = values.get("modulus", 0)
    kind = values.get("kind", "factor")
    merged = dict(preset_for(modulus.bit_length(), kind)) if modulus else {}
    merged.update(values)
    config = CampaignConfig(**merged)
    logging.debug(f"configuration {config.digest()[:12]} loaded")
    return config


#####################
#  Desk presets     #
#####################

# bits: degree, I, lim, lpb, mfb, target_density
_FACTOR_PRESETS = {
    80: (3, 9, 1 << 12, 16, 32, 20),
    120: (3, 10, 1 << 14, 18, 36, 24),
    160: (4, 11, 1 << 16, 20, 40, 30),
    200: (4, 12, 1 << 18, 22, 44, 40),
    240: (5, 12, 1 << 19, 24, 48, 50),
}

_DLP_PRESETS = {
    80: (2, 9, 1 << 12, 16, 32, 20),
    120: (2, 10, 1 << 14, 19, 38, 24),
    160: (2, 11, 1 << 16, 21, 42, 30),
    200: (2, 12, 1 << 18, 23, 46, 40),
    240: (2, 12, 1 << 19, 25, 50, 50),
}


def preset_for(bits, kind="factor"):
    """Desk preset for a modulus of the given size, as config values."""
    table = _FACTOR_PRESETS if kind == "factor" else _DLP_PRESETS
    size = next((b for b in sorted(table) if bits <= b), None)
    if size is None:
        size = max(table)
        logging.warning(f"{bits}-bit modulus is beyond the desk presets, using {size}")
    degree, I, lim, lpb, mfb, density = table[size]
    return {
        "degree": degree,
        "I": I,
        "lim0": lim,
        "lim1": lim,
        "lpb0": lpb,
        "lpb1": lpb,
        "mfb0": mfb,
        "mfb1": mfb,
        "target_density": density,
    }


#####################
#  Published sets   #
#####################


@dataclass(frozen=True)
class PublishedParams:
    """Parameters and outcome of one of the published record computations."""

    name: str
    bits: int
    degrees: tuple
    regimes: tuple
    policy: SpecialQPolicy
    m: int
    n: int
    raw_relations: int
    unique_relations: int
    after_singleton: tuple
    after_clique: tuple
    final_rows: int
    final_density: int
    target_excess: int
    core_years: dict
    predicted_rows: int = None
    sigma: float = 1.0

    def params_for(self, q):
        for regime, params in self.regimes:
            if q in regime:
                return params
        raise ConfigError(f"{self.name}: no regime holds q = {q}")

    @property
    def total_core_years(self):
        return sum(self.core_years.values())


def _published():
    G = 10**9
    M = 10**6
    rsa240_a = SieveParams(I=16, J=1 << 16, lim0=1_800_000_000, lim1=2_100_000_000,
                           lpb0=36, lpb1=37, mfb0=72, mfb1=111, nlp0=2, nlp1=3)
    rsa240_b = replace(rsa240_a, mfb1=74, nlp1=2, batch_side=0, batch_lim=1 << 31)
    rsa250_a = SieveParams(I=16, J=1 << 17, lim0=1 << 31, lim1=1 << 31,
                           lpb0=36, lpb1=37, mfb0=72, mfb1=111, nlp0=2, nlp1=3)
    rsa250_b = replace(rsa250_a, mfb1=74, nlp1=2, batch_side=0, batch_lim=1 << 31)
    dlp240 = SieveParams(I=16, J=1 << 15, lim0=1 << 29, lim1=1 << 28,
                         lpb0=35, lpb1=35, mfb0=70, mfb1=70, nlp0=2, nlp1=2,
                         batch_side=1, batch_lim=1 << 28)
    return {
        "rsa240": PublishedParams(
            name="rsa240",
            bits=795,
            degrees=(1, 6),
            regimes=(
                (Regime(8 * G // 10, 21 * G // 10), rsa240_a),
                (Regime(21 * G // 10, 74 * G // 10, 0, 1 << 31), rsa240_b),
            ),
            policy=SpecialQPolicy(side=1),
            m=512,
            n=256,
            raw_relations=8_936_812_502,
            unique_relations=6_011_911_051,
            after_singleton=(2_603_459_110, 2_383_461_671),
            after_clique=(1_175_353_278, 1_175_353_118),
            final_rows=282 * M,
            final_density=200,
            target_excess=160,
            core_years={"polyselect": 76, "collection": 794, "krylov": 69,
                        "lingen": 0.8, "mksol": 13},
            predicted_rows=330 * M,
            sigma=100,
        ),
        "rsa250": PublishedParams(
            name="rsa250",
            bits=829,
            degrees=(1, 6),
            regimes=(
                (Regime(1 * G, 4 * G), rsa250_a),
                (Regime(4 * G, 12 * G, 0, 1 << 31), rsa250_b),
            ),
            policy=SpecialQPolicy(side=1),
            m=1024,
            n=512,
            raw_relations=8_745_268_073,
            unique_relations=6_100_000_000,
            after_singleton=(2_700_000_000, 2_600_000_000),
            after_clique=(1_800_000_000, 1_800_000_000 - 160),
            final_rows=405 * M,
            final_density=252,
            target_excess=160,
            core_years={"collection": 2450, "linalg": 250},
        ),
        "dlp240": PublishedParams(
            name="dlp240",
            bits=795,
            degrees=(3, 4),
            regimes=((Regime(150 * G, 300 * G, 1, 1 << 28), dlp240),),
            policy=SpecialQPolicy(side=0, kind="composite", pmin=8192, pmax=10**8),
            m=48,
            n=16,
            raw_relations=3_824_340_698,
            unique_relations=2_380_725_637,
            after_singleton=(1_304_822_186, 1_000_258_769),
            after_clique=(149_898_095, 149_898_092),
            final_rows=36 * M,
            final_density=253,
            target_excess=3,
            core_years={"polyselect": 152, "collection": 2400, "krylov": 544,
                        "lingen": 12, "mksol": 69},
            predicted_rows=37_100_000,
        ),
    }


PUBLISHED = _published()

# matrix sizes at density 200 used to judge the simulator
PUBLISHED_SIMULATION = {
    "dlp240": {"predicted": 37_100_000, "actual": 40_700_000, "density": 200, "sigma": 1},
    "rsa240": {"predicted": 3_300_000 * 100, "actual": 282_000_000, "density": 200,
               "sigma": 100},
}


#####################
#  Campaign dirs    #
#####################


class CampaignLock:
    """Exclusive ``.lock`` file of a campaign directory."""

    def __init__(self, workdir, phase=None):
        self.path = os.path.join(workdir, ".lock")
        self.phase = phase
        self._fd = None

    def acquire(self):
        try:
            self._fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except OSError as exc:
            if exc.errno == errno.EEXIST:
                raise ConfigError(
                    f"{self.path} exists: another phase is running (remove it if stale)"
                )
            raise
        os.write(self._fd, f"{os.getpid()} {self.phase or ''}\n".encode())
        return self

    def release(self):
        if self._fd is not None:
            os.close(self._fd)
            self._fd = None
            os.unlink(self.path)

    def __enter__(self):
        return self.acquire()

    def __exit__(self, *exc):
        self.release()


class Manifest:
    """manifest.json of a campaign directory.

    Each phase entry records the configuration digest it ran under, its
    artifacts with their content hashes and the PRNG seed.
    """

    def __init__(self, workdir):
        self.workdir = workdir
        self.path = os.path.join(workdir, "manifest.json")
        self.data = {"phases": {}}
        if os.path.exists(self.path):
            with open(self.path) as f:
                self.data = json.load(f)

    def artifact(self, name):
        return os.path.join(self.workdir, name)

    def is_done(self, phase, digest):
        """Whether phase completed under digest with intact artifacts."""
        entry = self.data["phases"].get(phase)
        if not entry or entry.get("config") != digest:
            return False
        for name, h in entry.get("artifacts", {}).items():
            path = self.artifact(name)
            if not os.path.exists(path) or file_digest(path) != h:
                logging.warning(f"{phase}: artifact {name} changed, redoing the phase")
                return False
        return True

    def record(self, phase, digest, artifacts=(), seed=None, **extra):
        self.data["phases"][phase] = {
            "config": digest,
            "artifacts": {name: file_digest(self.artifact(name)) for name in artifacts},
            "seed": seed,
            "finished": time.time(),
            **extra,
        }
        self.save()

    def invalidate_from(self, phases, phase):
        """Forget phase and every later one."""
        if phase in phases:
            for later in phases[phases.index(phase):]:
                self.data["phases"].pop(later, None)
            self.save()

    def get(self, phase, key, default=None):
        return self.data["phases"].get(phase, {}).get(key, default)

    def save(self):
        os.makedirs(self.workdir, exist_ok=True)
        tmp = self.path + ".tmp"
        with open(tmp, "w") as f:
            json.dump(self.data, f, indent=2, sort_keys=True)
        os.replace(tmp, self.path)
