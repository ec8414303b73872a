import pytest

from sievebrush.arith import PolyZ
from sievebrush.polyselect import PolyPair, base_m_pair
from sievebrush.sieve import SieveParams, make_factor_base, sieve_range
from sievebrush.specialq import SpecialQPolicy

# 1000003 * 1000033; base 10^4 gives f1 = x^3 + 3600x + 99
TOY_N = 1000036000099
TOY_P, TOY_Q = 1000003, 1000033
TOY_QMIN, TOY_QMAX = 1024, 1200


@pytest.fixture(scope="session")
def toy_pair():
    return base_m_pair(TOY_N, 3)


@pytest.fixture(scope="session")
def toy_params():
    return SieveParams(I=8, lim0=1 << 10, lim1=1 << 10, lpb0=14, lpb1=14, mfb0=28, mfb1=28)


@pytest.fixture(scope="session")
def toy_policy():
    return SpecialQPolicy(side=1)


@pytest.fixture(scope="session")
def toy_fbs(toy_pair, toy_params):
    return (
        make_factor_base(toy_pair.f0, toy_params.lim0, 0),
        make_factor_base(toy_pair.f1, toy_params.lim1, 1),
    )


@pytest.fixture(scope="session")
def toy_run(toy_pair, toy_params, toy_policy, toy_fbs):
    return sieve_range(toy_pair, toy_params, toy_policy, TOY_QMIN, TOY_QMAX, *toy_fbs)


@pytest.fixture
def norm_pair():
    """f0 = f1 = x, so the norm of (a, b) on both sides is a."""
    return PolyPair(PolyZ((0, 1)), PolyZ((0, 1)), 0, 1)
