import pytest

from sievebrush import fixtures
from sievebrush.errors import FixtureError
from sievebrush.fixtures import published_report, verify_published


def test_published_values_hold():
    report = verify_published()
    assert len(report) == 11
    assert all(check.passed for check in report)
    assert str(report[0]).startswith("rsa240.product")


def test_tampered_value_is_named(monkeypatch):
    monkeypatch.setattr(fixtures, "DLP240_LOG", fixtures.DLP240_LOG + 1)
    report = published_report()
    failed = [check for check in report if not check.passed]
    assert [check.fixture for check in failed] == ["dlp240.log"]
    assert "FAILED" in str(failed[0])
    with pytest.raises(FixtureError, match="dlp240.log"):
        verify_published()


def test_published_sizes():
    assert fixtures.RSA240.bit_length() == 795
    assert fixtures.RSA250.bit_length() == 829
    assert fixtures.DLP240_P.bit_length() == 795
