"""The served engine must pass the same conformance suite as the bundled mock."""

import pytest

from pecan.providers.conformance import CHECKS, run_conformance


@pytest.mark.parametrize("check", [c for _, c in CHECKS], ids=[name for name, _ in CHECKS])
def test_conformance_check(provider, check):
    check(provider)


def test_full_suite_passes(provider):
    assert run_conformance(provider) == [name for name, _ in CHECKS]
