"""Shared test fixtures: the checked-in contract bundles."""

from pathlib import Path

import pytest

from sctest.evm import load_bundle

REPO = Path(__file__).resolve().parent.parent
FIXTURES = REPO / "fixtures"
BUNDLE_NAMES = ("ballot", "bytekey", "pool", "feeswap", "cubic", "lottery")


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def bundles():
    return {name: load_bundle(FIXTURES / name) for name in BUNDLE_NAMES}


@pytest.fixture(scope="session")
def ballot(bundles):
    return bundles["ballot"]


@pytest.fixture(scope="session")
def bytekey(bundles):
    return bundles["bytekey"]


@pytest.fixture(scope="session")
def pool(bundles):
    return bundles["pool"]


@pytest.fixture(scope="session")
def feeswap(bundles):
    return bundles["feeswap"]


@pytest.fixture(scope="session")
def cubic(bundles):
    return bundles["cubic"]


@pytest.fixture(scope="session")
def lottery(bundles):
    return bundles["lottery"]
