import os
import sys

import pytest

TESTS_DIR = os.path.dirname(os.path.abspath(__file__))
ROOT = os.path.dirname(TESTS_DIR)
FIXTURES = os.path.join(ROOT, "fixtures")

sys.path.insert(0, TESTS_DIR)


@pytest.fixture
def fixtures_dir():
    return FIXTURES


def fixture_path(*parts):
    return os.path.join(FIXTURES, *parts)


def read_fixture(*parts):
    with open(fixture_path(*parts), encoding="utf-8") as fh:
        return fh.read()
