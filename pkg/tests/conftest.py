"""Session-scoped corpus fixtures shared across test modules.

The reference-scale trees take a few seconds to build, so they are generated
once per session and only by the tests that ask for them.
"""

from __future__ import annotations

import pytest

from todbench import corpus, fixtures


@pytest.fixture(scope="session")
def sgd_small_root(tmp_path_factory):
    return fixtures.make_sgd(tmp_path_factory.mktemp("sgd_small"), "small")


@pytest.fixture(scope="session")
def ketod_small_root(tmp_path_factory):
    return fixtures.make_ketod(tmp_path_factory.mktemp("ketod_small"), "small")


@pytest.fixture(scope="session")
def bitod_small_root(tmp_path_factory):
    return fixtures.make_bitod(tmp_path_factory.mktemp("bitod_small"), "small")


@pytest.fixture(scope="session")
def sgd_small(sgd_small_root):
    return corpus.load_sgd(sgd_small_root)


@pytest.fixture(scope="session")
def ketod_small(ketod_small_root):
    return corpus.load_ketod(ketod_small_root)


@pytest.fixture(scope="session")
def bitod_small(bitod_small_root):
    return corpus.load_bitod(bitod_small_root)


@pytest.fixture(scope="session")
def sgd_reference_root(tmp_path_factory):
    return fixtures.make_sgd(tmp_path_factory.mktemp("sgd_reference"), "reference")


@pytest.fixture(scope="session")
def ketod_reference_root(tmp_path_factory):
    return fixtures.make_ketod(tmp_path_factory.mktemp("ketod_reference"), "reference")


@pytest.fixture(scope="session")
def bitod_reference_root(tmp_path_factory):
    return fixtures.make_bitod(tmp_path_factory.mktemp("bitod_reference"), "reference")


@pytest.fixture(scope="session")
def sgd_reference(sgd_reference_root):
    return corpus.load_sgd(sgd_reference_root)
