"""Shared fixtures: the small synthetic corpus and its stub sidecars."""

import pytest

from noteval.corpus import save_corpus
from noteval.fixtures import gen_fixtures
from noteval.stubembed import write_stub_sidecars


@pytest.fixture(scope="session")
def fixture_records():
    return gen_fixtures(2, seed=7)


@pytest.fixture(scope="session")
def fixture_corpus_dir(fixture_records, tmp_path_factory):
    root = tmp_path_factory.mktemp("fixture_corpus")
    save_corpus(fixture_records, root)
    return root


@pytest.fixture(scope="session")
def fixture_sidecar_dir(fixture_records, tmp_path_factory):
    root = tmp_path_factory.mktemp("fixture_sidecars")
    write_stub_sidecars(fixture_records, root)
    return root
