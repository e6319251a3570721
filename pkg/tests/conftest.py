"""Fixture layer over the synthetic-bundle builders."""

import pytest

from synthbundle import ACCEPTANCE_RESULTS, write_bundle


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance gate")
        for name, verdict in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(f"[ACCEPTANCE] {name}: {verdict}")


@pytest.fixture(scope="session")
def identity_bundle(tmp_path_factory):
    return write_bundle(tmp_path_factory.mktemp("identity_bundle"))


@pytest.fixture(scope="session")
def identity_bundle_with_holes(tmp_path_factory):
    return write_bundle(tmp_path_factory.mktemp("identity_holes"), holes=True)


@pytest.fixture()
def bundle_factory(tmp_path):
    def make(name="bundle", **kwargs):
        return write_bundle(tmp_path / name, **kwargs)

    return make
