import pytest

from spdcsim import default_config, resolve


@pytest.fixture(scope="session")
def default_run():
    return resolve(default_config())


@pytest.fixture(scope="session")
def system(default_run):
    return default_run.system
