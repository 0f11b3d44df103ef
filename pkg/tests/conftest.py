import pytest

from spc_fmcw.config import table1_scenario
from spc_fmcw.pipeline import ProcessingSettings, simulate


@pytest.fixture(scope="session")
def reference_run():
    """100 averaged chirps of the reference scenario with the default LO profile."""
    return simulate(table1_scenario(n_chirps=100, seed=1), ProcessingSettings(), jobs=4)
