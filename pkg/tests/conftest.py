import numpy as np
import pytest

from uavsense import RunOptions, ScenarioConfig, build_tables


@pytest.fixture
def small_config():
    """4 UAVs over an 8x8 grid with a small array and frame; fast to build."""
    return ScenarioConfig(
        uav_count=4,
        grid_side=8,
        area_side_m=40.0,
        array_side=4,
        symbols_per_frame=8,
        subcarriers=16,
        trials=10,
        master_seed=1234,
    )


@pytest.fixture(scope="session")
def default_tables_capon():
    return build_tables(ScenarioConfig(), RunOptions(beamformer="capon"))


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
