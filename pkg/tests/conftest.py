import numpy as np
import pytest

from parachute.model import ModelParams
from parachute.secondbest import SolverConfig, solve


# parameter block used for the second-best study
@pytest.fixture(scope="session")
def sb_params():
    return ModelParams()


@pytest.fixture(scope="session")
def fb_params():
    return ModelParams(a_bar=0.6, eps_m=0.1, m=0.3, cost_kind="quadratic")


@pytest.fixture(scope="session")
def sb_runs(sb_params):
    cfg = SolverConfig()
    runs = {"free": solve(sb_params, cfg.replace(mode="accident-free"))}
    for m in (0.1, 0.2, 0.3):
        runs[m] = solve(sb_params.replace(m=m), cfg)
    return runs


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
