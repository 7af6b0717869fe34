from pathlib import Path

import numpy as np
import pytest

from src.models.hardware import HardwareConfig
from src.models.serving import SchedulerConfig
from src.models.supernet import SuperNetSpec
from src.sim.workload import generate_trace
from src.supernet.elastic import SuperNet, load_picks
from src.table.candidates import build_candidate_set
from src.table.latency_table import build_table

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
GOLDEN = Path(__file__).resolve().parent / "golden"


def tiny_spec() -> SuperNetSpec:
    """Three layers small enough to check every number by hand.

    stem      (8, 3)   3x3  weights 216
    s0.b0     (16, 8)  1x1  weights 128, C follows stem K
    s0.b1     (16, 16) 1x1  weights 256, C follows s0.b0 K, only at depth 2
    """
    return SuperNetSpec.model_validate(
        {
            "name": "tiny",
            "depth_choices": [[1, 2]],
            "layers": [
                {"name": "stem", "k": 8, "c": 3, "r": 3, "s": 3, "xo": 4, "yo": 4},
                {"name": "s0.b0", "k": 16, "c": 8, "r": 1, "s": 1, "xo": 4, "yo": 4, "stage": 0, "block": 0,
                 "expand_choices": [0.5, 1.0], "channel_source": 0},
                {"name": "s0.b1", "k": 16, "c": 16, "r": 1, "s": 1, "xo": 4, "yo": 4, "stage": 0, "block": 1,
                 "expand_choices": [0.5, 1.0], "channel_source": 1},
            ],
        }
    )


@pytest.fixture(scope="session")
def tiny():
    return SuperNet(tiny_spec())


@pytest.fixture(scope="session")
def resnet():
    return SuperNet.from_file(FIXTURES / "resnet50_like.json")


@pytest.fixture(scope="session")
def mobv3():
    return SuperNet.from_file(FIXTURES / "mobv3_like.json")


@pytest.fixture(scope="session")
def resnet_subnets(resnet):
    return resnet.enumerate_subnets(load_picks(FIXTURES / "resnet50_like_picks.json").picks)


@pytest.fixture(scope="session")
def mobv3_subnets(mobv3):
    return mobv3.enumerate_subnets(load_picks(FIXTURES / "mobv3_like_picks.json").picks)


@pytest.fixture(scope="session")
def zcu104():
    return HardwareConfig.model_validate_json((FIXTURES / "hw_zcu104.json").read_text())


@pytest.fixture(scope="session")
def u50():
    return HardwareConfig.model_validate_json((FIXTURES / "hw_u50.json").read_text())


@pytest.fixture(scope="session")
def resnet_candidates(resnet, resnet_subnets, zcu104):
    return build_candidate_set(resnet, resnet_subnets, zcu104, max_columns=100, grid_samples=200, seed=0)


@pytest.fixture(scope="session")
def resnet_table(resnet, resnet_subnets, resnet_candidates, zcu104):
    return build_table(resnet, resnet_subnets, resnet_candidates, zcu104)


@pytest.fixture(scope="session")
def resnet_trace(resnet_subnets, resnet_table):
    return generate_trace(resnet_subnets, 1000, seed=7, table=resnet_table)


@pytest.fixture
def scheduler_config():
    return SchedulerConfig(window=10, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
