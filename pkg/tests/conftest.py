"""Shared fixtures and the ``slow`` marker switch."""

import json
from pathlib import Path
from typing import Callable, Dict

import numpy as np
import pytest

from atep.neat.config import MutationRates
from atep.poet.config import PoetConfig
from atep.poet.context import EvaluationContext
from atep.sim.walker import RolloutCounter

from builders import small_poet_config


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def poet_cfg() -> PoetConfig:
    return small_poet_config()


@pytest.fixture
def counter() -> RolloutCounter:
    return RolloutCounter()


@pytest.fixture
def ctx(poet_cfg: PoetConfig, counter: RolloutCounter) -> EvaluationContext:
    return EvaluationContext(poet_cfg, counter=counter)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def frozen_rates() -> MutationRates:
    return MutationRates.zero()


@pytest.fixture
def tiny_run_config(tmp_path: Path) -> Callable[..., Path]:
    """Factory writing a small run config file; keyword sections override the defaults."""

    def write(name: str = "tiny", **sections: Dict) -> Path:
        data = {
            "run": {
                "name": name,
                "seed": 1,
                "iterations": 0,
                "checkpoint_every_iters": 2,
                "root_dir": str(tmp_path / "runs"),
            },
            "neat": {"pop_size": 6},
            "terrain": {"cells": 30, "spawn_pad_cells": 3},
            "sim": {"max_steps": 80, "look_ahead_cells": 4},
            "engine": {"max_active": 3, "max_children": 3, "max_admitted": 1},
            "schedule": {"n_reproduce_iters": 2, "n_transfer_iters": 2},
        }
        for section, values in sections.items():
            data.setdefault(section, {}).update(values)
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(data), encoding="utf-8")
        return path

    return write
