import os
import sys

import numpy as np
import pytest

# Add src directory to Python path
SRC_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'src')
if SRC_DIR not in sys.path:
    sys.path.insert(0, SRC_DIR)

from arm_env import make_scenario  # noqa: E402
from config import RunConfig  # noqa: E402
from traj_data import Trajectory  # noqa: E402


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help='run end-to-end acceptance tests')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def self_scenario():
    return make_scenario('self')


@pytest.fixture
def two_link(self_scenario):
    return self_scenario.agent_config


def make_trajectory(domain='E', task_id='t0', length=5, state_dim=6, with_actions=False, action_dim=2, offset=0.0):
    states = np.arange(length * state_dim, dtype=np.float64).reshape(length, state_dim) * 0.01 + offset
    actions = np.full((length - 1, action_dim), 0.25) if with_actions else None
    return Trajectory(domain, task_id, states, actions)


@pytest.fixture
def tiny_config(tmp_path):
    """A configuration small enough to run every stage in a few seconds."""
    return RunConfig(
        scenario='self',
        seed=0,
        output_dir=str(tmp_path / 'out'),
        demos_per_proxy_task=6,
        inference_demo_count=4,
        num_proxy_tasks=2,
        position_steps=20,
        position_batch=16,
        batch_size=16,
        inner_steps=2,
        outer_iterations=2,
        exploration_steps=1000,
        idm_epochs=1,
        bc_epochs=2,
        bc_batch=32,
        eval_episodes=2,
        progress=False,
    )
