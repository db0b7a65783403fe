"""Shared fixtures: one sandbox model and one cheap guided run per session."""

import pytest

from trajguide.geometry import Trajectory
from trajguide.guidance import GuidanceConfig, guided_sample
from trajguide.model import SandboxModel, embed_tokens


@pytest.fixture(scope="session")
def model():
    return SandboxModel()


@pytest.fixture(scope="session")
def tokens(model):
    return embed_tokens(("cat", "moon"), model.d_k, model.seed)


@pytest.fixture(scope="session")
def diag_traj():
    return Trajectory(0, (((2.0, 2.0), (13.0, 13.0)),))


@pytest.fixture(scope="session")
def fast_cfg():
    """Short schedule for tests that only need a complete run, not a good one."""
    return GuidanceConfig(total_steps=6, guided_steps=2, repeats_per_step=1)


@pytest.fixture(scope="session")
def fast_result(model, tokens, diag_traj, fast_cfg):
    return guided_sample(model, tokens, (diag_traj,), fast_cfg)
