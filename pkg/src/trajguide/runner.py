"""Bridge from a validated RunConfig to an executed sandbox run.

Both the CLI and the HTTP service go through execute_run, so a given
config and seed produce the same SampleResult no matter which front end
asked for it.
"""

from __future__ import annotations

from .formats import RunConfig
from .guidance import SampleResult, guided_sample
from .model import SandboxModel, embed_tokens
from .scenes import SceneSpec, make_scene_suite


def build_model(cfg: RunConfig) -> SandboxModel:
    return SandboxModel(**cfg.model)


def prepare_run(cfg: RunConfig):
    model = build_model(cfg)
    tokens = embed_tokens(cfg.prompt, model.d_k, model.seed)
    return model, tokens


def execute_run(cfg: RunConfig, step_hook=None) -> tuple[SandboxModel, SampleResult]:
    model, tokens = prepare_run(cfg)
    result = guided_sample(model, tokens, cfg.trajectories, cfg.guidance,
                           step_hook=step_hook)
    return model, result


def scene_suite_for(cfg: RunConfig, model: SandboxModel) -> list:
    """Scenes an ablation or sweep evaluates: the config's own scene,
    or the seeded built-in suite when the config asks for one."""
    if cfg.suite is not None:
        return make_scene_suite(cfg.suite.get("n", 20),
                                cfg.suite.get("seed", model.seed), model.grid)
    if not cfg.trajectories:
        raise ValueError("config has no trajectories and no suite")
    from .model import VOCAB

    prompt = tuple(VOCAB[i] for i in cfg.prompt)
    return [SceneSpec("config_scene", prompt, cfg.trajectories)]
