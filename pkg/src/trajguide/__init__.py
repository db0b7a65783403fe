"""Trajectory-conditioned guidance for a deterministic diffusion sandbox.

Draw a polyline, bind it to a prompt token, and the sampler steers that
token's attention mass onto the line by descending a distance-aware
energy in latent space during the early reverse steps.
"""

from .energy import (EnergyBreakdown, EnergyConfig, box_energy, control_energy,
                     control_energy_grad, energy_grad_wrt_attention,
                     mask_ratio_energy, movement_energy, movement_energy_grad,
                     prior_structure_mask, total_energy)
from .formats import (AttentionTrace, ConfigError, RunConfig, config_to_dict,
                      load_run_config, parse_run_config, read_trace,
                      trace_from_result, trace_roundtrip, write_run_artifacts,
                      write_trace)
from .geometry import (CellSet, DistanceField, Trajectory,
                       combined_distance_field, distance_transform,
                       expand_trajectory_to_mask, rasterize_polyline,
                       resample_field)
from .guidance import (AblationTable, GuidanceConfig, GuidanceDivergedError,
                       MODES, NoiseSchedule, SampleResult, StepRecord,
                       build_schedule, ddim_step, guidance_update,
                       guided_sample, run_ablation, run_scene)
from .metrics import (InstanceMask, dtl, image_distance_field, proximity_score,
                      score_scene, segment_blobs)
from .model import (AttentionMap, LatentState, RenderedScene, SandboxModel,
                    TokenSet, VOCAB, cross_attention, embed_tokens, token_id)
from .runner import build_model, execute_run, prepare_run, scene_suite_for
from .scenes import SceneSpec, make_scene_suite

__version__ = "0.1.0"

__all__ = [
    "AblationTable", "AttentionMap", "AttentionTrace", "CellSet", "ConfigError",
    "DistanceField", "EnergyBreakdown", "EnergyConfig", "GuidanceConfig",
    "GuidanceDivergedError", "InstanceMask", "LatentState", "MODES",
    "NoiseSchedule", "RenderedScene", "RunConfig", "SampleResult",
    "SandboxModel", "SceneSpec", "StepRecord", "TokenSet", "Trajectory",
    "VOCAB", "box_energy", "build_model", "build_schedule",
    "combined_distance_field", "config_to_dict", "control_energy",
    "control_energy_grad", "cross_attention", "ddim_step", "distance_transform",
    "dtl", "embed_tokens", "energy_grad_wrt_attention", "execute_run",
    "expand_trajectory_to_mask", "guidance_update", "guided_sample",
    "image_distance_field", "load_run_config", "make_scene_suite",
    "mask_ratio_energy", "movement_energy", "movement_energy_grad",
    "parse_run_config", "prepare_run", "prior_structure_mask",
    "proximity_score", "rasterize_polyline", "read_trace", "resample_field",
    "run_ablation", "run_scene", "scene_suite_for", "score_scene",
    "segment_blobs", "token_id", "total_energy", "trace_from_result",
    "trace_roundtrip", "write_run_artifacts", "write_trace",
]
