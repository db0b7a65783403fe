"""Guided reverse sampling: noise schedule, latent update rule, mode zoo.

The sampler is a deterministic DDIM-style reverse process. During the
first `guided_steps` steps the latent receives `repeats_per_step` gradient
updates of the selected energy (scaled by sigma_t^2 * eta) before each
denoise. Modes:

  none              unguided reference
  control_only      inverse-distance control energy only
  full              control + lam * movement (the distance-awareness energy)
  prior_structure   thresholded-attention mask recentered on the trajectory
  trajectory_expand trajectory dilated by a fixed radius into a mask
  box               trajectory bounding box as the mask
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import energy as energy_mod
from . import metrics as metrics_mod
from .energy import EnergyBreakdown, EnergyConfig
from .geometry import CellSet, Trajectory, combined_distance_field, expand_trajectory_to_mask, rasterize_polyline
from .model import LatentState, SandboxModel, TokenSet

MODES = ("none", "control_only", "full", "prior_structure", "trajectory_expand", "box")


class GuidanceDivergedError(RuntimeError):
    """Raised when a guidance update produces non-finite values."""

    def __init__(self, message, step=None, repeat=None, grad_max=None):
        super().__init__(message)
        self.step = step
        self.repeat = repeat
        self.grad_max = grad_max


@dataclass(frozen=True)
class GuidanceConfig:
    eta: float = 30.0
    lam: float = 10.0
    epsilon: float = 1.0
    denom_floor: float = 1e-8
    guided_steps: int = 10
    repeats_per_step: int = 5
    layers: tuple[int, ...] = (0, 1)
    total_steps: int = 50
    seed: int = 450
    mode: str = "full"
    expand_radius: float = 2.0
    prior_threshold: float = 0.3
    prior_warmup: int = 5
    beta_start: float = 1e-4
    beta_end: float = 0.02

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("eta must be >= 0")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.total_steps < 1:
            raise ValueError("total_steps must be >= 1")
        if not 0 <= self.guided_steps <= self.total_steps:
            raise ValueError("guided_steps must be in [0, total_steps]")
        if self.repeats_per_step < 0:
            raise ValueError("repeats_per_step must be >= 0")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        object.__setattr__(self, "layers", tuple(sorted(set(int(x) for x in self.layers))))

    def energy_config(self) -> EnergyConfig:
        return EnergyConfig(lam=self.lam, epsilon=self.epsilon, denom_floor=self.denom_floor)


@dataclass(frozen=True)
class NoiseSchedule:
    """Cumulative-product linear-beta schedule; sigma_t = sqrt((1-a_t)/a_t)."""

    betas: np.ndarray
    alpha_bars: np.ndarray
    sigmas: np.ndarray

    @property
    def steps(self) -> int:
        return len(self.betas)

    def alpha_bar(self, t: int) -> float:
        if t == 0:
            return 1.0
        return float(self.alpha_bars[t - 1])

    def sigma(self, t: int) -> float:
        if not 1 <= t <= self.steps:
            raise ValueError(f"sigma defined for t in [1, {self.steps}]")
        return float(self.sigmas[t - 1])


def sigma_from_alpha_bar(alpha_bar: float) -> float:
    return math.sqrt((1.0 - alpha_bar) / alpha_bar)


def build_schedule(total_steps: int, beta_start: float = 1e-4,
                   beta_end: float = 0.02) -> NoiseSchedule:
    if total_steps < 1:
        raise ValueError("total_steps must be >= 1")
    if not 0 < beta_start <= beta_end < 1:
        raise ValueError("betas must satisfy 0 < beta_start <= beta_end < 1")
    betas = np.linspace(beta_start, beta_end, total_steps)
    alpha_bars = np.cumprod(1.0 - betas)
    sigmas = np.sqrt((1.0 - alpha_bars) / alpha_bars)
    return NoiseSchedule(betas, alpha_bars, sigmas)


def ddim_step(z: np.ndarray, eps_hat: np.ndarray, t: int,
              schedule: NoiseSchedule) -> np.ndarray:
    """Deterministic reverse step z_t -> z_{t-1}."""
    a_t = schedule.alpha_bar(t)
    a_prev = schedule.alpha_bar(t - 1)
    x0 = (z - math.sqrt(1.0 - a_t) * eps_hat) / math.sqrt(a_t)
    return math.sqrt(a_prev) * x0 + math.sqrt(1.0 - a_prev) * eps_hat


@dataclass(frozen=True)
class GuidanceStepInfo:
    before: EnergyBreakdown
    after: EnergyBreakdown
    overshoot: bool


@dataclass
class StepRecord:
    step: int
    t: int
    e_control: float
    e_movement: float
    e_total: float
    latent_norm: float
    overshoots: int
    guidance_skipped: bool
    attention: list


@dataclass
class SampleResult:
    config: GuidanceConfig
    records: list
    scene: object
    metrics: dict
    wall_clock: float
    latent_trace: list | None = None
    unusable_mask_steps: list = field(default_factory=list)

    @property
    def dtl(self) -> float:
        return self.metrics["dtl"]


class _EnergyOp:
    """Energy functional + gradient for one guidance mode; swapping this is
    the only thing the ablation variants change."""

    def __init__(self, kind: str, fields=None, masks=None, layers=(), cfg=None):
        self.kind = kind
        self.fields = fields or {}
        self.masks = masks or {}
        self.layers = layers
        self.cfg = cfg

    def breakdown(self, attn) -> EnergyBreakdown:
        if self.kind == "distance":
            return energy_mod.total_energy(attn, self.fields, self.layers, self.cfg)
        return energy_mod.mask_total_energy(attn, self.masks, self.layers)

    def grads(self, attn):
        if self.kind == "distance":
            return energy_mod.energy_grad_wrt_attention(attn, self.fields, self.layers, self.cfg)
        return energy_mod.mask_energy_grad_wrt_attention(attn, self.masks, self.layers)


def guidance_update(model: SandboxModel, state: LatentState, tokens: TokenSet,
                    op: _EnergyOp, cfg: GuidanceConfig, grad_hook=None,
                    step: int | None = None, repeat: int | None = None):
    """One latent gradient step: z <- z - sigma_t^2 * eta * dE/dz.

    Returns the updated state plus before/after energy breakdowns; an
    energy increase is flagged as an overshoot event (there is no line
    search, matching the method's plain gradient updates).
    """
    out = model.denoise_step(state, tokens)
    grads = op.grads(out.attention)
    if grad_hook is not None:
        grads = grad_hook(step, grads)
    g = model.grad_energy_wrt_latent(state, tokens, grads)
    if not np.all(np.isfinite(g)):
        raise GuidanceDivergedError("guidance diverged: non-finite energy gradient",
                                    step=step, repeat=repeat,
                                    grad_max=float(np.nanmax(np.abs(g))))
    sigma = state.schedule.sigma(state.t)
    z_new = state.z - sigma * sigma * cfg.eta * g
    if not np.all(np.isfinite(z_new)):
        raise GuidanceDivergedError("guidance diverged: non-finite latent",
                                    step=step, repeat=repeat,
                                    grad_max=float(np.max(np.abs(g))))
    new_state = LatentState(z_new, state.t, state.schedule)
    before = op.breakdown(out.attention)
    after = op.breakdown(model.denoise_step(new_state, tokens).attention)
    return new_state, GuidanceStepInfo(before, after, after.e_total > before.e_total)


def _mode_op(model: SandboxModel, trajectories, cfg: GuidanceConfig, fields):
    if cfg.mode in ("full", "control_only"):
        ecfg = cfg.energy_config()
        if cfg.mode == "control_only":
            ecfg = EnergyConfig(lam=0.0, epsilon=cfg.epsilon, denom_floor=cfg.denom_floor)
        return _EnergyOp("distance", fields=fields, layers=cfg.layers, cfg=ecfg)
    if cfg.mode == "trajectory_expand":
        masks = {t.token_index: expand_trajectory_to_mask(t, cfg.expand_radius, model.grid)
                 for t in trajectories}
        return _EnergyOp("mask", masks=masks, layers=cfg.layers)
    if cfg.mode == "box":
        masks = {}
        for t in trajectories:
            cells = np.array(sorted(rasterize_polyline(t, model.grid).cells))
            r0, c0 = cells.min(axis=0)
            r1, c1 = cells.max(axis=0)
            m = np.zeros(model.grid, dtype=bool)
            m[r0:r1 + 1, c0:c1 + 1] = True
            masks[t.token_index] = CellSet(model.grid, frozenset(
                zip(*(idx.tolist() for idx in np.nonzero(m)))))
        return _EnergyOp("mask", masks=masks, layers=cfg.layers)
    raise ValueError(f"mode {cfg.mode!r} has no static energy operator")


def _prior_masks(attn, trajectories, cfg: GuidanceConfig, dims):
    """Per-step masks for prior_structure: threshold the Phi-averaged
    attention column and recenter it on the trajectory bbox center."""
    by_layer = {m.layer: m for m in attn}
    stack = np.mean([by_layer[tau].values for tau in cfg.layers], axis=0)
    masks = {}
    for t in trajectories:
        masks[t.token_index] = energy_mod.prior_structure_mask(
            stack[:, t.token_index], cfg.prior_threshold, t, dims)
    return masks


def guided_sample(model: SandboxModel, tokens: TokenSet, trajectories,
                  cfg: GuidanceConfig, grad_hook=None,
                  record_latents: bool = False, step_hook=None) -> SampleResult:
    """Run the full reverse process and score the rendered scene.

    Deterministic for a fixed config; guidance is applied only during the
    first `guided_steps` steps, `repeats_per_step` times each.
    """
    start = time.perf_counter()
    trajectories = tuple(trajectories)
    for t in trajectories:
        if t.token_index >= tokens.m:
            raise ValueError("token index out of range")
    schedule = build_schedule(cfg.total_steps, cfg.beta_start, cfg.beta_end)
    fields = {t.token_index: combined_distance_field(t, model.grid) for t in trajectories}
    log_cfg = cfg.energy_config()

    static_op = None
    if trajectories and cfg.mode not in ("none", "prior_structure"):
        static_op = _mode_op(model, trajectories, cfg, fields)

    z = model.initial_latent(cfg.seed)
    records = []
    latent_trace = [] if record_latents else None
    unusable_steps = []

    for step, t in enumerate(range(cfg.total_steps, 0, -1), start=1):
        state = LatentState(z, t, schedule)
        overshoots = 0
        skipped = False
        guide = (trajectories and cfg.mode != "none" and step <= cfg.guided_steps
                 and cfg.repeats_per_step > 0)
        if guide and cfg.mode == "prior_structure" and step <= cfg.prior_warmup:
            guide = False
        if guide:
            if cfg.mode == "prior_structure":
                attn_now = model.denoise_step(state, tokens).attention
                try:
                    masks = _prior_masks(attn_now, trajectories, cfg, model.grid)
                    op = _EnergyOp("mask", masks=masks, layers=cfg.layers)
                except ValueError:
                    unusable_steps.append(step)
                    skipped = True
                    op = None
            else:
                op = static_op
            if op is not None:
                for rep in range(cfg.repeats_per_step):
                    state, info = guidance_update(model, state, tokens, op, cfg,
                                                  grad_hook=grad_hook, step=step,
                                                  repeat=rep)
                    overshoots += int(info.overshoot)

        out = model.denoise_step(state, tokens)
        if fields:
            bd = energy_mod.total_energy(out.attention, fields, cfg.layers, log_cfg)
        else:
            bd = EnergyBreakdown(0.0, 0.0, 0.0, log_cfg.lam, {})
        if not (math.isfinite(bd.e_total) and math.isfinite(bd.e_control)
                and math.isfinite(bd.e_movement)):
            raise GuidanceDivergedError("guidance diverged: non-finite energy",
                                        step=step)
        z = ddim_step(state.z, out.eps_hat, t, schedule)
        if record_latents:
            latent_trace.append(z.copy())
        records.append(StepRecord(step, t, bd.e_control, bd.e_movement, bd.e_total,
                                  float(np.linalg.norm(z)), overshoots, skipped,
                                  [a.values.copy() for a in out.attention]))
        if step_hook is not None:
            step_hook(records[-1], z)

    scene = model.render_scene(z, tokens)
    result_metrics = metrics_mod.score_scene(scene, trajectories, model.grid,
                                             model.render_scale)
    return SampleResult(cfg, records, scene, result_metrics,
                        time.perf_counter() - start, latent_trace, unusable_steps)


@dataclass(frozen=True)
class AblationRow:
    variant: str
    mean_dtl: float
    scene_dtls: tuple


@dataclass(frozen=True)
class AblationTable:
    rows: tuple

    def as_dict(self) -> dict:
        return {"rows": [{"variant": r.variant, "mean_dtl": r.mean_dtl,
                          "scene_dtls": list(r.scene_dtls)} for r in self.rows]}


def run_scene(model: SandboxModel, scene, cfg: GuidanceConfig) -> SampleResult:
    tokens = scene.token_set(model)
    return guided_sample(model, tokens, scene.trajectories, cfg)


def run_ablation(model: SandboxModel, scenes, variants, cfg: GuidanceConfig,
                 max_workers: int | None = None) -> AblationTable:
    """Mean DTL per variant over a scene suite.

    A variant is a mode name or a ("lambda", value) pair applied to
    mode=full. Scenes are independent sessions, so they may be evaluated
    on a thread pool.
    """
    if not scenes:
        raise ValueError("at least one scene required")
    if not variants:
        raise ValueError("at least one variant required")

    jobs = []
    for variant in variants:
        if isinstance(variant, (tuple, list)) and variant[0] == "lambda":
            label = f"lambda={variant[1]:g}"
            vcfg = replace(cfg, mode="full", lam=float(variant[1]))
        else:
            label = str(variant)
            vcfg = replace(cfg, mode=str(variant))
        jobs.append((label, vcfg))

    rows = []
    for label, vcfg in jobs:
        dtls = _map_scenes(model, scenes, vcfg, max_workers)
        rows.append(AblationRow(label, float(np.mean(dtls)), tuple(dtls)))
    return AblationTable(tuple(rows))


def _map_scenes(model, scenes, cfg, max_workers):
    if max_workers is None or max_workers <= 1:
        return [run_scene(model, sc, cfg).dtl for sc in scenes]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(lambda sc: run_scene(model, sc, cfg).dtl, scenes))
