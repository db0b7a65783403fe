"""Versioned serialization: run configs, run artifacts, attention traces.

JSON is used wherever a human might read or edit (configs, metrics,
manifests); attention traces are raw little-endian binary with an explicit
header because tensor volume dominates there. All writers are
byte-deterministic for identical inputs: keys are sorted, floats use
their shortest round-trip form, and nothing wall-clock-dependent lands
in an artifact.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import Trajectory
from .guidance import GuidanceConfig, SampleResult
from .model import token_id

SCHEMA_VERSION = 1

_TRACE_MAGIC = b"ATRC1"
_TRACE_HEADER = struct.Struct("<c5I")


class ConfigError(ValueError):
    """Config validation failure with a stable machine-readable code."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class RunConfig:
    schema_version: int
    model: dict
    guidance: GuidanceConfig
    prompt: tuple
    trajectories: tuple
    out_dir: str | None = None
    suite: dict | None = None


_MODEL_KEYS = ("seed", "grid", "channels", "d_k", "layers", "render_scale",
               "attn_gain", "eps_scale", "value_scale")
_GUIDANCE_KEYS = ("eta", "lam", "epsilon", "denom_floor", "guided_steps",
                  "repeats_per_step", "layers", "total_steps", "seed", "mode",
                  "expand_radius", "prior_threshold", "prior_warmup",
                  "beta_start", "beta_end")


def parse_run_config(data: dict) -> RunConfig:
    """Validate a config dict, filling defaults for everything optional."""
    if not isinstance(data, dict):
        raise ConfigError("invalid_config", "config must be a JSON object")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError("unknown_schema_version",
                          f"unknown schema_version {version!r} (expected {SCHEMA_VERSION})")

    prompt_raw = data.get("prompt")
    if not prompt_raw or not isinstance(prompt_raw, (list, tuple)):
        raise ConfigError("invalid_config", "prompt must be a non-empty list")
    try:
        prompt = tuple(token_id(p) for p in prompt_raw)
    except ValueError as exc:
        raise ConfigError("invalid_config", str(exc)) from None

    model = data.get("model", {})
    if not isinstance(model, dict):
        raise ConfigError("invalid_config", "model must be an object")
    bad = set(model) - set(_MODEL_KEYS)
    if bad:
        raise ConfigError("invalid_config", f"unknown model fields: {sorted(bad)}")
    model = dict(model)
    if "grid" in model:
        model["grid"] = tuple(model["grid"])

    gdata = data.get("guidance", {})
    if not isinstance(gdata, dict):
        raise ConfigError("invalid_config", "guidance must be an object")
    bad = set(gdata) - set(_GUIDANCE_KEYS)
    if bad:
        raise ConfigError("invalid_config", f"unknown guidance fields: {sorted(bad)}")
    gdata = dict(gdata)
    if "layers" in gdata:
        gdata["layers"] = tuple(gdata["layers"])
    try:
        guidance = GuidanceConfig(**gdata)
    except (TypeError, ValueError) as exc:
        raise ConfigError("invalid_config", f"guidance: {exc}") from None

    trajs = []
    for item in data.get("trajectories", []):
        try:
            traj = Trajectory.from_json(item)
        except ValueError as exc:
            raise ConfigError("malformed_trajectory", str(exc)) from None
        if not 0 <= traj.token_index < len(prompt):
            raise ConfigError("token_index_out_of_range",
                              f"token index out of range: {traj.token_index} "
                              f"(prompt has {len(prompt)} tokens)")
        trajs.append(traj)

    out_dir = data.get("out_dir")
    if out_dir is not None and not isinstance(out_dir, str):
        raise ConfigError("invalid_config", "out_dir must be a string")

    suite = data.get("suite")
    if suite is not None:
        if (not isinstance(suite, dict) or set(suite) - {"n", "seed"}
                or not isinstance(suite.get("n", 20), int)
                or suite.get("n", 20) < 1):
            raise ConfigError("invalid_config",
                              'suite must be {"n": int >= 1, "seed": int}')
    return RunConfig(SCHEMA_VERSION, model, guidance, prompt, tuple(trajs),
                     out_dir, suite)


def load_run_config(path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError("invalid_config", f"config file not found: {p}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("invalid_config", f"{p}: not valid JSON ({exc})") from None
    return parse_run_config(data)


def config_to_dict(cfg: RunConfig) -> dict:
    g = cfg.guidance
    return {
        "schema_version": cfg.schema_version,
        "model": {k: (list(v) if isinstance(v, tuple) else v)
                  for k, v in sorted(cfg.model.items())},
        "guidance": {k: (list(v) if isinstance(v, tuple) else v)
                     for k, v in ((key, getattr(g, key)) for key in _GUIDANCE_KEYS)},
        "prompt": list(cfg.prompt),
        "trajectories": [t.to_json() for t in cfg.trajectories],
        "out_dir": cfg.out_dir,
        "suite": cfg.suite,
    }


def _dump_json(data) -> bytes:
    return (json.dumps(data, sort_keys=True, indent=2) + "\n").encode()


def _to_png(arr: np.ndarray) -> Image.Image:
    return Image.fromarray(arr, mode="L")


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def write_run_artifacts(result: SampleResult, out_dir, config: RunConfig | None = None) -> dict:
    """Write the run directory and return its manifest.

    Layout: config.json, image.png, mask_<i>.png (one per prompt token),
    metrics.json, energies.csv, manifest.json. The manifest lists a sha256
    for every other file; wall-clock time is deliberately excluded from
    all artifacts so reruns hash identically.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create run directory {out}: {exc}") from exc

    files = {}

    if config is not None:
        cfg_dict = config_to_dict(config)
        # The echo describes the run, not the invocation; leaving the
        # output path out keeps manifests byte-identical across reruns
        # into different directories.
        del cfg_dict["out_dir"]
    else:
        cfg_dict = {"schema_version": SCHEMA_VERSION,
                    "guidance": {k: (list(v) if isinstance(v, tuple) else v)
                                 for k, v in ((key, getattr(result.config, key))
                                              for key in _GUIDANCE_KEYS)}}
    files["config.json"] = _dump_json(cfg_dict)

    scene = result.scene
    img = np.clip(scene.intensity * 255.0, 0.0, 255.0).astype(np.uint8)
    for name, arr in [("image.png", img)] + [
            (f"mask_{i}.png", (scene.masks[i].astype(np.uint8) * 255))
            for i in sorted(scene.masks)]:
        buf = io.BytesIO()
        _to_png(arr).save(buf, format="PNG")
        files[name] = buf.getvalue()

    metrics = {
        "dtl": result.metrics["dtl"],
        "per_token": {str(k): v for k, v in result.metrics["per_token"].items()},
        "centroid_distance": {str(k): v for k, v in
                              result.metrics["centroid_distance"].items()},
        "unusable_mask_steps": list(result.unusable_mask_steps),
    }
    files["metrics.json"] = _dump_json(metrics)

    rows = ["step,t,e_control,e_movement,e_total,latent_norm,overshoots,guidance_skipped"]
    for r in result.records:
        rows.append(f"{r.step},{r.t},{r.e_control!r},{r.e_movement!r},"
                    f"{r.e_total!r},{r.latent_norm!r},{r.overshoots},"
                    f"{int(r.guidance_skipped)}")
    files["energies.csv"] = ("\n".join(rows) + "\n").encode()

    manifest = {"schema_version": SCHEMA_VERSION,
                "files": {name: _sha256(data) for name, data in sorted(files.items())}}
    files["manifest.json"] = _dump_json(manifest)

    for name, data in files.items():
        try:
            (out / name).write_bytes(data)
        except OSError as exc:
            raise OSError(f"cannot write {out / name}: {exc}") from exc
    return manifest


@dataclass(frozen=True)
class AttentionTrace:
    """Recorded attention tensors, (step, layer, location, token) row-major."""

    dims: tuple[int, int]
    m: int
    layers: int
    steps: int
    values: np.ndarray

    def __post_init__(self):
        h, w = self.dims
        expect = (self.steps, self.layers, h * w, self.m)
        if self.values.shape != expect:
            raise ValueError(f"trace payload shape {self.values.shape} != {expect}")
        if self.values.dtype != np.float32:
            raise ValueError("trace payload must be float32")


def trace_from_result(result: SampleResult, dims: tuple[int, int]) -> AttentionTrace:
    if not result.records:
        raise ValueError("empty result")
    layers = len(result.records[0].attention)
    m = result.records[0].attention[0].shape[1]
    values = np.array([[a for a in rec.attention] for rec in result.records],
                      dtype=np.float32)
    return AttentionTrace(dims, m, layers, len(result.records), values)


def write_trace(trace: AttentionTrace, path) -> None:
    h, w = trace.dims
    header = _TRACE_HEADER.pack(b"<", h, w, trace.m, trace.layers, trace.steps)
    payload = np.ascontiguousarray(trace.values, dtype="<f4").tobytes()
    Path(path).write_bytes(_TRACE_MAGIC + header + payload)


def read_trace(path) -> AttentionTrace:
    raw = Path(path).read_bytes()
    head_len = len(_TRACE_MAGIC) + _TRACE_HEADER.size
    if len(raw) < head_len or raw[:len(_TRACE_MAGIC)] != _TRACE_MAGIC:
        raise ValueError("corrupt trace: bad magic or truncated header")
    tag, h, w, m, layers, steps = _TRACE_HEADER.unpack(
        raw[len(_TRACE_MAGIC):head_len])
    if tag != b"<":
        raise ValueError(f"corrupt trace: unknown endianness tag {tag!r}")
    expected = steps * layers * h * w * m * 4
    actual = len(raw) - head_len
    if actual != expected:
        raise ValueError(f"corrupt trace: expected {expected} payload bytes, "
                         f"got {actual}")
    values = np.frombuffer(raw[head_len:], dtype="<f4").astype(np.float32)
    return AttentionTrace((h, w), m, layers, steps,
                          values.reshape(steps, layers, h * w, m))


def trace_roundtrip(trace: AttentionTrace, path) -> AttentionTrace:
    write_trace(trace, path)
    return read_trace(path)
