"""Deterministic desk-scale latent-diffusion sandbox.

A stand-in for a full text-to-image model: a small untrained denoiser whose
cross-attention layers expose per-token attention maps, plus a renderer
that places one blob per prompt token at that token's final attention
centroid. Because the renderer is tied to attention, "attention moved
implies object moved" holds literally, which is what makes layout guidance
testable at this scale. All weights derive from a seed; there are no
weight files and no training.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import bilinear_resample

# Fixed sandbox vocabulary; prompts may name tokens by word or integer id.
VOCAB = (
    "cat", "dog", "car", "tree", "sun", "moon", "bird", "fish",
    "house", "boat", "star", "cloud", "rock", "lamp", "cup", "hat",
    "ball", "kite", "fox", "owl", "ant", "bee", "leaf", "key",
)

_EMBED_STREAM = 11
_WEIGHT_STREAM = 7
_SAMPLE_STREAM = 3


@dataclass(frozen=True)
class TokenSet:
    """Prompt tokens with their seeded unit-norm embedding rows."""

    tokens: tuple[int, ...]
    embeddings: np.ndarray

    @property
    def m(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class LatentState:
    """Latent grid plus its position on the noise schedule."""

    z: np.ndarray
    t: int
    schedule: object = None

    def __post_init__(self):
        if not np.all(np.isfinite(self.z)):
            raise ValueError("latent contains non-finite entries")
        if self.schedule is not None and not 0 <= self.t <= self.schedule.steps:
            raise ValueError(f"timestep {self.t} outside schedule range")


@dataclass(frozen=True)
class AttentionMap:
    """Row-stochastic (H*W) x m location-over-token attention for one layer."""

    layer: int
    dims: tuple[int, int]
    values: np.ndarray


@dataclass(frozen=True)
class DenoiserOutput:
    eps_hat: np.ndarray
    attention: list


@dataclass(frozen=True)
class RenderedScene:
    """8x-upscaled blob render with per-token ground-truth footprints."""

    intensity: np.ndarray
    labels: np.ndarray
    blob_centers: dict
    blob_sigmas: dict
    masks: dict
    final_attention: AttentionMap
    scale: int


def token_id(word_or_id) -> int:
    if isinstance(word_or_id, str):
        try:
            return VOCAB.index(word_or_id)
        except ValueError:
            raise ValueError(f"unknown vocabulary word: {word_or_id!r}") from None
    return int(word_or_id)


def embed_tokens(prompt, d_k: int, seed: int) -> TokenSet:
    """Seeded deterministic embedding lookup; unit-norm rows per token id."""
    if len(prompt) == 0:
        raise ValueError("empty prompt")
    if d_k < 2:
        raise ValueError("d_k must be >= 2")
    ids = tuple(token_id(p) for p in prompt)
    rows = []
    for tok in ids:
        rng = np.random.default_rng([_EMBED_STREAM, int(seed), tok])
        v = rng.standard_normal(d_k)
        rows.append(v / np.linalg.norm(v))
    return TokenSet(ids, np.array(rows))


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def cross_attention(features: np.ndarray, tokens: TokenSet, layer: int = 0,
                    dims: tuple[int, int] | None = None) -> AttentionMap:
    """Row-softmax of scaled feature/embedding dot products."""
    d_k = tokens.embeddings.shape[1]
    if features.shape[1] != d_k:
        raise ValueError(f"feature width {features.shape[1]} != d_k {d_k}")
    logits = features @ tokens.embeddings.T / math.sqrt(d_k)
    n = features.shape[0]
    if dims is None:
        side = int(math.isqrt(n))
        dims = (side, n // side)
    return AttentionMap(layer, dims, _softmax_rows(logits))


class SandboxModel:
    """Two cross-attention layers over a per-cell linear feature map.

    Each layer: query = x @ W_q (per cell), keys/values are per-layer
    projections of the token embeddings, residual context add. A linear
    noise head reads the final features. The computation graph is small
    and fixed, so the energy gradient w.r.t. the latent is hand-derived
    (see grad_energy_wrt_latent) rather than autodiffed.
    """

    def __init__(self, seed: int = 450, grid: tuple[int, int] = (16, 16),
                 channels: int = 8, d_k: int = 8, layers: int = 2,
                 render_scale: int = 8, attn_gain: float = 10.0,
                 eps_scale: float = 0.2, value_scale: float = 0.5):
        self.seed = int(seed)
        self.grid = (int(grid[0]), int(grid[1]))
        self.channels = int(channels)
        self.d_k = int(d_k)
        self.n_layers = int(layers)
        self.render_scale = int(render_scale)
        rng = np.random.default_rng([_WEIGHT_STREAM, self.seed])
        c, dk = self.channels, self.d_k
        self.w_q = [rng.standard_normal((c, dk)) * (attn_gain / math.sqrt(c))
                    for _ in range(self.n_layers)]
        self.w_k = [rng.standard_normal((dk, dk)) / math.sqrt(dk)
                    for _ in range(self.n_layers)]
        self.w_v = [rng.standard_normal((dk, c)) * (value_scale / math.sqrt(dk))
                    for _ in range(self.n_layers)]
        self.w_out = rng.standard_normal((c, c)) * (eps_scale / math.sqrt(c))

    @property
    def cells(self) -> int:
        return self.grid[0] * self.grid[1]

    def initial_latent(self, seed: int, coarse: int = 4) -> np.ndarray:
        """Spatially smooth seeded noise.

        Coarse Gaussian grids are upsampled bilinearly per channel so
        token responses form coherent regions instead of per-cell
        speckle; without this the attention centroid of every token
        collapses to the grid center and layout guidance has nothing
        coherent to move.
        """
        rng = np.random.default_rng([_SAMPLE_STREAM, int(seed)])
        base = rng.standard_normal((coarse, coarse, self.channels))
        return np.stack([bilinear_resample(base[:, :, ch], self.grid)
                         for ch in range(self.channels)], axis=-1)

    def _forward(self, z: np.ndarray, tokens: TokenSet):
        x = z.reshape(self.cells, self.channels)
        xs = [x]
        attn = []
        keys = []
        vals = []
        for ell in range(self.n_layers):
            k = tokens.embeddings @ self.w_k[ell]
            v = tokens.embeddings @ self.w_v[ell]
            a = cross_attention(x @ self.w_q[ell], TokenSet(tokens.tokens, k),
                                layer=ell, dims=self.grid)
            x = x + a.values @ v
            xs.append(x)
            attn.append(a)
            keys.append(k)
            vals.append(v)
        return xs, attn, keys, vals

    def denoise_step(self, state: LatentState, tokens: TokenSet) -> DenoiserOutput:
        """One forward pass: predicted noise plus every layer's attention."""
        if state.z.shape != (*self.grid, self.channels):
            raise ValueError(f"latent shape {state.z.shape} != model "
                             f"{(*self.grid, self.channels)}")
        xs, attn, _, _ = self._forward(state.z, tokens)
        eps = (xs[-1] @ self.w_out).reshape(*self.grid, self.channels)
        return DenoiserOutput(eps, attn)

    def grad_energy_wrt_latent(self, state: LatentState, tokens: TokenSet,
                               energy_grads) -> np.ndarray:
        """Exact reverse pass of sum_l <energy_grads[l], A_l> through the
        softmax, attention residuals, and feature maps, back to the latent."""
        xs, attn, keys, vals = self._forward(state.z, tokens)
        for g, a in zip(energy_grads, attn):
            if g.shape != a.values.shape:
                raise ValueError(f"energy grad shape {g.shape} != attention "
                                 f"{a.values.shape}")
        dx = np.zeros((self.cells, self.channels))
        scale = 1.0 / math.sqrt(self.d_k)
        for ell in reversed(range(self.n_layers)):
            a = attn[ell].values
            da = energy_grads[ell] + dx @ vals[ell].T
            dlogits = a * (da - (da * a).sum(axis=1, keepdims=True))
            dq = dlogits @ keys[ell] * scale
            dx = dx + dq @ self.w_q[ell].T
        return dx.reshape(*self.grid, self.channels)

    def render_scene(self, z0: np.ndarray, tokens: TokenSet,
                     sigma_bounds: tuple[float, float] = (0.6, 2.2),
                     mask_radius_sigmas: float = 1.6,
                     sharpness: float = 4.0) -> RenderedScene:
        """Render one Gaussian blob per token at its final-attention centroid.

        The blob center is the attention-weighted centroid of the last
        layer's column for that token, mapped to image space; the blob
        extent follows the attention spread (clamped). The column is
        raised to `sharpness` first so the blob tracks the peak response
        region rather than the diffuse background level. Each blob's disk
        footprint is emitted as that token's ground-truth mask.
        """
        _, attn, _, _ = self._forward(z0, tokens)
        final = attn[-1]
        h, w = self.grid
        s = self.render_scale
        hi, wi = h * s, w * s
        rr = np.arange(h).repeat(w).astype(float)
        cc = np.tile(np.arange(w), h).astype(float)
        pr = np.arange(hi, dtype=float)[:, None]
        pc = np.arange(wi, dtype=float)[None, :]

        blobs = np.zeros((tokens.m, hi, wi))
        centers = {}
        sigmas = {}
        masks = {}
        for i in range(tokens.m):
            col = final.values[:, i] ** sharpness
            mass = col.sum()
            cr = float((col * rr).sum() / mass)
            ccen = float((col * cc).sum() / mass)
            spread = float((col * ((rr - cr) ** 2 + (cc - ccen) ** 2)).sum() / mass)
            sigma_cells = min(max(math.sqrt(spread / 2.0), sigma_bounds[0]), sigma_bounds[1])
            center = ((cr + 0.5) * s - 0.5, (ccen + 0.5) * s - 0.5)
            sigma_px = sigma_cells * s
            d2 = (pr - center[0]) ** 2 + (pc - center[1]) ** 2
            blobs[i] = np.exp(-d2 / (2.0 * sigma_px ** 2))
            mask = d2 <= (mask_radius_sigmas * sigma_px) ** 2
            if not mask.any():
                mask[min(max(int(round(center[0])), 0), hi - 1),
                     min(max(int(round(center[1])), 0), wi - 1)] = True
            centers[i] = center
            sigmas[i] = sigma_cells
            masks[i] = mask

        intensity = blobs.max(axis=0)
        labels = np.where(intensity >= math.exp(-2.0), blobs.argmax(axis=0), -1)
        return RenderedScene(intensity, labels, centers, sigmas, masks, final, s)
