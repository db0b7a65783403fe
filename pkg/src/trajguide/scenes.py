"""Deterministic evaluation scenes: prompts plus target trajectories.

Shapes deliberately avoid the grid center, where unguided blobs tend to
land; a suite of center-crossing targets would hand the unguided
baseline an unearned score.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Trajectory
from .model import VOCAB, embed_tokens

_SCENE_STREAM = 5


@dataclass(frozen=True)
class SceneSpec:
    name: str
    prompt: tuple
    trajectories: tuple

    def token_set(self, model):
        return embed_tokens(self.prompt, model.d_k, model.seed)


def _edge_rc(rng, h):
    return float(rng.choice([2, 3, h - 4, h - 3]))


def _line(rng, h, w):
    if rng.integers(2) == 0:
        r = _edge_rc(rng, h)
        return (((r, 2.0), (r, float(w - 3))),)
    c = _edge_rc(rng, w)
    return (((2.0, c), (float(h - 3), c)),)


def _diagonal(rng, h, w):
    # Diagonal of one quadrant, clear of the middle.
    top = rng.integers(2) == 0
    left = rng.integers(2) == 0
    r0, r1 = (1.0, h / 2.0 - 1.0) if top else (h / 2.0 + 1.0, float(h - 2))
    c0, c1 = (1.0, w / 2.0 - 1.0) if left else (w / 2.0 + 1.0, float(w - 2))
    if rng.integers(2) == 0:
        return (((r0, c0), (r1, c1)),)
    return (((r0, c1), (r1, c0)),)


def _bend(rng, h, w):
    # L hugging two adjacent edges.
    r_edge = 2.0 if rng.integers(2) == 0 else float(h - 3)
    c_edge = 2.0 if rng.integers(2) == 0 else float(w - 3)
    r_far = float(h - 3) if r_edge == 2.0 else 2.0
    return (((r_far, c_edge), (r_edge, c_edge), (r_edge, 2.0 if c_edge != 2.0
                                                 else float(w - 3))),)


def _zigzag(rng, h, w):
    # Vertical zigzag confined to the left or right third.
    c0, c1 = (1.0, float(w // 3)) if rng.integers(2) == 0 else \
        (float(w - 1 - w // 3), float(w - 2))
    rows = sorted(float(r) for r in rng.choice(np.arange(2, h - 2), 3,
                                               replace=False))
    return (((rows[0], c0), (rows[1], c1), (rows[2], c0)),)


def _arc(rng, h, w):
    # Half circle near the border, sampled as a 6-point polyline.
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    radius = min(h, w) / 2.0 - 2.0
    phase = float(rng.uniform(0.0, 2.0 * np.pi))
    ang = phase + np.linspace(0.0, np.pi, 6)
    pts = tuple((float(cy + radius * np.sin(a)), float(cx + radius * np.cos(a)))
                for a in ang)
    return (pts,)


_SHAPES = (_line, _diagonal, _bend, _zigzag, _arc)


def _reflect(polylines, h, w):
    return tuple(tuple((float(h - 1) - r, float(w - 1) - c) for r, c in poly)
                 for poly in polylines)


def make_scene_suite(n: int = 20, seed: int = 450,
                     dims: tuple[int, int] = (16, 16)) -> list:
    """Build a reproducible suite of scenes with 1 or 2 constrained tokens.

    Shapes cycle through edge lines, quadrant diagonals, corner bends,
    side zigzags and near-border arcs; a second constrained token gets
    its shape reflected through the center so the two targets stay apart.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    h, w = dims
    rng = np.random.default_rng([_SCENE_STREAM, int(seed)])
    scenes = []
    for i in range(n):
        n_tokens = 2 + i % 2
        ids = rng.choice(len(VOCAB), size=n_tokens, replace=False)
        prompt = tuple(VOCAB[int(t)] for t in ids)
        n_constrained = 1 if i % 3 else min(2, n_tokens)
        trajectories = []
        for j in range(n_constrained):
            shape = _SHAPES[(i + 3 * j) % len(_SHAPES)]
            polylines = shape(rng, h, w)
            if j == 1:
                polylines = _reflect(polylines, h, w)
            trajectories.append(Trajectory(token_index=j, polylines=polylines,
                                           weights=(1.0,) * len(polylines)))
        scenes.append(SceneSpec(f"scene_{i:02d}", prompt, tuple(trajectories)))
    return scenes
