"""Self-check suites: brute-force distance oracle and finite-difference
gradient checks. The CLI exposes these as verify-edt and verify-grad;
the acceptance tests run the same functions with pinned thresholds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import EnergyConfig, energy_grad_wrt_attention, total_energy
from .geometry import CellSet, Trajectory, combined_distance_field, distance_transform
from .model import AttentionMap, LatentState, SandboxModel, TokenSet, _softmax_rows
from .guidance import build_schedule

_VERIFY_STREAM = 13

EDT_THRESHOLD = 1e-12
GRAD_ATTENTION_THRESHOLD = 1e-6
GRAD_LATENT_THRESHOLD = 1e-4


@dataclass
class VerifyReport:
    name: str
    cases: int
    max_err: float
    threshold: float
    passed: bool
    worst_case: int
    worst_tensor: np.ndarray | None

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (f"{self.name}: {self.cases} cases, max err {self.max_err:.3e} "
                f"(threshold {self.threshold:.0e}) {verdict}")


def brute_force_distance(sources: CellSet) -> np.ndarray:
    """Nearest-source Euclidean distance by direct minimization."""
    h, w = sources.dims
    pts = np.array(sorted(sources.cells), dtype=float)
    rr = np.arange(h, dtype=float)[:, None, None]
    cc = np.arange(w, dtype=float)[None, :, None]
    d2 = (rr - pts[:, 0]) ** 2 + (cc - pts[:, 1]) ** 2
    return np.sqrt(d2.min(axis=2))


def verify_edt(n_grids: int = 100, seed: int = 450, max_side: int = 64,
               corrupt: bool = False) -> VerifyReport:
    """Compare distance_transform to the brute-force oracle on random grids."""
    rng = np.random.default_rng([_VERIFY_STREAM, seed, 1])
    worst = 0.0
    worst_case = -1
    worst_tensor = None
    for case in range(n_grids):
        h = int(rng.integers(1, max_side + 1))
        w = int(rng.integers(1, max_side + 1))
        n_src = int(rng.integers(1, max(2, (h * w) // 4)))
        flat = rng.choice(h * w, size=n_src, replace=False)
        cells = frozenset((int(f) // w, int(f) % w) for f in flat)
        src = CellSet((h, w), cells)
        got = distance_transform(src).values
        if corrupt and case == n_grids // 2:
            got = got + 1e-6
        want = brute_force_distance(src)
        err = float(np.abs(got - want).max())
        if err > worst:
            worst = err
            worst_case = case
            worst_tensor = src.to_mask().astype(np.float32)
    return VerifyReport("edt", n_grids, worst, EDT_THRESHOLD,
                        worst <= EDT_THRESHOLD, worst_case, worst_tensor)


def _random_instance(rng):
    h = int(rng.integers(2, 9))
    w = int(rng.integers(2, 9))
    m = int(rng.integers(1, 5))
    n_verts = int(rng.integers(2, 5))
    verts = tuple((float(rng.uniform(0, h - 1)), float(rng.uniform(0, w - 1)))
                  for _ in range(n_verts))
    n_constrained = int(rng.integers(1, m + 1))
    trajs = []
    for tok in range(n_constrained):
        shift = tuple((min(r + tok, float(h - 1)), c) for r, c in verts)
        trajs.append(Trajectory(token_index=tok, polylines=(shift,), weights=(1.0,)))
    return h, w, m, trajs


def _fields_for(trajs, dims):
    return {t.token_index: combined_distance_field(t, dims) for t in trajs}


def verify_grad_attention(n_cases: int = 100, seed: int = 450,
                          corrupt: bool = False) -> VerifyReport:
    """Central finite differences on the energy as a function of A."""
    rng = np.random.default_rng([_VERIFY_STREAM, seed, 2])
    cfg = EnergyConfig()
    worst = 0.0
    worst_case = -1
    worst_tensor = None
    for case in range(n_cases):
        h, w, m, trajs = _random_instance(rng)
        fields = _fields_for(trajs, (h, w))
        n_layers = int(rng.integers(1, 3))
        layers = tuple(range(n_layers))
        maps = [AttentionMap(ell, (h, w), _softmax_rows(rng.standard_normal((h * w, m))))
                for ell in layers]

        grads = energy_grad_wrt_attention(maps, fields, layers, cfg)
        if corrupt and case == n_cases // 2:
            grads = [g + 1e-3 for g in grads]

        def f(values_list):
            probe = [AttentionMap(ell, (h, w), v)
                     for ell, v in zip(layers, values_list)]
            return total_energy(probe, fields, layers, cfg).e_total

        err = 0.0
        base = [mp.values for mp in maps]
        for li in range(n_layers):
            for idx in np.ndindex(base[li].shape):
                step = 1e-6 * max(1.0, abs(base[li][idx]))
                up = [v.copy() for v in base]
                dn = [v.copy() for v in base]
                up[li][idx] += step
                dn[li][idx] -= step
                fd = (f(up) - f(dn)) / (2.0 * step)
                rel = abs(grads[li][idx] - fd) / max(1.0, abs(fd))
                err = max(err, rel)
        if err > worst:
            worst = err
            worst_case = case
            worst_tensor = base[0].astype(np.float32)
    return VerifyReport("grad-attention", n_cases, worst, GRAD_ATTENTION_THRESHOLD,
                        worst <= GRAD_ATTENTION_THRESHOLD, worst_case, worst_tensor)


def verify_grad_latent(n_cases: int = 100, seed: int = 450,
                       corrupt: bool = False) -> VerifyReport:
    """End-to-end check: latent -> attention -> energy versus hand backward."""
    rng = np.random.default_rng([_VERIFY_STREAM, seed, 3])
    cfg = EnergyConfig()
    worst = 0.0
    worst_case = -1
    worst_tensor = None
    for case in range(n_cases):
        h, w, m, trajs = _random_instance(rng)
        fields = _fields_for(trajs, (h, w))
        channels = int(rng.integers(3, 9))
        d_k = int(rng.integers(2, 9))
        n_layers = int(rng.integers(1, 3))
        layers = tuple(range(n_layers))
        model = SandboxModel(seed=int(rng.integers(0, 2 ** 16)), grid=(h, w),
                             channels=channels, d_k=d_k, layers=n_layers)
        emb = rng.standard_normal((m, d_k))
        emb /= np.linalg.norm(emb, axis=1, keepdims=True)
        tokens = TokenSet(tuple(range(m)), emb)
        schedule = build_schedule(10)
        z = rng.standard_normal((h, w, channels))
        state = LatentState(z, 5, schedule)

        out = model.denoise_step(state, tokens)
        grads = energy_grad_wrt_attention(out.attention, fields, layers, cfg)
        g = model.grad_energy_wrt_latent(state, tokens, grads)
        if corrupt and case == n_cases // 2:
            g = g + 1e-2

        def f(zz):
            probe = model.denoise_step(LatentState(zz, 5, schedule), tokens)
            return total_energy(probe.attention, fields, layers, cfg).e_total

        err = 0.0
        for idx in np.ndindex(z.shape):
            step = 1e-5 * max(1.0, abs(z[idx]))
            up = z.copy()
            dn = z.copy()
            up[idx] += step
            dn[idx] -= step
            fd = (f(up) - f(dn)) / (2.0 * step)
            rel = abs(g[idx] - fd) / max(1.0, abs(fd))
            err = max(err, rel)
        if err > worst:
            worst = err
            worst_case = case
            worst_tensor = z.reshape(h * w, channels).astype(np.float32)
    return VerifyReport("grad-latent", n_cases, worst, GRAD_LATENT_THRESHOLD,
                        worst <= GRAD_LATENT_THRESHOLD, worst_case, worst_tensor)
