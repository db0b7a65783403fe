"""Distance-awareness energies over cross-attention maps.

The control energy pulls a token's attention mass onto its trajectory via
inverse-distance weighting; the movement energy suppresses mass far from
it. Both are ratio energies, invariant to positive rescaling of the
attention column, with hand-derived analytic gradients. The mask/box
energies used by the ablation baselines share the same ratio structure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import CellSet, DistanceField, Trajectory, resample_field


@dataclass(frozen=True)
class EnergyConfig:
    """lam is the movement weight; epsilon keeps the inverse-distance
    weight finite on trajectory cells (and, at 1.0, equal to 1 there);
    denom_floor guards the movement denominator when all mass sits at D=0."""

    lam: float = 10.0
    epsilon: float = 1.0
    denom_floor: float = 1e-8

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.denom_floor <= 0:
            raise ValueError("denom_floor must be > 0")


@dataclass(frozen=True)
class EnergyBreakdown:
    """Aggregated and per-(layer, token) energy terms.

    terms maps (layer, token) -> (e_control, e_movement, e_total) with
    e_total = e_control + lam * e_movement for every entry.
    """

    e_control: float
    e_movement: float
    e_total: float
    lam: float
    terms: dict = field(default_factory=dict)


def _col(a) -> np.ndarray:
    col = np.asarray(a, dtype=float).ravel()
    if col.size == 0:
        raise ValueError("degenerate attention")
    return col


def _dist(d) -> np.ndarray:
    return np.asarray(getattr(d, "values", d), dtype=float).ravel()


def _checked_sum(col: np.ndarray, floor: float) -> float:
    s = float(col.sum())
    if s < floor:
        raise ValueError("degenerate attention")
    return s


def control_energy(a_col, d, cfg: EnergyConfig = EnergyConfig()) -> float:
    """(1 - sum((D+eps)^-1 A) / sum(A))^2 -- zero iff all mass at D=0 when eps=1."""
    col = _col(a_col)
    dist = _dist(d)
    s_a = _checked_sum(col, cfg.denom_floor)
    s_w = float(((dist + cfg.epsilon) ** -1 * col).sum())
    return (1.0 - s_w / s_a) ** 2


def control_energy_grad(a_col, d, cfg: EnergyConfig = EnergyConfig()) -> np.ndarray:
    col = _col(a_col)
    dist = _dist(d)
    s_a = _checked_sum(col, cfg.denom_floor)
    w = (dist + cfg.epsilon) ** -1
    r = float((w * col).sum()) / s_a
    return (-2.0 * (1.0 - r) / s_a) * (w - r)


def movement_energy(a_col, d, cfg: EnergyConfig = EnergyConfig()) -> float:
    """(1 - sum(A) / sum(D A))^2 -- zero when the mean distance is exactly 1."""
    col = _col(a_col)
    dist = _dist(d)
    s_a = _checked_sum(col, cfg.denom_floor)
    s_d = max(float((dist * col).sum()), cfg.denom_floor)
    return (1.0 - s_a / s_d) ** 2


def movement_energy_grad(a_col, d, cfg: EnergyConfig = EnergyConfig()) -> np.ndarray:
    col = _col(a_col)
    dist = _dist(d)
    s_a = _checked_sum(col, cfg.denom_floor)
    s_d_raw = float((dist * col).sum())
    clamped = s_d_raw < cfg.denom_floor
    s_d = cfg.denom_floor if clamped else s_d_raw
    q = s_a / s_d
    # d q / d A_mu; the denominator path dies when the clamp is active
    dq = np.full_like(col, 1.0 / s_d) if clamped else (1.0 - q * dist) / s_d
    return -2.0 * (1.0 - q) * dq


def mask_ratio_energy(a_col, mask) -> float:
    """(1 - in-mask mass fraction)^2; the baselines' region energy."""
    col = _col(a_col)
    m = _mask_vector(mask, col.size)
    s_a = _checked_sum(col, 1e-12)
    return (1.0 - float((m * col).sum()) / s_a) ** 2


def mask_ratio_energy_grad(a_col, mask) -> np.ndarray:
    col = _col(a_col)
    m = _mask_vector(mask, col.size)
    s_a = _checked_sum(col, 1e-12)
    r = float((m * col).sum()) / s_a
    return (-2.0 * (1.0 - r) / s_a) * (m - r)


def _mask_vector(mask, size: int) -> np.ndarray:
    if isinstance(mask, CellSet):
        m = mask.to_mask().ravel().astype(float)
    else:
        m = np.asarray(mask, dtype=float).ravel()
    if m.size != size:
        raise ValueError(f"mask size {m.size} != attention size {size}")
    if m.sum() == 0:
        raise ValueError("empty mask")
    return m


def box_energy(a_col, box: tuple[int, int, int, int], dims: tuple[int, int]) -> float:
    """mask_ratio_energy over an inclusive (r0, c0, r1, c1) cell rectangle."""
    return mask_ratio_energy(a_col, _box_mask(box, dims))


def _box_mask(box, dims) -> np.ndarray:
    r0, c0, r1, c1 = box
    h, w = dims
    if r1 < r0 or c1 < c0 or r0 >= h or c0 >= w or r1 < 0 or c1 < 0:
        raise ValueError("empty box")
    m = np.zeros(dims, dtype=float)
    m[max(r0, 0) : min(r1, h - 1) + 1, max(c0, 0) : min(c1, w - 1) + 1] = 1.0
    return m


def recenter_cells(cells: set, target_center: tuple[float, float], dims: tuple[int, int]) -> CellSet:
    """Translate cells so their centroid lands on target_center (rounded), clipped."""
    if not cells:
        raise ValueError("unusable mask")
    arr = np.array(sorted(cells), dtype=float)
    centroid = arr.mean(axis=0)
    dr = int(np.rint(target_center[0] - centroid[0]))
    dc = int(np.rint(target_center[1] - centroid[1]))
    h, w = dims
    moved = {
        (r + dr, c + dc)
        for r, c in cells
        if 0 <= r + dr < h and 0 <= c + dc < w
    }
    if not moved:
        raise ValueError("unusable mask")
    return CellSet(dims, frozenset(moved))


def prior_structure_mask(a_col, threshold: float, traj: Trajectory, dims: tuple[int, int]) -> CellSet:
    """Threshold the column at threshold * max, then recenter the surviving
    cells on the trajectory's bounding-box center. The baseline's mask."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must be in (0, 1)")
    col = _col(a_col)
    if col.size != dims[0] * dims[1]:
        raise ValueError(f"attention size {col.size} != grid {dims}")
    keep = col >= threshold * col.max()
    if not keep.any():
        raise ValueError("unusable mask")
    rows, cols = np.nonzero(keep.reshape(dims))
    return recenter_cells(set(zip(rows.tolist(), cols.tolist())), traj.bbox_center(), dims)


def _field_for(attn_dims, base_field: DistanceField) -> np.ndarray:
    return resample_field(base_field, attn_dims).values.ravel()


def total_energy(attn, fields: dict, layers, cfg: EnergyConfig = EnergyConfig()) -> EnergyBreakdown:
    """Sum E_c + lam * E_m over layers in Phi and constrained tokens.

    attn: list of AttentionMap; fields: token_index -> DistanceField at the
    base grid (resampled here if a layer runs at another resolution).
    Unconstrained tokens contribute nothing.
    """
    layers = sorted(set(layers))
    available = {m.layer for m in attn}
    missing = set(layers) - available
    if missing:
        raise ValueError(f"layer set includes unavailable layers {sorted(missing)}")
    terms = {}
    agg_c = 0.0
    agg_m = 0.0
    agg_t = 0.0
    by_layer = {m.layer: m for m in attn}
    for tau in layers:
        amap = by_layer[tau]
        for i, fld in sorted(fields.items()):
            if i >= amap.values.shape[1]:
                raise ValueError("unconstrained token referenced")
            dist = _field_for(amap.dims, fld)
            col = amap.values[:, i]
            e_c = control_energy(col, dist, cfg)
            e_m = movement_energy(col, dist, cfg)
            e_t = e_c + cfg.lam * e_m
            terms[(tau, i)] = (e_c, e_m, e_t)
            agg_c += e_c
            agg_m += e_m
            agg_t += e_t
    return EnergyBreakdown(agg_c, agg_m, agg_t, cfg.lam, terms)


def energy_grad_wrt_attention(attn, fields: dict, layers, cfg: EnergyConfig = EnergyConfig()):
    """Analytic gradient of total_energy in every attention entry.

    Returns one (H*W, m) array per entry of `attn` (zeros off Phi and in
    unconstrained token columns), ordered like `attn`.
    """
    layers = set(layers)
    grads = []
    for amap in attn:
        g = np.zeros_like(amap.values)
        if amap.layer in layers:
            for i, fld in sorted(fields.items()):
                if i >= amap.values.shape[1]:
                    raise ValueError("unconstrained token referenced")
                dist = _field_for(amap.dims, fld)
                col = amap.values[:, i]
                g[:, i] = control_energy_grad(col, dist, cfg)
                if cfg.lam != 0.0:
                    g[:, i] += cfg.lam * movement_energy_grad(col, dist, cfg)
        grads.append(g)
    return grads


def mask_total_energy(attn, masks: dict, layers) -> EnergyBreakdown:
    """Baseline region energy summed over Phi and constrained tokens."""
    layers = sorted(set(layers))
    by_layer = {m.layer: m for m in attn}
    terms = {}
    agg = 0.0
    for tau in layers:
        amap = by_layer[tau]
        for i, mask in sorted(masks.items()):
            if i >= amap.values.shape[1]:
                raise ValueError("unconstrained token referenced")
            e = mask_ratio_energy(amap.values[:, i], mask)
            terms[(tau, i)] = (e, 0.0, e)
            agg += e
    return EnergyBreakdown(agg, 0.0, agg, 0.0, terms)


def mask_energy_grad_wrt_attention(attn, masks: dict, layers):
    layers = set(layers)
    grads = []
    for amap in attn:
        g = np.zeros_like(amap.values)
        if amap.layer in layers:
            for i, mask in sorted(masks.items()):
                g[:, i] = mask_ratio_energy_grad(amap.values[:, i], mask)
        grads.append(g)
    return grads
