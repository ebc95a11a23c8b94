"""Pure-numpy geometry kernels.

Fallback backend with the same call signatures as the compiled extension.
All predicates must stay bit-identical with `_geomcore`: keep the arithmetic
order of every expression in sync with the C loops there.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "pure"


def segment_occluded(
    corner: np.ndarray,
    edge_u: np.ndarray,
    edge_v: np.ndarray,
    normal: np.ndarray,
    len2_u: np.ndarray,
    len2_v: np.ndarray,
    inv_len_u: np.ndarray,
    inv_len_v: np.ndarray,
    a: np.ndarray,
    b: np.ndarray,
    graze_eps: float,
    bounds_eps: float,
    skip: np.ndarray,
) -> bool:
    """True when segment a-b strictly crosses any non-skipped rectangle.

    A crossing within graze_eps metres of either endpoint does not count;
    rectangle extents are widened by bounds_eps metres.
    """
    if corner.shape[0] == 0:
        return False
    da = (normal * (a - corner)).sum(axis=1)
    db = (normal * (b - corner)).sum(axis=1)
    cross = (da * db) < 0.0
    if not cross.any():
        return False
    # non-crossing lanes get a dummy t; they are masked out of `blocked`
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(cross, da / (da - db), 0.5)
    seg = b - a
    seg_len = np.sqrt(seg[0] * seg[0] + seg[1] * seg[1] + seg[2] * seg[2])
    near_a = t * seg_len <= graze_eps
    near_b = (1.0 - t) * seg_len <= graze_eps
    hit = a + t[:, None] * seg
    w = hit - corner
    u = (w * edge_u).sum(axis=1) / len2_u
    v = (w * edge_v).sum(axis=1) / len2_v
    tol_u = bounds_eps * inv_len_u
    tol_v = bounds_eps * inv_len_v
    inside = (u >= -tol_u) & (u <= 1.0 + tol_u) & (v >= -tol_v) & (v <= 1.0 + tol_v)
    blocked = cross & ~near_a & ~near_b & inside & (skip == 0)
    return bool(blocked.any())


def segments_occluded_from(
    corner: np.ndarray,
    edge_u: np.ndarray,
    edge_v: np.ndarray,
    normal: np.ndarray,
    len2_u: np.ndarray,
    len2_v: np.ndarray,
    inv_len_u: np.ndarray,
    inv_len_v: np.ndarray,
    p: np.ndarray,
    targets: np.ndarray,
    graze_eps: float,
    bounds_eps: float,
) -> np.ndarray:
    """Occlusion flags for segments from point p to each row of targets.

    Returns a uint8 array, 1 where the segment is blocked. No skip set:
    endpoint grazing already exempts surfaces the endpoints lie on.
    """
    n = targets.shape[0]
    if corner.shape[0] == 0 or n == 0:
        return np.zeros(n, dtype=np.uint8)
    da = (normal * (p - corner)).sum(axis=1)  # (S,)
    db = ((targets[:, None, :] - corner[None, :, :]) * normal[None, :, :]).sum(axis=2)
    cross = (da[None, :] * db) < 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(cross, da[None, :] / (da[None, :] - db), 0.5)  # (n, S)
    seg = targets - p  # (n, 3)
    seg_len = np.sqrt((seg * seg).sum(axis=1))  # (n,)
    near_a = t * seg_len[:, None] <= graze_eps
    near_b = (1.0 - t) * seg_len[:, None] <= graze_eps
    hit = p[None, None, :] + t[:, :, None] * seg[:, None, :]  # (n, S, 3)
    w = hit - corner[None, :, :]
    u = (w * edge_u[None, :, :]).sum(axis=2) / len2_u[None, :]
    v = (w * edge_v[None, :, :]).sum(axis=2) / len2_v[None, :]
    tol_u = (bounds_eps * inv_len_u)[None, :]
    tol_v = (bounds_eps * inv_len_v)[None, :]
    inside = (u >= -tol_u) & (u <= 1.0 + tol_u) & (v >= -tol_v) & (v <= 1.0 + tol_v)
    blocked = cross & ~near_a & ~near_b & inside
    return blocked.any(axis=1).astype(np.uint8)
