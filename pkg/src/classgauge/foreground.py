"""Per-pixel Gaussian-mixture background subtraction and mask despeckling.

Model contract (the reference implementation in the test suite follows the
same wording):

- per pixel, up to K components ``{mean, variance, weight}``, kept sorted
  descending by the ranking key ``weight^2 / variance`` (stable for ties) —
  this induces the same order as weight/sigma without square roots;
- a frame value v matches the *first* component, in sorted order, with
  ``(v - mean)^2 <= match_sigmas^2 * variance``;
- a matched pixel is background iff the summed weight of the components
  ranked strictly before the matched one is <= ``background_fraction``;
- matched update: every weight ``w <- (1-rho) w`` (+ rho for the matched one);
  matched ``mean <- mean + rho (v - mean)``;
  matched ``variance <- max((1-rho) var + rho (v - mean_old)^2, floor)``;
- no match: the pixel is foreground; a new component ``{mean=v,
  variance=variance_init, weight=rho}`` fills a free slot or replaces the
  worst-ranked (last) component;
- weights renormalised to sum 1 (divided by their index-order sum);
- components re-sorted by the ranking key, stable descending.

The model is conventionally seeded from the first stream frame and then
updated on every frame including that one.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit


@dataclass(frozen=True)
class GmmParams:
    components: int = 3
    learning_rate: float = 0.01
    background_fraction: float = 0.8
    match_sigmas: float = 2.5
    variance_init: float = 225.0
    variance_floor: float = 4.0

    def __post_init__(self) -> None:
        if self.components < 1:
            raise ValueError("components must be >= 1")
        if not 0.0 < self.learning_rate < 1.0:
            raise ValueError("learning_rate must lie in (0, 1)")
        if not 0.0 < self.background_fraction <= 1.0:
            raise ValueError("background_fraction must lie in (0, 1]")
        if self.match_sigmas <= 0:
            raise ValueError("match_sigmas must be > 0")
        if self.variance_floor <= 0 or self.variance_init < self.variance_floor:
            raise ValueError("require variance_init >= variance_floor > 0")

    @classmethod
    def from_config(cls, config) -> "GmmParams":
        return cls(
            components=config.gmm_components,
            learning_rate=config.gmm_learning_rate,
            background_fraction=config.gmm_background_fraction,
            match_sigmas=config.gmm_match_sigmas,
            variance_init=config.gmm_variance_init,
            variance_floor=config.gmm_variance_floor,
        )


@dataclass(frozen=True)
class ForegroundMask:
    mask: np.ndarray  # (H, W) bool
    count: int

    def __post_init__(self) -> None:
        if self.mask.dtype != np.bool_ or self.mask.ndim != 2:
            raise ValueError("mask must be a 2-D boolean matrix")


@dataclass
class GmmModel:
    """Mutable mixture state for one frame stream (single-writer)."""

    width: int
    height: int
    params: GmmParams
    means: np.ndarray  # (H, W, K) float64
    variances: np.ndarray
    weights: np.ndarray
    active: np.ndarray  # (H, W) int64, number of live components


def gmm_init(width: int, height: int, params: GmmParams, seed_frame: np.ndarray | None = None) -> GmmModel:
    """Fresh model: one component per pixel (weight 1, variance_init), mean 0
    or seeded from ``seed_frame``."""
    if width < 1 or height < 1:
        raise ValueError("frame dimensions must be positive")
    k = params.components
    means = np.zeros((height, width, k), dtype=np.float64)
    if seed_frame is not None:
        seed = np.asarray(seed_frame, dtype=np.float64)
        if seed.shape != (height, width):
            raise ValueError("seed frame dimensions do not match the model")
        means[:, :, 0] = seed
    variances = np.zeros((height, width, k), dtype=np.float64)
    variances[:, :, 0] = params.variance_init
    weights = np.zeros((height, width, k), dtype=np.float64)
    weights[:, :, 0] = 1.0
    active = np.ones((height, width), dtype=np.int64)
    return GmmModel(width, height, params, means, variances, weights, active)


def _pixels_of(frame) -> np.ndarray:
    pixels = frame.pixels if hasattr(frame, "pixels") else frame
    arr = np.ascontiguousarray(pixels, dtype=np.uint8)
    if arr.ndim != 2:
        raise ValueError("frames must be 2-D grayscale matrices")
    return arr


def gmm_update_classify(model: GmmModel, frame) -> ForegroundMask:
    """Advance the model by one frame (in place) and classify its pixels."""
    pixels = _pixels_of(frame)
    if pixels.shape != (model.height, model.width):
        raise ValueError(
            f"frame shape {pixels.shape} does not match model "
            f"{(model.height, model.width)}"
        )
    p = model.params
    out = np.empty((model.height, model.width), dtype=np.bool_)
    _gmm_kernel(
        model.means,
        model.variances,
        model.weights,
        model.active,
        pixels,
        out,
        p.learning_rate,
        p.background_fraction,
        p.match_sigmas * p.match_sigmas,
        p.variance_init,
        p.variance_floor,
        p.components,
    )
    return ForegroundMask(out, int(out.sum()))


@njit(cache=True)
def _gmm_kernel(means, variances, weights, active, frame, out_mask,
                rho, t_b, match_sig2, var_init, var_floor, max_k):
    height, width = frame.shape
    for y in range(height):
        for x in range(width):
            v = float(frame[y, x])
            n = active[y, x]
            matched = -1
            prefix = 0.0
            for i in range(n):
                d = v - means[y, x, i]
                if d * d <= match_sig2 * variances[y, x, i]:
                    matched = i
                    break
                prefix += weights[y, x, i]
            if matched >= 0:
                out_mask[y, x] = prefix > t_b
                for j in range(n):
                    weights[y, x, j] = (1.0 - rho) * weights[y, x, j]
                weights[y, x, matched] += rho
                d = v - means[y, x, matched]
                means[y, x, matched] += rho * d
                nv = (1.0 - rho) * variances[y, x, matched] + rho * d * d
                variances[y, x, matched] = nv if nv > var_floor else var_floor
            else:
                out_mask[y, x] = True
                if n < max_k:
                    slot = n
                    n += 1
                    active[y, x] = n
                else:
                    slot = n - 1
                means[y, x, slot] = v
                variances[y, x, slot] = var_init
                weights[y, x, slot] = rho
            total = 0.0
            for j in range(n):
                total += weights[y, x, j]
            for j in range(n):
                weights[y, x, j] = weights[y, x, j] / total
            # Stable descending insertion sort by weight^2 / variance.
            for a in range(1, n):
                m_a = means[y, x, a]
                v_a = variances[y, x, a]
                w_a = weights[y, x, a]
                key = w_a * w_a / v_a
                b = a - 1
                while b >= 0 and (weights[y, x, b] * weights[y, x, b] / variances[y, x, b]) < key:
                    means[y, x, b + 1] = means[y, x, b]
                    variances[y, x, b + 1] = variances[y, x, b]
                    weights[y, x, b + 1] = weights[y, x, b]
                    b -= 1
                means[y, x, b + 1] = m_a
                variances[y, x, b + 1] = v_a
                weights[y, x, b + 1] = w_a


def median_filter(mask: ForegroundMask | np.ndarray, k: int) -> ForegroundMask:
    """k x k boolean-majority filter with edge replication (k odd)."""
    if k < 1 or k % 2 == 0:
        raise ValueError("median kernel size must be odd and >= 1")
    arr = mask.mask if isinstance(mask, ForegroundMask) else np.asarray(mask, dtype=np.bool_)
    if arr.ndim != 2:
        raise ValueError("mask must be 2-D")
    if k == 1:
        out = arr.copy()
    else:
        out = np.empty_like(arr)
        _majority_kernel(arr, out, k // 2)
    return ForegroundMask(out, int(out.sum()))


@njit(cache=True)
def _majority_kernel(mask, out, half):
    height, width = mask.shape
    k = 2 * half + 1
    majority = (k * k) // 2  # strictly more trues than this => True
    for y in range(height):
        for x in range(width):
            trues = 0
            for dy in range(-half, half + 1):
                yy = y + dy
                if yy < 0:
                    yy = 0
                elif yy >= height:
                    yy = height - 1
                for dx in range(-half, half + 1):
                    xx = x + dx
                    if xx < 0:
                        xx = 0
                    elif xx >= width:
                        xx = width - 1
                    if mask[yy, xx]:
                        trues += 1
            out[y, x] = trues > majority


def foreground_count(mask: ForegroundMask | np.ndarray) -> int:
    if isinstance(mask, ForegroundMask):
        return mask.count
    return int(np.asarray(mask, dtype=np.bool_).sum())


def write_pbm(path: str | Path, mask: ForegroundMask | np.ndarray) -> None:
    """Debug export of a mask as a binary portable bitmap (P4)."""
    arr = mask.mask if isinstance(mask, ForegroundMask) else np.asarray(mask, dtype=np.bool_)
    h, w = arr.shape
    packed = np.packbits(arr, axis=1)
    with open(path, "wb") as fh:
        fh.write(f"P4\n{w} {h}\n".encode("ascii"))
        fh.write(packed.tobytes())
