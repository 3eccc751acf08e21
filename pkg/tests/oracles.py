"""Independent reference implementations used as oracles by the test suite.

Everything here is written in the most direct way possible (per-pixel loops,
explicit sums, brute-force scans) and deliberately shares no code with the
production package. These were written and frozen before the corresponding
production modules; tests compare the two sides.
"""

from __future__ import annotations

import math


# ---------------------------------------------------------------------------
# Gaussian-mixture background subtraction (naive per-pixel reference)
#
# Documented contract (identical to the production kernel's docstring):
#   - per pixel, up to K components {mean, variance, weight}, kept sorted
#     descending by the ranking key weight^2 / variance (stable for ties);
#   - a frame value v matches the first component, in sorted order, with
#     (v - mean)^2 <= match_sigmas^2 * variance;
#   - a matched pixel is background iff the summed weight of the components
#     ranked strictly before the matched one is <= background_fraction;
#   - matched update: every weight w <- (1-rho) w (+ rho for the matched one);
#     matched mean <- mean + rho (v - mean);
#     matched variance <- max((1-rho) variance + rho (v - mean_old)^2, floor);
#   - no match: pixel is foreground; a new component {mean=v,
#     variance=variance_init, weight=rho} fills a free slot or replaces the
#     worst-ranked (last) one;
#   - weights renormalised to sum 1 (divide by their index-order sum);
#   - components re-sorted by the ranking key, stable descending.


class ReferencePixelMixture:
    """One pixel's mixture, stored as a plain list of [mean, var, weight]."""

    def __init__(self, seed_value, variance_init):
        self.comps = [[float(seed_value), float(variance_init), 1.0]]

    @staticmethod
    def _key(comp):
        return comp[2] * comp[2] / comp[1]

    def step(self, v, K, rho, t_b, match_sigmas, variance_init, variance_floor):
        """Advance one frame; return True when the pixel is foreground."""
        v = float(v)
        matched = None
        for i, comp in enumerate(self.comps):
            d = v - comp[0]
            if d * d <= match_sigmas * match_sigmas * comp[1]:
                matched = i
                break
        if matched is None:
            foreground = True
            new_comp = [v, float(variance_init), rho]
            if len(self.comps) < K:
                self.comps.append(new_comp)
            else:
                self.comps[-1] = new_comp
        else:
            before = sum(comp[2] for comp in self.comps[:matched])
            foreground = before > t_b
            old_mean = self.comps[matched][0]
            for comp in self.comps:
                comp[2] = (1.0 - rho) * comp[2]
            self.comps[matched][2] += rho
            d = v - old_mean
            self.comps[matched][0] = old_mean + rho * d
            var = (1.0 - rho) * self.comps[matched][1] + rho * d * d
            self.comps[matched][1] = var if var > variance_floor else variance_floor
        total = 0.0
        for comp in self.comps:
            total += comp[2]
        for comp in self.comps:
            comp[2] = comp[2] / total
        # Stable descending sort by ranking key.
        decorated = [(-self._key(comp), idx) for idx, comp in enumerate(self.comps)]
        order = sorted(range(len(self.comps)), key=lambda idx: decorated[idx])
        self.comps = [self.comps[idx] for idx in order]
        return foreground


def reference_gmm_masks(frames, K, rho, t_b, match_sigmas, variance_init, variance_floor):
    """Masks (lists of lists of bool) for a whole uint8 frame sequence.

    The model is seeded from the first frame (which therefore produces an
    all-background mask), mirroring the documented pipeline seeding.
    """
    first = frames[0]
    height = len(first)
    width = len(first[0])
    pixels = [
        [ReferencePixelMixture(first[y][x], variance_init) for x in range(width)]
        for y in range(height)
    ]
    masks = []
    for frame in frames:
        mask = []
        for y in range(height):
            row = []
            for x in range(width):
                row.append(
                    pixels[y][x].step(
                        frame[y][x], K, rho, t_b, match_sigmas, variance_init, variance_floor
                    )
                )
            mask.append(row)
        masks.append(mask)
    return masks


# ---------------------------------------------------------------------------
# Boolean median (majority) filter — neighbourhood-sort reference


def reference_median_filter(mask, k):
    """k x k boolean median with edge replication, via explicit sorting."""
    height = len(mask)
    width = len(mask[0])
    half = k // 2
    out = [[False] * width for _ in range(height)]
    for y in range(height):
        for x in range(width):
            neigh = []
            for dy in range(-half, half + 1):
                for dx in range(-half, half + 1):
                    yy = min(max(y + dy, 0), height - 1)
                    xx = min(max(x + dx, 0), width - 1)
                    neigh.append(bool(mask[yy][xx]))
            neigh.sort()
            out[y][x] = neigh[len(neigh) // 2]
    return out


# ---------------------------------------------------------------------------
# Fixation events — brute-force run scanner


def reference_fixation_events(counts, lower, upper, min_frames):
    """All maximal runs with lower <= count <= upper and length >= min_frames.

    Returns (start, end) index pairs, end inclusive. Only ever inspects a
    value through the qualification predicate.
    """
    events = []
    start = -1
    for i, value in enumerate(counts):
        if lower <= value <= upper:
            if start < 0:
                start = i
        else:
            if start >= 0 and i - start >= min_frames:
                events.append((start, i - 1))
            start = -1
    if start >= 0 and len(counts) - start >= min_frames:
        events.append((start, len(counts) - 1))
    return events


# ---------------------------------------------------------------------------
# Patch MSE — double loop


def reference_mse(a, b):
    height = len(a)
    width = len(a[0])
    total = 0.0
    for y in range(height):
        for x in range(width):
            d = float(a[y][x]) - float(b[y][x])
            total += d * d
    return total / (height * width)


# ---------------------------------------------------------------------------
# Scaled histogram + chi-square distance — direct sums


def reference_histogram(frame, bins):
    counts = [0] * bins
    for row in frame:
        for v in row:
            counts[(int(v) * bins) // 256] += 1
    return counts


def reference_chi_square(counts_a, counts_b):
    """Symmetric chi-square on unit-normalised histograms."""
    total_a = sum(counts_a)
    total_b = sum(counts_b)
    dist = 0.0
    for ca, cb in zip(counts_a, counts_b):
        pa = ca / total_a
        pb = cb / total_b
        if pa + pb > 0.0:
            d = pa - pb
            dist += d * d / (pa + pb)
    return dist


# ---------------------------------------------------------------------------
# Pinhole forward projection (used to synthesise pose test data)


def reference_rotation_matrix(axis_angle):
    """Rodrigues rotation from an axis-angle 3-vector, explicit formula."""
    rx, ry, rz = (float(c) for c in axis_angle)
    theta = math.sqrt(rx * rx + ry * ry + rz * rz)
    if theta < 1e-12:
        return [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    ux, uy, uz = rx / theta, ry / theta, rz / theta
    c = math.cos(theta)
    s = math.sin(theta)
    one_c = 1.0 - c
    return [
        [c + ux * ux * one_c, ux * uy * one_c - uz * s, ux * uz * one_c + uy * s],
        [uy * ux * one_c + uz * s, c + uy * uy * one_c, uy * uz * one_c - ux * s],
        [uz * ux * one_c - uy * s, uz * uy * one_c + ux * s, c + uz * uz * one_c],
    ]


def reference_project(axis_angle, translation, focal_x, focal_y, cx, cy, point):
    R = reference_rotation_matrix(axis_angle)
    px, py, pz = (float(c) for c in point)
    tx, ty, tz = (float(c) for c in translation)
    xc = R[0][0] * px + R[0][1] * py + R[0][2] * pz + tx
    yc = R[1][0] * px + R[1][1] * py + R[1][2] * pz + ty
    zc = R[2][0] * px + R[2][1] * py + R[2][2] * pz + tz
    if zc <= 0:
        raise ValueError("point behind camera")
    return (focal_x * xc / zc + cx, focal_y * yc / zc + cy)


# ---------------------------------------------------------------------------
# Gazing energy — brute per-window summation


def reference_energy_windows(samples, fps, anchor, event_end, min_tail):
    """samples: (ts, x) pairs. Windows [anchor + k*fps, anchor + (k+1)*fps).

    Windows are enumerated while their start lies within [anchor, event_end].
    Empty windows are omitted. The trailing window is *partial* when the event
    end cuts its span; a partial window is kept iff it holds at least
    ``min_tail`` samples. Returns the list of energies.
    """
    energies = []
    k = 0
    while anchor + k * fps <= event_end:
        lo = anchor + k * fps
        hi = lo + fps
        window = [x for ts, x in samples if lo <= ts < hi]
        partial = hi - 1 > event_end
        if window:
            if partial and len(window) < min_tail:
                pass
            else:
                energies.append(sum(x * x for x in window))
        k += 1
    return energies


# ---------------------------------------------------------------------------
# Student-t CDF oracle — numeric integration of the density (scipy quadrature)


def reference_t_two_sided_p(t, df):
    """Two-sided p-value by adaptive quadrature of the t density."""
    from scipy.integrate import quad

    def density(u):
        return math.exp(
            math.lgamma((df + 1) / 2.0)
            - math.lgamma(df / 2.0)
            - 0.5 * math.log(df * math.pi)
            - ((df + 1) / 2.0) * math.log1p(u * u / df)
        )

    tail, _err = quad(density, abs(t), math.inf, epsabs=1e-13, epsrel=1e-12)
    return min(1.0, 2.0 * tail)


def reference_pooled_t(sample_a, sample_b):
    """Pooled-variance two-sample t statistic and degrees of freedom."""
    na, nb = len(sample_a), len(sample_b)
    mean_a = sum(sample_a) / na
    mean_b = sum(sample_b) / nb
    ssq_a = sum((v - mean_a) ** 2 for v in sample_a)
    ssq_b = sum((v - mean_b) ** 2 for v in sample_b)
    df = na + nb - 2
    pooled = (ssq_a + ssq_b) / df
    denom = math.sqrt(pooled * (1.0 / na + 1.0 / nb))
    if denom == 0.0:
        t = 0.0 if mean_a == mean_b else math.inf if mean_a > mean_b else -math.inf
    else:
        t = (mean_a - mean_b) / denom
    return t, df
