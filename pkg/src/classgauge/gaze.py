"""Cognitive-presence pipeline: head pose from six facial landmarks via DLT
initialisation and Levenberg-Marquardt refinement, pinhole nose-end
projection, per-second horizontal gazing energies, and the two-sample
equal-mean t-test that compares student and instructor energy series."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .ingest import CANDIDATE_LANDMARK_INDICES, CameraIntrinsics


class DegenerateGeometryError(ValueError):
    """The 2D-3D correspondences cannot determine a pose."""


class InsufficientDataError(ValueError):
    """Too few samples to run the statistical comparison."""


@dataclass(frozen=True)
class Pose:
    """Rigid camera-from-face transform: axis-angle rotation + translation."""

    rotation: np.ndarray  # (3,) axis-angle, radians
    translation: np.ndarray  # (3,) model units


@dataclass(frozen=True)
class ProjectionSample:
    ts: int
    x: float  # horizontal screen coordinate (normalised by width by default)


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: float
    p: float  # two-sided


# ---------------------------------------------------------------------------
# Rotations


def rotation_matrix(axis_angle: np.ndarray) -> np.ndarray:
    """Rodrigues rotation matrix from an axis-angle vector."""
    r = np.asarray(axis_angle, dtype=np.float64)
    theta = float(np.linalg.norm(r))
    if theta < 1e-12:
        return np.eye(3)
    k = r / theta
    kx, ky, kz = k
    K = np.array([[0.0, -kz, ky], [kz, 0.0, -kx], [-ky, kx, 0.0]])
    return np.eye(3) + math.sin(theta) * K + (1.0 - math.cos(theta)) * (K @ K)


def rotation_vector(R: np.ndarray) -> np.ndarray:
    """Axis-angle (magnitude <= pi) from a rotation matrix."""
    R = np.asarray(R, dtype=np.float64)
    cos_theta = (np.trace(R) - 1.0) / 2.0
    cos_theta = min(1.0, max(-1.0, cos_theta))
    theta = math.acos(cos_theta)
    if theta < 1e-8:
        # First-order: R ~ I + [r]_x
        return np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]) / 2.0
    if theta > math.pi - 1e-6:
        # Near pi the skew part vanishes; recover the axis from R + I.
        A = (R + np.eye(3)) / 2.0
        axis = np.sqrt(np.maximum(np.diag(A), 0.0))
        # Fix signs using the largest component.
        i = int(np.argmax(axis))
        if axis[i] > 0:
            axis = A[:, i] / axis[i]
        n = np.linalg.norm(axis)
        if n == 0:
            return np.array([math.pi, 0.0, 0.0])
        return axis / n * theta
    axis = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]) / (
        2.0 * math.sin(theta)
    )
    return axis * theta


# ---------------------------------------------------------------------------
# Pinhole projection


def project_point(pose: Pose, intrinsics: CameraIntrinsics, point: np.ndarray) -> tuple[float, float]:
    """Pinhole projection of one model point; the camera-frame depth must be
    positive."""
    R = rotation_matrix(pose.rotation)
    cam = R @ np.asarray(point, dtype=np.float64) + pose.translation
    if cam[2] <= 0:
        raise ValueError("point behind camera (z <= 0)")
    return (
        float(intrinsics.focal_x * cam[0] / cam[2] + intrinsics.principal_x),
        float(intrinsics.focal_y * cam[1] / cam[2] + intrinsics.principal_y),
    )


def project_points(pose: Pose, intrinsics: CameraIntrinsics, points: np.ndarray) -> np.ndarray:
    """Vectorised pinhole projection of (N, 3) model points -> (N, 2) pixels."""
    R = rotation_matrix(pose.rotation)
    cam = np.asarray(points, dtype=np.float64) @ R.T + pose.translation
    if np.any(cam[:, 2] <= 0):
        raise ValueError("point behind camera (z <= 0)")
    out = np.empty((cam.shape[0], 2))
    out[:, 0] = intrinsics.focal_x * cam[:, 0] / cam[:, 2] + intrinsics.principal_x
    out[:, 1] = intrinsics.focal_y * cam[:, 1] / cam[:, 2] + intrinsics.principal_y
    return out


# ---------------------------------------------------------------------------
# Landmark selection


def select_candidate_landmarks(landmarks: np.ndarray | None) -> np.ndarray:
    """The six pose landmarks (eye corners, lip corners, nose end, chin) in
    the fixed model order, from a 68-point layout."""
    if landmarks is None:
        raise ValueError("no landmarks")
    arr = np.asarray(landmarks, dtype=np.float64)
    if arr.shape != (68, 2):
        raise ValueError("expected 68 landmark points")
    idx = [i - 1 for i in CANDIDATE_LANDMARK_INDICES]
    return arr[idx].copy()


# ---------------------------------------------------------------------------
# DLT pose initialisation


def solve_pose_dlt(
    points2d: np.ndarray, model: np.ndarray, intrinsics: CameraIntrinsics
) -> Pose:
    """Homogeneous least-squares estimate of [R|t] from 2D-3D pairs.

    Works in normalised camera coordinates (intrinsics factored out), with
    Hartley normalisation of both point sets for conditioning; the rotation
    block is orthonormalised by nearest-rotation projection and the sign fixed
    so the model sits in front of the camera.
    """
    pts2 = np.asarray(points2d, dtype=np.float64)
    pts3 = np.asarray(model, dtype=np.float64)
    if pts2.shape[0] != pts3.shape[0] or pts2.shape[0] < 6:
        raise ValueError("need at least six 2D-3D correspondences")

    # Normalised camera coordinates.
    xn = np.empty_like(pts2)
    xn[:, 0] = (pts2[:, 0] - intrinsics.principal_x) / intrinsics.focal_x
    xn[:, 1] = (pts2[:, 1] - intrinsics.principal_y) / intrinsics.focal_y

    # Hartley conditioning: centre both sets, scale to mean norm sqrt(2)/sqrt(3).
    c2 = xn.mean(axis=0)
    d2 = np.linalg.norm(xn - c2, axis=1).mean()
    if d2 < 1e-12:
        raise DegenerateGeometryError("image points are coincident")
    s2 = math.sqrt(2.0) / d2
    T2 = np.array([[s2, 0, -s2 * c2[0]], [0, s2, -s2 * c2[1]], [0, 0, 1]])

    c3 = pts3.mean(axis=0)
    d3 = np.linalg.norm(pts3 - c3, axis=1).mean()
    if d3 < 1e-12:
        raise DegenerateGeometryError("model points are coincident")
    s3 = math.sqrt(3.0) / d3
    T3 = np.eye(4)
    T3[:3, :3] *= s3
    T3[:3, 3] = -s3 * c3

    u = (xn - c2) * s2
    X = (pts3 - c3) * s3

    n = pts2.shape[0]
    A = np.zeros((2 * n, 12))
    for i in range(n):
        Xi = np.array([X[i, 0], X[i, 1], X[i, 2], 1.0])
        A[2 * i, 0:4] = Xi
        A[2 * i, 8:12] = -u[i, 0] * Xi
        A[2 * i + 1, 4:8] = Xi
        A[2 * i + 1, 8:12] = -u[i, 1] * Xi

    _, sing, Vt = np.linalg.svd(A)
    if sing[0] < 1e-15 or sing[-2] / sing[0] < 1e-9:
        raise DegenerateGeometryError("rank-deficient correspondence system")
    P = Vt[-1].reshape(3, 4)

    # Undo conditioning: P maps original model coords to original normalised
    # image coords.
    P = np.linalg.inv(T2) @ P @ T3

    # Cheirality: majority of the points must have positive depth.
    depths = P[2, :3] @ pts3.T + P[2, 3]
    if np.sum(depths > 0) < (n + 1) // 2:
        P = -P
    M = P[:, :3]
    det = np.linalg.det(M)
    if det <= 0:
        raise DegenerateGeometryError("projection matrix has non-positive handedness")
    scale = det ** (1.0 / 3.0)
    R0 = M / scale
    U, _, Vt2 = np.linalg.svd(R0)
    R = U @ np.diag([1.0, 1.0, float(np.linalg.det(U @ Vt2))]) @ Vt2
    t = P[:, 3] / scale
    if t[2] <= 0:
        raise DegenerateGeometryError("solution places the face behind the camera")
    return Pose(rotation_vector(R), t)


# ---------------------------------------------------------------------------
# Levenberg-Marquardt refinement (numba kernel)


@njit(cache=True)
def _rotate_apply(r0, r1, r2, px, py, pz):
    """Apply axis-angle (r0,r1,r2) to point (px,py,pz) via Rodrigues."""
    theta = math.sqrt(r0 * r0 + r1 * r1 + r2 * r2)
    if theta < 1e-12:
        return px, py, pz
    kx, ky, kz = r0 / theta, r1 / theta, r2 / theta
    c = math.cos(theta)
    s = math.sin(theta)
    one_c = 1.0 - c
    dot = kx * px + ky * py + kz * pz
    crx = ky * pz - kz * py
    cry = kz * px - kx * pz
    crz = kx * py - ky * px
    return (
        px * c + crx * s + kx * dot * one_c,
        py * c + cry * s + ky * dot * one_c,
        pz * c + crz * s + kz * dot * one_c,
    )


@njit(cache=True)
def _residuals(theta, pts2d, model, fx, fy, cx, cy, out):
    """Reprojection residuals (projected - observed); inf when behind camera."""
    n = model.shape[0]
    for i in range(n):
        rx, ry, rz = _rotate_apply(
            theta[0], theta[1], theta[2], model[i, 0], model[i, 1], model[i, 2]
        )
        xc = rx + theta[3]
        yc = ry + theta[4]
        zc = rz + theta[5]
        if zc <= 1e-12:
            for j in range(2 * n):
                out[j] = np.inf
            return
        out[2 * i] = fx * xc / zc + cx - pts2d[i, 0]
        out[2 * i + 1] = fy * yc / zc + cy - pts2d[i, 1]


@njit(cache=True)
def _solve6(H, g, delta):
    """Gauss-Jordan solve of H delta = g with partial pivoting; False when
    singular."""
    n = 6
    aug = np.empty((n, n + 1))
    for i in range(n):
        for j in range(n):
            aug[i, j] = H[i, j]
        aug[i, n] = g[i]
    for col in range(n):
        piv = col
        best = abs(aug[col, col])
        for row in range(col + 1, n):
            if abs(aug[row, col]) > best:
                best = abs(aug[row, col])
                piv = row
        if best < 1e-300:
            return False
        if piv != col:
            for j in range(n + 1):
                tmp = aug[col, j]
                aug[col, j] = aug[piv, j]
                aug[piv, j] = tmp
        inv = 1.0 / aug[col, col]
        for j in range(col, n + 1):
            aug[col, j] *= inv
        for row in range(n):
            if row != col:
                factor = aug[row, col]
                if factor != 0.0:
                    for j in range(col, n + 1):
                        aug[row, j] -= factor * aug[col, j]
    for i in range(n):
        delta[i] = aug[i, n]
    return True


@njit(cache=True)
def _lm_kernel(theta0, pts2d, model, fx, fy, cx, cy, lam0, max_iter, tol):
    """Damped Gauss-Newton with Marquardt scaling; only improving steps are
    accepted, so the returned cost never exceeds the initial one."""
    n_res = 2 * model.shape[0]
    theta = theta0.copy()
    res = np.empty(n_res)
    res_try = np.empty(n_res)
    _residuals(theta, pts2d, model, fx, fy, cx, cy, res)
    cost = 0.0
    for j in range(n_res):
        cost += res[j] * res[j]
    lam = lam0
    J = np.empty((n_res, 6))
    g = np.empty(6)
    H = np.empty((6, 6))
    delta = np.empty(6)
    theta_try = np.empty(6)
    for _ in range(max_iter):
        # Central-difference Jacobian.
        for p in range(6):
            h = 1e-6 * (abs(theta[p]) if abs(theta[p]) > 1.0 else 1.0)
            saved = theta[p]
            theta[p] = saved + h
            _residuals(theta, pts2d, model, fx, fy, cx, cy, res_try)
            for j in range(n_res):
                J[j, p] = res_try[j]
            theta[p] = saved - h
            _residuals(theta, pts2d, model, fx, fy, cx, cy, res_try)
            for j in range(n_res):
                J[j, p] = (J[j, p] - res_try[j]) / (2.0 * h)
            theta[p] = saved
        for p in range(6):
            acc = 0.0
            for j in range(n_res):
                acc += J[j, p] * res[j]
            g[p] = acc
            for q in range(6):
                acc2 = 0.0
                for j in range(n_res):
                    acc2 += J[j, p] * J[j, q]
                H[p, q] = acc2
        improved = False
        new_cost = cost
        while lam <= 1e12:
            Hd = H.copy()
            for p in range(6):
                d = H[p, p] if H[p, p] > 1e-12 else 1e-12
                Hd[p, p] = H[p, p] + lam * d
            gm = np.empty(6)
            for p in range(6):
                gm[p] = -g[p]
            ok = _solve6(Hd, gm, delta)
            if ok:
                for p in range(6):
                    theta_try[p] = theta[p] + delta[p]
                _residuals(theta_try, pts2d, model, fx, fy, cx, cy, res_try)
                trial = 0.0
                finite = True
                for j in range(n_res):
                    v = res_try[j]
                    if not math.isfinite(v):
                        finite = False
                        break
                    trial += v * v
                if finite and trial < cost:
                    new_cost = trial
                    for p in range(6):
                        theta[p] = theta_try[p]
                    for j in range(n_res):
                        res[j] = res_try[j]
                    lam = lam * 0.1
                    improved = True
                    break
            lam = lam * 10.0
        if not improved:
            break
        step = 0.0
        for p in range(6):
            step += delta[p] * delta[p]
        decrease = cost - new_cost
        cost = new_cost
        if math.sqrt(step) < tol or decrease < tol:
            break
    return theta, cost


def refine_pose_lm(
    initial: Pose,
    points2d: np.ndarray,
    model: np.ndarray,
    intrinsics: CameraIntrinsics,
    lambda0: float = 1e-3,
    max_iter: int = 50,
    tol: float = 1e-10,
) -> Pose:
    """Minimise total squared reprojection error from ``initial``; accepted
    steps only, so the result is never worse than the input."""
    pts2 = np.ascontiguousarray(points2d, dtype=np.float64)
    pts3 = np.ascontiguousarray(model, dtype=np.float64)
    theta0 = np.concatenate(
        [
            np.asarray(initial.rotation, dtype=np.float64),
            np.asarray(initial.translation, dtype=np.float64),
        ]
    )
    if not np.all(np.isfinite(theta0)):
        raise ValueError("non-finite initial pose")
    res0 = np.empty(2 * pts3.shape[0])
    _residuals(
        theta0, pts2, pts3, intrinsics.focal_x, intrinsics.focal_y,
        intrinsics.principal_x, intrinsics.principal_y, res0,
    )
    if not np.all(np.isfinite(res0)):
        raise ValueError("non-finite residuals at the initial pose")
    theta, _cost = _lm_kernel(
        theta0, pts2, pts3,
        intrinsics.focal_x, intrinsics.focal_y,
        intrinsics.principal_x, intrinsics.principal_y,
        lambda0, max_iter, tol,
    )
    return Pose(theta[:3].copy(), theta[3:].copy())


def _weak_perspective_seed(
    points2d: np.ndarray, model: np.ndarray, intrinsics: CameraIntrinsics
) -> Pose:
    """Frontal pose whose depth matches the model-to-image spread ratio.

    Used to restart refinement when the DLT system collapses onto the mirror
    solution, which happens readily for thin, near-planar models under noise.
    """
    pts2 = np.asarray(points2d, dtype=np.float64)
    pts3 = np.asarray(model, dtype=np.float64)
    xn = np.column_stack(
        (
            (pts2[:, 0] - intrinsics.principal_x) / intrinsics.focal_x,
            (pts2[:, 1] - intrinsics.principal_y) / intrinsics.focal_y,
        )
    )
    c2 = xn.mean(axis=0)
    spread2 = np.linalg.norm(xn - c2, axis=1).mean()
    if spread2 < 1e-12:
        raise DegenerateGeometryError("image points are coincident")
    c3 = pts3.mean(axis=0)
    spread3 = np.linalg.norm((pts3 - c3)[:, :2], axis=1).mean()
    tz = spread3 / spread2
    t = np.array([c2[0] * tz - c3[0], c2[1] * tz - c3[1], tz - c3[2]])
    return Pose(np.zeros(3), t)


def solve_pose(
    points2d: np.ndarray,
    model: np.ndarray,
    intrinsics: CameraIntrinsics,
    lambda0: float = 1e-3,
    max_iter: int = 50,
    tol: float = 1e-10,
) -> Pose:
    """DLT initialisation followed by LM refinement.

    A mirror-degenerate initialisation falls back to refining from a
    weak-perspective frontal seed; if even that leaves part of the model
    behind the camera, the initialisation error is re-raised.
    """
    try:
        initial = solve_pose_dlt(points2d, model, intrinsics)
    except DegenerateGeometryError as error:
        seed = _weak_perspective_seed(points2d, model, intrinsics)
        pose = refine_pose_lm(
            seed, points2d, model, intrinsics, lambda0, max_iter, tol
        )
        depths = np.asarray(model, dtype=np.float64) @ rotation_matrix(
            pose.rotation
        )[2] + pose.translation[2]
        if not (np.all(np.isfinite(depths)) and np.all(depths > 0)):
            raise error
        return pose
    return refine_pose_lm(
        initial, points2d, model, intrinsics, lambda0, max_iter, tol,
    )


def reprojection_rmse(
    pose: Pose, points2d: np.ndarray, model: np.ndarray, intrinsics: CameraIntrinsics
) -> float:
    proj = project_points(pose, intrinsics, model)
    d = proj - np.asarray(points2d, dtype=np.float64)
    return float(np.sqrt(np.mean(np.sum(d * d, axis=1))))


# ---------------------------------------------------------------------------
# Horizontal projections and gazing energy


def horizontal_series(
    projections, frame_width: int, normalize: bool = True
) -> list[ProjectionSample]:
    """Keep the horizontal coordinate of (ts, (u, v)) pixel projections,
    normalised by frame width unless disabled."""
    if frame_width <= 0:
        raise ValueError("frame width must be > 0")
    out = []
    for ts, point in projections:
        u = float(point[0])
        out.append(ProjectionSample(int(ts), u / frame_width if normalize else u))
    return out


def gazing_energy(
    samples: list[ProjectionSample], fps: int, anchor: int, event_end: int
) -> list[float]:
    """Per-second energies: windows [anchor + k*fps, anchor + (k+1)*fps) for
    k >= 0 while the window starts within the event span.

    Each energy is the sum of squared sample values in the window. Empty
    windows are omitted; the trailing window cut by ``event_end`` is partial
    and is kept only when it holds at least fps/2 samples. Samples outside
    [anchor, event_end] are ignored.
    """
    if fps < 1:
        raise ValueError("fps must be >= 1")
    sums: dict[int, float] = {}
    counts: dict[int, int] = {}
    for s in samples:
        if s.ts < anchor or s.ts > event_end:
            continue
        k = (s.ts - anchor) // fps
        sums[k] = sums.get(k, 0.0) + s.x * s.x
        counts[k] = counts.get(k, 0) + 1
    energies = []
    k = 0
    while anchor + k * fps <= event_end:
        if k in sums:
            partial = anchor + (k + 1) * fps - 1 > event_end
            if not (partial and counts[k] < fps / 2):
                energies.append(sums[k])
        k += 1
    return energies


# ---------------------------------------------------------------------------
# Student-t statistics (authored incomplete-beta evaluation)

_BETA_EPS = 1e-14
_BETA_FPMIN = 1e-300
_BETA_MAX_ITER = 300


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    """Modified Lentz evaluation of the incomplete-beta continued fraction."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _BETA_FPMIN:
        d = _BETA_FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _BETA_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETA_FPMIN:
            d = _BETA_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _BETA_FPMIN:
            c = _BETA_FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETA_FPMIN:
            d = _BETA_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _BETA_FPMIN:
            c = _BETA_FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETA_EPS:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) evaluated by continued fraction (relative accuracy ~1e-10)."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be > 0")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, df: float) -> float:
    """Two-sided p-value of a t statistic: I_{df/(df+t^2)}(df/2, 1/2)."""
    if df <= 0:
        raise ValueError("df must be > 0")
    if math.isinf(t):
        return 0.0
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


def t_test_equal_mean(
    energies_a, energies_b, welch: bool = False
) -> TTestResult:
    """Two-sample equal-mean t-test (pooled variance by default).

    Raises :class:`InsufficientDataError` with fewer than two samples on
    either side. A zero-variance degenerate pair yields p=1 for equal means
    and p=0 otherwise.
    """
    a = np.asarray(list(energies_a), dtype=np.float64)
    b = np.asarray(list(energies_b), dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise InsufficientDataError(
            f"need >= 2 energy windows per side, got {a.size} and {b.size}"
        )
    na, nb = a.size, b.size
    mean_a = float(a.mean())
    mean_b = float(b.mean())
    ssq_a = float(np.sum((a - mean_a) ** 2))
    ssq_b = float(np.sum((b - mean_b) ** 2))
    if welch:
        va = ssq_a / (na - 1)
        vb = ssq_b / (nb - 1)
        se2 = va / na + vb / nb
        if se2 == 0.0:
            df = float(na + nb - 2)
        else:
            df = se2 * se2 / (
                (va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1)
            )
    else:
        df = float(na + nb - 2)
        pooled = (ssq_a + ssq_b) / df
        se2 = pooled * (1.0 / na + 1.0 / nb)
    if se2 == 0.0:
        if mean_a == mean_b:
            return TTestResult(0.0, df, 1.0)
        t = math.inf if mean_a > mean_b else -math.inf
        return TTestResult(t, df, 0.0)
    t = (mean_a - mean_b) / math.sqrt(se2)
    return TTestResult(t, df, t_two_sided_p(t, df))


def cognitive_presence(result: TTestResult, alpha: float) -> bool:
    """Engaged iff the equal-mean hypothesis is *not* rejected (p >= alpha;
    rejection requires strictly p < alpha)."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    return result.p >= alpha
