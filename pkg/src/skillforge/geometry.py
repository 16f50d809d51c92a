"""Small 3-D vector and quaternion helpers shared across the package.

Conventions:
  - vectors are numpy float64 arrays of shape (3,)
  - quaternions are (w, x, y, z) numpy arrays, unit norm, scalar first
    (matching the trace CSV column order qw,qx,qy,qz)
"""

from __future__ import annotations

import numpy as np

EPS = 1e-12

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def vec(x) -> np.ndarray:
    """Coerce to a float64 3-vector."""
    v = np.asarray(x, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"expected 3-vector, got shape {v.shape}")
    return v


def norm(v) -> float:
    return float(np.linalg.norm(v))


def normalize(v) -> np.ndarray:
    """Unit vector along v.

    Raises:
        ValueError: if v has (numerically) zero length.
    """
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n < EPS:
        raise ValueError("cannot normalize zero-length vector")
    return v / n


def is_unit(v, tol: float = 1e-9) -> bool:
    return abs(np.linalg.norm(v) - 1.0) <= tol


def angle_between(a, b) -> float:
    """Angle in radians between two nonzero vectors."""
    ua, ub = normalize(a), normalize(b)
    return float(np.arccos(np.clip(np.dot(ua, ub), -1.0, 1.0)))


def any_orthonormal(v) -> np.ndarray:
    """Some unit vector orthogonal to v (deterministic choice)."""
    v = normalize(v)
    ref = np.array([1.0, 0.0, 0.0]) if abs(v[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    return normalize(np.cross(v, ref))


# ---------------------------------------------------------------------------
# Quaternions (w, x, y, z)
# ---------------------------------------------------------------------------

def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n < EPS:
        raise ValueError("cannot normalize zero quaternion")
    return q / n


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    """Unit quaternion rotating by `angle` radians about `axis`."""
    if abs(angle) < EPS:
        return IDENTITY_QUAT.copy()
    u = normalize(axis)
    half = 0.5 * angle
    return np.concatenate(([np.cos(half)], np.sin(half) * u))


def quat_multiply(a, b) -> np.ndarray:
    """Composition a*b: rotate by b first, then by a."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_rotate(q, v) -> np.ndarray:
    """Rotate vector v by unit quaternion q."""
    w = q[0]
    u = q[1:]
    v = np.asarray(v, dtype=float)
    # Rodrigues form of quaternion rotation
    return v + 2.0 * np.cross(u, np.cross(u, v) + w * v)


def quat_matrix(q) -> np.ndarray:
    """3x3 rotation matrix of a unit quaternion."""
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def rotation_between(a, b) -> np.ndarray:
    """Unit quaternion taking direction a onto direction b (shortest arc)."""
    ua, ub = normalize(a), normalize(b)
    c = np.cross(ua, ub)
    d = float(np.dot(ua, ub))
    if np.linalg.norm(c) < EPS:
        if d > 0.0:
            return IDENTITY_QUAT.copy()
        # antipodal: rotate pi about any orthogonal axis
        return quat_from_axis_angle(any_orthonormal(ua), np.pi)
    angle = np.arccos(np.clip(d, -1.0, 1.0))
    return quat_from_axis_angle(c, angle)


def random_unit_vector(rng: np.random.Generator) -> np.ndarray:
    """Uniform random direction on the unit sphere."""
    v = rng.normal(size=3)
    while np.linalg.norm(v) < 1e-6:
        v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def fibonacci_sphere(n: int) -> np.ndarray:
    """n near-uniform directions on the unit sphere (Fibonacci spiral)."""
    if n < 1:
        raise ValueError("need at least one grid point")
    i = np.arange(n, dtype=float) + 0.5
    phi = np.pi * (3.0 - np.sqrt(5.0)) * i
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    pts = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)
