"""Rigid transforms between camera, tool, and base frames; pixel ray casting."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

_ORTHO_TOL = 1e-9


class BadTransform(ValueError):
    """Raised for a matrix that is not a rigid homogeneous transform."""


class NoIntersection(RuntimeError):
    """Raised when a pixel ray does not hit the plane in front of the camera."""


@dataclass
class HomTransform:
    """4x4 rigid transform; rotation block orthonormal with determinant +1."""

    mat: np.ndarray

    def __post_init__(self):
        self.mat = np.asarray(self.mat, dtype=np.float64)
        if self.mat.shape != (4, 4):
            raise BadTransform(f"expected a 4x4 matrix, got {self.mat.shape}")
        if not np.allclose(self.mat[3], (0.0, 0.0, 0.0, 1.0), atol=_ORTHO_TOL):
            raise BadTransform("bottom row must be [0, 0, 0, 1]")
        r = self.mat[:3, :3]
        if np.abs(r.T @ r - np.eye(3)).max() > _ORTHO_TOL:
            raise BadTransform("rotation block is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > _ORTHO_TOL:
            raise BadTransform("rotation block must have determinant +1")

    @property
    def rotation(self) -> np.ndarray:
        return self.mat[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.mat[:3, 3]

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform one (3,) point or an (n, 3) batch."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def inverse(self) -> "HomTransform":
        r = self.rotation.T
        m = np.eye(4)
        m[:3, :3] = r
        m[:3, 3] = -r @ self.translation
        return HomTransform(m)

    def to_list(self) -> list:
        return [float(v) for v in self.mat.ravel()]

    @classmethod
    def from_list(cls, vals) -> "HomTransform":
        arr = np.asarray(vals, dtype=np.float64)
        if arr.size != 16:
            raise BadTransform(f"expected 16 row-major entries, got {arr.size}")
        return cls(arr.reshape(4, 4))


def identity() -> HomTransform:
    return HomTransform(np.eye(4))


def translation(x: float, y: float, z: float) -> HomTransform:
    m = np.eye(4)
    m[:3, 3] = (x, y, z)
    return HomTransform(m)


def rotation_x(a: float) -> HomTransform:
    c, s = math.cos(a), math.sin(a)
    m = np.eye(4)
    m[1:3, 1:3] = [[c, -s], [s, c]]
    return HomTransform(m)


def rotation_y(a: float) -> HomTransform:
    c, s = math.cos(a), math.sin(a)
    m = np.eye(4)
    m[0, 0], m[0, 2], m[2, 0], m[2, 2] = c, s, -s, c
    return HomTransform(m)


def rotation_z(a: float) -> HomTransform:
    c, s = math.cos(a), math.sin(a)
    m = np.eye(4)
    m[:2, :2] = [[c, -s], [s, c]]
    return HomTransform(m)


def compose(a: HomTransform, b: HomTransform) -> HomTransform:
    """a then b applied from the right: compose(a, b).apply(p) == a.apply(b.apply(p)).

    The rotation product is re-orthonormalized via SVD when accumulated
    roundoff pushes it past tolerance.
    """
    m = a.mat @ b.mat
    r = m[:3, :3]
    if np.abs(r.T @ r - np.eye(3)).max() > _ORTHO_TOL:
        u, _, vt = np.linalg.svd(r)
        r = u @ vt
        if np.linalg.det(r) < 0:
            u[:, -1] = -u[:, -1]
            r = u @ vt
        m = m.copy()
        m[:3, :3] = r
    m[3] = (0.0, 0.0, 0.0, 1.0)
    return HomTransform(m)


@dataclass
class CameraIntrinsics:
    """Pinhole model: focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise BadTransform("focal lengths must be positive")


@dataclass
class TablePlane:
    """Plane normal . P = offset in the camera frame."""

    normal: tuple
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64)
        norm = np.linalg.norm(n)
        if norm == 0:
            raise BadTransform("plane normal must be nonzero")
        self.normal = tuple(n / norm)


def pixel_to_camera(intr: CameraIntrinsics, pixel, plane: TablePlane) -> np.ndarray:
    """Back-project a pixel onto the plane, in camera coordinates.

    The ray through the pixel is ((u - cx)/fx, (v - cy)/fy, 1) scaled by t;
    the hit must lie in front of the camera (t > 0).
    """
    d = np.array([(pixel[0] - intr.cx) / intr.fx,
                  (pixel[1] - intr.cy) / intr.fy,
                  1.0])
    n = np.asarray(plane.normal)
    denom = float(n @ d)
    if abs(denom) < 1e-12:
        raise NoIntersection("pixel ray parallel to the plane")
    t = plane.offset / denom
    if t <= 0:
        raise NoIntersection("plane behind the camera for this pixel")
    return t * d


def project_to_pixel(intr: CameraIntrinsics, point) -> tuple:
    """Forward pinhole projection of a camera-frame point with positive depth."""
    p = np.asarray(point, dtype=np.float64)
    if p[2] <= 0:
        raise NoIntersection("point is not in front of the camera")
    return (intr.fx * p[0] / p[2] + intr.cx, intr.fy * p[1] / p[2] + intr.cy)


def pixel_to_base(base_t_tool: HomTransform, tool_t_cam: HomTransform,
                  intr: CameraIntrinsics, plane: TablePlane, pixel) -> np.ndarray:
    """Map an image pixel to base-frame coordinates on the table plane."""
    cam_point = pixel_to_camera(intr, pixel, plane)
    return compose(base_t_tool, tool_t_cam).apply(cam_point)


def load_rig(path) -> dict:
    """Read a calibration file: named 4x4 transforms, intrinsics, table plane."""
    with open(path) as f:
        raw = json.load(f)
    out = {
        "base_t_tool": HomTransform.from_list(raw["base_t_tool"]),
        "tool_t_cam": HomTransform.from_list(raw["tool_t_cam"]),
        "intrinsics": CameraIntrinsics(**raw["intrinsics"]),
    }
    if "table_plane" in raw:
        tp = raw["table_plane"]
        out["table_plane"] = TablePlane(normal=tuple(tp["normal"]), offset=float(tp["offset"]))
    return out


def save_rig(path, base_t_tool: HomTransform, tool_t_cam: HomTransform,
             intr: CameraIntrinsics, plane: TablePlane | None = None) -> None:
    raw = {
        "base_t_tool": base_t_tool.to_list(),
        "tool_t_cam": tool_t_cam.to_list(),
        "intrinsics": {"fx": intr.fx, "fy": intr.fy, "cx": intr.cx, "cy": intr.cy},
    }
    if plane is not None:
        raw["table_plane"] = {"normal": list(plane.normal), "offset": plane.offset}
    with open(path, "w") as f:
        json.dump(raw, f, indent=2)
        f.write("\n")
