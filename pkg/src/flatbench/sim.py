"""Mass-spring cloth on a table plane: crumpling, fixed-distance drags, rendering."""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass

import numpy as np

from .imaging import RgbImage

CLOTH_GREEN = (70, 170, 80)
BG_GRAY = (128, 128, 128)

# extension beyond this fraction of rest length exerts no extra force, so a
# fast-moving pin cannot inject unbounded energy
_STRETCH_CAP = 0.6
_MAX_FOLD_ANGLE = 0.93 * math.pi


class BadParams(ValueError):
    """Raised for simulator parameters outside their valid ranges."""


class NoContact(RuntimeError):
    """Raised when no particle lies within grasp radius of a contact point."""


class Unstable(RuntimeError):
    """Raised when integration diverges (non-finite energy)."""


@dataclass
class SimParams:
    """Spring constants, integration, contact, and drag geometry.

    Semi-implicit integration is stable while dt^2 * stiffness / mass < 2;
    the constructor rejects parameter sets outside that bound.  After each
    substep, structural spring extensions are projected back to at most
    strain_limit times rest length (strain_iterations Jacobi passes), which
    keeps the sheet near-inextensible the way woven fabric is.
    """

    stiff_structural: float = 300.0
    stiff_shear: float = 30.0
    stiff_bend: float = 8.0
    damping: float = 15.0
    gravity: float = 9.81
    friction: float = 0.5
    dt: float = 0.001
    settle_tolerance: float = 3e-7
    max_settle_steps: int = 4000
    drag_distance: float = 0.08
    drag_depth: float = 0.0005
    particle_mass: float = 0.001
    drag_steps: int = 800
    strain_limit: float = 1.05
    strain_iterations: int = 2

    def __post_init__(self):
        for name in ("stiff_structural", "stiff_shear", "stiff_bend", "damping",
                     "gravity", "friction", "dt", "settle_tolerance",
                     "particle_mass", "drag_depth"):
            if getattr(self, name) <= 0:
                raise BadParams(f"{name} must be positive")
        if self.drag_distance < 0:
            raise BadParams("drag_distance must be nonnegative")
        if self.max_settle_steps < 1 or self.drag_steps < 1:
            raise BadParams("step counts must be at least 1")
        if self.strain_limit < 1.0:
            raise BadParams("strain_limit must be at least 1.0")
        if self.strain_iterations < 0:
            raise BadParams("strain_iterations must be nonnegative")
        k = max(self.stiff_structural, self.stiff_shear, self.stiff_bend)
        if self.dt ** 2 * k / self.particle_mass >= 2.0:
            raise BadParams(
                f"dt^2 * stiffness / mass = {self.dt ** 2 * k / self.particle_mass:.3f} "
                "breaks the stability bound (< 2)")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "stiff_structural", "stiff_shear", "stiff_bend", "damping", "gravity",
            "friction", "dt", "settle_tolerance", "max_settle_steps",
            "drag_distance", "drag_depth", "particle_mass", "drag_steps",
            "strain_limit", "strain_iterations")}

    @classmethod
    def from_dict(cls, d: dict) -> "SimParams":
        return cls(**d)


@dataclass
class ClothState:
    """Particle grid: positions and velocities in meters on a z >= 0 table."""

    nx: int
    ny: int
    rest_len: float
    positions: np.ndarray
    velocities: np.ndarray
    pinned: int | None = None

    @property
    def n_particles(self) -> int:
        return self.nx * self.ny

    def copy(self) -> "ClothState":
        return ClothState(nx=self.nx, ny=self.ny, rest_len=self.rest_len,
                          positions=self.positions.copy(),
                          velocities=self.velocities.copy(), pinned=self.pinned)

    def to_dict(self) -> dict:
        return {
            "nx": self.nx, "ny": self.ny, "rest_len": self.rest_len,
            "positions": [[float(v) for v in p] for p in self.positions],
            "velocities": [[float(v) for v in p] for p in self.velocities],
            "pinned": self.pinned,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClothState":
        return cls(nx=int(d["nx"]), ny=int(d["ny"]), rest_len=float(d["rest_len"]),
                   positions=np.asarray(d["positions"], dtype=np.float64),
                   velocities=np.asarray(d["velocities"], dtype=np.float64),
                   pinned=d.get("pinned"))


def save_state(path, state: ClothState, params: SimParams | None = None) -> None:
    doc = {"state": state.to_dict()}
    if params is not None:
        doc["params"] = params.to_dict()
    with open(path, "w") as f:
        json.dump(doc, f)
        f.write("\n")


def load_state(path) -> tuple:
    with open(path) as f:
        doc = json.load(f)
    params = SimParams.from_dict(doc["params"]) if "params" in doc else None
    return ClothState.from_dict(doc["state"]), params


@functools.lru_cache(maxsize=8)
def _topology(nx: int, ny: int):
    """Spring index arrays for a grid: structural, shear (diagonal), bend (skip-one)."""
    def pid(ix, iy):
        return iy * nx + ix

    ia, ib, kind = [], [], []

    def add(a, b, k):
        ia.append(a)
        ib.append(b)
        kind.append(k)

    for iy in range(ny):
        for ix in range(nx):
            if ix + 1 < nx:
                add(pid(ix, iy), pid(ix + 1, iy), 0)
            if iy + 1 < ny:
                add(pid(ix, iy), pid(ix, iy + 1), 0)
            if ix + 1 < nx and iy + 1 < ny:
                add(pid(ix, iy), pid(ix + 1, iy + 1), 1)
                add(pid(ix + 1, iy), pid(ix, iy + 1), 1)
            if ix + 2 < nx:
                add(pid(ix, iy), pid(ix + 2, iy), 2)
            if iy + 2 < ny:
                add(pid(ix, iy), pid(ix, iy + 2), 2)

    ia = np.asarray(ia, dtype=np.intp)
    ib = np.asarray(ib, dtype=np.intp)
    kind = np.asarray(kind, dtype=np.intp)
    scatter = np.concatenate([ia, ib])
    # one fused bincount per substep accumulates all three force components
    scatter3 = (scatter[:, np.newaxis] * 3 + np.arange(3)).ravel()
    rest_mult = np.array([1.0, math.sqrt(2.0), 2.0])[kind]
    return ia, ib, kind, scatter3, rest_mult


def init_flat(nx: int, ny: int, rest_len: float,
              params: SimParams | None = None) -> ClothState:
    """Planar grid at rest on the table, centered on the world origin."""
    if nx < 2 or ny < 2:
        raise BadParams(f"grid must be at least 2x2, got {nx}x{ny}")
    if rest_len <= 0:
        raise BadParams(f"rest_len must be positive, got {rest_len}")
    xs = (np.arange(nx) - (nx - 1) / 2.0) * rest_len
    ys = (np.arange(ny) - (ny - 1) / 2.0) * rest_len
    gx, gy = np.meshgrid(xs, ys)
    pos = np.zeros((nx * ny, 3))
    pos[:, 0] = gx.ravel()
    pos[:, 1] = gy.ravel()
    return ClothState(nx=nx, ny=ny, rest_len=rest_len, positions=pos,
                      velocities=np.zeros((nx * ny, 3)))


def _integrate(pos, vel, state: ClothState, params: SimParams, n: int,
               pin_idx=None, pin_path=None, stop_below=None,
               energies=None) -> float:
    """Integrate up to n substeps in place; returns final kinetic energy.

    pin_path, when given, prescribes the pinned particle's position at each
    substep; the pin's velocity follows the path so release momentum is
    sensible.  stop_below ends the loop early once kinetic energy falls under
    it; energies, when given, collects the per-substep kinetic energy.
    """
    ia, ib, kind, scatter3, rest_mult = _topology(state.nx, state.ny)
    rest = rest_mult * state.rest_len
    k = np.array([params.stiff_structural, params.stiff_shear,
                  params.stiff_bend])[kind]
    cap = _STRETCH_CAP * rest
    m = params.particle_mass
    dt = params.dt
    n_part = pos.shape[0]
    sel = kind == 0
    sia, sib = ia[sel], ib[sel]
    s_scatter = np.concatenate([sia, sib])
    s_scatter3 = (s_scatter[:, np.newaxis] * 3 + np.arange(3)).ravel()
    max_len = params.strain_limit * rest[sel]
    # averaging by valence keeps the Jacobi projection contractive
    s_valence = np.bincount(s_scatter, minlength=n_part).astype(np.float64)
    np.maximum(s_valence, 1.0, out=s_valence)
    damp = max(0.0, 1.0 - params.damping * dt)
    fall = dt * params.gravity
    # Coulomb-style table friction: ground contact bleeds a fixed amount of
    # tangential speed per substep, so slow sliding stops outright and the
    # resting bulk of the cloth anchors against drags elsewhere
    fric_dv = params.friction * params.gravity * dt
    ke = 0.0

    for i in range(n):
        d = pos[ib] - pos[ia]
        dist = np.sqrt((d * d).sum(axis=1))
        np.maximum(dist, 1e-12, out=dist)
        stretch = dist - rest
        np.minimum(stretch, cap, out=stretch)
        fvec = (k * stretch / dist)[:, np.newaxis] * d
        comp = np.concatenate([fvec, -fvec])
        acc = np.bincount(scatter3, weights=comp.ravel(), minlength=3 * n_part)
        vel += (dt / m) * acc.reshape(n_part, 3)
        vel[:, 2] -= fall
        vel *= damp
        if pin_idx is not None:
            prev = pos[pin_idx].copy()
        pos += dt * vel
        target = None
        if pin_idx is not None:
            target = pin_path[i]
            vel[pin_idx] = (target - prev) / dt
            pos[pin_idx] = target
        for _ in range(params.strain_iterations):
            sd = pos[sib] - pos[sia]
            sdist = np.sqrt((sd * sd).sum(axis=1))
            np.maximum(sdist, 1e-12, out=sdist)
            excess = np.maximum(sdist - max_len, 0.0)
            if not excess.any():
                break
            corr = (0.5 * excess / sdist)[:, np.newaxis] * sd
            comp2 = np.concatenate([corr, -corr])
            delta = np.bincount(s_scatter3, weights=comp2.ravel(),
                                minlength=3 * n_part).reshape(n_part, 3)
            delta /= s_valence[:, np.newaxis]
            pos += delta
            # matching velocity correction, else limited springs re-stretch
            # every substep and the jitter never falls below settle_tolerance
            vel += delta / dt
            if target is not None:
                pos[pin_idx] = target
                vel[pin_idx] = (target - prev) / dt
        below = pos[:, 2] < 0.0
        if below.any():
            pos[below, 2] = 0.0
            vel[below, 2] = np.maximum(vel[below, 2], 0.0)
            vt = vel[below, :2]
            speed = np.hypot(vt[:, 0], vt[:, 1])
            scale = np.maximum(0.0, 1.0 - fric_dv / np.maximum(speed, 1e-12))
            vel[below, :2] = vt * scale[:, np.newaxis]
        ke = 0.5 * m * float((vel * vel).sum())
        if not math.isfinite(ke):
            raise Unstable(f"kinetic energy diverged at substep {i}")
        if energies is not None:
            energies.append(ke)
        if stop_below is not None and ke < stop_below:
            break
    return ke


def settle(state: ClothState, params: SimParams) -> ClothState:
    """Integrate until kinetic energy drops below settle_tolerance.

    Stops at max_settle_steps if the threshold is never reached; raises
    Unstable on divergence.
    """
    pos = state.positions.copy()
    vel = state.velocities.copy()
    _integrate(pos, vel, state, params, params.max_settle_steps,
               stop_below=params.settle_tolerance)
    return ClothState(nx=state.nx, ny=state.ny, rest_len=state.rest_len,
                      positions=pos, velocities=vel, pinned=None)


def settle_trace(state: ClothState, params: SimParams) -> tuple:
    """Like settle but also returns the per-substep kinetic energy sequence."""
    pos = state.positions.copy()
    vel = state.velocities.copy()
    energies: list = []
    _integrate(pos, vel, state, params, params.max_settle_steps,
               stop_below=params.settle_tolerance, energies=energies)
    out = ClothState(nx=state.nx, ny=state.ny, rest_len=state.rest_len,
                     positions=pos, velocities=vel, pinned=None)
    return out, energies


@dataclass
class Fold:
    """One crease: a line through point at angle psi, folding the sigma side.

    members marks the particles on the folded side at the moment this fold is
    applied (earlier folds already replayed geometrically).  normal is the
    in-plane unit normal of the line; folded particles end up at
    sigma * s < 0 where s is the signed normal coordinate.
    """

    point: tuple
    psi: float
    sigma: int
    beta: float
    noise_seed: int
    members: np.ndarray

    @property
    def normal(self) -> tuple:
        return (-math.sin(self.psi), math.cos(self.psi))

    @property
    def axis(self) -> tuple:
        return (math.cos(self.psi), math.sin(self.psi))


def _rotate_about_line(pos: np.ndarray, members: np.ndarray, point, psi: float,
                       angle: float) -> None:
    """Rodrigues rotation of member particles about an in-table line, in place."""
    origin = np.array([point[0], point[1], 0.0])
    a = np.array([math.cos(psi), math.sin(psi), 0.0])
    rel = pos[members] - origin
    c, s = math.cos(angle), math.sin(angle)
    rot = rel * c + np.cross(a, rel) * s + np.outer(rel @ a, a) * (1.0 - c)
    pos[members] = origin + rot


def fold_plan(state: ClothState, seed: int, n_folds: int,
              intensity: float) -> list:
    """Deterministic crease layout crumple(seed) will apply.

    Fold lines, angles, and member sets are derived by replaying the fold
    geometry (without dynamics or noise) from the given state, so callers can
    reconstruct which particles each crease displaced.
    """
    rng = np.random.default_rng(seed)
    pos = state.positions.copy()
    n = pos.shape[0]
    taken = np.zeros(n, dtype=bool)
    folds = []
    for _ in range(max(0, n_folds)):
        xy = pos[:, :2]
        lo = xy.min(axis=0)
        hi = xy.max(axis=0)
        center = (lo + hi) / 2.0
        extent = hi - lo
        best = None
        # flaps that land on earlier flaps stack into pleats no single drag
        # can open, so resample until the new flap is nearly disjoint
        for _ in range(40):
            psi = float(rng.uniform(0.0, math.pi))
            normal = np.array([-math.sin(psi), math.cos(psi)])
            # lines cut near the boundary so the folded side is an edge flap
            mag = float(rng.uniform(0.18, 0.38)) * float(extent.max())
            sign = 1.0 if rng.random() < 0.5 else -1.0
            point = center + sign * mag * normal
            beta = min(math.pi * intensity * float(rng.uniform(1.15, 1.45)),
                       _MAX_FOLD_ANGLE)
            noise_seed = int(rng.integers(2 ** 63))
            s = (xy - point) @ normal
            sigma = 1 if int((s > 0).sum()) <= int((s < 0).sum()) else -1
            members = sigma * s > 0
            size = int(members.sum())
            overlap = int((members & taken).sum())
            cand = (point, psi, sigma, beta, noise_seed, members)
            if size >= 0.05 * n and overlap <= 0.15 * size:
                best = cand
                break
            score = overlap / max(size, 1) + (10.0 if size < 0.05 * n else 0.0)
            if best is None or score < best_score:
                best, best_score = cand, score
        point, psi, sigma, beta, noise_seed, members = best
        fold = Fold(point=(float(point[0]), float(point[1])), psi=psi,
                    sigma=sigma, beta=beta, noise_seed=noise_seed,
                    members=members)
        folds.append(fold)
        taken |= members
        if intensity > 0:
            _rotate_about_line(pos, members, fold.point, psi, sigma * beta)
    return folds


def crumple(state: ClothState, seed: int, n_folds: int, intensity: float,
            params: SimParams | None = None) -> ClothState:
    """Fold the cloth n_folds times along random lines, add z-noise, settle.

    The smaller side of each line is rotated over by an angle scaled with
    intensity; intensity 0 leaves the cloth essentially unchanged.
    Deterministic per (state, seed, n_folds, intensity).
    """
    if params is None:
        params = SimParams()
    folds = fold_plan(state, seed, n_folds, intensity)
    pos = state.positions.copy()
    for fold in folds:
        if intensity > 0:
            _rotate_about_line(pos, fold.members, fold.point, fold.psi,
                               fold.sigma * fold.beta)
        noise_rng = np.random.default_rng(fold.noise_seed)
        pos[:, 2] += noise_rng.uniform(0.0, 0.002 * intensity, size=pos.shape[0])
        np.maximum(pos[:, 2], 0.0, out=pos[:, 2])
    lifted = ClothState(nx=state.nx, ny=state.ny, rest_len=state.rest_len,
                        positions=pos, velocities=np.zeros_like(pos))
    return settle(lifted, params)


def apply_drag(state: ClothState, contact_point, direction, params: SimParams) -> ClothState:
    """Pin the particle nearest contact_point, press down, drag, release, settle.

    contact_point is world (x, y); direction must be a unit 2-vector.  The
    pin moves drag_distance along direction over drag_steps substeps while
    the rest of the cloth integrates.  Raises NoContact when no particle
    projects within 1.5 rest lengths of the contact point.
    """
    dx, dy = float(direction[0]), float(direction[1])
    norm = math.hypot(dx, dy)
    if abs(norm - 1.0) > 1e-6:
        raise BadParams(f"direction must be unit length, |d| = {norm}")
    grasp_radius = 1.5 * state.rest_len
    xy = state.positions[:, :2]
    cp = np.array([float(contact_point[0]), float(contact_point[1])])
    dist = np.hypot(xy[:, 0] - cp[0], xy[:, 1] - cp[1])
    within = np.nonzero(dist <= grasp_radius)[0]
    if within.size == 0:
        raise NoContact(
            f"no particle within {grasp_radius:.4f} m of {tuple(cp)}")
    # a top-down gripper takes the top layer: highest particle in reach wins,
    # near-ties by planar distance
    z = state.positions[within, 2]
    z_top = z.max()
    ties = within[z >= z_top - 1e-6]
    pin = int(ties[np.argmin(dist[ties])])

    pos = state.positions.copy()
    vel = state.velocities.copy()
    start = pos[pin].copy()
    pressed = np.array([start[0], start[1], params.drag_depth])
    end = pressed + np.array([dx, dy, 0.0]) * params.drag_distance

    press_steps = max(1, params.drag_steps // 4)
    tp = np.linspace(1.0 / press_steps, 1.0, press_steps)[:, np.newaxis]
    press_path = start + (pressed - start) * tp
    td = np.linspace(1.0 / params.drag_steps, 1.0, params.drag_steps)[:, np.newaxis]
    drag_path = pressed + (end - pressed) * td

    _integrate(pos, vel, state, params, press_steps, pin_idx=pin, pin_path=press_path)
    _integrate(pos, vel, state, params, params.drag_steps, pin_idx=pin, pin_path=drag_path)
    moved = ClothState(nx=state.nx, ny=state.ny, rest_len=state.rest_len,
                       positions=pos, velocities=vel, pinned=None)
    return settle(moved, params)


@dataclass
class TopDownCamera:
    """Orthographic overhead view: world (x, y) maps linearly to pixels.

    origin is the world position of the pixel (0, 0) corner; light_dir is
    normalized at construction; ambient sets the shading floor.
    """

    pixels_per_meter: float = 900.0
    image_w: int = 720
    image_h: int = 720
    origin: tuple = (-0.4, -0.4)
    light_dir: tuple = (0.3, 0.3, 1.0)
    ambient: float = 0.25

    def __post_init__(self):
        if self.pixels_per_meter <= 0:
            raise BadParams("pixels_per_meter must be positive")
        if self.image_w < 1 or self.image_h < 1:
            raise BadParams("image dimensions must be positive")
        if not 0.0 <= self.ambient < 1.0:
            raise BadParams("ambient must be in [0, 1)")
        l = np.asarray(self.light_dir, dtype=np.float64)
        n = np.linalg.norm(l)
        if n == 0:
            raise BadParams("light_dir must be nonzero")
        self.light_dir = tuple(l / n)

    def world_to_pixel(self, wx: float, wy: float) -> tuple:
        return ((wx - self.origin[0]) * self.pixels_per_meter,
                (wy - self.origin[1]) * self.pixels_per_meter)

    def pixel_to_world(self, px: float, py: float) -> tuple:
        return (self.origin[0] + px / self.pixels_per_meter,
                self.origin[1] + py / self.pixels_per_meter)

    def to_dict(self) -> dict:
        return {
            "pixels_per_meter": self.pixels_per_meter,
            "image_w": self.image_w, "image_h": self.image_h,
            "origin": [self.origin[0], self.origin[1]],
            "light_dir": [v for v in self.light_dir],
            "ambient": self.ambient,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TopDownCamera":
        return cls(pixels_per_meter=d["pixels_per_meter"], image_w=d["image_w"],
                   image_h=d["image_h"], origin=tuple(d["origin"]),
                   light_dir=tuple(d["light_dir"]), ambient=d["ambient"])


@functools.lru_cache(maxsize=8)
def _triangles(nx: int, ny: int) -> np.ndarray:
    """Two triangles per grid quad, (n_tri, 3) particle indices."""
    tris = []
    for iy in range(ny - 1):
        for ix in range(nx - 1):
            v00 = iy * nx + ix
            v10 = v00 + 1
            v01 = v00 + nx
            v11 = v01 + 1
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    return np.asarray(tris, dtype=np.intp)


def render_topdown(state: ClothState, camera: TopDownCamera,
                   cloth_color: tuple = CLOTH_GREEN,
                   bg_color: tuple = BG_GRAY) -> RgbImage:
    """Rasterize the cloth orthographically with flat Lambertian shading.

    Triangles are painted back to front by mean z so upper layers of a fold
    occlude lower ones.
    """
    h, w = camera.image_h, camera.image_w
    px = np.empty((h, w, 3), dtype=np.uint8)
    px[:] = np.asarray(bg_color, dtype=np.uint8)

    tris = _triangles(state.nx, state.ny)
    p = state.positions
    v0, v1, v2 = p[tris[:, 0]], p[tris[:, 1]], p[tris[:, 2]]
    normals = np.cross(v1 - v0, v2 - v0)
    lens = np.linalg.norm(normals, axis=1)
    lens[lens == 0] = 1.0
    normals /= lens[:, np.newaxis]
    normals[normals[:, 2] < 0] *= -1.0
    light = np.asarray(camera.light_dir)
    lam = np.clip(normals @ light, 0.0, 1.0)
    shade = camera.ambient + (1.0 - camera.ambient) * lam
    colors = np.clip(np.round(shade[:, np.newaxis] * np.asarray(cloth_color, dtype=np.float64)),
                     0, 255).astype(np.uint8)

    ppm = camera.pixels_per_meter
    ox, oy = camera.origin
    pix = np.empty((p.shape[0], 2))
    pix[:, 0] = (p[:, 0] - ox) * ppm
    pix[:, 1] = (p[:, 1] - oy) * ppm

    order = np.argsort((v0[:, 2] + v1[:, 2] + v2[:, 2]) / 3.0, kind="stable")
    for t in order:
        i0, i1, i2 = tris[t]
        _fill_triangle(px, pix[i0], pix[i1], pix[i2], colors[t], w, h)
    return RgbImage(px)


def _fill_triangle(px, a, b, c, color, w, h):
    x_lo = max(int(math.floor(min(a[0], b[0], c[0]))), 0)
    x_hi = min(int(math.ceil(max(a[0], b[0], c[0]))), w - 1)
    y_lo = max(int(math.floor(min(a[1], b[1], c[1]))), 0)
    y_hi = min(int(math.ceil(max(a[1], b[1], c[1]))), h - 1)
    if x_lo > x_hi or y_lo > y_hi:
        return
    area = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    if abs(area) < 1e-12:
        return
    xs = np.arange(x_lo, x_hi + 1) + 0.5
    ys = np.arange(y_lo, y_hi + 1) + 0.5
    gx, gy = np.meshgrid(xs, ys)
    w0 = (b[0] - a[0]) * (gy - a[1]) - (b[1] - a[1]) * (gx - a[0])
    w1 = (c[0] - b[0]) * (gy - b[1]) - (c[1] - b[1]) * (gx - b[0])
    w2 = (a[0] - c[0]) * (gy - c[1]) - (a[1] - c[1]) * (gx - c[0])
    if area < 0:
        w0, w1, w2 = -w0, -w1, -w2
        area = -area
    eps = -1e-9 * area
    inside = (w0 >= eps) & (w1 >= eps) & (w2 >= eps)
    if inside.any():
        region = px[y_lo:y_hi + 1, x_lo:x_hi + 1]
        region[inside] = color
