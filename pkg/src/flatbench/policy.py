"""Dewrinkling action policies: wrinkle-directed, random, and contour-corner."""

from __future__ import annotations

import math
from dataclasses import dataclass

import cv2
import numpy as np

from .gabor import WrinkleField
from .imaging import EmptyMask, Mask

DEFAULT_FLAT_EPSILON = 100.0
_UNIT_TOL = 1e-9


class NoWrinkle(RuntimeError):
    """Raised when every block magnitude is below the flatness threshold."""


@dataclass
class PolicyAction:
    """A single pick-and-drag command in image coordinates.

    op_point is where to grasp, direction a unit vector to drag along,
    method the name of the policy that produced it.
    """

    op_point: tuple
    direction: tuple
    method: str

    def __post_init__(self):
        # + 0.0 turns negative zeros positive so serialized output is tidy
        self.op_point = (float(self.op_point[0]) + 0.0, float(self.op_point[1]) + 0.0)
        self.direction = (float(self.direction[0]) + 0.0, float(self.direction[1]) + 0.0)
        norm = math.hypot(*self.direction)
        if abs(norm - 1.0) > _UNIT_TOL:
            raise ValueError(f"direction must be unit length, |d| = {norm}")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "op_point": [self.op_point[0], self.op_point[1]],
            "direction": [self.direction[0], self.direction[1]],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PolicyAction":
        return cls(op_point=tuple(d["op_point"]), direction=tuple(d["direction"]),
                   method=d["method"])


def stretching_direction(theta_star: float, op_point, com) -> tuple:
    """Unit vector perpendicular to the stripe direction, pointing away from com.

    The two perpendicular candidates are +/-(-sin theta_star, cos theta_star);
    the one with a nonnegative dot product against (op_point - com) wins.  On
    an exact tie the candidate with positive x (then positive y) is chosen.
    """
    dx = -math.sin(theta_star)
    dy = math.cos(theta_star)
    ox = op_point[0] - com[0]
    oy = op_point[1] - com[1]
    s = dx * ox + dy * oy
    if s > 0:
        return (dx, dy)
    if s < 0:
        return (-dx, -dy)
    for cand in ((dx, dy), (-dx, -dy)):
        if cand[0] > 0 or (cand[0] == 0 and cand[1] > 0):
            return cand
    return (dx, dy)  # unreachable for a unit vector


def candidate_blocks(field: WrinkleField, com) -> tuple:
    """Pick the peak wrinkle block and filter its 8-neighborhood.

    Returns (j_star, kept, rejected): j_star is the arg max magnitude block
    (lowest index on ties), kept the neighbor blocks with enough cloth whose
    center lies on the same side of com as the peak (strict positive dot
    product), rejected the cloth-eligible neighbors that failed the side test.
    """
    j_star = int(field.magnitudes.argmax())
    cx, cy = field.grid.center(j_star)
    vx, vy = cx - com[0], cy - com[1]
    kept, rejected = [], []
    for c in field.grid.neighbors8(j_star):
        if field.cloth_fraction[c] < field.min_cloth_fraction:
            continue
        ccx, ccy = field.grid.center(c)
        if (ccx - com[0]) * vx + (ccy - com[1]) * vy > 0:
            kept.append(c)
        else:
            rejected.append(c)
    return j_star, kept, rejected


def proposed_action(field: WrinkleField, com, seed: int,
                    flat_epsilon: float = DEFAULT_FLAT_EPSILON) -> PolicyAction:
    """Grasp beside the strongest wrinkle and pull perpendicular to it, outward.

    Raises NoWrinkle when no block magnitude exceeds flat_epsilon.  The grasp
    block is drawn uniformly from the filtered neighborhood of the peak; with
    no surviving neighbor the peak block itself is grasped.
    """
    if not (field.magnitudes > flat_epsilon).any():
        raise NoWrinkle(f"all block magnitudes <= {flat_epsilon}")
    j_star, kept, _ = candidate_blocks(field, com)
    if kept:
        rng = np.random.default_rng(seed)
        grasp = kept[int(rng.integers(len(kept)))]
    else:
        grasp = j_star
    op = field.grid.center(grasp)
    direction = stretching_direction(float(field.orientations[j_star]), op, com)
    return PolicyAction(op_point=op, direction=direction, method="proposed")


def random_action(mask: Mask, com, seed: int) -> PolicyAction:
    """Grasp a uniformly drawn cloth pixel and pull away from com."""
    ys, xs = np.nonzero(mask.bits)
    if xs.size == 0:
        raise EmptyMask("random grasp on an empty mask")
    rng = np.random.default_rng(seed)
    for _ in range(64):
        i = int(rng.integers(xs.size))
        op = (float(xs[i]), float(ys[i]))
        vx, vy = op[0] - com[0], op[1] - com[1]
        norm = math.hypot(vx, vy)
        if norm > 0:
            return PolicyAction(op_point=op, direction=(vx / norm, vy / norm),
                                method="random")
    # only reachable when every drawable pixel coincides with com
    return PolicyAction(op_point=op, direction=(1.0, 0.0), method="random")


def heuristic_action(mask: Mask, com, seed: int,
                     eps_frac: float = 0.02) -> PolicyAction:
    """Grasp a corner of the cloth outline and pull away from com.

    Corners come from a polygon fit of the largest outer contour with
    tolerance eps_frac of the mask diagonal.  With no usable contour the
    policy falls back to a random grasp under the same seed.
    """
    if mask.count() == 0:
        raise EmptyMask("corner grasp on an empty mask")
    contours, _ = cv2.findContours(mask.bits.astype(np.uint8),
                                   cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_NONE)
    if not contours:
        return random_action(mask, com, seed)
    areas = [cv2.contourArea(c) for c in contours]
    largest = contours[int(np.argmax(areas))]
    eps = eps_frac * math.hypot(mask.width, mask.height)
    poly = cv2.approxPolyDP(largest, eps, True).reshape(-1, 2)
    if poly.shape[0] == 0:
        return random_action(mask, com, seed)
    rng = np.random.default_rng(seed)
    order = rng.permutation(poly.shape[0])
    for i in order:
        op = (float(poly[i, 0]), float(poly[i, 1]))
        vx, vy = op[0] - com[0], op[1] - com[1]
        norm = math.hypot(vx, vy)
        if norm > 0:
            return PolicyAction(op_point=op, direction=(vx / norm, vy / norm),
                                method="heuristic")
    return random_action(mask, com, seed)
