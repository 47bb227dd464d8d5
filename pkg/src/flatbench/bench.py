"""Closed-loop flattening episodes, metrics, difficulty clustering, and summaries."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import gabor, imaging, policy, sim
from .config import EngineConfig

METHODS = ("proposed", "random", "heuristic")


def seed_for_step(episode_seed: int, step: int) -> int:
    """Decorrelated per-step seed; shared by the benchmark loop and suggestions."""
    ss = np.random.SeedSequence((int(episode_seed), int(step)))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class RunConfig:
    """One benchmark run: which policy, how many episodes, crumple settings."""

    method: str = "proposed"
    n_episodes: int = 20
    seed_base: int = 1000
    max_steps: int = 30
    stop_threshold: float = 0.99
    crumple_folds: int = 2
    crumple_intensity: float = 0.75
    engine: EngineConfig = field(default_factory=EngineConfig)
    workers: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if not 0.0 < self.stop_threshold <= 1.0:
            raise ValueError("stop_threshold must be in (0, 1]")
        if self.max_steps < 1 or self.n_episodes < 1 or self.workers < 1:
            raise ValueError("max_steps, n_episodes, and workers must be >= 1")
        if self.crumple_intensity < 0 or self.crumple_folds < 0:
            raise ValueError("crumple settings must be nonnegative")

    @property
    def seeds(self) -> list:
        return [self.seed_base + i for i in range(self.n_episodes)]


@dataclass
class EpisodeRecord:
    """Everything one episode produced, serializable deterministically."""

    method: str
    seed: int
    full_coverage: float
    initial_coverage: float
    steps: list
    steps_used: int
    terminated: str  # success | step-cap | aborted
    difficulty: str = "unassigned"
    valid: bool = True
    error: str | None = None

    @property
    def success(self) -> bool:
        return self.terminated == "success"

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "seed": self.seed,
            "full_coverage": self.full_coverage,
            "initial_coverage": self.initial_coverage,
            "steps": self.steps,
            "steps_used": self.steps_used,
            "terminated": self.terminated,
            "difficulty": self.difficulty,
            "valid": self.valid,
            "error": self.error,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "EpisodeRecord":
        return cls(method=d["method"], seed=int(d["seed"]),
                   full_coverage=float(d["full_coverage"]),
                   initial_coverage=float(d["initial_coverage"]),
                   steps=list(d["steps"]), steps_used=int(d["steps_used"]),
                   terminated=d["terminated"],
                   difficulty=d.get("difficulty", "unassigned"),
                   valid=bool(d.get("valid", True)), error=d.get("error"))


def save_record(path, rec: EpisodeRecord) -> None:
    with open(path, "w") as f:
        f.write(rec.to_json())


def load_record(path) -> EpisodeRecord:
    with open(path) as f:
        return EpisodeRecord.from_dict(json.load(f))


class Episode:
    """One flattening session: crumpled cloth, observations, and drag steps.

    Drives init_flat -> crumple -> (observe, act) loop and accumulates the
    record.  Both the benchmark runner and the HTTP service wrap this class,
    so machine and human episodes share one loop implementation.
    """

    def __init__(self, engine: EngineConfig, seed: int, method: str = "proposed",
                 max_steps: int = 30, stop_threshold: float = 0.99,
                 crumple_folds: int = 2, crumple_intensity: float = 0.75):
        self.engine = engine
        self.seed = int(seed)
        self.method = method
        self.max_steps = max_steps
        self.stop_threshold = stop_threshold
        self.crumple_folds = crumple_folds
        self.crumple_intensity = crumple_intensity
        self.bank = engine.bank.build()
        self.grid = imaging.split_blocks(engine.camera.image_w, engine.camera.image_h,
                                         engine.grid_rows, engine.grid_cols)
        self.step = 0
        self.status = "created"
        self.history: list = []
        self.error: str | None = None
        self._field: gabor.WrinkleField | None = None

    def start(self) -> None:
        eng = self.engine
        flat = sim.settle(sim.init_flat(eng.cloth_nx, eng.cloth_ny, eng.rest_len),
                          eng.sim)
        self.flat_state = flat
        flat_img = sim.render_topdown(flat, eng.camera, eng.cloth_color, eng.bg_color)
        self.full_coverage = imaging.coverage(imaging.segment_cloth(flat_img, eng.hsv))
        self.state = sim.crumple(flat, self.seed, self.crumple_folds,
                                 self.crumple_intensity, eng.sim)
        self.status = "running"
        self._refresh_observation()
        self.initial_coverage = self.coverage
        if self.relative_coverage > self.stop_threshold:
            self.status = "done"
            self.terminated = "success"

    def _refresh_observation(self) -> None:
        eng = self.engine
        self.observation = sim.render_topdown(self.state, eng.camera,
                                              eng.cloth_color, eng.bg_color)
        self.mask = imaging.segment_cloth(self.observation, eng.hsv)
        self.coverage = imaging.coverage(self.mask)
        self.relative_coverage = self.coverage / self.full_coverage
        self._field = None
        try:
            self.com = imaging.center_of_mass(self.mask)
        except imaging.EmptyMask:
            self.com = None
            self.status = "failed"
            self.error = "cloth left the camera frame"

    def wrinkles(self) -> gabor.WrinkleField:
        if self._field is None:
            self._field = gabor.wrinkle_field(self.observation, self.mask, self.grid,
                                              self.bank, self.engine.min_cloth_fraction)
        return self._field

    def suggest(self, method: str, seed: int | None = None) -> policy.PolicyAction:
        """The named policy's action for the current observation; not executed.

        Raises NoWrinkle for the proposed policy on a flat-looking cloth.
        """
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}")
        if seed is None:
            seed = seed_for_step(self.seed, self.step)
        if method == "proposed":
            return policy.proposed_action(self.wrinkles(), self.com, seed,
                                          flat_epsilon=self.engine.flat_epsilon)
        if method == "random":
            return policy.random_action(self.mask, self.com, seed)
        return policy.heuristic_action(self.mask, self.com, seed,
                                       eps_frac=self.engine.corner_eps_frac)

    def auto_action(self) -> policy.PolicyAction:
        """Action for this episode's own method, falling back to a random
        grasp when the proposed policy sees no wrinkle but R is still low."""
        try:
            return self.suggest(self.method)
        except policy.NoWrinkle:
            return policy.random_action(self.mask, self.com,
                                        seed_for_step(self.seed, self.step))

    def act(self, action: policy.PolicyAction) -> dict:
        """Execute a drag, advance the step counter, and append to history."""
        if self.status != "running":
            raise RuntimeError(f"episode is {self.status}, not running")
        cam = self.engine.camera
        wx, wy = cam.pixel_to_world(action.op_point[0], action.op_point[1])
        no_contact = False
        try:
            self.state = sim.apply_drag(self.state, (wx, wy), action.direction,
                                        self.engine.sim)
        except sim.NoContact:
            no_contact = True
        self.step += 1
        if not no_contact:
            self._refresh_observation()
        entry = {
            "step": self.step,
            "action": action.to_dict(),
            "relative_coverage": self.relative_coverage,
            "no_contact": no_contact,
        }
        self.history.append(entry)
        if self.status == "running":
            if self.relative_coverage > self.stop_threshold:
                self.status = "done"
                self.terminated = "success"
            elif self.step >= self.max_steps:
                self.status = "done"
                self.terminated = "step-cap"
        return entry

    def record(self) -> EpisodeRecord:
        """Snapshot of this episode; only a finished episode yields a valid record."""
        if self.status == "done":
            terminated, valid, error = self.terminated, True, self.error
        else:
            terminated, valid = "aborted", False
            error = self.error or "episode not finished"
        return EpisodeRecord(
            method=self.method, seed=self.seed,
            full_coverage=self.full_coverage,
            initial_coverage=self.initial_coverage,
            steps=list(self.history), steps_used=self.step,
            terminated=terminated, valid=valid, error=error)


def run_episode(cfg: RunConfig, seed: int) -> EpisodeRecord:
    """Run one closed-loop episode under cfg.method; Unstable yields an invalid record."""
    ep = Episode(engine=cfg.engine, seed=seed, method=cfg.method,
                 max_steps=cfg.max_steps, stop_threshold=cfg.stop_threshold,
                 crumple_folds=cfg.crumple_folds,
                 crumple_intensity=cfg.crumple_intensity)
    try:
        ep.start()
        while ep.status == "running":
            ep.act(ep.auto_action())
    except sim.Unstable as e:
        rec = ep.record()
        rec.valid = False
        rec.terminated = "aborted"
        rec.error = str(e)
        return rec
    return ep.record()


def _run_episode_task(args) -> EpisodeRecord:
    cfg, seed = args
    return run_episode(cfg, seed)


def run_suite(cfg: RunConfig) -> list:
    """All episodes of a run, in seed order; parallel when cfg.workers > 1."""
    tasks = [(cfg, s) for s in cfg.seeds]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            return list(ex.map(_run_episode_task, tasks))
    return [run_episode(cfg, s) for s in cfg.seeds]


def kmeans2(values) -> list:
    """Two-cluster split of 1-D values minimizing within-cluster sum of squares.

    In one dimension the optimal two-clustering is a contiguous split of the
    sorted values, so the exact optimum is found by scanning all n-1 splits.
    The higher-valued cluster is labeled "easy"; all-equal input degenerates
    to all "easy".
    """
    vals = np.asarray(list(values), dtype=np.float64)
    n = vals.size
    if n == 0:
        return []
    if np.all(vals == vals[0]):
        return ["easy"] * n
    order = np.argsort(vals, kind="stable")
    x = vals[order]
    csum = np.cumsum(x)
    csq = np.cumsum(x * x)
    total_s, total_q = csum[-1], csq[-1]
    best_b, best_cost = 1, math.inf
    for b in range(1, n):
        s1, q1 = csum[b - 1], csq[b - 1]
        s2, q2 = total_s - s1, total_q - q1
        cost = (q1 - s1 * s1 / b) + (q2 - s2 * s2 / (n - b))
        if cost < best_cost:
            best_cost = cost
            best_b = b
    labels = [""] * n
    for rank, idx in enumerate(order):
        labels[idx] = "hard" if rank < best_b else "easy"
    return labels


@dataclass
class SummaryTable:
    """Per-method difficulty counts, mean steps, and steps_used histograms."""

    rows: list
    histograms: dict
    n_records: int
    n_invalid: int

    def row_for(self, method: str) -> dict | None:
        for row in self.rows:
            if row["method"] == method:
                return row
        return None


def summarize(records) -> SummaryTable:
    """Pool initial coverages across methods, cluster difficulty, aggregate.

    Difficulty labels are written back onto the (valid) records.  Invalid
    records are excluded from every statistic and only counted.
    """
    records = list(records)
    valid = [r for r in records if r.valid]
    n_invalid = len(records) - len(valid)
    if not valid:
        raise ValueError("summarize needs at least one valid record")
    valid.sort(key=lambda r: (r.method, r.seed))
    labels = kmeans2([r.initial_coverage for r in valid])
    for r, lab in zip(valid, labels):
        r.difficulty = lab

    rows = []
    for method in sorted({r.method for r in valid}):
        group = [r for r in valid if r.method == method]
        easy = [r for r in group if r.difficulty == "easy"]
        hard = [r for r in group if r.difficulty == "hard"]
        def mean_steps(rs):
            return sum(r.steps_used for r in rs) / len(rs) if rs else None
        rows.append({
            "method": method,
            "n_easy": len(easy),
            "n_hard": len(hard),
            "mean_steps_easy": mean_steps(easy),
            "mean_steps_hard": mean_steps(hard),
            "mean_steps": mean_steps(group),
            "n_capped": sum(1 for r in group if r.terminated == "step-cap"),
            "success_rate": sum(1 for r in group if r.success) / len(group),
        })

    histograms = {}
    for method in sorted({r.method for r in valid}):
        counts: dict = {}
        for r in valid:
            if r.method == method:
                counts[r.steps_used] = counts.get(r.steps_used, 0) + 1
        histograms[method] = dict(sorted(counts.items()))
    return SummaryTable(rows=rows, histograms=histograms,
                        n_records=len(records), n_invalid=n_invalid)


def write_summary_csv(table: SummaryTable, path) -> None:
    cols = ["method", "n_easy", "n_hard", "mean_steps_easy", "mean_steps_hard",
            "mean_steps", "n_capped", "success_rate"]
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=cols)
        w.writeheader()
        for row in table.rows:
            w.writerow({k: ("" if row[k] is None else row[k]) for k in cols})


def write_histogram_csv(table: SummaryTable, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["method", "steps_used", "count"])
        for method, counts in table.histograms.items():
            for steps_used, count in counts.items():
                w.writerow([method, steps_used, count])


def load_records_dir(dirpath) -> list:
    recs = []
    for name in sorted(os.listdir(dirpath)):
        if name.startswith("episode_") and name.endswith(".json"):
            recs.append(load_record(os.path.join(dirpath, name)))
    return recs


def oracle_flatten(cfg: RunConfig, seed: int, debug: bool = False) -> dict:
    """Scripted unfolding that exploits the crumple's own fold plan.

    Folds are undone newest first.  Each drag grasps the deepest member
    particle still across its crease (the flap tip) and carries it back over
    the line by twice its depth, flipping the flap like a page; the drag
    length adapts per step while the direction stays perpendicular to the
    fold line.  Left-over ridges and curled corners then get short outward
    pulls.  Used to establish the crumples are solvable within the step
    budget before policies are judged.
    """
    eng = cfg.engine
    flat = sim.settle(sim.init_flat(eng.cloth_nx, eng.cloth_ny, eng.rest_len),
                      eng.sim)
    flat_img = sim.render_topdown(flat, eng.camera, eng.cloth_color, eng.bg_color)
    full = imaging.coverage(imaging.segment_cloth(flat_img, eng.hsv))
    folds = sim.fold_plan(flat, seed, cfg.crumple_folds, cfg.crumple_intensity)
    state = sim.crumple(flat, seed, cfg.crumple_folds, cfg.crumple_intensity,
                        eng.sim)

    margin = 2.0 * eng.rest_len
    min_remnant = 8
    nx, ny = eng.cloth_nx, eng.cloth_ny
    corners = (0, nx - 1, (ny - 1) * nx, nx * ny - 1)

    def rel_cov(st):
        img = sim.render_topdown(st, eng.camera, eng.cloth_color, eng.bg_color)
        return imaging.coverage(imaging.segment_cloth(img, eng.hsv)) / full

    # each fold's line lives in the replayed geometry before that fold, so
    # keep those configurations to reason about undoing newest first
    prefold = []
    replay = flat.positions.copy()
    for fold in folds:
        prefold.append(replay.copy())
        sim._rotate_about_line(replay, fold.members, fold.point, fold.psi,
                               fold.sigma * fold.beta)

    r_trace = [rel_cov(state)]
    steps = 0
    fold_dead = {}
    splay_k = 0

    def drag(contact, direction, dist):
        # keep the pin speed of the stock drag while varying the length
        nonlocal state, steps
        p = dataclasses.replace(
            eng.sim, drag_distance=dist,
            drag_steps=max(1, int(round(eng.sim.drag_steps * dist
                                        / eng.sim.drag_distance))))
        state = sim.apply_drag(state, contact, direction, p)
        steps += 1
        r_trace.append(rel_cov(state))

    def flip_for(fi, xy):
        """Tip grasp and travel that returns fold fi's deepest remnant home.

        Depths are measured against the fold line's current position,
        estimated from keep-side particles near the crease, so earlier drags
        that towed the whole cloth do not skew the distances.
        """
        fold = folds[fi]
        normal = np.asarray(fold.normal)
        point = np.asarray(fold.point)
        s_pre = (prefold[fi][:, :2] - point) @ normal
        s_cur = (xy - point) @ normal
        anchor = ~fold.members & (np.abs(s_pre) < 6.0 * eng.rest_len)
        if int(anchor.sum()) < 4:
            anchor = ~fold.members
        shift = float(s_cur[anchor].mean() - s_pre[anchor].mean())
        a = fold.sigma * (s_cur - shift)
        across = fold.members & (a < -margin)
        if int(across.sum()) < min_remnant:
            return None
        idx = np.nonzero(across)[0]
        tip = int(idx[np.argmin(a[idx])])
        b = fold.sigma * s_pre[tip]
        travel = float(b - a[tip]) + 0.03
        return tip, (fold.sigma * normal[0], fold.sigma * normal[1]), travel

    while r_trace[-1] <= cfg.stop_threshold and steps < cfg.max_steps:
        xy = state.positions[:, :2]
        z = state.positions[:, 2]
        contact = direction = None
        dist = eng.sim.drag_distance
        tag = "splay"
        acted_fold = None
        center = (xy.min(axis=0) + xy.max(axis=0)) / 2.0
        if math.hypot(center[0], center[1]) > 0.15:
            # towed off center: pull the leading edge back before the view
            # loses the cloth, along whichever fold normal points closest home
            u_best, score = None, -2.0
            for fold in folds:
                for sgn in (1.0, -1.0):
                    u = (sgn * fold.normal[0], sgn * fold.normal[1])
                    d = -(center[0] * u[0] + center[1] * u[1])
                    if d > score:
                        u_best, score = u, d
            ext = int(np.argmax(xy[:, 0] * u_best[0] + xy[:, 1] * u_best[1]))
            contact = xy[ext]
            direction = u_best
            dist = min(2.0 * math.hypot(center[0], center[1]), 0.25)
            tag = "recenter"
        if contact is None:
            for fi in range(len(folds) - 1, -1, -1):
                if fold_dead.get(fi, 0) >= 4:
                    continue
                hit = flip_for(fi, xy)
                if hit is None:
                    continue
                tip, direction, travel = hit
                contact = xy[tip]
                dist = min(travel, 0.5)
                tag = "flip t=%.3f" % travel
                acted_fold = fi
                break
        if contact is None and z.max() > 0.4 * eng.rest_len:
            top = int(np.argmax(z))
            v = xy[top] - xy.mean(axis=0)
            norm = math.hypot(v[0], v[1])
            if norm > 0:
                contact = xy[top]
                direction = (v[0] / norm, v[1] / norm)
                tag = "ridge"
        if contact is None:
            contact, direction = splay_action(xy, corners, splay_k)
            splay_k += 1
            dist = 0.06
        before = r_trace[-1]
        drag(contact, direction, dist)
        if acted_fold is not None:
            # a flip that no longer gains retires its fold so the endgame runs
            if r_trace[-1] > before + 0.002:
                fold_dead[acted_fold] = 0
            else:
                fold_dead[acted_fold] = fold_dead.get(acted_fold, 0) + 1
        if debug:
            print("  step %d %-14s at (%.3f,%.3f) dir (%.2f,%.2f) -> R %.4f"
                  % (steps - 1, tag, contact[0], contact[1],
                     direction[0], direction[1], r_trace[-1]))
    return {"seed": seed, "steps_used": steps,
            "success": r_trace[-1] > cfg.stop_threshold,
            "final_r": r_trace[-1], "r_trace": r_trace[1:]}


def splay_action(xy, corners, k):
    """Outward pull on the k-th cloth corner, away from the cloth mean."""
    p = xy[corners[k % 4]]
    v = p - xy.mean(axis=0)
    norm = math.hypot(v[0], v[1])
    if norm == 0:
        return p, (1.0, 0.0)
    return p, (v[0] / norm, v[1] / norm)
