"""Closed-loop crowd simulation driven by a next-step velocity model.

Each step is synchronous: features for every active pedestrian are extracted
against the frozen step-t snapshot, proposals p[t+1] = p[t] + v_hat*dt are
computed from that snapshot, and all commits happen together at step end, so
processing order cannot influence the outcome.

Pedestrians enter at their configured entry step and replay their seeded
window positions verbatim; prediction starts once the window is full.  A
predicted move that would cross an active wall triggers a history reset:
the most recent simulated steps (never the seeded prefix) are replaced by a
guided constant-speed path 0.05 m clear of the violated wall, aimed along
the wall toward the exit (or straight at the exit midpoint in bottleneck
modules), and the window features for those steps are re-extracted against
the recorded neighbor snapshots.  If the guided path itself would cross a
wall the pedestrian holds position instead.

Pedestrians crossing the exit segment of a terminal module are deactivated;
crossing an internal junction re-binds them to the module that contains the
new position, with a small snap for numerical overshoot at shared borders.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .features import ExtractionParams, extract_step
from .geometry import (
    Scene,
    active_exit,
    active_walls,
    first_wall_crossing,
    point_in_module,
    point_segment_distance,
    segment_crossing,
)

WALL_CLEARANCE = 0.05
MIN_GUIDED_SPEED = 0.1
JUNCTION_SNAP = 0.02


class ConstantVelocityOracle:
    """Model stub predicting one fixed velocity for every window."""

    def __init__(self, velocity):
        self.velocity = np.asarray(velocity, dtype=float).reshape(2)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.tile(self.velocity, (x.shape[0], 1))


class ZeroVelocityOracle(ConstantVelocityOracle):
    """Model stub that keeps every pedestrian exactly in place."""

    def __init__(self):
        super().__init__((0.0, 0.0))


@dataclass(frozen=True)
class PedestrianSeed:
    """Entry step plus the w seed positions replayed before prediction."""

    ped_id: str
    entry_step: int
    positions: np.ndarray       # (w, 2)

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise ValueError(f"seed positions must be (w, 2), got {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise ValueError(f"non-finite seed position for pedestrian {self.ped_id}")
        if self.entry_step < 0:
            raise ValueError("entry_step must be >= 0")
        object.__setattr__(self, "positions", pos)


@dataclass(frozen=True)
class SimulationConfig:
    scene: Scene
    dt: float
    pedestrians: tuple[PedestrianSeed, ...]
    params: ExtractionParams
    max_steps: int

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        seen = set()
        for seed in self.pedestrians:
            if seed.ped_id in seen:
                raise ValueError(f"duplicate pedestrian id {seed.ped_id!r}")
            seen.add(seed.ped_id)
            if seed.positions.shape[0] != self.params.window:
                raise ValueError(
                    f"pedestrian {seed.ped_id}: expected {self.params.window} seed "
                    f"positions, got {seed.positions.shape[0]}"
                )
            for p in seed.positions:
                if point_in_module(self.scene, p) is None:
                    raise ValueError(
                        f"pedestrian {seed.ped_id}: seed position {tuple(p)} "
                        "lies outside every module"
                    )


@dataclass(frozen=True)
class SimulatedTrajectory:
    ped_id: str
    entry_step: int
    dt: float
    positions: np.ndarray       # (n, 2)
    module_ids: tuple[str, ...]
    reset_flags: np.ndarray     # (n,) bool
    exited: bool
    truncated: bool

    @property
    def steps(self) -> np.ndarray:
        return np.arange(self.entry_step, self.entry_step + len(self.positions))


@dataclass(frozen=True)
class SimulationResult:
    scene: Scene
    dt: float
    trajectories: tuple[SimulatedTrajectory, ...]
    truncated: bool

    def to_rows(self, run_name: str) -> list[list]:
        """Rows (run, ped_id, step, time_s, x_m, y_m, module_id, reset_flag)."""
        rows = []
        for traj in sorted(self.trajectories, key=lambda t: t.ped_id):
            for i, step in enumerate(traj.steps):
                rows.append([
                    run_name, traj.ped_id, int(step), float(step * self.dt),
                    float(traj.positions[i, 0]), float(traj.positions[i, 1]),
                    traj.module_ids[i], int(traj.reset_flags[i]),
                ])
        return rows


@dataclass
class _PedRuntime:
    seed: PedestrianSeed
    state: str = "pending"                  # pending | active | done
    module_id: Optional[str] = None
    window: deque = field(default_factory=deque)
    positions: list = field(default_factory=list)
    velocities: list = field(default_factory=list)
    modules: list = field(default_factory=list)
    reset_flags: list = field(default_factory=list)
    exited: bool = False
    truncated: bool = False
    _proposal: Optional[np.ndarray] = None
    _predicted: bool = False
    _reset_now: bool = False

    @property
    def ped_id(self) -> str:
        return self.seed.ped_id

    @property
    def entry(self) -> int:
        return self.seed.entry_step


def _closest_on_segment(p: np.ndarray, a: np.ndarray, b: np.ndarray):
    ab = b - a
    denom = float(ab @ ab)
    tt = 0.0 if denom == 0.0 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    c = a + tt * ab
    return c, float(np.hypot(*(p - c)))


def snap_to_module(scene: Scene, p: np.ndarray, tolerance: float = JUNCTION_SNAP):
    """Snap a point just outside all modules onto the nearest boundary.

    Returns (snapped point, module id), or None when the point is farther
    than ``tolerance`` from every module.
    """
    best = None
    for mod in scene.modules:
        boundary = mod.boundary
        for i in range(len(boundary)):
            a = boundary[i]
            b = boundary[(i + 1) % len(boundary)]
            c, d = _closest_on_segment(p, a, b)
            if d <= tolerance and (best is None or d < best[0]):
                best = (d, c, mod.id)
    if best is None:
        return None
    return np.asarray(best[1], dtype=float), best[2]


class Simulator:
    """Synchronous stepping engine; construct once per run and call run()."""

    def __init__(self, config: SimulationConfig, predictor):
        self.config = config
        self.predictor = predictor
        self.step_index = 0
        self._peds = {s.ped_id: _PedRuntime(seed=s) for s in config.pedestrians}
        self._order = sorted(self._peds)
        self._snapshots: deque = deque(maxlen=config.params.window)

    # -- queries ----------------------------------------------------------

    def _active(self) -> list[_PedRuntime]:
        return [self._peds[pid] for pid in self._order if self._peds[pid].state == "active"]

    def _has_pending(self) -> bool:
        return any(p.state == "pending" for p in self._peds.values())

    # -- stepping ---------------------------------------------------------

    def step(self) -> None:
        cfg = self.config
        t = self.step_index
        w = cfg.params.window

        for pid in self._order:
            ped = self._peds[pid]
            if ped.state == "pending" and ped.entry == t:
                ped.state = "active"
                ped.module_id = point_in_module(cfg.scene, ped.seed.positions[0])
                ped.positions.append(ped.seed.positions[0].copy())
                ped.velocities.append(np.zeros(2))
                ped.modules.append(ped.module_id)
                ped.reset_flags.append(False)

        active = self._active()
        if not active:
            self.step_index += 1
            return

        snap = {p.ped_id: (p.positions[-1].copy(), p.velocities[-1].copy()) for p in active}
        self._snapshots.append((t, snap))

        for ped in active:
            pos, vel = snap[ped.ped_id]
            feats = extract_step(
                pos, vel,
                *self._neighbors(snap, ped.ped_id),
                active_walls(cfg.scene, ped.module_id),
                active_exit(cfg.scene, ped.module_id), cfg.params,
            )
            ped.window.append((pos, feats))
            while len(ped.window) > w:
                ped.window.popleft()
            ped._reset_now = False

        predicted: list[_PedRuntime] = []
        windows: list[np.ndarray] = []
        for ped in active:
            local = t - ped.entry
            if local < w - 1:
                ped._proposal = ped.seed.positions[local + 1].copy()
                ped._predicted = False
            else:
                ped._predicted = True
                predicted.append(ped)
                windows.append(np.stack([f for _, f in ped.window]))
        if predicted:
            v_hat = np.asarray(self.predictor.predict(np.stack(windows)), dtype=float)
            if v_hat.shape != (len(predicted), 2):
                raise ValueError(f"predictor returned shape {v_hat.shape}")
            for ped, v in zip(predicted, v_hat):
                ped._proposal = ped.positions[-1] + v * cfg.dt

        for ped in predicted:
            walls = active_walls(cfg.scene, ped.module_id)
            idx = first_wall_crossing(ped.positions[-1], ped._proposal, walls)
            if idx is not None:
                self._reset(ped, walls[idx], t)

        for ped in active:
            self._commit(ped, t)

        self.step_index += 1

    def run(self) -> SimulationResult:
        while True:
            active = self._active()
            if not active and not self._has_pending():
                break
            if self.step_index >= self.config.max_steps:
                for ped in active:
                    ped.truncated = True
                break
            self.step()
        trajectories = []
        for pid in self._order:
            ped = self._peds[pid]
            if not ped.positions:
                continue
            trajectories.append(SimulatedTrajectory(
                ped_id=pid, entry_step=ped.entry, dt=self.config.dt,
                positions=np.asarray(ped.positions, dtype=float),
                module_ids=tuple(ped.modules),
                reset_flags=np.asarray(ped.reset_flags, dtype=bool),
                exited=ped.exited, truncated=ped.truncated,
            ))
        truncated = any(t.truncated for t in trajectories) or self._has_pending()
        return SimulationResult(scene=self.config.scene, dt=self.config.dt,
                                trajectories=tuple(trajectories), truncated=truncated)

    # -- helpers ----------------------------------------------------------

    def _neighbors(self, snap: dict, subject_id: str):
        others_pos = []
        others_vel = []
        for pid in sorted(snap):
            if pid == subject_id:
                continue
            pos, vel = snap[pid]
            others_pos.append(pos)
            others_vel.append(vel)
        return (np.asarray(others_pos, dtype=float).reshape(-1, 2),
                np.asarray(others_vel, dtype=float).reshape(-1, 2))

    def _commit(self, ped: _PedRuntime, t: int) -> None:
        cfg = self.config
        pos = ped.positions[-1]
        nxt = np.asarray(ped._proposal, dtype=float)
        new_module = ped.module_id

        if ped._predicted:
            exit_seg = np.asarray(active_exit(cfg.scene, ped.module_id))[None]
            if (segment_crossing(pos, nxt, exit_seg) is not None
                    and cfg.scene.successor[ped.module_id] is None):
                self._append(ped, nxt, pos, ped.module_id)
                ped.state = "done"
                ped.exited = True
                return
            found = point_in_module(cfg.scene, nxt)
            if found is None:
                snapped = snap_to_module(cfg.scene, nxt)
                if snapped is not None:
                    nxt, found = snapped
                elif ped._reset_now:
                    nxt = pos.copy()
                    found = ped.module_id
                else:
                    walls = active_walls(cfg.scene, ped.module_id)
                    idx = first_wall_crossing(pos, nxt, walls)
                    if idx is None:
                        idx = self._nearest_wall(pos, walls)
                    self._reset(ped, walls[idx], t)
                    pos = ped.positions[-1]
                    nxt = np.asarray(ped._proposal, dtype=float)
                    found = point_in_module(cfg.scene, nxt)
            new_module = found if found is not None else ped.module_id
        else:
            found = point_in_module(cfg.scene, nxt)
            new_module = found if found is not None else ped.module_id

        self._append(ped, nxt, pos, new_module)
        ped.module_id = new_module

    def _append(self, ped: _PedRuntime, nxt: np.ndarray, pos: np.ndarray, module_id: str) -> None:
        ped.positions.append(nxt.copy())
        ped.velocities.append((nxt - pos) / self.config.dt)
        ped.modules.append(module_id)
        ped.reset_flags.append(ped._reset_now)

    def _nearest_wall(self, p: np.ndarray, walls: np.ndarray) -> int:
        dists = [point_segment_distance(p, wall) for wall in walls]
        return int(np.argmin(dists))

    def _clear_point(self, p: np.ndarray, wall: np.ndarray, toward: np.ndarray) -> np.ndarray:
        c, dist = _closest_on_segment(p, wall[0], wall[1])
        if dist >= WALL_CLEARANCE:
            return p.copy()
        if dist > 1e-12:
            n = (p - c) / dist
        else:
            d = wall[1] - wall[0]
            n = np.array([-d[1], d[0]]) / np.hypot(*d)
            if float(n @ (toward - c)) < 0.0:
                n = -n
        return c + n * WALL_CLEARANCE

    def _path_clear(self, prev: np.ndarray, points: list, walls: np.ndarray,
                    violated: np.ndarray) -> bool:
        chain = [prev] + points
        for a, b in zip(chain[:-1], chain[1:]):
            if np.hypot(*(b - a)) > 1e-12 and first_wall_crossing(a, b, walls) is not None:
                return False
        for p in points:
            if point_segment_distance(p, violated) < WALL_CLEARANCE - 1e-9:
                return False
            if point_in_module(self.config.scene, p) is None:
                return False
        return True

    def _reset(self, ped: _PedRuntime, wall: np.ndarray, t: int) -> None:
        """Replace recent simulated history with a guided wall-clear path."""
        cfg = self.config
        w = cfg.params.window
        dt = cfg.dt
        ped._reset_now = True
        pos_t = ped.positions[-1]
        module = cfg.scene.module(ped.module_id)
        exit_mid = np.asarray(active_exit(cfg.scene, ped.module_id)).mean(axis=0)

        if module.kind == "bottleneck":
            vec = exit_mid - pos_t
            nrm = float(np.hypot(*vec))
            if nrm < 1e-9:
                ped._proposal = pos_t.copy()
                return
            direction = vec / nrm
        else:
            d = wall[1] - wall[0]
            d = d / float(np.hypot(*d))
            direction = d if float(d @ (exit_mid - pos_t)) >= 0.0 else -d

        p_hat = self._clear_point(pos_t, wall, exit_mid)
        walls_all = active_walls(cfg.scene, ped.module_id)
        first_predicted = ped.entry + w
        r0 = max(t - w + 1, first_predicted)
        steps = list(range(r0, t + 1))

        if not steps:
            # first predicted step: the whole window is the seeded prefix,
            # which is never rewritten; just sidestep clear of the wall
            if (np.hypot(*(p_hat - pos_t)) < 1e-12
                    or first_wall_crossing(pos_t, p_hat, walls_all) is None):
                ped._proposal = p_hat
            else:
                ped._proposal = pos_t.copy()
            return

        m = len(steps)
        speeds = [float(np.hypot(*ped.velocities[s - ped.entry])) for s in steps]
        speed = max(float(np.mean(speeds)), MIN_GUIDED_SPEED)
        prev = ped.positions[r0 - 1 - ped.entry]

        guided = [p_hat - direction * speed * dt * (m - 1 - j) for j in range(m)]
        if self._path_clear(prev, guided, walls_all, wall):
            step_vel = direction * speed
        else:
            guided = [p_hat.copy() for _ in range(m)]
            if self._path_clear(prev, guided, walls_all, wall):
                speed = 0.0
                step_vel = np.zeros(2)
            else:
                ped._proposal = pos_t.copy()
                return

        for j, s in enumerate(steps):
            i = s - ped.entry
            ped.positions[i] = guided[j].copy()
            ped.velocities[i] = ((guided[0] - prev) / dt if j == 0 else step_vel.copy())
            ped.reset_flags[i] = True
        self._rewrite_window(ped, steps, t)

        nxt = p_hat + direction * speed * dt
        if speed > 0.0 and first_wall_crossing(p_hat, nxt, walls_all) is not None:
            nxt = p_hat.copy()
        ped._proposal = nxt

    def _rewrite_window(self, ped: _PedRuntime, steps: list, t: int) -> None:
        """Re-extract the rewritten steps' features against recorded snapshots."""
        cfg = self.config
        by_step = dict(self._snapshots)
        ring = list(ped.window)
        first_ring_step = t - len(ring) + 1
        walls = active_walls(cfg.scene, ped.module_id)
        exit_seg = active_exit(cfg.scene, ped.module_id)
        for s in steps:
            k = s - first_ring_step
            if k < 0 or s not in by_step:
                continue
            snap = by_step[s]
            pos = ped.positions[s - ped.entry]
            vel = ped.velocities[s - ped.entry]
            feats = extract_step(pos, vel, *self._neighbors(snap, ped.ped_id),
                                 walls, exit_seg, cfg.params)
            ring[k] = (pos, feats)
        ped.window = deque(ring)


def run_simulation(config: SimulationConfig, predictor) -> SimulationResult:
    """Step until every pedestrian has exited or max_steps is reached."""
    return Simulator(config, predictor).run()


def seeds_from_run(trajectories, window: int, origin: Optional[int] = None) -> list[PedestrianSeed]:
    """Seed configs from experimental tracks: entry time plus first w positions.

    Steps are shifted so the earliest track starts at ``origin`` (default:
    step 0).  Tracks shorter than the window are skipped.
    """
    usable = [t for t in trajectories if len(t) >= window]
    if not usable:
        return []
    base = min(t.t0 for t in usable) if origin is None else origin
    return [PedestrianSeed(ped_id=t.ped_id, entry_step=t.t0 - base,
                           positions=t.positions[:window].copy())
            for t in usable]
