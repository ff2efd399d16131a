"""Social force baseline: driving, pedestrian-repulsion, and wall forces.

Force law per pedestrian i with position p_i, velocity v_i, radius r,
desired speed v_d and desired direction e:

  driving       (v_d*e - v_i) / tau                          (acceleration)
  pedestrian j  {A*exp((r_ij - d_ij)/B) + k*g(r_ij - d_ij)} * n_ij
                + kappa*g(r_ij - d_ij) * ((v_j - v_i) . t_ij) * t_ij
  wall W        {A*exp((r - d_iW)/B) + k*g(r - d_iW)} * n_iW
                - kappa*g(r - d_iW) * (v_i . t_iW) * t_iW

with g(x) = max(x, 0), n pointing toward the subject, t the tangential
unit vector, d_iW the distance to the nearest point of the wall segment.
Force terms are divided by the mass; the driving term is an acceleration
already.

Desired directions aim at the nearest point of the current module's exit
segment shrunk inward by the pedestrian radius; integration is
semi-implicit Euler (v then p) at the caller's dt.  Entry seeding, module
transitions, exit removal, and the output format match the data-driven
simulator; desired speeds are drawn per pedestrian from a clamped normal
distribution.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import (
    Scene,
    active_exit,
    active_walls,
    first_wall_crossing,
    point_in_module,
    segment_crossing,
)
from .simulate import (
    SimulatedTrajectory,
    SimulationConfig,
    SimulationResult,
    _closest_on_segment,
    snap_to_module,
)

DESIRED_SPEED_CLAMP = (0.5, 2.5)


@dataclass(frozen=True)
class SFParams:
    tau: float = 0.5                 # s
    A: float = 2000.0                # N
    B: float = 0.08                  # m
    k: float = 1.2e5                 # kg/s^2
    kappa: float = 2.4e5             # kg/(m*s)
    mass: float = 80.0               # kg
    radius: float = 0.3              # m
    desired_speed_mean: float = 1.4  # m/s
    desired_speed_std: float = 0.2   # m/s

    def __post_init__(self):
        for name in ("tau", "A", "B", "k", "kappa", "mass", "radius",
                     "desired_speed_mean"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.desired_speed_std < 0:
            raise ValueError("desired_speed_std must be >= 0")


def draw_desired_speeds(ped_ids, rng: np.random.Generator,
                        params: SFParams) -> dict[str, float]:
    """One clamped-normal desired speed per pedestrian, in sorted id order."""
    lo, hi = DESIRED_SPEED_CLAMP
    out = {}
    for pid in sorted(ped_ids):
        out[pid] = float(np.clip(
            rng.normal(params.desired_speed_mean, params.desired_speed_std), lo, hi))
    return out


def _g(x: float) -> float:
    return x if x > 0.0 else 0.0


def sf_acceleration(position, velocity, desired_speed: float, direction,
                    others_pos, others_vel, walls, params: SFParams) -> np.ndarray:
    """Net acceleration: driving term plus repulsion force sums over mass."""
    p = np.asarray(position, dtype=float)
    v = np.asarray(velocity, dtype=float)
    e = np.asarray(direction, dtype=float)
    force = np.zeros(2)

    others_pos = np.asarray(others_pos, dtype=float).reshape(-1, 2)
    others_vel = np.asarray(others_vel, dtype=float).reshape(-1, 2)
    r_sum = 2.0 * params.radius
    for q, vq in zip(others_pos, others_vel):
        diff = p - q
        d = float(np.hypot(*diff))
        if d < 1e-12:
            warnings.warn("overlapping pedestrians: falling back to a fixed "
                          "repulsion direction", RuntimeWarning)
            n = np.array([1.0, 0.0])
            d = 0.0
        else:
            n = diff / d
        overlap = _g(r_sum - d)
        t = np.array([-n[1], n[0]])
        force += (params.A * np.exp((r_sum - d) / params.B) + params.k * overlap) * n
        force += params.kappa * overlap * float((vq - v) @ t) * t

    walls = np.asarray(walls, dtype=float).reshape(-1, 2, 2)
    for wall in walls:
        c, d = _closest_on_segment(p, wall[0], wall[1])
        if d < 1e-12:
            warnings.warn("pedestrian centered on a wall: falling back to a "
                          "fixed repulsion direction", RuntimeWarning)
            n = np.array([1.0, 0.0])
            d = 0.0
        else:
            n = (p - c) / d
        overlap = _g(params.radius - d)
        t = np.array([-n[1], n[0]])
        force += (params.A * np.exp((params.radius - d) / params.B)
                  + params.k * overlap) * n
        force += -params.kappa * overlap * float(v @ t) * t

    return (desired_speed * e - v) / params.tau + force / params.mass


def shrunk_exit(exit_segment, radius: float) -> np.ndarray:
    """Exit segment pulled in by the pedestrian radius at both endpoints."""
    seg = np.asarray(exit_segment, dtype=float)
    d = seg[1] - seg[0]
    length = float(np.hypot(*d))
    if length <= 2.0 * radius:
        mid = seg.mean(axis=0)
        return np.stack([mid, mid])
    u = d / length
    return np.stack([seg[0] + u * radius, seg[1] - u * radius])


def desired_direction(position, exit_segment, radius: float,
                      previous: Optional[np.ndarray] = None) -> np.ndarray:
    """Unit vector toward the nearest point of the shrunk exit segment.

    A position already at that nearest point keeps the previous direction
    (or +x when none is known).
    """
    p = np.asarray(position, dtype=float)
    seg = shrunk_exit(exit_segment, radius)
    target, dist = _closest_on_segment(p, seg[0], seg[1])
    if dist < 1e-9:
        if previous is None:
            return np.array([1.0, 0.0])
        return np.asarray(previous, dtype=float).copy()
    return (target - p) / dist


@dataclass
class _SFState:
    seed: object
    state: str = "pending"
    module_id: Optional[str] = None
    velocity: np.ndarray = None
    desired_speed: float = 0.0
    prev_dir: Optional[np.ndarray] = None
    positions: list = None
    velocities: list = None
    modules: list = None
    exited: bool = False
    truncated: bool = False


def sf_run(config: SimulationConfig, params: SFParams,
           rng: Optional[np.random.Generator] = None,
           desired_speeds: Optional[dict[str, float]] = None) -> SimulationResult:
    """Integrate the social force model under the shared run contract."""
    if desired_speeds is None:
        if rng is None:
            raise ValueError("pass an rng or explicit desired_speeds")
        desired_speeds = draw_desired_speeds(
            [s.ped_id for s in config.pedestrians], rng, params)
    peds = {}
    for seed in config.pedestrians:
        if seed.ped_id not in desired_speeds:
            raise ValueError(f"no desired speed for pedestrian {seed.ped_id!r}")
        peds[seed.ped_id] = _SFState(seed=seed)
    order = sorted(peds)
    scene = config.scene
    dt = config.dt
    w = config.params.window
    t = 0

    while True:
        active = [peds[pid] for pid in order if peds[pid].state == "active"]
        pending = [peds[pid] for pid in order if peds[pid].state == "pending"]
        if not active and not pending:
            break
        if t >= config.max_steps:
            for ped in active:
                ped.truncated = True
            break

        for ped in pending:
            if ped.seed.entry_step == t:
                ped.state = "active"
                start = ped.seed.positions[0].copy()
                ped.module_id = point_in_module(scene, start)
                ped.velocity = np.zeros(2)
                ped.desired_speed = desired_speeds[ped.seed.ped_id]
                ped.positions = [start]
                ped.velocities = [np.zeros(2)]
                ped.modules = [ped.module_id]
        active = [peds[pid] for pid in order if peds[pid].state == "active"]
        if not active:
            t += 1
            continue

        snap = {p.seed.ped_id: (p.positions[-1].copy(), p.velocity.copy())
                for p in active}
        proposals = {}
        for ped in active:
            pid = ped.seed.ped_id
            pos = ped.positions[-1]
            local = t - ped.seed.entry_step
            if local < w - 1:
                nxt = ped.seed.positions[local + 1].copy()
                proposals[pid] = (nxt, (nxt - pos) / dt, False)
                continue
            walls = active_walls(scene, ped.module_id)
            exit_seg = active_exit(scene, ped.module_id)
            e = desired_direction(pos, exit_seg, params.radius, ped.prev_dir)
            ped.prev_dir = e
            others_pos = [snap[q][0] for q in sorted(snap) if q != pid]
            others_vel = [snap[q][1] for q in sorted(snap) if q != pid]
            acc = sf_acceleration(pos, ped.velocity, ped.desired_speed, e,
                                  others_pos, others_vel, walls, params)
            v_new = ped.velocity + acc * dt
            nxt = pos + v_new * dt
            if first_wall_crossing(pos, nxt, walls) is not None:
                nxt, v_new = pos.copy(), np.zeros(2)
            proposals[pid] = (nxt, v_new, True)

        for ped in active:
            pid = ped.seed.ped_id
            pos = ped.positions[-1]
            nxt, v_new, dynamic = proposals[pid]
            if dynamic:
                exit_seg = np.asarray(active_exit(scene, ped.module_id))[None]
                if (segment_crossing(pos, nxt, exit_seg) is not None
                        and scene.successor[ped.module_id] is None):
                    ped.positions.append(nxt)
                    ped.velocities.append((nxt - pos) / dt)
                    ped.modules.append(ped.module_id)
                    ped.velocity = v_new
                    ped.state = "done"
                    ped.exited = True
                    continue
            found = point_in_module(scene, nxt)
            if found is None and dynamic:
                snapped = snap_to_module(scene, nxt)
                if snapped is not None:
                    nxt, found = snapped
                    v_new = (nxt - pos) / dt
                else:
                    nxt, v_new = pos.copy(), np.zeros(2)
                    found = ped.module_id
            if found is None:
                found = ped.module_id
            ped.positions.append(nxt)
            ped.velocities.append((nxt - pos) / dt)
            ped.modules.append(found)
            ped.velocity = v_new
            ped.module_id = found
        t += 1

    trajectories = []
    for pid in order:
        ped = peds[pid]
        if ped.positions is None:
            continue
        n = len(ped.positions)
        trajectories.append(SimulatedTrajectory(
            ped_id=pid, entry_step=ped.seed.entry_step, dt=dt,
            positions=np.asarray(ped.positions, dtype=float),
            module_ids=tuple(ped.modules),
            reset_flags=np.zeros(n, dtype=bool),
            exited=ped.exited, truncated=ped.truncated,
        ))
    truncated = any(tr.truncated for tr in trajectories) or any(
        p.state == "pending" for p in peds.values())
    return SimulationResult(scene=scene, dt=dt,
                            trajectories=tuple(trajectories), truncated=truncated)
