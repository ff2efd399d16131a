"""Trajectory file parsing, focus clipping, and training-sample assembly.

Input files are plain text with one row per (pedestrian, frame):
``ped_id frame x y`` separated by whitespace or commas; extra columns are
ignored, blank lines and lines starting with ``#`` are skipped.  Coordinates
are multiplied by ``unit_scale`` (default 0.01: centimetres to metres) and
frames are spaced ``1/fps`` seconds apart.

Velocities are backward differences, ``v[t] = (p[t] - p[t-1]) / dt``, stored
at index t with index 0 left NaN.  This makes the simulator update
``p[t+1] = p[t] + v[t+1]*dt`` the exact inverse of the differencing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .features import ExtractionParams, extract_step, stack_window
from .geometry import Scene, active_exit, active_walls, point_in_module, rect_contains

MAX_GAP_FRAMES = 5

DATASET_ROLES = ("train_val", "test")


@dataclass(frozen=True)
class Trajectory:
    """One pedestrian's contiguous track: positions in metres, dt in seconds."""

    ped_id: str
    t0: int
    dt: float
    positions: np.ndarray       # (n, 2) float64
    velocities: np.ndarray      # (n, 2) float64, row 0 is NaN

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        vel = np.asarray(self.velocities, dtype=float)
        if pos.ndim != 2 or pos.shape[0] < 2 or pos.shape[1] != 2:
            raise ValueError(f"positions must be (n>=2, 2), got {pos.shape}")
        if vel.shape != pos.shape:
            raise ValueError("velocities must match positions in shape")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "velocities", vel)

    def __len__(self) -> int:
        return self.positions.shape[0]

    def velocity_at(self, step: int) -> np.ndarray:
        """Velocity at a local step; the undefined first step reads as zero."""
        if step == 0:
            return np.zeros(2)
        return self.velocities[step]


@dataclass(frozen=True)
class Run:
    """A named experiment run: trajectories sharing one absolute frame clock."""

    name: str
    trajectories: tuple[Trajectory, ...]


@dataclass(frozen=True)
class Dataset:
    """Runs recorded in one scene at one frame interval."""

    scene: Scene
    runs: tuple[Run, ...]
    role: str
    dt: float

    def __post_init__(self):
        if self.role not in DATASET_ROLES:
            raise ValueError(f"role must be one of {DATASET_ROLES}, got {self.role!r}")
        for run in self.runs:
            for traj in run.trajectories:
                if abs(traj.dt - self.dt) > 1e-12:
                    raise ValueError(
                        f"trajectory dt {traj.dt} in run {run.name!r} differs from dataset dt {self.dt}"
                    )


@dataclass(frozen=True)
class Sample:
    """One training sample: a feature window and the next-step velocity."""

    X: np.ndarray               # (w, feature_dim)
    target: np.ndarray          # (2,)
    meta: tuple[str, str, int]  # (run name, ped_id, local step t)


def _derive_velocities(positions: np.ndarray, dt: float) -> np.ndarray:
    vel = np.full_like(positions, np.nan)
    vel[1:] = np.diff(positions, axis=0) / dt
    return vel


def parse_trajectories(path, unit_scale: float = 0.01, fps: float = 25.0,
                       max_gap: int = MAX_GAP_FRAMES) -> list[Trajectory]:
    """Parse a trajectory file into per-pedestrian tracks.

    Frame gaps of up to ``max_gap`` missing frames are filled by linear
    interpolation; a pedestrian with any larger gap is dropped, as is one
    with fewer than two rows.  Malformed rows and non-increasing frame
    numbers raise ValueError naming the 1-based line number.
    """
    if not fps > 0:
        raise ValueError("fps must be positive")
    if not unit_scale > 0:
        raise ValueError("unit_scale must be positive")
    dt = 1.0 / fps
    frames: dict[str, list[int]] = {}
    points: dict[str, list[tuple[float, float]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.replace(",", " ").split()
            if len(tokens) < 4:
                raise ValueError(f"line {lineno}: expected ped_id, frame, x, y")
            ped = tokens[0]
            try:
                frame = int(tokens[1])
                x = float(tokens[2])
                y = float(tokens[3])
            except ValueError:
                raise ValueError(f"line {lineno}: malformed row {line!r}") from None
            if not (np.isfinite(x) and np.isfinite(y)):
                raise ValueError(f"line {lineno}: non-finite coordinate")
            if ped in frames and frame <= frames[ped][-1]:
                raise ValueError(
                    f"line {lineno}: non-monotonic frame {frame} for pedestrian {ped}"
                )
            frames.setdefault(ped, []).append(frame)
            points.setdefault(ped, []).append((x, y))

    out: list[Trajectory] = []
    for ped, fs in frames.items():
        if len(fs) < 2:
            continue
        fs_arr = np.asarray(fs, dtype=int)
        gaps = np.diff(fs_arr) - 1
        if int(gaps.max(initial=0)) > max_gap:
            continue
        raw_pos = np.asarray(points[ped], dtype=float) * unit_scale
        full = np.arange(fs_arr[0], fs_arr[-1] + 1)
        pos = np.column_stack([
            np.interp(full, fs_arr, raw_pos[:, 0]),
            np.interp(full, fs_arr, raw_pos[:, 1]),
        ])
        out.append(Trajectory(ped_id=ped, t0=int(fs_arr[0]), dt=dt,
                              positions=pos, velocities=_derive_velocities(pos, dt)))
    return out


def _longest_true_run(mask: np.ndarray) -> Optional[tuple[int, int]]:
    """(start, stop) of the longest contiguous True run, earliest on ties."""
    best = None
    best_len = 0
    start = None
    for i, flag in enumerate(list(mask) + [False]):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            if i - start > best_len:
                best, best_len = (start, i), i - start
            start = None
    return best


def clip_to_focus(trajs, area, window: int = 8) -> list[Trajectory]:
    """Truncate each track to its longest contiguous sub-series inside ``area``.

    Velocities are recomputed on the clipped series; tracks left shorter
    than ``window + 1`` positions are dropped.
    """
    out: list[Trajectory] = []
    for traj in trajs:
        inside = np.array([rect_contains(area, p) for p in traj.positions])
        run = _longest_true_run(inside)
        if run is None:
            continue
        start, stop = run
        if stop - start < window + 1:
            continue
        pos = traj.positions[start:stop].copy()
        out.append(Trajectory(ped_id=traj.ped_id, t0=traj.t0 + start, dt=traj.dt,
                              positions=pos,
                              velocities=_derive_velocities(pos, traj.dt)))
    return out


def _step_features(subject: Trajectory, step: int, others, scene: Scene,
                   params: ExtractionParams) -> np.ndarray:
    """Feature vector for one pedestrian step against its run's occupancy."""
    position = subject.positions[step]
    frame = subject.t0 + step
    others_pos = []
    others_vel = []
    for other in others:
        local = frame - other.t0
        if 0 <= local < len(other):
            others_pos.append(other.positions[local])
            others_vel.append(other.velocity_at(local))
    module_id = point_in_module(scene, position)
    if module_id is None:
        raise ValueError(
            f"pedestrian {subject.ped_id} at {tuple(position)} lies outside every module"
        )
    return extract_step(position, subject.velocities[step],
                        np.asarray(others_pos, dtype=float).reshape(-1, 2),
                        np.asarray(others_vel, dtype=float).reshape(-1, 2),
                        active_walls(scene, module_id),
                        active_exit(scene, module_id), params)


def build_samples(dataset: Dataset, params: ExtractionParams) -> list[Sample]:
    """Emit one Sample per (pedestrian, t) with a full window and a target.

    Valid t ranges over [w, n-2]: every window row needs a defined velocity
    (local step >= 1) and the target is v[t+1].  A track with n positions
    yields max(0, n - 1 - w) samples.
    """
    w = params.window
    samples: list[Sample] = []
    for run in dataset.runs:
        for subject in run.trajectories:
            others = [t for t in run.trajectories if t is not subject]
            n = len(subject)
            feature_cache: dict[int, np.ndarray] = {}
            for t in range(w, n - 1):
                rows = []
                for s in range(t - w + 1, t + 1):
                    if s not in feature_cache:
                        feature_cache[s] = _step_features(subject, s, others, dataset.scene, params)
                    rows.append(feature_cache[s])
                target = subject.velocities[t + 1]
                if not np.all(np.isfinite(target)):
                    raise ValueError(
                        f"non-finite target velocity for pedestrian {subject.ped_id} at step {t + 1}"
                    )
                samples.append(Sample(X=stack_window(rows), target=target.copy(),
                                      meta=(run.name, subject.ped_id, t)))
    return samples


def split_train_val(samples, ratio: int = 4, seed: int = 0):
    """Disjoint exhaustive random split with train:val = ratio:1."""
    if ratio < 1:
        raise ValueError("ratio must be >= 1")
    n = len(samples)
    perm = np.random.default_rng(seed).permutation(n)
    n_val = n // (ratio + 1)
    val_idx = np.sort(perm[:n_val])
    train_idx = np.sort(perm[n_val:])
    return [samples[i] for i in train_idx], [samples[i] for i in val_idx]


def samples_to_arrays(samples) -> tuple[np.ndarray, np.ndarray]:
    """Stack samples into (n, w, d) inputs and (n, 2) targets."""
    if not samples:
        raise ValueError("no samples")
    x = np.stack([s.X for s in samples]).astype(float)
    y = np.stack([s.target for s in samples]).astype(float)
    return x, y


def trajectory_to_dict(traj: Trajectory) -> dict:
    return {
        "ped_id": traj.ped_id,
        "t0": traj.t0,
        "dt": traj.dt,
        "positions": [[float(x), float(y)] for x, y in traj.positions],
        "velocities": [[float(vx), float(vy)] for vx, vy in traj.velocities[1:]],
    }


def trajectory_from_dict(doc: dict) -> Trajectory:
    pos = np.asarray(doc["positions"], dtype=float)
    vel = np.full_like(pos, np.nan)
    stored = np.asarray(doc["velocities"], dtype=float)
    if stored.shape != (pos.shape[0] - 1, 2):
        raise ValueError("velocity rows must cover steps 1..n-1")
    vel[1:] = stored
    return Trajectory(ped_id=str(doc["ped_id"]), t0=int(doc["t0"]),
                      dt=float(doc["dt"]), positions=pos, velocities=vel)


def dataset_to_dict(dataset: Dataset, scene_ref: str) -> dict:
    """JSON-ready archive; NaN first-row velocities are left implicit."""
    return {
        "format": "crowdsim-dataset-v1",
        "scene": scene_ref,
        "role": dataset.role,
        "dt": dataset.dt,
        "runs": [
            {"name": run.name,
             "trajectories": [trajectory_to_dict(t) for t in run.trajectories]}
            for run in dataset.runs
        ],
    }


def dataset_from_dict(doc: dict, scene: Scene) -> Dataset:
    if doc.get("format") != "crowdsim-dataset-v1":
        raise ValueError(f"unsupported dataset format {doc.get('format')!r}")
    runs = tuple(
        Run(name=str(r["name"]),
            trajectories=tuple(trajectory_from_dict(t) for t in r["trajectories"]))
        for r in doc["runs"]
    )
    return Dataset(scene=scene, runs=runs, role=str(doc["role"]), dt=float(doc["dt"]))
