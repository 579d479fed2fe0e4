"""Trajectory data model, CSV ingestion and walking-direction normalization.

Trajectory CSV files are long-format, one row per (frame, keypoint)::

    video_id,cow_id,frame,keypoint,x,y[,confidence]

The optional ``confidence`` column is accepted and ignored.
"""
from __future__ import annotations

import dataclasses
from enum import IntEnum
from pathlib import Path

import numpy as np
import pandas as pd

DEFAULT_FRAME_RATE = 30.0


class KeypointId(IntEnum):
    LeftHindHoof = 1
    RightHindHoof = 2
    LeftFrontHoof = 3
    RightFrontHoof = 4
    Nose = 5
    Forehead = 6
    Withers = 7
    Sacrum = 8
    CaudalThoracic = 9


KP = KeypointId
CSV_CODES = ("LH", "RH", "LF", "RF", "NOSE", "FOREHEAD", "WITHERS", "SACRUM", "CAUDAL")
CODE_TO_KEYPOINT = {code: KeypointId(i + 1) for i, code in enumerate(CSV_CODES)}
HOOVES = (KP.LeftHindHoof, KP.RightHindHoof, KP.LeftFrontHoof, KP.RightFrontHoof)
LEG_CODES = {KP.LeftHindHoof: "LH", KP.RightHindHoof: "RH", KP.LeftFrontHoof: "LF", KP.RightFrontHoof: "RF"}

LEFT_TO_RIGHT = "left-to-right"
RIGHT_TO_LEFT = "right-to-left"


class TrajectoryError(ValueError):
    """Raised when a trajectory file or array violates the data model."""


def kp_index(kp: KeypointId) -> int:
    """Column of ``kp`` in a ``(frames, 9, 2)`` coordinate array."""
    return int(kp) - 1


@dataclasses.dataclass(frozen=True)
class TrajectorySet:
    """Keypoint positions of one video.

    ``coords`` has shape ``(n_frames, 9, 2)`` holding pixel ``(x, y)`` for
    every keypoint in ``KeypointId`` order. The array is made read-only on
    construction.
    """

    video_id: str
    cow_id: str
    coords: np.ndarray
    frame_rate: float = DEFAULT_FRAME_RATE
    direction: str | None = None

    def __post_init__(self):
        coords = np.array(self.coords, dtype=np.float64)
        if coords.ndim != 3 or coords.shape[1:] != (9, 2):
            raise TrajectoryError(f"coords must have shape (n, 9, 2), got {coords.shape}")
        if coords.shape[0] < 2:
            raise TrajectoryError("trajectory needs at least 2 frames")
        if not np.all(np.isfinite(coords)):
            raise TrajectoryError("non-finite coordinates")
        if self.frame_rate <= 0:
            raise TrajectoryError("frame_rate must be positive")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @property
    def n_frames(self) -> int:
        return self.coords.shape[0]

    def x(self, kp: KeypointId) -> np.ndarray:
        return self.coords[:, kp_index(kp), 0]

    def y(self, kp: KeypointId) -> np.ndarray:
        return self.coords[:, kp_index(kp), 1]

    def point(self, kp: KeypointId, frame: int) -> np.ndarray:
        return self.coords[frame, kp_index(kp)]

    def replace(self, **changes) -> "TrajectorySet":
        return dataclasses.replace(self, **changes)

    def __eq__(self, other):
        if not isinstance(other, TrajectorySet):
            return NotImplemented
        return (
            self.video_id == other.video_id
            and self.cow_id == other.cow_id
            and self.frame_rate == other.frame_rate
            and self.direction == other.direction
            and np.array_equal(self.coords, other.coords)
        )

    __hash__ = None


def _frame_to_trajectory(df: pd.DataFrame, video_id: str, frame_rate: float) -> TrajectorySet:
    cow_ids = df["cow_id"].unique()
    if len(cow_ids) != 1:
        raise TrajectoryError(f"video {video_id}: multiple cow_id values {list(cow_ids)}")
    unknown = set(df["keypoint"]) - set(CSV_CODES)
    if unknown:
        raise TrajectoryError(f"video {video_id}: unknown keypoint codes {sorted(unknown)}")
    if df.duplicated(["frame", "keypoint"]).any():
        raise TrajectoryError(f"video {video_id}: duplicate (frame, keypoint) rows")

    frames = np.sort(df["frame"].unique())
    if frames[0] != 0 or not np.array_equal(frames, np.arange(len(frames))):
        raise TrajectoryError(f"video {video_id}: non-contiguous frames")
    counts = df.groupby("frame")["keypoint"].nunique()
    if (counts != len(CSV_CODES)).any():
        bad = int(counts[counts != len(CSV_CODES)].index[0])
        raise TrajectoryError(f"video {video_id}: incomplete frame {bad}")

    kp_col = df["keypoint"].map({c: i for i, c in enumerate(CSV_CODES)}).to_numpy()
    coords = np.empty((len(frames), 9, 2))
    f = df["frame"].to_numpy()
    coords[f, kp_col, 0] = df["x"].to_numpy()
    coords[f, kp_col, 1] = df["y"].to_numpy()
    return TrajectorySet(str(video_id), str(cow_ids[0]), coords, frame_rate)


def read_trajectory_csv(path, frame_rate: float = DEFAULT_FRAME_RATE) -> dict[str, TrajectorySet]:
    """Load every video in a trajectory CSV, keyed by video_id (file order)."""
    df = pd.read_csv(path, dtype={"video_id": str, "cow_id": str, "keypoint": str},
                     float_precision="round_trip")
    required = ["video_id", "cow_id", "frame", "keypoint", "x", "y"]
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise TrajectoryError(f"{path}: missing columns {missing}")
    for col in ("x", "y"):
        if not pd.api.types.is_numeric_dtype(df[col]):
            raise TrajectoryError(f"{path}: non-numeric coordinates in column {col}")
    if df[["x", "y"]].isna().any().any():
        raise TrajectoryError(f"{path}: non-numeric coordinates")
    if not pd.api.types.is_integer_dtype(df["frame"]) or (df["frame"] < 0).any():
        raise TrajectoryError(f"{path}: frame must be a non-negative integer")
    df["keypoint"] = df["keypoint"].str.strip().str.upper()
    out = {}
    for vid, sub in df.groupby("video_id", sort=False):
        out[str(vid)] = _frame_to_trajectory(sub, str(vid), frame_rate)
    return out


def load_trajectories(path, frame_rate: float = DEFAULT_FRAME_RATE) -> TrajectorySet:
    """Load a single-video trajectory CSV."""
    videos = read_trajectory_csv(path, frame_rate)
    if len(videos) != 1:
        raise TrajectoryError(f"{path}: expected one video, found {len(videos)}")
    return next(iter(videos.values()))


def trajectories_to_frame(trajs) -> pd.DataFrame:
    rows = []
    for traj in trajs:
        n = traj.n_frames
        frames = np.repeat(np.arange(n), 9)
        codes = np.tile(np.array(CSV_CODES), n)
        flat = traj.coords.reshape(-1, 2)
        rows.append(pd.DataFrame({
            "video_id": traj.video_id,
            "cow_id": traj.cow_id,
            "frame": frames,
            "keypoint": codes,
            "x": flat[:, 0],
            "y": flat[:, 1],
        }))
    if not rows:
        return pd.DataFrame(columns=["video_id", "cow_id", "frame", "keypoint", "x", "y"])
    return pd.concat(rows, ignore_index=True)


def write_trajectory_csv(path, trajs) -> None:
    if isinstance(trajs, TrajectorySet):
        trajs = [trajs]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    trajectories_to_frame(trajs).to_csv(path, index=False, float_format="%.17g")


def head_length(traj: TrajectorySet) -> float:
    """Per-video median Forehead-Nose distance in pixels."""
    d = np.linalg.norm(
        traj.coords[:, kp_index(KP.Forehead)] - traj.coords[:, kp_index(KP.Nose)], axis=1
    )
    if np.count_nonzero(d == 0) * 2 >= len(d):
        raise TrajectoryError("degenerate head keypoints")
    return float(np.median(d))


def normalize_direction(traj: TrajectorySet) -> TrajectorySet:
    """Mirror right-to-left walks so that increasing x means forward.

    The walk direction comes from the net Sacrum displacement; a
    displacement shorter than one head length is rejected.
    """
    sx = traj.x(KP.Sacrum)
    dx = sx[-1] - sx[0]
    if abs(dx) < head_length(traj):
        raise TrajectoryError("cow not walking")
    if dx > 0:
        return traj.replace(direction=LEFT_TO_RIGHT)
    coords = traj.coords.copy()
    coords[:, :, 0] = coords[:, :, 0].max() - coords[:, :, 0]
    return traj.replace(coords=coords, direction=LEFT_TO_RIGHT)
