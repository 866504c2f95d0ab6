"""Per-frame class activity and DOA tracks, plus their CSV representation.

CSV columns are ``frame,class,activity,x,y,z`` with one row per
(frame, class) pair, frames outer. Floats use the shortest round-trip repr so
a write/read cycle is exact.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CSV_HEADER = ("frame", "class", "activity", "x", "y", "z")


@dataclass
class FrameTrack:
    class_activity: np.ndarray  # [T, C] in [0, 1]
    doa: np.ndarray  # [T, C, 3] Cartesian

    def __post_init__(self):
        self.class_activity = np.asarray(self.class_activity, dtype=np.float64)
        self.doa = np.asarray(self.doa, dtype=np.float64)
        if self.class_activity.ndim != 2:
            raise ValueError(f"class_activity must be [T, C], got {self.class_activity.shape}")
        T, C = self.class_activity.shape
        if self.doa.shape != (T, C, 3):
            raise ValueError(f"doa must be [{T}, {C}, 3], got {self.doa.shape}")

    @classmethod
    def empty(cls, frames: int, classes: int) -> "FrameTrack":
        return cls(np.zeros((frames, classes)), np.zeros((frames, classes, 3)))

    @property
    def num_frames(self) -> int:
        return self.class_activity.shape[0]

    @property
    def num_classes(self) -> int:
        return self.class_activity.shape[1]

    @property
    def active(self) -> np.ndarray:
        return self.class_activity >= 0.5

    def sources_per_frame(self) -> np.ndarray:
        return self.active.sum(axis=1)

    def doa_flat(self) -> np.ndarray:
        """DOA targets in the model's [T, 3C] layout (class-major xyz triplets)."""
        return self.doa.reshape(self.num_frames, 3 * self.num_classes)

    def roll(self, shift: int) -> "FrameTrack":
        return FrameTrack(np.roll(self.class_activity, shift, axis=0), np.roll(self.doa, shift, axis=0))

    def equals(self, other: "FrameTrack") -> bool:
        return (
            self.class_activity.shape == other.class_activity.shape
            and self.class_activity.tobytes() == other.class_activity.tobytes()
            and self.doa.tobytes() == other.doa.tobytes()
        )


def track_to_csv(track: FrameTrack) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for t in range(track.num_frames):
        for c in range(track.num_classes):
            x, y, z = track.doa[t, c]
            w.writerow([t, c, repr(float(track.class_activity[t, c])), repr(float(x)), repr(float(y)), repr(float(z))])
    return buf.getvalue()


def track_from_csv(text: str, frames: int | None = None, classes: int | None = None) -> FrameTrack:
    """Parse a track CSV; missing (frame, class) rows are inactive with a zero DOA."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(h.strip() for h in rows[0]) != CSV_HEADER:
        raise ValueError(f"track CSV must start with header {','.join(CSV_HEADER)}")
    body = [r for r in rows[1:] if r]
    parsed = []
    for r in body:
        if len(r) != 6:
            raise ValueError(f"malformed track row {r!r}")
        parsed.append((int(r[0]), int(r[1]), float(r[2]), float(r[3]), float(r[4]), float(r[5])))
    T = frames if frames is not None else (max((p[0] for p in parsed), default=-1) + 1)
    C = classes if classes is not None else (max((p[1] for p in parsed), default=-1) + 1)
    track = FrameTrack.empty(T, C)
    for t, c, a, x, y, z in parsed:
        if not (0 <= t < T and 0 <= c < C):
            raise ValueError(f"row frame={t} class={c} outside a {T}x{C} track")
        track.class_activity[t, c] = a
        track.doa[t, c] = (x, y, z)
    return track


def write_track(track: FrameTrack, path: str | Path) -> None:
    Path(path).write_text(track_to_csv(track))


def read_track(path: str | Path, frames: int | None = None, classes: int | None = None) -> FrameTrack:
    return track_from_csv(Path(path).read_text(), frames, classes)
