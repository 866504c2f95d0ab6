"""On-disk datasets of feature tensors and label tracks.

Directory layout::

    manifest.json          {"format", "version", "num_classes", "clips": [{"name", "split"}]}
    <name>.feat            binary tensor (below)
    <name>.csv             label track, columns frame,class,activity,x,y,z

Binary tensor layout, little-endian::

    8 bytes   magic b"SELDFEAT"
    uint32    version (1)
    uint32    ndim
    int64     shape[ndim]
    float64   values, row-major, prod(shape) of them
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from ..track import FrameTrack, read_track, write_track

MAGIC = b"SELDFEAT"
VERSION = 1
MANIFEST = "manifest.json"
MAX_NDIM = 8


class CorruptDatasetError(ValueError):
    pass


@dataclass
class Clip:
    name: str
    features: np.ndarray  # [2*channels, T, F]
    track: FrameTrack
    split: str = "train"


def encode_tensor(x: np.ndarray) -> bytes:
    x = np.ascontiguousarray(x, dtype="<f8")
    head = MAGIC + struct.pack("<II", VERSION, x.ndim) + struct.pack(f"<{x.ndim}q", *x.shape)
    return head + x.tobytes()


def decode_tensor(blob: bytes, source: str = "<bytes>") -> np.ndarray:
    if len(blob) < 16 or blob[:8] != MAGIC:
        raise CorruptDatasetError(f"{source}: bad magic header")
    version, ndim = struct.unpack_from("<II", blob, 8)
    if version != VERSION:
        raise CorruptDatasetError(f"{source}: unsupported version {version}")
    if ndim > MAX_NDIM or len(blob) < 16 + 8 * ndim:
        raise CorruptDatasetError(f"{source}: corrupt shape header")
    shape = struct.unpack_from(f"<{ndim}q", blob, 16)
    if any(s < 0 for s in shape):
        raise CorruptDatasetError(f"{source}: negative extent in shape {shape}")
    start = 16 + 8 * ndim
    expected = 8 * int(np.prod(shape, dtype=np.int64))
    if len(blob) - start != expected:
        raise CorruptDatasetError(f"{source}: payload has {len(blob) - start} bytes, expected {expected} (truncated or padded)")
    return np.frombuffer(blob, dtype="<f8", offset=start).reshape(shape).astype(np.float64)


def write_tensor(x: np.ndarray, path: str | Path) -> None:
    Path(path).write_bytes(encode_tensor(x))


def read_tensor(path: str | Path) -> np.ndarray:
    return decode_tensor(Path(path).read_bytes(), str(path))


def write_dataset(root: str | Path, clips: Iterable[Clip], num_classes: int, meta: dict | None = None) -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for clip in clips:
        if clip.track.num_classes != num_classes or clip.track.num_frames != clip.features.shape[1]:
            raise ValueError(f"clip {clip.name}: track does not match features / class count")
        write_tensor(clip.features, root / f"{clip.name}.feat")
        write_track(clip.track, root / f"{clip.name}.csv")
        entries.append({"name": clip.name, "split": clip.split})
    manifest = {"format": "seldagg-dataset", "version": VERSION, "num_classes": num_classes, "clips": entries, "meta": meta or {}}
    (root / MANIFEST).write_text(json.dumps(manifest, indent=2) + "\n")
    return root


def read_manifest(root: str | Path) -> dict:
    root = Path(root)
    path = root / MANIFEST
    if not path.exists():
        names = sorted(p.stem for p in root.glob("*.feat"))
        return {"num_classes": None, "clips": [{"name": n, "split": "train"} for n in names], "meta": {}}
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise CorruptDatasetError(f"{path}: {exc}") from exc
    if manifest.get("format") != "seldagg-dataset":
        raise CorruptDatasetError(f"{path}: not a dataset manifest")
    return manifest


def iter_dataset(root: str | Path, split: str | None = None) -> Iterator[Clip]:
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset directory {root} does not exist")
    manifest = read_manifest(root)
    for entry in manifest["clips"]:
        if split is not None and entry["split"] != split:
            continue
        feats = read_tensor(root / f"{entry['name']}.feat")
        if feats.ndim != 3:
            raise CorruptDatasetError(f"{entry['name']}: features must be 3-D, got {feats.shape}")
        track = read_track(root / f"{entry['name']}.csv", frames=feats.shape[1], classes=manifest.get("num_classes"))
        yield Clip(entry["name"], feats, track, entry["split"])


def read_dataset(root: str | Path, split: str | None = None) -> list[Clip]:
    return list(iter_dataset(root, split))
