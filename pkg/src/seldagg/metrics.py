"""SELD evaluation metrics.

Segment-based F-score and error rate over one-second segments, DOA error and
frame recall for localization, the SED/DOA/SELD composite scores, and the
percentage-improvement arithmetic used to compare aggregators against a
control model.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import jsonschema
import numpy as np

from .track import FrameTrack


class UndefinedMetricError(ValueError):
    """A metric whose denominator is zero for the given input."""


@dataclass
class SegmentCounts:
    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    n: np.ndarray

    @property
    def num_segments(self) -> int:
        return len(self.tp)

    def __add__(self, other: "SegmentCounts") -> "SegmentCounts":
        return SegmentCounts(*(np.concatenate([a, b]) for a, b in zip(self._arrays(), other._arrays())))

    def _arrays(self):
        return self.tp, self.fp, self.fn, self.n

    @classmethod
    def concat(cls, parts: Iterable["SegmentCounts"]) -> "SegmentCounts":
        parts = list(parts)
        if not parts:
            z = np.zeros(0, dtype=np.int64)
            return cls(z, z, z, z)
        return cls(*(np.concatenate(arrs) for arrs in zip(*(p._arrays() for p in parts))))


def segment_counts(gt: FrameTrack, pred: FrameTrack, frames_per_segment: int) -> SegmentCounts:
    """TP/FP/FN/N per segment; a class is present in a segment if active in any of its frames."""
    if gt.class_activity.shape != pred.class_activity.shape:
        raise ValueError(f"track shapes differ: {gt.class_activity.shape} vs {pred.class_activity.shape}")
    if frames_per_segment < 1:
        raise ValueError("frames_per_segment must be >= 1")
    T = gt.num_frames
    k = math.ceil(T / frames_per_segment)
    starts = np.arange(k) * frames_per_segment
    g = np.logical_or.reduceat(gt.active, starts, axis=0) if T else np.zeros((0, gt.num_classes), bool)
    p = np.logical_or.reduceat(pred.active, starts, axis=0) if T else np.zeros((0, gt.num_classes), bool)
    tp = np.sum(g & p, axis=1)
    fp = np.sum(~g & p, axis=1)
    fn = np.sum(g & ~p, axis=1)
    return SegmentCounts(tp, fp, fn, g.sum(axis=1))


def f_score(counts: SegmentCounts) -> float:
    tp, fp, fn = counts.tp.sum(), counts.fp.sum(), counts.fn.sum()
    denom = 2 * tp + fp + fn
    return float(2 * tp / denom) if denom else 0.0


def error_decomposition(counts: SegmentCounts) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-segment substitutions, deletions and insertions."""
    s = np.minimum(counts.fn, counts.fp)
    d = np.maximum(0, counts.fn - counts.fp)
    i = np.maximum(0, counts.fp - counts.fn)
    return s, d, i


def error_rate(counts: SegmentCounts) -> float:
    n = counts.n.sum()
    if n == 0:
        raise UndefinedMetricError("error rate is undefined without active ground-truth classes")
    s, d, i = error_decomposition(counts)
    return float((s.sum() + d.sum() + i.sum()) / n)


def doa_angle(gt, est) -> float:
    """Angle in degrees between two directions, via the chord length of their unit vectors."""
    g = np.asarray(gt, dtype=np.float64)
    e = np.asarray(est, dtype=np.float64)
    ng, ne = np.linalg.norm(g), np.linalg.norm(e)
    if ng == 0 or ne == 0:
        raise ValueError("doa_angle needs nonzero vectors")
    delta = np.linalg.norm(g / ng - e / ne)
    return float(2.0 * math.asin(min(1.0, delta / 2.0)) * 180.0 / math.pi)


def doa_angles(gt: np.ndarray, est: np.ndarray) -> np.ndarray:
    """Vectorised :func:`doa_angle` over [..., 3] arrays."""
    g = gt / np.linalg.norm(gt, axis=-1, keepdims=True)
    e = est / np.linalg.norm(est, axis=-1, keepdims=True)
    delta = np.linalg.norm(g - e, axis=-1)
    return 2.0 * np.arcsin(np.clip(delta / 2.0, 0.0, 1.0)) * 180.0 / np.pi


def doa_pairs(gt: FrameTrack, pred: FrameTrack) -> tuple[np.ndarray, np.ndarray]:
    """Class-aware per-frame association: frames where a class is active in both
    tracks and the estimate is a nonzero vector."""
    if gt.class_activity.shape != pred.class_activity.shape:
        raise ValueError("track shapes differ")
    has_estimate = np.linalg.norm(pred.doa, axis=-1) > 0
    both = gt.active & pred.active & has_estimate
    return gt.doa[both], pred.doa[both]


def doa_error(gt_vectors: np.ndarray, est_vectors: np.ndarray) -> float:
    gt_vectors = np.asarray(gt_vectors, dtype=np.float64).reshape(-1, 3)
    est_vectors = np.asarray(est_vectors, dtype=np.float64).reshape(-1, 3)
    if len(gt_vectors) == 0:
        raise UndefinedMetricError("DOA error is undefined with no DOA estimates")
    if np.any(np.linalg.norm(gt_vectors, axis=1) == 0) or np.any(np.linalg.norm(est_vectors, axis=1) == 0):
        raise ValueError("DOA vectors must be nonzero")
    return float(np.mean(doa_angles(gt_vectors, est_vectors)))


def frame_recall_counts(gt: FrameTrack, pred: FrameTrack) -> tuple[int, int]:
    if gt.num_frames != pred.num_frames:
        raise ValueError(f"track lengths differ: {gt.num_frames} vs {pred.num_frames}")
    match = gt.sources_per_frame() == pred.sources_per_frame()
    return int(match.sum()), int((~match).sum())


def frame_recall(gt: FrameTrack, pred: FrameTrack) -> float:
    """Percentage of frames whose predicted source count equals the ground truth's."""
    tp, fn = frame_recall_counts(gt, pred)
    if tp + fn == 0:
        raise UndefinedMetricError("frame recall is undefined for empty tracks")
    return 100.0 * tp / (tp + fn)


def composite_scores(f_percent: float, er: float, doa_err: float, fr: float) -> tuple[float, float, float]:
    """(SED score, DOA score, SELD); F and FR are percentages, DOA error in degrees."""
    sed = (er + (1.0 - f_percent / 100.0)) / 2.0
    doa = (doa_err / 180.0 + (1.0 - fr / 100.0)) / 2.0
    return sed, doa, (sed + doa) / 2.0


# -- reports ------------------------------------------------------------------

REPORT_SCHEMA = {
    "type": "object",
    "required": ["er", "f", "sed_score", "doa_error", "fr", "doa_score", "seld"],
    "properties": {
        "er": {"type": "number", "minimum": 0},
        "f": {"type": "number", "minimum": 0, "maximum": 1},
        "sed_score": {"type": "number", "minimum": 0},
        "doa_error": {"type": "number", "minimum": 0, "maximum": 180},
        "fr": {"type": "number", "minimum": 0, "maximum": 100},
        "doa_score": {"type": "number", "minimum": 0},
        "seld": {"type": "number", "minimum": 0},
        "counts": {"type": "object"},
    },
    "additionalProperties": False,
}

# decimals used when printing result rows
REPORT_PRECISION = {"er": 2, "f": 3, "sed_score": 2, "doa_error": 1, "fr": 1, "doa_score": 2, "seld": 3}


@dataclass
class MetricsReport:
    er: float
    f: float  # fraction in [0, 1]
    sed_score: float
    doa_error: float  # degrees
    fr: float  # percent
    doa_score: float
    seld: float
    counts: dict = field(default_factory=dict)

    @classmethod
    def from_primary(cls, er: float, f: float, doa_error: float, fr: float, counts: dict | None = None) -> "MetricsReport":
        sed, doa, seld = composite_scores(100.0 * f, er, doa_error, fr)
        return cls(er, f, sed, doa_error, fr, doa, seld, counts or {})

    def to_dict(self) -> dict:
        d = asdict(self)
        d = {k: (float(v) if k != "counts" else v) for k, v in d.items()}
        if not d["counts"]:
            del d["counts"]
        jsonschema.validate(d, REPORT_SCHEMA)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        jsonschema.validate(d, REPORT_SCHEMA)
        return cls(**{k: d[k] for k in ("er", "f", "sed_score", "doa_error", "fr", "doa_score", "seld")}, counts=d.get("counts", {}))

    def rounded(self) -> "MetricsReport":
        kw = {k: round(getattr(self, k), nd) for k, nd in REPORT_PRECISION.items()}
        return MetricsReport(**kw, counts=dict(self.counts))


def evaluate_tracks(
    gts: Sequence[FrameTrack],
    preds: Sequence[FrameTrack],
    frames_per_segment: int,
    empty_doa_error: float = 180.0,
) -> MetricsReport:
    """Aggregate every metric over a list of clips (counts pooled globally).

    When no DOA pairs exist the DOA error falls back to ``empty_doa_error``
    (the worst possible angle) so that the composite scores stay defined.
    """
    if len(gts) != len(preds):
        raise ValueError("need one prediction per ground-truth track")
    counts = SegmentCounts.concat(segment_counts(g, p, frames_per_segment) for g, p in zip(gts, preds))
    fr_tp = fr_fn = 0
    g_vecs, e_vecs = [], []
    for g, p in zip(gts, preds):
        a, b = frame_recall_counts(g, p)
        fr_tp += a
        fr_fn += b
        gv, ev = doa_pairs(g, p)
        g_vecs.append(gv)
        e_vecs.append(ev)
    gv = np.concatenate(g_vecs) if g_vecs else np.zeros((0, 3))
    ev = np.concatenate(e_vecs) if e_vecs else np.zeros((0, 3))
    err = doa_error(gv, ev) if len(gv) else empty_doa_error
    if fr_tp + fr_fn == 0:
        raise UndefinedMetricError("no frames to evaluate")
    fr = 100.0 * fr_tp / (fr_tp + fr_fn)
    summary = {
        "tp": int(counts.tp.sum()),
        "fp": int(counts.fp.sum()),
        "fn": int(counts.fn.sum()),
        "n": int(counts.n.sum()),
        "segments": counts.num_segments,
        "doa_pairs": int(len(gv)),
        "frames": fr_tp + fr_fn,
    }
    return MetricsReport.from_primary(error_rate(counts), f_score(counts), err, fr, summary)


# -- aggregator comparison ---------------------------------------------------------


@dataclass
class Improvement:
    name: str
    nodes: int
    sed: float
    doa: float
    seld: float

    @property
    def sed_per_node(self) -> float:
        return self.sed / self.nodes

    @property
    def doa_per_node(self) -> float:
        return self.doa / self.nodes

    @property
    def seld_per_node(self) -> float:
        return self.seld / self.nodes

    def to_dict(self) -> dict:
        return {
            "aggregator": self.name,
            "nodes": self.nodes,
            "sed_overall": self.sed,
            "sed_per_node": self.sed_per_node,
            "doa_overall": self.doa,
            "doa_per_node": self.doa_per_node,
            "seld_overall": self.seld,
            "seld_per_node": self.seld_per_node,
        }


def _percent_drop(control: float, variant: float, label: str) -> float:
    if control == 0:
        raise UndefinedMetricError(f"control {label} score is zero; improvement undefined")
    return 100.0 * (control - variant) / control


def improvement_report(control: MetricsReport, variant: MetricsReport, nodes: int, name: str = "") -> Improvement:
    """Overall and per-node percentage reduction of the SED, DOA and SELD scores."""
    if nodes < 1:
        raise ValueError("node count must be >= 1")
    return Improvement(
        name,
        nodes,
        _percent_drop(control.sed_score, variant.sed_score, "SED"),
        _percent_drop(control.doa_score, variant.doa_score, "DOA"),
        _percent_drop(control.seld, variant.seld, "SELD"),
    )
