"""Pairwise similarity criteria between detections and cost-matrix construction.

Edge costs are the negated similarity, so minimizing total cost maximizes the
total likelihood that linked detections belong to the same person. Available
criteria:

  bbox_iou        box intersection over union
  pose_pckh       fraction of jointly present joints within a distance
                  threshold proportional to the earlier detection's box
                  diagonal (predictions carry no annotated head box)
  feature_cosine  cosine similarity of appearance embeddings
  combined        weighted mean of the three above; the cosine term is
                  rescaled from [-1, 1] to [0, 1] before mixing, and a
                  zero-weight term is never computed
  external        scores supplied from a side file, e.g. a learned matcher

External score files are a JSON list of
{"frame": int, "prev_index": int, "curr_index": int, "similarity": float},
keyed by the current frame's frame_index and by indices into the candidate
pools handed to build_cost_matrix (for lookback 1, prev_index is simply the
detection index in the previous frame). Missing entries default to 0.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .model import Box, Detection

CRITERION_KINDS = ("bbox_iou", "pose_pckh", "feature_cosine", "combined", "external")


@dataclass(frozen=True)
class SimilarityCriterion:
    kind: str = "bbox_iou"
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0)  # (iou, pckh, cosine), combined only
    pckh_alpha: float = 0.5
    pckh_norm_scale: float = 0.1
    external_scores: Optional[Mapping[tuple[int, int, int], float]] = field(
        default=None, compare=False
    )

    def __post_init__(self):
        if self.kind not in CRITERION_KINDS:
            raise ValueError(f"unknown criterion kind {self.kind!r}")
        if self.kind == "combined":
            if any(w < 0 for w in self.weights):
                raise ValueError("combined weights must be non-negative")
            if sum(self.weights) <= 0:
                raise ValueError("combined weights must sum to a positive value")


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """Dense link costs between two detection sets; cost is minus similarity."""

    similarity: np.ndarray  # shape (rows, cols)

    def __post_init__(self):
        sim = np.asarray(self.similarity, dtype=float)
        if sim.ndim != 2:
            raise ValueError("similarity must be a 2-d matrix")
        if not np.all(np.isfinite(sim)):
            raise ValueError("cost matrix entries must be finite")
        sim.flags.writeable = False
        object.__setattr__(self, "similarity", sim)

    @property
    def cost(self) -> np.ndarray:
        return -self.similarity

    @property
    def rows(self) -> int:
        return self.similarity.shape[0]

    @property
    def cols(self) -> int:
        return self.similarity.shape[1]


def iou(a: Box, b: Box) -> float:
    """Intersection over union; 0 when the union has zero area."""
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    inter = max(0.0, iw) * max(0.0, ih)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def pose_pckh_similarity(
    a: Detection, b: Detection, alpha: float = 0.5, norm_scale: float = 0.1
) -> float:
    """Fraction of jointly present joints within alpha * (norm_scale * diag of a.box).

    Returns 0 when the poses share no present joints.
    """
    threshold = alpha * norm_scale * a.box.diagonal
    shared = 0
    correct = 0
    for ka, kb in zip(a.pose.joints, b.pose.joints):
        if not (ka.present and kb.present):
            continue
        shared += 1
        if math.hypot(ka.x - kb.x, ka.y - kb.y) <= threshold:
            correct += 1
    if shared == 0:
        return 0.0
    return correct / shared


def feature_cosine(a: Sequence[float], b: Sequence[float]) -> float:
    """Cosine similarity in [-1, 1]; a zero vector yields 0 with a warning."""
    va = np.asarray(a, dtype=float)
    vb = np.asarray(b, dtype=float)
    if va.shape != vb.shape:
        raise ValueError(f"feature dimension mismatch: {va.shape} vs {vb.shape}")
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        warnings.warn("zero-norm feature vector; cosine similarity set to 0")
        return 0.0
    return float(np.dot(va, vb) / (na * nb))


def load_external_scores(path: str) -> dict[tuple[int, int, int], float]:
    """Read an external-score file into a lookup keyed (frame, prev, curr)."""
    with open(path, "r", encoding="utf-8") as fh:
        entries = json.load(fh)
    if not isinstance(entries, list):
        raise ValueError("external score file must hold a JSON list")
    table = {}
    for e in entries:
        try:
            key = (int(e["frame"]), int(e["prev_index"]), int(e["curr_index"]))
            table[key] = float(e["similarity"])
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed external score entry: {e!r}") from exc
    return table


def _require_features(dets: Sequence[Detection], side: str) -> None:
    for i, det in enumerate(dets):
        if det.feature is None:
            raise ValueError(
                f"criterion requires a feature vector on every detection; "
                f"{side} detection {i} has none"
            )


def build_cost_matrix(
    prev: Sequence[Detection],
    curr: Sequence[Detection],
    criterion: SimilarityCriterion,
    frame_index: Optional[int] = None,
) -> CostMatrix:
    """Similarity (and negated cost) for every prev x curr pair.

    frame_index keys the lookup for the external criterion and is ignored
    otherwise. Entries are independent, so evaluation order never matters.
    """
    rows, cols = len(prev), len(curr)
    sim = np.zeros((rows, cols), dtype=float)

    if criterion.kind == "bbox_iou":
        for i, p in enumerate(prev):
            for j, c in enumerate(curr):
                sim[i, j] = iou(p.box, c.box)
    elif criterion.kind == "pose_pckh":
        for i, p in enumerate(prev):
            for j, c in enumerate(curr):
                sim[i, j] = pose_pckh_similarity(
                    p, c, criterion.pckh_alpha, criterion.pckh_norm_scale
                )
    elif criterion.kind == "feature_cosine":
        if rows and cols:
            _require_features(prev, "previous")
            _require_features(curr, "current")
        for i, p in enumerate(prev):
            for j, c in enumerate(curr):
                sim[i, j] = feature_cosine(p.feature, c.feature)
    elif criterion.kind == "combined":
        w_iou, w_pckh, w_cos = criterion.weights
        total = w_iou + w_pckh + w_cos
        if w_cos > 0 and rows and cols:
            _require_features(prev, "previous")
            _require_features(curr, "current")
        for i, p in enumerate(prev):
            for j, c in enumerate(curr):
                s = 0.0
                if w_iou > 0:
                    s += w_iou * iou(p.box, c.box)
                if w_pckh > 0:
                    s += w_pckh * pose_pckh_similarity(
                        p, c, criterion.pckh_alpha, criterion.pckh_norm_scale
                    )
                if w_cos > 0:
                    s += w_cos * 0.5 * (feature_cosine(p.feature, c.feature) + 1.0)
                sim[i, j] = s / total
    elif criterion.kind == "external":
        if criterion.external_scores is None:
            raise ValueError("external criterion requires a score table")
        if frame_index is None:
            raise ValueError("external criterion requires the current frame_index")
        table = criterion.external_scores
        for i in range(rows):
            for j in range(cols):
                sim[i, j] = table.get((frame_index, i, j), 0.0)
    else:  # pragma: no cover - guarded by SimilarityCriterion
        raise ValueError(f"unknown criterion kind {criterion.kind!r}")

    return CostMatrix(sim)
