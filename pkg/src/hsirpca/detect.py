"""Detection on the sparse component: per-pixel scores are the l2 norms of
the rows of (At C)^T, a mask is the score map over a relative floor, and
reports count hits against an implant ground truth."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np
import numpy.typing as npt

from .errors import DataError
from .scene import GroundTruth
from .solver import DecompositionResult

NDArrayF = npt.NDArray[np.floating]
NDArrayB = npt.NDArray[np.bool_]

DEFAULT_FLOOR_REL = 1e-8


@dataclass(frozen=True)
class DetectionReport:
    """Detection outcome against a ground truth; scores is None when the
    report was computed from a stored mask rather than a score map."""
    scores: Optional[NDArrayF]
    mask: NDArrayB
    detected: int
    false_alarms: int
    pd: float

    def __post_init__(self):
        if not 0.0 <= self.pd <= 1.0:
            raise ValueError("DetectionReport.pd must be within [0, 1]")
        if self.mask.dtype != np.bool_ or self.mask.ndim != 2:
            raise ValueError("DetectionReport.mask must be a 2-D boolean array")


def detection_scores(result: DecompositionResult, height: int,
                     width: int) -> NDArrayF:
    """Score at pixel (r, c): l2 norm of that pixel's sparse-target
    spectrum, i.e. of row r*width + c of (At C)^T."""
    target = result.target
    if target.shape[0] != height * width:
        raise DataError("target has %d rows, scene is %dx%d = %d pixels"
                        % (target.shape[0], height, width, height * width))
    return np.linalg.norm(target, axis=1).reshape(height, width)


def binarize(scores: NDArrayF, floor_rel: float = DEFAULT_FLOOR_REL) -> NDArrayB:
    """Mask of scores above floor_rel times the peak score. An all-zero
    score map yields an all-false mask."""
    scores = np.asarray(scores, dtype=np.float64)
    if floor_rel < 0:
        raise DataError("floor_rel must be nonnegative")
    top = float(scores.max()) if scores.size else 0.0
    return scores > floor_rel * top


def _gt_mask(gt: Union[GroundTruth, NDArrayB]) -> NDArrayB:
    mask = gt.mask if isinstance(gt, GroundTruth) else np.asarray(gt)
    if mask.ndim != 2 or mask.dtype != np.bool_:
        raise DataError("ground truth must be a 2-D boolean mask")
    return mask


def evaluate(mask: NDArrayB, gt: Union[GroundTruth, NDArrayB],
             scores: Optional[NDArrayF] = None) -> DetectionReport:
    """Count detections and false alarms. pd is detected over the ground
    truth count (1.0 for an empty ground truth: nothing was missed)."""
    truth = _gt_mask(gt)
    mask = np.asarray(mask)
    if mask.shape != truth.shape:
        raise DataError("mask shape %s does not match ground truth %s"
                        % (mask.shape, truth.shape))
    if mask.dtype != np.bool_:
        raise DataError("mask must be boolean")
    detected = int(np.sum(mask & truth))
    false_alarms = int(np.sum(mask & ~truth))
    total = int(truth.sum())
    pd = detected / total if total else 1.0
    return DetectionReport(scores=scores, mask=mask, detected=detected,
                           false_alarms=false_alarms, pd=pd)


def roc_points(scores: NDArrayF, gt: Union[GroundTruth, NDArrayB]
               ) -> List[Tuple[float, float]]:
    """(false-alarm rate, pd) at every distinct score threshold, sweeping
    descending; thresholds include each score value (mask = scores >= t)."""
    truth = _gt_mask(gt)
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != truth.shape:
        raise DataError("scores shape %s does not match ground truth %s"
                        % (scores.shape, truth.shape))
    n_pos = int(truth.sum())
    n_neg = truth.size - n_pos
    flat_s = scores.ravel()
    flat_t = truth.ravel()
    points = []
    for t in np.unique(flat_s)[::-1]:
        hit = flat_s >= t
        pd = float(np.sum(hit & flat_t)) / n_pos if n_pos else 1.0
        far = float(np.sum(hit & ~flat_t)) / max(n_neg, 1)
        points.append((far, pd))
    return points
