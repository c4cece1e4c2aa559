"""ADPIT loss: per-cell minimum over track assignments of track-wise MSE.

For each (class, frame) cell and candidate assignment p:

    l_p = (1/N) * sum_n mean_over_counted_components (pred_n - cand_n)^2

where the three DOA components are always counted and the distance
component only where the cell is active (silence must not drag distance
predictions toward zero).  The loss is the mean over cells of
``min_p l_p``; ties break to the lowest candidate index so gradients are
deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .targets import AssignmentSet


@dataclass
class LossBreakdown:
    total: float
    per_class: np.ndarray          # (C,)
    per_frame: np.ndarray          # (T,)
    argmin_assignment: np.ndarray  # (C, T) int


def _check_shapes(pred: np.ndarray, assignments: AssignmentSet) -> None:
    expected = assignments.candidates.shape[1:]
    if tuple(pred.shape) != tuple(expected):
        raise ValueError(f"pred shape {pred.shape} != expected {expected}")


def per_candidate_losses(pred: np.ndarray, assignments: AssignmentSet) -> np.ndarray:
    """Track-averaged MSE for every padded candidate -> (6, C, T)."""
    _check_shapes(pred, assignments)
    diff = pred[None] - assignments.candidates        # (P, 4, N, C, T)
    sq = diff ** 2
    n_comps = np.where(assignments.active, 4.0, 3.0)  # (C, T)
    counted = sq[:, :3].sum(axis=1) + assignments.active[None, None] * sq[:, 3]
    per_track = counted / n_comps[None, None]         # (P, N, C, T)
    return per_track.mean(axis=1)


def adpit_loss(pred: np.ndarray, assignments: AssignmentSet) -> LossBreakdown:
    """Mean over (class, frame) of the minimum candidate loss."""
    losses = per_candidate_losses(np.asarray(pred, dtype=np.float64), assignments)
    argmin = losses.argmin(axis=0)                    # first index on ties
    cell_min = np.take_along_axis(losses, argmin[None], axis=0)[0]
    return LossBreakdown(
        total=float(cell_min.mean()),
        per_class=cell_min.mean(axis=1),
        per_frame=cell_min.mean(axis=0),
        argmin_assignment=argmin,
    )


def adpit_loss_grad(pred: np.ndarray, assignments: AssignmentSet) -> np.ndarray:
    """Gradient of the total loss w.r.t. ``pred``, argmin held fixed.

    Per counted component: ``2 * (pred - chosen_target) / (C*T*N*n_comps)``.
    """
    pred = np.asarray(pred, dtype=np.float64)
    losses = per_candidate_losses(pred, assignments)
    argmin = losses.argmin(axis=0)
    chosen = np.take_along_axis(
        assignments.candidates, argmin[None, None, None], axis=0
    )[0]                                              # (4, N, C, T)
    _, n_tracks, n_classes, n_frames = pred.shape
    n_comps = np.where(assignments.active, 4.0, 3.0)
    grad = 2.0 * (pred - chosen) / (n_classes * n_frames * n_tracks * n_comps)
    grad[3] *= assignments.active                     # distance masked when inactive
    return grad
