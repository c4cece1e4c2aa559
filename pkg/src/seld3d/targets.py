"""Multi-ACCDOA(+distance) target encoding with auxiliary duplication.

Targets are (4, N=3 tracks, C=13 classes, T=20 frames) tensors: components
0..2 hold the activity-scaled Cartesian DOA (zero when inactive, unit
vector when active) and component 3 holds distance normalized by
``d_norm`` and clamped to [0, 1].

For each (class, frame) cell with k simultaneous events, the set of valid
track assignments is enumerated via auxiliary duplication:
  k = 0 -> one all-zero candidate
  k = 1 -> the event duplicated onto all 3 tracks (1 candidate)
  k = 2 -> the 2^3 - 2 = 6 surjective maps of tracks onto the two events
  k = 3 -> the 3! = 6 track permutations
The canonical target tensor is candidate 0 of each cell (events ordered
by source id, lexicographically first assignment).
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from .labels import N_CLASSES, doa_to_cartesian

N_TRACKS = 3
N_COMPONENTS = 4
MAX_CANDIDATES = 6
D_NORM = 10.0


@dataclass
class AssignmentSet:
    """Per-(class, frame) candidate track assignments, padded to 6.

    Padding repeats candidate 0, which leaves per-cell minima (and their
    first-index argmin) unchanged.
    """

    candidates: np.ndarray    # (6, 4, N, C, T) float64
    n_candidates: np.ndarray  # (C, T) int, in {1, 6}
    active: np.ndarray        # (C, T) bool: any event in this cell

    @property
    def n_classes(self) -> int:
        return self.candidates.shape[3]

    @property
    def n_frames(self) -> int:
        return self.candidates.shape[4]


def _assignment_patterns(k: int) -> list[tuple[int, ...]]:
    if k == 1:
        return [(0, 0, 0)]
    if k == 2:
        return [p for p in itertools.product(range(2), repeat=N_TRACKS)
                if len(set(p)) == 2]
    if k == 3:
        return [p for p in itertools.permutations(range(3))]
    raise ValueError(f"no assignment patterns for k={k}")


def encode_targets(labels, n_frames: int = 20, d_norm: float = D_NORM,
                   n_classes: int = N_CLASSES):
    """Encode window-local labels -> (canonical target, AssignmentSet).

    At most 3 simultaneous same-class events are representable; excess
    events are dropped deterministically in source_id order with a
    warning.
    """
    target = np.zeros((N_COMPONENTS, N_TRACKS, n_classes, n_frames))
    candidates = np.zeros((MAX_CANDIDATES, N_COMPONENTS, N_TRACKS, n_classes, n_frames))
    n_candidates = np.ones((n_classes, n_frames), dtype=np.int64)
    active = np.zeros((n_classes, n_frames), dtype=bool)

    cells: dict[tuple[int, int], list] = {}
    for lab in labels:
        if not 0 <= lab.frame < n_frames:
            raise ValueError(f"label frame {lab.frame} outside [0, {n_frames})")
        cells.setdefault((lab.class_id, lab.frame), []).append(lab)

    for (c, t), events in cells.items():
        events.sort(key=lambda lab: lab.source_id)
        if len(events) > N_TRACKS:
            warnings.warn(
                f"class {c} frame {t}: {len(events)} simultaneous events, "
                f"keeping the {N_TRACKS} lowest source ids"
            )
            events = events[:N_TRACKS]
        vecs = np.stack([
            np.concatenate([doa_to_cartesian(e.azimuth, e.elevation),
                            [np.clip(e.distance / d_norm, 0.0, 1.0)]])
            for e in events
        ])  # (k, 4)
        patterns = _assignment_patterns(len(events))
        for p, pattern in enumerate(patterns):
            candidates[p, :, :, c, t] = vecs[list(pattern)].T
        for p in range(len(patterns), MAX_CANDIDATES):
            candidates[p, :, :, c, t] = candidates[0, :, :, c, t]
        n_candidates[c, t] = len(patterns)
        active[c, t] = True
        target[:, :, c, t] = candidates[0, :, :, c, t]

    return target, AssignmentSet(candidates, n_candidates, active)
