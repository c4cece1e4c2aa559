"""3D SELD evaluation: decoding, matching and the composite score.

Detections are matched to references per (label frame, class) with an
optimal one-to-one assignment minimizing total angular error.  A matched
pair counts as a true positive only if its angular error is <= ``t_doa``
AND its relative distance error is <= ``t_rd``; angular and distance
errors accumulate over ALL matched pairs regardless of thresholds, so the
localization-error signal stays independent of the F-score thresholds.

The composite score combines error rate, thresholded F-score,
localization recall and localization error:

    seld = (ER + 2 - F - LR + LE / 180) / 4
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .labels import N_CLASSES, doa_to_cartesian
from .targets import D_NORM


@dataclass
class MetricsConfig:
    t_doa: float = 20.0             # degrees
    t_rd: float = 1.0               # relative distance ratio
    activity_threshold: float = 0.5
    merge_angle: float = 15.0       # cross-track duplicate suppression

    def __post_init__(self):
        for name in ("t_doa", "t_rd", "activity_threshold", "merge_angle"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class DetectionEvent:
    frame: int
    class_id: int
    doa: np.ndarray   # unit vector
    distance: float   # meters, >= 0


def angular_error(a, b) -> float:
    """Great-circle angle between two unit vectors, in degrees."""
    dot = float(np.clip(np.dot(a, b), -1.0, 1.0))
    return math.degrees(math.acos(dot))


def decode_multi_accdoa(pred: np.ndarray, cfg: MetricsConfig | None = None,
                        d_norm: float = D_NORM) -> list[DetectionEvent]:
    """Decode a (4, 3, C, T) multi-ACCDOA tensor into detection events.

    A (track, class, frame) slot is active when its DOA vector norm
    exceeds the activity threshold.  Active same-class detections within
    ``merge_angle`` of each other in a frame are merged (mean DOA
    renormalized, mean distance) to suppress cross-track duplicates.
    """
    cfg = cfg or MetricsConfig()
    pred = np.asarray(pred, dtype=np.float64)
    _, n_tracks, n_classes, n_frames = pred.shape
    events = []
    for t in range(n_frames):
        for c in range(n_classes):
            clusters: list[list] = []  # each: [sum_doa, [distances]]
            for n in range(n_tracks):
                v = pred[:3, n, c, t]
                norm = np.linalg.norm(v)
                if norm <= cfg.activity_threshold:
                    continue
                doa = v / norm
                dist = max(0.0, pred[3, n, c, t] * d_norm)
                for cluster in clusters:
                    mean_doa = cluster[0] / np.linalg.norm(cluster[0])
                    if angular_error(doa, mean_doa) <= cfg.merge_angle:
                        cluster[0] = cluster[0] + doa
                        cluster[1].append(dist)
                        break
                else:
                    clusters.append([doa.copy(), [dist]])
            for sum_doa, dists in clusters:
                events.append(DetectionEvent(
                    frame=t, class_id=c,
                    doa=sum_doa / np.linalg.norm(sum_doa),
                    distance=float(np.mean(dists)),
                ))
    return events


@dataclass
class MatchCounts:
    """Additive match statistics; summing partial counts == serial counting."""

    tp: int = 0
    fp: int = 0
    fn: int = 0
    s: int = 0   # substitutions
    d: int = 0   # deletions
    i: int = 0   # insertions
    sum_angles: float = 0.0
    sum_rde: float = 0.0
    n_matched: int = 0
    n_matched_dist: int = 0
    n_skipped_rde: int = 0
    n_ref: int = 0

    def __add__(self, other: "MatchCounts") -> "MatchCounts":
        return MatchCounts(*(getattr(self, f) + getattr(other, f)
                             for f in self.__dataclass_fields__))


def match_and_count(refs, preds, cfg: MetricsConfig | None = None) -> MatchCounts:
    """Match detections per (frame, class) and accumulate counts."""
    cfg = cfg or MetricsConfig()
    refs, preds = list(refs), list(preds)
    groups_ref = defaultdict(list)
    groups_pred = defaultdict(list)
    for ev in refs:
        groups_ref[(ev.frame, ev.class_id)].append(ev)
    for ev in preds:
        groups_pred[(ev.frame, ev.class_id)].append(ev)

    counts = MatchCounts(n_ref=len(refs))
    fn_per_frame: dict[int, int] = defaultdict(int)
    fp_per_frame: dict[int, int] = defaultdict(int)

    for key in sorted(set(groups_ref) | set(groups_pred)):
        frame = key[0]
        r, p = groups_ref.get(key, []), groups_pred.get(key, [])
        if r and p:
            cost = np.array([[angular_error(a.doa, b.doa) for b in p] for a in r])
            rows, cols = linear_sum_assignment(cost)
        else:
            rows, cols = np.array([], dtype=int), np.array([], dtype=int)
        for ri, pi in zip(rows, cols):
            angle = cost[ri, pi]
            counts.sum_angles += angle
            counts.n_matched += 1
            rde = None
            if r[ri].distance > 0:
                rde = abs(p[pi].distance - r[ri].distance) / r[ri].distance
                counts.sum_rde += rde
                counts.n_matched_dist += 1
            else:
                counts.n_skipped_rde += 1
            if angle <= cfg.t_doa and rde is not None and rde <= cfg.t_rd:
                counts.tp += 1
            else:
                counts.fn += 1
                counts.fp += 1
                fn_per_frame[frame] += 1
                fp_per_frame[frame] += 1
        unmatched_r = len(r) - len(rows)
        unmatched_p = len(p) - len(cols)
        counts.fn += unmatched_r
        counts.fp += unmatched_p
        fn_per_frame[frame] += unmatched_r
        fp_per_frame[frame] += unmatched_p

    for frame in set(fn_per_frame) | set(fp_per_frame):
        fn_f, fp_f = fn_per_frame[frame], fp_per_frame[frame]
        counts.s += min(fn_f, fp_f)
        counts.d += max(0, fn_f - fp_f)
        counts.i += max(0, fp_f - fn_f)
    return counts


@dataclass
class MetricsReport:
    f_20_1: float       # percent
    ae: float           # degrees
    rde: float          # ratio
    seld_score: float
    sub: dict = field(default_factory=dict)  # er_20, f_20, le_cd, lr_cd
    defined: bool = True

    def to_dict(self) -> dict:
        return {"f_20_1": self.f_20_1, "ae": self.ae, "rde": self.rde,
                "seld_score": self.seld_score, "sub": dict(self.sub),
                "defined": self.defined}


def compute_report(counts: MatchCounts, cfg: MetricsConfig | None = None) -> MetricsReport:
    """Reduce accumulated counts to the metric report.

    Sentinels for empty matched sets: AE = 180 degrees, RDE = 1.0.  With
    no reference events the report is flagged undefined instead of
    dividing by zero.
    """
    cfg = cfg or MetricsConfig()
    ae = counts.sum_angles / counts.n_matched if counts.n_matched else 180.0
    rde = counts.sum_rde / counts.n_matched_dist if counts.n_matched_dist else 1.0
    denom_f = 2 * counts.tp + counts.fp + counts.fn
    f = 2 * counts.tp / denom_f if denom_f else 0.0
    if counts.n_ref == 0:
        return MetricsReport(f_20_1=f * 100.0, ae=ae, rde=rde, seld_score=math.nan,
                             sub={"er_20": math.nan, "f_20": f,
                                  "le_cd": ae, "lr_cd": math.nan},
                             defined=False)
    lr = counts.tp / (counts.tp + counts.fn)
    er = (counts.s + counts.d + counts.i) / counts.n_ref
    seld = (er + 2.0 - f - lr + ae / 180.0) / 4.0
    return MetricsReport(
        f_20_1=f * 100.0, ae=ae, rde=rde, seld_score=seld,
        sub={"er_20": er, "f_20": f, "le_cd": ae, "lr_cd": lr},
    )


def events_from_labels(labels) -> list[DetectionEvent]:
    """Reference detections from annotation labels."""
    return [DetectionEvent(frame=lab.frame, class_id=lab.class_id,
                           doa=doa_to_cartesian(lab.azimuth, lab.elevation),
                           distance=lab.distance)
            for lab in labels]


def evaluate(refs, preds, cfg: MetricsConfig | None = None) -> MetricsReport:
    """Convenience: match + report in one call."""
    return compute_report(match_and_count(refs, preds, cfg), cfg)
