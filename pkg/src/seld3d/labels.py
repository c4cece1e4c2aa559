"""Frame-level event annotations and 1-second segmentation.

Labels live on a 50 ms hop (20 frames per second-long segment) while
features live on a 10 ms hop (100 frames per segment).  CSV rows are
``frame,class,source,azimuth,elevation,distance`` with azimuth in
[-180, 180) degrees, elevation in [-90, 90] and distance in meters.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

N_CLASSES = 13
LABEL_RATE = 20      # label frames per second
FEATURE_RATE = 100   # STFT frames per second


class LabelParseError(ValueError):
    """Malformed or invariant-violating label row; carries the 1-based line."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass
class EventLabel:
    frame: int
    class_id: int
    source_id: int
    azimuth: float    # degrees, [-180, 180)
    elevation: float  # degrees, [-90, 90]
    distance: float   # meters, > 0

    def validate(self, line_no: int = 0) -> "EventLabel":
        if self.frame < 0:
            raise LabelParseError(line_no, f"frame must be >= 0, got {self.frame}")
        if not 0 <= self.class_id < N_CLASSES:
            raise LabelParseError(
                line_no, f"class {self.class_id} out of range [0, {N_CLASSES})"
            )
        if not -180.0 <= self.azimuth < 180.0:
            raise LabelParseError(line_no, f"azimuth {self.azimuth} outside [-180, 180)")
        if not -90.0 <= self.elevation <= 90.0:
            raise LabelParseError(line_no, f"elevation {self.elevation} outside [-90, 90]")
        if not (math.isfinite(self.distance) and self.distance > 0):
            raise LabelParseError(line_no, f"distance must be finite and > 0, got {self.distance}")
        return self


def load_labels(source) -> list[EventLabel]:
    """Parse labels from a path, text stream, or string of CSV rows."""
    if isinstance(source, str) and "\n" not in source and "," not in source:
        with open(source, newline="") as fh:
            return _parse(fh)
    if isinstance(source, str):
        return _parse(io.StringIO(source))
    return _parse(source)


def _parse(stream) -> list[EventLabel]:
    labels = []
    for line_no, row in enumerate(csv.reader(stream), start=1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 6:
            raise LabelParseError(line_no, f"expected 6 fields, got {len(row)}")
        try:
            label = EventLabel(
                frame=int(row[0]), class_id=int(row[1]), source_id=int(row[2]),
                azimuth=float(row[3]), elevation=float(row[4]), distance=float(row[5]),
            )
        except ValueError as exc:
            raise LabelParseError(line_no, f"unparseable field ({exc})") from exc
        labels.append(label.validate(line_no))
    return labels


def doa_to_cartesian(azimuth: float, elevation: float) -> np.ndarray:
    """(az, el) in degrees -> unit vector (x, y, z)."""
    az, el = np.deg2rad(azimuth), np.deg2rad(elevation)
    return np.array([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])


def cartesian_to_doa(v) -> tuple[float, float]:
    """Unit vector -> (azimuth, elevation) in degrees, azimuth in [-180, 180)."""
    x, y, z = np.asarray(v, dtype=np.float64)
    az = math.degrees(math.atan2(y, x))
    if az >= 180.0:
        az -= 360.0
    el = math.degrees(math.asin(max(-1.0, min(1.0, z))))
    return az, el


@dataclass
class Segment:
    """One 1-second window: 100 feature frames, 20 label frames."""

    clip_id: str
    start_frame: int                 # in 50 ms label frames
    feature: np.ndarray              # (7, 100, n_bands)
    labels: list = field(default_factory=list)  # EventLabel, frame in [0, 20)


def segment_clip(features: np.ndarray, labels, seg_len_s: float = 1.0,
                 clip_id: str = "clip") -> list[Segment]:
    """Cut a clip into consecutive non-overlapping 1-second segments.

    The trailing partial window is dropped; label frames are re-based to
    be window-local.
    """
    feat_win = int(round(seg_len_s * FEATURE_RATE))
    label_win = int(round(seg_len_s * LABEL_RATE))
    n_segments = features.shape[1] // feat_win
    segments = []
    for i in range(n_segments):
        lo, hi = i * label_win, (i + 1) * label_win
        local = [
            EventLabel(lab.frame - lo, lab.class_id, lab.source_id,
                       lab.azimuth, lab.elevation, lab.distance)
            for lab in labels if lo <= lab.frame < hi
        ]
        segments.append(Segment(
            clip_id=clip_id, start_frame=lo,
            feature=features[:, i * feat_win:(i + 1) * feat_win, :],
            labels=local,
        ))
    return segments


# --- JSON sidecar ------------------------------------------------------

def labels_to_json(labels, **extra) -> str:
    doc = {"labels": [asdict(lab) for lab in labels]}
    doc.update(extra)
    return json.dumps(doc, indent=2)


def labels_from_json(text_or_doc) -> list[EventLabel]:
    doc = json.loads(text_or_doc) if isinstance(text_or_doc, str) else text_or_doc
    return [
        EventLabel(**{k: rec[k] for k in
                      ("frame", "class_id", "source_id", "azimuth", "elevation", "distance")}
                   ).validate(i + 1)
        for i, rec in enumerate(doc["labels"])
    ]
