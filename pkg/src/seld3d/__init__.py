"""1-second 3D sound event localization and detection toolkit.

Subsystems: perceptual filter-bank features over FOA audio
(`filterbanks`, `stft`, `features`), multi-ACCDOA target encoding
(`labels`, `targets`), the ADPIT loss (`loss`), DCASE-style evaluation
(`metrics`), and a compact SCConv-CST network (`model`, `train`), all
reachable through the `seld3d` command line tool (`cli`).
"""

__version__ = "0.1.0"

from .audio import AudioClip, read_foa_wav
from .filterbanks import FilterBank, design_bank
from .stft import ComplexSpectrogram, StftConfig, stft
from .features import assemble_features
from .labels import EventLabel, Segment, load_labels, segment_clip
from .targets import AssignmentSet, encode_targets
from .loss import LossBreakdown, adpit_loss, adpit_loss_grad
from .metrics import (DetectionEvent, MetricsConfig, MetricsReport,
                      angular_error, compute_report, decode_multi_accdoa,
                      evaluate, match_and_count)
from .model import ModelConfig, SCConvCST, build_model, param_count
