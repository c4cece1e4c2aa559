"""Training support: loss/gradient plumbing, gradient checking, overfit demo.

The network's parameter gradients are exact reverse-mode derivatives of
the ADPIT loss composed with the forward pass: the loss gradient with
respect to the prediction is computed in closed form (`loss.adpit_loss_grad`)
and propagated through the network graph.  `gradient_check` validates the
whole composite against central finite differences.
"""

from __future__ import annotations

import numpy as np
import torch

from .labels import N_CLASSES, EventLabel
from .loss import LossBreakdown, adpit_loss, adpit_loss_grad
from .model import DTYPE, ModelConfig, SCConvCST, build_model
from .targets import AssignmentSet, encode_targets


def toy_config(seed: int = 0) -> ModelConfig:
    """Small config for CPU gradient checks and overfit runs."""
    return ModelConfig(embed_ch=16, n_blocks=1, n_heads=4, chan_attn_dim=32, seed=seed)


def compute_loss_and_grad(model: SCConvCST, x: torch.Tensor,
                          assignment_sets, reduction: str = "sum"):
    """Forward + loss over a batch; fills ``param.grad`` in place.

    ``assignment_sets`` holds one AssignmentSet per batch sample.  With
    ``reduction="sum"`` the batch loss (and gradient) is the sum of the
    per-sample totals; "mean" divides by the batch size.

    Returns (batch loss value, list of per-sample LossBreakdown).
    """
    if isinstance(assignment_sets, AssignmentSet):
        assignment_sets = [assignment_sets]
    if reduction not in ("sum", "mean"):
        raise ValueError(f"unknown reduction {reduction!r}")
    if x.shape[0] != len(assignment_sets):
        raise ValueError(f"batch size {x.shape[0]} != {len(assignment_sets)} assignment sets")

    model.zero_grad(set_to_none=True)
    pred = model(x)
    pred_np = pred.detach().cpu().numpy()
    scale = 1.0 if reduction == "sum" else 1.0 / x.shape[0]
    breakdowns = []
    grads = np.empty_like(pred_np)
    for i, aset in enumerate(assignment_sets):
        breakdowns.append(adpit_loss(pred_np[i], aset))
        grads[i] = scale * adpit_loss_grad(pred_np[i], aset)
    pred.backward(torch.from_numpy(grads).to(pred.dtype))
    total = scale * sum(b.total for b in breakdowns)
    return total, breakdowns


def batch_loss_value(model: SCConvCST, x: torch.Tensor,
                     assignment_sets, reduction: str = "sum") -> float:
    """Loss only, no gradients (used by the finite-difference oracle)."""
    if isinstance(assignment_sets, AssignmentSet):
        assignment_sets = [assignment_sets]
    with torch.no_grad():
        pred_np = model(x).cpu().numpy()
    scale = 1.0 if reduction == "sum" else 1.0 / x.shape[0]
    return scale * sum(adpit_loss(pred_np[i], aset).total
                       for i, aset in enumerate(assignment_sets))


def synthetic_segment(seed: int = 0, n_events: int = 4,
                      cfg: ModelConfig | None = None):
    """Deterministic random features plus a handful of labels."""
    cfg = cfg or toy_config(seed)
    rng = np.random.default_rng(seed)
    features = rng.standard_normal((cfg.in_ch, cfg.t_in, cfg.f_in))
    labels = []
    for k in range(n_events):
        labels.append(EventLabel(
            frame=int(rng.integers(0, cfg.t_out)),
            class_id=int(rng.integers(0, N_CLASSES)),
            source_id=k,
            azimuth=float(rng.uniform(-180.0, 180.0)),
            elevation=float(rng.uniform(-90.0, 90.0)),
            distance=float(rng.uniform(0.5, 9.5)),
        ))
    return features, labels


def gradient_check(cfg: ModelConfig | None = None, n_samples: int = 200,
                   h: float = 1e-4, seed: int = 0) -> dict:
    """Central-difference check of every-parameter gradients.

    Samples ``n_samples`` random (parameter, element) coordinates and
    compares the analytic gradient with ``(L(p+h) - L(p-h)) / 2h`` in
    float64.  The relative-error denominator is floored at 1e-3 so that
    near-zero gradients, where finite differences are pure roundoff, are
    effectively compared at 1e-7 absolute.
    """
    cfg = cfg or toy_config(seed)
    model = build_model(cfg)
    rng = np.random.default_rng(seed)
    features, labels = synthetic_segment(seed, cfg=cfg)
    _, aset = encode_targets(labels, n_frames=cfg.t_out)
    x = torch.from_numpy(features[None]).to(DTYPE)

    compute_loss_and_grad(model, x, aset)
    params = list(model.parameters())
    analytic = [p.grad.detach().clone() for p in params]

    sizes = np.array([p.numel() for p in params])
    flat_choices = rng.choice(int(sizes.sum()), size=min(n_samples, int(sizes.sum())),
                              replace=False)
    bounds = np.cumsum(sizes)
    max_rel = 0.0
    worst = None
    with torch.no_grad():
        for flat in flat_choices:
            pi = int(np.searchsorted(bounds, flat, side="right"))
            ei = int(flat - (bounds[pi - 1] if pi else 0))
            p = params[pi].view(-1)
            orig = p[ei].item()
            p[ei] = orig + h
            lp = batch_loss_value(model, x, aset)
            p[ei] = orig - h
            lm = batch_loss_value(model, x, aset)
            p[ei] = orig
            fd = (lp - lm) / (2.0 * h)
            a = analytic[pi].view(-1)[ei].item()
            rel = abs(a - fd) / max(abs(a), abs(fd), 1e-3)
            if rel > max_rel:
                max_rel, worst = rel, (pi, ei, a, fd)
    return {"max_rel_err": max_rel, "n_checked": len(flat_choices), "worst": worst}


def overfit_demo(cfg: ModelConfig | None = None, features: np.ndarray | None = None,
                 labels=None, steps: int = 500, lr: float = 1e-2,
                 seed: int = 0) -> np.ndarray:
    """Plain gradient descent on a single segment; returns the loss trace.

    ``trace[k]`` is the loss evaluated before update ``k``; with
    ``lr=0`` the trace is flat.
    """
    cfg = cfg or toy_config(seed)
    if features is None or labels is None:
        features, labels = synthetic_segment(seed, cfg=cfg)
    model = build_model(cfg)
    _, aset = encode_targets(labels, n_frames=cfg.t_out)
    x = torch.from_numpy(np.asarray(features, dtype=np.float64)[None]).to(DTYPE)

    trace = np.empty(steps)
    for step in range(steps):
        total, _ = compute_loss_and_grad(model, x, aset)
        trace[step] = total
        with torch.no_grad():
            for p in model.parameters():
                p -= lr * p.grad
    return trace
