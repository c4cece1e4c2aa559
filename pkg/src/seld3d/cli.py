"""`seld3d` command line tool.

Subcommands cover the pipeline end to end::

    seld3d features extract --filter mel --in clip.wav --out feat.seldt
    seld3d filterbank dump --filter gammatone --csv bank.csv
    seld3d encode --labels labels.csv --out target.seldt
    seld3d loss eval --pred pred.seldt --labels seg.json
    seld3d metrics eval --pred pred.seldt --ref labels.json --out report.json
    seld3d model {forward,gradcheck,overfit,params} --cfg cfg.toml ...
    seld3d compare --filters mel,bark,gammatone --pred-dir P --ref-dir R

Exit codes: 0 success, 1 validation/usage error, 2 I/O error.  Every
output file gets a ``.manifest.json`` provenance sidecar, and the
``SELD_SEED`` environment variable overrides configured seeds.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, seldt
from .audio import read_foa_wav
from .features import assemble_features
from .filterbanks import BANK_KINDS, design_bank
from .labels import labels_from_json, labels_to_json, load_labels
from .loss import adpit_loss
from .manifest import Stopwatch, write_manifest
from .metrics import (MetricsConfig, compute_report, decode_multi_accdoa,
                      events_from_labels, match_and_count)
from .stft import StftConfig
from .targets import D_NORM, encode_targets


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _env_seed(default):
    value = os.environ.get("SELD_SEED")
    return int(value) if value else default


def _emit(doc: dict, as_json: bool) -> None:
    if as_json:
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        for key, value in doc.items():
            print(f"{key}: {value}")


def build_parser() -> _Parser:
    parser = _Parser(prog="seld3d", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command")

    feats = sub.add_parser("features", help="feature extraction").add_subparsers(dest="action")
    p = feats.add_parser("extract")
    p.add_argument("--filter", choices=BANK_KINDS, required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_features_extract)

    fb = sub.add_parser("filterbank", help="filter bank inspection").add_subparsers(dest="action")
    p = fb.add_parser("dump")
    p.add_argument("--filter", choices=BANK_KINDS, required=True)
    p.add_argument("--csv", required=True, help="output path, or - for stdout")
    p.add_argument("--bands", type=int, default=128)
    p.set_defaults(fn=cmd_filterbank_dump)

    p = sub.add_parser("encode", help="encode labels to a multi-ACCDOA target")
    p.add_argument("--labels", required=True, help="label CSV")
    p.add_argument("--out", required=True, help="target SELDT path")
    p.add_argument("--sidecar", help="label JSON sidecar path (default <out>.json)")
    p.add_argument("--frames", type=int, default=20)
    p.add_argument("--d-norm", type=float, default=D_NORM)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_encode)

    lo = sub.add_parser("loss", help="ADPIT loss evaluation").add_subparsers(dest="action")
    p = lo.add_parser("eval")
    p.add_argument("--pred", required=True)
    p.add_argument("--labels", required=True, help="label JSON sidecar")
    p.add_argument("--d-norm", type=float, default=D_NORM)
    p.set_defaults(fn=cmd_loss_eval)

    me = sub.add_parser("metrics", help="3D SELD metrics").add_subparsers(dest="action")
    p = me.add_parser("eval")
    p.add_argument("--pred", required=True)
    p.add_argument("--ref", required=True, help="reference label JSON")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--csv", help="also emit a one-row CSV (path or -)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_metrics_eval)

    mo = sub.add_parser("model", help="network operations").add_subparsers(dest="action")
    p = mo.add_parser("forward")
    p.add_argument("--cfg", help="model config TOML/JSON (default full-size)")
    p.add_argument("--in", dest="infile", required=True, help="feature SELDT")
    p.add_argument("--out", required=True, help="prediction SELDT")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_model_forward)
    p = mo.add_parser("gradcheck")
    p.add_argument("--cfg", help="model config (default toy)")
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_model_gradcheck)
    p = mo.add_parser("overfit")
    p.add_argument("--cfg", help="model config (default toy)")
    p.add_argument("--seg", required=True, help="segment JSON (labels, optional feature path)")
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_model_overfit)
    p = mo.add_parser("params")
    p.add_argument("--cfg", help="model config (default full-size)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_model_params)

    p = sub.add_parser("compare", help="tabulate metrics per filter bank")
    p.add_argument("--filters", default="mel,bark,gammatone")
    p.add_argument("--pred-dir", required=True, help="directory of <filter>.seldt predictions")
    p.add_argument("--ref-dir", required=True, help="directory of <filter>.json references")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(fn=cmd_compare)

    return parser


# --- commands ----------------------------------------------------------

def cmd_features_extract(args) -> int:
    clip = read_foa_wav(args.infile)
    bank = design_bank(args.filter, sample_rate=clip.sample_rate)
    with Stopwatch() as sw:
        fmap = assemble_features(clip, StftConfig.for_rate(clip.sample_rate), bank)
    seldt.write_seldt(args.out, fmap)
    write_manifest(args.out, "features extract", inputs=[args.infile],
                   configs={"filter": args.filter}, wall_time=sw.elapsed)
    _emit({"out": args.out, "shape": list(fmap.shape), "filter": args.filter},
          args.json)
    return 0


def cmd_filterbank_dump(args) -> int:
    bank = design_bank(args.filter, n_bands=args.bands)
    rows = "\n".join(",".join(f"{w:.9g}" for w in row) for row in bank.weights)
    if args.csv == "-":
        print(rows)
    else:
        with open(args.csv, "w") as fh:
            fh.write(rows + "\n")
        write_manifest(args.csv, "filterbank dump",
                       configs={"filter": args.filter, "bands": args.bands})
    return 0


def cmd_encode(args) -> int:
    labels = load_labels(args.labels)
    target, _ = encode_targets(labels, n_frames=args.frames, d_norm=args.d_norm)
    seldt.write_seldt(args.out, target)
    sidecar = args.sidecar or f"{args.out}.json"
    with open(sidecar, "w") as fh:
        fh.write(labels_to_json(labels, d_norm=args.d_norm, n_frames=args.frames))
    write_manifest(args.out, "encode", inputs=[args.labels],
                   configs={"d_norm": args.d_norm, "frames": args.frames})
    _emit({"out": args.out, "sidecar": sidecar, "n_labels": len(labels)}, args.json)
    return 0


def cmd_loss_eval(args) -> int:
    pred = seldt.read_seldt(args.pred).astype(np.float64)
    doc = json.load(open(args.labels))
    labels = labels_from_json(doc)
    n_frames = int(doc.get("n_frames", pred.shape[-1]))
    d_norm = float(doc.get("d_norm", args.d_norm))
    _, aset = encode_targets(labels, n_frames=n_frames, d_norm=d_norm)
    breakdown = adpit_loss(pred, aset)
    print(json.dumps({"total": breakdown.total,
                      "per_class": breakdown.per_class.tolist()}, indent=2))
    return 0


def _report_for(pred_path, ref_path):
    pred = seldt.read_seldt(pred_path).astype(np.float64)
    doc = json.load(open(ref_path))
    refs = events_from_labels(labels_from_json(doc))
    cfg = MetricsConfig()
    d_norm = float(doc.get("d_norm", D_NORM))
    preds = decode_multi_accdoa(pred, cfg, d_norm=d_norm)
    return compute_report(match_and_count(refs, preds, cfg), cfg)


def cmd_metrics_eval(args) -> int:
    report = _report_for(args.pred, args.ref)
    with open(args.out, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2)
    write_manifest(args.out, "metrics eval", inputs=[args.pred, args.ref])
    if args.csv:
        line = (f"f20_1,ae,rde,seld\n{report.f_20_1:.6g},{report.ae:.6g},"
                f"{report.rde:.6g},{report.seld_score:.6g}\n")
        if args.csv == "-":
            print(line, end="")
        else:
            with open(args.csv, "w") as fh:
                fh.write(line)
    _emit(report.to_dict(), args.json)
    return 0


def _load_model_cfg(path, toy: bool):
    from .model import ModelConfig
    from .train import toy_config
    if path:
        cfg = ModelConfig.from_file(path)
    else:
        cfg = toy_config() if toy else ModelConfig()
    cfg.seed = _env_seed(cfg.seed)
    return cfg


def cmd_model_forward(args) -> int:
    import torch

    from .model import DTYPE, build_model

    cfg = _load_model_cfg(args.cfg, toy=False)
    fmap = seldt.read_seldt(args.infile).astype(np.float64)
    if fmap.ndim == 3:
        fmap = fmap[None]
    model = build_model(cfg)
    with torch.no_grad():
        pred = model(torch.from_numpy(fmap).to(DTYPE)).cpu().numpy()
    if pred.shape[0] == 1:
        pred = pred[0]
    seldt.write_seldt(args.out, pred)
    write_manifest(args.out, "model forward", inputs=[args.infile],
                   configs={"model": cfg.to_dict()}, seed=cfg.seed)
    _emit({"out": args.out, "shape": list(pred.shape)}, args.json)
    return 0


def cmd_model_gradcheck(args) -> int:
    from .train import gradient_check

    cfg = _load_model_cfg(args.cfg, toy=True)
    result = gradient_check(cfg, n_samples=args.samples, seed=cfg.seed)
    ok = result["max_rel_err"] < 1e-4
    _emit({"max_rel_err": result["max_rel_err"], "n_checked": result["n_checked"],
           "pass": ok}, args.json)
    return 0 if ok else 1


def cmd_model_overfit(args) -> int:
    from .train import overfit_demo, synthetic_segment

    cfg = _load_model_cfg(args.cfg, toy=True)
    doc = json.load(open(args.seg))
    labels = labels_from_json(doc)
    if "feature" in doc:
        features = seldt.read_seldt(doc["feature"]).astype(np.float64)
    else:
        features, _ = synthetic_segment(cfg.seed, cfg=cfg)
    trace = overfit_demo(cfg, features, labels, steps=args.steps, lr=args.lr)
    _emit({"initial_loss": trace[0], "final_loss": trace[-1],
           "ratio": trace[-1] / trace[0], "steps": args.steps}, args.json)
    return 0


def cmd_model_params(args) -> int:
    from .model import param_count

    cfg = _load_model_cfg(args.cfg, toy=False)
    _emit({"param_count": param_count(cfg)}, args.json)
    return 0


def cmd_compare(args) -> int:
    filters = [f.strip() for f in args.filters.split(",") if f.strip()]
    lines = ["filter,f20_1,ae,rde,seld"]
    inputs = []
    for name in filters:
        pred_path = os.path.join(args.pred_dir, f"{name}.seldt")
        ref_path = os.path.join(args.ref_dir, f"{name}.json")
        for path in (pred_path, ref_path):
            if not os.path.exists(path):
                raise FileNotFoundError(path)
        inputs += [pred_path, ref_path]
        report = _report_for(pred_path, ref_path)
        lines.append(f"{name},{report.f_20_1:.6g},{report.ae:.6g},"
                     f"{report.rde:.6g},{report.seld_score:.6g}")
    table = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(table)
        write_manifest(args.out, "compare", inputs=inputs,
                       configs={"filters": filters})
    else:
        print(table, end="")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    if not getattr(args, "fn", None):
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.fn(args)
    except FileNotFoundError as exc:
        print(f"error: missing file: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
