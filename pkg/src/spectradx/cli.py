"""The ``spectradx`` command line: seeded, file-based experiment drivers.

Subcommands: ``simulate``, ``sas``, ``flow`` (gen-corpus / train / refine /
eval), ``diagnose``, ``eval-cls``.  All randomness flows from ``--seed``;
reruns with identical flags produce byte-identical artifacts.  Exit codes:
0 success, 2 usage or config error, 3 data integrity error, 4 domain error
(e.g. a mask region too small to analyze).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import io as sxio
from .classifier import ClassifierTrainConfig  # noqa: F401  (re-exported for config docs)
from .corpus import CorruptionConfig, gen_mask_corpus
from .errors import (
    DataIntegrityError,
    FormatError,
    ShapeMismatchError,
    SpectraDxError,
    TooSmallRegionError,
)
from .flow import ConditioningFeatures, binarize, euler_refine
from .metrics import ConfusionCounts, classification_metrics, dice_iou, pr_curve, roc_curve
from .pipeline import PatchProjectionProvider, diagnose_image
from .simulate import EnsembleConfig, SpikeSpec, run_ensemble
from .spectral import FeatureMatrix, spectral_report
from .velocity import FlowTrainConfig, train_flow

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_DOMAIN = 4


class ConfigError(SpectraDxError):
    pass


def resolve_threads(n_tasks: int) -> int:
    """Worker count: capped by SPECTRA_DX_THREADS (0 or unset = auto)."""
    raw = os.environ.get("SPECTRA_DX_THREADS", "0")
    try:
        cap = int(raw)
    except ValueError:
        raise ConfigError(f"SPECTRA_DX_THREADS must be an integer, got {raw!r}")
    if cap < 0:
        raise ConfigError("SPECTRA_DX_THREADS must be >= 0")
    if cap == 0:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_tasks))


def _merge_config(args: argparse.Namespace, defaults: dict) -> dict:
    """defaults < config-file values < explicitly passed flags."""
    merged = dict(defaults)
    if getattr(args, "config", None):
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}")
        unknown = set(file_cfg) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged.update(file_cfg)
    for key in defaults:
        val = getattr(args, key.replace("-", "_"), None)
        if val is not None:
            merged[key] = val
    return merged


def _outdir(cfg: dict) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    sxio.dump_json(out / "config.json", cfg)
    return out


# --- simulate ---------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = _merge_config(args, {
        "n": None, "p": None, "trials": 20, "seed": 0,
        "spike": [], "edge_tol": 0.0, "out": "simulate_out",
    })
    if not cfg["n"] or not cfg["p"]:
        raise ConfigError("--n and --p are required")
    spike = SpikeSpec(tuple(cfg["spike"])) if cfg["spike"] else None
    ens = EnsembleConfig(
        n_samples=int(cfg["n"]), n_features=int(cfg["p"]),
        spike=spike, seed=int(cfg["seed"]), n_trials=int(cfg["trials"]),
    )
    out = _outdir(cfg)
    reports = run_ensemble(ens, edge_tolerance=cfg["edge_tol"], workers=resolve_threads(ens.n_trials))
    with open(out / "reports.jsonl", "w") as fh:
        for rep in reports:
            fh.write(json.dumps(sxio.report_to_dict(rep), sort_keys=True) + "\n")
    sas = np.array([r.sas for r in reports])
    detected = np.array([len(r.outliers) > 0 for r in reports])
    sxio.dump_json(out / "summary.json", {
        "n_trials": len(reports),
        "mean_sas": float(sas.mean()),
        "max_sas": float(sas.max()),
        "detection_rate": float(detected.mean()),
        "lambda_plus": reports[0].mp.lambda_plus,
        "aspect_ratio": reports[0].mp.aspect_ratio,
    })
    all_eigs = np.concatenate([r.eigenvalues for r in reports])
    hist, edges = np.histogram(all_eigs, bins=60)
    lines = [f"{repr(float(edges[i]))},{repr(float(edges[i + 1]))},{int(hist[i])}"
             for i in range(len(hist))]
    (out / "esd_hist.csv").write_text("bin_left,bin_right,count\n" + "\n".join(lines) + "\n")
    print(f"simulate: {len(reports)} trials, mean SAS {sas.mean():.6f}, "
          f"detection rate {detected.mean():.3f}")
    return EXIT_OK


# --- sas --------------------------------------------------------------------

def cmd_sas(args) -> int:
    fm = sxio.load_feature_file(args.input)
    report = spectral_report(fm, edge_tolerance=args.edge_tol)
    payload = json.dumps(sxio.report_to_dict(report), sort_keys=True, indent=2)
    if args.out:
        Path(args.out).write_text(payload + "\n")
    else:
        print(payload)
    return EXIT_OK


# --- flow -------------------------------------------------------------------

def _load_corpus(corpus_dir: Path):
    manifest = json.loads((corpus_dir / "manifest.json").read_text())
    text_vec = np.array(manifest["text_vec"])
    c = int(manifest["cond_dim"])
    pairs = []
    for entry in manifest["pairs"]:
        coarse = sxio.read_pgm(corpus_dir / entry["coarse"])
        gt = sxio.read_pgm(corpus_dir / entry["gt"])
        grid = sxio.read_feature_binary(corpus_dir / entry["cond"]).data.reshape(
            coarse.shape[0], coarse.shape[1], c
        )
        pairs.append((coarse, gt, ConditioningFeatures(text_vec, grid)))
    return pairs


def cmd_flow_gen_corpus(args) -> int:
    cfg = _merge_config(args, {
        "n": 50, "height": 32, "width": 32, "seed": 0, "cond_dim": 8,
        "dilate_px": 2, "erode_px": 2, "noise_sd": 0.2, "drop_prob": 0.1,
        "out": "corpus_out",
    })
    out = _outdir(cfg)
    corruption = CorruptionConfig(
        dilate_px=int(cfg["dilate_px"]), erode_px=int(cfg["erode_px"]),
        noise_sd=float(cfg["noise_sd"]), drop_prob=float(cfg["drop_prob"]),
    )
    pairs = gen_mask_corpus(
        int(cfg["n"]), int(cfg["height"]), int(cfg["width"]),
        corruption=corruption, seed=int(cfg["seed"]), cond_dim=int(cfg["cond_dim"]),
    )
    entries = []
    for i, (coarse, gt, cond) in enumerate(pairs):
        names = {
            "coarse": f"{i:04d}_coarse.pgm",
            "gt": f"{i:04d}_gt.pgm",
            "cond": f"{i:04d}_cond.bin",
        }
        sxio.write_pgm(out / names["coarse"], coarse)
        sxio.write_pgm(out / names["gt"], gt)
        sxio.write_feature_binary(
            out / names["cond"], FeatureMatrix(cond.img_grid.reshape(-1, cond.img_grid.shape[2]))
        )
        entries.append(names)
    sxio.dump_json(out / "manifest.json", {
        "height": int(cfg["height"]), "width": int(cfg["width"]),
        "cond_dim": int(cfg["cond_dim"]),
        "text_vec": [float(v) for v in pairs[0].cond.text_vec],
        "pairs": entries,
    })
    print(f"gen-corpus: wrote {len(pairs)} pairs to {out}")
    return EXIT_OK


def cmd_flow_train(args) -> int:
    cfg = _merge_config(args, {
        "corpus": None, "lr": 0.05, "steps": 2000, "batch": 8,
        "t_per_sample": 4, "seed": 0, "out": "flow_model",
    })
    if not cfg["corpus"]:
        raise ConfigError("--corpus is required")
    pairs = _load_corpus(Path(cfg["corpus"]))
    out = _outdir(cfg)
    result = train_flow(pairs, FlowTrainConfig(
        lr=float(cfg["lr"]), steps=int(cfg["steps"]), batch=int(cfg["batch"]),
        t_per_sample=int(cfg["t_per_sample"]), seed=int(cfg["seed"]),
    ))
    sxio.save_flow_model(result.model, out / "model.spdx", out / "model.json")
    curve = "\n".join(f"{i},{repr(float(v))}" for i, v in enumerate(result.step_losses))
    (out / "loss_curve.csv").write_text("step,loss\n" + curve + "\n")
    sxio.dump_json(out / "train_summary.json", {
        "initial_loss": result.initial_loss,
        "final_loss": result.final_loss,
        "steps": int(cfg["steps"]),
    })
    print(f"train: loss {result.initial_loss:.6f} -> {result.final_loss:.6f}")
    return EXIT_OK


def cmd_flow_refine(args) -> int:
    cfg = _merge_config(args, {
        "corpus": None, "model": None, "steps": 10, "out": "refined_out",
    })
    if not cfg["corpus"] or not cfg["model"]:
        raise ConfigError("--corpus and --model are required")
    model_dir = Path(cfg["model"])
    model = sxio.load_flow_model(model_dir / "model.spdx", model_dir / "model.json")
    pairs = _load_corpus(Path(cfg["corpus"]))
    out = _outdir(cfg)
    for i, (coarse, _, cond) in enumerate(pairs):
        refined = euler_refine(model, coarse, cond, int(cfg["steps"]))
        sxio.write_pgm(out / f"{i:04d}_refined.pgm", refined)
    print(f"refine: wrote {len(pairs)} refined masks to {out}")
    return EXIT_OK


def cmd_flow_eval(args) -> int:
    cfg = _merge_config(args, {
        "corpus": None, "refined": None, "threshold": 0.5, "out": "flow_eval",
    })
    if not cfg["corpus"] or not cfg["refined"]:
        raise ConfigError("--corpus and --refined are required")
    pairs = _load_corpus(Path(cfg["corpus"]))
    refined_dir = Path(cfg["refined"])
    out = _outdir(cfg)
    tau = float(cfg["threshold"])
    per_pair = []
    for i, (coarse, gt, _) in enumerate(pairs):
        refined = sxio.read_pgm(refined_dir / f"{i:04d}_refined.pgm")
        d_c, i_c = dice_iou(binarize(coarse, tau), gt)
        d_r, i_r = dice_iou(binarize(refined, tau), gt)
        per_pair.append({
            "pair": i, "coarse_dice": d_c, "coarse_iou": i_c,
            "refined_dice": d_r, "refined_iou": i_r,
        })
    mean = lambda key: float(np.mean([e[key] for e in per_pair]))  # noqa: E731
    sxio.dump_json(out / "eval.json", {
        "pairs": per_pair,
        "mean_coarse_dice": mean("coarse_dice"),
        "mean_refined_dice": mean("refined_dice"),
        "mean_coarse_iou": mean("coarse_iou"),
        "mean_refined_iou": mean("refined_iou"),
    })
    print(f"eval: mean dice coarse {mean('coarse_dice'):.4f} -> refined {mean('refined_dice'):.4f}")
    return EXIT_OK


# --- diagnose -----------------------------------------------------------------

def cmd_diagnose(args) -> int:
    image = sxio.read_pgm(args.image)
    mask = sxio.read_pgm(args.mask)
    clf = sxio.load_classifier(args.model)
    provider = PatchProjectionProvider(
        patch_size=args.patch_size, p_out=args.proj_dim, seed=args.proj_seed
    )
    result = diagnose_image(image, binarize(mask, 0.5), provider, clf, edge_tolerance=args.edge_tol)
    payload = {
        "label": result.label,
        "probability": result.probability,
        "sas": result.sas,
        "lambda_plus": result.report.mp.lambda_plus,
        "outliers": [[i, v] for i, v in result.report.outliers],
        "n_patches": result.report.n_samples,
    }
    text = json.dumps(payload, sort_keys=True, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


# --- eval-cls -------------------------------------------------------------------

def _read_scores_csv(path):
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if lines and lines[0].lower().replace(" ", "") == "prob,label":
        lines = lines[1:]
    if not lines:
        raise FormatError(f"{path}: no score rows")
    try:
        rows = [(float(a), int(float(b))) for a, b in (ln.split(",") for ln in lines)]
    except ValueError as exc:
        raise FormatError(f"{path}: malformed score row ({exc})") from exc
    return rows


def cmd_eval_cls(args) -> int:
    scores = _read_scores_csv(args.scores)
    labels = {lab for _, lab in scores}
    if labels != {0, 1}:
        raise ConfigError("scores must contain both labels 0 and 1")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tau = args.threshold
    tp = sum(1 for p, y in scores if p >= tau and y == 1)
    fp = sum(1 for p, y in scores if p >= tau and y == 0)
    fn = sum(1 for p, y in scores if p < tau and y == 1)
    tn = sum(1 for p, y in scores if p < tau and y == 0)
    m = classification_metrics(ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn))
    roc = roc_curve(scores)
    pr = pr_curve(scores)
    sxio.dump_json(out / "metrics.json", {
        "threshold": tau,
        "confusion": {"tp": tp, "fp": fp, "fn": fn, "tn": tn},
        "accuracy": m.accuracy, "precision": m.precision,
        "recall": m.recall, "f1": m.f1,
        "degenerate": list(m.degenerate),
        "auc": roc.area, "average_precision": pr.area,
    })
    sxio.write_curve_csv(out / "roc.csv", roc)
    sxio.write_curve_csv(out / "pr.csv", pr)
    print(f"eval-cls: acc {m.accuracy:.4f} f1 {m.f1:.4f} auc {roc.area:.4f} ap {pr.area:.4f}")
    return EXIT_OK


# --- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spectradx",
        description="Spectral anomaly scoring and flow-based mask refinement experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="seeded noise / spiked ensemble runs")
    sim.add_argument("--n", type=int, help="samples per matrix")
    sim.add_argument("--p", type=int, help="features per matrix")
    sim.add_argument("--trials", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--spike", type=float, action="append",
                     help="population spike strength > 1 (repeatable)")
    sim.add_argument("--edge-tol", type=float, dest="edge_tol",
                     help="multiplicative outlier edge tolerance (default 0)")
    sim.add_argument("--config", help="JSON config file (flags override)")
    sim.add_argument("--out", help="output directory")
    sim.set_defaults(func=cmd_simulate)

    sas = sub.add_parser("sas", help="spectral report for a feature file")
    sas.add_argument("--in", dest="input", required=True, help="feature CSV or SPDX binary")
    sas.add_argument("--edge-tol", type=float, dest="edge_tol", default=0.0)
    sas.add_argument("--out", help="write report JSON here instead of stdout")
    sas.set_defaults(func=cmd_sas)

    flow = sub.add_parser("flow", help="mask refinement loop")
    fsub = flow.add_subparsers(dest="flow_command", required=True)

    gen = fsub.add_parser("gen-corpus", help="synthetic (coarse, target) mask pairs")
    for name, typ in [("n", int), ("height", int), ("width", int), ("seed", int),
                      ("cond-dim", int), ("dilate-px", int), ("erode-px", int),
                      ("noise-sd", float), ("drop-prob", float)]:
        gen.add_argument(f"--{name}", type=typ, dest=name.replace("-", "_"))
    gen.add_argument("--config")
    gen.add_argument("--out")
    gen.set_defaults(func=cmd_flow_gen_corpus)

    tr = fsub.add_parser("train", help="fit the velocity model on a corpus")
    tr.add_argument("--corpus")
    for name, typ in [("lr", float), ("steps", int), ("batch", int),
                      ("t-per-sample", int), ("seed", int)]:
        tr.add_argument(f"--{name}", type=typ, dest=name.replace("-", "_"))
    tr.add_argument("--config")
    tr.add_argument("--out")
    tr.set_defaults(func=cmd_flow_train)

    rf = fsub.add_parser("refine", help="Euler-integrate coarse masks")
    rf.add_argument("--corpus")
    rf.add_argument("--model", help="directory with model.spdx/model.json")
    rf.add_argument("--steps", type=int)
    rf.add_argument("--config")
    rf.add_argument("--out")
    rf.set_defaults(func=cmd_flow_refine)

    ev = fsub.add_parser("eval", help="Dice/IoU of refined vs coarse masks")
    ev.add_argument("--corpus")
    ev.add_argument("--refined")
    ev.add_argument("--threshold", type=float)
    ev.add_argument("--config")
    ev.add_argument("--out")
    ev.set_defaults(func=cmd_flow_eval)

    dg = sub.add_parser("diagnose", help="end-to-end diagnosis of one image")
    dg.add_argument("--image", required=True, help="PGM image")
    dg.add_argument("--mask", required=True, help="PGM region mask")
    dg.add_argument("--model", required=True, help="classifier JSON")
    dg.add_argument("--patch-size", type=int, default=16, dest="patch_size")
    dg.add_argument("--proj-dim", type=int, default=64, dest="proj_dim")
    dg.add_argument("--proj-seed", type=int, default=0, dest="proj_seed")
    dg.add_argument("--edge-tol", type=float, default=0.0, dest="edge_tol")
    dg.add_argument("--out", help="write diagnosis JSON here instead of stdout")
    dg.set_defaults(func=cmd_diagnose)

    ec = sub.add_parser("eval-cls", help="classification metrics from a scores CSV")
    ec.add_argument("--scores", required=True, help="CSV of prob,label rows")
    ec.add_argument("--threshold", type=float, default=0.5)
    ec.add_argument("--out", default="eval_cls_out")
    ec.set_defaults(func=cmd_eval_cls)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FormatError, ShapeMismatchError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataIntegrityError as exc:
        print(f"data integrity error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TooSmallRegionError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
