"""Command line over the pipeline stages.

    synth          write a synthetic ground-truth bundle + checkpoint
    train          optimize a scene against a bundle's training views
    densify-views  render an interpolated frame sequence for a tracker
    occlusion      per-view occluder lists from labels + depth
    lift           vote 2D labels onto a checkpoint's Gaussians
    extract        keep only the Gaussians carrying chosen labels
    render         render a bundle view from a checkpoint
    eval           object-level extraction quality on a split
    serve          HTTP segmentation service around one checkpoint

Structured results print as JSON on stdout; errors exit 1 with a one-line
message on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .datasets import (
    SceneBundle,
    _save_image_u8,
    _save_labels_u16,
    adopt_bundle_background,
    load_bundle,
    load_checkpoint,
    save_bundle,
    save_checkpoint,
    save_frame_sequence,
)
from .lifting import commit_votes, extract, lift_view
from .metrics import evaluate_extraction, predicted_label_map
from .occlusion import analyze_occlusion
from .rasterize import render
from .scene import GaussianScene
from .synthetic import make_synthetic_scene, make_synthetic_views
from .training import TrainConfig, train
from .viewsynth import densify_views

DEFAULT_PORT = 7878


def _parse_labels(text: str) -> List[int]:
    try:
        labels = sorted({int(part) for part in text.split(",") if part.strip()})
    except ValueError:
        raise ValueError(f"labels must be a comma-separated id list, got {text!r}")
    if not labels:
        raise ValueError("empty label list")
    return labels


def _check_labels_present(scene: GaussianScene, labels: List[int]) -> None:
    present = set(int(v) for v in np.unique(scene.labels))
    unknown = [k for k in labels if k not in present]
    if unknown:
        raise ValueError(f"labels {unknown} not present in the checkpoint "
                         f"(present: {sorted(present)})")


def _find_view(bundle: SceneBundle, view_id: str):
    for v in bundle.views:
        if v.camera.id == view_id:
            return v
    ids = [v.camera.id for v in bundle.views]
    raise ValueError(f"view {view_id!r} not in bundle (views: {ids})")


def _split_views(bundle: SceneBundle, split: str):
    views = bundle.train_views() if split == "train" else bundle.test_views()
    if not views:
        raise ValueError(f"bundle has no {split} views")
    return views


def _cmd_synth(args) -> int:
    gt = make_synthetic_scene(seed=args.seed, n_objects=args.objects,
                              gaussians_per_object=args.gaussians_per_object)
    train_v, test_v = make_synthetic_views(
        gt, n_train=args.train_views, n_test=args.test_views,
        width=args.size, height=args.size, fx=args.fx,
        with_depth=not args.no_depth)
    bundle = SceneBundle(
        views=train_v + test_v,
        splits=["train"] * len(train_v) + ["test"] * len(test_v),
        extra={"background": [float(c) for c in gt.background_color]})
    out = Path(args.out)
    save_bundle(bundle, out)
    save_checkpoint(gt, out / "gt.ply")
    print(json.dumps({"out": str(out), "train_views": len(train_v),
                      "test_views": len(test_v), "gaussians": len(gt),
                      "labels": sorted(int(k) for k in np.unique(gt.labels)
                                       if k != 0)}))
    return 0


def _train_config(args, bundle: SceneBundle) -> TrainConfig:
    overrides = {}
    for flag, field in (("seed", "seed"), ("threshold", "lift_threshold"),
                        ("masks_per_iter", "masks_per_iter"),
                        ("label_start", "label_start"),
                        ("lambda1", "lambda1"), ("lambda2", "lambda2"),
                        ("init_points", "init_points")):
        value = getattr(args, flag)
        if value is not None:
            overrides[field] = value
    overrides["gpf_enabled"] = not args.no_gpf
    overrides["oam_enabled"] = not args.no_oam
    overrides["dov_enabled"] = not args.no_dov
    bg = bundle.extra.get("background")
    if bg is not None:
        overrides["background"] = tuple(float(c) for c in bg)
    return TrainConfig.for_iterations(args.iterations, **overrides)


def _cmd_train(args) -> int:
    bundle = load_bundle(args.bundle, disparity=args.disparity)
    cfg = _train_config(args, bundle)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(
        {"version": __version__, "bundle": str(args.bundle),
         "config": asdict(cfg)}, indent=1))

    stride = max(1, args.iterations // 20)

    def progress(it, record):
        if not args.quiet and (it % stride == 0 or it == args.iterations):
            print(f"iter {it}/{args.iterations}  total {record['total']:.4f}  "
                  f"gaussians {record['gaussians']}  "
                  f"labeled {record['labeled_fraction']:.2f}", flush=True)

    result = train(bundle.train_views(), cfg, out_dir=str(out),
                   progress=progress)
    save_checkpoint(result.scene, out / "checkpoint.ply")
    last = result.metrics[-1]
    print(json.dumps({"out": str(out), "iterations": cfg.iterations,
                      "total": last["total"], "gaussians": last["gaussians"],
                      "labeled_fraction": last["labeled_fraction"]}))
    return 0


def _cmd_densify_views(args) -> int:
    bundle = load_bundle(args.bundle)
    scene = adopt_bundle_background(load_checkpoint(args.checkpoint), bundle)
    cams = [v.camera for v in _split_views(bundle, args.split)]
    frames = densify_views(scene, cams, args.inserts)
    save_frame_sequence(frames, args.out)
    print(json.dumps({"out": str(args.out), "frames": len(frames),
                      "originals": sum(f.is_original for f in frames)}))
    return 0


def _cmd_occlusion(args) -> int:
    bundle = load_bundle(args.bundle, disparity=args.disparity)
    views = ([_find_view(bundle, vid) for vid in args.view]
             if args.view else bundle.views)
    report = {}
    for view in views:
        if view.depth_map is None:
            raise ValueError(f"view {view.camera.id} has no depth map")
        res = analyze_occlusion(view.label_map, view.depth_map,
                                min_boundary=args.min_boundary,
                                depth_tol=args.depth_tol)
        report[view.camera.id] = {str(k): res.occluders.get(k, [])
                                  for k in res.labels}
        if args.write:
            unocc_dir = Path(args.bundle) / "unocclusion"
            unocc_dir.mkdir(exist_ok=True)
            from PIL import Image
            # only occluded labels get a mask file; a missing file means
            # all-ones (never occluded), matching the loader's convention
            for k, mask in res.unocclusion.items():
                if res.occluders.get(k):
                    arr = np.asarray(mask, dtype=bool) * np.uint8(255)
                    Image.fromarray(arr).save(
                        unocc_dir / f"{view.camera.id}_{k}.png")
    print(json.dumps(report, indent=1))
    return 0


def _cmd_lift(args) -> int:
    scene = load_checkpoint(args.checkpoint)
    bundle = load_bundle(args.bundle, disparity=args.disparity)
    threshold = 0.6 if args.threshold is None else args.threshold
    committed = 0
    for view in _split_views(bundle, args.split):
        votes = lift_view(scene, view.camera, view.label_map,
                          threshold=threshold, gpf_enabled=not args.no_gpf)
        committed += commit_votes(scene, votes)
    save_checkpoint(scene, args.out)
    uniq, counts = np.unique(scene.labels, return_counts=True)
    print(json.dumps({"out": str(args.out), "committed": committed,
                      "label_counts": {str(int(k)): int(c)
                                       for k, c in zip(uniq, counts)}}))
    return 0


def _cmd_extract(args) -> int:
    scene = load_checkpoint(args.checkpoint)
    labels = _parse_labels(args.labels)
    _check_labels_present(scene, labels)
    sub = extract(scene, labels)
    save_checkpoint(sub, args.out)
    print(json.dumps({"out": str(args.out), "labels": labels,
                      "kept": len(sub), "total": len(scene)}))
    return 0


def _cmd_render(args) -> int:
    bundle = load_bundle(args.bundle)
    scene = adopt_bundle_background(load_checkpoint(args.checkpoint), bundle)
    camera = _find_view(bundle, args.view).camera
    if args.labels is not None:
        labels = _parse_labels(args.labels)
        _check_labels_present(scene, labels)
        scene = extract(scene, labels)
    out = Path(args.out)
    if args.labelmap:
        _save_labels_u16(out, predicted_label_map(scene, camera))
    else:
        _save_image_u8(out, render(scene, camera).color)
    print(json.dumps({"out": str(out), "view": args.view,
                      "gaussians": len(scene)}))
    return 0


def _cmd_eval(args) -> int:
    bundle = load_bundle(args.bundle, disparity=args.disparity)
    scene = adopt_bundle_background(load_checkpoint(args.checkpoint), bundle)
    views = _split_views(bundle, args.split)
    labels = _parse_labels(args.labels) if args.labels is not None else None
    if labels:
        _check_labels_present(scene, labels)
    report = evaluate_extraction(scene, views, labels=labels)
    print(json.dumps(report, indent=1))
    return 0


def _cmd_serve(args) -> int:
    from .service import run_service
    run_service(args.checkpoint, args.bundle, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="labelsplat",
        description="label-aware Gaussian splatting pipeline")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic ground-truth bundle")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--objects", type=int, default=3)
    p.add_argument("--gaussians-per-object", type=int, default=40)
    p.add_argument("--train-views", type=int, default=12)
    p.add_argument("--test-views", type=int, default=4)
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--fx", type=float, default=140.0)
    p.add_argument("--no-depth", action="store_true")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="optimize a scene against a bundle")
    p.add_argument("bundle")
    p.add_argument("--out", required=True)
    p.add_argument("--iterations", type=int, default=3000,
                   help="desk-scale default 3000; phase boundaries scale "
                        "from the reference 15000-iteration schedule")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--init-points", type=int, default=None)
    p.add_argument("--threshold", type=float, default=None,
                   help="blend weight a lifting vote must exceed")
    p.add_argument("--masks-per-iter", type=int, default=None)
    p.add_argument("--label-start", type=int, default=None)
    p.add_argument("--lambda1", type=float, default=None,
                   help="structural-similarity share of the photometric term")
    p.add_argument("--lambda2", type=float, default=None,
                   help="object-level term weight")
    p.add_argument("--no-gpf", action="store_true",
                   help="disable the center-projection consistency filter")
    p.add_argument("--no-oam", action="store_true",
                   help="supervise objects without occlusion masking")
    p.add_argument("--no-dov", action="store_true",
                   help="record that masks were prepared without view "
                        "densification (preparation happens upstream)")
    p.add_argument("--disparity", action="store_true",
                   help="bundle depth files hold disparity; invert on load")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("densify-views",
                       help="render an interpolated frame sequence for an "
                            "external tracker")
    p.add_argument("bundle")
    p.add_argument("checkpoint")
    p.add_argument("--out", required=True)
    p.add_argument("--inserts", type=int, default=3,
                   help="pseudo views per camera gap")
    p.add_argument("--split", choices=("train", "test"), default="train")
    p.set_defaults(func=_cmd_densify_views)

    p = sub.add_parser("occlusion",
                       help="per-view occluder lists from labels + depth")
    p.add_argument("bundle")
    p.add_argument("--view", action="append",
                   help="restrict to this view id (repeatable)")
    p.add_argument("--min-boundary", type=int, default=8)
    p.add_argument("--depth-tol", type=float, default=0.0)
    p.add_argument("--write", action="store_true",
                   help="write unocclusion masks into the bundle")
    p.add_argument("--disparity", action="store_true")
    p.set_defaults(func=_cmd_occlusion)

    p = sub.add_parser("lift", help="vote 2D labels onto a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("bundle")
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--no-gpf", action="store_true")
    p.add_argument("--split", choices=("train", "test"), default="train")
    p.add_argument("--disparity", action="store_true")
    p.set_defaults(func=_cmd_lift)

    p = sub.add_parser("extract",
                       help="keep only Gaussians carrying chosen labels")
    p.add_argument("checkpoint")
    p.add_argument("--labels", required=True, help="comma-separated ids")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("render", help="render a bundle view from a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("bundle")
    p.add_argument("--view", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--labels", default=None,
                   help="render only these labels (comma-separated)")
    p.add_argument("--labelmap", action="store_true",
                   help="write the 16-bit label map instead of the color image")
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("eval", help="object extraction quality on a split")
    p.add_argument("checkpoint")
    p.add_argument("bundle")
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--labels", default=None)
    p.add_argument("--disparity", action="store_true")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("serve", help="HTTP segmentation service")
    p.add_argument("checkpoint")
    p.add_argument("bundle")
    p.add_argument("--port", type=int, default=DEFAULT_PORT)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
