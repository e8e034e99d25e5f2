"""Command-line interface: file-in/file-out workflows over layout JSON.

Exit codes: 0 success, 1 domain error (invariant violation, divergence,
I/O problems), 2 usage error. Every stochastic subcommand takes --seed, and
results are deterministic given flags and seed.
"""
from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import augment, merging, metrics, training
from .gradcheck import TOLERANCE, standard_battery
from .layout import load_layout, load_prediction, save_layout, BoundaryPrediction
from .network import CPHCConfig, save_params
from .synthetic import SyntheticRoomSpec, build_dataset


def _eval_pair(paths: tuple[str, Path, Path], cell: float) -> metrics.PanoramaResult:
    name, gt_path, pred_path = paths
    camera, gt = load_layout(gt_path)
    pred_camera, pred = load_layout(pred_path)
    if (pred_camera.image_width, pred_camera.image_height) != \
            (camera.image_width, camera.image_height):
        raise ValueError(f"{name}: prediction and ground truth cameras disagree")
    return metrics.evaluate_boundary(camera, pred.floor_rows, gt.floor_rows,
                                     name=name, cell=cell)


def _collect_pairs(gt: Path, pred: Path) -> list[tuple[str, Path, Path]]:
    if gt.is_dir() != pred.is_dir():
        raise ValueError("--gt and --pred must both be files or both be directories")
    if not gt.is_dir():
        return [(gt.stem, gt, pred)]
    pairs = []
    for gt_file in sorted(gt.glob("*.json")):
        pred_file = pred / gt_file.name
        if not pred_file.exists():
            raise ValueError(f"missing prediction for {gt_file.name}")
        pairs.append((gt_file.stem, gt_file, pred_file))
    if not pairs:
        raise ValueError(f"no layout JSON files found in {gt}")
    return pairs


def cmd_eval(args) -> int:
    pairs = _collect_pairs(Path(args.gt), Path(args.pred))
    workers = args.workers or None
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda p: _eval_pair(p, args.cell), pairs))
    report = metrics.aggregate(results)
    if args.out:
        Path(args.out).write_text(metrics.report_json(report), encoding="utf-8")
    sys.stdout.write(metrics.report_text(report))
    return 0


def cmd_merge(args) -> int:
    camera, initial_layout, sigma = load_prediction(args.initial)
    if sigma is None:
        raise ValueError(f"{args.initial} has no sigma_rows; the initial-stage "
                         f"prediction must carry uncertainty")
    refine_camera, refine_layout, _ = load_prediction(args.refine)
    if (refine_camera.image_width, refine_camera.image_height) != \
            (camera.image_width, camera.image_height):
        raise ValueError("initial and refine cameras disagree")
    cfg = merging.MergeConfig(uncertainty_threshold=args.u_thresh,
                              distance_gate=args.d_gate)
    initial = BoundaryPrediction(initial_layout.floor_rows, sigma)
    merged_rows = merging.merge(camera, initial, refine_layout.floor_rows, cfg)
    out = initial_layout.__class__(merged_rows, initial_layout.ceiling_rows,
                                   initial_layout.corners)
    save_layout(camera, out, args.out)
    n = int(np.sum(merged_rows != initial_layout.floor_rows))
    sys.stdout.write(f"merged {n} of {camera.image_width} columns from the "
                     f"refinement stage -> {args.out}\n")
    return 0


def cmd_augment(args) -> int:
    camera, layout = load_layout(args.layout)
    if args.kx is not None or args.kz is not None:
        if args.kx is None or args.kz is None:
            raise ValueError("--kx and --kz must be given together")
        p = augment.StretchParams(args.kx, args.kz, mode=args.mode, seed=args.seed)
    else:
        rng = np.random.default_rng(args.seed)
        p = augment.sample_stretch_params(args.mode, rng, seed=args.seed)
    out = augment.stretch_layout(camera, layout, p)
    if args.flip:
        out = augment.flip_lr(out)
    if args.rotate:
        out = augment.rotate_horizontal(out, args.rotate)
    save_layout(camera, out, args.out)
    sys.stdout.write(f"kx={p.kx:.4f} kz={p.kz:.4f} -> {args.out}\n")

    if args.image:
        if not args.image_out:
            raise ValueError("--image requires --image-out")
        img = augment.load_image(args.image)
        img = augment.stretch_image(img, p)
        if args.flip:
            img = augment.flip_lr(img)
        if args.rotate:
            img = augment.rotate_horizontal(img, args.rotate)
        if args.gamma is not None:
            img = augment.luminance(img, args.gamma)
        augment.save_image(args.image_out, img)
    return 0


def cmd_gradcheck(args) -> int:
    results = standard_battery(args.seed, trials=args.trials)
    width = max(len(r.name) for r in results)
    sys.stdout.write(f"{'case':<{width}}  {'instances':>9}  {'max rel dev':>12}  result\n")
    ok = True
    for r in results:
        status = "ok" if r.passed else "FAIL"
        ok &= r.passed
        sys.stdout.write(f"{r.name:<{width}}  {r.instances:>9}  {r.max_deviation:>12.3e}  {status}\n")
    sys.stdout.write(f"tolerance {TOLERANCE:.0e}: {'all passed' if ok else 'FAILURES'}\n")
    return 0 if ok else 1


def cmd_perturb_study(args) -> int:
    camera, layout = load_layout(args.layout)
    result = metrics.perturbation_study(camera, layout, args.shift)
    sys.stdout.write(
        f"area original  : {result.area_original:10.4f} m^2\n"
        f"area shifted   : {result.area_shifted:10.4f} m^2\n"
        f"abs area error : {result.area_error:10.4f} m^2\n"
        f"image-space err: {100.0 * result.relative_image_error:10.4f} % "
        f"({args.shift:g} px of {camera.image_height})\n"
    )
    return 0


def cmd_histogram(args) -> int:
    root = Path(args.dataset)
    files = sorted(root.glob("*.json")) if root.is_dir() else [root]
    if not files:
        raise ValueError(f"no layout JSON files found in {root}")
    counts = metrics.depth_histogram(load_layout(f) for f in files)
    csv_text = metrics.histogram_csv(counts)
    if args.out:
        Path(args.out).write_text(csv_text, encoding="utf-8")
    sys.stdout.write(csv_text)
    return 0


def _toy_specs(n_rooms: int, seed: int) -> list[SyntheticRoomSpec]:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    specs = []
    for i in range(n_rooms):
        kind = ("square", "rectangle")[i % 2]
        specs.append(SyntheticRoomSpec(
            kind=kind,
            half_width=float(rng.uniform(1.2, 4.0)),
            half_depth=float(rng.uniform(1.2, 4.0)),
            camera_x=float(rng.uniform(-0.4, 0.4)),
            camera_z=float(rng.uniform(-0.4, 0.4)),
            seed=seed + i,
        ))
    return specs


def cmd_toy_train(args) -> int:
    config = CPHCConfig.desk()
    dataset = build_dataset(_toy_specs(args.rooms, args.seed), config)
    try:
        result = training.train_stage(
            args.stage, dataset, args.epochs, args.lr, args.seed,
            config=config, hidden=args.hidden, lr_decay_epochs=args.lr_decay,
        )
    except training.TrainingDiverged as exc:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "loss_trace.csv").write_text(
            training.loss_trace_csv(exc.trace), encoding="utf-8")
        raise ValueError(str(exc)) from exc
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "loss_trace.csv").write_text(
        training.loss_trace_csv(result.loss_trace), encoding="utf-8")
    save_params(result.params, out_dir / "params.bin")
    err = training.mean_abs_boundary_error_px(result, dataset)
    sys.stdout.write(
        f"stage={args.stage} epochs={args.epochs} "
        f"loss {result.loss_trace[0]:.4f} -> {result.loss_trace[-1]:.4f}, "
        f"mean |mu - y| = {err:.3f} px\n"
        f"wrote {out_dir / 'loss_trace.csv'} and {out_dir / 'params.bin'}\n"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="panolayout",
        description="Two-stage panoramic room layout toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="binned depth error and 2D IoU of predictions vs GT")
    p.add_argument("--gt", required=True, help="GT layout JSON file or directory")
    p.add_argument("--pred", required=True, help="prediction file or directory")
    p.add_argument("--out", help="write the JSON report here")
    p.add_argument("--cell", type=float, default=0.01, help="IoU raster cell (m)")
    p.add_argument("--workers", type=int, default=0,
                   help="worker threads for directory evaluation (0 = auto)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("merge", help="uncertainty-guided merge of two stage outputs")
    p.add_argument("--initial", required=True, help="initial prediction (needs sigma_rows)")
    p.add_argument("--refine", required=True, help="refinement prediction")
    p.add_argument("--u-thresh", type=float, default=0.2, help="uncertainty gate (m)")
    p.add_argument("--d-gate", type=float, default=5.0, help="distance gate (m)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("augment", help="pano-stretch / flip / rotate a layout (and image)")
    p.add_argument("--layout", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kx", type=float)
    p.add_argument("--kz", type=float)
    p.add_argument("--mode", choices=("refine", "initial"), default="refine")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--flip", action="store_true")
    p.add_argument("--rotate", type=int, default=0, help="circular column shift")
    p.add_argument("--image", help="optional equirectangular PNG to stretch alongside")
    p.add_argument("--image-out")
    p.add_argument("--gamma", type=float, help="luminance exponent for the image")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("gradcheck", help="finite-difference check of every op and loss")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--trials", type=int, default=100, help="instances per case")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("perturb-study", help="area error from a uniform boundary shift")
    p.add_argument("--layout", required=True)
    p.add_argument("--shift", type=float, default=3.0, help="pixel shift toward the horizon")
    p.set_defaults(func=cmd_perturb_study)

    p = sub.add_parser("histogram", help="depth distribution of GT boundary points")
    p.add_argument("--dataset", required=True, help="layout JSON file or directory")
    p.add_argument("--out", help="write CSV here")
    p.set_defaults(func=cmd_histogram)

    p = sub.add_parser("toy-train", help="desk-scale gradient-descent training run")
    p.add_argument("--stage", choices=("initial", "refine"), default="initial")
    p.add_argument("--rooms", type=int, default=8)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=1.2e-5)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--lr-decay", type=float, default=100.0,
                   help="epoch constant tau of the 1/(1 + t/tau) step decay")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_toy_train)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
