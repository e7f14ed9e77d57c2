"""Command-line front end: ``posebridge <verb> ...``.

Every verb reads/writes JSONL datasets (see ``schema/dataset_record.schema.json``)
and writes ``<output>.manifest.json`` holding the exact argv, the seed and
SHA-256 digests of inputs and outputs; ``posebridge rerun MANIFEST`` replays
it and checks the outputs are byte-identical.
"""
import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from .augmentor import AugmentConfig, AugmentParams, augment_sequence, sample_params
from .exceptions import PoseBridgeError
from .geometry import DEFAULT_CAMERA, CameraIntrinsics, project
from .io import (DatasetRecord, RecordError, file_digest, manifest_path,
                 read_records, write_csv, write_json, write_jsonl)
from .kcs import part_kcs
from .metrics import AUC_THRESHOLDS_MM, evaluate, joint_errors
from .pseudo_label import DEFAULT_INIT_DEPTH, generate_pseudo_label, mean_bone_lengths
from .skeleton import PART_ORDER
from .synthetic import (SceneConfig, align_pair, experiment_sets, load_templates,
                        pairwise_alignment_experiment, sample_pose, virtual_camera)

log = logging.getLogger("posebridge")

METHOD_FLAGS = {"human-centric": "human_centric", "kabsch": "kabsch"}


def _pair_floats(text):
    parts = [float(p) for p in str(text).split(",")]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'low,high', got {text!r}")
    return tuple(parts)


def _camera(text):
    try:
        return CameraIntrinsics.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _float_list(text):
    return tuple(float(p) for p in str(text).split(",") if p.strip())


class CommandFailed(Exception):
    def __init__(self, message, code=1):
        super().__init__(message)
        self.code = code


# -- gen-data ---------------------------------------------------------------

def cmd_gen_data(args):
    if args.count <= 0:
        raise CommandFailed("--count must be positive; refusing to write an empty dataset")
    cam = args.camera or DEFAULT_CAMERA
    config = SceneConfig(camera=cam, depth_range=args.depth_range, perturbation=args.perturbation,
                         seed=args.seed, count=args.count, yaw_range=args.yaw_range)
    rng = np.random.default_rng(args.seed)
    templates = load_templates()
    names = sorted(templates)
    records = []
    seq_len = max(1, args.sequence_length)
    i = 0
    while i < args.count:
        base = sample_pose(rng, templates[names[rng.integers(len(names))]], config)
        n = min(seq_len, args.count - i)
        if seq_len > 1:
            frames = np.repeat(base[None], n, axis=0)
            motion = sample_params(AugmentConfig(ratio_range=(0.0, 0.0)), rng)
            frames = augment_sequence(frames, motion)
        else:
            frames = base[None]
        for k, pose in enumerate(frames):
            try:
                pose2d = project(pose, cam)
            except PoseBridgeError:
                continue
            rec = DatasetRecord(id=f"s{args.seed}-{i + k:06d}", camera=cam, joints3d=pose,
                                joints2d=pose2d, rel_pose3d=pose - pose[0])
            if seq_len > 1:
                rec.sequence_id = f"s{args.seed}-seq{i // seq_len:05d}"
                rec.frame_index = k
            records.append(rec)
        i += n
    write_jsonl(args.output, records)
    log.info("wrote %d records to %s", len(records), args.output)
    return [args.output]


# -- pseudo-label -------------------------------------------------------------

def cmd_pseudo_label(args):
    records = read_records(args.input)
    usable, skipped = [], []
    for rec in records:
        try:
            rec.require("joints2d", "rel_pose3d")
            if rec.camera is None and args.camera is None:
                raise RecordError(f"record {rec.id!r}: missing camera")
            usable.append(rec)
        except RecordError as exc:
            skipped.append((rec.id, str(exc)))
    if not usable:
        for rid, why in skipped:
            log.warning("skipped %s: %s", rid, why)
        raise CommandFailed(f"no usable records ({len(skipped)} skipped)")

    profile = mean_bone_lengths([r.rel_pose3d for r in usable])
    out = []
    for rec in usable:
        cam = args.camera or rec.camera
        try:
            res = generate_pseudo_label(rec.joints2d, rec.rel_pose3d, cam, profile, args.init_depth)
        except PoseBridgeError as exc:
            skipped.append((rec.id, f"{type(exc).__name__}: {exc}"))
            continue
        rec.extra.update(res.to_dict())
        out.append(rec)
    for rid, why in skipped:
        log.warning("skipped %s: %s", rid, why)
    write_jsonl(args.output, out)
    log.info("pseudo-labelled %d records, skipped %d", len(out), len(skipped))
    if args.report_csv:
        rows = [{"id": r.id, "stage1_residual": r.extra["stage1_residual"],
                 "stage2_residual": r.extra["stage2_residual"],
                 "stage1_iterations": r.extra["stage1_iterations"],
                 "stage2_iterations": r.extra["stage2_iterations"],
                 "converged": r.extra["stage1_converged"] and r.extra["stage2_converged"]}
                for r in out]
        write_csv(args.report_csv, rows, ["id", "stage1_residual", "stage2_residual",
                                          "stage1_iterations", "stage2_iterations", "converged"])
    args._summary = {"succeeded": len(out), "skipped": [{"id": i, "reason": w} for i, w in skipped],
                     "bone_profile": profile.to_list()}
    if not out:
        raise CommandFailed("every record failed")
    return [args.output] + ([args.report_csv] if args.report_csv else [])


# -- align ------------------------------------------------------------------

def _pose3d(rec, prefer_pseudo):
    if prefer_pseudo and "pseudo_joints3d" in rec.extra:
        return np.asarray(rec.extra["pseudo_joints3d"], dtype=np.float64)
    if rec.joints3d is None:
        raise RecordError(f"record {rec.id!r}: no 3D pose")
    return rec.joints3d


def _report_rows(report):
    rows = [{"method": report.method, "trial": k + 1, "mpjpe_mm": m, "baseline_mm": b}
            for k, (m, b) in enumerate(zip(report.trials, report.baseline_trials))]
    rows.append({"method": report.method, "trial": "average", "mpjpe_mm": report.average,
                 "baseline_mm": report.baseline_average, "reduction_percent": report.reduction})
    return rows


_REPORT_FIELDS = ["method", "trial", "mpjpe_mm", "baseline_mm", "reduction_percent"]


def cmd_align(args):
    method = METHOD_FLAGS[args.method]
    sources = read_records(args.input)
    targets = read_records(args.target)
    if not sources or not targets:
        raise CommandFailed("source and target datasets must be non-empty")
    for t in targets:
        if t.camera is None and args.camera is None:
            raise CommandFailed(f"target record {t.id!r} has no camera")
    if args.pairing == "random":
        order = np.random.default_rng(args.seed).integers(len(targets), size=len(sources))
    else:
        order = np.arange(len(sources)) % len(targets)

    out, before, after = [], [], []
    for src, ti in zip(sources, order):
        tgt = targets[ti]
        a = _pose3d(src, prefer_pseudo=False)
        b = _pose3d(tgt, prefer_pseudo=True)
        aligned = align_pair(a, b, method)
        cam = args.camera or tgt.camera
        rec = DatasetRecord(id=src.id, camera=cam, joints3d=aligned, rel_pose3d=aligned - aligned[0],
                            frame_index=src.frame_index, sequence_id=src.sequence_id,
                            extra={"target_id": tgt.id, "method": method})
        try:
            rec.joints2d = project(aligned, cam)
        except PoseBridgeError as exc:
            log.warning("record %s: aligned pose not projectable (%s)", src.id, exc)
        out.append(rec)
        before.append(joint_errors(a, b).mean())
        after.append(joint_errors(aligned, b).mean())
    write_jsonl(args.output, out)

    base = float(np.mean(before))
    avg = float(np.mean(after))
    report = {"method": method, "pairs": len(out), "baseline_average_mm": base, "average_mm": avg,
              "reduction_percent": 100.0 * (1.0 - avg / base) if base > 0 else 0.0}
    report_path = args.report or os.fspath(args.output) + ".report.json"
    write_json(report_path, report)
    outputs = [args.output, report_path]
    if args.report_csv:
        write_csv(args.report_csv, [dict(report, trial="paired")],
                  ["method", "trial", "pairs", "average_mm", "baseline_average_mm", "reduction_percent"])
        outputs.append(args.report_csv)
    log.info("aligned %d poses (%s): %.3f mm -> %.3f mm", len(out), method, base, avg)
    return outputs


# -- compare-align ------------------------------------------------------------

def cmd_compare_align(args):
    if args.input and args.target:
        set_a = np.stack([_pose3d(r, False) for r in read_records(args.input)])
        set_b = np.stack([_pose3d(r, True) for r in read_records(args.target)])
    elif args.input or args.target:
        raise CommandFailed("give both --input and --target, or neither for synthetic sets")
    else:
        set_a, set_b = experiment_sets(args.synthetic_count, seed=args.seed)
    reports = [pairwise_alignment_experiment(set_a, set_b, m, trials=args.trials, rng=args.seed)
               for m in ("none", "kabsch", "human_centric")]
    write_json(args.output, {"reports": [r.to_dict() for r in reports]})
    outputs = [args.output]
    if args.report_csv:
        rows = [row for r in reports for row in _report_rows(r)]
        write_csv(args.report_csv, rows, _REPORT_FIELDS)
        outputs.append(args.report_csv)
    for r in reports:
        log.info("%-13s average %.1f mm (reduction %.1f%%)", r.method, r.average, r.reduction)
    return outputs


# -- augment ----------------------------------------------------------------

def _sequences(records):
    groups = {}
    for idx, rec in enumerate(records):
        key = rec.sequence_id if rec.sequence_id is not None else f"__single_{idx}"
        groups.setdefault(key, []).append(idx)
    for key, idxs in groups.items():
        idxs.sort(key=lambda i: (records[i].frame_index if records[i].frame_index is not None else 0, i))
        yield key, idxs


def cmd_augment(args):
    records = read_records(args.input)
    if not records:
        raise CommandFailed("input dataset is empty")
    for rec in records:
        rec.require("joints3d")
    config = AugmentConfig(angle_range=args.angle_range, ratio_range=args.ratio_range, seed=args.seed)
    rng = np.random.default_rng(args.seed)
    fixed = None
    if args.params:
        with open(args.params, encoding="utf-8") as fh:
            fixed = AugmentParams.from_dict(json.load(fh))
    all_params = {}
    for key, idxs in _sequences(records):
        params = fixed if fixed is not None else sample_params(config, rng)
        all_params[key] = params.to_dict()
        seq = np.stack([records[i].joints3d for i in idxs])
        aug = augment_sequence(seq, params)
        for i, pose in zip(idxs, aug):
            rec = records[i]
            rec.joints3d = pose
            rec.rel_pose3d = pose - pose[0]
            if rec.camera is not None:
                try:
                    rec.joints2d = project(pose, rec.camera)
                except PoseBridgeError as exc:
                    log.warning("record %s: augmented pose not projectable (%s)", rec.id, exc)
                    rec.joints2d = None
    write_jsonl(args.output, records)
    params_path = os.fspath(args.output) + ".params.json"
    write_json(params_path, {"config": {"angle_range": list(config.angle_range),
                                        "ratio_range": list(config.ratio_range), "seed": args.seed},
                             "sequences": all_params})
    return [args.output, params_path]


# -- kcs ----------------------------------------------------------------------

def cmd_kcs(args):
    rows = []
    for rec in read_records(args.input):
        pose = _pose3d(rec, prefer_pseudo=args.use_pseudo)
        mats = part_kcs(pose, normalize=args.normalize)
        rows.append({"id": rec.id, "normalized": bool(args.normalize),
                     "kcs": {name: mats[name].tolist() for name in PART_ORDER}})
    write_jsonl(args.output, rows)
    return [args.output]


# -- eval ---------------------------------------------------------------------

def cmd_eval(args):
    preds = read_records(args.input)
    gts = {r.id: r for r in read_records(args.gt)} if args.gt else None
    pairs = []
    for rec in preds:
        if args.pred_field == "joints3d":
            pred = rec.joints3d
        else:
            pred = rec.extra.get(args.pred_field)
        gt_rec = gts.get(rec.id) if gts is not None else rec
        if pred is None or gt_rec is None or gt_rec.joints3d is None:
            log.warning("record %s: no prediction/ground truth pair, skipped", rec.id)
            continue
        pairs.append((rec.id, np.asarray(pred, dtype=np.float64), gt_rec.joints3d))
    if not pairs:
        raise CommandFailed("nothing to evaluate")
    thresholds = args.auc_thresholds or AUC_THRESHOLDS_MM
    pred_all = np.stack([p for _, p, _ in pairs])
    gt_all = np.stack([g for _, _, g in pairs])
    overall = evaluate(pred_all, gt_all, args.threshold_mm, thresholds)
    write_json(args.output, {"n_poses": len(pairs), "auc_thresholds_mm": list(thresholds),
                             "report": overall.to_dict()})
    outputs = [args.output]
    if args.report_csv:
        fields = ["id", "mpjpe", "pa_mpjpe", "pck", "auc"]
        rows = []
        for rid, p, g in pairs:
            r = evaluate(p, g, args.threshold_mm, thresholds)
            rows.append({"id": rid, "mpjpe": r.mpjpe, "pa_mpjpe": r.pa_mpjpe, "pck": r.pck, "auc": r.auc})
        rows.append({"id": "ALL", "mpjpe": overall.mpjpe, "pa_mpjpe": overall.pa_mpjpe,
                     "pck": overall.pck, "auc": overall.auc})
        write_csv(args.report_csv, rows, fields)
        outputs.append(args.report_csv)
    log.info("MPJPE %.2f mm  PA-MPJPE %.2f mm  PCK %.1f  AUC %.3f",
             overall.mpjpe, overall.pa_mpjpe, overall.pck, overall.auc)
    return outputs


# -- sim-camera ---------------------------------------------------------------

def cmd_sim_camera(args):
    out = []
    for rec in read_records(args.input):
        rec.require("joints3d")
        pose = virtual_camera(rec.joints3d, args.height, args.depression)
        rec.joints3d = pose
        rec.rel_pose3d = pose - pose[0]
        cam = args.camera or rec.camera
        if cam is not None:
            rec.camera = cam
            try:
                rec.joints2d = project(pose, cam)
            except PoseBridgeError as exc:
                log.warning("record %s: not visible from the virtual camera (%s)", rec.id, exc)
                rec.joints2d = None
        rec.extra["virtual_camera"] = {"height_m": args.height, "depression_deg": args.depression}
        out.append(rec)
    write_jsonl(args.output, out)
    return [args.output]


# -- manifests ----------------------------------------------------------------

def _write_manifest(args, argv, outputs):
    inputs = [p for p in (getattr(args, "input", None), getattr(args, "target", None),
                          getattr(args, "gt", None), getattr(args, "params", None)) if p]
    manifest = {
        "tool": "posebridge",
        "version": __version__,
        "command": args.command,
        "argv": list(argv),
        "cwd": os.getcwd(),
        "seed": getattr(args, "seed", None),
        "inputs": {p: file_digest(p) for p in inputs},
        "outputs": {p: file_digest(p) for p in outputs},
    }
    summary = getattr(args, "_summary", None)
    if summary is not None:
        manifest["summary"] = summary
    path = manifest_path(args.output)
    write_json(path, manifest)
    return path


def cmd_rerun(args):
    with open(args.manifest, encoding="utf-8") as fh:
        manifest = json.load(fh)
    cwd = os.getcwd()
    if not args.here:
        os.chdir(manifest["cwd"])
    try:
        for path, digest in manifest["inputs"].items():
            if file_digest(path) != digest:
                raise CommandFailed(f"input {path} changed since the manifest was written")
        code = main(manifest["argv"])
        mismatched = [p for p, d in manifest["outputs"].items() if file_digest(p) != d]
    finally:
        os.chdir(cwd)
    if mismatched:
        raise CommandFailed(f"outputs differ from manifest: {', '.join(mismatched)}")
    print(f"reproduced {len(manifest['outputs'])} output(s) byte-for-byte")
    return code


# -- parser -----------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="posebridge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, input_required=True, seed=True):
        if input_required:
            p.add_argument("--input", required=True)
        p.add_argument("--output", required=True)
        p.add_argument("--camera", type=_camera, default=None, help="fx,fy,cx,cy")
        if seed:
            p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("gen-data", help="generate a synthetic JSONL dataset")
    common(p, input_required=False)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--depth-range", type=_pair_floats, default=(4.5, 7.0))
    p.add_argument("--perturbation", type=float, default=0.3, help="max bone rotation, radians")
    p.add_argument("--yaw-range", type=_pair_floats, default=(-math.pi, math.pi))
    p.add_argument("--sequence-length", type=int, default=1)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("pseudo-label", help="recover absolute 3D pseudo-labels")
    common(p)
    p.add_argument("--init-depth", type=float, default=DEFAULT_INIT_DEPTH)
    p.add_argument("--report-csv")
    p.set_defaults(func=cmd_pseudo_label)

    p = sub.add_parser("align", help="globally transform source poses onto target poses")
    common(p)
    p.add_argument("--target", required=True)
    p.add_argument("--method", choices=sorted(METHOD_FLAGS), default="human-centric")
    p.add_argument("--pairing", choices=("index", "random"), default="index")
    p.add_argument("--report")
    p.add_argument("--report-csv")
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("compare-align", help="pairwise alignment experiment (none / kabsch / human-centric)")
    common(p, input_required=False)
    p.add_argument("--input")
    p.add_argument("--target")
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--synthetic-count", type=int, default=200)
    p.add_argument("--report-csv")
    p.set_defaults(func=cmd_compare_align)

    p = sub.add_parser("augment", help="bone angle / length augmentation of sequences")
    common(p)
    p.add_argument("--angle-range", type=_pair_floats, default=AugmentConfig().angle_range)
    p.add_argument("--ratio-range", type=_pair_floats, default=AugmentConfig().ratio_range)
    p.add_argument("--params", help="JSON file with fixed axes/angles/length_ratios")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("kcs", help="part-aware KCS matrices per record")
    common(p, seed=False)
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--use-pseudo", action="store_true", help="use pseudo_joints3d when present")
    p.set_defaults(func=cmd_kcs)

    p = sub.add_parser("eval", help="MPJPE / PA-MPJPE / PCK / AUC")
    common(p, seed=False)
    p.add_argument("--gt", help="ground-truth dataset matched by id (default: --input itself)")
    p.add_argument("--pred-field", default="joints3d")
    p.add_argument("--threshold-mm", type=float, default=150.0)
    p.add_argument("--auc-thresholds", type=_float_list, default=None)
    p.add_argument("--report-csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sim-camera", help="re-express poses in an elevated virtual camera")
    common(p, seed=False)
    p.add_argument("--height", type=float, default=2.0, help="metres")
    p.add_argument("--depression", type=float, default=45.0, help="degrees")
    p.set_defaults(func=cmd_sim_camera)

    p = sub.add_parser("rerun", help="replay a run manifest and verify byte-identical outputs")
    p.add_argument("manifest")
    p.add_argument("--here", action="store_true", help="resolve paths from the current directory")
    p.set_defaults(func=cmd_rerun)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "rerun":
            return args.func(args)
        outputs = args.func(args)
        _write_manifest(args, argv, outputs)
    except CommandFailed as exc:
        if hasattr(args, "output") and getattr(args, "_summary", None) is not None:
            _write_manifest(args, argv, [args.output] if os.path.exists(args.output) else [])
        log.error("%s", exc)
        return exc.code
    except (RecordError, PoseBridgeError, OSError, ValueError) as exc:
        log.error("%s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
