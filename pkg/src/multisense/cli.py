"""Command-line entry points: capture, postprocess, eval, validate, split."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import audio as audio_ops
from . import cloud, store
from .bridge.daemon import CaptureDaemon
from .bridge.driver import SessionDriver
from .capture.session import SessionConfig
from .crossmodal import (
    EmbeddingTable,
    EvalConfig,
    FeatureSet,
    Modality,
    TrainConfig,
    format_grid,
    localization_eval,
    ordered_pairs,
    results_to_json,
    retrieval_eval,
    scaling_sweep,
    synthetic_shared_latent_features,
)
from .errors import MultisenseError
from .geometry import default_intrinsics
from .records import POINTS_PER_OBJECT
from .sim.objects import load_scenario

log = logging.getLogger(__name__)


def _parse_endpoint(value: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    if not host:
        host = "127.0.0.1"
    return host, int(port)


# --------------------------------------------------------------------------
# subcommands


def cmd_capture(args) -> int:
    scenario = load_scenario(args.sim)
    config = SessionConfig.from_json(args.config) if args.config else SessionConfig()
    dataset = Path(args.dataset)
    dataset.mkdir(parents=True, exist_ok=True)
    driver = SessionDriver(scenario, config=config, dataset_root=dataset, auto=args.auto)

    if args.listen:
        host, port = _parse_endpoint(args.listen)
        daemon = CaptureDaemon(driver, host=host, port=port, realtime=args.realtime)
        daemon.start()
        print(f"capture daemon on {daemon.host}:{daemon.port} (dataset: {dataset})")
        try:
            while not driver.finished:
                time.sleep(0.1)
        except KeyboardInterrupt:
            print("interrupted; session state retained on disk")
        finally:
            daemon.stop()
    else:
        driver.auto = True
        ok = driver.run_to_completion(max_s=args.max_sim_s)
        if not ok:
            print("scenario did not complete within the sim-time budget", file=sys.stderr)
            return 1
    print(f"completed points: {sorted(driver.completed_points)}")
    return 0


def cmd_postprocess(args) -> int:
    remote = bool(args.depth_endpoint and args.segment_endpoint)
    if not args.stub_models and not remote:
        print(
            "postprocess needs --stub-models or both --depth-endpoint and --segment-endpoint",
            file=sys.stderr,
        )
        return 2
    root = Path(args.dataset)
    manifest = store.build_manifest(root)
    flagged: list[tuple[str, int, str]] = []
    processed = 0
    for entry in manifest.objects:
        for k in range(POINTS_PER_OBJECT):
            pdir = store.point_dir(root, entry.object_id, k)
            if not store.point_is_complete(pdir):
                continue
            try:
                record = store.read_point_record(pdir)
            except MultisenseError as exc:
                flagged.append((entry.object_id, k, f"unreadable: {exc}"))
                continue

            gains = json.loads((pdir / "gains.json").read_text())
            try:
                normalized = audio_ops.normalize_recording(
                    record.audio, gains.get("reference_gain_db", 0.0)
                )
                from scipy.io import wavfile

                wavfile.write(
                    pdir / "audio_norm.wav",
                    record.audio.sample_rate_hz,
                    normalized.astype(np.float32),
                )
            except audio_ops.NormalizationError as exc:
                flagged.append((entry.object_id, k, f"audio: {exc}"))

            h, w = record.rgbd.depth.shape
            intr = default_intrinsics(width=w, height=h)
            if remote:
                depth_client = cloud.RemoteDepthPredictor(args.depth_endpoint)
                seg_client = cloud.RemoteSegmenter(args.segment_endpoint)
            else:
                depth_client = cloud.SparseGuidedDepthStub(record.rgbd.depth)
                seg_client = cloud.ColorRegionSegmenter()
            try:
                result = cloud.extract_pointcloud(
                    record.rgbd, intr, depth_client, seg_client, kernel_px=args.kernel
                )
                cloud.write_ply(pdir / "pointcloud.ply", result.points, result.colors)
                processed += 1
            except (cloud.DegenerateDepthError, cloud.NoMaskError) as exc:
                flagged.append((entry.object_id, k, f"cloud: {exc}"))

    print(f"postprocessed {processed} points; {len(flagged)} flagged")
    for obj, k, reason in flagged:
        print(f"  {obj}/points/{k}: {reason}")
    return 0


def cmd_validate(args) -> int:
    root = Path(args.dataset)
    try:
        manifest = store.build_manifest(root)
    except MultisenseError as exc:
        print(f"manifest error: {exc}", file=sys.stderr)
        return 1
    errors = 0
    incomplete = 0
    for entry in manifest.objects:
        if not entry.complete:
            incomplete += 1
        for k in range(POINTS_PER_OBJECT):
            pdir = store.point_dir(root, entry.object_id, k)
            if not pdir.exists():
                continue
            if not store.point_is_complete(pdir):
                print(f"warning: partial point {entry.object_id}/points/{k}")
                continue
            try:
                store.read_point_record(pdir)
            except MultisenseError as exc:
                print(f"error: {entry.object_id}/points/{k}: {exc}", file=sys.stderr)
                errors += 1
    store.save_manifest(manifest)
    complete = len(manifest.complete_ids())
    print(
        f"{len(manifest.objects)} objects ({complete} complete, {incomplete} incomplete); "
        f"{errors} errors"
    )
    return 1 if errors else 0


def cmd_split(args) -> int:
    root = Path(args.dataset)
    manifest = store.build_manifest(root)
    try:
        split = store.split_dataset(manifest, args.train, args.seed)
    except ValueError as exc:
        print(f"split error: {exc}", file=sys.stderr)
        return 1
    path = store.save_split(root, split, args.name)
    print(f"wrote {path} ({len(split.train_ids)} train / {len(split.test_ids)} test)")
    return 0


def _load_table(path: str) -> EmbeddingTable:
    prefix = Path(path)
    if prefix.suffix in (".json", ".bin"):
        prefix = prefix.with_suffix("")
    return EmbeddingTable.load(prefix)


def _eval_config(path: str | None) -> EvalConfig:
    cfg = EvalConfig()
    if path:
        raw = json.loads(Path(path).read_text())
        cfg = EvalConfig(
            n_objects=raw.get("n_objects"),
            m_points=int(raw.get("m_points", cfg.m_points)),
            top_k=tuple(raw.get("top_k", cfg.top_k)),
            n_samplings=int(raw.get("n_samplings", cfg.n_samplings)),
            temperature=float(raw.get("temperature", cfg.temperature)),
            seed=int(raw.get("seed", cfg.seed)),
        )
    return cfg


def cmd_eval(args) -> int:
    if args.protocol in ("retrieval", "localization"):
        table = _load_table(args.table)
        cfg = _eval_config(args.config)
        modalities = table.modalities()
        results = {}
        grid = {}
        for q, t in ordered_pairs(modalities):
            if args.protocol == "retrieval":
                res = retrieval_eval(table, q, t, cfg)
                results[(q, t)] = res.accuracies
                grid[(q, t)] = res.accuracies[max(cfg.top_k)]
            else:
                res = localization_eval(table, q, t, cfg)
                results[(q, t)] = {1: res.accuracy}
                grid[(q, t)] = res.accuracy
                if res.skipped_objects:
                    print(f"warning: skipped {len(res.skipped_objects)} objects for {q.value}->{t.value}")
        title = (
            f"cross-sensory retrieval top-{max(cfg.top_k)} accuracy (%)"
            if args.protocol == "retrieval"
            else "contact localization top-1 accuracy (%)"
        )
        print(format_grid(grid, title))
        if args.out:
            Path(args.out).write_text(json.dumps(results_to_json(results), indent=2) + "\n")
            print(f"wrote {args.out}")
        return 0

    # sweep
    if args.synthetic or not args.features:
        features = synthetic_shared_latent_features(seed=args.seed)
    else:
        table = _load_table(args.features)
        features = {}
        for modality in table.modalities():
            keys = [
                (obj, p)
                for obj in table.object_ids(modality)
                for p in table.point_indices(modality, obj)
            ]
            x = np.stack([table.get(modality, obj, p) for obj, p in keys])
            features[modality] = FeatureSet(keys=keys, x=x)
    sizes = [int(s) for s in args.sizes.split(",")]
    cfg = TrainConfig(seed=args.seed, n_steps=args.steps, learning_rate=args.lr)
    curve = scaling_sweep(features, sizes, cfg, n_test=args.n_test)
    print("size, mean top-5 accuracy")
    for point in curve:
        print(f"{point.size}, {point.accuracy * 100:.1f}%")
    if args.out:
        payload = [
            {
                "size": point.size,
                "accuracy": point.accuracy,
                "per_pair": {f"{q.value}->{t.value}": v for (q, t), v in point.per_pair.items()},
            }
            for point in curve
        ]
        Path(args.out).write_text(json.dumps(payload, indent=2) + "\n")
        print(f"wrote {args.out}")
    return 0


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multisense",
        description="Multi-sensory capture, post-processing, and cross-modal evaluation",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("capture", help="run the capture daemon over a simulated rig")
    p.add_argument("--sim", required=True, help="scenario JSON file")
    p.add_argument("--dataset", required=True, help="dataset root directory")
    p.add_argument("--listen", help="host:port for UI clients (default: headless)")
    p.add_argument("--config", help="session config JSON")
    p.add_argument("--auto", action="store_true", help="scripted operator issues UI commands")
    p.add_argument("--realtime", action="store_true", help="pace sim time to the wall clock")
    p.add_argument("--max-sim-s", type=float, default=300.0)
    p.set_defaults(func=cmd_capture)

    p = sub.add_parser("postprocess", help="normalize audio and extract point clouds")
    p.add_argument("--dataset", required=True)
    p.add_argument("--stub-models", action="store_true", help="use in-repo deterministic stubs")
    p.add_argument("--depth-endpoint", help="remote depth model base URL")
    p.add_argument("--segment-endpoint", help="remote segmentation model base URL")
    p.add_argument("--kernel", type=int, default=5, help="erosion kernel (odd pixels)")
    p.set_defaults(func=cmd_postprocess)

    p = sub.add_parser("validate", help="check a dataset tree and write its manifest")
    p.add_argument("--dataset", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("split", help="write a deterministic train/test split")
    p.add_argument("--dataset", required=True)
    p.add_argument("--train", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name", default="train_test")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("eval", help="retrieval / localization / scaling sweep")
    p.add_argument("protocol", choices=["retrieval", "localization", "sweep"])
    p.add_argument("--table", help="embedding table prefix (.bin/.json pair)")
    p.add_argument("--features", help="feature table prefix for sweep")
    p.add_argument("--synthetic", action="store_true", help="sweep on synthetic features")
    p.add_argument("--config", help="eval config JSON")
    p.add_argument("--sizes", default="4,16,40")
    p.add_argument("--steps", type=int, default=150)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--n-test", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write a JSON report here")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO)
    if args.command == "eval" and args.protocol in ("retrieval", "localization") and not args.table:
        parser.error("eval retrieval/localization requires --table")
    try:
        return args.func(args)
    except MultisenseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
