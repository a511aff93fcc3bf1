"""CLI subcommands end to end."""

import json
from pathlib import Path

import pytest

from multisense import store
from multisense.cli import main
from multisense.crossmodal import (
    Modality,
    TrainConfig,
    synthetic_shared_latent_features,
    table_from_encoders,
    train_linear,
)
from multisense.records import POINTS_PER_OBJECT

from conftest import make_scenario


def write_scenario(tmp_path, **overrides) -> Path:
    scenario = make_scenario(**overrides)
    # serialize back to the JSON schema the CLI loads
    raw = {
        "name": scenario.name,
        "seed": scenario.seed,
        "sample_rate_hz": scenario.sample_rate_hz,
        "audio": {
            "record_pre_s": scenario.record_pre_s,
            "record_post_s": scenario.record_post_s,
            "noise_floor": scenario.noise_floor,
        },
        "calibration": {
            "scale_n_per_count": scenario.scale_n_per_count,
            "tare_counts": scenario.tare_counts,
            "m_eff_kg": scenario.m_eff_kg,
        },
        "strike": {"force_n": scenario.strike_force_n, "width_samples": scenario.strike_width_samples},
        "objects": [
            {
                "object_id": o.object_id,
                "label": o.label,
                "environment": o.environment.value,
                "modes": o.modes[0],
                "loudness_scale": o.loudness_scale[0],
                "geometry": o.geometry,
                "stiffness_n_per_mm": o.stiffness_n_per_mm,
            }
            for o in scenario.objects
        ],
        "script": [
            {
                "command": e.command,
                **({"at_s": e.at_s} if e.at_s is not None else {"on_phase": e.on_phase, "after_s": e.after_s}),
                **e.args,
            }
            for e in scenario.script
        ],
    }
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(raw, indent=2))
    return path


@pytest.fixture(scope="module")
def captured_dataset(tmp_path_factory):
    """Headless auto capture of one full object on a tilted plane."""

    tmp_path = tmp_path_factory.mktemp("cli")
    scenario_path = write_scenario(
        tmp_path,
        objects=[
            {
                "object_id": "mug01",
                "label": "ceramic mug",
                "environment": "kitchen",
                "modes": [[700.0, 12.0, 1.0], [1800.0, 25.0, 0.4]],
                "loudness_scale": 0.0005,
                "geometry": {"kind": "plane", "distance_m": 0.10, "normal": [0.12, -0.08, 1.0]},
                "stiffness_n_per_mm": 9.0,
            }
        ],
    )
    config = tmp_path / "session.json"
    config.write_text(
        json.dumps({"hammer": {"release_delay_s": 0.4, "record_pre_s": 0.1, "record_post_s": 0.35, "timeout_s": 3.0}})
    )
    dataset = tmp_path / "dataset"
    code = main(
        [
            "capture",
            "--sim",
            str(scenario_path),
            "--dataset",
            str(dataset),
            "--config",
            str(config),
            "--auto",
        ]
    )
    assert code == 0
    return dataset


class TestCaptureAndValidate:
    def test_capture_produces_complete_object(self, captured_dataset):
        manifest = store.build_manifest(captured_dataset)
        assert [e.complete for e in manifest.objects] == [True]
        record = store.read_point_record(store.point_dir(captured_dataset, "mug01", 5))
        assert record.point_index == 5

    def test_validate_exits_zero(self, captured_dataset, capsys):
        assert main(["validate", "--dataset", str(captured_dataset)]) == 0
        out = capsys.readouterr().out
        assert "1 objects (1 complete" in out
        assert (captured_dataset / "manifest.json").exists()

    def test_split_cli(self, captured_dataset, capsys):
        assert main(["split", "--dataset", str(captured_dataset), "--train", "1", "--seed", "9"]) == 0
        split = store.load_split(captured_dataset, "train_test")
        assert split.train_ids == {"mug01"}

    def test_split_paper_scale_400_of_500(self, tmp_path, capsys):
        root = tmp_path / "big"
        (root / "objects").mkdir(parents=True)
        for i in range(500):
            obj = root / "objects" / f"obj{i:04d}"
            (obj / "points").mkdir(parents=True)
            (obj / "meta.json").write_text(
                json.dumps(
                    {
                        "format_version": 1,
                        "object_id": f"obj{i:04d}",
                        "label": "x",
                        "environment": "workspace",
                    }
                )
            )
            for k in range(POINTS_PER_OBJECT):
                pdir = obj / "points" / str(k)
                pdir.mkdir()
                for name in store.REQUIRED_POINT_FILES:
                    (pdir / name).write_bytes(b"")
        assert main(["split", "--dataset", str(root), "--train", "400", "--seed", "0"]) == 0
        split = store.load_split(root, "train_test")
        assert len(split.train_ids) == 400
        assert len(split.test_ids) == 100


class TestPostprocess:
    def test_stub_models_write_outputs(self, captured_dataset, capsys):
        assert main(["postprocess", "--dataset", str(captured_dataset), "--stub-models"]) == 0
        out = capsys.readouterr().out
        assert "postprocessed" in out
        pdir = store.point_dir(captured_dataset, "mug01", 0)
        assert (pdir / "audio_norm.wav").exists()
        assert (pdir / "pointcloud.ply").exists()
        header = (pdir / "pointcloud.ply").read_text().splitlines()[0]
        assert header == "ply"

    def test_postprocess_deterministic(self, captured_dataset):
        pdir = store.point_dir(captured_dataset, "mug01", 1)
        main(["postprocess", "--dataset", str(captured_dataset), "--stub-models"])
        first = (pdir / "pointcloud.ply").read_bytes()
        main(["postprocess", "--dataset", str(captured_dataset), "--stub-models"])
        assert (pdir / "pointcloud.ply").read_bytes() == first


@pytest.fixture(scope="module")
def table_prefix(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("eval")
    features = synthetic_shared_latent_features(n_objects=25, seed=0)
    result = train_linear(
        features, "cross_sensory", TrainConfig(embed_dim=16, n_steps=80, learning_rate=1e-2, seed=0)
    )
    table = table_from_encoders(result.encoders, features)
    prefix = tmp / "table"
    table.save(prefix)
    return prefix


class TestEval:
    def test_retrieval_report(self, table_prefix, tmp_path, capsys):
        out = tmp_path / "report.json"
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"top_k": [1, 5], "n_samplings": 2}))
        code = main(
            ["eval", "retrieval", "--table", str(table_prefix), "--config", str(cfg), "--out", str(out)]
        )
        assert code == 0
        text = capsys.readouterr().out
        assert "retrieval top-5" in text
        report = json.loads(out.read_text())
        assert "rgb->audio" in report

    def test_localization_report(self, table_prefix, capsys):
        assert main(["eval", "localization", "--table", str(table_prefix)]) == 0
        assert "localization top-1" in capsys.readouterr().out

    def test_sweep_synthetic(self, tmp_path, capsys):
        out = tmp_path / "sweep.json"
        code = main(
            ["eval", "sweep", "--synthetic", "--sizes", "2,16", "--steps", "60", "--n-test", "10", "--out", str(out)]
        )
        assert code == 0
        curve = json.loads(out.read_text())
        assert [p["size"] for p in curve] == [2, 16]

    def test_eval_requires_table(self, capsys):
        with pytest.raises(SystemExit):
            main(["eval", "retrieval"])


class TestUsage:
    def test_unknown_subcommand_nonzero(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code != 0

    def test_no_args_usage(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code != 0
