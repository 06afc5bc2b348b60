"""Command-line pipeline: bundle generation, inference, evaluation, the
corruption sweep and exit-code behavior."""

import json
from pathlib import Path

import numpy as np
import pytest

from hbum.cli import main
from hbum.io import (
    BUNDLE_FILES,
    RESULT_FILES,
    read_bundle,
    read_manifest,
    read_results,
    write_results,
)
from hbum.model import ClusterParams, InteractionMatrix, NoiseModel
from hbum.sampler import ChainState


SCENE_CONFIG = {
    "scene": {
        "height": 16,
        "width": 16,
        "clusters": 3,
        "classes": 2,
        "endmembers": 3,
        "cluster_to_class": [1, 1, 2],
        "dirichlet_means": "auto",
        "concentration": 30.0,
        "snr_db": 28.0,
        "potts_beta": 0.9,
        "potts_sweeps": 15,
    },
    "bands": 24,
    "training": {"kind": "top_rows", "fraction": 0.25, "eta": 0.95},
    "seed": 3,
}

MODEL_CONFIG = {
    "clusters": 3,
    "classes": 2,
    "endmembers": 3,
    "beta1": 0.8,
    "beta2": 0.8,
    "iterations": 16,
    "burnin": 4,
    "seed": 11,
}


@pytest.fixture
def configs(tmp_path):
    scene_path = tmp_path / "scene.json"
    scene_path.write_text(json.dumps(SCENE_CONFIG))
    model_path = tmp_path / "model.json"
    model_path.write_text(json.dumps(MODEL_CONFIG))
    return scene_path, model_path


def bundle_bytes(bundle_dir):
    return {name: (Path(bundle_dir) / name).read_bytes() for name in BUNDLE_FILES}


def results_bytes(results_dir):
    return {name: (Path(results_dir) / name).read_bytes() for name in RESULT_FILES}


class TestGenerate:
    def test_writes_complete_bundle(self, configs, tmp_path):
        scene_path, _ = configs
        out = tmp_path / "bundle"
        assert main(["generate", str(scene_path), "--out", str(out)]) == 0
        for name in BUNDLE_FILES:
            assert (out / name).exists(), name
        bundle = read_bundle(out)
        assert bundle.Y.data.shape == (24, 256)
        assert bundle.sup.n_labeled == 64
        manifest = read_manifest(out / "scene_manifest.json")
        assert manifest["kind"] == "scene"
        assert manifest["config"]["scene"]["clusters"] == 3
        # the resolved mean matrix is echoed so the manifest is re-runnable
        assert len(manifest["config"]["scene"]["dirichlet_means"]) == 3

    def test_rerun_is_byte_identical(self, configs, tmp_path):
        scene_path, _ = configs
        out1, out2 = tmp_path / "b1", tmp_path / "b2"
        main(["generate", str(scene_path), "--out", str(out1)])
        main(["generate", str(scene_path), "--out", str(out2)])
        assert bundle_bytes(out1) == bundle_bytes(out2)

    def test_manifest_config_echo_regenerates_identically(self, configs, tmp_path):
        # the echoed config block is itself a loadable config, so a manifest
        # alone is enough to rebuild the bundle byte for byte
        scene_path, _ = configs
        out1, out2 = tmp_path / "b1", tmp_path / "b2"
        main(["generate", str(scene_path), "--out", str(out1)])
        manifest = read_manifest(out1 / "scene_manifest.json")
        echoed = tmp_path / "echoed.json"
        echoed.write_text(json.dumps(manifest["config"]))
        main(["generate", str(echoed), "--out", str(out2)])
        assert bundle_bytes(out1) == bundle_bytes(out2)

    def test_run_manifest_echo_reruns_identically(self, configs, tmp_path):
        scene_path, model_path = configs
        bundle = tmp_path / "bundle"
        main(["generate", str(scene_path), "--out", str(bundle)])
        r1, r2 = tmp_path / "r1", tmp_path / "r2"
        main(["run", str(bundle), str(model_path), "--out", str(r1)])
        manifest = read_manifest(r1 / "run_manifest.json")
        echoed = tmp_path / "model_echo.json"
        echoed.write_text(json.dumps(manifest["config"]))
        main(["run", str(bundle), str(echoed), "--out", str(r2)])
        assert results_bytes(r1) == results_bytes(r2)

    def test_seed_override_changes_bundle(self, configs, tmp_path):
        scene_path, _ = configs
        out1, out2 = tmp_path / "b1", tmp_path / "b2"
        main(["generate", str(scene_path), "--out", str(out1)])
        main(["generate", str(scene_path), "--out", str(out2), "--seed", "99"])
        assert bundle_bytes(out1) != bundle_bytes(out2)

    def test_missing_field_exits_2(self, tmp_path):
        broken = json.loads(json.dumps(SCENE_CONFIG))
        del broken["scene"]["width"]
        path = tmp_path / "broken.json"
        path.write_text(json.dumps(broken))
        assert main(["generate", str(path), "--out", str(tmp_path / "x")]) == 2

    def test_unreadable_config_exits_4(self, tmp_path):
        assert main(["generate", str(tmp_path / "missing.json"), "--out", str(tmp_path / "x")]) == 4


class TestRun:
    def test_produces_readable_results(self, configs, tmp_path):
        scene_path, model_path = configs
        bundle = tmp_path / "bundle"
        results = tmp_path / "results"
        main(["generate", str(scene_path), "--out", str(bundle)])
        assert main(["run", str(bundle), str(model_path), "--out", str(results)]) == 0
        res = read_results(results)
        assert res.a_hat.data.shape == (3, 256)
        assert res.omega_freq.shape == (2, 256)
        np.testing.assert_allclose(res.omega_freq.sum(axis=0), 1.0, atol=1e-12)
        assert res.manifest["recorded_sweeps"] == 12
        assert res.manifest["config"]["iterations"] == 16

    def test_rerun_byte_identical(self, configs, tmp_path):
        scene_path, model_path = configs
        bundle = tmp_path / "bundle"
        main(["generate", str(scene_path), "--out", str(bundle)])
        r1, r2 = tmp_path / "r1", tmp_path / "r2"
        main(["run", str(bundle), str(model_path), "--out", str(r1)])
        main(["run", str(bundle), str(model_path), "--out", str(r2)])
        assert results_bytes(r1) == results_bytes(r2)

    def test_flag_overrides_apply(self, configs, tmp_path):
        scene_path, model_path = configs
        bundle = tmp_path / "bundle"
        results = tmp_path / "results"
        main(["generate", str(scene_path), "--out", str(bundle)])
        main(
            [
                "run", str(bundle), str(model_path), "--out", str(results),
                "--iters", "10", "--burnin", "2", "--beta1", "0.5",
            ]
        )
        manifest = read_manifest(results / "run_manifest.json")
        assert manifest["config"]["iterations"] == 10
        assert manifest["config"]["burnin"] == 2
        assert manifest["config"]["beta1"] == 0.5
        assert manifest["recorded_sweeps"] == 8

    def test_corrupted_bundle_exits_4(self, configs, tmp_path):
        scene_path, model_path = configs
        bundle = tmp_path / "bundle"
        main(["generate", str(scene_path), "--out", str(bundle)])
        target = bundle / "Y.hbm"
        raw = bytearray(target.read_bytes())
        raw[len(raw) // 2] ^= 0xFF
        target.write_bytes(bytes(raw))
        code = main(["run", str(bundle), str(model_path), "--out", str(tmp_path / "r")])
        assert code == 4

    def test_mismatched_config_exits_2(self, configs, tmp_path):
        scene_path, model_path = configs
        bundle = tmp_path / "bundle"
        main(["generate", str(scene_path), "--out", str(bundle)])
        wrong = json.loads(model_path.read_text())
        wrong["endmembers"] = 5
        model2 = tmp_path / "model2.json"
        model2.write_text(json.dumps(wrong))
        assert main(["run", str(bundle), str(model2), "--out", str(tmp_path / "r")]) == 2


class TestEvaluate:
    def test_perfect_predictions_score_perfectly(self, configs, tmp_path, capsys):
        scene_path, _ = configs
        bundle_dir = tmp_path / "bundle"
        main(["generate", str(scene_path), "--out", str(bundle_dir)])
        bundle = read_bundle(bundle_dir)
        n_clusters, n_dims = 3, 3
        perfect = ChainState(
            A=bundle.a_true,
            noise=NoiseModel(1e-4),
            clusters=ClusterParams(
                np.full((n_clusters, n_dims), 1.0 / n_dims), np.ones((n_clusters, n_dims))
            ),
            z=bundle.z_true,
            q=InteractionMatrix(np.full((3, 2), 1.0 / 3.0)),
            omega=bundle.omega_true,
        )
        freq = np.zeros((2, 256))
        freq[bundle.omega_true.labels, np.arange(256)] = 1.0
        results_dir = tmp_path / "results"
        write_results(
            results_dir, perfect, freq,
            {"kind": "run", "counts": {"clusters": 3, "classes": 2}},
        )
        assert main(["evaluate", str(results_dir), str(bundle_dir)]) == 0
        metrics = read_manifest(results_dir / "metrics.json")
        assert metrics["kappa"] == 1.0
        assert metrics["rgmse"] == 0.0
        assert metrics["cluster_accuracy"] == 1.0
        text = (results_dir / "metrics.txt").read_text()
        assert "kappa=1.000000" in text
        assert "eval_set=unlabeled" in text

    def test_eval_all_expands_pixel_set(self, configs, tmp_path):
        scene_path, model_path = configs
        bundle_dir = tmp_path / "bundle"
        results_dir = tmp_path / "results"
        main(["generate", str(scene_path), "--out", str(bundle_dir)])
        main(["run", str(bundle_dir), str(model_path), "--out", str(results_dir)])
        main(["evaluate", str(results_dir), str(bundle_dir), "--eval-all"])
        metrics = read_manifest(results_dir / "metrics.json")
        assert metrics["eval_set"] == "all"
        assert len(metrics["q_hat"]) == 3

    def test_mismatched_pair_fails(self, configs, tmp_path):
        scene_path, model_path = configs
        b1, b2 = tmp_path / "b1", tmp_path / "b2"
        results = tmp_path / "results"
        main(["generate", str(scene_path), "--out", str(b1)])
        # a different-geometry bundle cannot score these results
        other = json.loads(json.dumps(SCENE_CONFIG))
        other["scene"]["height"] = 8
        other_path = tmp_path / "other.json"
        other_path.write_text(json.dumps(other))
        main(["generate", str(other_path), "--out", str(b2)])
        main(["run", str(b1), str(model_path), "--out", str(results)])
        assert main(["evaluate", str(results), str(b2)]) == 2


class TestSweepCorruption:
    def test_single_cell_matches_plain_run(self, configs, tmp_path):
        scene_path, model_path = configs
        bundle_dir = tmp_path / "bundle"
        results_dir = tmp_path / "results"
        sweep_dir = tmp_path / "sweep"
        main(["generate", str(scene_path), "--out", str(bundle_dir)])
        main(["run", str(bundle_dir), str(model_path), "--out", str(results_dir)])
        main(["evaluate", str(results_dir), str(bundle_dir)])
        kappa_run = read_manifest(results_dir / "metrics.json")["kappa"]
        assert (
            main(
                [
                    "sweep-corruption", str(bundle_dir), str(model_path),
                    "--out", str(sweep_dir), "--alphas", "0", "--trials", "1",
                ]
            )
            == 0
        )
        sweep = read_manifest(sweep_dir / "corruption_sweep.json")
        assert sweep["rows"][0]["alpha"] == 0.0
        assert sweep["rows"][0]["mean_kappa"] == pytest.approx(kappa_run, abs=0.0)

    def test_parallel_workers_match_serial(self, configs, tmp_path, monkeypatch):
        scene_path, model_path = configs
        bundle_dir = tmp_path / "bundle"
        main(["generate", str(scene_path), "--out", str(bundle_dir)])
        serial, parallel = tmp_path / "serial", tmp_path / "parallel"
        args = [
            "sweep-corruption", str(bundle_dir), str(model_path),
            "--alphas", "0,0.2", "--trials", "2",
        ]
        main(args + ["--out", str(serial)])
        monkeypatch.setenv("HBUM_THREADS", "2")
        main(args + ["--out", str(parallel)])
        assert (serial / "corruption_sweep.txt").read_text() == (
            parallel / "corruption_sweep.txt"
        ).read_text()

    def test_trial_count_validated(self, configs, tmp_path):
        scene_path, model_path = configs
        bundle_dir = tmp_path / "bundle"
        main(["generate", str(scene_path), "--out", str(bundle_dir)])
        code = main(
            [
                "sweep-corruption", str(bundle_dir), str(model_path),
                "--out", str(tmp_path / "s"), "--trials", "0",
            ]
        )
        assert code == 2

    def test_default_alpha_grid(self):
        from hbum.cli import _parse_alphas

        np.testing.assert_allclose(
            _parse_alphas(None), [0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4]
        )
        np.testing.assert_allclose(_parse_alphas("0,0.1"), [0.0, 0.1])
