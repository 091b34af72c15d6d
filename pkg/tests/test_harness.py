import json

import numpy as np
import pytest

from snrge import (
    EmbedderConfig,
    EvalReport,
    KnnConfig,
    SimulatorSource,
    SnrLabel,
    WavDirectorySource,
    load_report,
    merge_reports,
    resolve_source_clips,
    run_individual_snn_workflow,
    run_single_snn_workflow,
    run_spectral_workflow,
    save_report,
    simulate_generator,
    write_source_wavs,
)
from snrge.errors import DataError
from snrge.harness import LevelRecord, emit_report, train_single_embedder

WINDOW, HOP = 256, 64

MINI_EMBEDDER = EmbedderConfig(
    conv_blocks=2,
    dense_layers=1,
    embedding_dim=8,
    input_shape=(32, 32),
    batch_size=16,
    epochs=6,
    seed=11,
    learning_rate=1e-3,
    stop_val_loss=0.05,
)


@pytest.fixture(scope="module")
def spectral_report(mini_manifest):
    source = SimulatorSource(count=20, seed=77)
    return run_spectral_workflow(
        mini_manifest, source, "frequency", fft_size=4096, window=WINDOW, hop=HOP
    )


class TestSpectralWorkflow:
    def test_one_record_per_level(self, spectral_report, mini_manifest):
        assert len(spectral_report.levels) == len(mini_manifest.grid)
        for rec in spectral_report.levels:
            assert rec.n_samples == 20
            assert 0.0 <= rec.frequency_score <= 1.0
            assert rec.pixel_score is None

    def test_high_snr_scores_higher(self, spectral_report):
        by_db = {rec.snr.db: rec.frequency_score for rec in spectral_report.levels}
        assert by_db[10.0] >= by_db[-5.0] - 0.1
        assert by_db[10.0] >= 0.9

    def test_metadata_complete(self, spectral_report, mini_manifest):
        meta = spectral_report.metadata
        assert meta["manifest_digest"] == mini_manifest.digest()
        assert meta["workflow"] == "spectral-frequency"
        assert "configs" in meta and "seeds" in meta and "created_utc" in meta

    def test_pixel_method(self, mini_manifest):
        source = SimulatorSource(count=10, seed=78)
        report = run_spectral_workflow(
            mini_manifest, source, "pixels", window=WINDOW, hop=HOP
        )
        for rec in report.levels:
            assert rec.pixel_score is not None
            assert 0.0 <= rec.pixel_score <= 1.0

    def test_unknown_method(self, mini_manifest):
        with pytest.raises(ValueError):
            run_spectral_workflow(mini_manifest, SimulatorSource(count=2), "cepstrum")


class TestSources:
    def test_wav_directory_round_trip_equivalence(self, mini_manifest, tmp_path):
        source = SimulatorSource(count=30, seed=80)
        clips_by_level = {
            level: resolve_source_clips(source, level, mini_manifest)
            for level in mini_manifest.grid
        }
        write_source_wavs(clips_by_level, tmp_path / "wavs")
        from_sim = run_spectral_workflow(
            mini_manifest, source, "frequency", fft_size=4096, window=WINDOW, hop=HOP
        )
        from_dir = run_spectral_workflow(
            mini_manifest,
            WavDirectorySource(path=str(tmp_path / "wavs")),
            "frequency",
            fft_size=4096,
            window=WINDOW,
            hop=HOP,
        )
        for a, b in zip(from_sim.levels, from_dir.levels):
            assert a.snr == b.snr
            assert abs(a.frequency_score - b.frequency_score) <= 0.01

    def test_empty_directory_is_an_error(self, mini_manifest, tmp_path):
        (tmp_path / "empty" / "10dB").mkdir(parents=True)
        with pytest.raises(DataError):
            resolve_source_clips(
                WavDirectorySource(path=str(tmp_path / "empty")), 10.0, mini_manifest
            )

    def test_rate_mismatch_rejected(self, mini_manifest, tmp_path):
        from conftest import make_tone

        wrong_rate = make_tone(500, rate=4000, seconds=0.5)
        write_source_wavs({10.0: [wrong_rate]}, tmp_path / "bad")
        with pytest.raises(DataError):
            resolve_source_clips(
                WavDirectorySource(path=str(tmp_path / "bad")), 10.0, mini_manifest
            )

    def test_length_mismatch_rejected(self, mini_manifest, tmp_path):
        from conftest import make_tone

        too_short = make_tone(1500, rate=8000, seconds=0.25)
        write_source_wavs({10.0: [too_short]}, tmp_path / "short")
        with pytest.raises(DataError):
            resolve_source_clips(
                WavDirectorySource(path=str(tmp_path / "short")), 10.0, mini_manifest
            )

    def test_simulator_source_resolves_counts(self, mini_manifest):
        clips = resolve_source_clips(SimulatorSource(count=7, seed=5), -5.0, mini_manifest)
        assert len(clips) == 7


class TestReportPlumbing:
    def test_merge_and_emit(self, spectral_report, mini_manifest, tmp_path):
        other = EvalReport(metadata={"manifest_digest": mini_manifest.digest()})
        rec = other.record_for(SnrLabel.decibel(10.0))
        rec.nc_accuracy = 0.9
        merged = merge_reports(spectral_report, other)
        ten = merged.record_for(SnrLabel.decibel(10.0))
        assert ten.nc_accuracy == 0.9
        assert ten.frequency_score is not None

        out = tmp_path / "report"
        emit_report(merged, out)
        assert (out / "report.json").is_file()
        lines = (out / "levels.csv").read_text().splitlines()
        assert len(lines) == 1 + len(merged.levels)
        assert (out / "score_vs_snr.svg").is_file()

    def test_merge_rejects_mixed_manifests(self, spectral_report):
        other = EvalReport(metadata={"manifest_digest": "deadbeef"})
        other.record_for(SnrLabel.decibel(10.0))
        with pytest.raises(DataError):
            merge_reports(spectral_report, other)

    def test_json_round_trip_exact(self, spectral_report, tmp_path):
        path = tmp_path / "frag.json"
        save_report(spectral_report, path)
        loaded = load_report(path)
        for a, b in zip(spectral_report.levels, loaded.levels):
            assert a == b
        assert loaded.metadata == spectral_report.metadata

    def test_emit_requires_existing_parent(self, spectral_report, tmp_path):
        with pytest.raises(DataError):
            emit_report(spectral_report, tmp_path / "no" / "parent")
        emit_report(spectral_report, tmp_path / "fresh")  # parent exists -> created
        assert (tmp_path / "fresh" / "report.json").is_file()

    def test_emit_empty_report_errors(self, tmp_path):
        with pytest.raises(ValueError):
            emit_report(EvalReport(), tmp_path / "r")

    def test_record_snr_json_forms(self):
        report = EvalReport()
        report.record_for(SnrLabel.noise()).nc_accuracy = 1.0
        doc = report.to_doc()
        assert doc["levels"][0]["snr"] == "noise"
        back = EvalReport.from_doc(doc)
        assert back.levels[0].snr.is_noise


class TestDeterminism:
    def _run(self, manifest, monkeypatch, threads):
        monkeypatch.setenv("SNRGE_THREADS", str(threads))
        monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
        return run_spectral_workflow(
            manifest, SimulatorSource(count=8, seed=3), "frequency",
            fft_size=4096, window=WINDOW, hop=HOP,
        )

    def test_spectral_workflow_thread_count_invariant(self, mini_manifest, tmp_path, monkeypatch):
        a = self._run(mini_manifest, monkeypatch, 1)
        b = self._run(mini_manifest, monkeypatch, 2)
        pa, pb = tmp_path / "a.json", tmp_path / "b.json"
        save_report(a, pa)
        save_report(b, pb)
        assert pa.read_bytes() == pb.read_bytes()


@pytest.fixture(scope="module")
def single_run(mini_manifest, tmp_path_factory):
    out = tmp_path_factory.mktemp("single_run")
    source = SimulatorSource(count=12, seed=55)
    report = run_single_snn_workflow(
        mini_manifest, source, MINI_EMBEDDER,
        window=WINDOW, hop=HOP, out_dir=out,
        tsne_iterations=260, tsne_perplexity=4.0,
    )
    return report, out


class TestEmbedderWorkflows:
    def test_records_complete(self, single_run, mini_manifest):
        report, _ = single_run
        assert len(report.levels) == len(mini_manifest.grid)
        for rec in report.levels:
            assert rec.n_samples == 12
            for value in (rec.nc_accuracy, rec.noise_accuracy, rec.rmsde_uniform, rec.rmsde_weighted):
                assert value is not None and np.isfinite(value)
            assert 0.0 <= rec.nc_accuracy <= 1.0
            assert 0.0 <= rec.noise_accuracy <= 1.0
            assert rec.rmsde_uniform >= 0.0

    def test_extras_present(self, single_run):
        report, out = single_run
        assert "elbow" in report.extras
        elbow = report.extras["elbow"]
        assert len(elbow["k"]) == len(elbow["rmse"]) == len(elbow["r2"]) == len(elbow["max_dist"])
        assert "test_rmsde_weighted" in report.extras
        assert "pooled" in report.extras["test_rmsde_weighted"]
        assert "training" in report.extras
        assert (out / "real_embeddings_tsne.svg").is_file()
        assert (out / "source_embeddings_tsne.svg").is_file()

    def test_pretrained_net_reuse_matches(self, single_run, mini_manifest):
        report, _ = single_run
        result = train_single_embedder(mini_manifest, MINI_EMBEDDER, WINDOW, HOP)
        again = run_single_snn_workflow(
            mini_manifest, SimulatorSource(count=12, seed=55), MINI_EMBEDDER,
            window=WINDOW, hop=HOP, net=result.net,
        )
        for a, b in zip(report.levels, again.levels):
            assert a.nc_accuracy == b.nc_accuracy
            assert a.rmsde_weighted == b.rmsde_weighted

    def test_fixed_k_override(self, mini_manifest):
        result = train_single_embedder(mini_manifest, MINI_EMBEDDER, WINDOW, HOP)
        report = run_single_snn_workflow(
            mini_manifest, SimulatorSource(count=6, seed=56), MINI_EMBEDDER,
            KnnConfig(k=3), window=WINDOW, hop=HOP, net=result.net,
        )
        assert report.extras["elbow"]["used_k"] == 3

    def test_individual_workflow(self, mini_manifest):
        report = run_individual_snn_workflow(
            mini_manifest, SimulatorSource(count=10, seed=57), MINI_EMBEDDER,
            window=WINDOW, hop=HOP,
        )
        assert len(report.levels) == len(mini_manifest.grid)
        for rec in report.levels:
            assert rec.nc_accuracy is not None
            assert 0.0 <= rec.nc_accuracy <= 1.0
        extras = report.extras["individual_snn"]
        assert set(extras["final_val_loss"]) == {"-5", "10"}
        assert extras["failed_levels"] == {}
