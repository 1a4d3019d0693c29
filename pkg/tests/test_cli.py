import json

import numpy as np
import pytest

from kinebeat.audio import BeatList
from kinebeat.cli import main
from kinebeat.inversion import ModelDims, make_teacher_student_dataset, sample_json_dict
from kinebeat.pose import serialize_pose_file
from kinebeat.rhythm import RhythmSequence

from conftest import click_wav_bytes, pose_from_xy, triangle_pose, wav_bytes


def write_dataset(path, n=8, seed=7):
    path.mkdir()
    ds = make_teacher_student_dataset(ModelDims(), "mlp", "regression", n, seed=seed, frozen_seed=1001)
    for i, sample in enumerate(ds):
        (path / f"sample{i:03d}.json").write_text(json.dumps(sample_json_dict(sample)))


class TestExtractRhythm:
    def test_stationary_fixture_all_zero(self, tmp_path, capsys):
        poses = tmp_path / "still.json"
        poses.write_bytes(serialize_pose_file(pose_from_xy(np.full((400, 2, 2), 3.0))))
        out = tmp_path / "still.rhythm.json"
        code = main(["extract-rhythm", "--poses", str(poses), "--clip", "none", "--output", str(out)])
        assert code == 0
        assert not RhythmSequence.from_json(out.read_bytes()).bits.any()

    def test_oscillator_beats_near_reversals(self, tmp_path):
        poses = tmp_path / "osc.json"
        poses.write_bytes(serialize_pose_file(triangle_pose(n_frames=480, half_period=30)))
        out = tmp_path / "osc.rhythm.json"
        code = main(["extract-rhythm", "--poses", str(poses), "--clip", "none", "--output", str(out)])
        assert code == 0
        beats = np.flatnonzero(RhythmSequence.from_json(out.read_bytes()).bits)
        assert len(beats) > 10
        reversals = np.arange(30, 460, 30)
        for b in beats:
            assert np.abs(reversals - b).min() <= 1

    def test_clipped_output_files(self, tmp_path):
        poses = tmp_path / "osc.json"
        poses.write_bytes(serialize_pose_file(triangle_pose(n_frames=700, half_period=30)))
        out = tmp_path / "osc.rhythm.json"
        code = main(["extract-rhythm", "--poses", str(poses), "--output", str(out)])
        assert code == 0
        clips = sorted(tmp_path.glob("osc.rhythm_clip*.json"))
        assert len(clips) == 700 // 307
        for clip in clips:
            assert len(RhythmSequence.from_json(clip.read_bytes()).bits) == 307

    def test_missing_file_exits_2(self, capsys):
        assert main(["extract-rhythm", "--poses", "/nonexistent.json"]) == 2
        assert "error:" in capsys.readouterr().err

    def test_unknown_flag_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["extract-rhythm", "--poses", "x.json", "--bogus"])
        assert exc.value.code == 2


class TestDetectBeats:
    def test_silence_fixture_empty(self, tmp_path, capsys):
        wav = tmp_path / "silence.wav"
        wav.write_bytes(wav_bytes(np.zeros(int(5.12 * 22050)), 22050))
        assert main(["detect-beats", "--audio", str(wav)]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["beats_sec"] == []

    def test_click_fixture(self, tmp_path, capsys):
        wav = tmp_path / "clicks.wav"
        wav.write_bytes(click_wav_bytes(120, seconds=5.12))
        assert main(["detect-beats", "--audio", str(wav)]) == 0
        times = np.asarray(json.loads(capsys.readouterr().out)["beats_sec"])
        assert 10 <= len(times) <= 11
        assert np.abs(np.diff(times) - 0.5).max() <= 0.05

    def test_unsupported_codec_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.wav"
        bad.write_bytes(b"RIFFxxxxWAVEfmt ")
        assert main(["detect-beats", "--audio", str(bad)]) == 2


class TestEvaluate:
    def test_identical_files_score_one(self, tmp_path, capsys):
        beats = tmp_path / "beats.json"
        beats.write_bytes(BeatList(times=np.array([0.5, 1.0, 1.5])).to_json())
        assert main(["evaluate", "--gen", str(beats), "--ref", str(beats)]) == 0
        doc = json.loads(capsys.readouterr().out)
        report = doc["clips"][0]["report"]
        assert report["bcs"] == report["bhs"] == report["f1"] == 1.0

    def test_worked_pair(self, tmp_path, capsys):
        gen = tmp_path / "gen.json"
        ref = tmp_path / "ref.json"
        gen.write_bytes(BeatList(times=np.array([1.0, 2.0, 3.0])).to_json())
        ref.write_bytes(BeatList(times=np.array([1.1, 2.5])).to_json())
        assert main(["evaluate", "--gen", str(gen), "--ref", str(ref)]) == 0
        report = json.loads(capsys.readouterr().out)["clips"][0]["report"]
        assert report["f1"] == pytest.approx(0.4)
        assert report["b_a"] == 1

    def test_phase_align_recovers_shift(self, tmp_path, capsys):
        ref_times = np.arange(0.5, 5.0, 0.5)
        gen = tmp_path / "gen.json"
        ref = tmp_path / "ref.json"
        gen.write_bytes(BeatList(times=ref_times + 0.37).to_json())
        ref.write_bytes(BeatList(times=ref_times).to_json())
        assert main(["evaluate", "--gen", str(gen), "--ref", str(ref), "--phase-align"]) == 0
        doc = json.loads(capsys.readouterr().out)
        phase = doc["clips"][0]["phase_align"]
        assert abs(phase["offset"] - (-0.37)) <= 0.01 + 1e-12
        assert phase["report"]["f1"] == 1.0

    def test_rhythm_file_accepted_and_csv_summary(self, tmp_path, capsys):
        bits = np.zeros(120, dtype=int)
        bits[[30, 60, 90]] = 1
        r = tmp_path / "r.json"
        r.write_bytes(RhythmSequence(fps=60.0, bits=bits).to_json())
        b = tmp_path / "b.json"
        b.write_bytes(BeatList(times=np.array([0.5, 1.0, 1.5])).to_json())
        assert main(["evaluate", "--gen", str(r), "--ref", str(b), "--format", "csv"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0].startswith("clip,")
        assert lines[-1].startswith("summary,")
        assert len(lines) == 3

    def test_tempo_difference_included(self, tmp_path, capsys):
        beats = tmp_path / "beats.json"
        beats.write_bytes(BeatList(times=np.array([1.0])).to_json())
        tg = tmp_path / "tg.json"
        tr = tmp_path / "tr.json"
        tg.write_text('{"bpm": 120.0}')
        tr.write_text('{"bpm": 104.0}')
        assert main([
            "evaluate", "--gen", str(beats), "--ref", str(beats),
            "--tempo-gen", str(tg), "--tempo-ref", str(tr),
        ]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["tempo_difference_bpm"] == 16.0

    def test_unparseable_input_exits_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{broken")
        assert main(["evaluate", "--gen", str(bad), "--ref", str(bad)]) == 2


class TestTempo:
    @pytest.mark.parametrize("bpm", [120, 90])
    def test_click_fixture(self, tmp_path, capsys, bpm):
        wav = tmp_path / "clicks.wav"
        wav.write_bytes(click_wav_bytes(bpm, seconds=5.12))
        assert main(["tempo", "--audio", str(wav)]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert abs(doc["bpm"] - bpm) <= 1.0

    def test_silence_exits_2(self, tmp_path, capsys):
        wav = tmp_path / "silence.wav"
        wav.write_bytes(wav_bytes(np.zeros(22050 * 2), 22050))
        assert main(["tempo", "--audio", str(wav)]) == 2
        assert "no periodicity" in capsys.readouterr().err


class TestTrainToy:
    def test_teacher_student_defaults(self, tmp_path, capsys):
        data = tmp_path / "data"
        write_dataset(data)
        out = tmp_path / "ckpt.json"
        code = main(["train-toy", "--data", str(data), "--seed", "7", "--output", str(out)])
        assert code == 0
        losses = (tmp_path / "ckpt_loss.csv").read_text().strip().splitlines()[1:]
        first = float(losses[0].split(",")[1])
        last = float(losses[-1].split(",")[1])
        assert last <= 0.1 * first
        doc = json.loads(out.read_text())
        assert set(doc["frozen_digests"]) == {"embedding_table", "generator"}

    def test_zero_epochs_equals_initialization(self, tmp_path):
        data = tmp_path / "data"
        write_dataset(data, n=4)
        a = tmp_path / "a.json"
        code = main(["train-toy", "--data", str(data), "--epochs", "0", "--seed", "3",
                     "--output", str(a)])
        assert code == 0
        doc = json.loads(a.read_text())
        from kinebeat.inversion import init_encoder_params

        init = init_encoder_params(ModelDims(), "mlp", 3)
        for name, block in init.blocks().items():
            np.testing.assert_array_equal(np.asarray(doc["params"][name]), block)

    def test_same_seed_is_bitwise_identical(self, tmp_path):
        data = tmp_path / "data"
        write_dataset(data, n=4)
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        args = ["train-toy", "--data", str(data), "--epochs", "40", "--seed", "11"]
        assert main(args + ["--output", str(a)]) == 0
        assert main(args + ["--output", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_empty_dir_exits_2(self, tmp_path):
        data = tmp_path / "data"
        data.mkdir()
        assert main(["train-toy", "--data", str(data)]) == 2


class TestGradcheckCommand:
    def test_mlp_regression_passes(self, tmp_path):
        out = tmp_path / "report.json"
        code = main(["gradcheck", "--variant", "mlp", "--mode", "regression",
                     "--seed", "0", "--output", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["passed"]
        assert doc["max_error"] < 1e-4

    def test_mlp_categorical_passes(self, tmp_path):
        out = tmp_path / "report.json"
        code = main(["gradcheck", "--variant", "mlp", "--mode", "categorical",
                     "--seed", "0", "--output", str(out)])
        assert code == 0

    def test_env_seed_fallback(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("KINEBEAT_SEED", "123")
        assert main(["gradcheck", "--variant", "mlp", "--mode", "regression"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["seed"] == 123
