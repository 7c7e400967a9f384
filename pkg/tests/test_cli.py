"""End-to-end command-line tests run in-process through cli.main."""

import json
import os

import numpy as np
import pytest

from noisebands.audio_io import read_wav, write_wav
from noisebands.cli import main
from noisebands.features import ControlCurve, RATE_INTERNAL, save_curve

FS = 8000.0


def make_clip(num_samples=4000, seed=2):
    rng = np.random.default_rng(seed)
    t = np.arange(num_samples) / FS
    env = 0.1 + 0.8 * np.abs(np.sin(2 * np.pi * 3.0 * t))
    return (env * rng.standard_normal(num_samples) * 0.3).astype(np.float64)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Shared pipeline artifacts: baked bank, training clip, finished run."""
    ws = tmp_path_factory.mktemp("cli")
    bank = str(ws / "bank.nbnb")
    clip = str(ws / "clip.wav")
    run_dir = str(ws / "run")
    write_wav(clip, FS, make_clip())
    assert main(["bake", "--fs", "8000", "--filters", "16", "--fmin", "40",
                 "--seed", "3", "--out", bank]) == 0
    assert main(["train", clip, "--bank", bank, "--controls", "loudness",
                 "--chunk", "512", "--batch", "2", "--lr", "0.001",
                 "--epochs", "1", "--window", "4", "--hidden", "4",
                 "--depth", "1", "--seed", "5", "--run-dir", run_dir]) == 0
    curve_path = str(ws / "ramp.nbcv")
    curve = ControlCurve(name="loudness", values=np.linspace(0.0, 1.0, 64),
                         rate=RATE_INTERNAL, norm_min=0.0, norm_max=1.0)
    save_curve(curve, curve_path)
    return {"dir": ws, "bank": bank, "clip": clip, "run": run_dir,
            "checkpoint": os.path.join(run_dir, "model-final.nbck"),
            "curve": curve_path}


class TestBake:
    def test_writes_bank_and_reports_it(self, workspace, capsys):
        out = str(workspace["dir"] / "fresh.nbnb")
        assert main(["bake", "--fs", "8000", "--filters", "16", "--fmin", "40",
                     "--out", out]) == 0
        assert os.path.exists(out)
        assert "wrote" in capsys.readouterr().out

    def test_refuses_to_overwrite_without_force(self, workspace, capsys):
        rc = main(["bake", "--fs", "8000", "--filters", "16", "--fmin", "40",
                   "--out", workspace["bank"]])
        assert rc == 1
        err = capsys.readouterr().err
        assert err.startswith("error:NoiseBandsError:")
        assert "--force" in err

    def test_force_overwrites(self, workspace):
        out = str(workspace["dir"] / "over.nbnb")
        assert main(["bake", "--fs", "8000", "--filters", "16", "--fmin", "40",
                     "--out", out]) == 0
        assert main(["bake", "--fs", "8000", "--filters", "16", "--fmin", "40",
                     "--out", out, "--force"]) == 0

    def test_print_config_dumps_json_and_skips_work(self, workspace, capsys):
        out = str(workspace["dir"] / "never.nbnb")
        assert main(["bake", "--filters", "8", "--out", out,
                     "--print-config"]) == 0
        resolved = json.loads(capsys.readouterr().out)
        assert resolved["filters"] == 8
        assert resolved["fs"] == 44100.0  # untouched default
        assert not os.path.exists(out)

    def test_flags_override_config_file(self, workspace, capsys):
        cfg = workspace["dir"] / "cfg.json"
        cfg.write_text(json.dumps({"filters": 8, "fmin": 55.0}))
        assert main(["bake", "--config", str(cfg), "--filters", "4",
                     "--print-config"]) == 0
        resolved = json.loads(capsys.readouterr().out)
        assert resolved["filters"] == 4      # flag beats file
        assert resolved["fmin"] == 55.0      # file beats default

    def test_invalid_geometry_reports_config_error(self, workspace, capsys):
        rc = main(["bake", "--fs", "8000", "--filters", "7",
                   "--out", str(workspace["dir"] / "bad.nbnb")])
        assert rc == 1
        assert capsys.readouterr().err.startswith("error:LayoutError:")


class TestTrain:
    def test_run_directory_artifacts(self, workspace):
        run = workspace["run"]
        assert os.path.exists(os.path.join(run, "model-final.nbck"))
        assert os.path.exists(os.path.join(run, "loss.csv"))
        with open(os.path.join(run, "config.json")) as fh:
            cfg = json.load(fh)
        assert cfg["train"]["chunk_len"] == 512
        assert cfg["backend"] == "bands"

    def test_missing_bank_is_an_error(self, workspace, capsys):
        rc = main(["train", workspace["clip"], "--controls", "loudness",
                   "--epochs", "1"])
        assert rc == 1
        assert capsys.readouterr().err.startswith("error:NoiseBandsError:")

    def test_no_audio_files_found(self, workspace, capsys):
        empty = workspace["dir"] / "empty"
        empty.mkdir(exist_ok=True)
        rc = main(["train", str(empty), "--bank", workspace["bank"],
                   "--epochs", "1"])
        assert rc == 1
        assert capsys.readouterr().err.startswith("error:NoiseBandsError:")


class TestSynth:
    def test_curve_drive_produces_exact_length(self, workspace):
        out = str(workspace["dir"] / "synth.wav")
        assert main(["synth", "--checkpoint", workspace["checkpoint"],
                     "--bank", workspace["bank"], "--curve", workspace["curve"],
                     "--length-frames", "64", "--out", out]) == 0
        rate, audio = read_wav(out)
        assert rate == FS  # sample rate comes from the checkpoint
        assert audio.shape == (64 * 4,)  # frames x window from training

    def test_internal_rate_curve_sets_length_without_flag(self, workspace):
        out = str(workspace["dir"] / "synth2.wav")
        assert main(["synth", "--checkpoint", workspace["checkpoint"],
                     "--bank", workspace["bank"], "--curve", workspace["curve"],
                     "--out", out]) == 0
        _, audio = read_wav(out)
        assert audio.shape == (64 * 4,)

    def test_from_audio_extracts_controls(self, workspace):
        out = str(workspace["dir"] / "resynth.wav")
        assert main(["synth", "--checkpoint", workspace["checkpoint"],
                     "--bank", workspace["bank"],
                     "--from-audio", workspace["clip"], "--out", out]) == 0
        _, audio = read_wav(out)
        assert audio.shape == ((4000 // 4) * 4,)

    def test_wrong_curve_count_is_an_error(self, workspace, capsys):
        rc = main(["synth", "--checkpoint", workspace["checkpoint"],
                   "--bank", workspace["bank"],
                   "--out", str(workspace["dir"] / "no.wav")])
        assert rc == 1
        assert capsys.readouterr().err.startswith("error:NoiseBandsError:")

    def test_missing_checkpoint_reports_file_not_found(self, workspace, capsys):
        rc = main(["synth", "--checkpoint", str(workspace["dir"] / "nope.nbck"),
                   "--bank", workspace["bank"],
                   "--out", str(workspace["dir"] / "no.wav")])
        assert rc == 1
        assert capsys.readouterr().err.startswith("error:FileNotFound:")

    def test_missing_bank_flag_is_an_error(self, workspace, capsys):
        rc = main(["synth", "--checkpoint", workspace["checkpoint"],
                   "--curve", workspace["curve"],
                   "--out", str(workspace["dir"] / "no.wav")])
        assert rc == 1
        assert capsys.readouterr().err.startswith("error:NoiseBandsError:")


class TestRandomise:
    def test_requires_at_least_one_operation(self, workspace, capsys):
        rc = main(["randomise", "--checkpoint", workspace["checkpoint"],
                   "--bank", workspace["bank"], "--curve", workspace["curve"],
                   "--out", str(workspace["dir"] / "no.wav")])
        assert rc == 1
        assert capsys.readouterr().err.startswith("error:NoiseBandsError:")

    def test_topk_variation_renders(self, workspace):
        out = str(workspace["dir"] / "rand.wav")
        assert main(["randomise", "--checkpoint", workspace["checkpoint"],
                     "--bank", workspace["bank"], "--curve", workspace["curve"],
                     "--topk", "2,0.5,2.0", "--frame-len", "16",
                     "--seed", "9", "--out", out]) == 0
        _, audio = read_wav(out)
        assert audio.shape == (64 * 4,)

    def test_seed_makes_variation_reproducible(self, workspace):
        a = str(workspace["dir"] / "ra.wav")
        b = str(workspace["dir"] / "rb.wav")
        argv = ["randomise", "--checkpoint", workspace["checkpoint"],
                "--bank", workspace["bank"], "--curve", workspace["curve"],
                "--shift-rand", "4,2", "--frame-len", "16", "--seed", "21"]
        assert main(argv + ["--out", a]) == 0
        assert main(argv + ["--out", b]) == 0
        with open(a, "rb") as fa, open(b, "rb") as fb:
            assert fa.read() == fb.read()

    def test_stereo_writes_two_channels(self, workspace):
        out = str(workspace["dir"] / "stereo.wav")
        assert main(["randomise", "--checkpoint", workspace["checkpoint"],
                     "--bank", workspace["bank"], "--curve", workspace["curve"],
                     "--stereo", "--seed", "4", "--out", out]) == 0
        _, audio = read_wav(out, mono=False)
        assert audio.ndim == 2 and audio.shape[1] == 2
        assert audio.shape[0] == 64 * 4


class TestTransfer:
    def test_source_loudness_drives_the_model(self, workspace):
        out = str(workspace["dir"] / "transfer.wav")
        assert main(["transfer", "--checkpoint", workspace["checkpoint"],
                     "--bank", workspace["bank"],
                     "--source", workspace["clip"], "--out", out]) == 0
        _, audio = read_wav(out)
        assert audio.shape == ((4000 // 4) * 4,)

    def test_offset_flag_changes_output(self, workspace):
        base = str(workspace["dir"] / "t0.wav")
        louder = str(workspace["dir"] / "t6.wav")
        argv = ["transfer", "--checkpoint", workspace["checkpoint"],
                "--bank", workspace["bank"], "--source", workspace["clip"]]
        assert main(argv + ["--out", base]) == 0
        assert main(argv + ["--offset", "6", "--out", louder]) == 0
        _, a = read_wav(base)
        _, b = read_wav(louder)
        assert not np.array_equal(a, b)


class TestCompare:
    def test_writes_csv_with_one_row_per_backend(self, workspace):
        out = str(workspace["dir"] / "compare.csv")
        assert main(["compare", workspace["clip"], "--bank", workspace["bank"],
                     "--backends", "bands,baseline:64", "--controls", "loudness",
                     "--chunk", "512", "--batch", "2", "--epochs", "1",
                     "--window", "4", "--hidden", "4", "--depth", "1",
                     "--seed", "5", "--out", out]) == 0
        with open(out) as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
        assert lines[0] == "backend,taps,steps,smoothed_loss,val_loss"
        assert len(lines) == 3
        first = lines[1].split(",")
        second = lines[2].split(",")
        assert first[0] == "bands" and second[0] == "baseline"
        assert second[1] == "64"
        assert float(first[3]) > 0.0 and np.isfinite(float(second[4]))

    def test_unknown_backend_reports_error(self, workspace, capsys):
        rc = main(["compare", workspace["clip"], "--backends", "nope",
                   "--epochs", "1", "--chunk", "512", "--batch", "2",
                   "--out", str(workspace["dir"] / "x.csv")])
        assert rc == 1
        assert capsys.readouterr().err.startswith("error:NoiseBandsError:")
