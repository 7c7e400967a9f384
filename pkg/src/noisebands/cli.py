"""Command-line entry point: bake, train, synth, transfer, randomise, compare, serve.

Config precedence is flags > --config JSON file > built-in defaults;
--print-config dumps the resolved configuration as JSON and exits without
running, for run provenance. Every failure exits nonzero with a single
machine-parsable "error:<Code>: message" line on stderr. All randomness
descends from --seed.
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys

import numpy as np

from . import audio_io, creative, kernels, synthesis
from .bank import bake_bank_config, load_cache, payload_bytes, save_cache
from .baseline import BaselineRenderer, baseline_config
from .errors import NoiseBandsError
from .features import load_curve, resample_curve
from .filterbank import FilterbankConfig, config_hash, padded_length
from .model import ModelConfig, forward, init_params, param_count
from .training import (BandRenderer, TrainConfig, load_checkpoint, prepare_dataset,
                       save_checkpoint, smoothed, steps_per_epoch, train)


def _merge_config(args: argparse.Namespace, defaults: dict) -> dict:
    """flags > config file > defaults; unset flags are None."""
    resolved = dict(defaults)
    if getattr(args, "config", None):
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        for key in resolved:
            if key in file_cfg:
                resolved[key] = file_cfg[key]
    for key in resolved:
        val = getattr(args, key, None)
        if val is not None:
            resolved[key] = val
    return resolved


def _maybe_print_config(args, resolved: dict) -> bool:
    if getattr(args, "print_config", False):
        json.dump(resolved, sys.stdout, indent=2, default=str)
        sys.stdout.write("\n")
        return True
    return False


def _load_audio_args(paths: list[str]) -> tuple[float, list[np.ndarray]]:
    files: list[str] = []
    for p in paths:
        if os.path.isdir(p):
            files.extend(sorted(glob.glob(os.path.join(p, "*.wav"))))
        else:
            files.append(p)
    if not files:
        raise NoiseBandsError("no input audio files found")
    rate = None
    clips = []
    for f in files:
        r, audio = audio_io.read_wav(f)
        if rate is None:
            rate = r
        elif r != rate:
            raise NoiseBandsError(f"{f}: sample rate {r} != {rate} of the first clip")
        clips.append(audio)
    return float(rate), clips


def cmd_bake(args) -> int:
    resolved = _merge_config(args, {
        "fs": 44100.0, "filters": 2048, "fmin": 20.0, "transition": 0.2,
        "attenuation": 50.0, "linear_fraction": 0.5, "seed": 0, "out": "bank.nbnb",
    })
    if _maybe_print_config(args, resolved):
        return 0
    out = resolved["out"]
    if os.path.exists(out) and not args.force:
        raise NoiseBandsError(f"{out} exists; pass --force to overwrite")
    config = FilterbankConfig(
        sample_rate=float(resolved["fs"]), num_filters=int(resolved["filters"]),
        f_min=float(resolved["fmin"]), transition_fraction=float(resolved["transition"]),
        stopband_attenuation_db=float(resolved["attenuation"]),
        linear_fraction=float(resolved["linear_fraction"]))
    print(f"baking {config.num_filters} bands at fs={config.sample_rate:g}, "
          f"padded length {padded_length(config)}, "
          f"payload {payload_bytes(config) / 1e6:.1f} MB")
    bank = bake_bank_config(config, int(resolved["seed"]))
    save_cache(bank, out)
    print(f"wrote {out} (a_max {bank.a_max:.6g}, hash {config_hash(config).hex()[:16]})")
    return 0


def _parse_controls(spec: str) -> list[str]:
    items = [s.strip() for s in spec.split(",") if s.strip()]
    if not items:
        raise NoiseBandsError("empty --controls")
    return items


def cmd_train(args) -> int:
    resolved = _merge_config(args, {
        "controls": "loudness,centroid", "chunk": 65536, "batch": 16, "lr": 0.001,
        "epochs": 10, "seed": 0, "window": 32, "hidden": 128, "depth": 3,
        "run_dir": "run", "checkpoint_every": 0, "backend": "bands", "taps": 512,
        "threads": 0,
    })
    if _maybe_print_config(args, resolved):
        return 0
    rate, clips = _load_audio_args(args.audio)
    control_spec = _parse_controls(resolved["controls"])
    train_cfg = TrainConfig(
        chunk_len=int(resolved["chunk"]), batch=int(resolved["batch"]),
        lr=float(resolved["lr"]), epochs=int(resolved["epochs"]),
        seed=int(resolved["seed"]), window=int(resolved["window"]),
        checkpoint_every=int(resolved["checkpoint_every"]))
    dataset = prepare_dataset(clips, rate, control_spec, train_cfg.chunk_len)

    meta = {"backend": resolved["backend"]}
    if resolved["backend"] == "bands":
        if not args.bank:
            raise NoiseBandsError("--bank is required for the bands backend")
        bank = load_cache(args.bank)
        renderer = BandRenderer(bank, train_cfg.window, num_threads=int(resolved["threads"]))
        num_out = bank.num_bands
        meta.update(bank_hash=bank.config_hash.hex(), bank_seed=bank.seed)
    elif resolved["backend"] == "baseline":
        taps = int(resolved["taps"])
        renderer = BaselineRenderer(taps, hop=train_cfg.window, seed=train_cfg.seed)
        num_out = taps // 2 + 1
        meta.update(taps=taps)
    else:
        raise NoiseBandsError(f"unknown backend {resolved['backend']!r}")

    model_cfg = ModelConfig(num_controls=len(control_spec),
                            hidden_size=int(resolved["hidden"]),
                            num_bands=num_out, output_depth=int(resolved["depth"]))
    params = init_params(model_cfg, train_cfg.seed)
    total = train_cfg.epochs * steps_per_epoch(dataset, train_cfg)
    print(f"training {param_count(model_cfg)} parameters for {total} steps "
          f"({resolved['backend']} backend, kernel {kernels.backend()})")

    def progress(step, total_steps, loss):
        if step == 1 or step % 25 == 0 or step == total_steps:
            print(f"  step {step}/{total_steps} loss {loss:.4f}")

    result = train(params, dataset, renderer, train_cfg,
                   run_dir=resolved["run_dir"], checkpoint_meta=meta, progress=progress)
    print(f"validation loss {result.val_before:.4f} -> {result.val_after:.4f}; "
          f"smoothed train loss {smoothed(result.losses):.4f}")
    print(f"run directory: {resolved['run_dir']}")
    return 0


def _load_model_and_bank(args):
    params, meta = load_checkpoint(args.checkpoint)
    bank = None
    if meta.get("backend", "bands") == "bands":
        if not args.bank:
            raise NoiseBandsError("--bank is required to synthesise with this checkpoint")
        bank = load_cache(args.bank)
        want = meta.get("bank_hash")
        if want and bank.config_hash.hex() != want and not getattr(args, "force_bank", False):
            raise NoiseBandsError(
                "bank config hash does not match the checkpoint; pass --force-bank to use it anyway")
    return params, meta, bank


def _controls_from_args(args, params, meta, window: int):
    """Build the (T, C) control matrix from curve files or a source WAV."""
    c = params.config.num_controls
    if getattr(args, "from_audio", None):
        from .features import extract_centroid, extract_loudness
        rate, audio = audio_io.read_wav(args.from_audio)
        t_frames = max(1, audio.size // window)
        cols = []
        for ctl in meta["controls"]:
            name = ctl["name"]
            if name == "loudness":
                raw = extract_loudness(audio, rate)
            elif name == "centroid":
                raw = extract_centroid(audio, rate)
            else:
                raise NoiseBandsError(
                    f"cannot extract control {name!r} from audio; pass --curve")
            span = ctl["norm_max"] - ctl["norm_min"]
            values = np.clip((raw - ctl["norm_min"]) / span, 0.0, 1.0)
            cols.append(resample_curve(values, t_frames))
        return np.stack(cols, axis=1)

    curve_paths = getattr(args, "curve", None) or []
    if len(curve_paths) != c:
        raise NoiseBandsError(
            f"model expects {c} control curve(s), got {len(curve_paths)}")
    loaded = [load_curve(p) for p in curve_paths]
    if args.length_frames:
        t_frames = int(args.length_frames)
    else:
        first = loaded[0]
        t_frames = (max(1, first.values.size // window)
                    if first.rate == "audio" else first.values.size)
    cols = [resample_curve(cv.values, t_frames) for cv in loaded]
    return np.stack(cols, axis=1)


def _apply_randomisation(amps_tm: np.ndarray, args, rng) -> np.ndarray:
    """amps (T, M) -> randomised (T, M); ops work band-major."""
    amps_mt = amps_tm.T.copy()
    frame_len = int(getattr(args, "frame_len", None) or 430)
    if getattr(args, "topk", None):
        k, lo, hi = args.topk.split(",")
        amps_mt = creative.randomize_topk(amps_mt, frame_len, int(k),
                                          (float(lo), float(hi)), rng)
    if getattr(args, "shift_rand", None):
        f_init, f_shift = (int(v) for v in args.shift_rand.split(","))
        amps_mt = creative.randomize_shift(amps_mt, frame_len, f_init, f_shift, rng)
    return amps_mt.T


def _synth_common(args, require_randomisation: bool) -> int:
    params, meta, bank = _load_model_and_bank(args)
    if meta.get("backend", "bands") != "bands":
        raise NoiseBandsError("synthesis requires a bands-backend checkpoint")
    window = int(meta.get("window", 32))
    seed = int(args.seed if args.seed is not None else 0)
    has_rand = bool(getattr(args, "topk", None) or getattr(args, "shift_rand", None)
                    or getattr(args, "stereo", False))
    if require_randomisation and not has_rand:
        raise NoiseBandsError(
            "randomise needs at least one of --topk / --shift-rand / --stereo")

    controls = _controls_from_args(args, params, meta, window)
    fs = float(meta.get("sample_rate", 44100.0))
    threads = int(args.threads or 0)

    if getattr(args, "stereo", False):
        amps, _ = forward(params, controls)
        frame_len = int(getattr(args, "frame_len", None) or 430)
        topk = getattr(args, "topk", None)
        k, lo, hi = (None, 1.0, 1.0)
        if topk:
            ks, los, his = topk.split(",")
            k, lo, hi = int(ks), float(los), float(his)
        f_init = f_shift = 0
        if getattr(args, "shift_rand", None):
            f_init, f_shift = (int(v) for v in args.shift_rand.split(","))
        (l_amps, l_shift), (r_amps, r_shift) = creative.stereo_variation(
            amps.T, seed, frame_len=frame_len, k=k, mult_range=(lo, hi),
            f_init=f_init, f_shift=f_shift)
        left = synthesis.render(bank, l_amps.T, shift=l_shift, window=window,
                                num_threads=threads)
        right = synthesis.render(bank, r_amps.T, shift=r_shift, window=window,
                                 num_threads=threads)
        audio = np.stack([left, right], axis=1)
    elif has_rand:
        rng = np.random.Generator(np.random.Philox(seed))
        amps, _ = forward(params, controls)
        amps = _apply_randomisation(amps, args, rng)
        shift = int(rng.integers(0, bank.padded_len, endpoint=True))
        audio = synthesis.render(bank, amps, shift=shift, window=window,
                                 num_threads=threads)
    else:
        audio = synthesis.render_long(params, bank, controls, window=window,
                                      num_threads=threads)

    audio_io.write_wav(args.out, fs, audio)
    n = audio.shape[0]
    print(f"wrote {args.out}: {n} samples ({n / fs:.2f} s), seed {seed}")
    return 0


def cmd_synth(args) -> int:
    return _synth_common(args, require_randomisation=False)


def cmd_randomise(args) -> int:
    return _synth_common(args, require_randomisation=True)


def cmd_transfer(args) -> int:
    params, meta, bank = _load_model_and_bank(args)
    rate, source = audio_io.read_wav(args.source)
    window = int(meta.get("window", 32))
    audio, _ = creative.loudness_transfer(params, bank, source, rate,
                                          offset=float(args.offset), window=window,
                                          num_threads=int(args.threads or 0))
    fs = float(meta.get("sample_rate", rate))
    audio_io.write_wav(args.out, fs, audio)
    print(f"wrote {args.out}: {audio.shape[0]} samples, offset {args.offset:+g}")
    return 0


def cmd_compare(args) -> int:
    resolved = _merge_config(args, {
        "controls": "loudness", "chunk": 65536, "batch": 4, "lr": 0.001,
        "epochs": 2, "seed": 0, "window": 32, "hidden": 32, "depth": 3,
        "backends": "bands,baseline:512", "out": "compare.csv",
    })
    if _maybe_print_config(args, resolved):
        return 0
    rate, clips = _load_audio_args(args.audio)
    control_spec = _parse_controls(resolved["controls"])
    train_cfg = TrainConfig(
        chunk_len=int(resolved["chunk"]), batch=int(resolved["batch"]),
        lr=float(resolved["lr"]), epochs=int(resolved["epochs"]),
        seed=int(resolved["seed"]), window=int(resolved["window"]))
    dataset = prepare_dataset(clips, rate, control_spec, train_cfg.chunk_len)

    rows = [("backend", "taps", "steps", "smoothed_loss", "val_loss")]
    for item in resolved["backends"].split(","):
        item = item.strip()
        if item == "bands":
            if not args.bank:
                raise NoiseBandsError("--bank is required for the bands backend")
            bank = load_cache(args.bank)
            renderer = BandRenderer(bank, train_cfg.window)
            num_out, taps = bank.num_bands, ""
        elif item.startswith("baseline"):
            taps = int(item.split(":")[1]) if ":" in item else 512
            renderer = BaselineRenderer(taps, hop=train_cfg.window, seed=train_cfg.seed)
            num_out = taps // 2 + 1
        else:
            raise NoiseBandsError(f"unknown backend {item!r}")
        model_cfg = ModelConfig(num_controls=len(control_spec),
                                hidden_size=int(resolved["hidden"]),
                                num_bands=num_out, output_depth=int(resolved["depth"]))
        params = init_params(model_cfg, train_cfg.seed)
        result = train(params, dataset, renderer, train_cfg)
        steps = len(result.losses)
        rows.append((item.split(":")[0], str(taps), str(steps),
                     f"{smoothed(result.losses):.6f}", f"{result.val_after:.6f}"))
        print(f"  {item}: smoothed {smoothed(result.losses):.4f}, "
              f"val {result.val_after:.4f}")

    with open(resolved["out"], "w") as fh:
        fh.write("\n".join(",".join(r) for r in rows) + "\n")
    print(f"wrote {resolved['out']}")
    return 0


def cmd_serve(args) -> int:
    from .service import SynthService
    service = SynthService(project_dir=args.project_dir, clip_path=args.clip,
                           checkpoint_paths=args.checkpoint, bank_path=args.bank,
                           static_dir=args.static_dir)
    print(f"serving on http://127.0.0.1:{args.port}")
    service.serve(port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="noisebands",
                                     description="noise-band synthesiser toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None, help="master random seed")
        p.add_argument("--config", help="JSON config file (flags override it)")
        p.add_argument("--print-config", action="store_true",
                       help="print the resolved config and exit")

    p = sub.add_parser("bake", help="design the filterbank and bake noise bands")
    common(p)
    p.add_argument("--fs", type=float, default=None)
    p.add_argument("--filters", type=int, default=None)
    p.add_argument("--fmin", type=float, default=None)
    p.add_argument("--transition", type=float, default=None)
    p.add_argument("--attenuation", type=float, default=None)
    p.add_argument("--linear-fraction", dest="linear_fraction", type=float, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_bake)

    p = sub.add_parser("train", help="train a model on WAV clips")
    common(p)
    p.add_argument("audio", nargs="+", help="WAV files or directories")
    p.add_argument("--bank", help=".nbnb bank for the bands backend")
    p.add_argument("--controls", default=None,
                   help="comma list: loudness, centroid, curve:<file.nbcv>")
    p.add_argument("--backend", default=None, choices=["bands", "baseline"])
    p.add_argument("--taps", type=int, default=None)
    p.add_argument("--chunk", type=int, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--run-dir", dest="run_dir", default=None)
    p.add_argument("--checkpoint-every", dest="checkpoint_every", type=int, default=None)
    p.set_defaults(func=cmd_train)

    def synth_flags(p):
        common(p)
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--bank")
        p.add_argument("--force-bank", dest="force_bank", action="store_true")
        p.add_argument("--curve", action="append", help=".nbcv file, one per control")
        p.add_argument("--from-audio", dest="from_audio",
                       help="extract the model's controls from this WAV")
        p.add_argument("--length-frames", dest="length_frames", type=int)
        p.add_argument("--topk", help="k,lo,hi top-k randomisation")
        p.add_argument("--shift-rand", dest="shift_rand", help="f_init,f_shift band walk")
        p.add_argument("--frame-len", dest="frame_len", type=int)
        p.add_argument("--stereo", action="store_true")
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--out", default="out.wav")

    p = sub.add_parser("synth", help="synthesise audio from control curves")
    synth_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("randomise", help="synthesise a randomised variation")
    synth_flags(p)
    p.set_defaults(func=cmd_randomise)

    p = sub.add_parser("transfer", help="drive a loudness-only model with another sound")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--bank")
    p.add_argument("--force-bank", dest="force_bank", action="store_true")
    p.add_argument("--source", required=True, help="WAV whose loudness drives the model")
    p.add_argument("--offset", type=float, default=0.0)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", default="transfer.wav")
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("compare", help="train several backends, report losses as CSV")
    common(p)
    p.add_argument("audio", nargs="+")
    p.add_argument("--bank")
    p.add_argument("--backends", default=None, help="e.g. bands,baseline:512,baseline:1024")
    p.add_argument("--controls", default=None)
    p.add_argument("--chunk", type=int, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("serve", help="run the local HTTP service for the curve UI")
    common(p)
    p.add_argument("--checkpoint", action="append", default=[],
                   help="checkpoint to expose (repeatable)")
    p.add_argument("--bank")
    p.add_argument("--clip", help="project clip WAV shown in the UI")
    p.add_argument("--project-dir", dest="project_dir", default="project")
    p.add_argument("--static-dir", dest="static_dir",
                   help="directory with the built browser UI")
    p.add_argument("--port", type=int, default=8733)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NoiseBandsError as exc:
        print(f"error:{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error:FileNotFound: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
