"""Local HTTP facade for the curve-drawing UI.

Endpoints (JSON unless noted):
  GET  /api/clip          waveform min/max pairs + log-magnitude spectrogram
  GET  /api/models        available models with control metadata
  GET  /api/curve?name=   a stored curve, decimated for overlay drawing
  POST /api/curve         {name, points:[{t,v}]} -> stored .nbcv
  POST /api/synth         {model, curve|curves, length_frames, ...} -> WAV bytes
  GET  /api/status        {"queue_depth": N}

State lives in the project directory (.nbcv curves, written atomically);
restarting the service loses nothing. Synthesis runs on a single-renderer
lane guarded by a lock; concurrent requests queue, and the depth counter
covers waiting plus running jobs. CORS is restricted to localhost origins.
"""

from __future__ import annotations

import json
import os
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

import numpy as np

from . import audio_io, creative, synthesis
from .bank import load_cache
from .errors import NoiseBandsError
from .features import (ControlCurve, RATE_AUDIO, load_curve, resample_curve,
                       save_curve)
from .loss import stft_mag
from .model import forward
from .training import load_checkpoint

SPEC_FFT = 512
SPEC_HOP = 128
WAVEFORM_BUCKETS = 1024
_NAME_RE = re.compile(r"^[A-Za-z0-9_-]{1,64}$")


class ServiceError(NoiseBandsError):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status


class SynthService:
    """Owns the project state and the single-renderer synthesis lane."""

    def __init__(self, project_dir: str, clip_path: str | None = None,
                 checkpoint_paths: list[str] | None = None,
                 bank_path: str | None = None, static_dir: str | None = None):
        self.project_dir = project_dir
        os.makedirs(project_dir, exist_ok=True)
        self.static_dir = static_dir

        self.clip = None
        self.clip_rate = None
        if clip_path:
            rate, audio = audio_io.read_wav(clip_path)
            self.clip, self.clip_rate = audio, rate

        self.bank = load_cache(bank_path) if bank_path else None
        self.models: dict[str, dict] = {}
        for path in checkpoint_paths or []:
            params, meta = load_checkpoint(path)
            model_id = os.path.splitext(os.path.basename(path))[0]
            if self.bank is not None and meta.get("bank_hash") \
                    and self.bank.config_hash.hex() != meta["bank_hash"]:
                raise NoiseBandsError(f"{path}: bank hash mismatch with {bank_path}")
            self.models[model_id] = {"params": params, "meta": meta}

        self._render_lock = threading.Lock()
        self._queue_lock = threading.Lock()
        self._queue_depth = 0

    # ---- endpoint logic (transport-free, unit-testable) ----

    def clip_payload(self) -> dict:
        if self.clip is None:
            raise ServiceError(404, "no clip loaded")
        n = self.clip.shape[0]
        buckets = min(WAVEFORM_BUCKETS, n)
        edges = np.linspace(0, n, buckets + 1).astype(int)
        pairs = [[float(self.clip[a:b].min()), float(self.clip[a:b].max())]
                 for a, b in zip(edges[:-1], edges[1:])]
        mag = stft_mag(self.clip, SPEC_FFT, SPEC_HOP)
        log_mag = 20.0 * np.log10(np.maximum(mag, 1e-7))
        return {
            "sample_rate": self.clip_rate,
            "length": n,
            "waveform": pairs,
            "spectrogram": {
                "rows": int(log_mag.shape[0]),
                "cols": int(log_mag.shape[1]),
                "data": [round(float(v), 2) for v in log_mag.reshape(-1)],
            },
        }

    def models_payload(self) -> dict:
        out = []
        for model_id, entry in sorted(self.models.items()):
            meta = entry["meta"]
            out.append({
                "id": model_id,
                "controls": [c["name"] for c in meta["controls"]],
                "num_controls": entry["params"].config.num_controls,
                "window": meta.get("window", 32),
                "sample_rate": meta.get("sample_rate", 44100.0),
            })
        return {"models": out}

    def status_payload(self) -> dict:
        with self._queue_lock:
            depth = self._queue_depth
        return {"queue_depth": depth}

    def _curve_path(self, name: str) -> str:
        if not _NAME_RE.match(name):
            raise ServiceError(422, f"invalid curve name {name!r}")
        return os.path.join(self.project_dir, f"{name}.nbcv")

    def store_curve(self, body: dict) -> dict:
        name = body.get("name")
        points = body.get("points")
        if not isinstance(name, str) or not isinstance(points, list) or not points:
            raise ServiceError(422, "need a curve name and a nonempty points list")
        values = self._points_to_values(points)
        curve = ControlCurve(name=name, values=values, rate=RATE_AUDIO,
                             norm_min=0.0, norm_max=1.0)
        save_curve(curve, self._curve_path(name))
        return {"name": name, "length": int(values.shape[0])}

    def _points_to_values(self, points: list) -> np.ndarray:
        """Sorted-by-t interpolation onto the clip grid; duplicate t: last wins."""
        try:
            pairs = [(float(p["t"]), float(p["v"])) for p in points]
        except (KeyError, TypeError, ValueError):
            raise ServiceError(422, "points must be objects with numeric t and v")
        for t, v in pairs:
            if not (0.0 <= t <= 1.0 and 0.0 <= v <= 1.0):
                raise ServiceError(422, f"point ({t}, {v}) outside [0,1]x[0,1]")
        dedup: dict[float, float] = {}
        for t, v in pairs:  # insertion order keeps the last duplicate
            dedup[t] = v
        ts = np.array(sorted(dedup))
        vs = np.array([dedup[t] for t in ts])
        grid_len = self.clip.shape[0] if self.clip is not None else 4096
        grid = np.linspace(0.0, 1.0, grid_len)
        return np.interp(grid, ts, vs)

    def curve_payload(self, name: str, points: int = 2048) -> dict:
        path = self._curve_path(name)
        if not os.path.exists(path):
            raise ServiceError(404, f"no curve named {name!r}")
        curve = load_curve(path)
        decimated = resample_curve(curve.values, min(points, curve.values.size))
        return {"name": curve.name, "length": int(curve.values.size),
                "values": [round(float(v), 5) for v in decimated]}

    def synthesise(self, body: dict) -> tuple[bytes, int]:
        """Returns (wav bytes, render seed). Serialised on the render lane."""
        with self._queue_lock:
            self._queue_depth += 1
        try:
            with self._render_lock:
                return self._synthesise_locked(body)
        finally:
            with self._queue_lock:
                self._queue_depth -= 1

    def _synthesise_locked(self, body: dict) -> tuple[bytes, int]:
        model_id = body.get("model")
        if model_id not in self.models:
            raise ServiceError(404, f"unknown model {model_id!r}")
        if self.bank is None:
            raise ServiceError(500, "service started without a bank")
        entry = self.models[model_id]
        params, meta = entry["params"], entry["meta"]
        window = int(meta.get("window", 32))
        c = params.config.num_controls

        length_frames = body.get("length_frames")
        if not isinstance(length_frames, int) or length_frames < 1:
            raise ServiceError(422, "length_frames must be a positive integer")

        curve_specs = body.get("curves")
        if curve_specs is None:
            single = body.get("curve")
            if single is None:
                raise ServiceError(422, "need curve or curves")
            curve_specs = [single]
        if len(curve_specs) != c:
            raise ServiceError(422, f"model has {c} control(s), got {len(curve_specs)}")

        cols = []
        for spec_item in curve_specs:
            if isinstance(spec_item, str):
                path = self._curve_path(spec_item)
                if not os.path.exists(path):
                    raise ServiceError(404, f"no curve named {spec_item!r}")
                values = load_curve(path).values
            elif isinstance(spec_item, list):
                values = self._points_to_values(spec_item)
            else:
                raise ServiceError(422, "curve entries must be names or point lists")
            cols.append(resample_curve(values, length_frames))
        controls = np.stack(cols, axis=1)

        seed = body.get("seed")
        if seed is None:
            seed = int(np.random.SeedSequence().entropy % (1 << 31))
        seed = int(seed)
        rng = np.random.Generator(np.random.Philox(seed))

        fs = float(meta.get("sample_rate", 44100.0))
        topk = body.get("topk")
        shift_rand = body.get("shift_rand")
        frame_len = int(body.get("frame_len") or 430)
        if body.get("stereo"):
            amps, _ = forward(params, controls)
            k = int(topk["k"]) if topk else None
            mult = (float(topk["lo"]), float(topk["hi"])) if topk else (1.0, 1.0)
            f_init = int(shift_rand["f_init"]) if shift_rand else 0
            f_shift = int(shift_rand["f_shift"]) if shift_rand else 0
            (la, ls), (ra, rs) = creative.stereo_variation(
                amps.T, seed, frame_len=frame_len, k=k, mult_range=mult,
                f_init=f_init, f_shift=f_shift)
            left = synthesis.render(self.bank, la.T, shift=ls, window=window)
            right = synthesis.render(self.bank, ra.T, shift=rs, window=window)
            audio = np.stack([left, right], axis=1)
        elif topk or shift_rand:
            amps, _ = forward(params, controls)
            mt = amps.T.copy()
            if topk:
                mt = creative.randomize_topk(mt, frame_len, int(topk["k"]),
                                             (float(topk["lo"]), float(topk["hi"])), rng)
            if shift_rand:
                mt = creative.randomize_shift(mt, frame_len, int(shift_rand["f_init"]),
                                              int(shift_rand["f_shift"]), rng)
            shift = int(rng.integers(0, self.bank.padded_len, endpoint=True))
            audio = synthesis.render(self.bank, mt.T, shift=shift, window=window)
        else:
            audio = synthesis.render_long(params, self.bank, controls, window=window)

        assert audio.shape[0] == length_frames * window
        return audio_io.wav_bytes(fs, audio), seed

    def serve(self, port: int = 8733, host: str = "127.0.0.1"):
        server = self.make_server(port, host)
        try:
            server.serve_forever()
        finally:
            server.server_close()

    def make_server(self, port: int = 0, host: str = "127.0.0.1") -> ThreadingHTTPServer:
        handler = _make_handler(self)
        return ThreadingHTTPServer((host, port), handler)


def _make_handler(service: SynthService):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            pass

        def _cors_headers(self):
            origin = self.headers.get("Origin", "")
            host = urlparse(origin).hostname if origin else None
            if host in ("localhost", "127.0.0.1"):
                self.send_header("Access-Control-Allow-Origin", origin)
                self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
                self.send_header("Access-Control-Allow-Headers", "Content-Type")

        def _send_json(self, payload: dict, status: int = 200):
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self._cors_headers()
            self.end_headers()
            self.wfile.write(body)

        def _send_error_json(self, status: int, message: str):
            self._send_json({"error": message}, status)

        def do_OPTIONS(self):
            self.send_response(204)
            self.send_header("Content-Length", "0")
            self._cors_headers()
            self.end_headers()

        def do_GET(self):
            parsed = urlparse(self.path)
            try:
                if parsed.path == "/api/clip":
                    self._send_json(service.clip_payload())
                elif parsed.path == "/api/models":
                    self._send_json(service.models_payload())
                elif parsed.path == "/api/status":
                    self._send_json(service.status_payload())
                elif parsed.path == "/api/curve":
                    name = parse_qs(parsed.query).get("name", [""])[0]
                    self._send_json(service.curve_payload(name))
                elif service.static_dir:
                    self._serve_static(parsed.path)
                else:
                    self._send_error_json(404, "not found")
            except ServiceError as exc:
                self._send_error_json(exc.status, str(exc))
            except NoiseBandsError as exc:
                self._send_error_json(500, str(exc))

        def _serve_static(self, path: str):
            rel = "index.html" if path == "/" else path.lstrip("/")
            full = os.path.realpath(os.path.join(service.static_dir, rel))
            root = os.path.realpath(service.static_dir)
            if not full.startswith(root + os.sep) and full != root:
                self._send_error_json(404, "not found")
                return
            if not os.path.isfile(full):
                self._send_error_json(404, "not found")
                return
            ctypes = {".html": "text/html", ".js": "text/javascript",
                      ".css": "text/css", ".map": "application/json"}
            with open(full, "rb") as fh:
                body = fh.read()
            self.send_response(200)
            self.send_header("Content-Type",
                             ctypes.get(os.path.splitext(full)[1], "application/octet-stream"))
            self.send_header("Content-Length", str(len(body)))
            self._cors_headers()
            self.end_headers()
            self.wfile.write(body)

        def _read_body(self) -> dict:
            length = int(self.headers.get("Content-Length", 0))
            if length <= 0 or length > 16 * 1024 * 1024:
                raise ServiceError(422, "missing or oversized request body")
            try:
                return json.loads(self.rfile.read(length))
            except json.JSONDecodeError:
                raise ServiceError(422, "request body is not valid JSON")

        def do_POST(self):
            parsed = urlparse(self.path)
            try:
                if parsed.path == "/api/curve":
                    self._send_json(service.store_curve(self._read_body()), 201)
                elif parsed.path == "/api/synth":
                    wav, seed = service.synthesise(self._read_body())
                    self.send_response(200)
                    self.send_header("Content-Type", "audio/wav")
                    self.send_header("Content-Length", str(len(wav)))
                    self.send_header("X-Render-Seed", str(seed))
                    self._cors_headers()
                    self.end_headers()
                    self.wfile.write(wav)
                else:
                    self._send_error_json(404, "not found")
            except ServiceError as exc:
                self._send_error_json(exc.status, str(exc))
            except NoiseBandsError as exc:
                self._send_error_json(500, str(exc))

    return Handler
