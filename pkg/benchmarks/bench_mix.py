#!/usr/bin/env python3
"""Benchmark the band-mixing kernels: compiled extension vs numpy fallback.

Times mix_render and mix_adjoint on a synthetic workload for every
importable backend, then measures thread scaling for the extension when
the machine has more than one CPU.

Usage:
    python3 benchmarks/bench_mix.py [--bands 2048] [--frames 4096]
                                    [--loop 131072] [--window 32]
                                    [--repeats 3] [--json]
"""

import argparse
import json
import os
import statistics
import time

import numpy as np

from noisebands import kernels


def make_workload(bands, frames, loop, seed=0):
    rng = np.random.default_rng(seed)
    band_data = rng.standard_normal((bands, loop)).astype(np.float32) * 0.01
    amps = rng.random((bands, frames)) * 0.01
    return band_data, amps


def best_of(repeats, fn):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times), statistics.median(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--bands", type=int, default=2048)
    ap.add_argument("--frames", type=int, default=4096)
    ap.add_argument("--loop", type=int, default=131072)
    ap.add_argument("--window", type=int, default=32)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--json", action="store_true", help="machine-readable output")
    args = ap.parse_args()

    band_data, amps = make_workload(args.bands, args.frames, args.loop)
    samples = args.frames * args.window
    grad = np.random.default_rng(1).standard_normal(samples)
    backends = kernels.available_backends()
    report = {"workload": {"bands": args.bands, "frames": args.frames,
                           "loop": args.loop, "window": args.window,
                           "samples": samples},
              "selected_backend": kernels.backend(),
              "results": {}}

    outputs = {}
    for name in sorted(backends):
        render_best, render_med = best_of(args.repeats, lambda n=name: kernels.mix_render(
            amps, band_data, shift=17, window=args.window, num_threads=1, impl=n))
        adjoint_best, adjoint_med = best_of(args.repeats, lambda n=name: kernels.mix_adjoint(
            grad, band_data, shift=17, window=args.window, num_threads=1, impl=n))
        outputs[name] = kernels.mix_render(amps, band_data, shift=17,
                                           window=args.window, num_threads=1,
                                           impl=name)
        report["results"][name] = {
            "render_s": render_best, "render_median_s": render_med,
            "adjoint_s": adjoint_best, "adjoint_median_s": adjoint_med,
            "render_samples_per_s": samples / render_best,
        }

    if {"numpy", "ext"} <= outputs.keys():
        diff = float(np.abs(outputs["ext"] - outputs["numpy"]).max())
        report["max_abs_output_diff"] = diff
        r = report["results"]
        report["speedup_render"] = r["numpy"]["render_s"] / r["ext"]["render_s"]
        report["speedup_adjoint"] = r["numpy"]["adjoint_s"] / r["ext"]["adjoint_s"]

    cpus = os.cpu_count() or 1
    if "ext" in backends and cpus > 1:
        scaling = {}
        for threads in (1, 2, 4):
            if threads > cpus:
                break
            best, _ = best_of(args.repeats, lambda t=threads: kernels.mix_render(
                amps, band_data, shift=17, window=args.window, num_threads=t))
            scaling[threads] = best
        report["thread_scaling_ext"] = {str(k): v for k, v in scaling.items()}
    else:
        report["thread_scaling_ext"] = None
        report["thread_scaling_note"] = (
            f"machine exposes {cpus} CPU(s); scaling run needs > 1")

    if args.json:
        print(json.dumps(report, indent=2))
        return

    w = report["workload"]
    print(f"workload: {w['bands']} bands x {w['frames']} frames "
          f"(window {w['window']} -> {w['samples']} samples), "
          f"loop {w['loop']}")
    print(f"selected backend: {report['selected_backend']}")
    for name, r in report["results"].items():
        print(f"  {name:>6}: render {r['render_s'] * 1e3:8.1f} ms   "
              f"adjoint {r['adjoint_s'] * 1e3:8.1f} ms   "
              f"({r['render_samples_per_s'] / 1e6:.1f} Msamples/s)")
    if "speedup_render" in report:
        print(f"ext speedup: render {report['speedup_render']:.2f}x, "
              f"adjoint {report['speedup_adjoint']:.2f}x "
              f"(max output diff {report['max_abs_output_diff']:.2e})")
    if report["thread_scaling_ext"]:
        base = report["thread_scaling_ext"]["1"]
        for k, v in report["thread_scaling_ext"].items():
            print(f"  ext {k} thread(s): {v * 1e3:8.1f} ms  ({base / v:.2f}x)")
    else:
        print(report["thread_scaling_note"])


if __name__ == "__main__":
    main()
