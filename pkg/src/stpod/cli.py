"""Command-line interface: generate, decompose, study, bench, info.

Every command resolves its parameters from an optional plain-text key=value
configuration file overridden by command-line flags, runs deterministically
for a fixed seed, and writes a manifest recording the fully resolved
configuration (no timestamps, so reruns are bitwise identical). Exit status:
0 success, 2 usage or configuration error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, backend
from . import bench as bench_mod
from .analysis import StudyCell, StudySpec, convergence_study
from .decomposition import ModeSet, WeightSpec, load_modes, save_modes, \
    space_only_pod, spacetime_pod, spacetime_pod_toeplitz
from .spod import FrequencyModeSet, SpodSpec, load_frequency_modes, \
    save_frequency_modes, spod
from .timeseries import FormatError, GeneratorSpec, generate, load, save

_METHODS = ("space-only", "hankel", "spaced", "toeplitz", "spod")


def _parse_floats(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def _parse_ints(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def _config_argv(path: str) -> list[str]:
    """Turn a key=value config file into leading argv tokens (flags override)."""
    tokens: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise FormatError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            flag = "--" + key.replace("_", "-")
            if value.lower() in ("true", "false"):
                if value.lower() == "true":
                    tokens.append(flag)
            else:
                tokens.extend([flag, value])
    return tokens


def _apply_threads(threads: int) -> int:
    if threads <= 0:
        threads = int(os.environ.get("STPOD_THREADS", "0") or 0)
    if threads > 0 and backend.HAS_NUMBA:
        import numba

        numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))
    return threads


def _write_manifest(path, command: str, entries: dict) -> None:
    resolved = {
        "command": command,
        "version": __version__,
        "backend": backend.active_backend(),
        **entries,
    }
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(resolved):
            fh.write(f"{key}={resolved[key]}\n")


def _generator_from_args(args) -> GeneratorSpec:
    if args.kind == "ou":
        taus = _parse_floats(args.tau)
        if not taus or any(t <= 0.0 for t in taus):
            raise ValueError("--tau must list positive correlation times")
        drift = np.diag([-1.0 / t for t in taus])
        diffusion = np.diag([np.sqrt(2.0 / t) for t in taus])
        return GeneratorSpec.ou(drift, diffusion, seed=args.seed, burn_in=args.burn_in)
    if args.kind == "narrowband":
        amplitude = _parse_floats(args.amplitude)
        return GeneratorSpec.narrowband(
            args.carrier, args.bandwidth, amplitude, seed=args.seed, burn_in=args.burn_in
        )
    return GeneratorSpec.lorenz63(
        args.lorenz_sigma, args.lorenz_rho, args.lorenz_beta,
        observed=_parse_ints(args.coords), seed=args.seed, burn_in=args.burn_in,
    )


def _add_generator_arguments(parser) -> None:
    parser.add_argument("--kind", required=True, choices=("ou", "narrowband", "lorenz63"))
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--burn-in", type=int, default=0)
    parser.add_argument("--tau", default="1.0",
                        help="OU correlation times, comma separated (one per component)")
    parser.add_argument("--carrier", type=float, default=2.0 * np.pi * 0.1,
                        help="narrowband carrier frequency [rad/time]")
    parser.add_argument("--bandwidth", type=float, default=0.0)
    parser.add_argument("--amplitude", default="1.0",
                        help="narrowband spatial amplitude pattern, comma separated")
    parser.add_argument("--lorenz-sigma", type=float, default=10.0)
    parser.add_argument("--lorenz-rho", type=float, default=28.0)
    parser.add_argument("--lorenz-beta", type=float, default=8.0 / 3.0)
    parser.add_argument("--coords", default="0,1,2", help="observed Lorenz coordinates")


def _load_weight(path, n: int) -> WeightSpec | None:
    if path is None:
        return None
    values = np.loadtxt(path, ndmin=1, dtype=float)
    if values.size != n:
        raise ValueError(f"weight file holds {values.size} entries, expected {n}")
    return WeightSpec(values)


def cmd_generate(args) -> int:
    threads = _apply_threads(args.threads)
    spec = _generator_from_args(args)
    series = generate(spec, args.n, args.dt)
    save(series, args.output, args.format)
    _write_manifest(
        str(args.output) + ".manifest",
        "generate",
        {
            "kind": args.kind, "n": args.n, "dt": args.dt, "seed": args.seed,
            "burn_in": args.burn_in, "threads": threads, "output": args.output,
            "n_components": series.n_components,
            **(
                {"tau": args.tau} if args.kind == "ou"
                else {"carrier": args.carrier, "bandwidth": args.bandwidth,
                      "amplitude": args.amplitude} if args.kind == "narrowband"
                else {"sigma": args.lorenz_sigma, "rho": args.lorenz_rho,
                      "beta": args.lorenz_beta, "coords": args.coords}
            ),
        },
    )
    return 0


def cmd_decompose(args) -> int:
    threads = _apply_threads(args.threads)
    series = load(args.input)
    weight = _load_weight(args.weight_file, series.n_components)
    entries = {
        "input": args.input, "output": args.output, "method": args.method,
        "threads": threads, "n_components": series.n_components,
        "n_snapshots": series.n_snapshots, "dt": series.dt,
    }
    if args.method == "spod":
        spec = SpodSpec(args.n_fft, args.overlap, args.window, not args.two_sided)
        result = spod(series, spec, weight)
        if args.r is not None and args.r < result.modes.shape[2]:
            result = FrequencyModeSet(
                result.frequencies, result.modes[:, :, :args.r],
                result.energies[:, :args.r], result.spec, result.weight,
                result.dt, result.n_blocks,
            )
        save_frequency_modes(result, args.output)
        with open(str(args.output) + ".energies.csv", "w", encoding="utf-8") as fh:
            fh.write("bin,omega,rank,energy\n")
            for b in range(result.n_bins):
                for k in range(result.energies.shape[1]):
                    fh.write(f"{b},{result.frequencies[b]!r},{k},{result.energies[b, k]!r}\n")
        entries.update(
            n_fft=args.n_fft, overlap=args.overlap, window=args.window,
            one_sided=not args.two_sided, n_blocks=result.n_blocks,
        )
    else:
        if args.method == "space-only":
            modes = space_only_pod(series, weight)
        elif args.method == "toeplitz":
            modes = spacetime_pod_toeplitz(series, args.d, weight, args.r)
        else:
            s = args.s if args.method == "spaced" else 1
            modes = spacetime_pod(series, args.d, s, weight)
        if args.method != "toeplitz" and args.r is not None and args.r < modes.n_modes:
            modes = ModeSet(
                modes.modes[:, :args.r], modes.energies[:args.r], modes.method,
                modes.n_components, modes.depth, modes.dt, modes.weight,
                modes.embedding, modes.m_used,
            )
        save_modes(modes, args.output)
        with open(str(args.output) + ".energies.csv", "w", encoding="utf-8") as fh:
            fh.write("rank,energy\n")
            for k, energy in enumerate(modes.energies):
                fh.write(f"{k},{energy!r}\n")
        entries.update(
            d=modes.depth, s=getattr(modes.embedding, "s", 1), r=modes.n_modes,
            m=modes.m_used, window_T=modes.window,
        )
    _write_manifest(str(args.output) + ".manifest", "decompose", entries)
    return 0


def cmd_study(args) -> int:
    threads = _apply_threads(args.threads)
    if args.trials < 1:
        raise ValueError("--trials must be >= 1")
    generator = _generator_from_args(args)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    m_values = _parse_ints(args.m_values)
    cells = tuple(
        StudyCell(method, m, args.d, args.s if method == "spaced" else 1)
        for method in methods
        for m in m_values
    )
    spec = StudySpec(
        generator=generator,
        dt=args.dt,
        cells=cells,
        trials=args.trials,
        seed=args.seed,
        metric=args.metric.replace("-", "_"),
        mode_index=args.mode_index,
        n_cumulative=args.k,
        reference_factor=args.reference_factor,
    )
    report = convergence_study(spec)
    report.to_csv(args.out_prefix + ".csv")
    report.to_summary_json(args.out_prefix + ".summary.json")
    _write_manifest(
        args.out_prefix + ".manifest",
        "study",
        {
            "kind": args.kind, "dt": args.dt, "d": args.d, "s": args.s,
            "methods": args.methods, "m_values": args.m_values,
            "metric": args.metric, "mode_index": args.mode_index, "k": args.k,
            "trials": args.trials, "seed": args.seed,
            "reference_factor": args.reference_factor, "threads": threads,
            "out_prefix": args.out_prefix,
            "decorrelation_time": report.decorrelation_time,
        },
    )
    return 0


def cmd_bench(args) -> int:
    threads = _apply_threads(args.threads)
    reps = args.reps
    rows = []
    if args.case in ("svd-width", "all"):
        rows += bench_mod.bench_svd_width(args.nd, _parse_ints(args.m_values), reps)
    if args.case in ("spaced", "all"):
        rows += bench_mod.bench_spaced_speedup(1, args.d, _parse_ints(args.s_values),
                                               args.base_m, reps)
    if args.case in ("toeplitz", "all"):
        rows += bench_mod.bench_toeplitz_vs_hankel(args.n_components, args.d,
                                                   _parse_ints(args.m_values), reps)
    if args.case in ("kernels", "all") and backend.HAS_NUMBA:
        rows += bench_mod.bench_kernels(reps=reps)
    bench_mod.write_rows_csv(rows, args.out_prefix + ".csv")
    report = bench_mod.fit_report(rows)
    with open(args.out_prefix + ".summary.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
        fh.write("\n")
    for key, value in sorted(report.items()):
        print(f"{key}: {value}")
    _write_manifest(
        args.out_prefix + ".manifest",
        "bench",
        {
            "case": args.case, "nd": args.nd, "d": args.d,
            "n_components": args.n_components, "m_values": args.m_values,
            "s_values": args.s_values, "base_m": args.base_m, "reps": reps,
            "threads": threads, "out_prefix": args.out_prefix,
        },
    )
    return 0


def cmd_info(args) -> int:
    for path in args.paths:
        with open(path, "rb") as fh:
            magic = fh.read(4)
        if magic == b"STPD":
            series = load(path)
            print(
                f"{path}: stpd series, N={series.n_components}, "
                f"L={series.n_snapshots}, dt={series.dt!r}"
            )
        elif magic == b"STPM":
            modes = load_modes(path)
            print(
                f"{path}: stpm modes, method={modes.method}, N={modes.n_components}, "
                f"d={modes.depth}, r={modes.n_modes}, dt={modes.dt!r}, "
                f"weight={modes.weight.kind}"
            )
        elif magic == b"STPF":
            fms = load_frequency_modes(path)
            print(
                f"{path}: stpf frequency modes, N={fms.modes.shape[1]}, "
                f"bins={fms.n_bins}, r={fms.modes.shape[2]}, n_fft={fms.spec.n_fft}, "
                f"overlap={fms.spec.overlap!r}, window={fms.spec.window}, "
                f"one_sided={fms.spec.one_sided}, blocks={fms.n_blocks}, dt={fms.dt!r}"
            )
        else:
            raise FormatError(f"{path}: unrecognized magic {magic!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stpod",
        description="Modal decomposition of vector time series "
                    "(space-only POD, space-time POD, spectral POD).",
    )
    parser.add_argument("--version", action="version", version=f"stpod {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--config", help="key=value configuration file; flags override")
        p.add_argument("--threads", type=int, default=0,
                       help="worker thread bound (default: STPOD_THREADS or library default)")

    p_gen = sub.add_parser("generate", help="generate a synthetic series")
    _add_generator_arguments(p_gen)
    p_gen.add_argument("--n", type=int, required=True, help="number of snapshots")
    p_gen.add_argument("--dt", type=float, required=True)
    p_gen.add_argument("-o", "--output", required=True)
    p_gen.add_argument("--format", choices=("stpd", "csv"))
    common(p_gen)
    p_gen.set_defaults(func=cmd_generate)

    p_dec = sub.add_parser("decompose", help="compute modes from a data file")
    p_dec.add_argument("-i", "--input", required=True)
    p_dec.add_argument("-o", "--output", required=True)
    p_dec.add_argument("--method", required=True, choices=_METHODS)
    p_dec.add_argument("--d", type=int, default=1, help="embedding depth (snapshots per column)")
    p_dec.add_argument("--s", type=int, default=1, help="column spacing for --method spaced")
    p_dec.add_argument("--r", type=int, help="number of modes to keep")
    p_dec.add_argument("--weight-file", help="text file with N positive weights")
    p_dec.add_argument("--n-fft", type=int, default=128, help="block length for --method spod")
    p_dec.add_argument("--overlap", type=float, default=0.0)
    p_dec.add_argument("--window", choices=("rectangular", "hann"), default="rectangular")
    p_dec.add_argument("--two-sided", action="store_true", help="keep negative-frequency bins")
    common(p_dec)
    p_dec.set_defaults(func=cmd_decompose)

    p_study = sub.add_parser("study", help="seeded convergence study over a method grid")
    _add_generator_arguments(p_study)
    p_study.add_argument("--dt", type=float, required=True)
    p_study.add_argument("--d", type=int, required=True)
    p_study.add_argument("--s", type=int, default=1)
    p_study.add_argument("--m-values", required=True, help="comma-separated column counts")
    p_study.add_argument("--methods", default="hankel,toeplitz")
    p_study.add_argument("--metric", choices=("similarity", "cumulative-energy"),
                         default="similarity")
    p_study.add_argument("--mode-index", type=int, default=0)
    p_study.add_argument("--k", type=int, default=1, help="modes summed by cumulative-energy")
    p_study.add_argument("--trials", type=int, required=True)
    p_study.add_argument("--reference-factor", type=int, default=100)
    p_study.add_argument("-o", "--out-prefix", required=True)
    common(p_study)
    p_study.set_defaults(func=cmd_study)

    p_bench = sub.add_parser("bench", help="timing report with fitted log-log slopes")
    p_bench.add_argument("--case", choices=("svd-width", "spaced", "toeplitz", "kernels", "all"),
                         default="all")
    p_bench.add_argument("--nd", type=int, default=2000, help="row count for svd-width")
    p_bench.add_argument("--d", type=int, default=64)
    p_bench.add_argument("--n-components", type=int, default=1)
    p_bench.add_argument("--m-values", default="50,100,200,400")
    p_bench.add_argument("--s-values", default="2,4")
    p_bench.add_argument("--base-m", type=int, default=400,
                         help="columns of the spaced matrix at the largest spacing")
    p_bench.add_argument("--reps", type=int, default=5)
    p_bench.add_argument("-o", "--out-prefix", required=True)
    common(p_bench)
    p_bench.set_defaults(func=cmd_bench)

    p_info = sub.add_parser("info", help="print file headers")
    p_info.add_argument("paths", nargs="+")
    common(p_info)
    p_info.set_defaults(func=cmd_info)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    # pre-scan for --config so file values become overridable defaults
    try:
        if "--config" in argv:
            config_path = argv[argv.index("--config") + 1]
            head, tail = argv[:1], argv[1:]
            argv = head + _config_argv(config_path) + tail
        args = parser.parse_args(argv)
    except IndexError:
        parser.print_usage(sys.stderr)
        print("stpod: --config requires a path", file=sys.stderr)
        return 2
    except (OSError, FormatError, ValueError) as exc:
        print(f"stpod: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (FormatError, ValueError, OSError) as exc:
        print(f"stpod: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure, distinct from usage errors
        print(f"stpod: runtime failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
