"""Command-line front end: fit, generate, analyze, compare, spectrum.

Every command is deterministic given its inputs and seed flags. Errors
exit nonzero and print a machine-parseable code token as the first line
on stderr (exit 2 usage, 3 detection/fit, 4 I/O).
"""

import argparse
import math
import sys

import numpy as np

from . import __version__, baselines, chain, detect, fit, io, metrics
from .errors import (ParamsFormatError, ToolkitError, TraceFormatError,
                     UnknownModelKind, UsageError)

_DEFAULT_SAMPLES = 10_000_000


def _fmt(value):
    """Locale-independent shortest round-trip decimal for a float."""
    value = float(value)
    if math.isnan(value):
        return "nan"
    return repr(value)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_threshold_flags(parser):
    parser.add_argument("--threshold-mode", choices=("fixed", "universal"),
                        default="fixed",
                        help="amplitude threshold rule: fixed 5*sigma0 or the "
                             "universal threshold sigma0*sqrt(2 ln n)")
    parser.add_argument("--universal-window", type=int, default=None,
                        help="window length n for the universal threshold "
                             "(defaults to the trace length)")


def build_parser():
    parser = _Parser(prog="impnoise",
                     description="Impulsive noise toolkit: partitioned Markov "
                                 "chain generation, detection, fitting and "
                                 "model comparison.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="estimate model parameters from a trace")
    p.add_argument("input", help="trace file to fit")
    p.add_argument("-o", "--output", required=True, help="params file to write")
    p.add_argument("--report", help="write the fit report here instead of stdout")
    p.add_argument("--model", choices=("chain", "bg-memory", "class-a"),
                   default="chain")
    p.add_argument("--states-per-system", type=int, choices=(4, 6), default=6)
    p.add_argument("--fft-size", type=int, default=None)
    _add_threshold_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("generate", help="generate a trace from a params file")
    p.add_argument("params", help="params file (any model kind)")
    p.add_argument("-o", "--output", required=True, help="trace file to write")
    p.add_argument("--samples", type=int, default=_DEFAULT_SAMPLES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sampling-rate", type=float, default=None,
                   help="sampling rate for models whose params carry none")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("analyze", help="detect impulses and dump event stats")
    p.add_argument("input", help="trace file to analyze")
    p.add_argument("-o", "--output", required=True, help="events CSV to write")
    p.add_argument("--stats", help="write the stats text here instead of stdout")
    _add_threshold_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("compare", help="score model params files against a trace")
    p.add_argument("--measured", required=True, help="measured trace file")
    p.add_argument("--model", action="append", required=True, dest="models",
                   help="model params file (repeatable)")
    p.add_argument("-o", "--output", required=True, help="report CSV to write")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bins", type=int, default=200)
    p.add_argument("--fft-size", type=int, default=None)
    _add_threshold_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("spectrum", help="averaged power spectrum as CSV")
    p.add_argument("input", help="trace file")
    p.add_argument("-o", "--output", required=True, help="spectrum CSV to write")
    p.add_argument("--impulses-only", action="store_true",
                   help="average per-impulse periodograms instead of "
                        "whole-trace segments")
    p.add_argument("--fft-size", type=int, default=None)
    _add_threshold_flags(p)
    p.set_defaults(func=cmd_spectrum)

    return parser


def _fit_report_text(report, n_samples):
    lines = [
        "model: partitioned-chain",
        f"samples: {n_samples}",
        f"background_variance: {_fmt(report.config.background_variance)}",
        f"th_a: {_fmt(report.detection.th_a)}",
        f"th_d: {report.detection.th_d}",
        f"events: {report.diagnostics.event_count}",
        f"truncated_events: {report.diagnostics.truncated_count}",
        f"osc_freq_cycles_per_sample: {_fmt(report.diagnostics.osc_freq_cycles)}",
        f"stay_prob: {_fmt(report.config.stay_prob)}",
    ]
    for g in report.groups:
        lines.append(
            f"group {g.group}: count={g.count} "
            f"interval=[{_fmt(g.amplitude_lo)}, {_fmt(g.amplitude_hi)}] "
            f"amplitude_mean={_fmt(g.amplitude_mean)} "
            f"amplitude_variance={_fmt(g.amplitude_variance)} "
            f"mean_duration={_fmt(g.mean_duration)}")
    probs = ", ".join(_fmt(p) for p in report.config.entry_probs)
    lines.append(f"entry_probs: {probs}")
    for warning in report.diagnostics.warnings:
        lines.append(f"warning: {warning}")
    return "\n".join(lines) + "\n"


def cmd_fit(args):
    trace = io.read_trace(args.input)
    if args.model == "chain":
        options = fit.FitOptions(states_per_system=args.states_per_system,
                                 threshold_mode=args.threshold_mode,
                                 universal_window=args.universal_window,
                                 fft_size=args.fft_size)
        report = fit.fit_chain(trace, options)
        io.write_params(args.output, report.config)
        text = _fit_report_text(report, len(trace))
    elif args.model == "bg-memory":
        params = baselines.fit_bg_memory(trace, args.threshold_mode,
                                         args.universal_window)
        io.write_params(args.output, params,
                        sampling_rate_hz=trace.sampling_rate_hz)
        text = ("model: bg-memory\n"
                f"background_stay_prob: {_fmt(params.background_stay_prob)}\n"
                f"impulse_stay_prob: {_fmt(params.impulse_stay_prob)}\n"
                f"background_variance: {_fmt(params.background_variance)}\n"
                f"impulse_variance: {_fmt(params.impulse_variance)}\n")
    else:
        params = baselines.fit_class_a(trace)
        io.write_params(args.output, params,
                        sampling_rate_hz=trace.sampling_rate_hz)
        text = ("model: class-a\n"
                f"impulsive_index: {_fmt(params.impulsive_index)}\n"
                f"power_ratio: {_fmt(params.power_ratio)}\n"
                f"total_variance: {_fmt(params.total_variance)}\n"
                f"truncation_order: {params.truncation_order}\n")
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _generate_trace(doc, n, seed, rate_flag):
    if doc.kind == io.MODEL_CHAIN:
        built = chain.build_chain(doc.params)
        trace, _ = chain.generate(built, n, seed)
        return trace
    rate = rate_flag or doc.sampling_rate_hz or 1.0
    if doc.kind == io.MODEL_BG:
        return baselines.generate_bg(doc.params, n, seed, sampling_rate_hz=rate)
    if doc.kind == io.MODEL_CLASS_A:
        return baselines.generate_class_a(doc.params, n, seed,
                                          sampling_rate_hz=rate)
    raise UnknownModelKind(f"unknown model kind {doc.kind!r}")


def cmd_generate(args):
    doc = io.read_params(args.params)
    trace = _generate_trace(doc, args.samples, args.seed, args.sampling_rate)
    io.write_trace(args.output, trace)
    sys.stdout.write(f"wrote {len(trace)} samples "
                     f"(rate {_fmt(trace.sampling_rate_hz)} Hz, seed {args.seed}) "
                     f"to {args.output}\n")
    return 0


def cmd_analyze(args):
    trace = io.read_trace(args.input)
    result = detect.detect_impulses(trace, args.threshold_mode,
                                    args.universal_window)
    events = result.events
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write("index,start_sample,duration_samples,amplitude,"
                 "iat_samples,iit_samples,truncated\n")
        for i, ev in enumerate(events):
            iat = "" if ev.iat is None else str(ev.iat)
            iit = "" if ev.iit is None else str(ev.iit)
            fh.write(f"{i},{ev.start},{ev.duration},{_fmt(ev.amplitude)},"
                     f"{iat},{iit},{int(ev.truncated)}\n")
    impulse_samples = sum(ev.duration for ev in events)
    try:
        r = metrics.pearson([ev.duration for ev in events],
                            [ev.amplitude for ev in events])
    except ToolkitError:
        r = math.nan
    stats = (
        f"samples: {len(trace)}\n"
        f"sampling_rate_hz: {_fmt(trace.sampling_rate_hz)}\n"
        f"background_std: {_fmt(result.moments.background_std)}\n"
        f"th_a: {_fmt(result.config.th_a)}\n"
        f"th_d: {result.config.th_d}\n"
        f"events: {len(events)}\n"
        f"truncated_events: {sum(1 for ev in events if ev.truncated)}\n"
        f"impulse_sample_fraction: {_fmt(impulse_samples / len(trace))}\n"
        f"pearson_duration_amplitude: {_fmt(r)}\n")
    if args.stats:
        with open(args.stats, "w", encoding="utf-8") as fh:
            fh.write(stats)
    else:
        sys.stdout.write(stats)
    return 0


def cmd_compare(args):
    measured = io.read_trace(args.measured)
    model_traces = {}
    for idx, path in enumerate(args.models):
        doc = io.read_params(path)
        name = f"{doc.kind}:{path}"
        model_traces[name] = _generate_trace(
            doc, len(measured), args.seed + idx, measured.sampling_rate_hz)
    config = metrics.CompareConfig(bin_count=args.bins, fft_size=args.fft_size,
                                   threshold_mode=args.threshold_mode,
                                   universal_window=args.universal_window)
    result = metrics.compare_report(measured, model_traces, config)
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write("model,characteristic,metric,value\n")
        for name in model_traces:
            if name in result.reports:
                report = result.reports[name]
                for char in metrics.CHARACTERISTICS:
                    scores = report.characteristics[char]
                    fh.write(f"{name},{char},kl,{_fmt(scores.kl)}\n")
                    fh.write(f"{name},{char},mse_cdf,{_fmt(scores.mse_cdf)}\n")
                for center, gap in report.band_gaps_db.items():
                    fh.write(f"{name},spectrum_band_{int(center)}hz,"
                             f"mean_abs_gap_db,{_fmt(gap)}\n")
                fh.write(f"{name},duration_amplitude,pearson_r,"
                         f"{_fmt(report.pearson_duration_amplitude)}\n")
            else:
                err = result.failures[name]
                fh.write(f"{name},error,code,{err.code}\n")
    for name, err in result.failures.items():
        sys.stderr.write(f"model failed: {name}: {err.code}: {err}\n")
    return 0 if result.reports else 3


def cmd_spectrum(args):
    trace = io.read_trace(args.input)
    if args.impulses_only:
        result = detect.detect_impulses(trace, args.threshold_mode,
                                        args.universal_window)
        spectrum = metrics.impulse_spectrum(result.events, trace, args.fft_size)
    else:
        spectrum = metrics.trace_spectrum(trace, args.fft_size or 4096)
    with np.errstate(divide="ignore"):
        power_db = 10.0 * np.log10(spectrum.power)
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write("frequency_hz,power_db\n")
        for f, p in zip(spectrum.freq_hz, power_db):
            fh.write(f"{_fmt(f)},{_fmt(p)}\n")
    return 0


def _report_error(token, err):
    sys.stderr.write(f"{token}\n")
    sys.stderr.write(f"{err}\n")


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as err:
        _report_error("UsageError", err)
        return 2
    except (TraceFormatError, ParamsFormatError, UnknownModelKind) as err:
        _report_error(err.code, err)
        return 4
    except ToolkitError as err:
        _report_error(err.code, err)
        return 3
    except OSError as err:
        _report_error("IOError", err)
        return 4


if __name__ == "__main__":
    sys.exit(main())
