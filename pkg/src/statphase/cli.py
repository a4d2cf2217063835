"""Command-line interface: ``tfspa <command> ...``.

Exit codes: 0 success, 2 usage error, 3 data-format error, 4 numeric failure.
Negative values in exponent notation need the ``--gamma=-1e5`` form.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .figures import make_figure
from .filterbank import FilterBank, FilterBankSpec
from .io import (DataFormatError, field_to_csv, read_field, read_signal, write_csv_columns,
                 write_field, write_signal)
from .masking import masking_curve
from .signals import ElementarySignal, generate, oracle_chirp_locus
from .synthesis import synthesize_full, synthesize_masked
from .tfanalysis import DerivedFields, analyze, analyze_derivatives, gradient_fields
from .tfspa import RegionMask, build_region_mask

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

_BANK_KEYS = {
    "spacing": "spacing", "prototype": "prototype", "n": "n", "c": "c",
    "fmin": "f_min_hz", "fmax": "f_max_hz", "fs": "sample_rate_hz",
    "density": "density", "scale": "bandwidth_scale",
}


class UsageError(Exception):
    pass


def _add_bank_args(p):
    g = p.add_argument_group("filter bank (flags override the bank file)")
    g.add_argument("--bank", type=Path, help="filter bank JSON file")
    g.add_argument("--spacing", choices=["uniform", "log", "cochlear"])
    g.add_argument("--prototype", choices=["gaussian", "gammatone", "gammachirp"])
    g.add_argument("--n", type=int, help="gammachirp order")
    g.add_argument("--c", type=float, help="gammachirp chirp parameter")
    g.add_argument("--fmin", type=float, help="lowest centre frequency, Hz")
    g.add_argument("--fmax", type=float, help="highest centre frequency, Hz")
    g.add_argument("--fs", type=float, help="sample rate, Hz")
    g.add_argument("--density", type=float, help="filters per ERB")
    g.add_argument("--scale", type=float, help="(dw/dmu) / beta")


def _bank_from_args(args) -> FilterBank:
    overrides = {dst: getattr(args, src) for src, dst in _BANK_KEYS.items()
                 if getattr(args, src, None) is not None}
    if args.bank is not None:
        try:
            d = json.loads(Path(args.bank).read_text())
        except json.JSONDecodeError as err:
            raise DataFormatError(f"{args.bank}:{err.lineno}: invalid JSON ({err.msg})") from None
        except OSError as err:
            raise DataFormatError(f"{args.bank}: {err.strerror}") from None
        if not isinstance(d, dict):
            raise DataFormatError(f"{args.bank}: expected a JSON object")
    else:
        d = FilterBankSpec().to_dict()
    C = d.pop("C", None)
    if "prototype" in overrides:
        # the file's chirp and bandwidth belong to the file's prototype
        if "c" not in overrides:
            d["c"] = 4.0 if overrides["prototype"] == "gammachirp" else 0.0
        if "bandwidth_scale" not in overrides:
            d.pop("bandwidth_scale", None)
    d.update(overrides)
    try:
        spec = FilterBankSpec.from_dict(d)
    except (TypeError, KeyError) as err:
        raise DataFormatError(f"{args.bank}: bad filter bank ({err})") from None
    # a stored C is only trusted when nothing was overridden
    return FilterBank(spec, C=float(C) if C is not None and not overrides else None)


def _check_rate(fs, bank, where):
    if abs(fs - bank.sample_rate) > 1e-9:
        raise DataFormatError(f"{where}: sample rate {fs:g} Hz does not match the bank "
                              f"({bank.sample_rate:g} Hz); resample first")


def _load_fields(path, bank):
    f = read_field(path)
    X = f.X if isinstance(f, DerivedFields) else f
    _check_rate(X.sample_rate, bank, path)
    if X.bank_hash and X.bank_hash != bank.hash:
        raise DataFormatError(f"{path}: field was produced by a different filter bank")
    if X.num_channels != len(bank):
        raise DataFormatError(f"{path}: {X.num_channels} channels, bank has {len(bank)}")
    return f


# commands ---------------------------------------------------------------


def cmd_bank(args):
    bank = _bank_from_args(args)
    info = bank.to_dict()
    info.update(num_channels=len(bank), hash=bank.hash, max_taps=bank.max_taps)
    if args.out:
        bank.save(args.out)
    if args.table:
        write_csv_columns(args.table, {
            "channel": np.arange(len(bank)), "freq_hz": bank.freqs_hz, "beta": bank.betas,
            "dbeta_domega": bank.dbetas, "domega_dmu": bank.domega_dmus,
            "group_delay_s": bank.group_delays, "num_taps": [ch.num_taps for ch in bank]})
    print(json.dumps(info, indent=2, sort_keys=True))


_KIND_ALIASES = {"tone": "phasor", "impulse": "impulse", "chirp": "chirp", "decay": "decay",
                 "twotone": "twotone", "twochirp": "twochirp"}


def cmd_gen(args):
    kind = _KIND_ALIASES[args.kind]
    sig = ElementarySignal(kind, duration=args.duration, sample_rate=args.fs, onset=args.onset,
                           amplitude=args.amplitude, freq_hz=args.freq, gamma=args.gamma,
                           decay=args.decay, freq2_hz=args.freq2, gamma2=args.gamma2,
                           amp2=args.amp2, analytic=False)
    write_signal(args.out, generate(sig), args.fs, args.format)


def cmd_analyze(args):
    bank = _bank_from_args(args)
    x, fs = read_signal(args.input, args.input_fs if args.input_fs else None)
    _check_rate(fs, bank, args.input)
    if args.no_derivatives:
        fields = analyze(x, bank)
        X = fields
    else:
        fields = analyze_derivatives(x, bank)
        X = fields.X
    write_field(args.out, fields, np.complex128 if args.double else np.complex64)
    if args.csv:
        field_to_csv(args.csv, X, bank.freqs_hz)
    if args.gradients:
        if args.no_derivatives:
            raise UsageError("--gradients needs the derivative fields")
        g = gradient_fields(fields, bank)
        K, N = X.shape
        write_csv_columns(args.gradients, {
            "channel_hz": np.repeat(bank.freqs_hz, N), "time_s": np.tile(X.times, K),
            "phi_tau": g.phi[0].ravel(), "phi_mu": g.phi[1].ravel(),
            "a_tau": g.amp[0].ravel(), "a_mu": g.amp[1].ravel(), "p": g.p.ravel()}, fmt="%.9g")


def cmd_tfspa(args):
    if not args.c1 > 0:
        raise UsageError("--c1 must be positive")
    if not args.c2 >= 1:
        raise UsageError("--c2 must be >= 1")
    if args.radius < 0:
        raise UsageError("--radius must be non-negative")
    bank = _bank_from_args(args)
    f = _load_fields(args.field, bank)
    if not isinstance(f, DerivedFields):
        raise DataFormatError(f"{args.field}: field file has no derivative fields; "
                              "re-run analyze without --no-derivatives")
    g = gradient_fields(f, bank)
    mask = build_region_mask(g, args.c1, args.c2, args.radius, ord=1 if args.norm == "l1" else 2)
    mask.to_csv(args.out)
    if args.pbm:
        mask.to_pbm(args.pbm)
    rep = mask.report()
    if args.locus_gamma is not None:
        loc = oracle_chirp_locus(bank, args.locus_gamma, args.locus_t_zero)
        if args.locus_out:
            write_csv_columns(args.locus_out, {"channel_hz": bank.freqs_hz, "tau_s": loc.tau,
                                               "tau_peak_s": loc.tau_peak,
                                               "valid": loc.valid.astype(float)})
        rep["locus_valid_channels"] = int(loc.valid.sum())
    text = json.dumps(rep, indent=2, sort_keys=True)
    if args.report:
        Path(args.report).write_text(text + "\n")
    print(text)


def cmd_synth(args):
    bank = _bank_from_args(args)
    f = _load_fields(args.field, bank)
    X = f.X if isinstance(f, DerivedFields) else f
    if args.mask:
        mask = RegionMask.from_csv(args.mask)
        if mask.shape != X.shape:
            raise DataFormatError(f"{args.mask}: mask shape {mask.shape} does not match field {X.shape}")
        y = synthesize_masked(X, mask, bank)
    else:
        y = synthesize_full(X, bank)
    write_signal(args.out, y, bank.sample_rate, args.format)


def cmd_mask_threshold(args):
    if not args.c1 > 0:
        raise UsageError("--c1 must be positive")
    bank = _bank_from_args(args)
    mc = masking_curve(bank, args.masker_hz, args.masker_db, args.c1, args.method)
    cols = {"channel_hz": mc.freq_hz, "threshold_db": np.maximum(mc.threshold_db, -120.0),
            "masker_response_db": mc.masker_response_db}
    if args.out:
        write_csv_columns(args.out, cols)
    else:
        write_csv_columns(sys.stdout, cols)


def cmd_figures(args):
    for p in make_figure(args.id, args.out):
        print(p)


# parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tfspa", description="Time-frequency stationary phase toolkit")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bank", help="build or inspect a filter bank")
    _add_bank_args(p)
    p.add_argument("--out", type=Path, help="write the bank (with calibrated C) to this JSON file")
    p.add_argument("--table", type=Path, help="write a per-channel CSV table")
    p.set_defaults(func=cmd_bank)

    p = sub.add_parser("gen", help="generate an elementary test signal")
    p.add_argument("--kind", required=True, choices=sorted(_KIND_ALIASES))
    p.add_argument("--out", type=Path, required=True, help=".wav or .csv")
    p.add_argument("--fs", type=float, default=20000.0)
    p.add_argument("--duration", type=float, default=0.1)
    p.add_argument("--onset", type=float, default=0.01)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--freq", type=float, default=1000.0, help="tone/decay frequency or chirp start, Hz")
    p.add_argument("--gamma", type=float, default=0.0, help="chirp rate, rad/s^2")
    p.add_argument("--decay", type=float, default=-200.0, help="Re(lambda) of the decaying phasor, 1/s")
    p.add_argument("--freq2", type=float, default=0.0)
    p.add_argument("--gamma2", type=float, default=0.0)
    p.add_argument("--amp2", type=float, default=0.0)
    p.add_argument("--format", choices=["pcm16", "float32"], default="float32")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("analyze", help="run the analysis filter bank")
    p.add_argument("input", type=Path, help="mono .wav or one-column .csv")
    _add_bank_args(p)
    p.add_argument("--out", type=Path, required=True, help="TF field container")
    p.add_argument("--input-fs", type=float, help="sample rate of a CSV input")
    p.add_argument("--no-derivatives", action="store_true")
    p.add_argument("--double", action="store_true", help="store complex128 instead of complex64")
    p.add_argument("--csv", type=Path, help="also export X as long-format CSV")
    p.add_argument("--gradients", type=Path, help="export phi, a and p as CSV")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("tfspa", help="stationary-phase and dominance masks")
    p.add_argument("field", type=Path)
    _add_bank_args(p)
    p.add_argument("--out", type=Path, required=True, help="mask CSV")
    p.add_argument("--pbm", type=Path)
    p.add_argument("--report", type=Path)
    p.add_argument("--c1", type=float, default=10.0)
    p.add_argument("--c2", type=float, default=1.0)
    p.add_argument("--radius", type=int, default=1)
    p.add_argument("--norm", choices=["l2", "l1"], default="l2")
    p.add_argument("--locus-gamma", type=float, help="chirp rate for a locus overlay")
    p.add_argument("--locus-t-zero", type=float, default=0.0,
                   help="time at which the chirp frequency would be zero, s")
    p.add_argument("--locus-out", type=Path)
    p.set_defaults(func=cmd_tfspa)

    p = sub.add_parser("synth", help="reconstruct a signal from a TF field")
    p.add_argument("field", type=Path)
    _add_bank_args(p)
    p.add_argument("--mask", type=Path, help="mask CSV from the tfspa command")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--format", choices=["pcm16", "float32"], default="float32")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("mask-threshold", help="two-tone masking threshold curve")
    _add_bank_args(p)
    p.add_argument("--masker-hz", type=float, default=1000.0)
    p.add_argument("--masker-db", type=float, default=0.0)
    p.add_argument("--c1", type=float, default=10.0)
    p.add_argument("--method", choices=["approx", "exact"], default="approx")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_mask_threshold)

    p = sub.add_parser("figures", help="write plot data for a figure reproduction")
    p.add_argument("id", type=int, choices=range(1, 9), metavar="ID")
    p.add_argument("--out", type=Path, default=Path("figures"))
    p.set_defaults(func=cmd_figures)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        args.func(args)
    except UsageError as err:
        ap.print_usage(sys.stderr)
        print(f"tfspa: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except DataFormatError as err:
        print(f"tfspa: data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except OSError as err:
        print(f"tfspa: data error: {err.filename}: {err.strerror}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, ArithmeticError, FloatingPointError) as err:
        print(f"tfspa: numeric error: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
