"""Experiment presets and plot-ready data for the figure reproductions.

Each ``figN`` function writes one CSV per panel into ``out_dir`` and
returns the list of files written.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .filterbank import FilterBank, FilterBankSpec, PrototypeFilter
from .io import write_csv_columns
from .masking import TwoToneConfig, masking_curve, min_norm_approx, min_norm_branches, min_norm_numeric
from .signals import (ElementarySignal, FilterParams, chirp_t_zero, generate, impulse_rates,
                      oracle_chirp_locus, phasor_rates, rates_to_p_a)
from .synthesis import synthesize_full, synthesize_masked
from .tfanalysis import analyze_derivatives, gradient_fields
from .tfspa import build_region_mask

#: single-filter example used for the rate plots
EXAMPLE_BETA = 712.0
EXAMPLE_DBETA = 1.0 / 9.0
EXAMPLE_SCALE = 35.0
EXAMPLE_C = (0.0, 2.0, 4.0)


def reference_bank(prototype: str = "gammachirp") -> FilterBank:
    """103-channel cochlear bank, 100-5000 Hz at 20 kHz."""
    proto = PrototypeFilter.gammachirp(4, 4.0) if prototype == "gammachirp" else PrototypeFilter.gammatone(4)
    return FilterBank(FilterBankSpec("cochlear", 100.0, 5000.0, proto))


def impulse_signal(onset: float = 0.01, duration: float = 0.12) -> ElementarySignal:
    return ElementarySignal.impulse(onset=onset, duration=duration)


def tone_signal(freq_hz: float, onset: float = 0.01, duration: float = 0.4) -> ElementarySignal:
    return ElementarySignal.phasor(freq_hz, onset=onset, duration=duration, analytic=False)


def two_chirp_signal(duration: float = 0.32, onset: float = 0.01) -> ElementarySignal:
    """Strong down-chirp from 5 kHz plus a weaker up-chirp from 500 Hz."""
    return ElementarySignal.two_chirp(4999.0, -1e5, 500.0, 8e4, 0.1, onset=onset, duration=duration)


def run_tfspa(x, bank, C1=10.0, C2=1.0, radius=1):
    """Analysis, masks and both reconstructions for one signal."""
    fields = analyze_derivatives(x, bank)
    grads = gradient_fields(fields, bank)
    mask = build_region_mask(grads, C1, C2, radius)
    full = synthesize_full(fields.X, bank)
    sparse = synthesize_masked(fields.X, mask, bank)
    return fields, grads, mask, full, sparse


def _example_params(c: float) -> FilterParams:
    return FilterParams(PrototypeFilter.gammachirp(4, c), EXAMPLE_BETA, EXAMPLE_DBETA,
                        EXAMPLE_SCALE * EXAMPLE_BETA)


def _tf_panels(out: Path, stem: str, fields, mask, bank, step: int):
    mag = fields.X.magnitude_db()
    K, N = mag.shape
    idx = np.arange(0, N, step)
    t = idx / bank.sample_rate
    f = np.repeat(bank.freqs_hz, len(idx))
    tt = np.tile(t, K)
    a = out / f"{stem}a.csv"
    write_csv_columns(a, {"channel_hz": f, "time_s": tt, "mag_db": mag[:, idx].ravel()}, fmt="%.7g")
    kept = np.where(mask.keep, mag, -120.0)[:, idx]
    b = out / f"{stem}b.csv"
    write_csv_columns(b, {"channel_hz": f, "time_s": tt, "mag_db": kept.ravel(),
                          "stationary": mask.stationary[:, idx].ravel().astype(float)}, fmt="%.7g")
    return [a, b]


def fig1(out: Path):
    bt = np.linspace(0.05, 12.0, 480)
    cols = {"beta_tau": bt}
    resp = {"beta_tau": bt}
    for c in EXAMPLE_C:
        p = _example_params(c)
        zt, zm = impulse_rates(p, bt / p.beta)
        pp, na = rates_to_p_a(zt, zm)
        cols[f"p_c{c:g}"] = pp
        cols[f"a_norm_c{c:g}"] = na
        resp[f"abs_h_c{c:g}"] = np.abs(p.prototype.h(bt))
    f1, f2 = out / "fig1a.csv", out / "fig1b.csv"
    write_csv_columns(f1, cols)
    write_csv_columns(f2, resp)
    return [f1, f2]


def _impulse_run():
    bank = reference_bank()
    sig = impulse_signal()
    return bank, sig, run_tfspa(generate(sig), bank)


def fig2(out: Path):
    bank, _, (fields, _, mask, _, _) = _impulse_run()
    return _tf_panels(out, "fig2", fields, mask, bank, step=1)


def fig3(out: Path):
    bank, sig, (_, _, _, full, sparse) = _impulse_run()
    x = generate(sig)
    t = np.arange(len(x)) / bank.sample_rate
    f = out / "fig3.csv"
    write_csv_columns(f, {"time_s": t, "input": x, "full": full, "tfspa": sparse})
    return [f]


def fig4(out: Path):
    W = np.linspace(-3.0, 3.0, 601)
    cols = {"Omega": W}
    for c in EXAMPLE_C:
        zt, zm = phasor_rates(_example_params(c), W)
        pp, na = rates_to_p_a(zt, zm)
        cols[f"p_c{c:g}"] = pp
        cols[f"a_norm_c{c:g}"] = na
    f = out / "fig4.csv"
    write_csv_columns(f, cols)
    return [f]


def fig5(out: Path):
    bank = reference_bank()
    sig = tone_signal(1000.0, duration=0.1)
    x = generate(sig)
    fields, _, mask, full, sparse = run_tfspa(x, bank)
    files = _tf_panels(out, "fig5", fields, mask, bank, step=2)
    t = np.arange(len(x)) / bank.sample_rate
    f = out / "fig5c.csv"
    write_csv_columns(f, {"time_s": t, "input": x, "full": full, "tfspa": sparse})
    return files + [f]


def fig6(out: Path):
    bank = reference_bank("gammatone")
    sig = two_chirp_signal()
    x = generate(sig)
    fields, _, mask, full, sparse = run_tfspa(x, bank)
    files = _tf_panels(out, "fig6", fields, mask, bank, step=10)
    loc = oracle_chirp_locus(bank, sig.gamma, chirp_t_zero(sig))
    f = out / "fig6_locus.csv"
    write_csv_columns(f, {"channel_hz": bank.freqs_hz, "tau_s": loc.tau,
                          "tau_peak_s": loc.tau_peak, "valid": loc.valid.astype(float)})
    t = np.arange(len(x)) / bank.sample_rate
    r = out / "fig6c.csv"
    write_csv_columns(r, {"time_s": t, "input": x.real, "full": full, "tfspa": sparse})
    return files + [f, r]


def fig7(out: Path):
    spec = reference_bank("gammatone").spec
    cfg = TwoToneConfig.from_spec(spec, 1000.0, 0.0, 1.0)
    cfg = TwoToneConfig(cfg.omega, cfg.omega + cfg.beta, 1.0, cfg.beta, cfg.n,
                        cfg.dbeta_domega, cfg.domega_dmu)
    v = np.logspace(-2, 2, 401)
    num = np.array([min_norm_numeric(cfg.with_v(x)).value for x in v])
    app = np.array([min_norm_approx(cfg, x) for x in v])
    br = np.array([min_norm_branches(cfg, x) for x in v])
    f = out / "fig7.csv"
    write_csv_columns(f, {"abs_A1H1": v, "numeric": num, "approx_bridged": app,
                          "approx_small": br[:, 0], "approx_large": br[:, 1]})
    return [f]


def fig8(out: Path):
    bank = reference_bank("gammatone")
    lo, hi = bank.freqs_hz[0], bank.freqs_hz[-1]
    freqs = np.unique(np.concatenate([np.geomspace(lo, hi, 241), [1000.0]]))
    a = masking_curve(bank, 1000.0, 0.0, 10.0, "approx", freqs)
    e = masking_curve(bank, 1000.0, 0.0, 10.0, "exact", freqs)
    f = out / "fig8.csv"
    # -inf thresholds are written at the -120 dB floor
    write_csv_columns(f, {"channel_hz": freqs,
                          "threshold_db": np.maximum(a.threshold_db, -120.0),
                          "threshold_db_exact": np.maximum(e.threshold_db, -120.0),
                          "masker_response_db": a.masker_response_db})
    return [f]


FIGURES = {1: fig1, 2: fig2, 3: fig3, 4: fig4, 5: fig5, 6: fig6, 7: fig7, 8: fig8}


def make_figure(fig_id: int, out_dir) -> list:
    if fig_id not in FIGURES:
        raise ValueError(f"figure id must be one of {sorted(FIGURES)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return FIGURES[fig_id](out)


def nearest_channel(bank: FilterBank, freq_hz: float) -> int:
    return int(np.argmin(np.abs(bank.freqs_hz - freq_hz)))


def channel_amplitude_db(y, ref) -> float:
    """Level of ``y`` relative to ``ref`` in dB (RMS ratio)."""
    return 20 * math.log10(np.sqrt(np.mean(np.square(y))) / np.sqrt(np.mean(np.square(ref))))
