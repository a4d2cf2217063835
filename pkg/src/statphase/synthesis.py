"""Matched-filter synthesis, sparse (masked) synthesis and cascade calibration."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._parallel import thread_map
from .filterbank import FilterBank
from .tfanalysis import TFField, analyze, fir_filter


def _check_bank(X: TFField, bank: FilterBank):
    if X.num_channels != len(bank):
        raise ValueError(f"field has {X.num_channels} channels, bank has {len(bank)}")
    if X.bank_hash and X.bank_hash != bank.hash:
        raise ValueError("field was produced by a different filter bank")
    if X.sample_rate != bank.sample_rate:
        raise ValueError("field and bank sample rates differ")


def _matched_sum(data: np.ndarray, bank: FilterBank) -> np.ndarray:
    # sum_k dmu * sum_tau X_k(tau) conj(h_k(tau - t)) dtau  (anticausal matched filters)
    def one(k):
        ch = bank[k]
        if not np.any(data[k]):
            return np.zeros(data.shape[1], dtype=complex)
        rev = np.conj(ch.fir_taps[::-1])
        return fir_filter(data[k], rev, ch.num_taps - 1 - ch.fir_offset)

    rows = thread_map(one, range(len(bank)))
    return bank.delta_mu * np.sum(np.vstack(rows), axis=0)


def synthesize_raw(X: TFField, bank: FilterBank) -> np.ndarray:
    """Complex channel sum before taking the real part and dividing by ``C``."""
    _check_bank(X, bank)
    return _matched_sum(X.data, bank)


def synthesize_full(X: TFField, bank: FilterBank, C: float | None = None) -> np.ndarray:
    """Reconstruct the real signal from the whole TF plane.

    For a complex (analytic) input only positive frequencies reach the
    bank, so the effective constant is doubled and the output estimates
    ``Re{x}``.
    """
    C = bank.C if C is None else C
    if C <= 0:
        raise ValueError("synthesis constant must be positive")
    y = synthesize_raw(X, bank)
    scale = 2.0 * C if X.analytic else C
    return y.real / scale


def synthesize_masked(X: TFField, mask, bank: FilterBank, C: float | None = None) -> np.ndarray:
    """As :func:`synthesize_full` with coefficients outside ``mask`` set to zero.

    ``mask`` is a :class:`~statphase.tfspa.RegionMask` or a boolean array.
    """
    keep = getattr(mask, "keep", mask)
    keep = np.asarray(keep, dtype=bool)
    if keep.shape != X.shape:
        raise ValueError(f"mask shape {keep.shape} does not match field {X.shape}")
    Xm = TFField(np.where(keep, X.data, 0), X.sample_rate, X.bank_hash, X.analytic)
    return synthesize_full(Xm, bank, C)


@dataclass
class CascadeResponse:
    """Analysis+synthesis frequency response on an rfft grid."""

    freq_hz: np.ndarray
    gain: np.ndarray
    phase: np.ndarray
    band_hz: tuple

    @property
    def in_band(self) -> np.ndarray:
        lo, hi = self.band_hz
        return (self.freq_hz >= lo) & (self.freq_hz <= hi)

    @property
    def gain_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 20 * np.log10(self.gain)

    def ripple_db(self) -> float:
        g = self.gain_db[self.in_band]
        return float(g.max() - g.min())

    def phase_deviation(self) -> float:
        """Max in-band deviation of the unwrapped phase from its best-fit line."""
        sel = self.in_band
        f = self.freq_hz[sel]
        ph = np.unwrap(self.phase[sel])
        coef = np.polyfit(f, ph, 1)
        return float(np.max(np.abs(ph - np.polyval(coef, f))))

    def gain_at(self, f_hz: float) -> float:
        return float(np.interp(f_hz, self.freq_hz, self.gain))


def _impulse_length(bank: FilterBank) -> int:
    need = 4 * bank.max_taps
    return max(8192, 1 << int(np.ceil(np.log2(need))))


def _raw_cascade(bank: FilterBank, n_fft: int | None = None):
    N = n_fft or _impulse_length(bank)
    n0 = N // 2
    x = np.zeros(N)
    x[n0] = 1.0
    X = analyze(x, bank)
    y = synthesize_raw(X, bank).real
    spec = np.fft.rfft(np.roll(y, -n0))
    freqs = np.fft.rfftfreq(N, 1.0 / bank.sample_rate)
    return freqs, spec


def calibrate_C(bank: FilterBank) -> float:
    """Synthesis constant giving unit mean gain over the interior band.

    Equivalent to the peak of the cascade response to a unit impulse that
    has been band-limited to the interior band, divided by its bandwidth.
    """
    freqs, spec = _raw_cascade(bank)
    lo, hi = (w / (2 * np.pi) for w in bank.interior_band())
    sel = (freqs >= lo) & (freqs <= hi)
    C = float(np.mean(np.abs(spec[sel])))
    if not np.isfinite(C) or C <= 0:
        raise ValueError("degenerate filter bank: zero cascade gain")
    return C


def cascade_response(bank: FilterBank, C: float | None = None, n_fft: int | None = None) -> CascadeResponse:
    """Measured gain and phase of analysis followed by synthesis.

    The response is taken from the FFT of the cascade's response to a
    unit impulse, referenced to the impulse position so that a
    distortionless cascade has zero phase.
    """
    C = bank.C if C is None else C
    freqs, spec = _raw_cascade(bank, n_fft)
    spec = spec / C
    lo, hi = (w / (2 * np.pi) for w in bank.interior_band())
    return CascadeResponse(freqs, np.abs(spec), np.angle(spec), (lo, hi))
