"""Filter bank analysis, derivative fields and normalised phase/amplitude rates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from ._parallel import thread_map
from .filterbank import FilterBank

#: FIR length above which FFT block convolution is used
DIRECT_MAX_TAPS = 256
#: cells with |X| below this fraction of max |X| have undefined rates
MAG_FLOOR = 1e-8
#: weight matrix of the dominance projection
W = np.array([[1.0, 1.0], [-1.0, 1.0]])


def fir_filter(x: np.ndarray, taps: np.ndarray, offset: int) -> np.ndarray:
    """Filter ``x`` with taps whose element ``offset`` sits at ``t = 0``.

    Output is aligned with the input: ``y[n] = sum_m taps[m] x[n - m + offset]``.
    """
    if len(taps) <= DIRECT_MAX_TAPS:
        full = np.convolve(x, taps)
    else:
        full = sps.oaconvolve(x, taps)
    return full[offset:offset + len(x)]


@dataclass
class TFField:
    """Complex K x N time-frequency field sampled at ``sample_rate``.

    ``analytic`` records whether the analysed signal was complex, which
    changes the synthesis scaling.
    """

    data: np.ndarray
    sample_rate: float
    bank_hash: str = ""
    analytic: bool = False

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.ndim != 2:
            raise ValueError("TF field data must be 2-D (channels x samples)")

    @property
    def shape(self):
        return self.data.shape

    @property
    def num_channels(self) -> int:
        return self.data.shape[0]

    @property
    def num_samples(self) -> int:
        return self.data.shape[1]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.num_samples) / self.sample_rate

    def magnitude_db(self, floor_db: float = -120.0) -> np.ndarray:
        mag = np.abs(self.data)
        with np.errstate(divide="ignore"):
            db = 20 * np.log10(mag)
        return np.maximum(db, floor_db)

    def fully_overlapped(self, bank: FilterBank) -> np.ndarray:
        """Cells whose filter support lies entirely within the signal."""
        N = self.num_samples
        n = np.arange(N)
        out = np.zeros(self.shape, dtype=bool)
        for k, ch in enumerate(bank):
            lo = ch.num_taps - 1 - ch.fir_offset
            hi = N - 1 - ch.fir_offset
            out[k] = (n >= lo) & (n <= hi)
        return out


@dataclass
class DerivedFields:
    X: TFField
    dX_dtau: TFField
    dX_domega: TFField

    def __post_init__(self):
        if not (self.X.shape == self.dX_dtau.shape == self.dX_domega.shape):
            raise ValueError("derived fields must share one shape")

    @property
    def shape(self):
        return self.X.shape


def _check_signal(x) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 1:
        raise ValueError("signal must be one-dimensional")
    if x.size == 0:
        raise ValueError("signal is empty")
    if not np.all(np.isfinite(x)):
        raise ValueError("signal contains non-finite samples")
    return x


def _run(x, bank: FilterBank, attr: str) -> np.ndarray:
    rows = thread_map(lambda ch: fir_filter(x, getattr(ch, attr), ch.fir_offset), bank)
    return np.vstack(rows)


def analyze(signal, bank: FilterBank, analytic: bool | None = None) -> TFField:
    """Analysis filter bank output ``X_w(tau) = x * h_w``, one row per channel."""
    x = _check_signal(signal)
    if analytic is None:
        analytic = bool(np.iscomplexobj(x))
    return TFField(_run(x, bank, "fir_taps"), bank.sample_rate, bank.hash, analytic)


def analyze_derivatives(signal, bank: FilterBank, analytic: bool | None = None) -> DerivedFields:
    """``X`` together with its time and centre-frequency derivatives.

    Both derivatives come from dedicated derivative filters
    ``d/dtau h_w`` and ``d/dw h_w``.
    """
    x = _check_signal(signal)
    if analytic is None:
        analytic = bool(np.iscomplexobj(x))
    fs, h = bank.sample_rate, bank.hash
    return DerivedFields(
        TFField(_run(x, bank, "fir_taps"), fs, h, analytic),
        TFField(_run(x, bank, "taps_dtau"), fs, h, analytic),
        TFField(_run(x, bank, "taps_domega"), fs, h, analytic),
    )


def dX_domega_adjacent(X: TFField, bank: FilterBank) -> np.ndarray:
    """Centre-frequency derivative estimated from neighbouring channels."""
    return np.gradient(X.data, bank.omegas, axis=0)


def defined_cells(X, floor: float = MAG_FLOOR) -> np.ndarray:
    data = X.data if isinstance(X, TFField) else np.asarray(X)
    mag = np.abs(data)
    peak = mag.max() if mag.size else 0.0
    if peak == 0:
        return np.zeros(mag.shape, dtype=bool)
    return mag >= floor * peak


def _safe_ratio(num, den, ok):
    out = np.full(den.shape, np.nan + 0j)
    out[ok] = num[ok] / den[ok]
    return out


def z_tau(fields: DerivedFields, bank: FilterBank, cell=None, floor: float = MAG_FLOOR):
    """Normalised time derivative of the synthesis integrand.

    ``dX/dtau / X + beta * eta - j * w``; undefined (NaN) below the floor.
    """
    X = fields.X.data
    ok = defined_cells(X, floor)
    beta = bank.betas[:, None]
    omega = bank.omegas[:, None]
    z = _safe_ratio(fields.dX_dtau.data, X, ok) + beta * bank.prototype.eta - 1j * omega
    return z if cell is None else z[cell]


def z_mu(fields: DerivedFields, bank: FilterBank, cell=None, floor: float = MAG_FLOOR):
    """Normalised frequency derivative of the integrand, per unit ``mu``."""
    X = fields.X.data
    ok = defined_cells(X, floor)
    beta = bank.betas[:, None]
    dbeta = bank.dbetas[:, None]
    g = bank.group_delays[:, None]
    dw = bank.domega_dmus[:, None]
    eta = bank.prototype.eta
    ratio = _safe_ratio(fields.dX_domega.data, X, ok)
    z = (ratio + dbeta * (1.0 / beta + eta * g) - 1j * g) * dw
    return z if cell is None else z[cell]


def projection(phi: np.ndarray, a: np.ndarray) -> np.ndarray:
    """``|phi^T W a| / ||a||`` over the leading axis of length 2.

    NaN where ``||a|| = 0``.
    """
    phi = np.asarray(phi, dtype=float)
    a = np.asarray(a, dtype=float)
    Wa = np.tensordot(W, a, axes=(1, 0))
    num = np.abs(np.sum(phi * Wa, axis=0))
    na = np.sqrt(np.sum(a * a, axis=0))
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(na > 0, num / np.where(na > 0, na, 1.0), np.nan)
    return p


@dataclass
class GradientField:
    """Per-cell phase-rate vector ``phi``, amplitude-rate vector ``a`` and
    projection ``p``; arrays have shape (2, K, N) and (K, N)."""

    phi: np.ndarray
    amp: np.ndarray
    p: np.ndarray
    defined: np.ndarray

    @property
    def shape(self):
        return self.p.shape

    def phi_norm(self, ord: int = 2) -> np.ndarray:
        if ord == 1:
            return np.abs(self.phi).sum(axis=0)
        return np.hypot(self.phi[0], self.phi[1])

    @property
    def amp_norm(self) -> np.ndarray:
        return np.hypot(self.amp[0], self.amp[1])

    @property
    def dominance_ratio(self) -> np.ndarray:
        """``p / ||a||``; NaN where undefined."""
        na = self.amp_norm
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(na > 0, self.p / np.where(na > 0, na, 1.0), np.nan)


def gradient_fields(fields: DerivedFields, bank: FilterBank, floor: float = MAG_FLOOR) -> GradientField:
    zt = z_tau(fields, bank, floor=floor)
    zm = z_mu(fields, bank, floor=floor)
    defined = np.isfinite(zt) & np.isfinite(zm)
    phi = np.stack([zt.imag, zm.imag])
    amp = np.stack([zt.real, zm.real])
    return GradientField(phi, amp, projection(phi, amp), defined)
