"""Elementary test signals and closed-form stationary-point oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from scipy import integrate, optimize

from .filterbank import FilterBank, PrototypeFilter
from .tfanalysis import projection

IMPULSE = "impulse"
PHASOR = "phasor"
CHIRP = "chirp"
DECAY = "decay"
TWO_TONE = "twotone"
TWO_CHIRP = "twochirp"
KINDS = (IMPULSE, PHASOR, CHIRP, DECAY, TWO_TONE, TWO_CHIRP)

#: chirp locus is trusted where |gamma| < CHIRP_VALIDITY * beta^2
CHIRP_VALIDITY = 0.25


@dataclass(frozen=True)
class ElementarySignal:
    """Parameters of one elementary waveform.

    Frequencies are in Hz, chirp rates ``gamma`` in rad/s^2 and the decay
    ``Re(lambda)`` in 1/s. ``freq2_hz``, ``gamma2`` and ``amp2`` describe
    the second component of the two-tone and two-chirp signals. A
    non-analytic signal is the real part of the analytic one.
    """

    kind: str
    duration: float = 0.1
    sample_rate: float = 20000.0
    onset: float = 0.01
    amplitude: float = 1.0
    freq_hz: float = 1000.0
    gamma: float = 0.0
    decay: float = 0.0
    freq2_hz: float = 0.0
    gamma2: float = 0.0
    amp2: float = 0.0
    analytic: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown signal kind {self.kind!r}; expected one of {KINDS}")
        if self.sample_rate <= 0 or self.duration <= 0:
            raise ValueError("sample_rate and duration must be positive")
        if not 0 <= self.onset < self.duration:
            raise ValueError("onset must lie inside the signal")
        if self.kind == DECAY and not self.decay < 0:
            raise ValueError("a decaying phasor needs Re(lambda) < 0")
        nyq = self.sample_rate / 2
        if self.peak_freq_hz() >= nyq:
            raise ValueError(f"peak frequency {self.peak_freq_hz():.1f} Hz violates Nyquist ({nyq:g} Hz)")

    # constructors ---------------------------------------------------------

    @classmethod
    def impulse(cls, **kw):
        return cls(IMPULSE, **kw)

    @classmethod
    def phasor(cls, freq_hz: float, **kw):
        return cls(PHASOR, freq_hz=freq_hz, **kw)

    @classmethod
    def chirp(cls, start_hz: float, gamma: float, **kw):
        return cls(CHIRP, freq_hz=start_hz, gamma=gamma, **kw)

    @classmethod
    def decaying_phasor(cls, freq_hz: float, decay: float, **kw):
        return cls(DECAY, freq_hz=freq_hz, decay=decay, **kw)

    @classmethod
    def two_tone(cls, freq_hz: float, masker_hz: float, A1: float, **kw):
        return cls(TWO_TONE, freq_hz=freq_hz, freq2_hz=masker_hz, amp2=A1, **kw)

    @classmethod
    def two_chirp(cls, start_hz: float, gamma: float, start2_hz: float, gamma2: float,
                  amp2: float, **kw):
        return cls(TWO_CHIRP, freq_hz=start_hz, gamma=gamma, freq2_hz=start2_hz,
                   gamma2=gamma2, amp2=amp2, **kw)

    # ----------------------------------------------------------------------

    @property
    def num_samples(self) -> int:
        return int(round(self.duration * self.sample_rate))

    @property
    def onset_index(self) -> int:
        return int(round(self.onset * self.sample_rate))

    def _chirp_freqs(self, f0, gamma):
        span = self.duration - self.onset
        return abs(f0), abs(f0 + gamma * span / (2 * math.pi))

    def peak_freq_hz(self) -> float:
        if self.kind == IMPULSE:
            return 0.0
        fs = [abs(self.freq_hz)]
        if self.kind in (CHIRP, TWO_CHIRP):
            fs += self._chirp_freqs(self.freq_hz, self.gamma)
        if self.kind == TWO_TONE:
            fs.append(abs(self.freq2_hz))
        if self.kind == TWO_CHIRP:
            fs += self._chirp_freqs(self.freq2_hz, self.gamma2)
        return max(fs)

    def with_(self, **kw) -> "ElementarySignal":
        return replace(self, **kw)


def _phasor(t, f_hz, gamma=0.0, decay=0.0):
    w = 2 * math.pi * f_hz
    return np.exp(decay * t + 1j * (w * t + 0.5 * gamma * t * t))


def generate(sig: ElementarySignal) -> np.ndarray:
    """Sample ``sig``; components start with a unit step at the onset.

    Returns a complex array for analytic signals, otherwise a real one.
    The impulse is always real.
    """
    N, n0 = sig.num_samples, sig.onset_index
    if sig.kind == IMPULSE:
        x = np.zeros(N)
        x[n0] = sig.amplitude
        return x
    t = (np.arange(N) - n0) / sig.sample_rate
    on = t >= 0
    x = np.zeros(N, dtype=complex)
    tt = t[on]
    if sig.kind == PHASOR:
        x[on] = _phasor(tt, sig.freq_hz)
    elif sig.kind == CHIRP:
        x[on] = _phasor(tt, sig.freq_hz, sig.gamma)
    elif sig.kind == DECAY:
        x[on] = _phasor(tt, sig.freq_hz, decay=sig.decay)
    elif sig.kind == TWO_TONE:
        x[on] = _phasor(tt, sig.freq_hz) + sig.amp2 * _phasor(tt, sig.freq2_hz)
    else:
        x[on] = _phasor(tt, sig.freq_hz, sig.gamma) + sig.amp2 * _phasor(tt, sig.freq2_hz, sig.gamma2)
    x *= sig.amplitude
    return x if sig.analytic else x.real.copy()


# ---------------------------------------------------------------------------
# oracles


def oracle_impulse_locus(bank: FilterBank, onset: float = 0.0) -> np.ndarray:
    """Stationary points of the impulse response: ``tau_k = onset + g(w_k)``."""
    return onset + bank.group_delays


def oracle_phasor_locus(bank: FilterBank, lam: float) -> np.ndarray:
    """Indices of the channel(s) whose centre is nearest the phasor frequency ``lam`` (rad/s)."""
    w = bank.omegas
    if not (w[0] <= lam <= w[-1]):
        raise ValueError(f"phasor frequency {lam:g} rad/s lies outside the bank")
    d = np.abs(w - lam)
    return np.flatnonzero(np.isclose(d, d.min(), rtol=0, atol=1e-9 * max(1.0, lam)))


class ChirpLocus(NamedTuple):
    tau: np.ndarray
    tau_peak: np.ndarray
    valid: np.ndarray


def group_delay_slope(bank: FilterBank) -> np.ndarray:
    """``dg/dw = -(n / beta^2) dbeta/dw`` per channel (zero for the Gaussian)."""
    n = bank.prototype.group_delay
    return -n / bank.betas ** 2 * bank.dbetas


def oracle_chirp_locus(bank: FilterBank, gamma: float, t_zero: float = 0.0,
                       validity: float = CHIRP_VALIDITY) -> ChirpLocus:
    """Stationary-point times of a linear chirp, per channel.

    The chirp's instantaneous frequency is ``gamma (t - t_zero)``.
    ``tau = t_zero + w/gamma + g/(1 + gamma g')`` and the envelope peak is
    at ``t_zero + w/gamma + g``. Channels with
    ``|gamma| >= validity * beta^2`` are flagged invalid.
    """
    if gamma == 0:
        raise ValueError("chirp rate must be non-zero")
    w = bank.omegas
    g = bank.group_delays
    gd = group_delay_slope(bank)
    den = 1.0 + gamma * gd
    with np.errstate(divide="ignore", invalid="ignore"):
        tau = t_zero + w / gamma + g / den
    peak = t_zero + w / gamma + g
    valid = (np.abs(gamma) < validity * bank.betas ** 2) & (den > 0)
    return ChirpLocus(tau, peak, valid)


def chirp_t_zero(sig: ElementarySignal, which: int = 1) -> float:
    """Time at which a chirp component's instantaneous frequency would be zero."""
    f0, g = (sig.freq_hz, sig.gamma) if which == 1 else (sig.freq2_hz, sig.gamma2)
    if g == 0:
        raise ValueError("component is not a chirp")
    return sig.onset - 2 * math.pi * f0 / g


def _proto_beta(bank_or_proto, k, beta):
    if isinstance(bank_or_proto, FilterBank):
        return bank_or_proto.prototype, float(bank_or_proto.betas[k])
    if beta is None:
        raise ValueError("beta is required when a prototype is given")
    return bank_or_proto, float(beta)


def decay_objective(proto: PrototypeFilter, beta: float, decay: float, tau):
    """``F(tau) = int_{-inf}^{tau} h(beta t) e^{-decay t} (t - g) dt``.

    ``decay`` is ``Re(lambda)`` (negative for a decaying phasor).
    """
    if not proto.is_real:
        raise ValueError("the decaying-phasor analysis needs a real prototype")
    # integrate in prototype time s = beta * t so the integrand is O(1)
    n = proto.group_delay
    lo = -proto.support()[1] if proto.is_gaussian else 0.0
    rate = decay / beta

    def f(s):
        return float(np.real(proto.h(s))) * math.exp(-rate * s) * (s - n)

    def part(a, b):
        # single-signed on each side of s = n
        return integrate.quad(f, a, b, limit=200, epsabs=0, epsrel=1e-12)[0]

    head = part(lo, n) if n > lo else 0.0
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    out = np.empty(taus.shape)
    for i, tv in enumerate(taus):
        sv = beta * tv
        if sv <= lo:
            out[i] = 0.0
            continue
        val = part(lo, sv) if sv <= n else head + part(n, sv)
        out[i] = val / beta ** 2
    return out[0] if np.ndim(tau) == 0 else out


def oracle_decaying_phasor_tau(bank_or_proto, k: int | None = None, decay: float = -200.0,
                               beta: float | None = None, t_max: float | None = None):
    """Stationary time of ``u(t) e^{lambda t}`` at the channel with ``w = Im(lambda)``.

    Solves ``F(tau) = 0`` on ``tau >= g``. Returns None when ``F`` does not
    change sign before ``t_max`` (default: end of the FIR support).

    Parameters
    ----------
    bank_or_proto : FilterBank or PrototypeFilter
        Either a bank with channel index ``k`` or a prototype with ``beta``.
    decay : float
        ``Re(lambda)`` in 1/s; zero gives the pure tone limit.
    """
    proto, b = _proto_beta(bank_or_proto, k, beta)
    if not proto.is_real:
        raise ValueError("the decaying-phasor analysis needs a real prototype")
    if decay > 0:
        raise ValueError("Re(lambda) must not be positive")
    g = proto.group_delay / b
    if t_max is None:
        t_max = proto.support()[1] / b
    if t_max <= g:
        return None
    F = lambda tv: decay_objective(proto, b, decay, tv)  # noqa: E731
    f_hi = F(t_max)
    if not f_hi > 0:
        return None
    lo = g if g > 0 else 1e-12 / b
    if F(lo) >= 0:
        return lo
    return float(optimize.brentq(F, lo, t_max, xtol=1e-12, rtol=1e-12))


# ---------------------------------------------------------------------------
# closed-form rates for a single filter


@dataclass(frozen=True)
class FilterParams:
    """A single filter's local parameters: ``beta``, ``dbeta/dw``, ``dw/dmu``."""

    prototype: PrototypeFilter
    beta: float
    dbeta_domega: float
    domega_dmu: float

    @classmethod
    def from_bank(cls, bank: FilterBank, k: int) -> "FilterParams":
        ch = bank[k]
        return cls(bank.prototype, ch.beta, ch.dbeta_domega, ch.domega_dmu)

    @property
    def g(self) -> float:
        return self.prototype.group_delay / self.beta


def impulse_rates(p: FilterParams, tau):
    """``(Z_tau, Z_mu)`` for an impulse at ``t = 0`` as a function of ``tau``."""
    tau = np.asarray(tau, dtype=float)
    b, bd, eta = p.beta, p.dbeta_domega, p.prototype.eta
    r = p.prototype.hdot_over_h(b * tau)
    zt = b * (r + eta)
    zm = p.domega_dmu / b * (bd * (2 + b * tau * r + b * p.g * eta) + 1j * (b * tau - b * p.g))
    return zt, zm


def phasor_rates(p: FilterParams, Omega):
    """Steady-state ``(Z_tau, Z_mu)`` for a phasor at ``w + beta * Omega``."""
    W = np.asarray(Omega, dtype=float)
    b, bd, eta = p.beta, p.dbeta_domega, p.prototype.eta
    zt = b * (eta + 1j * W)
    r = p.prototype.Hdot_over_H(W)
    zm = p.domega_dmu / b * (bd * (1 + eta * b * p.g) - r * (1 + bd * W) - 1j * b * p.g)
    return zt, zm


def rates_to_p_a(zt, zm):
    """Projection ``p`` and amplitude-rate norm from ``(Z_tau, Z_mu)``."""
    phi = np.stack([np.imag(zt), np.imag(zm)])
    a = np.stack([np.real(zt), np.real(zm)])
    return projection(phi, a), np.hypot(a[0], a[1])
