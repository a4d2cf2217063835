"""Prototype filters and auditory-style analysis filter banks.

Each analysis filter is a time-scaled, modulated copy of a prototype,

    h_w(t) = beta * h(beta * t) * exp(j * w * t),

so that its frequency response is ``H((W - w) / beta)``. Centre
frequencies follow a filter bank coordinate ``mu`` in [0, 1] under a
uniform, logarithmic or cochlear map, and the nominal bandwidth ``beta``
is proportional to ``dw/dmu``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterator, NamedTuple, Sequence

import numpy as np
from scipy import integrate, special

from .gamma import cgamma

GAUSSIAN = "gaussian"
GAMMACHIRP = "gammachirp"

UNIFORM = "uniform"
LOG = "log"
COCHLEAR = "cochlear"
SPACINGS = (UNIFORM, LOG, COCHLEAR)

#: offset of the cochlear frequency-to-place map, rad/s
A_COCHLEAR = 2.0 * math.pi * 1e3 / 4.37

#: default ``(dw/dmu) / beta`` per prototype name
DEFAULT_BANDWIDTH_SCALE = {"gaussian": 25.0, "gammatone": 25.0, "gammachirp": 36.0}


def _check_finite(x, name):
    arr = np.asarray(x)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


@dataclass(frozen=True)
class PrototypeFilter:
    """Unit-gain prototype: Gaussian pulse or order-``n`` gammachirp.

    A gammachirp with ``c == 0`` is the gammatone. The gammachirp is
    normalised with the complex gamma function so that ``H(0) = 1``.
    """

    kind: str = GAMMACHIRP
    n: int = 4
    c: float = 0.0

    def __post_init__(self):
        if self.kind not in (GAUSSIAN, GAMMACHIRP):
            raise ValueError(f"unknown prototype kind {self.kind!r}")
        if self.kind == GAMMACHIRP:
            if int(self.n) != self.n or self.n < 2:
                raise ValueError("gammachirp order n must be an integer >= 2")
            if not math.isfinite(self.c):
                raise ValueError("chirp parameter c must be finite")

    @classmethod
    def gaussian(cls) -> "PrototypeFilter":
        return cls(GAUSSIAN, 0, 0.0)

    @classmethod
    def gammatone(cls, n: int = 4) -> "PrototypeFilter":
        return cls(GAMMACHIRP, n, 0.0)

    @classmethod
    def gammachirp(cls, n: int = 4, c: float = 4.0) -> "PrototypeFilter":
        return cls(GAMMACHIRP, n, float(c))

    @classmethod
    def from_name(cls, name: str, n: int = 4, c: float = 0.0) -> "PrototypeFilter":
        name = name.lower()
        if name == "gaussian":
            return cls.gaussian()
        if name == "gammatone":
            return cls.gammatone(n)
        if name == "gammachirp":
            return cls.gammachirp(n, c)
        raise ValueError(f"unknown prototype {name!r}")

    @property
    def is_gaussian(self) -> bool:
        return self.kind == GAUSSIAN

    @property
    def name(self) -> str:
        if self.is_gaussian:
            return "gaussian"
        return "gammatone" if self.c == 0 else "gammachirp"

    @property
    def is_real(self) -> bool:
        return self.is_gaussian or self.c == 0

    @cached_property
    def _alpha(self) -> complex:
        return 1.0 + 1j * self.c / self.n

    @cached_property
    def norm(self) -> complex:
        """Leading constant ``(1 + jc/n)^(n+jc) / Gamma(n + jc)``."""
        if self.is_gaussian:
            return 1.0 / math.sqrt(2.0 * math.pi)
        w = self.n + 1j * self.c
        return complex(np.exp(w * np.log(self._alpha)) / cgamma(w))

    def h(self, t):
        """Impulse response ``h(t)`` (causal for the gammachirp)."""
        t = _check_finite(t, "t").astype(float)
        if self.is_gaussian:
            out = self.norm * np.exp(-0.5 * t ** 2) + 0j
        else:
            out = np.zeros(t.shape, dtype=complex)
            pos = t > 0
            tp = t[pos]
            lt = np.log(tp)
            out[pos] = self.norm * np.exp(
                (self.n - 1) * lt - self._alpha * tp + 1j * self.c * lt)
        return out[()] if out.ndim == 0 else out

    def hdot_over_h(self, t):
        """Closed-form logarithmic derivative ``h'(t) / h(t)``."""
        t = _check_finite(t, "t").astype(float)
        if self.is_gaussian:
            return -t + 0j
        if np.any(t <= 0):
            raise ValueError("gammachirp derivative is only defined for t > 0")
        return -1.0 + (self.n - 1) / t + 1j * self.c * (1.0 / t - 1.0 / self.n)

    def h_dot(self, t):
        """Time derivative ``h'(t)``; the gammachirp requires ``t > 0``."""
        return self.hdot_over_h(t) * self.h(t)

    def _h_dot_sampled(self, t):
        # tap sampling: value at t <= 0 is the right limit (zero for n >= 3)
        t = np.asarray(t, dtype=float)
        if self.is_gaussian:
            return self.h_dot(t)
        out = np.zeros(t.shape, dtype=complex)
        pos = t > 0
        out[pos] = self.h_dot(t[pos])
        return out

    def H(self, W):
        """Frequency response ``H(W)`` of the prototype."""
        W = _check_finite(W, "Omega").astype(float)
        if self.is_gaussian:
            out = np.exp(-0.5 * W ** 2) + 0j
        else:
            w = self.n + 1j * self.c
            den = 1.0 + 1j * (W + self.c / self.n)
            out = np.exp(w * (np.log(self._alpha) - np.log(den)))
        return out[()] if np.ndim(out) == 0 else out

    def Hdot_over_H(self, W):
        W = _check_finite(W, "Omega").astype(float)
        if self.is_gaussian:
            return -W + 0j
        return (self.c - 1j * self.n) / (1j * (W + self.c / self.n) + 1.0)

    def H_dot(self, W):
        """Derivative ``dH/dW``."""
        return self.Hdot_over_H(W) * self.H(W)

    @property
    def group_delay(self) -> float:
        """Group delay of the prototype at zero frequency (dimensionless)."""
        return 0.0 if self.is_gaussian else float(self.n)

    @cached_property
    def eta(self) -> float:
        """``conj(h'(g) / h(g))`` at the group delay; real for all prototypes."""
        val = np.conj(self.hdot_over_h(self.group_delay))
        return float(np.real(val))

    @cached_property
    def erb_factor(self) -> float:
        """Equivalent rectangular bandwidth in units of ``beta``."""
        if self.is_gaussian:
            return math.sqrt(math.pi)
        val, _ = integrate.quad(lambda W: abs(self.H(W)) ** 2, -np.inf, np.inf,
                                limit=400, epsabs=1e-12, epsrel=1e-10)
        return val

    def support(self, energy: float = 1 - 1e-6, gaussian_halfwidth: float = 8.0):
        """Truncation interval ``(t_lo, t_hi)`` in prototype time units."""
        if self.is_gaussian:
            return -gaussian_halfwidth, gaussian_halfwidth
        # |h|^2 ~ t^(2n-2) exp(-2t): cumulative energy is a regularised gamma
        return 0.0, float(special.gammaincinv(2 * self.n - 1, energy) / 2.0)


def prototype_h(p: PrototypeFilter, t):
    return p.h(t)


def prototype_h_dot(p: PrototypeFilter, t):
    return p.h_dot(t)


def prototype_H(p: PrototypeFilter, W):
    return p.H(W)


def prototype_H_dot(p: PrototypeFilter, W):
    return p.H_dot(W)


class MuOmega(NamedTuple):
    omega: np.ndarray
    domega_dmu: np.ndarray
    beta: np.ndarray
    dbeta_domega: np.ndarray


@dataclass(frozen=True)
class FilterBankSpec:
    """Configuration of a filter bank.

    ``bandwidth_scale`` is the constant ``(dw/dmu) / beta``; when omitted
    it defaults per prototype (25 for Gaussian and gammatone, 36 for the
    gammachirp). ``density`` is the number of filters per ERB.
    """

    spacing: str = COCHLEAR
    f_min_hz: float = 100.0
    f_max_hz: float = 5000.0
    prototype: PrototypeFilter = field(default_factory=lambda: PrototypeFilter.gammachirp(4, 4.0))
    sample_rate_hz: float = 20000.0
    density: float = 4.0
    bandwidth_scale: float | None = None
    energy_fraction: float = 1 - 1e-6
    gaussian_halfwidth: float = 8.0

    def __post_init__(self):
        if self.spacing not in SPACINGS:
            raise ValueError(f"spacing must be one of {SPACINGS}")
        if not (0 < self.f_min_hz < self.f_max_hz):
            raise ValueError("need 0 < f_min_hz < f_max_hz")
        if self.f_max_hz >= self.sample_rate_hz / 2:
            raise ValueError("f_max_hz must lie below the Nyquist frequency")
        if self.density <= 0:
            raise ValueError("density must be positive")
        if self.bandwidth_scale is not None and self.bandwidth_scale <= 0:
            raise ValueError("bandwidth_scale must be positive")

    @property
    def omega_min(self) -> float:
        return 2 * math.pi * self.f_min_hz

    @property
    def omega_max(self) -> float:
        return 2 * math.pi * self.f_max_hz

    @property
    def scale(self) -> float:
        if self.bandwidth_scale is not None:
            return float(self.bandwidth_scale)
        return DEFAULT_BANDWIDTH_SCALE[self.prototype.name]

    @property
    def b(self) -> float:
        if self.spacing == LOG:
            return math.log(self.omega_max / self.omega_min)
        if self.spacing == COCHLEAR:
            return math.log((self.omega_max + A_COCHLEAR) / (self.omega_min + A_COCHLEAR))
        return 0.0

    @property
    def num_channels(self) -> int:
        # adjacent spacing dw = ERB / density with ERB = erb_factor * beta
        return 1 + int(round(self.density * self.scale / self.prototype.erb_factor))

    def to_dict(self) -> dict:
        p = self.prototype
        return {
            "spacing": self.spacing,
            "prototype": p.name,
            "n": int(p.n),
            "c": float(p.c),
            "f_min_hz": float(self.f_min_hz),
            "f_max_hz": float(self.f_max_hz),
            "sample_rate_hz": float(self.sample_rate_hz),
            "density": float(self.density),
            "bandwidth_scale": float(self.scale),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FilterBankSpec":
        known = {"spacing", "prototype", "n", "c", "f_min_hz", "f_max_hz",
                 "sample_rate_hz", "density", "bandwidth_scale", "C"}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown filter bank keys: {sorted(extra)}")
        name = d.get("prototype", "gammachirp")
        proto = PrototypeFilter.from_name(name, int(d.get("n", 4)),
                                          float(d.get("c", 4.0 if name == "gammachirp" else 0.0)))
        kw = {k: d[k] for k in ("spacing", "f_min_hz", "f_max_hz", "sample_rate_hz",
                                "density", "bandwidth_scale") if k in d and d[k] is not None}
        return cls(prototype=proto, **kw)

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def map_mu_omega(spec: FilterBankSpec, mu) -> MuOmega:
    """Centre frequency, its slope, bandwidth and bandwidth slope at ``mu``."""
    mu = _check_finite(mu, "mu").astype(float)
    if np.any((mu < 0) | (mu > 1)):
        raise ValueError("mu must lie in [0, 1]")
    wmin, wmax = spec.omega_min, spec.omega_max
    if spec.spacing == UNIFORM:
        omega = (wmax - wmin) * mu + wmin
        dw = np.full_like(mu, wmax - wmin)
        dbeta = np.zeros_like(mu)
    elif spec.spacing == LOG:
        b = spec.b
        omega = wmin * np.exp(b * mu)
        dw = b * omega
        dbeta = np.full_like(mu, b / spec.scale)
    else:
        b = spec.b
        omega = (wmin + A_COCHLEAR) * np.exp(b * mu) - A_COCHLEAR
        dw = b * (omega + A_COCHLEAR)
        dbeta = np.full_like(mu, b / spec.scale)
    return MuOmega(omega, dw, dw / spec.scale, dbeta)


def mu_of_omega(spec: FilterBankSpec, omega):
    omega = np.asarray(omega, dtype=float)
    wmin, wmax = spec.omega_min, spec.omega_max
    if spec.spacing == UNIFORM:
        return (omega - wmin) / (wmax - wmin)
    if spec.spacing == LOG:
        return np.log(omega / wmin) / spec.b
    return np.log((omega + A_COCHLEAR) / (wmin + A_COCHLEAR)) / spec.b


@dataclass(frozen=True, eq=False)
class Channel:
    """One analysis filter with its sampled FIR realisations.

    Taps include the sample interval so that a discrete convolution
    approximates the continuous one. ``fir_offset`` is the number of taps
    preceding ``t = 0``.
    """

    index: int
    mu: float
    omega: float
    beta: float
    dbeta_domega: float
    domega_dmu: float
    group_delay: float
    fir_offset: int
    sample_rate: float
    fir_taps: np.ndarray = field(repr=False)
    taps_dtau: np.ndarray = field(repr=False)
    taps_domega: np.ndarray = field(repr=False)

    @property
    def freq_hz(self) -> float:
        return self.omega / (2 * math.pi)

    @property
    def num_taps(self) -> int:
        return len(self.fir_taps)

    @property
    def tap_times(self) -> np.ndarray:
        return (np.arange(self.num_taps) - self.fir_offset) / self.sample_rate


def _make_channel(spec: FilterBankSpec, k: int, mu: float) -> Channel:
    proto = spec.prototype
    fs = spec.sample_rate_hz
    dt = 1.0 / fs
    m = map_mu_omega(spec, mu)
    omega, dw, beta, dbeta = (float(m.omega), float(m.domega_dmu),
                              float(m.beta), float(m.dbeta_domega))
    t_lo, t_hi = proto.support(spec.energy_fraction, spec.gaussian_halfwidth)
    m_lo = int(math.floor(t_lo / beta * fs))
    m_hi = int(math.ceil(t_hi / beta * fs))
    t = np.arange(m_lo, m_hi + 1) * dt
    hb = np.asarray(proto.h(beta * t))
    hdb = np.asarray(proto._h_dot_sampled(beta * t))
    carrier = np.exp(1j * omega * t)
    taps = dt * beta * hb * carrier
    taps_dtau = dt * (beta ** 2 * hdb + 1j * omega * beta * hb) * carrier
    # the window's edges belong to the derivative of the truncated filter;
    # without them d/dtau disagrees with X by the tail value on steady tones
    taps_dtau[0] += taps[0] / dt
    taps_dtau[-1] -= taps[-1] / dt
    taps_domega = dt * (dbeta * hb + beta * dbeta * t * hdb + 1j * t * beta * hb) * carrier
    for arr in (taps, taps_dtau, taps_domega):
        arr.setflags(write=False)
    return Channel(k, float(mu), omega, beta, dbeta, dw, proto.group_delay / beta,
                   -m_lo, fs, taps, taps_dtau, taps_domega)


class FilterBank(Sequence):
    """A built filter bank: an immutable sequence of :class:`Channel`.

    The synthesis constant ``C`` is computed on first access and cached;
    it is also written to the bank file by :meth:`save`.
    """

    def __init__(self, spec: FilterBankSpec, C: float | None = None):
        self.spec = spec
        K = spec.num_channels
        if K < 2:
            raise ValueError("a filter bank needs at least two channels")
        mus = np.linspace(0.0, 1.0, K)
        self.channels = tuple(_make_channel(spec, k, mu) for k, mu in enumerate(mus))
        self._C = C

    def __len__(self):
        return len(self.channels)

    def __getitem__(self, k):
        return self.channels[k]

    def __iter__(self) -> Iterator[Channel]:
        return iter(self.channels)

    def __repr__(self):
        s = self.spec
        return (f"FilterBank({s.spacing}, {s.prototype.name}, K={len(self)}, "
                f"{s.f_min_hz:g}-{s.f_max_hz:g} Hz)")

    @property
    def prototype(self) -> PrototypeFilter:
        return self.spec.prototype

    @property
    def sample_rate(self) -> float:
        return self.spec.sample_rate_hz

    @property
    def delta_mu(self) -> float:
        return 1.0 / (len(self) - 1)

    @cached_property
    def mus(self) -> np.ndarray:
        return np.array([ch.mu for ch in self])

    @cached_property
    def omegas(self) -> np.ndarray:
        return np.array([ch.omega for ch in self])

    @property
    def freqs_hz(self) -> np.ndarray:
        return self.omegas / (2 * math.pi)

    @cached_property
    def betas(self) -> np.ndarray:
        return np.array([ch.beta for ch in self])

    @cached_property
    def dbetas(self) -> np.ndarray:
        return np.array([ch.dbeta_domega for ch in self])

    @cached_property
    def domega_dmus(self) -> np.ndarray:
        return np.array([ch.domega_dmu for ch in self])

    @cached_property
    def group_delays(self) -> np.ndarray:
        return np.array([ch.group_delay for ch in self])

    @property
    def max_taps(self) -> int:
        return max(ch.num_taps for ch in self)

    @property
    def hash(self) -> str:
        return self.spec.hash()

    def interior_band(self, erb_margin: float = 2.0):
        """``(w_lo, w_hi)`` in rad/s, ``erb_margin`` ERBs inside the edges."""
        dmu = erb_margin * self.prototype.erb_factor / self.spec.scale
        if 2 * dmu >= 1:
            raise ValueError("filter bank too narrow for the requested margin")
        m = map_mu_omega(self.spec, np.array([dmu, 1 - dmu]))
        return float(m.omega[0]), float(m.omega[1])

    @property
    def C(self) -> float:
        if self._C is None:
            from .synthesis import calibrate_C
            self._C = calibrate_C(self)
        return self._C

    def to_dict(self, include_C: bool = True) -> dict:
        d = self.spec.to_dict()
        if include_C:
            d["C"] = float(self.C)
        return d

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path, **overrides) -> "FilterBank":
        d = json.loads(Path(path).read_text())
        d.update({k: v for k, v in overrides.items() if v is not None})
        C = d.pop("C", None)
        spec = FilterBankSpec.from_dict(d)
        bank = cls(spec)
        # a cached C is only trusted when no parameter was overridden
        if C is not None and not any(v is not None for v in overrides.values()):
            bank._C = float(C)
        return bank


def build_filterbank(spec: FilterBankSpec) -> FilterBank:
    return FilterBank(spec)


def group_delay(ch: Channel) -> float:
    return ch.group_delay
