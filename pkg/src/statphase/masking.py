"""Two-tone phase-rate norm, its minimum over the beat cycle and masking thresholds.

A probe ``e^{jwt}`` and a masker ``A1 e^{jw1 t}`` are analysed by the
gammatone channel at ``w``. The squared phase-rate norm over one beat
period is

    ||phi||^2 = O1^2 v^2 [b^2 (v + cos t)^2
                + (D n / b)^2 (1 + b'^2) / (1 + O1^2) (sin p (v + cos t) + cos p sin t)^2]
                / (1 + v^2 + 2 v cos t)^2

with ``v = |A1 H(O1)|``, ``O1 = (w1 - w) / b``, ``D = dw/dmu`` and
``b' = db/dw``. The beat phase ``t`` is the phase of the probe's
response relative to the masker's, ``t = (w - w1) tau - arg(A1 H1)``;
with the opposite sign the ``sin t`` terms flip.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from scipy import optimize

from .filterbank import FilterBank, FilterBankSpec, PrototypeFilter, map_mu_omega, mu_of_omega

#: bridge between the two approximations around |A1 H1| = 1
BRIDGE = (0.9, 1.1)
#: search range for |A1 H1| when inverting the minimum norm
V_RANGE = (1e-9, 1e9)


@dataclass(frozen=True)
class TwoToneConfig:
    """Probe at ``omega`` (unit amplitude), masker at ``omega1`` with amplitude ``A1``.

    ``beta``, ``n``, ``dbeta_domega`` and ``domega_dmu`` describe the
    gammatone channel centred on the probe.
    """

    omega: float
    omega1: float
    A1: float
    beta: float
    n: int = 4
    dbeta_domega: float = 0.0
    domega_dmu: float = 0.0

    def __post_init__(self):
        if not self.A1 >= 0:
            raise ValueError("A1 must be non-negative")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not math.isfinite(self.Omega1):
            raise ValueError("normalised separation must be finite")

    @classmethod
    def from_bank(cls, bank: FilterBank, k: int, omega1: float, A1: float) -> "TwoToneConfig":
        _require_gammatone(bank.prototype)
        ch = bank[k]
        return cls(ch.omega, omega1, A1, ch.beta, int(bank.prototype.n),
                   ch.dbeta_domega, ch.domega_dmu)

    @classmethod
    def from_spec(cls, spec: FilterBankSpec, freq_hz: float, omega1: float, A1: float) -> "TwoToneConfig":
        """Channel of ``spec``'s map centred exactly at ``freq_hz``."""
        _require_gammatone(spec.prototype)
        mu = float(mu_of_omega(spec, 2 * math.pi * freq_hz))
        m = map_mu_omega(spec, mu)
        return cls(float(m.omega), omega1, A1, float(m.beta), int(spec.prototype.n),
                   float(m.dbeta_domega), float(m.domega_dmu))

    @property
    def Omega1(self) -> float:
        return (self.omega1 - self.omega) / self.beta

    @property
    def H1(self) -> complex:
        return complex(PrototypeFilter.gammatone(self.n).H(self.Omega1))

    @property
    def v(self) -> float:
        """``|A1 H1|``, the masker amplitude seen at the probe channel."""
        return self.A1 * abs(self.H1)

    def with_v(self, v: float) -> "TwoToneConfig":
        return replace(self, A1=v / abs(self.H1))


def _require_gammatone(p: PrototypeFilter):
    if p.is_gaussian or p.c != 0:
        raise ValueError("the two-tone model is derived for gammatone prototypes only")


def sin_cos_psi(Omega1: float, dbeta: float):
    """``(sin psi, cos psi)`` for separation ``Omega1`` and ``dbeta/dw``."""
    s = math.sqrt(1 + dbeta ** 2) * math.sqrt(1 + Omega1 ** 2)
    return (Omega1 - dbeta) / s, (Omega1 * dbeta + 1) / s


def _norm_sq(v, O1, beta, n, bd, D, theta):
    sp, cp = sin_cos_psi(O1, bd)
    c, s = np.cos(theta), np.sin(theta)
    den = 1 + v * v + 2 * v * c
    k = (D * n / beta) ** 2 * (1 + bd * bd) / (1 + O1 * O1)
    num = beta ** 2 * (v + c) ** 2 + k * (sp * (v + c) + cp * s) ** 2
    return O1 * O1 * v * v * num, den * den


def norm_sq_exact(cfg: TwoToneConfig, theta):
    """Squared phase-rate norm at beat phase ``theta``.

    Raises
    ------
    ZeroDivisionError
        Where ``|X| = 0`` (``|A1 H1| = 1`` and ``cos theta = -1``).
    """
    num, den = _norm_sq(cfg.v, cfg.Omega1, cfg.beta, cfg.n, cfg.dbeta_domega,
                        cfg.domega_dmu, np.asarray(theta, dtype=float))
    if np.any(den <= 1e-300):
        raise ZeroDivisionError("two-tone response vanishes at this beat phase")
    out = num / den
    return float(out) if np.ndim(out) == 0 else out


def phase_rates(cfg: TwoToneConfig, theta):
    """``(Im Z_tau, Im Z_mu)`` at beat phase ``theta``.

    ``theta = (w - w1) tau - arg(A1 H1)`` (probe relative to masker).
    """
    theta = np.asarray(theta, dtype=float)
    v, O1, b, bd = cfg.v, cfg.Omega1, cfg.beta, cfg.dbeta_domega
    c, s = np.cos(theta), np.sin(theta)
    den = 1 + v * v + 2 * v * c
    pt = v * b * O1 * (v + c) / den
    pm = -(cfg.n / b) * O1 / (1 + O1 ** 2) * v * ((O1 - bd) * (v + c) + (O1 * bd + 1) * s)
    return pt, cfg.domega_dmu * pm / den


class MinNorm(NamedTuple):
    theta: float
    value: float


def min_norm_numeric(cfg: TwoToneConfig, grid: int = 4096) -> MinNorm:
    """Global minimum of ``||phi||`` over one beat period.

    A dense grid (offset by half a step so it avoids ``theta = pi``) is
    refined with a bounded scalar minimisation around the best node.
    """
    step = 2 * math.pi / grid
    th = (np.arange(grid) + 0.5) * step
    num, den = _norm_sq(cfg.v, cfg.Omega1, cfg.beta, cfg.n, cfg.dbeta_domega,
                        cfg.domega_dmu, th)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.where(den > 0, num / np.where(den > 0, den, 1), np.inf)
    i = int(np.argmin(vals))
    best_t, best = float(th[i]), float(vals[i])

    def f(t):
        n_, d_ = _norm_sq(cfg.v, cfg.Omega1, cfg.beta, cfg.n, cfg.dbeta_domega,
                          cfg.domega_dmu, t)
        return n_ / d_ if d_ > 0 else np.inf

    res = optimize.minimize_scalar(f, bounds=(best_t - step, best_t + step), method="bounded",
                                   options={"xatol": 1e-12})
    if res.success and res.fun < best:
        best_t, best = float(res.x), float(res.fun)
    return MinNorm(best_t % (2 * math.pi), math.sqrt(max(best, 0.0)))


def _branch_small(v, cfg):
    O1 = abs(cfg.Omega1)
    return cfg.domega_dmu * cfg.n / cfg.beta * O1 / (1 + O1 ** 2) * v / math.sqrt(1 - v * v)


def _branch_large(v, cfg):
    return cfg.beta * abs(cfg.Omega1) * v / (v + 1)


def min_norm_branches(cfg: TwoToneConfig, v: float | None = None):
    """Raw ``(small, large)`` approximations; ``small`` is NaN for ``v >= 1``."""
    v = cfg.v if v is None else v
    small = _branch_small(v, cfg) if v < 1 else math.nan
    return small, _branch_large(v, cfg)


def min_norm_approx(cfg: TwoToneConfig, v: float | None = None, bridge: bool = True) -> float:
    """Closed-form approximation of the minimum norm.

    Uses the small-amplitude branch below ``|A1 H1| = 1`` and the
    large-amplitude branch above. With ``bridge`` the two are joined by
    linear interpolation over ``BRIDGE`` and made non-decreasing.
    """
    v = cfg.v if v is None else float(v)
    if v < 0:
        raise ValueError("|A1 H1| must be non-negative")
    lo, hi = BRIDGE
    if not bridge:
        if v == 1:
            raise ValueError("the raw approximation is discontinuous at |A1 H1| = 1")
        return _branch_small(v, cfg) if v < 1 else _branch_large(v, cfg)
    if v <= lo:
        return _branch_small(v, cfg)
    f_lo = _branch_small(lo, cfg)
    if v < hi:
        f_hi = _branch_large(hi, cfg)
        val = f_lo + (f_hi - f_lo) * (v - lo) / (hi - lo)
    else:
        val = _branch_large(v, cfg)
    # isotonic correction: every branch piece is increasing, so the
    # running maximum only needs the value at the bridge start
    return max(val, f_lo)


class Inversion(NamedTuple):
    v: float
    saturated: bool


def invert_min_norm(cfg: TwoToneConfig, target: float, method: str = "approx",
                    rtol: float = 1e-12) -> Inversion:
    """Solve ``min_norm(|A1 H1|) = target`` by bisection.

    ``method`` is ``"approx"`` (bridged closed form) or ``"exact"``
    (numerical minimisation). When ``target`` exceeds every attainable
    value the result is ``(inf, True)``.
    """
    if not target > 0:
        raise ValueError("target norm must be positive")
    if method == "approx":
        f = lambda v: min_norm_approx(cfg, v)  # noqa: E731
    elif method == "exact":
        f = lambda v: min_norm_numeric(cfg.with_v(v)).value  # noqa: E731
    else:
        raise ValueError(f"unknown method {method!r}")
    if cfg.Omega1 == 0:
        return Inversion(math.inf, True)
    lo, hi = V_RANGE
    if f(hi) < target:
        return Inversion(math.inf, True)
    if f(lo) >= target:
        return Inversion(lo, False)
    # bisection in log(v)
    a, b = math.log(lo), math.log(hi)
    while b - a > rtol:
        m = 0.5 * (a + b)
        if f(math.exp(m)) < target:
            a = m
        else:
            b = m
    return Inversion(math.exp(0.5 * (a + b)), False)


@dataclass
class MaskingCurve:
    freq_hz: np.ndarray
    threshold_db: np.ndarray
    masker_response_db: np.ndarray
    v: np.ndarray
    saturated: np.ndarray
    masker_hz: float
    masker_db: float


def masking_curve(bank: FilterBank, masker_hz: float, masker_db: float = 0.0,
                  C1: float = 10.0, method: str = "approx", freqs_hz=None) -> MaskingCurve:
    """Probe detection threshold per channel in the presence of a masker.

    For each channel the masker-to-probe amplitude ratio at which the
    minimum norm reaches ``C1`` is found; the probe threshold is the
    masker level minus that ratio in dB. Saturated channels (the norm
    never reaches ``C1``) get ``-inf``.

    Parameters
    ----------
    freqs_hz : array_like, optional
        Evaluate channels of the bank's frequency map centred at these
        frequencies instead of the bank's own channels.
    """
    _require_gammatone(bank.prototype)
    w1 = 2 * math.pi * masker_hz
    if not (bank.omegas[0] <= w1 <= bank.omegas[-1]):
        raise ValueError("masker frequency lies outside the filter bank")
    if not C1 > 0:
        raise ValueError("C1 must be positive")
    if freqs_hz is None:
        cfgs = [TwoToneConfig.from_bank(bank, k, w1, 1.0) for k in range(len(bank))]
        freqs = bank.freqs_hz.copy()
    else:
        freqs = np.asarray(freqs_hz, dtype=float)
        cfgs = [TwoToneConfig.from_spec(bank.spec, f, w1, 1.0) for f in freqs]
    K = len(cfgs)
    thr = np.empty(K)
    resp = np.empty(K)
    vs = np.empty(K)
    sat = np.zeros(K, dtype=bool)
    for k, cfg in enumerate(cfgs):
        resp[k] = masker_db + 20 * math.log10(abs(cfg.H1))
        inv = invert_min_norm(cfg, C1, method)
        vs[k], sat[k] = inv.v, inv.saturated
        thr[k] = -math.inf if inv.saturated else resp[k] - 20 * math.log10(inv.v)
    return MaskingCurve(freqs, thr, resp, vs, sat, masker_hz, masker_db)
