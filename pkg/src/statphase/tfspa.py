"""Stationary-point detection, phase-rate dominance masks and their validation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .filterbank import FilterBank
from .tfanalysis import GradientField, TFField

DEFAULT_C1 = 10.0
DEFAULT_C2 = 1.0


def _check_C1(C1):
    if not C1 > 0:
        raise ValueError(f"C1 must be positive, got {C1}")


def _check_C2(C2):
    if not C2 >= 1:
        raise ValueError(f"C2 must be >= 1, got {C2}")


def stationary_points(g: GradientField, C1: float = DEFAULT_C1, ord: int = 2) -> np.ndarray:
    """Cells where ``||phi|| < C1``; undefined cells are never stationary."""
    _check_C1(C1)
    norm = g.phi_norm(ord)
    with np.errstate(invalid="ignore"):
        return g.defined & (norm < C1)


def dominance_mask(g: GradientField, C2: float = DEFAULT_C2) -> np.ndarray:
    """Phase-dominant cells, ``p > C2 ||a||``; candidates for discarding."""
    _check_C2(C2)
    na = g.amp_norm
    with np.errstate(invalid="ignore"):
        return g.defined & (na > 0) & (g.p > C2 * na)


def _dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    if radius <= 0 or not mask.any():
        return mask.copy()
    st = np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)
    return ndimage.binary_dilation(mask, structure=st)


@dataclass
class RegionMask:
    """Region kept for sparse synthesis.

    ``keep`` is the union of dilated stationary neighbourhoods and
    non-dominant cells, restricted to cells with defined gradients.
    """

    keep: np.ndarray
    stationary: np.ndarray
    C1: float = DEFAULT_C1
    C2: float = DEFAULT_C2
    radius: int = 1
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.keep = np.asarray(self.keep, dtype=bool)
        self.stationary = np.asarray(self.stationary, dtype=bool)
        if self.keep.shape != self.stationary.shape or self.keep.ndim != 2:
            raise ValueError("keep and stationary must be 2-D arrays of equal shape")
        _check_C1(self.C1)
        _check_C2(self.C2)

    @property
    def shape(self):
        return self.keep.shape

    @property
    def sparsity(self) -> float:
        return 1.0 - self.keep.sum() / self.keep.size

    def report(self) -> dict:
        return {
            "shape": list(self.shape),
            "C1": float(self.C1),
            "C2": float(self.C2),
            "radius": int(self.radius),
            "kept_cells": int(self.keep.sum()),
            "stationary_cells": int(self.stationary.sum()),
            "sparsity": float(self.sparsity),
        }

    def to_pbm(self, path, which: str = "keep") -> None:
        """Plain PBM (P1): rows are channels (highest first), 1 = set."""
        m = getattr(self, which)[::-1].astype(np.uint8)
        K, N = m.shape
        lines = ["P1", f"# {which} C1={self.C1:g} C2={self.C2:g} radius={self.radius}", f"{N} {K}"]
        lines += [" ".join(map(str, row)) for row in m]
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    def to_csv(self, path) -> None:
        """Cell codes: 0 discard, 1 keep, 2 stationary (and kept)."""
        code = self.keep.astype(np.uint8) + self.stationary.astype(np.uint8)
        header = f"C1={self.C1:g};C2={self.C2:g};radius={self.radius}"
        np.savetxt(path, code, fmt="%d", delimiter=",", header=header)

    @classmethod
    def from_csv(cls, path) -> "RegionMask":
        with open(path) as fh:
            first = fh.readline()
        params = {"C1": DEFAULT_C1, "C2": DEFAULT_C2, "radius": 1}
        if first.startswith("#"):
            for item in first[1:].strip().split(";"):
                if "=" in item:
                    k, v = item.split("=", 1)
                    if k.strip() in params:
                        params[k.strip()] = float(v)
        try:
            code = np.loadtxt(path, delimiter=",", dtype=int, ndmin=2)
        except ValueError as err:
            raise ValueError(f"{path}: malformed mask CSV ({err})") from None
        if code.size and (code.min() < 0 or code.max() > 2):
            raise ValueError(f"{path}: mask codes must be 0, 1 or 2")
        return cls(code >= 1, code == 2, params["C1"], params["C2"], int(params["radius"]))


def build_region_mask(g: GradientField, C1: float = DEFAULT_C1, C2: float = DEFAULT_C2,
                      radius: int = 1, ord: int = 2) -> RegionMask:
    """Combine the stationary-point and dominance tests into a keep mask."""
    if radius < 0:
        raise ValueError("neighbourhood radius must be non-negative")
    stat = stationary_points(g, C1, ord)
    dom = dominance_mask(g, C2)
    keep = (~dom | _dilate(stat, radius)) & g.defined
    return RegionMask(keep, stat, C1, C2, radius)


class Dominance1D(NamedTuple):
    first: np.ndarray
    second: np.ndarray


def dominance_1d(a, b, dt: float, C2: float = DEFAULT_C2, eps: float = 0.0) -> Dominance1D:
    """First and second order phase-rate dominance of ``a(t) e^{j b(t)}``.

    First order: ``|b'| > C2 (|a'/a| + eps)``. Second order additionally
    requires ``|b''| > C2 (|(a'/a)'| + eps)``. Derivatives are central
    differences.

    Parameters
    ----------
    a, b : array_like
        Sampled amplitude (non-zero) and phase.
    dt : float
        Sample interval.
    C2 : float
        Dominance margin, at least one.
    eps : float
        Absolute tolerance added to the amplitude terms.
    """
    _check_C2(C2)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("a and b must be 1-D sequences of equal length")
    if a.size < 3:
        raise ValueError("need at least three samples")
    if np.any(a == 0):
        raise ValueError("amplitude must be non-zero")
    rate = np.gradient(a, dt) / a
    bd = np.gradient(b, dt)
    bdd = np.gradient(bd, dt)
    first = np.abs(bd) > C2 * (np.abs(rate) + eps)
    second = first & (np.abs(bdd) > C2 * (np.abs(np.gradient(rate, dt)) + eps))
    return Dominance1D(first, second)


def _disk(radius: float):
    r = int(np.floor(radius))
    i, j = np.mgrid[-r:r + 1, -r:r + 1]
    return (i * i + j * j) <= radius * radius, r


def disk_ratio(f: np.ndarray, radius: float) -> float:
    """``|sum_S f| / (|S| |f(v0)|)`` over a disk of ``radius`` cells about the centre of ``f``."""
    f = np.asarray(f)
    disk, r = _disk(radius)
    if f.ndim != 2 or min(f.shape) < 2 * r + 1:
        raise ValueError("patch is smaller than the disk radius")
    ci, cj = f.shape[0] // 2, f.shape[1] // 2
    sub = f[ci - r:ci + r + 1, cj - r:cj + r + 1]
    centre = abs(f[ci, cj])
    if centre == 0:
        return np.nan
    return float(abs(sub[disk].sum()) / (disk.sum() * centre))


@dataclass
class PatchReport:
    centers: np.ndarray
    ratios: np.ndarray
    dominant: np.ndarray

    @property
    def median_dominant(self) -> float:
        r = self.ratios[self.dominant]
        return float(np.nanmedian(r)) if r.size else np.nan

    @property
    def median_non_dominant(self) -> float:
        r = self.ratios[~self.dominant]
        return float(np.nanmedian(r)) if r.size else np.nan


def integrand_patch(X: TFField, bank: FilterBank, k0: int, n0: int, radius: float) -> np.ndarray:
    """Synthesis integrand ``X(tau) conj(h_w(tau - t0))`` on the patch about ``(k0, n0)``.

    ``t0`` is chosen so that the centre sits at the filter's group delay,
    ``t0 = tau0 - g(w_k0)``.
    """
    _, r = _disk(radius)
    K, N = X.shape
    if k0 - r < 0 or k0 + r >= K or n0 - r < 0 or n0 + r >= N:
        raise ValueError(f"patch of radius {radius} around ({k0}, {n0}) leaves the field")
    fs = X.sample_rate
    t0 = n0 / fs - bank.group_delays[k0]
    ks = np.arange(k0 - r, k0 + r + 1)
    tau = np.arange(n0 - r, n0 + r + 1) / fs - t0
    beta = bank.betas[ks, None]
    omega = bank.omegas[ks, None]
    h = beta * bank.prototype.h(beta * tau[None, :]) * np.exp(1j * omega * tau[None, :])
    return X.data[k0 - r:k0 + r + 1, n0 - r:n0 + r + 1] * np.conj(h)


def validate_dominance_patch(X: TFField, bank: FilterBank, dominance: np.ndarray,
                             centers, radius: float = 2.0) -> PatchReport:
    """Brute-force patch integrals of the synthesis integrand.

    For every centre ``(k, n)`` the integrand is summed over a disk of
    ``radius`` grid cells and normalised by the disk area times the centre
    magnitude. Phase-dominant cells should show stronger cancellation.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=int))
    dominance = np.asarray(dominance, dtype=bool)
    if dominance.shape != X.shape:
        raise ValueError("dominance mask does not match the field")
    ratios = np.array([disk_ratio(integrand_patch(X, bank, k, n, radius), radius)
                       for k, n in centers])
    dom = dominance[centers[:, 0], centers[:, 1]]
    return PatchReport(centers, ratios, dom)
