"""Linearised reconstruction: Fourier data from a DtN difference, then truncated inversion."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .forward_dtn import DtnMap
from .grid_domain import Domain, FourierGrid
from .potentials import Spectrum, ball_mask, inverse_fourier
from .variety_faddeev import born_pair

_P_BLOCK = 512


@dataclass(frozen=True)
class CutoffRule:
    """``rho(delta) = lam * ln(1 + 1/delta)`` with ``lam = (1 - alpha) / (L + d)``."""

    alpha: float
    radius: float
    dim: int

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.radius > 0:
            raise ValueError("domain radius must be positive")

    @property
    def shifted_radius(self) -> float:
        return self.radius + self.dim

    @property
    def lam(self) -> float:
        return (1 - self.alpha) / self.shifted_radius

    def rho(self, delta: float) -> float:
        return cutoff_rule(delta, self)

    @classmethod
    def for_domain(cls, dom: Domain, alpha: float = 0.5) -> "CutoffRule":
        """Rule with ``L`` the largest distance from the origin to the closed square/cube."""
        return cls(alpha, dom.side * math.sqrt(dom.dim) / 2, dom.dim)


class ExactData(ValueError):
    """delta = 0: the two potentials coincide; no cutoff is needed."""


def cutoff_rule(delta: float, rule: CutoffRule) -> float:
    if delta == 0:
        raise ExactData("delta = 0: data are exact, return the zero difference directly")
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    return rule.lam * math.log1p(1.0 / delta)


def _pair_frequencies(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rows ``k(p)`` and ``l(p)`` of the Born pairs (zero at p = 0)."""
    K = np.zeros(points.shape, dtype=complex)
    L = np.zeros(points.shape, dtype=complex)
    for i, p in enumerate(points):
        if np.any(p):
            pr = born_pair(p)
            K[i], L[i] = pr.k.k, pr.l.k
    return K, L


def vhat_from_dtn(p: np.ndarray | Sequence[float], dtn_diff: DtnMap) -> np.ndarray | complex:
    """``(2 pi)^-d sum_x sum_y exp(-i l.x) (Phi - Phi0)(x, y) exp(i k.y) w_x w_y``.

    ``p`` may be a single frequency or an ``(N, d)`` array.
    """
    p = np.asarray(p, dtype=float)
    single = p.ndim == 1
    P = np.atleast_2d(p)
    dom = dtn_diff.domain
    if P.shape[1] != dom.dim:
        raise ValueError("frequency and domain dimensions differ")
    B, w = dom.boundary, dom.weights
    out = np.empty(len(P), dtype=complex)
    for s in range(0, len(P), _P_BLOCK):
        Kf, Lf = _pair_frequencies(P[s : s + _P_BLOCK])
        left = np.exp(-1j * (B @ Lf.T)) * w[:, None]
        right = np.exp(1j * (B @ Kf.T)) * w[:, None]
        out[s : s + _P_BLOCK] = np.einsum("ip,ip->p", left, dtn_diff.K @ right)
    out /= (2 * np.pi) ** dom.dim
    return complex(out[0]) if single else out


@dataclass(frozen=True, eq=False)
class Reconstruction:
    spectrum: Spectrum
    values: np.ndarray
    rho: float
    imag_residue: float

    @property
    def relative_imag_residue(self) -> float:
        return self.imag_residue / max(float(np.max(np.abs(self.values))), np.finfo(float).tiny)

    def save_csv(self, dom: Domain, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow([f"x{i + 1}" for i in range(dom.dim)] + ["value"])
            for x, val in zip(dom.nodes, self.values.ravel()):
                wr.writerow([repr(float(c)) for c in x] + [repr(float(val))])

    def summary(self, **extra) -> dict:
        return {"rho": self.rho, "imag_residue": self.imag_residue, **extra}

    def save_summary(self, path: str | Path, **extra) -> None:
        Path(path).write_text(json.dumps(self.summary(**extra), indent=2, sort_keys=True))


def estimate_spectrum(dtn_diff: DtnMap, fg: FourierGrid, rho: float) -> Spectrum:
    """Born estimates at lattice nodes with ``|p| < rho``; zero elsewhere."""
    fg.check_cutoff(rho)
    mask = ball_mask(fg, rho)
    vals = np.zeros(len(fg.points), dtype=complex)
    if np.any(mask):
        vals[mask] = vhat_from_dtn(fg.points[mask], dtn_diff)
    return Spectrum(fg, vals)


def reconstruct(dtn_diff: DtnMap, rho: float, fg: FourierGrid, dom: Domain) -> Reconstruction:
    if fg.dim != dom.dim:
        raise ValueError("lattice and domain dimensions differ")
    if not dtn_diff.domain.same_as(dom):
        raise ValueError("DtN difference and target domain differ")
    spec = estimate_spectrum(dtn_diff, fg, rho)
    inv = inverse_fourier(spec, dom, rho)
    return Reconstruction(spec, inv.values, float(rho), inv.imag)


class ErrorSplit(NamedTuple):
    inside: float  # I1: integral of |s1 - s2| over |p| < rho
    outside: float  # I2: the complement within the lattice


def error_split(s1: Spectrum, s2: Spectrum, rho: float) -> ErrorSplit:
    diff = np.abs((s1 - s2).values) * s1.grid.weight
    mask = ball_mask(s1.grid, rho)
    return ErrorSplit(float(diff[mask].sum()), float(diff[~mask].sum()))
