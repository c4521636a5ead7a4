"""Boundary reduction: scattering amplitudes from a DtN difference.

Given a background ``v1`` with known Faddeev data, the boundary values of
``psi2(., k)`` solve the second-kind system

    psi2(x) = psi1(x) + sum_y A(x, y) psi2(y) w_y,    A = R1 W (Phi2 - Phi1),

and ``h2 - h1`` is a double boundary sum against ``psi1(., -l)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .forward_dtn import DtnMap
from .grid_domain import Domain
from .potentials import Potential
from .variety_faddeev import (
    ComplexFrequency,
    GreenTable,
    ThetaPair,
    faddeev_green,
    lippmann_schwinger,
    psi_trace,
    solve_ls,
)

PSI2_RESIDUAL_TOL = 1e-10
CONDITION_LIMIT = 1e10


class ReductionError(RuntimeError):
    """The boundary system is numerically singular at this frequency."""


@dataclass(frozen=True, eq=False)
class BoundaryKernel:
    """Dense kernel on boundary nodes; acts by ``(K f)(x) = sum_y K(x,y) f(y) w_y``."""

    domain: Domain
    matrix: np.ndarray
    k: ComplexFrequency | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=complex)
        nb = self.domain.num_boundary
        if M.shape != (nb, nb):
            raise ValueError(f"kernel must be {nb}x{nb}, got {M.shape}")
        if not np.all(np.isfinite(M)):
            raise ValueError("kernel has non-finite entries")
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)

    @property
    def row_norms(self) -> np.ndarray:
        """Weighted row L1 norms ``sum_y |K(x,y)| w_y``."""
        return np.abs(self.matrix) @ self.domain.weights

    def apply(self, f: np.ndarray) -> np.ndarray:
        return self.matrix @ (np.asarray(f) * self.domain.weights)


def background_r1(
    v1: Potential, k: ComplexFrequency, table: GreenTable, sources: np.ndarray | None = None
) -> BoundaryKernel:
    """``R1(x, y, k)`` for ``x, y`` on the boundary.

    ``R1 = G + G v1 R1`` is solved in the phase-free form ``R1 = exp(ik.(x-y)) r``,
    one Lippmann-Schwinger solve per source.  ``sources`` (boundary indices)
    restricts the computed columns; the others are left as ``G``.
    """
    dom = v1.domain
    if not k.matches(table.k):
        raise ValueError("Green table was built for a different frequency")
    B = dom.boundary
    r = table.g_between(B, B).astype(complex)
    info = {"max_residual": 0.0, "solves": 0}
    if not v1.is_zero():
        cols = np.arange(dom.num_boundary) if sources is None else np.asarray(sources)
        supp = v1.support()
        Xs = dom.nodes[supp]
        vh = v1.flat[supp] * dom.cell_volume
        for j in cols:
            rhs = table.g_at(dom.nodes - B[j]).reshape(dom.shape)
            col, res, _, _ = solve_ls(table, v1.values, rhs)
            info["max_residual"] = max(info["max_residual"], res)
            info["solves"] += 1
            r[:, j] += table.g_between(B, Xs) @ (vh * col.ravel()[supp])
    R = (np.exp(1j * (B @ k.k))[:, None] * np.exp(-1j * (B @ k.k))[None, :]) * r
    return BoundaryKernel(dom, R, k, info)


def kernel_A(k: ComplexFrequency, dtn_diff: DtnMap, r1: BoundaryKernel) -> BoundaryKernel:
    """``A(x, y) = sum_z R1(x, z) w_z (Phi2 - Phi1)(z, y)``."""
    if not dtn_diff.domain.same_as(r1.domain):
        raise ValueError("DtN difference and R1 live on different domains")
    if r1.k is not None and not r1.k.matches(k):
        raise ValueError("R1 was computed at a different frequency")
    w = r1.domain.weights
    return BoundaryKernel(r1.domain, r1.matrix @ (w[:, None] * dtn_diff.K), k)


class Psi2Trace(np.ndarray):
    """Boundary values of psi2 with the solve diagnostics attached."""

    residual: float
    condition: float


def solve_psi2(k: ComplexFrequency, A: BoundaryKernel, psi1_trace: np.ndarray) -> Psi2Trace:
    """Dense solve of ``(I - A W) psi2 = psi1`` on the boundary."""
    if A.k is not None and not A.k.matches(k):
        raise ValueError("kernel A was built at a different frequency")
    f = np.asarray(psi1_trace, dtype=complex)
    nb = A.domain.num_boundary
    S = np.eye(nb) - A.matrix * A.domain.weights[None, :]
    cond = float(np.linalg.cond(S))
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise ReductionError(f"I - A W is near-singular (condition {cond:.2e})")
    psi2 = np.linalg.solve(S, f)
    res = float(np.max(np.abs(S @ psi2 - f)) / max(np.max(np.abs(f)), 1e-300))
    if res > PSI2_RESIDUAL_TOL:
        psi2 = psi2 + np.linalg.solve(S, f - S @ psi2)
        res = float(np.max(np.abs(S @ psi2 - f)) / max(np.max(np.abs(f)), 1e-300))
    out = psi2.view(Psi2Trace)
    out.residual = res
    out.condition = cond
    return out


def h_from_dtn(
    pair: ThetaPair, dtn_diff: DtnMap, psi1_minus_l: np.ndarray, psi2_k: np.ndarray
) -> complex:
    """``h2 - h1 = (2 pi)^-d sum_x sum_y psi1(x,-l) (Phi2-Phi1)(x,y) psi2(y,k) w_x w_y``."""
    dom = dtn_diff.domain
    for name, t in (("psi1(-l)", psi1_minus_l), ("psi2(k)", psi2_k)):
        if np.shape(t) != (dom.num_boundary,):
            raise ValueError(f"{name} trace has wrong length")
    w = dom.weights
    val = (np.asarray(psi1_minus_l) * w) @ dtn_diff.K @ (np.asarray(psi2_k) * w)
    return complex(val / (2 * np.pi) ** dom.dim)


@dataclass(frozen=True)
class ReductionResult:
    pair: ThetaPair
    h_diff: complex
    psi2: np.ndarray
    condition: float
    residual: float


def reduce_pair(
    pair: ThetaPair,
    dtn_diff: DtnMap,
    v1: Potential,
    table_k: GreenTable | None = None,
    table_minus_l: GreenTable | None = None,
) -> ReductionResult:
    """Full boundary route at one Theta pair: R1, A, psi2 and ``h2 - h1``."""
    dom = dtn_diff.domain
    k = pair.k
    if table_k is None:
        table_k = faddeev_green(k, dom)
    B = dom.boundary
    if v1.is_zero():
        psi1_k = k.plane_wave(B)
        psi1_ml = (-pair.l).plane_wave(B)
    else:
        f1 = lippmann_schwinger(v1, k, table_k)
        psi1_k = psi_trace(v1, f1, table_k)
        ml = -pair.l
        if table_minus_l is None:
            table_minus_l = faddeev_green(ml, dom)
        fl = lippmann_schwinger(v1, ml, table_minus_l)
        psi1_ml = psi_trace(v1, fl, table_minus_l)
    r1 = background_r1(v1, k, table_k)
    A = kernel_A(k, dtn_diff, r1)
    psi2 = solve_psi2(k, A, psi1_k)
    h = h_from_dtn(pair, dtn_diff, psi1_ml, psi2)
    return ReductionResult(pair, h, np.asarray(psi2), psi2.condition, psi2.residual)
