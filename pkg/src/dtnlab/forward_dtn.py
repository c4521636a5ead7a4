"""Finite-difference Dirichlet solver and the discrete Dirichlet-to-Neumann map.

Cell-centred 5-point (d=2) / 7-point (d=3) Laplacian.  Next to a boundary face
the one-sided neighbour sits at distance h/2, and the non-uniform three-point
formula ``u'' ~ 4/(3h^2) (2 u_b - 3 u_c + u_o)`` is used, which is exact on
quadratics.  The outward normal derivative at a face is
``(8/3 f_b - 3 u_c + 1/3 u_o) / h`` (second order, two interior layers).
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid_domain import Domain
from .potentials import Potential

logger = logging.getLogger(__name__)

MAGIC = b"GDTN0001"
GUARD_FACTOR = 10.0
RESIDUAL_TOL = 1e-10
_RHS_BLOCK = 1024


class DirichletEigenvalueError(RuntimeError):
    """Zero is (numerically) a Dirichlet eigenvalue of -Laplace + v."""


class SolverError(RuntimeError):
    pass


def _laplacian_parts(dom: Domain) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Return ``(A0, B)`` with ``-Lap_h u = A0 u - B f`` for boundary data ``f``."""
    n, d, h = dom.n, dom.dim, dom.h
    N = dom.num_nodes
    idx = np.arange(N).reshape(dom.shape)
    rows, cols, vals = [], [], []
    diag = np.zeros(dom.shape)
    for ax in range(d):
        sl_lo = [slice(None)] * d
        sl_hi = [slice(None)] * d
        sl_lo[ax] = slice(0, n - 1)
        sl_hi[ax] = slice(1, n)
        a, b = idx[tuple(sl_lo)].ravel(), idx[tuple(sl_hi)].ravel()
        # coupling of each cell to its interior neighbour along ``ax``
        pos_lo = np.indices(dom.shape)[ax][tuple(sl_lo)].ravel()
        pos_hi = pos_lo + 1
        w_ab = np.where(pos_lo == 0, 4.0 / 3.0, 1.0)  # row a couples to b
        w_ba = np.where(pos_hi == n - 1, 4.0 / 3.0, 1.0)
        rows += [a, b]
        cols += [b, a]
        vals += [-w_ab / h**2, -w_ba / h**2]
        pos = np.indices(dom.shape)[ax]
        edge = (pos == 0) | (pos == n - 1)
        diag += np.where(edge, 4.0, 2.0) / h**2
    rows.append(idx.ravel())
    cols.append(idx.ravel())
    vals.append(diag.ravel())
    A0 = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N)
    )
    B = sp.csr_matrix(
        (np.full(dom.num_boundary, 8.0 / (3.0 * h**2)), (dom.face_cell, np.arange(dom.num_boundary))),
        shape=(N, dom.num_boundary),
    )
    return A0, B


_PARTS_CACHE: dict[tuple, tuple[sp.csr_matrix, sp.csr_matrix]] = {}


def laplacian_parts(dom: Domain) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    key = (dom.dim, dom.n, dom.side)
    if key not in _PARTS_CACHE:
        _PARTS_CACHE[key] = _laplacian_parts(dom)
    return _PARTS_CACHE[key]


def operator(v: Potential) -> sp.csc_matrix:
    """Sparse discrete ``-Lap_h + v`` with homogeneous Dirichlet data."""
    A0, _ = laplacian_parts(v.domain)
    return (A0 + sp.diags(v.flat)).tocsc()


def symmetrizer(dom: Domain) -> np.ndarray:
    """Diagonal weights ``s`` making ``diag(s) @ (-Lap_h)`` symmetric."""
    s = np.ones(dom.shape)
    for ax in range(dom.dim):
        pos = np.indices(dom.shape)[ax]
        s = s * np.where((pos == 0) | (pos == dom.n - 1), 0.75, 1.0)
    return s.ravel()


def normal_derivative(dom: Domain, u: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Outward normal derivative at faces from interior field ``u`` (flat) and trace ``f``."""
    u = np.asarray(u)
    u_c = u[dom.face_cell]
    u_o = u[dom.face_inner]
    return (8.0 / 3.0 * np.asarray(f) - 3.0 * u_c + u_o / 3.0) / dom.h


def _factorize(A: sp.csc_matrix):
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise DirichletEigenvalueError(f"singular Dirichlet operator: {exc}") from exc
    if not np.all(np.isfinite(lu.U.diagonal())) or np.min(np.abs(lu.U.diagonal())) == 0:
        raise DirichletEigenvalueError("singular Dirichlet operator (zero pivot)")
    return lu


def _solve(lu, A: sp.csc_matrix, rhs: np.ndarray) -> np.ndarray:
    x = lu.solve(rhs)
    res = A @ x - rhs
    scale = np.maximum(np.linalg.norm(rhs, axis=0), np.finfo(float).tiny)
    rel = np.max(np.linalg.norm(np.atleast_2d(res.T).T, axis=0) / scale)
    if rel > RESIDUAL_TOL:
        # one step of iterative refinement before giving up
        x = x - lu.solve(res)
        res = A @ x - rhs
        rel = np.max(np.linalg.norm(np.atleast_2d(res.T).T, axis=0) / scale)
        if rel > RESIDUAL_TOL:
            raise SolverError(f"Dirichlet solve residual {rel:.2e} exceeds {RESIDUAL_TOL:.0e}")
    return x


def solve_dirichlet(v: Potential, f: np.ndarray) -> np.ndarray:
    """Solve ``-Lap_h psi + v psi = 0`` with ``psi = f`` on the faces.

    ``f`` may be a vector over boundary faces or a matrix with one column per
    data set.  Returns interior values (flat, or one column per data set).
    """
    dom = v.domain
    f = np.asarray(f)
    if f.shape[0] != dom.num_boundary:
        raise ValueError(f"boundary data has {f.shape[0]} entries, expected {dom.num_boundary}")
    _, B = laplacian_parts(dom)
    A = operator(v)
    lu = _factorize(A)
    rhs = B @ f
    if np.iscomplexobj(rhs):
        return _solve(lu, A, rhs.real) + 1j * _solve(lu, A, rhs.imag)
    return _solve(lu, A, rhs)


class GuardReport(NamedTuple):
    passed: bool
    eigenvalue: float
    threshold: float

    @property
    def margin(self) -> float:
        return abs(self.eigenvalue) - self.threshold


def smallest_eigenvalue(v: Potential) -> float:
    """Eigenvalue of smallest magnitude of the discrete Dirichlet operator."""
    dom = v.domain
    s = np.sqrt(symmetrizer(dom))
    A = operator(v)
    S = (sp.diags(s) @ A @ sp.diags(1.0 / s)).tocsc()
    S = 0.5 * (S + S.T)
    try:
        # fixed start vector: ARPACK otherwise draws a random one and the last bits vary
        v0 = np.random.default_rng(0).uniform(0.5, 1.5, S.shape[0])
        vals = spla.eigsh(S, k=1, sigma=0.0, which="LM", v0=v0, return_eigenvectors=False)
    except RuntimeError:
        # exactly singular shift: zero is an eigenvalue
        return 0.0
    return float(vals[0])


def guard_threshold(dom: Domain) -> float:
    """``GUARD_FACTOR * h^2 * lambda_1(-Lap_h)`` (scale-aware discretisation noise)."""
    lam0 = abs(smallest_eigenvalue(Potential(dom, np.zeros(dom.shape), dom.dim + 1)))
    return GUARD_FACTOR * dom.h**2 * lam0


def dirichlet_guard(v: Potential) -> GuardReport:
    """Check that zero is not a Dirichlet eigenvalue of ``-Lap_h + v``."""
    lam = smallest_eigenvalue(v)
    thr = guard_threshold(v.domain)
    return GuardReport(abs(lam) > thr, lam, thr)


@dataclass(frozen=True, eq=False)
class DtnMap:
    """Discrete DtN kernel: ``(Phi f)_i = sum_j K_ij f_j w_j``."""

    domain: Domain
    K: np.ndarray
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        K = np.array(self.K, dtype=float)
        nb = self.domain.num_boundary
        if K.shape != (nb, nb):
            raise ValueError(f"kernel shape {K.shape} does not match {nb} boundary faces")
        K.setflags(write=False)
        object.__setattr__(self, "K", K)

    def apply(self, f: np.ndarray) -> np.ndarray:
        return self.K @ (np.asarray(f) * self.domain.weights)

    def __sub__(self, other: "DtnMap") -> "DtnMap":
        _check_domain(self, other)
        return DtnMap(self.domain, self.K - other.K, {"difference": True})

    def __add__(self, other: "DtnMap") -> "DtnMap":
        _check_domain(self, other)
        return DtnMap(self.domain, self.K + other.K)

    def __mul__(self, c: float) -> "DtnMap":
        return DtnMap(self.domain, c * self.K, dict(self.info))

    __rmul__ = __mul__

    def symmetry_defect(self) -> float:
        """``max |K - K^T| / max |K|``."""
        scale = max(np.max(np.abs(self.K)), np.finfo(float).tiny)
        return float(np.max(np.abs(self.K - self.K.T)) / scale)

    def weighted_singular_values(self) -> np.ndarray:
        """Singular values of ``W^1/2 K W^1/2`` (the operator on L^2(boundary))."""
        s = np.sqrt(self.domain.weights)
        return np.linalg.svd(s[:, None] * self.K * s[None, :], compute_uv=False)

    # persistence ---------------------------------------------------------
    def _meta(self) -> dict:
        d = self.domain
        return {"domain_hash": d.key(), "n": d.n, "d": d.dim, "side": d.side, "rows": d.num_boundary}

    def save(self, path: str | Path, fmt: str = "csv") -> list[Path]:
        """Write JSON metadata next to a CSV (row, col, value) or GDTN0001 binary matrix."""
        path = Path(path)
        meta = self._meta() | {"format": fmt}
        if fmt == "csv":
            data_path = path.with_suffix(".csv")
            nb = self.domain.num_boundary
            ii, jj = np.meshgrid(np.arange(nb), np.arange(nb), indexing="ij")
            table = np.column_stack([ii.ravel(), jj.ravel(), self.K.ravel()])
            np.savetxt(data_path, table, delimiter=",", fmt=["%d", "%d", "%.17g"], header="row,col,value", comments="")
        elif fmt == "bin":
            data_path = path.with_suffix(".gdtn")
            with open(data_path, "wb") as fh:
                fh.write(MAGIC)
                fh.write(self.K.astype("<f8").tobytes(order="C"))
        else:
            raise ValueError(f"unknown DtN format {fmt!r}")
        meta["data"] = data_path.name
        meta_path = path.with_suffix(".json")
        meta_path.write_text(json.dumps(meta, indent=2))
        return [meta_path, data_path]

    @classmethod
    def load(cls, path: str | Path, domain: Domain) -> "DtnMap":
        meta_path = Path(path).with_suffix(".json")
        meta = json.loads(meta_path.read_text())
        if meta["domain_hash"] != domain.key():
            raise ValueError(f"{meta_path}: domain hash {meta['domain_hash']} != {domain.key()}")
        data_path = meta_path.parent / meta["data"]
        nb = domain.num_boundary
        if meta["format"] == "csv":
            table = np.loadtxt(data_path, delimiter=",", skiprows=1, ndmin=2)
            K = np.zeros((nb, nb))
            K[table[:, 0].astype(int), table[:, 1].astype(int)] = table[:, 2]
        else:
            K = read_gdtn(data_path, nb)
        return cls(domain, K)


def read_gdtn(path: str | Path, nb: int) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ValueError(f"{path}: bad magic header {raw[:8]!r}")
    body = raw[8:]
    if len(body) != 8 * nb * nb:
        raise ValueError(f"{path}: expected {nb}x{nb} float64 payload, got {len(body)} bytes")
    return np.frombuffer(body, dtype="<f8").reshape(nb, nb).copy()


def _check_domain(a: DtnMap, b: DtnMap) -> None:
    if not a.domain.same_as(b.domain):
        raise ValueError("DtN maps are defined on different domains")


def _impulse_response(dom: Domain, lu, A, cols: np.ndarray) -> np.ndarray:
    """Interior fields for unit boundary data on faces ``cols``."""
    _, B = laplacian_parts(dom)
    return _solve(lu, A, B[:, cols].toarray())


def dtn_map(v: Potential, check: bool = True) -> DtnMap:
    """Assemble the DtN kernel column by column from boundary impulses."""
    dom = v.domain
    info: dict = {}
    if check:
        rep = dirichlet_guard(v)
        info["guard_eigenvalue"] = rep.eigenvalue
        if not rep.passed:
            raise DirichletEigenvalueError(
                f"zero is close to a Dirichlet eigenvalue: |lambda|={abs(rep.eigenvalue):.3g} <= {rep.threshold:.3g}"
            )
    A = operator(v)
    lu = _factorize(A)
    nb = dom.num_boundary
    N = np.empty((nb, nb))
    for start in range(0, nb, _RHS_BLOCK):
        cols = np.arange(start, min(start + _RHS_BLOCK, nb))
        U = _impulse_response(dom, lu, A, cols)
        F = np.zeros((nb, len(cols)))
        F[cols, np.arange(len(cols))] = 1.0
        N[:, cols] = normal_derivative(dom, U, F)
    K = N / dom.weights[None, :]
    return DtnMap(dom, K, info)


def dtn_difference(v2: Potential, v1: Potential) -> DtnMap:
    """``Phi_2 - Phi_1`` via the resolvent identity (accurate for tiny differences).

    ``U_2 - U_1 = -A_2^{-1} diag(v_2 - v_1) U_1`` where ``U_i`` are the impulse
    responses, and only the interior part of the normal derivative depends on U.
    """
    dom = v1.domain
    if not dom.same_as(v2.domain):
        raise ValueError("potentials live on different domains")
    dv = v2.flat - v1.flat
    nb = dom.num_boundary
    if not np.any(dv):
        return DtnMap(dom, np.zeros((nb, nb)), {"difference": True})
    A1, A2 = operator(v1), operator(v2)
    lu1, lu2 = _factorize(A1), _factorize(A2)
    D = np.empty((nb, nb))
    for start in range(0, nb, _RHS_BLOCK):
        cols = np.arange(start, min(start + _RHS_BLOCK, nb))
        U1 = _impulse_response(dom, lu1, A1, cols)
        dU = -_solve(lu2, A2, dv[:, None] * U1)
        D[:, cols] = normal_derivative(dom, dU, np.zeros((nb, len(cols))))
    return DtnMap(dom, D / dom.weights[None, :], {"difference": True})


def dtn_linearization(v1: Potential, dv: Potential) -> DtnMap:
    """Directional derivative of ``v -> Phi_v`` at ``v1`` along ``dv``.

    Same as :func:`dtn_difference` with the second resolvent frozen at ``v1``;
    its gap to the true difference is the part of the data that is nonlinear in ``dv``.
    """
    dom = v1.domain
    if not dom.same_as(dv.domain):
        raise ValueError("potentials live on different domains")
    nb = dom.num_boundary
    if dv.is_zero():
        return DtnMap(dom, np.zeros((nb, nb)), {"linearized": True})
    A1 = operator(v1)
    lu1 = _factorize(A1)
    D = np.empty((nb, nb))
    for start in range(0, nb, _RHS_BLOCK):
        cols = np.arange(start, min(start + _RHS_BLOCK, nb))
        U1 = _impulse_response(dom, lu1, A1, cols)
        dU = -_solve(lu1, A1, dv.flat[:, None] * U1)
        D[:, cols] = normal_derivative(dom, dU, np.zeros((nb, len(cols))))
    return DtnMap(dom, D / dom.weights[None, :], {"linearized": True})


def dtn_diff_norm(phi1: DtnMap, phi2: DtnMap | None = None) -> float:
    """L-infinity operator norm ``max_i sum_j |K1_ij - K2_ij| w_j``.

    With a single argument the map itself (typically a difference) is measured.
    """
    if phi2 is None:
        D = phi1.K
    else:
        _check_domain(phi1, phi2)
        D = phi1.K - phi2.K
    return float(np.max(np.abs(D) @ phi1.domain.weights))
