"""Computational domain and frequency lattice.

The domain is the axis-aligned square/cube ``[-side/2, side/2]^d`` split into
``n^d`` cells.  Interior unknowns live at cell centres, boundary functions at
face midpoints; the boundary quadrature is the midpoint rule on faces.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field

import numpy as np

MIN_RESOLUTION = 8


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Domain:
    """Cell-centred discretisation of a centred square (d=2) or cube (d=3).

    Attributes
    ----------
    dim, n, side, h
        Dimension, cells per axis, side length and spacing ``side / n``.
    nodes : (n**d, d) array
        Cell centres in C order of the grid index.
    boundary : (Nb, d) array
        Face midpoints, ordered axis by axis, low side before high side.
    normals : (Nb, d) array
        Outward unit normals.
    weights : (Nb,) array
        Face measures ``h**(d-1)``.
    face_cell, face_inner : (Nb,) int arrays
        Flat index of the cell touching the face and of the next cell inward.
    face_axis, face_sign : (Nb,) int arrays
        Normal axis and outward orientation (+1 / -1) of each face.
    """

    dim: int
    n: int
    side: float
    h: float
    axis: np.ndarray
    nodes: np.ndarray
    boundary: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    face_cell: np.ndarray
    face_inner: np.ndarray
    face_axis: np.ndarray
    face_sign: np.ndarray
    radius: float = field(default=0.0)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def num_nodes(self) -> int:
        return self.n**self.dim

    @property
    def num_boundary(self) -> int:
        return len(self.weights)

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @property
    def perimeter(self) -> float:
        """Analytic measure of the boundary (perimeter or surface area)."""
        return 2 * self.dim * self.side ** (self.dim - 1)

    def grid(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays of shape ``self.shape`` (``indexing='ij'``)."""
        return tuple(np.meshgrid(*([self.axis] * self.dim), indexing="ij"))

    def boundary_integral(self, f: np.ndarray) -> complex | float:
        return np.sum(np.asarray(f) * self.weights)

    def key(self) -> str:
        """Stable hash of the construction parameters."""
        token = f"square/d={self.dim}/n={self.n}/side={self.side!r}"
        return hashlib.sha256(token.encode()).hexdigest()[:16]

    def same_as(self, other: "Domain") -> bool:
        return self is other or (
            self.dim == other.dim and self.n == other.n and self.side == other.side
        )


def build_square_domain(d: int, n: int, side: float = 1.0) -> Domain:
    """Build the centred square/cube domain with ``n`` cells per axis."""
    if d not in (2, 3):
        raise ValueError(f"dimension must be 2 or 3, got {d}")
    if n < MIN_RESOLUTION:
        raise ValueError(f"resolution n={n} too small (need n >= {MIN_RESOLUTION})")
    if not side > 0:
        raise ValueError(f"side must be positive, got {side}")
    side = float(side)
    h = side / n
    axis = -side / 2 + h * (np.arange(n) + 0.5)
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    shape = (n,) * d

    pos, nrm, cell, inner, ax_list, sg_list = [], [], [], [], [], []
    for ax in range(d):
        others = [a for a in range(d) if a != ax]
        for sign in (-1, 1):
            edge = 0 if sign < 0 else n - 1
            step = 1 if sign < 0 else -1
            for rest in itertools.product(range(n), repeat=d - 1):
                idx = [0] * d
                for a, r in zip(others, rest):
                    idx[a] = r
                idx[ax] = edge
                c = np.ravel_multi_index(tuple(idx), shape)
                idx[ax] = edge + step
                c2 = np.ravel_multi_index(tuple(idx), shape)
                x = nodes[c].copy()
                x[ax] = sign * side / 2
                nu = np.zeros(d)
                nu[ax] = sign
                pos.append(x)
                nrm.append(nu)
                cell.append(c)
                inner.append(c2)
                ax_list.append(ax)
                sg_list.append(sign)

    weights = np.full(len(pos), h ** (d - 1))
    radius = float(np.max(np.linalg.norm(nodes, axis=1)))
    return Domain(
        dim=d,
        n=n,
        side=side,
        h=h,
        axis=_frozen(axis),
        nodes=_frozen(nodes),
        boundary=_frozen(np.array(pos)),
        normals=_frozen(np.array(nrm)),
        weights=_frozen(weights),
        face_cell=_frozen(np.array(cell, dtype=np.int64)),
        face_inner=_frozen(np.array(inner, dtype=np.int64)),
        face_axis=_frozen(np.array(ax_list, dtype=np.int64)),
        face_sign=_frozen(np.array(sg_list, dtype=np.int64)),
        radius=radius,
    )


@dataclass(frozen=True, eq=False)
class FourierGrid:
    """Symmetric cubic lattice of real frequencies centred at p = 0."""

    dim: int
    p_max: float
    n_p: int
    dp: float
    points: np.ndarray

    @property
    def weight(self) -> float:
        return self.dp**self.dim

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.points, axis=1)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_p,) * self.dim

    def index_of_negative(self) -> np.ndarray:
        """Permutation ``j -> index of -points[j]``."""
        idx = np.arange(len(self.points)).reshape(self.shape)
        return idx[(slice(None, None, -1),) * self.dim].ravel()

    def check_cutoff(self, rho: float) -> None:
        if rho > self.p_max:
            raise ValueError(f"cutoff rho={rho} exceeds lattice radius p_max={self.p_max}")

    def same_as(self, other: "FourierGrid") -> bool:
        return self is other or (
            self.dim == other.dim and self.n_p == other.n_p and self.p_max == other.p_max
        )


def fourier_grid(dom: Domain | int, p_max: float, n_p: int) -> FourierGrid:
    """Lattice ``p = dp * j`` with ``|j_i| <= (n_p - 1) / 2`` and ``dp = 2 p_max / n_p``."""
    d = dom if isinstance(dom, int) else dom.dim
    if n_p % 2 == 0 or n_p < 1:
        raise ValueError(f"n_p must be a positive odd integer, got {n_p}")
    if not p_max > 0:
        raise ValueError(f"p_max must be positive, got {p_max}")
    dp = 2.0 * p_max / n_p
    half = (n_p - 1) // 2
    ax = dp * np.arange(-half, half + 1)
    grids = np.meshgrid(*([ax] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    return FourierGrid(dim=d, p_max=float(p_max), n_p=n_p, dp=dp, points=_frozen(pts))
