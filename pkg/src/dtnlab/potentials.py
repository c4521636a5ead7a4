"""Synthetic potentials, the W^{m,1} norm and the Fourier pair.

Conventions::

    vhat(p) = (2 pi)^-d  sum_x exp(+i p.x) v(x) h^d
    w(x)    =            sum_{|p|<rho} exp(-i p.x) vhat(p) dp^d

so the inverse carries no ``(2 pi)^-d`` factor.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from itertools import product
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .grid_domain import Domain, FourierGrid

KINDS = ("gaussian_bump", "compact_bump", "sum")
SUPPORT_EPS = 1e-12  # relative to |A|
MARGIN_CELLS = 2
TAPER_FRACTION = 0.1  # width of the Gaussian taper band, as a fraction of side
GAUSSIAN_EDGE_LIMIT = 0.1  # untapered Gaussian at the margin must stay below this * |A|


class SupportError(ValueError):
    """Potential does not vanish near the boundary."""

    def __init__(self, message: str, node: np.ndarray | None = None):
        super().__init__(message)
        self.node = node


@dataclass(frozen=True)
class PotentialSpec:
    """Recipe for a synthetic potential.

    ``gaussian_bump`` is ``A exp(-|x - x0|^2 / width^2)`` multiplied by a smooth
    window that vanishes in the boundary margin.  ``compact_bump`` is
    ``A exp(1 - 1 / (1 - r^2/width^2))`` (C-infinity) when ``order`` is None and
    ``A (1 - r^2/width^2)_+^order`` otherwise; both have support ``r < width``.
    """

    kind: str
    amplitude: float = 0.0
    center: tuple[float, ...] = ()
    width: float = 0.1
    order: int | None = None
    components: tuple["PotentialSpec", ...] = ()
    smoothness: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}; expected one of {KINDS}")
        if self.kind != "sum" and not self.width > 0:
            raise ValueError(f"width must be positive, got {self.width}")
        if self.order is not None and self.order < 1:
            raise ValueError(f"order must be >= 1, got {self.order}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "components", tuple(self.components))

    def scaled(self, factor: float) -> "PotentialSpec":
        if self.kind == "sum":
            return replace(self, components=tuple(c.scaled(factor) for c in self.components))
        return replace(self, amplitude=self.amplitude * factor)

    def nominal_smoothness(self, d: int) -> int:
        if self.smoothness is not None:
            return self.smoothness
        if self.kind == "sum":
            return min(c.nominal_smoothness(d) for c in self.components)
        if self.kind == "compact_bump" and self.order is not None:
            return self.order
        return d + 2

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "sum":
            out["components"] = [c.to_dict() for c in self.components]
        else:
            out.update(amplitude=self.amplitude, center=list(self.center), width=self.width)
            if self.order is not None:
                out["order"] = self.order
        if self.smoothness is not None:
            out["smoothness"] = self.smoothness
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "PotentialSpec":
        allowed = {"kind", "amplitude", "center", "width", "order", "components", "smoothness"}
        extra = set(data) - allowed
        if extra:
            raise ValueError(f"unknown potential keys: {sorted(extra)}")
        data = dict(data)
        comps = tuple(cls.from_dict(c) for c in data.pop("components", ()))
        return cls(components=comps, **{k: tuple(v) if k == "center" else v for k, v in data.items()})


def gaussian_bump(amplitude, center, width, **kw) -> PotentialSpec:
    return PotentialSpec("gaussian_bump", amplitude, tuple(center), width, **kw)


def compact_bump(amplitude, center, width, order=None, **kw) -> PotentialSpec:
    return PotentialSpec("compact_bump", amplitude, tuple(center), width, order=order, **kw)


def potential_sum(*components: PotentialSpec, **kw) -> PotentialSpec:
    return PotentialSpec("sum", components=tuple(components), **kw)


@dataclass(frozen=True, eq=False)
class Potential:
    """Real potential sampled at the cell centres of ``domain`` (zero outside)."""

    domain: Domain
    values: np.ndarray
    m: int
    spec: PotentialSpec | None = field(default=None)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).reshape(self.domain.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("potential values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def is_zero(self) -> bool:
        return not np.any(self.values)

    def support(self) -> np.ndarray:
        """Flat indices of nodes where v is nonzero."""
        return np.flatnonzero(self.flat)

    def __add__(self, other: "Potential") -> "Potential":
        _check_same(self, other)
        return Potential(self.domain, self.values + other.values, min(self.m, other.m))

    def __sub__(self, other: "Potential") -> "Potential":
        _check_same(self, other)
        return Potential(self.domain, self.values - other.values, min(self.m, other.m))

    def __mul__(self, c: float) -> "Potential":
        return Potential(self.domain, c * self.values, self.m)

    __rmul__ = __mul__

    def save_csv(self, path: str | Path) -> None:
        d = self.domain.dim
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i + 1}" for i in range(d)] + ["value"])
            for x, val in zip(self.domain.nodes, self.flat):
                w.writerow([repr(float(c)) for c in x] + [repr(float(val))])

    @classmethod
    def load_csv(cls, path: str | Path, domain: Domain, m: int | None = None) -> "Potential":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if data.shape != (domain.num_nodes, domain.dim + 1):
            raise ValueError(f"{path}: expected {domain.num_nodes} rows of {domain.dim + 1} columns")
        if not np.allclose(data[:, :-1], domain.nodes, atol=1e-12 * domain.side):
            raise ValueError(f"{path}: node coordinates do not match the domain")
        return cls(domain, data[:, -1], m if m is not None else domain.dim + 2)


def _check_same(a: Potential, b: Potential) -> None:
    if not a.domain.same_as(b.domain):
        raise ValueError("potentials live on different domains")


def zero_potential(dom: Domain, m: int | None = None) -> Potential:
    return Potential(dom, np.zeros(dom.shape), m if m is not None else dom.dim + 2)


def _smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        f = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        g = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return f / (f + g)


def _margin_edge(dom: Domain) -> float:
    # nodes with |x_i| >= edge lie within MARGIN_CELLS of the boundary
    return dom.side / 2 - MARGIN_CELLS * dom.h


def _taper(dom: Domain, coords: Sequence[np.ndarray]) -> np.ndarray:
    b = _margin_edge(dom)
    a = b - TAPER_FRACTION * dom.side
    w = np.ones_like(coords[0])
    for c in coords:
        w = w * _smooth_step((b - np.abs(c)) / (b - a))
    return w


def _raw_component(spec: PotentialSpec, coords: Sequence[np.ndarray]) -> np.ndarray:
    r2 = sum((c - x0) ** 2 for c, x0 in zip(coords, spec.center)) / spec.width**2
    if spec.kind == "gaussian_bump":
        return spec.amplitude * np.exp(-r2)
    inside = r2 < 1.0
    safe = np.where(inside, r2, 0.0)
    if spec.order is None:
        vals = np.exp(1.0 - 1.0 / (1.0 - safe))
    else:
        vals = (1.0 - safe) ** spec.order
    return np.where(inside, spec.amplitude * vals, 0.0)


def _sample_component(spec: PotentialSpec, dom: Domain) -> np.ndarray:
    if len(spec.center) != dom.dim:
        raise ValueError(f"center {spec.center} does not have dimension {dom.dim}")
    coords = dom.grid()
    raw = _raw_component(spec, coords)
    if spec.amplitude == 0:
        return np.zeros(dom.shape)
    edge = _margin_edge(dom)
    in_margin = np.zeros(dom.shape, dtype=bool)
    for c in coords:
        in_margin |= np.abs(c) >= edge - 1e-12 * dom.side
    if spec.kind == "compact_bump":
        bad = in_margin & (np.abs(raw) > 0)
        if np.any(bad):
            i = np.argmax(np.where(bad, np.abs(raw), -1.0))
            node = dom.nodes[i]
            raise SupportError(
                f"compact_bump support reaches the boundary margin at node {node.tolist()}", node
            )
        return raw
    core = edge - TAPER_FRACTION * dom.side
    if any(abs(x0) >= core for x0 in spec.center):
        raise SupportError(f"gaussian_bump centre {list(spec.center)} lies in the taper band", np.array(spec.center))
    edge_vals = np.where(in_margin, np.abs(raw), 0.0)
    if edge_vals.max() > GAUSSIAN_EDGE_LIMIT * abs(spec.amplitude):
        i = int(np.argmax(edge_vals))
        node = dom.nodes[i]
        raise SupportError(
            f"gaussian_bump too wide for the domain: value {edge_vals.flat[i]:.3g} at margin node {node.tolist()}",
            node,
        )
    vals = raw * _taper(dom, coords)
    vals[np.abs(vals) < SUPPORT_EPS * abs(spec.amplitude)] = 0.0
    return vals


def sample_potential(spec: PotentialSpec, dom: Domain) -> Potential:
    """Sample ``spec`` on the cell centres of ``dom``.

    Raises
    ------
    SupportError
        If the potential would not vanish within two cells of the boundary.
    """
    m = spec.nominal_smoothness(dom.dim)
    if m <= dom.dim:
        raise ValueError(f"smoothness m={m} must exceed the dimension d={dom.dim}")
    if spec.kind == "sum":
        vals = np.zeros(dom.shape)
        for comp in spec.components:
            vals = vals + _sample_component(comp, dom)
    else:
        vals = _sample_component(spec, dom)
    return Potential(dom, vals, m, spec)


def fd_weights(order: int) -> np.ndarray:
    """Second-order central difference weights for the ``order``-th derivative.

    Stencil offsets are ``-q..q`` with ``q = (order + 1) // 2`` (unit spacing).
    """
    if order == 0:
        return np.array([1.0])
    q = (order + 1) // 2
    offs = np.arange(-q, q + 1, dtype=float)
    # moments sum_j w_j s_j^k = k! delta_{k,order} for k < 2q + 1
    V = np.vander(offs, 2 * q + 1, increasing=True).T
    rhs = np.zeros(2 * q + 1)
    rhs[order] = math.factorial(order)
    return np.linalg.solve(V, rhs)


def _derivative(vals: np.ndarray, J: Sequence[int], h: float) -> np.ndarray:
    out = vals
    for ax, j in enumerate(J):
        if j == 0:
            continue
        w = fd_weights(j) / h**j
        q = (len(w) - 1) // 2
        pad = [(0, 0)] * out.ndim
        pad[ax] = (q, q)
        padded = np.pad(out, pad)
        n_ax = out.shape[ax] + 2 * q
        acc = np.zeros_like(padded)
        for k, wk in enumerate(w):
            s = k - q
            # acc[i] += w_k * padded[i + s]
            src = [slice(None)] * out.ndim
            dst = [slice(None)] * out.ndim
            src[ax] = slice(max(s, 0), n_ax + min(s, 0))
            dst[ax] = slice(max(-s, 0), n_ax - max(s, 0))
            acc[tuple(dst)] += wk * padded[tuple(src)]
        out = acc
    return out


def multi_indices(d: int, m: int):
    for J in product(range(m + 1), repeat=d):
        if sum(J) <= m:
            yield J


def norm_w_m1(v: Potential, m: int | None = None) -> float:
    """Discrete ``max_{|J|<=m} ||d^J v||_{L^1}`` with zero extension outside D."""
    m = v.m if m is None else m
    if m < 0:
        raise ValueError("order m must be non-negative")
    dom = v.domain
    if 2 * ((m + 1) // 2) + 1 > dom.n:
        raise ValueError(f"order m={m} too large for resolution n={dom.n}")
    best = 0.0
    vol = dom.cell_volume
    for J in multi_indices(dom.dim, m):
        best = max(best, float(np.sum(np.abs(_derivative(v.values, J, dom.h))) * vol))
    return best


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Complex values of ``vhat`` at the nodes of a FourierGrid."""

    grid: FourierGrid
    values: np.ndarray

    def __sub__(self, other: "Spectrum") -> "Spectrum":
        if not self.grid.same_as(other.grid):
            raise ValueError("spectra live on different lattices")
        return Spectrum(self.grid, self.values - other.values)

    def hermitian_defect(self) -> float:
        """``max |vhat(-p) - conj(vhat(p))| / max |vhat|``."""
        neg = self.values[self.grid.index_of_negative()]
        scale = max(np.max(np.abs(self.values)), np.finfo(float).tiny)
        return float(np.max(np.abs(neg - np.conj(self.values))) / scale)


def _phase_matrices(freqs: np.ndarray, axis: np.ndarray, sign: int) -> np.ndarray:
    return np.exp(sign * 1j * np.outer(freqs, axis))


def fourier_transform(v: Potential, fg: FourierGrid) -> Spectrum:
    """``vhat(p) = (2 pi)^-d sum_x exp(i p.x) v(x) h^d`` on the lattice."""
    dom = v.domain
    if fg.dim != dom.dim:
        raise ValueError("lattice and domain dimensions differ")
    half = (fg.n_p - 1) // 2
    freqs = fg.dp * np.arange(-half, half + 1)
    E = _phase_matrices(freqs, dom.axis, +1)
    out = v.values.astype(complex)
    # contract one spatial axis at a time against the separable phase
    for _ in range(dom.dim):
        out = np.tensordot(out, E, axes=([0], [1]))
    vals = out.ravel() * dom.cell_volume / (2 * np.pi) ** dom.dim
    return Spectrum(fg, vals)


class Inversion(NamedTuple):
    values: np.ndarray
    imag: float  # max |Im w|


def ball_mask(fg: FourierGrid, rho: float) -> np.ndarray:
    """Lattice nodes with ``|p| < rho`` (open ball)."""
    return fg.norms < rho


def inverse_fourier(s: Spectrum, points: Domain | np.ndarray, rho: float) -> Inversion:
    """Truncated inversion ``sum_{|p|<rho} exp(-i p.x) vhat(p) dp^d``.

    ``points`` is either a Domain (evaluated on its cell centres, returned in
    grid shape) or an ``(N, d)`` array of points.
    """
    fg = s.grid
    fg.check_cutoff(rho)
    if rho < 0:
        raise ValueError("cutoff must be non-negative")
    coeff = np.where(ball_mask(fg, rho), s.values, 0.0) * fg.weight
    if isinstance(points, Domain):
        if points.dim != fg.dim:
            raise ValueError("lattice and domain dimensions differ")
        half = (fg.n_p - 1) // 2
        freqs = fg.dp * np.arange(-half, half + 1)
        E = _phase_matrices(freqs, points.axis, -1)
        out = coeff.reshape(fg.shape)
        for _ in range(fg.dim):
            out = np.tensordot(out, E, axes=([0], [0]))
    else:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        keep = np.flatnonzero(coeff)
        out = np.exp(-1j * pts @ fg.points[keep].T) @ coeff[keep]
    return Inversion(np.real(out), float(np.max(np.abs(np.imag(out)), initial=0.0)))
