"""Complex frequencies on k.k = 0, the Faddeev Green function and amplitude h.

The Green function is synthesised from the symbol of the grid Laplacian,

    g(x, k) = -(M h)^-d  sum_xi exp(i xi.x) / s_h(xi + k),
    s_h(eta) = sum_i (4 / h^2) sin^2(eta_i h / 2),

over an offset frequency lattice filling one Brillouin zone (|xi_i| <= pi/h)
with spacing 2 pi / (M h).  Because the symbol is the grid Laplacian's own,
``Lap_h (exp(ik.x) g) = delta_h`` holds on the grid up to rounding (and the
cell-averaged modes near the symbol's real zero set in d = 3).  The table is
stored on the half-step lattice (spacing h/2) so that cell centres and face
midpoints can be paired.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
import scipy.sparse.linalg as spla

from .grid_domain import Domain
from .potentials import Potential

logger = logging.getLogger(__name__)

VARIETY_TOL = 1e-12
TOL_G = 1e-3
TOL_LS = 1e-8
DENOM_TOL_FACTOR = 1e-8
POINTS_PER_WAVELENGTH = 6
DEFAULT_PAD = 4
MU_BOUND = 1.5


class VarietyError(ValueError):
    """Frequency not on the variety or pair not in Theta."""


class ResolutionError(ValueError):
    """|Im k| too large for the grid."""


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


# ---------------------------------------------------------------------------
# frequencies


@dataclass(frozen=True, eq=False)
class ComplexFrequency:
    """``k = a + i b`` with ``k.k = 0`` (``|a| = |b|``, ``a.b = 0``)."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        b = np.array(self.b, dtype=float)
        if a.shape != b.shape or a.ndim != 1:
            raise VarietyError("real and imaginary parts must be vectors of equal length")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if self.defect() > VARIETY_TOL:
            raise VarietyError(f"k.k = {self.square()} is not zero (relative defect {self.defect():.2e})")

    @property
    def k(self) -> np.ndarray:
        return self.a + 1j * self.b

    @property
    def dim(self) -> int:
        return len(self.a)

    @property
    def rho(self) -> float:
        return float(np.linalg.norm(self.b))

    def square(self) -> complex:
        return complex(np.sum(self.k * self.k))

    def defect(self) -> float:
        scale = float(self.a @ self.a + self.b @ self.b)
        if scale == 0.0:
            return 0.0
        return abs(self.square()) / scale

    def __neg__(self) -> "ComplexFrequency":
        return ComplexFrequency(-self.a, -self.b)

    def matches(self, other: "ComplexFrequency") -> bool:
        return bool(np.array_equal(self.a, other.a) and np.array_equal(self.b, other.b))

    def plane_wave(self, x: np.ndarray) -> np.ndarray:
        return np.exp(1j * (np.asarray(x) @ self.k))


@dataclass(frozen=True, eq=False)
class ThetaPair:
    """``(k, l)`` with ``Im k = Im l``; ``p = k - l`` is real."""

    k: ComplexFrequency
    l: ComplexFrequency

    def __post_init__(self):
        if not np.array_equal(self.k.b, self.l.b):
            raise VarietyError("Im k and Im l differ")

    @property
    def p(self) -> np.ndarray:
        return self.k.a - self.l.a

    @property
    def rho(self) -> float:
        return self.k.rho


def gamma_direction(p: np.ndarray) -> np.ndarray:
    """Unit vector orthogonal to ``p``.

    d=2: ``p/|p|`` rotated counterclockwise by pi/2.  d=3: normalised
    ``e_j x p`` with ``e_j`` the basis vector least aligned with ``p``
    (smallest index on ties).
    """
    p = np.asarray(p, dtype=float)
    r = np.linalg.norm(p)
    if r == 0:
        raise ValueError("gamma(p) is undefined at p = 0")
    u = p / r
    if len(p) == 2:
        return np.array([-u[1], u[0]])
    if len(p) == 3:
        j = int(np.argmin(np.abs(u)))
        e = np.zeros(3)
        e[j] = 1.0
        g = np.cross(e, u)
        g = g / np.linalg.norm(g)
        # strip rounding so that gamma . p vanishes to the last bit
        g = g - (g @ u) * u
        return g / np.linalg.norm(g)
    raise ValueError(f"unsupported dimension {len(p)}")


def born_pair(p: Sequence[float], orientation: int = 1) -> ThetaPair:
    """``k = p/2 + i|p|/2 gamma(p)``, ``l = -p/2 + i|p|/2 gamma(p)``."""
    p = np.asarray(p, dtype=float)
    if orientation not in (1, -1):
        raise ValueError("orientation must be +1 or -1")
    r = float(np.linalg.norm(p))
    if r == 0.0:
        z = np.zeros_like(p)
        return ThetaPair(ComplexFrequency(z, z), ComplexFrequency(z, z))
    b = orientation * (r / 2) * gamma_direction(p)
    return ThetaPair(ComplexFrequency(p / 2, b), ComplexFrequency(-p / 2, b))


def theta_pair_3d(
    p: Sequence[float], rho: float, frame: tuple[Sequence[float], Sequence[float]] | None = None
) -> ThetaPair:
    """Pair with ``Im k = Im l = rho eta1`` and ``Re k = p/2 + t eta2``.

    ``t = sqrt(rho^2 - |p|^2/4)``.  In d=2 the variety forces ``rho = |p|/2``.
    """
    p = np.asarray(p, dtype=float)
    half = float(np.linalg.norm(p)) / 2
    if rho < half * (1 - 1e-12):
        raise VarietyError(f"rho={rho} is below |p|/2={half}")
    if len(p) == 2:
        if rho > half * (1 + 1e-12) + 1e-15:
            raise VarietyError(
                f"variety rigidity: in d=2 a Theta pair with k-l=p has |Im k| = |p|/2 = {half}, not {rho}"
            )
        return born_pair(p)
    if len(p) != 3:
        raise ValueError(f"unsupported dimension {len(p)}")
    if frame is None:
        if half == 0:
            eta1 = np.array([1.0, 0.0, 0.0])
            eta2 = np.array([0.0, 1.0, 0.0])
        else:
            eta1 = gamma_direction(p)
            eta2 = np.cross(p / (2 * half), eta1)
    else:
        eta1, eta2 = (np.asarray(f, dtype=float) for f in frame)
        checks = [eta1 @ eta1 - 1, eta2 @ eta2 - 1, eta1 @ eta2, eta1 @ p, eta2 @ p]
        if max(abs(c) for c in checks) > 1e-12 * max(1.0, half):
            raise VarietyError("frame must be orthonormal and orthogonal to p")
    t = math.sqrt(max(rho**2 - half**2, 0.0))
    b = rho * eta1
    return ThetaPair(ComplexFrequency(p / 2 + t * eta2, b), ComplexFrequency(-p / 2 + t * eta2, b))


# ---------------------------------------------------------------------------
# Green function


def grid_symbol(eta: np.ndarray, h: float) -> np.ndarray:
    """Symbol of ``-Lap_h`` at (complex) frequencies ``eta`` (last axis = components)."""
    return np.sum((4.0 / h**2) * np.sin(eta * (h / 2)) ** 2, axis=-1)


def _symbol_grad(eta: np.ndarray, h: float) -> np.ndarray:
    return (2.0 / h) * np.sin(eta * h)


def resolvable_rho(dom: Domain) -> float:
    """Largest |Im k| with at least ``POINTS_PER_WAVELENGTH`` cells per oscillation."""
    return 2 * math.pi / (POINTS_PER_WAVELENGTH * dom.h)


def _planar_zeros(k: np.ndarray, h: float) -> list[np.ndarray]:
    """Real zeros of the symbol near 0 and -2 Re k (d = 2), by Newton."""
    out = []
    for guess in (np.zeros(2), -2 * k.real):
        xi = guess.astype(float)
        for _ in range(50):
            s = grid_symbol(xi + k, h)
            g = _symbol_grad(xi + k, h)
            J = np.array([g.real, g.imag])
            try:
                step = np.linalg.solve(J, [s.real, s.imag])
            except np.linalg.LinAlgError:
                break
            xi = xi - step
            if np.linalg.norm(step) < 1e-14 * (1 + np.linalg.norm(xi)):
                break
        out.append(xi)
    return out


def _lattice_distance(xi: np.ndarray, theta: np.ndarray, dxi: float) -> float:
    u = np.mod(xi / dxi - theta, 1.0)
    return float(np.linalg.norm(np.minimum(u, 1.0 - u))) * dxi


@dataclass(frozen=True, eq=False)
class GreenTable:
    """Samples of ``g(x, k)`` for ``x`` on the half-step lattice ``(h/2) Z^d``.

    ``values[m + 2n]`` holds ``g((h/2) m)`` for ``|m_i| <= 2n``.
    """

    k: ComplexFrequency
    domain: Domain
    values: np.ndarray
    pad: int
    offset: np.ndarray
    residual: float
    singular_residual: float
    averaged_modes: int
    conv_hat: np.ndarray = field(repr=False)

    @property
    def half(self) -> int:
        return 2 * self.domain.n

    def g_at(self, diff: np.ndarray) -> np.ndarray:
        """``g`` at difference vectors (last axis = components) on the half lattice."""
        diff = np.asarray(diff, dtype=float)
        m = 2.0 * diff / self.domain.h
        mi = np.rint(m)
        if np.any(np.abs(m - mi) > 1e-6):
            raise ValueError("difference vectors are not on the half-step lattice")
        mi = mi.astype(np.int64) + self.half
        if np.any(mi < 0) or np.any(mi >= self.values.shape[0]):
            raise ValueError("difference vector outside the Green table")
        return self.values[tuple(np.moveaxis(mi, -1, 0))]

    def g_between(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Matrix ``g(X_i - Y_j)``."""
        return self.g_at(np.asarray(X)[:, None, :] - np.asarray(Y)[None, :, :])

    def G_between(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Matrix ``G(X_i - Y_j, k) = exp(ik.(X_i - Y_j)) g(X_i - Y_j)``."""
        X, Y = np.asarray(X), np.asarray(Y)
        phase = np.exp(1j * (X @ self.k.k))[:, None] * np.exp(-1j * (Y @ self.k.k))[None, :]
        return phase * self.g_between(X, Y)

    def convolve(self, f: np.ndarray) -> np.ndarray:
        """``(T f)(x) = sum_y g(x - y) f(y) h^d`` over cell centres (grid-shaped)."""
        dom = self.domain
        n = dom.n
        F = np.fft.fftn(f, s=(2 * n,) * dom.dim, axes=tuple(range(dom.dim)))
        out = np.fft.ifftn(F * self.conv_hat)
        return out[(slice(0, n),) * dom.dim]


def _cell_average(centers: np.ndarray, k: np.ndarray, h: float, dxi: float, q: int) -> np.ndarray:
    """Average of ``1 / s_h(xi + k)`` over lattice cells (q^d midpoint sub-samples)."""
    d = centers.shape[1]
    sub = (np.arange(q) + 0.5) / q - 0.5
    offs = np.stack([g.ravel() for g in np.meshgrid(*([sub] * d), indexing="ij")], axis=1) * dxi
    out = np.empty(len(centers), dtype=complex)
    chunk = max(1, 200000 // len(offs))
    for s in range(0, len(centers), chunk):
        pts = centers[s : s + chunk, None, :] + offs[None, :, :]
        out[s : s + chunk] = np.mean(1.0 / grid_symbol(pts + k, h), axis=1)
    return out


def faddeev_green(k: ComplexFrequency, dom: Domain, pad: int = DEFAULT_PAD) -> GreenTable:
    """Tabulate the Faddeev Green function ``g(., k)`` for ``dom``.

    Raises
    ------
    ResolutionError
        If ``|Im k|`` exceeds the resolvability bound of the grid or is zero.
    """
    if k.dim != dom.dim:
        raise ValueError("frequency and domain dimensions differ")
    rho = k.rho
    if rho == 0.0:
        raise ResolutionError("the Faddeev Green function needs Im k != 0")
    if rho > resolvable_rho(dom):
        raise ResolutionError(
            f"|Im k|={rho:.3g} exceeds the resolvable bound {resolvable_rho(dom):.3g} for n={dom.n}"
        )
    d, n, h = dom.dim, dom.n, dom.h
    M = 2 * ((pad * n + 1) // 2)
    if M < 2 * n + 2:
        raise ValueError("pad too small: the periodic box must exceed twice the domain")
    dxi = 2 * math.pi / (M * h)
    denom_tol = DENOM_TOL_FACTOR * (math.pi / h) ** 2
    kk = k.k
    j = np.arange(-M // 2, M // 2)

    theta = np.full(d, 0.5)
    if d == 2:
        zeros = _planar_zeros(kk, h)
        if min(_lattice_distance(z, theta, dxi) for z in zeros) < 0.25 * dxi:
            # place each real zero mid-way between lattice lines along one axis
            theta = np.array([np.mod(zeros[0][0] / dxi - 0.5, 1.0), np.mod(zeros[1][1] / dxi - 0.5, 1.0)])
            if min(_lattice_distance(z, theta, dxi) for z in zeros) < 0.25 * dxi:
                theta = np.array([np.mod(zeros[0][0] / dxi - 0.5, 1.0), np.mod(zeros[0][1] / dxi, 1.0)])
    W = None
    averaged = 0
    for attempt in range(4):
        axes = [dxi * (j + t) for t in theta]
        XI = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        S = grid_symbol(XI + kk, h)
        if np.min(np.abs(S)) >= denom_tol:
            break
        logger.info("symbol near-zero on the lattice (attempt %d); re-offsetting", attempt)
        theta = np.mod(theta + 0.1 * (attempt + 1) * np.sqrt(np.arange(2, d + 2)), 1.0)
    else:
        raise ResolutionError("frequency lattice hits a near-zero of the symbol after 3 re-offsets")
    W = 1.0 / S
    if d == 3:
        near = np.abs(S) < 2.0 * rho * 1.5 * dxi
        averaged = int(near.sum())
        if averaged:
            W[near] = _cell_average(XI[near], kk, h, dxi, q=8)

    # synthesis on the half-step lattice via a length-2M transform per axis
    arr = np.zeros((2 * M,) * d, dtype=complex)
    arr[tuple(np.meshgrid(*([np.mod(j, 2 * M)] * d), indexing="ij"))] = W
    Ssum = np.fft.ifftn(arr) * (2 * M) ** d
    mr = np.arange(-2 * n, 2 * n + 1)
    mgrid = np.meshgrid(*([mr] * d), indexing="ij")
    idx = tuple(np.mod(m, 2 * M) for m in mgrid)
    phase = np.exp(1j * math.pi * sum(t * m for t, m in zip(theta, mgrid)) / M)
    g = -(phase * Ssum[idx]) / (M * h) ** d

    # stencil identity on the cell-centre coset, in the exp(-ik.x)-normalised form
    cc = g[(slice(0, None, 2),) * d]  # integer steps, index i <-> (i - n) h
    lap = -2.0 * d * cc[(slice(1, -1),) * d]
    for ax in range(d):
        up = [slice(1, -1)] * d
        dn = [slice(1, -1)] * d
        up[ax] = slice(2, None)
        dn[ax] = slice(0, -2)
        lap = lap + np.exp(1j * kk[ax] * h) * cc[tuple(up)] + np.exp(-1j * kk[ax] * h) * cc[tuple(dn)]
    lap = lap * h ** (d - 2)  # h^d * (1/h^2) * stencil
    centre = (n - 1,) * d
    singular = abs(lap[centre] - 1.0)
    lap[centre] = 0.0
    residual = float(np.max(np.abs(lap)))
    if residual > TOL_G:
        logger.warning("Green identity residual %.2e exceeds %.0e (|Im k|=%.3g)", residual, TOL_G, rho)

    # circulant kernel for cell-centre convolution, size 2n per axis
    ker = np.zeros((2 * n,) * d, dtype=complex)
    ir = np.arange(-(n - 1), n)
    src = tuple(np.meshgrid(*([2 * ir + 2 * n] * d), indexing="ij"))
    dst = tuple(np.meshgrid(*([np.mod(ir, 2 * n)] * d), indexing="ij"))
    ker[dst] = g[src]
    conv_hat = np.fft.fftn(ker) * h**d

    for a in (g, conv_hat, theta):
        a.setflags(write=False)
    return GreenTable(
        k=k,
        domain=dom,
        values=g,
        pad=pad,
        offset=theta,
        residual=residual,
        singular_residual=float(singular),
        averaged_modes=averaged,
        conv_hat=conv_hat,
    )


# ---------------------------------------------------------------------------
# Lippmann-Schwinger equation in mu form


@dataclass(frozen=True, eq=False)
class FaddeevField:
    """``mu(x, k)`` on the cell centres; ``psi = exp(ik.x) mu``."""

    k: ComplexFrequency
    mu: np.ndarray
    residual: float
    iterations: int
    method: str

    def psi(self, dom: Domain) -> np.ndarray:
        return self.k.plane_wave(dom.nodes).reshape(dom.shape) * self.mu

    @property
    def sup_deviation(self) -> float:
        return float(np.max(np.abs(self.mu - 1.0)))


def _ls_apply(table: GreenTable, v: np.ndarray, mu: np.ndarray) -> np.ndarray:
    return mu - table.convolve(v * mu)


def solve_ls(
    table: GreenTable, v: np.ndarray, rhs: np.ndarray, tol: float = TOL_LS, maxiter: int = 500
) -> tuple[np.ndarray, float, int, str]:
    """Solve ``u - T(v u) = rhs`` on the grid; returns (u, max residual, iterations, method)."""
    shape = v.shape
    size = v.size
    if not np.any(v):
        return rhs.astype(complex), 0.0, 0, "trivial"

    def residual_of(u):
        return float(np.max(np.abs(_ls_apply(table, v, u) - rhs)))

    # contraction estimate of f -> T(v f) by a few power steps
    rng = np.random.default_rng(0)
    z = rng.standard_normal(shape) + 0j
    est = 0.0
    for _ in range(6):
        z2 = table.convolve(v * z)
        est = np.linalg.norm(z2) / max(np.linalg.norm(z), 1e-300)
        z = z2 / max(np.linalg.norm(z2), 1e-300)
    scale = max(float(np.max(np.abs(rhs))), 1e-300)
    if est < 0.5:
        u = rhs.astype(complex)
        for it in range(1, maxiter + 1):
            u = rhs + table.convolve(v * u)
            res = residual_of(u)
            if res <= tol * scale * 1e-2 or res <= 1e-15:
                return u, res, it, "neumann"
        # fall through to Krylov if the series stalls

    op = spla.LinearOperator(
        (size, size), matvec=lambda x: _ls_apply(table, v, x.reshape(shape)).ravel(), dtype=complex
    )
    counter = {"n": 0}

    def cb(_):
        counter["n"] += 1

    u = rhs.astype(complex).ravel()
    res = np.inf
    for _ in range(5):
        b = rhs.ravel() - op.matvec(u)
        bn = np.linalg.norm(b)
        if bn == 0:
            res = 0.0
            break
        du, info = spla.gmres(
            op, b, rtol=min(1e-3, tol * 1e-2 * scale * math.sqrt(1.0 / size) / bn * math.sqrt(size)),
            atol=0.0, restart=60, maxiter=maxiter, callback=cb, callback_type="pr_norm",
        )
        u = u + du
        res = residual_of(u.reshape(shape))
        if res <= tol * scale * 1e-2:
            break
    if res > tol * scale:
        raise ConvergenceError(f"Lippmann-Schwinger solve stalled at residual {res:.2e}", res)
    return u.reshape(shape), res, counter["n"], "gmres"


def lippmann_schwinger(v: Potential, k: ComplexFrequency, table: GreenTable) -> FaddeevField:
    """Solve ``mu = 1 + T(v mu)``, the mu form of ``psi = e^{ikx} + G * (v psi)``."""
    if not k.matches(table.k):
        raise ValueError("Green table was built for a different frequency")
    if not v.domain.same_as(table.domain):
        raise ValueError("potential and Green table live on different domains")
    mu, res, its, method = solve_ls(table, v.values, np.ones(v.domain.shape, dtype=complex))
    return FaddeevField(k=k, mu=mu, residual=res, iterations=its, method=method)


def mu_at(points: np.ndarray, v: Potential, field_: FaddeevField, table: GreenTable) -> np.ndarray:
    """Evaluate ``mu(x) = 1 + sum_y g(x - y) v(y) mu(y) h^d`` at half-lattice points."""
    dom = v.domain
    supp = v.support()
    src = (v.flat * field_.mu.ravel())[supp] * dom.cell_volume
    out = np.ones(len(points), dtype=complex)
    step = max(1, 4_000_000 // max(len(supp), 1))
    for s in range(0, len(points), step):
        out[s : s + step] += table.g_between(points[s : s + step], dom.nodes[supp]) @ src
    return out


def psi_trace(v: Potential, field_: FaddeevField, table: GreenTable) -> np.ndarray:
    """``psi(x, k)`` at the boundary face midpoints."""
    b = v.domain.boundary
    return field_.k.plane_wave(b) * mu_at(b, v, field_, table)


class ScatteringSample(NamedTuple):
    pair: ThetaPair
    h: complex


def amplitude_h(v: Potential, field_: FaddeevField, pair: ThetaPair) -> ScatteringSample:
    """``h(k, l) = (2 pi)^-d sum_x exp(-i l.x) v(x) psi(x, k) h^d``.

    Computed as ``(2 pi)^-d sum_x exp(i p.x) v mu h^d`` (``p = k - l`` real).
    """
    if not pair.k.matches(field_.k):
        raise ValueError("field was computed at a different k than pair.k")
    dom = v.domain
    phase = np.exp(1j * (dom.nodes @ pair.p))
    val = np.sum(phase * v.flat * field_.mu.ravel()) * dom.cell_volume / (2 * np.pi) ** dom.dim
    return ScatteringSample(pair, complex(val))


def vhat_at(v: Potential, p: np.ndarray) -> complex:
    """Fourier transform ``(2 pi)^-d sum_x exp(i p.x) v(x) h^d`` at a single p."""
    dom = v.domain
    return complex(np.sum(np.exp(1j * (dom.nodes @ np.asarray(p))) * v.flat) * dom.cell_volume / (2 * np.pi) ** dom.dim)


# ---------------------------------------------------------------------------
# asymptotics


class DecayRow(NamedTuple):
    rho: float
    sup_mu_dev: float
    sup_mu: float
    h_gap: float
    h: complex
    vhat: complex


@dataclass
class DecayTable:
    p: np.ndarray
    rows: list[DecayRow]

    @property
    def rhos(self) -> np.ndarray:
        return np.array([r.rho for r in self.rows])

    def slope(self, column: str = "h_gap") -> float:
        """Least-squares log-log slope of a column against rho."""
        y = np.array([getattr(r, column) for r in self.rows])
        return float(np.polyfit(np.log(self.rhos), np.log(y), 1)[0])

    def rho_bound(self, c: float = MU_BOUND) -> float | None:
        """Smallest tested rho from which on sup|mu| <= c holds."""
        ok = None
        for r in sorted(self.rows, key=lambda r: -r.rho):
            if r.sup_mu <= c:
                ok = r.rho
            else:
                break
        return ok

    def to_rows(self) -> list[dict]:
        return [
            {"rho": r.rho, "sup_mu_dev": r.sup_mu_dev, "h_gap": r.h_gap, "h_re": r.h.real, "h_im": r.h.imag}
            for r in self.rows
        ]


def asymptotic_diagnostic(
    v: Potential, p: Sequence[float], rhos: Sequence[float], pad: int = DEFAULT_PAD
) -> DecayTable:
    """Tabulate ``(rho, sup|mu - 1|, |h(k,l) - vhat(p)|)`` along Theta pairs with ``k - l = p``."""
    p = np.asarray(p, dtype=float)
    dom = v.domain
    if dom.dim == 2 and any(r > np.linalg.norm(p) / 2 * (1 + 1e-12) for r in rhos):
        raise VarietyError("variety rigidity: d=2 only admits rho = |p|/2")
    vh = vhat_at(v, p)
    rows = []
    for rho in rhos:
        pair = theta_pair_3d(p, rho) if dom.dim == 3 else born_pair(p)
        if v.is_zero():
            rows.append(DecayRow(float(rho), 0.0, 1.0, 0.0, 0j, 0j))
            continue
        table = faddeev_green(pair.k, dom, pad=pad)
        fld = lippmann_schwinger(v, pair.k, table)
        h = amplitude_h(v, fld, pair).h
        rows.append(
            DecayRow(float(rho), fld.sup_deviation, float(np.max(np.abs(fld.mu))), abs(h - vh), h, vh)
        )
    return DecayTable(p, rows)
