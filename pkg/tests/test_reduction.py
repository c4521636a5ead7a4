import numpy as np
import pytest

from conftest import square
from dtnlab import (
    amplitude_h,
    background_r1,
    born_pair,
    dtn_difference,
    faddeev_green,
    h_from_dtn,
    kernel_A,
    lippmann_schwinger,
    sample_potential,
    solve_psi2,
)
from dtnlab.forward_dtn import DtnMap
from dtnlab.potentials import gaussian_bump, zero_potential
from dtnlab.reduction import BoundaryKernel, ReductionError, reduce_pair
from dtnlab.variety_faddeev import psi_trace, vhat_at

BUMP = dict(center=(0.05, -0.03), width=0.15)


def _setup(n, amp=0.1, p=(3.0, 2.0)):
    dom = square(2, n)
    pair = born_pair(np.array(p))
    v = sample_potential(gaussian_bump(amp, **BUMP), dom)
    return dom, pair, v


def test_zero_background_kernel_is_green_function():
    dom, pair, _ = _setup(16)
    table = faddeev_green(pair.k, dom)
    r1 = background_r1(zero_potential(dom), pair.k, table)
    assert np.array_equal(r1.matrix, table.G_between(dom.boundary, dom.boundary))
    assert r1.info["solves"] == 0


def test_background_kernel_linear_in_small_background():
    dom, pair, _ = _setup(16)
    table = faddeev_green(pair.k, dom)
    G = table.G_between(dom.boundary, dom.boundary)
    corr = []
    for eps in (1e-3, 5e-4):
        v1 = sample_potential(gaussian_bump(eps, **BUMP), dom)
        corr.append((background_r1(v1, pair.k, table).matrix - G) / eps)
    assert np.max(np.abs(corr[0] - corr[1])) <= 1e-3 * np.max(np.abs(corr[1]))


def test_background_kernel_is_deterministic():
    dom, pair, v1 = _setup(16)
    table = faddeev_green(pair.k, dom)
    a = background_r1(v1, pair.k, table, sources=[0, 5]).matrix
    b = background_r1(v1, pair.k, table, sources=[0, 5]).matrix
    assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(a))


def test_kernel_A_structure():
    dom, pair, _ = _setup(16)
    table = faddeev_green(pair.k, dom)
    r1 = background_r1(zero_potential(dom), pair.k, table)
    nb = dom.num_boundary
    assert not np.any(kernel_A(pair.k, DtnMap(dom, np.zeros((nb, nb))), r1).matrix)
    col = np.zeros((nb, nb))
    col[:, 7] = np.linspace(-1, 1, nb)
    A = kernel_A(pair.k, DtnMap(dom, col), r1).matrix
    assert np.any(A[:, 7]) and not np.any(np.delete(A, 7, axis=1))
    D = DtnMap(dom, np.random.default_rng(0).standard_normal((nb, nb)))
    assert np.allclose(kernel_A(pair.k, D * 2.0, r1).matrix, 2 * kernel_A(pair.k, D, r1).matrix, rtol=1e-14, atol=0)


def test_kernel_A_domain_mismatch():
    dom, pair, _ = _setup(16)
    r1 = background_r1(zero_potential(dom), pair.k, faddeev_green(pair.k, dom))
    other = square(2, 32)
    with pytest.raises(ValueError):
        kernel_A(pair.k, DtnMap(other, np.zeros((other.num_boundary,) * 2)), r1)


def test_psi2_with_zero_kernel():
    dom, pair, _ = _setup(16)
    nb = dom.num_boundary
    psi1 = pair.k.plane_wave(dom.boundary)
    psi2 = solve_psi2(pair.k, BoundaryKernel(dom, np.zeros((nb, nb)), pair.k), psi1)
    assert np.array_equal(np.asarray(psi2), psi1)
    assert psi2.residual == 0


def test_psi2_near_singular_raises():
    dom, pair, _ = _setup(16)
    nb = dom.num_boundary
    A = np.diag(1.0 / dom.weights)
    with pytest.raises(ReductionError):
        solve_psi2(pair.k, BoundaryKernel(dom, A, pair.k), np.ones(nb))


def test_psi2_change_is_linear_in_the_data():
    dom, pair, _ = _setup(32)
    table = faddeev_green(pair.k, dom)
    z = zero_potential(dom)
    r1 = background_r1(z, pair.k, table)
    psi1 = pair.k.plane_wave(dom.boundary)
    bump = sample_potential(gaussian_bump(1.0, **BUMP), dom)
    change = []
    for eps in (1e-3, 5e-4):
        psi2 = solve_psi2(pair.k, kernel_A(pair.k, dtn_difference(bump * eps, z), r1), psi1)
        assert psi2.residual <= 1e-10
        change.append((np.asarray(psi2) - psi1) / eps)
    assert np.max(np.abs(change[0] - change[1])) <= 1e-3 * np.max(np.abs(change[1]))


def test_psi2_matches_faddeev_trace():
    dom, pair, v2 = _setup(32)
    table = faddeev_green(pair.k, dom)
    z = zero_potential(dom)
    A = kernel_A(pair.k, dtn_difference(v2, z), background_r1(z, pair.k, table))
    psi2 = np.asarray(solve_psi2(pair.k, A, pair.k.plane_wave(dom.boundary)))
    ref = psi_trace(v2, lippmann_schwinger(v2, pair.k, table), table)
    assert np.max(np.abs(psi2 - ref)) <= 0.02 * np.max(np.abs(ref))


def test_h_from_identical_maps_is_zero():
    dom, pair, _ = _setup(16)
    nb = dom.num_boundary
    t = np.ones(nb, complex)
    assert h_from_dtn(pair, DtnMap(dom, np.zeros((nb, nb))), t, t) == 0
    with pytest.raises(ValueError):
        h_from_dtn(pair, DtnMap(dom, np.zeros((nb, nb))), t[:-1], t)


def test_routes_agree_and_converge():
    gaps = []
    for n in (16, 32):
        dom, pair, v2 = _setup(n)
        z = zero_potential(dom)
        table = faddeev_green(pair.k, dom)
        res = reduce_pair(pair, dtn_difference(v2, z), z, table_k=table)
        direct = amplitude_h(v2, lippmann_schwinger(v2, pair.k, table), pair).h
        gaps.append(abs(res.h_diff - direct) / abs(direct))
    assert gaps[1] <= 0.03
    assert gaps[1] < gaps[0]


def test_born_limit_of_reduction():
    dom, pair, _ = _setup(32)
    z = zero_potential(dom)
    table = faddeev_green(pair.k, dom)
    unit = sample_potential(gaussian_bump(1.0, **BUMP), dom)
    vals = []
    for eps in (1e-3, 5e-4):
        vals.append(reduce_pair(pair, dtn_difference(unit * eps, z), z, table_k=table).h_diff / eps)
    assert vals[0] == pytest.approx(vals[1], rel=1e-3)
    assert vals[1] == pytest.approx(vhat_at(unit, pair.p), rel=0.05)


def test_nonzero_background_matches_amplitude_difference():
    dom, pair, v1 = _setup(32, amp=0.05)
    v2 = sample_potential(gaussian_bump(0.1, center=(-0.05, 0.04), width=0.12), dom) + v1
    tk = faddeev_green(pair.k, dom)
    tl = faddeev_green(-pair.l, dom)
    res = reduce_pair(pair, dtn_difference(v2, v1), v1, table_k=tk, table_minus_l=tl)
    h1 = amplitude_h(v1, lippmann_schwinger(v1, pair.k, tk), pair).h
    h2 = amplitude_h(v2, lippmann_schwinger(v2, pair.k, tk), pair).h
    assert abs(res.h_diff - (h2 - h1)) <= 0.03 * abs(h2 - h1)
