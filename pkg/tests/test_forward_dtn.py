import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq

from conftest import square
from oracles import dense_dirichlet_matrix
from dtnlab import dirichlet_guard, dtn_diff_norm, dtn_difference, dtn_map, sample_potential, solve_dirichlet
from dtnlab.forward_dtn import (
    DirichletEigenvalueError,
    DtnMap,
    dtn_linearization,
    read_gdtn,
    smallest_eigenvalue,
)
from dtnlab.potentials import compact_bump, gaussian_bump, zero_potential


def _trace(dom, fn):
    return fn(*dom.boundary.T)


def _interior(dom, fn):
    return fn(*dom.nodes.T)


@pytest.mark.parametrize("fn", [lambda x, y: x, lambda x, y: 1 - 2 * y + 0.5 * x, lambda x, y: x**2 - y**2, lambda x, y: x * y])
def test_harmonic_polynomials_are_reproduced(fn):
    dom = square(2, 16)
    u = solve_dirichlet(zero_potential(dom), _trace(dom, fn))
    assert np.max(np.abs(u - _interior(dom, fn))) <= 1e-12


def test_quadratic_in_three_dimensions():
    dom = square(3, 8)
    fn = lambda x, y, z: x**2 + y**2 - 2 * z**2 + x * z
    u = solve_dirichlet(zero_potential(dom), _trace(dom, fn))
    assert np.max(np.abs(u - _interior(dom, fn))) <= 1e-12


def test_solution_self_converges_at_second_order():
    centre = []
    for n in (16, 32, 64, 128):
        dom = square(2, n)
        u = solve_dirichlet(sample_potential(gaussian_bump(1.0, (0, 0), 0.2), dom), np.ones(dom.num_boundary))
        centre.append(u.reshape(dom.shape)[n // 2 - 1 : n // 2 + 1, n // 2 - 1 : n // 2 + 1].mean())
    d = np.abs(np.diff(centre))
    # frozen oracle run: successive ratios 5.46, 4.05
    assert d[1] / d[2] == pytest.approx(4.0, rel=0.15)
    assert d[0] / d[1] > 3.5


def test_complex_data_solve_matches_parts():
    dom = square(2, 16)
    v = sample_potential(gaussian_bump(0.5, (0, 0), 0.15), dom)
    f = np.exp(1j * dom.boundary[:, 0] * 3)
    u = solve_dirichlet(v, f)
    assert np.allclose(u, solve_dirichlet(v, f.real) + 1j * solve_dirichlet(v, f.imag), atol=1e-14)


def test_wrong_data_length():
    dom = square(2, 16)
    with pytest.raises(ValueError):
        solve_dirichlet(zero_potential(dom), np.ones(5))


def test_guard_eigenvalue_matches_dense_oracle():
    for n in (16, 32):
        lam = np.linalg.eigvals(dense_dirichlet_matrix(n)).real.min()
        assert smallest_eigenvalue(zero_potential(square(2, n))) == pytest.approx(lam, rel=1e-10)


def test_guard_zero_potential_near_continuum():
    rep = dirichlet_guard(zero_potential(square(2, 64)))
    assert rep.passed
    assert rep.eigenvalue == pytest.approx(2 * np.pi**2, rel=0.03)


@given(st.floats(-1.0, 1.0), st.floats(-0.1, 0.1), st.floats(0.08, 0.2))
def test_guard_small_potential_has_margin(amp, cx, width):
    dom = square(2, 32)
    rep = dirichlet_guard(sample_potential(gaussian_bump(amp, (cx, -cx), width), dom))
    assert rep.passed and rep.margin >= 19.74 * 0.9 - 1


def test_guard_fails_at_eigenvalue_crossing():
    dom = square(2, 32)
    well = gaussian_bump(-1.0, (0, 0), 0.25)
    lam = lambda c: smallest_eigenvalue(sample_potential(well.scaled(c), dom))
    assert lam(0.0) > 0 > lam(40.0)
    crossing = brentq(lam, 0.0, 40.0, xtol=1e-10)
    v = sample_potential(well.scaled(crossing), dom)
    rep = dirichlet_guard(v)
    assert not rep.passed and rep.margin < 0
    with pytest.raises(DirichletEigenvalueError):
        dtn_map(v)
    # the spectrum shift oracle: a deeper well passes again once past the crossing
    assert dirichlet_guard(sample_potential(well.scaled(crossing * 1.2), dom)).passed


def test_free_map_on_linear_and_constant_data():
    errs = {}
    for n in (32, 64):
        dom = square(2, n)
        phi = dtn_map(zero_potential(dom))
        e1 = np.max(np.abs(phi.apply(dom.boundary[:, 0]) - dom.normals[:, 0]))
        e0 = np.max(np.abs(phi.apply(np.ones(dom.num_boundary))))
        errs[n] = max(e0, e1)
        assert errs[n] <= 5 * dom.h
    assert errs[64] <= 1e-10


def test_constant_data_matches_harmonic_extension():
    dom = square(2, 32)
    v = sample_potential(gaussian_bump(2.0, (0.05, 0), 0.15), dom)
    one = np.ones(dom.num_boundary)
    from dtnlab.forward_dtn import normal_derivative

    direct = normal_derivative(dom, solve_dirichlet(v, one), one)
    assert np.allclose(dtn_map(v).apply(one), direct, atol=1e-9)


def test_map_symmetry_and_green_pairing():
    dom = square(2, 32)
    v = sample_potential(gaussian_bump(1.0, (0.05, -0.02), 0.15), dom)
    phi = dtn_map(v)
    assert phi.symmetry_defect() <= 0.1
    rng = np.random.default_rng(3)
    f, g = rng.standard_normal((2, dom.num_boundary))
    lhs = dom.boundary_integral(phi.apply(f) * g)
    rhs = dom.boundary_integral(f * phi.apply(g))
    assert abs(lhs - rhs) <= 0.1 * np.max(np.abs(phi.K)) * dom.perimeter**2


def test_map_self_converges():
    vals = []
    for n in (16, 32, 64):
        dom = square(2, n)
        phi = dtn_map(sample_potential(gaussian_bump(1.0, (0, 0), 0.2), dom))
        g = np.cos(np.pi * dom.boundary[:, 0]) * np.exp(dom.boundary[:, 1])
        vals.append(dom.boundary_integral(phi.apply(g) * g))
    d = np.abs(np.diff(vals))
    assert d[0] / d[1] >= 2.0  # at least first order; observed about 4


def test_difference_matches_direct_subtraction():
    dom = square(2, 32)
    v1 = sample_potential(gaussian_bump(0.5, (0, 0), 0.2), dom)
    v2 = sample_potential(gaussian_bump(0.8, (0, 0), 0.2), dom)
    direct = dtn_map(v2) - dtn_map(v1)
    assert np.allclose(dtn_difference(v2, v1).K, direct.K, atol=1e-8 * np.max(np.abs(direct.K)) + 1e-9)
    assert not np.any(dtn_difference(v1, v1).K)


def test_linearization_is_first_order_accurate():
    dom = square(2, 32)
    v1 = sample_potential(gaussian_bump(0.5, (0, 0), 0.2), dom)
    dv = sample_potential(compact_bump(1.0, (0.05, 0), 0.3, order=5), dom)
    gaps = []
    for eps in (1e-2, 5e-3):
        exact = dtn_difference(v1 + dv * eps, v1)
        lin = dtn_linearization(v1, dv * eps)
        gaps.append(dtn_diff_norm(exact, lin))
    assert gaps[0] / gaps[1] == pytest.approx(4.0, rel=0.05)


def test_norm_examples():
    dom = square(2, 16)
    phi = dtn_map(zero_potential(dom))
    assert dtn_diff_norm(phi, phi) == 0
    K = np.zeros((dom.num_boundary,) * 2)
    K[3, 7] = -2.5
    assert dtn_diff_norm(DtnMap(dom, K)) == pytest.approx(2.5 * dom.weights[7])


def test_norm_ratio_stabilises():
    dom = square(2, 32)
    v1 = sample_potential(gaussian_bump(0.3, (0, 0.05), 0.15), dom)
    bump = sample_potential(compact_bump(1.0, (0.02, -0.03), 0.3, order=5), dom)
    r = [dtn_diff_norm(dtn_difference(v1 + bump * e, v1)) / e for e in (1e-2, 1e-3, 1e-4)]
    assert abs(r[1] - r[2]) < abs(r[0] - r[1]) * 0.2
    assert abs(r[1] - r[2]) / r[2] < 1e-3


def test_norm_resolution_consistency():
    deltas = []
    for n in (32, 64):
        dom = square(2, n)
        v1 = sample_potential(gaussian_bump(0.3, (0, 0), 0.15), dom)
        v2 = sample_potential(gaussian_bump(0.4, (0, 0), 0.15), dom)
        deltas.append(dtn_diff_norm(dtn_difference(v2, v1)))
    assert deltas[0] == pytest.approx(deltas[1], rel=0.1)


def test_difference_singular_values_decay():
    dom = square(2, 32)
    v1 = sample_potential(gaussian_bump(0.3, (0, 0), 0.15), dom)
    v2 = sample_potential(gaussian_bump(0.5, (0.05, 0), 0.15), dom)
    s = dtn_difference(v2, v1).weighted_singular_values()
    tail = s[dom.n // 2 :].sum() / s.sum()
    assert tail < 0.01


def test_mismatched_domains():
    a, b = dtn_map(zero_potential(square(2, 16))), dtn_map(zero_potential(square(2, 32)))
    with pytest.raises(ValueError):
        dtn_diff_norm(a, b)
    with pytest.raises(ValueError):
        a - b


@pytest.mark.parametrize("fmt", ["csv", "bin"])
def test_persistence_round_trip(tmp_path, fmt):
    dom = square(2, 16)
    phi = dtn_map(sample_potential(gaussian_bump(0.5, (0, 0), 0.15), dom))
    paths = phi.save(tmp_path / "phi", fmt)
    assert all(p.exists() for p in paths)
    back = DtnMap.load(tmp_path / "phi", dom)
    assert np.array_equal(back.K, phi.K)
    with pytest.raises(ValueError):
        DtnMap.load(tmp_path / "phi", square(2, 16, 2.0))


def test_binary_header_and_layout(tmp_path):
    dom = square(2, 16)
    K = np.arange(dom.num_boundary**2, dtype=float).reshape(dom.num_boundary, -1)
    DtnMap(dom, K).save(tmp_path / "m", "bin")
    raw = (tmp_path / "m.gdtn").read_bytes()
    assert raw[:8] == b"GDTN0001"
    assert np.frombuffer(raw[8:16], "<f8")[0] == 0.0 and np.frombuffer(raw[16:24], "<f8")[0] == 1.0
    (tmp_path / "bad.gdtn").write_bytes(b"XXXX0001" + raw[8:])
    with pytest.raises(ValueError):
        read_gdtn(tmp_path / "bad.gdtn", dom.num_boundary)
