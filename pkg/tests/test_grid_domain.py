import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dtnlab import build_square_domain, fourier_grid


def test_square_faces_and_weights():
    dom = build_square_domain(2, 16, 1.0)
    assert dom.num_boundary == 64
    assert np.all(dom.weights == 1 / 16)
    assert dom.weights.sum() == pytest.approx(4.0, abs=1e-14)


def test_cube_faces_and_weights():
    dom = build_square_domain(3, 8, 1.0)
    assert dom.num_boundary == 384
    assert dom.weights.sum() == pytest.approx(6.0, abs=1e-14)


def test_radius_is_max_node_norm():
    dom = build_square_domain(2, 16, 1.0)
    h = dom.h
    assert dom.radius == np.max(np.linalg.norm(dom.nodes, axis=1))
    assert dom.radius == pytest.approx(np.sqrt(2) / 2 * (1 - h), rel=1e-14)
    assert dom.radius < np.sqrt(2) / 2


@pytest.mark.parametrize("d,n", [(1, 16), (4, 16), (2, 4)])
def test_rejects_bad_parameters(d, n):
    with pytest.raises(ValueError):
        build_square_domain(d, n)


@given(st.sampled_from([2, 3]), st.integers(8, 14), st.floats(0.2, 5.0))
def test_boundary_geometry(d, n, side):
    dom = build_square_domain(d, n, side)
    assert np.all(dom.weights > 0)
    assert dom.weights.sum() == pytest.approx(dom.perimeter, rel=1e-12)
    assert np.allclose(np.linalg.norm(dom.normals, axis=1), 1.0)
    # faces sit on the boundary and normals point away from the centre
    assert np.allclose(np.max(np.abs(dom.boundary), axis=1), side / 2)
    assert np.all(np.sum(dom.normals * dom.boundary, axis=1) > 0)
    # the touching cell is half a step inward along the normal
    assert np.allclose(dom.nodes[dom.face_cell], dom.boundary - dom.normals * dom.h / 2)


def test_fourier_grid_arithmetic():
    fg = fourier_grid(2, 10.0, 21)
    assert len(fg.points) == 441
    assert fg.dp == pytest.approx(20 / 21)
    assert np.any(np.all(fg.points == 0, axis=1))
    neg = fg.points[fg.index_of_negative()]
    assert np.array_equal(neg, -fg.points)
    assert len(fourier_grid(3, 6.0, 13).points) == 2197


def test_fourier_grid_rejects_even_and_checks_cutoff():
    with pytest.raises(ValueError):
        fourier_grid(2, 10.0, 20)
    fg = fourier_grid(2, 10.0, 21)
    fg.check_cutoff(10.0)
    with pytest.raises(ValueError):
        fg.check_cutoff(10.5)


def test_domain_key_is_stable():
    a, b = build_square_domain(2, 16), build_square_domain(2, 16)
    assert a.key() == b.key() and a.same_as(b)
    assert a.key() != build_square_domain(2, 16, 2.0).key()
