import math

import numpy as np
import pytest
from helpers import SQUARE

from cuthho.mesh import (
    MeshError,
    PolyMesh,
    compute_meta,
    estimate_rho,
    generate_cartesian,
    read_mesh,
    write_mesh,
)


def test_unit_square_single_cell():
    m = generate_cartesian(1, 1)
    assert (m.n_cells, m.n_faces) == (1, 4)
    assert np.isclose(m.cell_area(0), 1.0)
    assert m.boundary_faces.all()


def test_four_by_four_diameters():
    m = generate_cartesian(4, 4, SQUARE)
    assert m.n_cells == 16
    assert all(np.isclose(m.cell_diameter(c), math.sqrt(2) / 2) for c in range(16))


def test_face_count_eight():
    assert generate_cartesian(8, 8, SQUARE).n_faces == 2 * 8 * 9


def test_interior_faces_shared_by_two_cells():
    m = generate_cartesian(3, 2)
    interior = ~m.boundary_faces
    assert np.all(m.face_cells[interior] >= 0)
    assert interior.sum() == 2 * 2 + 3 * 1


def test_meta_square_and_neighbourhood():
    m = generate_cartesian(4, 4, SQUARE)
    meta = compute_meta(m)
    assert np.isclose(meta[0].h, math.sqrt(2) / 2)
    assert meta[0].radius >= 0.25 * (1 - 0.02)
    assert len(meta[5].neighbors) == 9


def test_meta_l_shape():
    m = PolyMesh(np.array([[0, 0], [2, 0], [2, 1], [1, 1], [0, 1], [1, 0]], float), ((0, 5, 1, 2, 3, 4),))
    assert np.isclose(compute_meta(m)[0].h, math.sqrt(5))


def test_estimate_rho_uniform_and_single():
    rho = estimate_rho(generate_cartesian(4, 4, SQUARE))
    assert np.isclose(rho, 0.5 / math.sqrt(2), rtol=2e-2)
    assert np.isclose(estimate_rho(generate_cartesian(1, 1)), 0.5 / math.sqrt(2), rtol=2e-2)


def test_estimate_rho_graded_mesh():
    # a 3x3 cell beside three stacked unit cells: the neighbour diameter ratio 1/3 sets rho
    v = np.array([[0, 0], [3, 0], [3, 1], [3, 2], [3, 3], [0, 3], [4, 0], [4, 1], [4, 2], [4, 3]], float)
    m = PolyMesh(v, ((0, 1, 2, 3, 4, 5), (1, 6, 7, 2), (2, 7, 8, 3), (3, 8, 9, 4)))
    assert np.isclose(estimate_rho(m), 1.0 / 3.0)


def test_perturbed_mesh_is_deterministic():
    a = generate_cartesian(5, 5, SQUARE, 0.1, seed=3)
    b = generate_cartesian(5, 5, SQUARE, 0.1, seed=3)
    assert np.array_equal(a.vertices, b.vertices)
    assert np.isclose(a.cell_areas().sum(), 4.0)


def test_round_trip(tmp_path):
    m = generate_cartesian(3, 2, SQUARE, 0.05, seed=1)
    write_mesh(m, tmp_path / "m.txt")
    r = read_mesh(tmp_path / "m.txt")
    assert np.array_equal(r.vertices, m.vertices)
    assert [tuple(c) for c in r.cells] == [tuple(c) for c in m.cells]


@pytest.mark.parametrize("text", ["nope\n", "polymesh 2d\n3\n0 0\n1 0\n"])
def test_read_rejects_malformed(tmp_path, text):
    (tmp_path / "bad.txt").write_text(text)
    with pytest.raises(MeshError):
        read_mesh(tmp_path / "bad.txt")


def test_clockwise_cell_rejected():
    with pytest.raises(MeshError):
        PolyMesh(np.array([[0, 0], [0, 1], [1, 0]], float), ((0, 1, 2),))


def test_bad_generator_arguments():
    with pytest.raises(MeshError):
        generate_cartesian(0, 2)
    with pytest.raises(MeshError):
        generate_cartesian(2, 2, perturbation=0.5)
