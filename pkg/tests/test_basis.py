import logging
import math

import numpy as np
import pytest
from scipy.integrate import quad

from sparseddd.basis import (
    BasisError,
    BasisSet,
    build_basis,
    cone_normalizer,
    eval_basis,
    kmeans_centers,
    project_coefficients,
    project_points_individually,
    select_radii,
)


def test_cone_heights_by_hand():
    b1 = BasisSet(np.array([[0.0], [1.0], [3.0]]), [2.0, 2.0, 2.0])
    assert eval_basis([0.0], 0, b1) == pytest.approx(0.5)
    b2 = BasisSet(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), [1.0, 1.0, 1.0])
    assert eval_basis([0.0, 0.0], 0, b2) == pytest.approx(3 / math.pi)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_cone_has_unit_mass(d):
    # radial integral: |S^{d-1}| * int_0^zeta h (1 - r/zeta) r^{d-1} dr
    zeta = 0.7
    sphere = 2 * math.pi ** (d / 2) / math.gamma(d / 2)
    h = float(cone_normalizer(d, zeta))
    mass = sphere * quad(lambda r: h * (1 - r / zeta) * r ** (d - 1), 0, zeta)[0]
    assert mass == pytest.approx(1.0, rel=1e-10)


def test_support_boundary_is_zero():
    b = BasisSet(np.array([[0.0], [1.0], [3.0]]), [1.0, 1.0, 1.0])
    assert eval_basis([1.0], 0, b) == 0.0
    assert np.allclose(b.evaluate([[1.0]])[0], [0.0, 1.0, 0.0])


def test_evaluate_matches_scalar(rng):
    b = BasisSet(rng.random((5, 2)), rng.random(5) + 0.2)
    x = rng.random((7, 2))
    table = b.evaluate(x)
    for i in range(7):
        for j in range(5):
            assert table[i, j] == pytest.approx(eval_basis(x[i], j, b))


def test_select_radii_second_neighbour():
    assert np.allclose(select_radii([[0.0], [1.0], [3.0]]), [3.0, 2.0, 3.0])


def test_select_radii_needs_three_distinct():
    with pytest.raises(BasisError):
        select_radii([[0.0], [1.0]])
    with pytest.raises(BasisError, match="duplicate"):
        select_radii([[0.0], [0.0], [1.0]])


def test_projection_by_hand():
    b = BasisSet(np.array([[0.0], [1.0], [3.0]]), select_radii([[0.0], [1.0], [3.0]]))
    c = project_coefficients(np.array([[0.5], [0.5], [2.0]]), b)
    assert np.allclose(c, [1 / 3, 1 / 2, 1 / 6])


def test_projection_warns_on_uncovered(caplog):
    b = BasisSet(np.array([[0.0], [1.0], [3.0]]), [1.0, 1.0, 1.0])
    with caplog.at_level(logging.WARNING):
        c = project_coefficients(np.array([[0.0], [10.0]]), b)
    assert np.allclose(c, [1.0, 0.0, 0.0])
    assert "1 of 2 points" in caplog.text
    with pytest.raises(BasisError):
        project_coefficients(np.array([[10.0]]), b)


def test_individual_projection_marks_uncovered():
    b = BasisSet(np.array([[0.0], [1.0], [3.0]]), [1.0, 1.0, 1.0])
    c = project_points_individually(np.array([[0.5], [10.0]]), b)
    assert np.allclose(c[0], [0.5, 0.5, 0.0])
    assert np.isnan(c[1]).all()


def test_permutation_equivariance(rng):
    pts = rng.random((50, 2)) * 4
    b = build_basis(pts, 6, seed=1)
    perm = rng.permutation(6)
    assert np.allclose(project_coefficients(pts, b.permuted(perm)), project_coefficients(pts, b)[perm])


def test_kmeans_seeded_and_bounded(rng):
    pts = rng.random((200, 2))
    assert np.array_equal(kmeans_centers(pts, 8, seed=3), kmeans_centers(pts, 8, seed=3))
    with pytest.raises(BasisError):
        kmeans_centers(np.zeros((10, 2)), 2)


def test_basis_save_load(tmp_path, rng):
    b = build_basis(rng.random((60, 2)), 5, seed=0)
    b.save(tmp_path / "b.json")
    back = BasisSet.load(tmp_path / "b.json")
    assert back.content_hash() == b.content_hash()
    assert np.array_equal(back.centers, b.centers)
