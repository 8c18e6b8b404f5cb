"""Feasible-set projections: idempotence, feasibility, oracle agreement."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from gmdesign import (
    FactoredPrecoder,
    FrobeniusPower,
    Orthogonal,
    PilotStructure,
    Unconstrained,
)
from helpers import nearest_orthogonal_bruteforce


def rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


class TestOrthogonal:
    def test_rotation_is_fixed_point(self):
        w = rotation(0.7)
        assert_allclose(Orthogonal().project(w), w, atol=1e-14)

    def test_diagonal_projects_to_identity(self):
        assert_allclose(Orthogonal().project(np.diag([2.0, 3.0])), np.eye(2), atol=1e-14)

    def test_matches_bruteforce_over_o2(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            w = rng.standard_normal((2, 2))
            svd_answer = Orthogonal().project(w)
            grid_answer = nearest_orthogonal_bruteforce(w, 200_000)
            # grid resolution: an angle step moves the matrix by ~ step * sqrt(2)
            assert np.abs(svd_answer - grid_answer).max() < 2 * np.pi / 200_000 * 2

    def test_reflections_admitted(self):
        w = np.diag([1.0, -2.0])
        f = Orthogonal().project(w)
        assert_allclose(f, np.diag([1.0, -1.0]), atol=1e-14)
        assert np.linalg.det(f) < 0

    def test_rejects_nonsquare(self):
        with pytest.raises(ValueError, match="square"):
            Orthogonal().project(np.zeros((2, 3)))


class TestFrobeniusPower:
    def test_radial_rescale(self):
        s = np.array([[0.6, 0.0], [0.8, 0.0]])  # unit Frobenius norm
        assert_allclose(FrobeniusPower(4.0).project(s), 2.0 * s, rtol=1e-14)

    def test_zero_matrix_rejected(self):
        with pytest.raises(ValueError, match="zero matrix"):
            FrobeniusPower(1.0).project(np.zeros((2, 2)))

    def test_nonpositive_power_rejected(self):
        with pytest.raises(ValueError, match="positive"):
            FrobeniusPower(0.0)

    def test_projection_exact(self):
        rng = np.random.default_rng(1)
        for power in (0.5, 1.0, 7.0, 102.0):
            w = rng.standard_normal((3, 2))
            p = FrobeniusPower(power).project(w)
            assert abs(np.sum(p * p) - power) < 1e-12 * power


class TestStructuredConstraints:
    def test_factored_precoder_roundtrip(self):
        channel = np.array([[1.0, 0.5], [0.0, 2.0]])
        con = FactoredPrecoder(channel, Orthogonal())
        f = con.project(np.diag([3.0, 4.0]))
        assert con.residual(f) < 1e-12
        assert_allclose(con.to_transfer(f), channel @ f)
        grad_h = np.arange(4.0).reshape(2, 2)
        assert_allclose(con.gradient_to_param(grad_h, f), channel.T @ grad_h)

    def test_pilot_structure(self):
        con = PilotStructure(receive_dim=2, s_shape=(2, 2), power=8.0)
        s = con.project(np.eye(2))
        assert_allclose(s, 2.0 * np.eye(2))
        h = con.to_transfer(s)
        assert h.shape == (4, 4)
        assert_allclose(h, np.kron(s.T, np.eye(2)))
        with pytest.raises(ValueError, match="shape"):
            con.project(np.eye(3))

    def test_unconstrained_identity(self):
        w = np.arange(6.0).reshape(2, 3)
        con = Unconstrained()
        assert_allclose(con.project(w), w)
        assert con.residual(w) == 0.0


@pytest.mark.parametrize(
    "constraint,shape",
    [
        (Orthogonal(), (3, 3)),
        (FrobeniusPower(5.0), (2, 3)),
        (FactoredPrecoder(np.array([[1.0, 0.2], [0.1, 1.5]]), Orthogonal()), (2, 2)),
        (PilotStructure(2, (2, 2), 3.0), (2, 2)),
        (Unconstrained(), (2, 2)),
    ],
)
def test_projection_idempotent_and_feasible(constraint, shape):
    rng = np.random.default_rng(2)
    for _ in range(20):
        w = rng.standard_normal(shape)
        p1 = constraint.project(w)
        p2 = constraint.project(p1)
        assert np.abs(p2 - p1).max() < 1e-12
        assert constraint.residual(p1) <= 1e-10
