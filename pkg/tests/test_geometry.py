import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxscore.geometry import (
    ComplementBasis,
    Direction,
    basis_complement,
    beta_of_theta,
    reflect_to_hemisphere,
    theta_of_beta,
)


def unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


class TestDirection:
    def test_rejects_non_unit(self):
        with pytest.raises(ValueError):
            Direction(np.array([1.0, 1.0]))

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            Direction(np.zeros(2))


class TestBasisComplement:
    def test_reference_case(self):
        basis = basis_complement(unit([1.0, 1.0]))
        assert np.allclose(np.abs(basis.B0[:, 0]), np.array([1.0, 1.0]) / np.sqrt(2))

    def test_e1_fallback(self):
        basis = basis_complement(np.array([1.0, 0.0, 0.0]))
        assert np.allclose(basis.B0, np.eye(3)[:, 1:])

    def test_orthonormality_enforced(self):
        with pytest.raises(ValueError):
            ComplementBasis(b0=Direction(np.array([1.0, 0.0])), B0=np.array([[1.0], [0.0]]))

    def test_d1_rejected(self):
        with pytest.raises(ValueError):
            basis_complement(np.array([1.0]))


@st.composite
def unit_vectors(draw, d):
    v = draw(
        st.lists(
            st.floats(-1.0, 1.0, allow_nan=False), min_size=d, max_size=d
        ).filter(lambda w: np.linalg.norm(w) > 1e-3)
    )
    return unit(v)


class TestChart:
    def test_theta_zero_maps_to_reference(self):
        b0 = unit([3.0, -4.0])
        basis = basis_complement(b0)
        assert np.allclose(beta_of_theta(basis, np.zeros(1)).b, b0)

    def test_boundary_theta(self):
        basis = basis_complement(unit([1.0, 1.0]))
        b = beta_of_theta(basis, np.array([1.0]))
        assert abs(np.linalg.norm(b.b) - 1.0) < 1e-12
        assert abs(float(b.b @ basis.b0.b)) < 1e-12

    def test_rejects_theta_outside_ball(self):
        basis = basis_complement(unit([1.0, 1.0]))
        with pytest.raises(ValueError):
            beta_of_theta(basis, np.array([1.1]))

    @given(d=st.integers(2, 4), data=st.data())
    @settings(max_examples=100, deadline=None)
    def test_round_trip(self, d, data):
        b0 = data.draw(unit_vectors(d))
        theta = np.asarray(data.draw(
            st.lists(st.floats(-0.7, 0.7, allow_nan=False), min_size=d - 1, max_size=d - 1)
        ))
        if np.linalg.norm(theta) > 0.99:
            theta = theta * 0.9 / np.linalg.norm(theta)
        basis = basis_complement(b0)
        beta = beta_of_theta(basis, theta)
        assert np.allclose(theta_of_beta(basis, beta), theta, atol=1e-10)

    @given(d=st.integers(2, 4), data=st.data())
    @settings(max_examples=100, deadline=None)
    def test_far_hemisphere_reflected(self, d, data):
        b0 = data.draw(unit_vectors(d))
        beta = data.draw(unit_vectors(d))
        basis = basis_complement(b0)
        t1 = theta_of_beta(basis, beta)
        t2 = theta_of_beta(basis, -beta)
        assert np.allclose(t1, t2)


class TestReflect:
    def test_flips_when_negative(self):
        b = unit([1.0, 0.2])
        assert np.array_equal(reflect_to_hemisphere(-b, b), b)

    def test_keeps_when_nonnegative(self):
        b = unit([0.0, 1.0])
        ref = unit([1.0, 0.0])
        # exactly orthogonal: weak inequality keeps the vector
        assert np.array_equal(reflect_to_hemisphere(b, ref), b)
