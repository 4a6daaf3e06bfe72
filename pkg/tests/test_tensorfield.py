"""Strain computation, load splits, the exact polynomial identity."""

from fractions import Fraction

import numpy as np
import pytest

from orlicz_elastica import tensorfield as tf
from orlicz_elastica.mesh import generate_rectangle


@pytest.fixture
def mesh():
    return generate_rectangle(3, 3)


def interp(mesh, fn):
    return tf.DisplacementField.from_function(mesh, fn)


class TestComputeStrain:
    def test_identity_stretch(self, mesh):
        s = tf.compute_strain(mesh, interp(mesh, lambda x, y: np.stack([x, y], axis=-1)))
        assert np.allclose(s.sym, np.eye(2), atol=1e-14)
        assert np.allclose(s.div, 2.0, atol=1e-14)
        assert np.abs(s.dev).max() < 1e-14

    def test_simple_shear(self, mesh):
        s = tf.compute_strain(mesh, interp(mesh, lambda x, y: np.stack([y, 0 * x], axis=-1)))
        assert np.allclose(s.div, 0.0, atol=1e-14)
        want = np.array([[0.0, 0.5], [0.5, 0.0]])
        assert np.allclose(s.sym, want, atol=1e-14)
        assert np.allclose(s.dev, want, atol=1e-14)

    def test_rigid_rotation(self, mesh):
        s = tf.compute_strain(mesh, interp(mesh, lambda x, y: np.stack([-y, x], axis=-1)))
        assert np.abs(s.sym).max() == 0.0

    def test_linearity(self, mesh):
        rng = np.random.default_rng(5)
        u = rng.standard_normal((mesh.n_nodes, 2))
        v = rng.standard_normal((mesh.n_nodes, 2))
        a, b = 0.3, -1.7
        s = tf.compute_strain(mesh, a * u + b * v)
        su = tf.compute_strain(mesh, u)
        sv = tf.compute_strain(mesh, v)
        assert np.allclose(s.grad, a * su.grad + b * sv.grad, rtol=1e-12, atol=1e-12)

    def test_deviatoric_spherical_orthogonality(self, mesh):
        rng = np.random.default_rng(11)
        s = tf.compute_strain(mesh, rng.standard_normal((mesh.n_nodes, 2)))
        # |D|^2 = |dev D|^2 + div^2 / d
        full = np.sum(s.sym**2, axis=(1, 2))
        split = np.sum(s.dev**2, axis=(1, 2)) + 0.5 * s.div**2
        assert np.allclose(full, split, rtol=1e-12, atol=1e-12)
        assert np.abs(s.dev[:, 0, 0] + s.dev[:, 1, 1]).max() < 1e-14

    def test_mesh_mismatch_rejected(self, mesh):
        other = generate_rectangle(2, 2)
        field = tf.DisplacementField.zero(other)
        with pytest.raises(ValueError):
            tf.compute_strain(mesh, field)


class TestLoadTensor:
    def test_isotropic_split(self, mesh):
        F = np.tile(np.eye(2), (mesh.n_elements, 1, 1))
        dev, tr = tf.decompose_load(tf.LoadTensor(mesh, F))
        assert np.abs(dev).max() == 0.0
        assert np.allclose(tr, 2.0)

    def test_traceless_is_its_own_deviator(self, mesh):
        F = np.tile([[1.0, 2.0], [2.0, -1.0]], (mesh.n_elements, 1, 1))
        dev, tr = tf.decompose_load(tf.LoadTensor(mesh, F))
        assert np.allclose(tr, 0.0)
        assert np.allclose(dev, F)

    def test_general_split_hand_values(self, mesh):
        # direct arithmetic: F = [[3,1],[1,1]] -> tr 4, dev [[1,1],[1,-1]]
        F = np.tile([[3.0, 1.0], [1.0, 1.0]], (mesh.n_elements, 1, 1))
        load = tf.LoadTensor(mesh, F)
        assert np.allclose(load.trace, 4.0)
        assert np.allclose(load.dev, [[1.0, 1.0], [1.0, -1.0]])
        # reassembly
        rebuilt = load.dev + 0.5 * load.trace[:, None, None] * np.eye(2)
        assert np.abs(rebuilt - load.tensors).max() < 1e-14

    def test_asymmetric_rejected(self, mesh):
        F = np.tile([[1.0, 1.0], [0.5, 1.0]], (mesh.n_elements, 1, 1))
        with pytest.raises(ValueError, match="asymmetry"):
            tf.LoadTensor(mesh, F)

    def test_sampling_from_source(self, mesh):
        def value(x, y):
            out = np.zeros(np.shape(x) + (2, 2))
            out[..., 0, 0] = x * y
            out[..., 1, 1] = x - y
            return out

        load = tf.LoadTensor.from_source(mesh, tf.LoadSource(value))
        xb, yb = mesh.barycenters[:, 0], mesh.barycenters[:, 1]
        assert np.allclose(load.tensors[:, 0, 0], xb * yb)
        assert np.allclose(load.tensors[:, 1, 1], xb - yb)


class TestPolynomialIdentity:
    def test_cubic_example(self):
        # f = (x^3, 0): both sides equal the constant 3
        fx = tf.Poly2({(3, 0): 1})
        fy = tf.Poly2()
        assert tf.polynomial_identity_check((fx, fy)) == 0.0
        # independent control: without the deviatoric subtraction the
        # "identity" is off by exactly 3 for this field
        div = fx.diff(0) + fy.diff(1)
        sym00 = fx.diff(0)
        divdiv_sym = sym00.diff(0).diff(0)  # only nonzero block for this f
        rhs = (div.diff(0).diff(0) + div.diff(1).diff(1)).scale(Fraction(1, 2))
        assert (divdiv_sym - rhs).coeffs == {(0, 0): Fraction(3)}

    def test_mixed_quadratic_example(self):
        fx = tf.Poly2({(2, 0): 1})  # x^2
        fy = tf.Poly2({(1, 1): 1})  # x y
        assert tf.polynomial_identity_check((fx, fy)) == 0.0

    def test_rigid_rotation(self):
        fx = tf.Poly2({(0, 1): -1})
        fy = tf.Poly2({(1, 0): 1})
        assert tf.polynomial_identity_check((fx, fy)) == 0.0

    def test_random_rational_suite(self):
        rng = np.random.default_rng(2024)
        for _ in range(100):
            comps = []
            for _ in range(2):
                coeffs = {}
                for i in range(4):
                    for j in range(4 - i):
                        coeffs[(i, j)] = Fraction(int(rng.integers(-9, 10)),
                                                  int(rng.integers(1, 7)))
                comps.append(tf.Poly2(coeffs))
            assert tf.polynomial_identity_check(tuple(comps)) == 0.0

    def test_degree_cap(self):
        fx = tf.Poly2({(4, 0): 1})
        with pytest.raises(ValueError, match="degree"):
            tf.polynomial_identity_check((fx, tf.Poly2()))

    def test_poly_diff_oracle(self):
        # d/dx (3 x^2 y) = 6 x y, d/dy -> 3 x^2
        p = tf.Poly2({(2, 1): 3})
        assert p.diff(0).coeffs == {(1, 1): Fraction(6)}
        assert p.diff(1).coeffs == {(2, 0): Fraction(3)}
        assert p.degree == 3


class TestH1Norm:
    def test_linear_field_oracle(self):
        # u = (x, 0) on the unit square: |u|_L2^2 = 1/3, |grad u|^2 = 1
        mesh = generate_rectangle(4, 4)
        field = tf.DisplacementField.from_function(
            mesh, lambda x, y: np.stack([x, 0 * y], axis=-1)
        )
        assert tf.h1_norm(mesh, field) == pytest.approx(np.sqrt(1.0 / 3.0 + 1.0), rel=1e-12)

    def test_zero_field(self):
        mesh = generate_rectangle(2, 2)
        assert tf.h1_norm(mesh, tf.DisplacementField.zero(mesh)) == 0.0
