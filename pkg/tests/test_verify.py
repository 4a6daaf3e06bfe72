"""Structural checks: particular solution, harmonicity, curl, estimate, cases."""

import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla

import orlicz_elastica as oe
from orlicz_elastica import verify as vf
from orlicz_elastica.nfunction import make_family
from orlicz_elastica.solver import solve
from orlicz_elastica.tensorfield import DisplacementField, LoadSource, LoadTensor


def fd_poisson_unit_square(n, rhs_const):
    """Independent 5-point finite-difference Poisson oracle (zero boundary)."""
    h = 1.0 / n
    N = (n - 1) ** 2
    A = sp.lil_matrix((N, N))

    def idx(i, j):
        return (j - 1) * (n - 1) + (i - 1)

    for j in range(1, n):
        for i in range(1, n):
            k = idx(i, j)
            A[k, k] = 4.0
            for ii, jj in ((i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)):
                if 1 <= ii < n and 1 <= jj < n:
                    A[k, idx(ii, jj)] = -1.0
    g = spla.spsolve(A.tocsc(), np.full(N, -rhs_const * h * h))
    G = np.zeros((n + 1, n + 1))
    for j in range(1, n):
        for i in range(1, n):
            G[j, i] = g[idx(i, j)]
    return G.ravel()


class TestSolveG:
    def test_constant_isotropic_load_gives_exact_zero(self):
        mesh = oe.generate_rectangle(10, 10)
        F = np.tile(3.7 * np.eye(2), (mesh.n_elements, 1, 1))
        g = vf.solve_g(mesh, LoadTensor(mesh, F))
        assert np.abs(g).max() == 0.0

    def test_linearity(self):
        mesh = oe.generate_rectangle(8, 8)
        rng = np.random.default_rng(0)
        A = rng.standard_normal((mesh.n_elements, 2, 2))
        A = 0.5 * (A + np.swapaxes(A, 1, 2))
        B = rng.standard_normal((mesh.n_elements, 2, 2))
        B = 0.5 * (B + np.swapaxes(B, 1, 2))
        gA = vf.solve_g(mesh, LoadTensor(mesh, A))
        gB = vf.solve_g(mesh, LoadTensor(mesh, B))
        gAB = vf.solve_g(mesh, LoadTensor(mesh, A + B))
        scale = 1.0 + np.abs(gAB).max()
        assert np.abs(gAB - gA - gB).max() < 1e-12 * scale

    def test_against_finite_difference_oracle(self):
        # F = diag(x^2, 0) has div div F = 2; both discretizations must
        # approach the same continuous solution under refinement
        diffs = []
        for n in (8, 16, 32):
            mesh = oe.generate_rectangle(n, n)
            F = np.zeros((mesh.n_elements, 2, 2))
            F[:, 0, 0] = mesh.barycenters[:, 0] ** 2
            g = vf.solve_g(mesh, LoadTensor(mesh, F))
            gfd = fd_poisson_unit_square(n, 2.0)
            diffs.append(np.sqrt(np.mean((g - gfd) ** 2)))
        assert diffs[0] > diffs[1] > diffs[2]
        assert diffs[2] < 1e-2

    def test_zero_on_boundary(self):
        mesh = oe.generate_rectangle(6, 6)
        rng = np.random.default_rng(4)
        F = rng.standard_normal((mesh.n_elements, 2, 2))
        F = 0.5 * (F + np.swapaxes(F, 1, 2))
        g = vf.solve_g(mesh, LoadTensor(mesh, F))
        assert np.all(g[mesh.boundary_nodes()] == 0.0)


class TestInteriorMachinery:
    def test_element_to_node_preserves_constants(self):
        mesh = oe.generate_rectangle(5, 3)
        out = vf.element_to_node(mesh, np.full(mesh.n_elements, 2.5))
        assert np.allclose(out, 2.5, rtol=1e-14)

    def test_interior_margin_counts(self):
        mesh = oe.generate_rectangle(16, 16)
        few = vf.interior_test_nodes(mesh, 0.4)
        more = vf.interior_test_nodes(mesh, 0.2)
        assert 0 < few.size < more.size

    def test_empty_interior_raises(self):
        mesh = oe.generate_rectangle(4, 4)
        with pytest.raises(ValueError, match="margin"):
            vf.interior_test_nodes(mesh, 0.9)
        with pytest.raises(ValueError):
            vf.interior_test_nodes(mesh, -0.1)


class TestHarmonicity:
    def test_zero_data_zero_defect(self):
        mesh = oe.generate_rectangle(12, 12)
        prob = oe.Problem(mesh, 1.0, make_family("quadratic"), LoadTensor.zero(mesh))
        u, _ = solve(prob)
        rep = vf.harmonicity_check(prob, u)
        assert rep.interior_defect == 0.0
        assert np.abs(rep.g_field).max() == 0.0
        assert np.abs(rep.chi_field).max() == 0.0

    def test_quadratic_defect_decays(self):
        vals = []
        for n in (16, 32):
            prob, _ = oe.manufactured("quadratic_hooke", n=n)
            u, _ = solve(prob)
            vals.append(vf.harmonicity_check(prob, u).interior_defect)
        assert vals[1] < 0.5 * vals[0]

    def test_margin_parameter_respected(self):
        prob, _ = oe.manufactured("quadratic_hooke", n=16)
        u, _ = solve(prob)
        wide = vf.harmonicity_check(prob, u, K_margin=0.35)
        tight = vf.harmonicity_check(prob, u, K_margin=0.25)
        assert wide.n_test_nodes < tight.n_test_nodes


class TestCurl:
    def test_dilation_has_exactly_zero_residual(self):
        # u = (x, y): the rotation vanishes identically and the compatible
        # constant load has zero derivatives, so both sides are exact zeros
        mesh = oe.generate_rectangle(12, 12)
        phi = make_family("power_shifted", kappa=1.0, p=4.0)
        c = float(phi.deriv(2.0))
        const = c * np.eye(2)
        source = LoadSource(
            lambda x, y: np.broadcast_to(const, np.shape(x) + (2, 2)),
            lambda x, y: np.zeros(np.shape(x) + (2, 2, 2)),
        )
        u0 = DisplacementField.from_function(mesh, lambda x, y: np.stack([x, y], axis=-1))
        prob = oe.Problem(mesh, 1.0, phi, LoadTensor.from_source(mesh, source), u0=u0)
        u, rep = solve(prob)
        assert rep.converged
        assert np.abs(u.values - u0.values).max() < 1e-10
        assert vf.curl_check(prob, u).weak_residual < 1e-12
        # on the interpolant itself (also a solution) both sides are bitwise zero
        assert vf.curl_check(prob, u0).weak_residual == 0.0

    def test_sign_convention_golden(self):
        # frozen orientation: flipping the sign of the load term must blow
        # the residual up by orders of magnitude on the quadratic case
        prob, _ = oe.manufactured("quadratic_hooke", n=32)
        u, _ = solve(prob)
        rep = vf.curl_check(prob, u)

        mesh = prob.mesh
        grad_u = oe.compute_strain(mesh, u).grad
        omega = vf.element_to_node(mesh, grad_u[:, 0, 1] - grad_u[:, 1, 0])
        S = vf.scalar_stiffness_matrix(mesh)
        lhs = prob.mu * (S @ omega)
        Fg = prob.load.source.grad(mesh.barycenters[:, 0], mesh.barycenters[:, 1])
        c = np.stack(
            [Fg[:, 0, 0, 1] - Fg[:, 1, 0, 0], Fg[:, 0, 1, 1] - Fg[:, 1, 1, 0]], axis=1
        )
        rhs = np.zeros(mesh.n_nodes)
        w = mesh.areas[:, None] * c
        for l in range(3):
            np.add.at(rhs, mesh.elements[:, l], np.einsum("ei,ei->e", w, mesh.grads[:, l]))
        weights = vf._hat_gradient_l1(mesh)
        nodes = vf.interior_test_nodes(mesh, 0.2 * mesh.diameter)
        flipped = np.abs((lhs[nodes] + rhs[nodes]) / weights[nodes]).max()
        assert rep.weak_residual < 0.02 * flipped

    def test_requires_analytic_source(self):
        mesh = oe.generate_rectangle(8, 8)
        prob = oe.Problem(mesh, 1.0, make_family("quadratic"), LoadTensor.zero(mesh))
        u, _ = solve(prob)
        with pytest.raises(ValueError, match="analytic"):
            vf.curl_check(prob, u)

    def test_nonlinear_residual_decays(self):
        vals = []
        for n in (16, 32):
            prob, _ = oe.manufactured("mms_p4", n=n)
            u, _ = solve(prob)
            vals.append(vf.curl_check(prob, u).weak_residual)
        assert vals[1] < 0.5 * vals[0]


class TestEstimateA:
    def test_zero_data_trivial(self):
        mesh = oe.generate_rectangle(6, 6)
        prob = oe.Problem(mesh, 1.0, make_family("quadratic"), LoadTensor.zero(mesh))
        u, _ = solve(prob)
        rep = vf.estimate_A(prob, u)
        assert rep.lhs == 0.0 and rep.rhs_sum == 0.0 and rep.ratio == 0.0
        assert rep.bound_ok and rep.competitor_ok

    def test_hand_integrated_two_triangle_configuration(self):
        # all-Dirichlet 1x1 mesh: the only admissible field is u0 itself.
        # u0 = (x, 0), F = [[1,0],[0,-1]], mu = 1, quadratic bulk:
        #   lhs           = 1/2 + 1 = 3/2
        #   |dev F|^2     = 2,   |dev u0|^2 = 1/2
        #   phi*(tr F)    = 0 (traceless load)
        #   phi(div u0)   = 1
        mesh = oe.generate_rectangle(1, 1)
        u0 = DisplacementField.from_function(mesh, lambda x, y: np.stack([x, 0 * y], axis=-1))
        F = np.tile([[1.0, 0.0], [0.0, -1.0]], (mesh.n_elements, 1, 1))
        prob = oe.Problem(mesh, 1.0, make_family("quadratic"), LoadTensor(mesh, F), u0=u0)
        u, _ = solve(prob)
        rep = vf.estimate_A(prob, u)
        assert rep.lhs == pytest.approx(1.5, rel=1e-13)
        assert rep.f_dev_sq == pytest.approx(2.0, rel=1e-13)
        assert rep.dev_u0_sq == pytest.approx(0.5, rel=1e-13)
        assert rep.conj_trace_f == 0.0
        assert rep.phi_div_u0 == pytest.approx(1.0, rel=1e-13)
        assert rep.ratio == pytest.approx(1.5 / 4.5, rel=1e-12)
        assert rep.bound_ok and rep.competitor_ok

    def test_explicit_constant_value(self):
        assert vf.coercivity_constant(1.0) == pytest.approx(4.0)
        assert vf.coercivity_constant(0.25) > vf.coercivity_constant(1.0)

    def test_bound_holds_on_solved_nonlinear_case(self):
        prob, _ = oe.manufactured("mms_p4", n=16)
        u, rep = solve(prob)
        est = rep.estimate_A_report
        assert est.bound_ok and est.competitor_ok
        assert est.lhs <= est.constant * est.rhs_sum


class TestManufactured:
    def test_registry_listing(self):
        ids = vf.case_ids()
        assert "quadratic_hooke" in ids and "mms_p4" in ids
        assert ids == sorted(ids)
        assert vf.case_ids() == ids  # stable across calls

    def test_unknown_case_raises(self):
        with pytest.raises(KeyError, match="unknown case"):
            vf.manufactured("not_a_case")

    def test_loads_satisfy_the_weak_form_identically(self):
        # residual of the interpolated exact field must shrink under
        # refinement (data are sampled at barycenters, an O(h^2) crime)
        for case in ("quadratic_hooke", "mms_p4"):
            res = []
            for n in (8, 16):
                prob, exact = vf.manufactured(case, n=n)
                r = oe.residual(prob, exact)
                res.append(np.abs(r).max())
            assert res[1] < 0.6 * res[0]

    def test_rigid_rotation_case_is_trivial_after_projection(self):
        prob, exact = vf.manufactured("rigid_rotation", n=8)
        u, rep = solve(prob)
        assert rep.converged and rep.iterations == 0
        projected_exact = prob.dofs.project_out_rigid(exact.values)
        assert np.abs(u.values - projected_exact).max() < 1e-12

    def test_manufactured_source_derivatives_match_fd(self):
        prob, _ = vf.manufactured("mms_p4", n=4)
        src = prob.load.source
        rng = np.random.default_rng(3)
        x = rng.uniform(0.2, 0.8, 20)
        y = rng.uniform(0.2, 0.8, 20)
        eps = 1e-6
        gx = (src.value(x + eps, y) - src.value(x - eps, y)) / (2 * eps)
        gy = (src.value(x, y + eps) - src.value(x, y - eps)) / (2 * eps)
        G = src.grad(x, y)
        assert np.allclose(G[..., 0], gx, atol=1e-8)
        assert np.allclose(G[..., 1], gy, atol=1e-8)


class TestLadder:
    def test_fit_rate_on_synthetic_data(self):
        hs = [0.1, 0.05, 0.025]
        errs = [c * h**1.5 for c, h in zip((1.0, 1.0, 1.0), hs)]
        assert vf.fit_rate(hs, errs) == pytest.approx(1.5, rel=1e-12)
        assert vf.fit_rate(hs, [0.0, 0.0, 0.0]) == np.inf

    def test_small_ladder_report(self):
        rep = vf.refinement_ladder("quadratic_hooke", levels=(8, 16))
        assert len(rep.rows) == 2
        assert rep.rows[1].h1_error < rep.rows[0].h1_error
        assert rep.h1_rate > 0.9
        assert all(r.competitor_ok for r in rep.rows)
