"""Discrete energy functional, its first variation and its Newton Hessian.

The stored energy per unit area is ``mu |dev sym grad u|^2 + phi(div u)``
minus the load pairing ``F : sym grad u``.  With P1 elements every
integrand is constant per element, so the three energy terms are computed
exactly (element value times area, accumulated with compensated
summation).  The deviatoric part is exactly quadratic by design: the
constant-shear-modulus structure is hard-coded and not configurable.
"""

import math

import numpy as np
import scipy.sparse as sp

from .mesh import build_dofmap
from .nfunction import check_convexity
from .tensorfield import DisplacementField, LoadTensor, compute_strain

__all__ = [
    "Problem",
    "EnergyBreakdown",
    "evaluate_energy",
    "residual",
    "hessian",
    "apply_dirichlet_lifting",
    "extract_free_values",
]

_DIRICHLET_TOL = 1e-10


class Problem:
    """Immutable problem data: mesh, dofs, shear modulus, bulk density, load.

    Parameters
    ----------
    mesh : Mesh
    mu : float
        Shear modulus, > 0.
    phi : NFunction
        Bulk energy density; must pass the sampled convexity check.
    load : LoadTensor
        Per-element symmetric tensor load.
    u0 : DisplacementField, optional
        Dirichlet datum, stored as a full nodal field used for lifting.
        Must be the zero field when the mesh has no Dirichlet edges.
    dofs : DofMap, optional
        Built from the mesh when omitted.
    """

    def __init__(self, mesh, mu, phi, load, u0=None, dofs=None):
        if mu <= 0:
            raise ValueError(f"shear modulus must be positive, got {mu}")
        if not check_convexity(phi):
            raise ValueError("phi failed the sampled convexity check")
        if load.mesh is not mesh:
            raise ValueError("load was built on a different mesh")
        self.mesh = mesh
        self.dofs = dofs if dofs is not None else build_dofmap(mesh)
        self.mu = float(mu)
        self.phi = phi
        self.load = load
        self.u0 = u0 if u0 is not None else DisplacementField.zero(mesh)
        if self.u0.mesh is not mesh:
            raise ValueError("u0 was built on a different mesh")
        if self.dofs.has_rigid_modes and np.any(self.u0.values != 0.0):
            raise ValueError("u0 must be the zero field when no boundary is Dirichlet")
        # diagnostic only: coercivity relies on superlinear growth, flag
        # densities that look subquadratic over the working range
        with np.errstate(over="ignore"):
            r = phi.value(200.0) / max(phi.value(100.0), 1e-300)
        self.phi_subquadratic_hint = bool(r < 3.9)

    @property
    def pure_neumann(self):
        return self.dofs.has_rigid_modes


class EnergyBreakdown:
    """Shear, bulk and load parts of the energy; ``total = shear + bulk - load``."""

    def __init__(self, shear, bulk, load):
        self.shear = float(shear)
        self.bulk = float(bulk)
        self.load = float(load)
        self.total = self.shear + self.bulk - self.load

    def __repr__(self):
        return (
            f"EnergyBreakdown(shear={self.shear:.6g}, bulk={self.bulk:.6g}, "
            f"load={self.load:.6g}, total={self.total:.6g})"
        )


def _check_dirichlet(prob, u):
    dn = prob.mesh.dirichlet_nodes()
    if dn.size == 0:
        return
    gap = np.abs(u.values[dn] - prob.u0.values[dn]).max()
    scale = 1.0 + np.abs(prob.u0.values).max()
    if gap > _DIRICHLET_TOL * scale:
        raise ValueError(f"field violates Dirichlet data by {gap:g}")


def _as_field(prob, u):
    if isinstance(u, DisplacementField):
        return u
    return DisplacementField(prob.mesh, u)


def evaluate_energy(prob, u):
    """Exact energy of an admissible field (Dirichlet match is enforced)."""
    u = _as_field(prob, u)
    _check_dirichlet(prob, u)
    s = compute_strain(prob.mesh, u)
    a = prob.mesh.areas
    shear = math.fsum(a * (prob.mu * np.sum(s.dev * s.dev, axis=(1, 2))))
    bulk = math.fsum(a * prob.phi.value(s.div))
    load = math.fsum(a * np.sum(prob.load.tensors * s.sym, axis=(1, 2)))
    return EnergyBreakdown(shear, bulk, load)


def _residual_nodal(prob, strain):
    """Nodal assembly of the first variation (all dofs, before constraints)."""
    mesh = prob.mesh
    T = 2.0 * prob.mu * strain.dev - prob.load.tensors  # pairs against sym grad v
    phid = prob.phi.deriv(strain.div)
    contrib = np.einsum("eab,elb->ela", T, mesh.grads) + phid[:, None, None] * mesh.grads
    contrib *= mesh.areas[:, None, None]
    out = np.zeros((mesh.n_nodes, 2))
    for l in range(3):
        np.add.at(out, mesh.elements[:, l], contrib[:, l, :])
    return out


def residual(prob, u):
    """First variation over free dofs: ``r[v] = J'(u)[v]`` per basis function.

    Dirichlet rows are excluded.  On a pure-Neumann problem all dofs are
    free and the result is orthogonalized against the rigid modes (whose
    pairing vanishes analytically; this removes the roundoff residue).
    """
    u = _as_field(prob, u)
    _check_dirichlet(prob, u)
    r = prob.dofs.flatten(_residual_nodal(prob, compute_strain(prob.mesh, u)))
    if prob.pure_neumann:
        return prob.dofs.project_dual_out_rigid(r)
    return r[prob.dofs.free]


def hessian(prob, u):
    """Second variation on free dofs, assembled in CSR form.

    ``H[v, w] = int 2 mu dev(v) : dev(w) + phi''(div u) div v div w``; the
    matrix is symmetric and positive semidefinite for convex ``phi`` (and
    positive definite on the free dofs once Dirichlet or rigid-mode
    handling removes the kernel).
    """
    u = _as_field(prob, u)
    _check_dirichlet(prob, u)
    mesh = prob.mesh
    s = compute_strain(mesh, u)
    phidd = np.asarray(prob.phi.deriv2(s.div))
    G = mesh.grads
    gg = np.einsum("elb,emb->elm", G, G)
    t2 = np.einsum("elb,ema->elamb", G, G)
    t3 = np.einsum("ela,emb->elamb", G, G)
    mu = prob.mu
    block = mu * (t2 - t3) + phidd[:, None, None, None, None] * t3
    block[:, :, 0, :, 0] += mu * gg
    block[:, :, 1, :, 1] += mu * gg
    block *= mesh.areas[:, None, None, None, None]

    n = mesh.n_nodes
    dofs_la = mesh.elements[:, :, None] + n * np.arange(2)[None, None, :]  # (m, 3, 2)
    rows = np.broadcast_to(dofs_la[:, :, :, None, None], block.shape)
    cols = np.broadcast_to(dofs_la[:, None, None, :, :], block.shape)
    H = sp.coo_matrix(
        (block.ravel(), (rows.ravel(), cols.ravel())), shape=(2 * n, 2 * n)
    ).tocsr()
    if prob.pure_neumann:
        return H
    free = prob.dofs.free
    return H[free][:, free]


def apply_dirichlet_lifting(prob, free_values):
    """Assemble the full nodal field from free-dof values.

    Dirichlet dofs take the values of ``u0``.  On a pure-Neumann problem
    this is the identity followed by the rigid-mode projection, which
    makes lifted iterates unique representatives.
    """
    flat = prob.dofs.flatten(prob.u0.values)
    free_values = np.asarray(free_values, dtype=float)
    if free_values.shape != prob.dofs.free.shape:
        raise ValueError(
            f"expected {prob.dofs.free.size} free values, got {free_values.shape}"
        )
    flat[prob.dofs.free] = free_values
    field = prob.dofs.unflatten(flat)
    if prob.pure_neumann:
        field = prob.dofs.project_out_rigid(field)
    return DisplacementField(prob.mesh, field)


def extract_free_values(prob, u):
    """Free-dof values of a field (inverse of the lifting on its range)."""
    u = _as_field(prob, u)
    return prob.dofs.flatten(u.values)[prob.dofs.free]
