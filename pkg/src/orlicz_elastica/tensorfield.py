"""Discrete tensor calculus on P1 displacement fields.

Under piecewise-linear elements the displacement gradient, its symmetric
part, the deviatoric split and the divergence are all constant per
element, so every integral of them is evaluated exactly.  Loads are
symmetric per-element tensors, optionally backed by an analytic source so
refinement studies can resample and verification can differentiate them.

The module also houses an exact (rational-arithmetic) checker for the
identity ``div div dev sym grad f = ((d-1)/d) laplace div f`` on
polynomial fields, kept deliberately separate from the floating-point
field code.
"""

from fractions import Fraction

import numpy as np

from .mesh import scalar_mass_matrix

__all__ = [
    "DisplacementField",
    "ElementStrain",
    "LoadSource",
    "LoadTensor",
    "compute_strain",
    "decompose_load",
    "Poly2",
    "polynomial_identity_check",
    "h1_norm",
]

_EYE2 = np.eye(2)


class DisplacementField:
    """Nodal vector field tied to a mesh."""

    def __init__(self, mesh, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (mesh.n_nodes, 2):
            raise ValueError(f"expected values of shape ({mesh.n_nodes}, 2), got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("displacement values must be finite")
        self.mesh = mesh
        self.values = values

    @classmethod
    def zero(cls, mesh):
        return cls(mesh, np.zeros((mesh.n_nodes, 2)))

    @classmethod
    def from_function(cls, mesh, fn):
        """Nodal interpolant of ``fn(x, y) -> (2,)`` (vectorized over points)."""
        x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
        vals = np.asarray(fn(x, y), dtype=float)
        if vals.shape == (2, mesh.n_nodes):
            vals = vals.T
        return cls(mesh, vals)

    def copy(self):
        return DisplacementField(self.mesh, self.values.copy())


class ElementStrain:
    """Per-element gradient, symmetric part, deviatoric part and divergence."""

    def __init__(self, grad):
        self.grad = grad  # (m, 2, 2), grad[e, i, j] = d u_i / d x_j
        self.sym = 0.5 * (grad + np.swapaxes(grad, 1, 2))
        self.div = grad[:, 0, 0] + grad[:, 1, 1]
        self.dev = self.sym - 0.5 * self.div[:, None, None] * _EYE2


def compute_strain(mesh, u):
    """Exact per-element strain of a nodal field (constant under P1)."""
    if isinstance(u, DisplacementField):
        if u.mesh is not mesh:
            raise ValueError("field was built on a different mesh")
        vals = u.values
    else:
        vals = np.asarray(u, dtype=float)
        if vals.shape != (mesh.n_nodes, 2):
            raise ValueError("field does not match mesh")
    grad = np.einsum("ela,elb->eab", vals[mesh.elements], mesh.grads)
    return ElementStrain(grad)


class LoadSource:
    """Analytic tensor field ``F(x, y)`` with optional first derivatives.

    ``value(x, y)`` returns shape ``(..., 2, 2)``; ``grad(x, y)`` returns
    ``(..., 2, 2, 2)`` with the last axis the differentiation direction.
    Derivatives are needed only by the rotation (curl) verification.
    """

    def __init__(self, value, grad=None):
        self.value = value
        self.grad = grad

    @classmethod
    def from_expressions(cls, xx, xy, yy):
        """Build from three parsed scalar expressions (see ``expressions``)."""

        def value(x, y):
            x = np.asarray(x, dtype=float)
            a, b, c = (np.broadcast_to(e(x, y), x.shape) for e in (xx, xy, yy))
            out = np.empty(x.shape + (2, 2))
            out[..., 0, 0] = a
            out[..., 0, 1] = b
            out[..., 1, 0] = b
            out[..., 1, 1] = c
            return out

        dx = [xx.diff("x"), xy.diff("x"), yy.diff("x")]
        dy = [xx.diff("y"), xy.diff("y"), yy.diff("y")]

        def grad(x, y):
            x = np.asarray(x, dtype=float)
            out = np.empty(x.shape + (2, 2, 2))
            for k, d in enumerate((dx, dy)):
                a, b, c = (np.broadcast_to(e(x, y), x.shape) for e in d)
                out[..., 0, 0, k] = a
                out[..., 0, 1, k] = b
                out[..., 1, 0, k] = b
                out[..., 1, 1, k] = c
            return out

        return cls(value, grad)


class LoadTensor:
    """Per-element symmetric load tensor with its deviatoric/trace split."""

    def __init__(self, mesh, tensors, source=None):
        tensors = np.asarray(tensors, dtype=float)
        if tensors.shape != (mesh.n_elements, 2, 2):
            raise ValueError(f"expected ({mesh.n_elements}, 2, 2) tensors, got {tensors.shape}")
        asym = np.abs(tensors[:, 0, 1] - tensors[:, 1, 0]).max() if len(tensors) else 0.0
        scale = 1.0 + (np.abs(tensors).max() if len(tensors) else 0.0)
        if asym > 1e-12 * scale:
            raise ValueError(f"load tensor asymmetry {asym:g} exceeds tolerance")
        tensors = 0.5 * (tensors + np.swapaxes(tensors, 1, 2))
        self.mesh = mesh
        self.tensors = tensors
        self.trace = tensors[:, 0, 0] + tensors[:, 1, 1]
        self.dev = tensors - 0.5 * self.trace[:, None, None] * _EYE2
        self.source = source

    @classmethod
    def zero(cls, mesh):
        return cls(mesh, np.zeros((mesh.n_elements, 2, 2)))

    @classmethod
    def from_source(cls, mesh, source):
        """Sample an analytic source at element barycenters."""
        xb, yb = mesh.barycenters[:, 0], mesh.barycenters[:, 1]
        return cls(mesh, source.value(xb, yb), source=source)


def decompose_load(load):
    """Split ``F = F_dev + (tr F / d) I``; returns ``(F_dev, tr F)``."""
    return load.dev, load.trace


def h1_norm(mesh, field):
    """Discrete H1 norm: mass-weighted L2 part plus exact P1 seminorm."""
    vals = field.values if isinstance(field, DisplacementField) else np.asarray(field, float)
    M = scalar_mass_matrix(mesh)
    l2sq = float(vals[:, 0] @ (M @ vals[:, 0]) + vals[:, 1] @ (M @ vals[:, 1]))
    grad = np.einsum("ela,elb->eab", vals[mesh.elements], mesh.grads)
    semisq = float(np.sum(mesh.areas * np.sum(grad * grad, axis=(1, 2))))
    return np.sqrt(l2sq + semisq)


# --------------------------------------------------------------------------
# Exact polynomial identity check (rational arithmetic, no floats)


class Poly2:
    """Bivariate polynomial with exact ``Fraction`` coefficients.

    Minimal on purpose: only what the identity check needs (addition,
    scalar multiplication, differentiation).  Coefficients are stored as
    ``{(i, j): Fraction}`` for the monomial ``x^i y^j``.
    """

    def __init__(self, coeffs=None):
        self.coeffs = {}
        for key, c in (coeffs or {}).items():
            c = Fraction(c)
            if c != 0:
                self.coeffs[(int(key[0]), int(key[1]))] = c

    def __add__(self, other):
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            out[k] = out.get(k, Fraction(0)) + c
        return Poly2(out)

    def __sub__(self, other):
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            out[k] = out.get(k, Fraction(0)) - c
        return Poly2(out)

    def scale(self, factor):
        f = Fraction(factor)
        return Poly2({k: c * f for k, c in self.coeffs.items()})

    def diff(self, var):
        """Exact partial derivative; ``var`` is 0 for x, 1 for y."""
        out = {}
        for (i, j), c in self.coeffs.items():
            e = (i, j)[var]
            if e > 0:
                key = (i - 1, j) if var == 0 else (i, j - 1)
                out[key] = out.get(key, Fraction(0)) + c * e
        return Poly2(out)

    @property
    def degree(self):
        return max((i + j for i, j in self.coeffs), default=0)

    def max_abs_coeff(self):
        return max((abs(c) for c in self.coeffs.values()), default=Fraction(0))

    def __eq__(self, other):
        return isinstance(other, Poly2) and self.coeffs == other.coeffs

    def __repr__(self):
        terms = " + ".join(f"{c}*x^{i}*y^{j}" for (i, j), c in sorted(self.coeffs.items()))
        return f"Poly2({terms or '0'})"


def polynomial_identity_check(f, max_degree=3):
    """Certify ``div div dev sym grad f = (1/2) laplace div f`` exactly (d=2).

    Parameters
    ----------
    f : pair of Poly2
        Components of the vector field.
    max_degree : int
        Supported polynomial degree; higher degrees raise (the identity
        itself holds for any degree, the cap bounds the certified suite).

    Returns
    -------
    float
        Largest absolute coefficient of LHS - RHS; exact zero for every
        polynomial field.
    """
    fx, fy = f
    if max(fx.degree, fy.degree) > max_degree:
        raise ValueError(f"field degree exceeds supported maximum {max_degree}")
    d = 2
    half = Fraction(1, 2)
    grad = [[fx.diff(0), fx.diff(1)], [fy.diff(0), fy.diff(1)]]
    div = grad[0][0] + grad[1][1]
    sym = [
        [
            (grad[i][j] + grad[j][i]).scale(half)
            for j in range(d)
        ]
        for i in range(d)
    ]
    dev = [
        [sym[i][j] - (div.scale(Fraction(1, d)) if i == j else Poly2()) for j in range(d)]
        for i in range(d)
    ]
    lhs = Poly2()
    for i in range(d):
        for j in range(d):
            lhs = lhs + dev[i][j].diff(i).diff(j)
    rhs = (div.diff(0).diff(0) + div.diff(1).diff(1)).scale(Fraction(d - 1, d))
    return float((lhs - rhs).max_abs_coeff())
