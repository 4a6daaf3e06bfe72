"""Simplicial 2D meshes with tagged boundary and P1 element geometry.

A mesh is a triangulation of a polygonal domain whose boundary edges each
carry one of two tags: ``"D"`` (displacement prescribed) or ``"N"``
(traction-free in the tensor-load formulation).  Element geometry (areas
and the constant gradients of the three barycentric basis functions) is
precomputed since every discrete operator here integrates piecewise
constants exactly.

Text mesh format (line oriented, ``#`` starts a comment)::

    nodes N
    x y            # N lines
    elements M
    i j k          # M lines, 0-based, counterclockwise
    boundary B
    i j TAG        # B lines, TAG in {D, N}

"""

import numpy as np
import scipy.sparse as sp

__all__ = [
    "DIRICHLET",
    "NEUMANN",
    "Mesh",
    "DofMap",
    "MeshFormatError",
    "generate_rectangle",
    "load_mesh",
    "save_mesh",
    "build_dofmap",
    "scalar_mass_matrix",
]

DIRICHLET = "D"
NEUMANN = "N"


class MeshFormatError(ValueError):
    """Raised on malformed mesh files; the message carries the line number."""


class Mesh:
    """Immutable triangulation with boundary tags and P1 geometry.

    Parameters
    ----------
    nodes : (n_nodes, 2) float array
    elements : (n_elements, 3) int array
        Vertex indices, counterclockwise.
    boundary_edges : list of (i, j, tag)
        Every edge of the triangulation that lies on the boundary must
        appear exactly once; ``tag`` is ``"D"`` or ``"N"``.
    """

    def __init__(self, nodes, elements, boundary_edges):
        self.nodes = np.ascontiguousarray(nodes, dtype=float)
        self.elements = np.ascontiguousarray(elements, dtype=np.int64)
        if self.nodes.ndim != 2 or self.nodes.shape[1] != 2:
            raise ValueError("nodes must be an (n, 2) array")
        if self.elements.ndim != 2 or self.elements.shape[1] != 3:
            raise ValueError("elements must be an (m, 3) array")
        if not np.all(np.isfinite(self.nodes)):
            raise ValueError("node coordinates must be finite")

        self.boundary_edges = [(int(i), int(j), str(tag)) for i, j, tag in boundary_edges]
        for i, j, tag in self.boundary_edges:
            if tag not in (DIRICHLET, NEUMANN):
                raise ValueError(f"boundary edge ({i}, {j}) has unknown tag {tag!r}")

        self._build_geometry()
        self._validate_boundary()

    def _build_geometry(self):
        tri = self.nodes[self.elements]  # (m, 3, 2)
        e1 = tri[:, 1] - tri[:, 0]
        e2 = tri[:, 2] - tri[:, 0]
        self.areas = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        bad = np.nonzero(self.areas <= 0.0)[0]
        if bad.size:
            raise ValueError(
                f"element {bad[0]} has non-positive area {self.areas[bad[0]]:g} "
                "(vertices must be counterclockwise)"
            )
        # grad lambda_l = rot90(opposite edge) / (2 A); rows sum to zero
        g = np.empty((len(self.elements), 3, 2))
        for l in range(3):
            a = tri[:, (l + 1) % 3]
            b = tri[:, (l + 2) % 3]
            g[:, l, 0] = a[:, 1] - b[:, 1]
            g[:, l, 1] = b[:, 0] - a[:, 0]
        self.grads = g / (2.0 * self.areas)[:, None, None]
        self.barycenters = tri.mean(axis=1)

    def _validate_boundary(self):
        # count how many elements share each (sorted) edge
        count = {}
        for e, (i, j, k) in enumerate(self.elements):
            for a, b in ((i, j), (j, k), (k, i)):
                key = (min(a, b), max(a, b))
                count.setdefault(key, []).append(e)
        hull = {key for key, owners in count.items() if len(owners) == 1}
        seen = set()
        for i, j, tag in self.boundary_edges:
            key = (min(i, j), max(i, j))
            if key not in count:
                raise ValueError(f"boundary edge ({i}, {j}) is not an edge of any element")
            if key not in hull:
                raise ValueError(f"boundary edge ({i}, {j}) is interior (shared by two elements)")
            if key in seen:
                raise ValueError(f"boundary edge ({i}, {j}) tagged twice")
            seen.add(key)
        missing = hull - seen
        if missing:
            i, j = sorted(missing)[0]
            raise ValueError(f"untagged boundary edge ({i}, {j}); every hull edge needs a D/N tag")
        self._edge_owners = count

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_elements(self):
        return len(self.elements)

    @property
    def mesh_size(self):
        """Longest element edge."""
        tri = self.nodes[self.elements]
        h = 0.0
        for l in range(3):
            d = tri[:, (l + 1) % 3] - tri[:, l]
            h = max(h, float(np.max(np.hypot(d[:, 0], d[:, 1]))))
        return h

    @property
    def diameter(self):
        """Bounding-box diagonal (used to scale interior margins)."""
        span = self.nodes.max(axis=0) - self.nodes.min(axis=0)
        return float(np.hypot(span[0], span[1]))

    def dirichlet_nodes(self):
        out = set()
        for i, j, tag in self.boundary_edges:
            if tag == DIRICHLET:
                out.update((i, j))
        return np.array(sorted(out), dtype=np.int64)

    def boundary_nodes(self):
        out = set()
        for i, j, _ in self.boundary_edges:
            out.update((i, j))
        return np.array(sorted(out), dtype=np.int64)

    def interior_edges(self):
        """Interior edge table for edge-wise (jump) assembly.

        Returns arrays ``(na, nb, e_plus, e_minus, normal, length)`` where
        ``normal`` is the unit normal pointing out of ``e_plus``.
        """
        na, nb, ep, em = [], [], [], []
        for (a, b), owners in self._edge_owners.items():
            if len(owners) == 2:
                na.append(a)
                nb.append(b)
                ep.append(owners[0])
                em.append(owners[1])
        na = np.array(na, dtype=np.int64)
        nb = np.array(nb, dtype=np.int64)
        ep = np.array(ep, dtype=np.int64)
        em = np.array(em, dtype=np.int64)
        tang = self.nodes[nb] - self.nodes[na]
        length = np.hypot(tang[:, 0], tang[:, 1])
        normal = np.stack([tang[:, 1], -tang[:, 0]], axis=1) / length[:, None]
        # orient out of e_plus: normal must point away from its barycenter
        mid = 0.5 * (self.nodes[na] + self.nodes[nb])
        flip = np.einsum("ij,ij->i", normal, mid - self.barycenters[ep]) < 0
        normal[flip] *= -1.0
        return na, nb, ep, em, normal, length

    def boundary_distance(self, points):
        """Distance from each point to the boundary polyline."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        segs = np.array([(i, j) for i, j, _ in self.boundary_edges], dtype=np.int64)
        a = self.nodes[segs[:, 0]]
        b = self.nodes[segs[:, 1]]
        ab = b - a
        denom = np.einsum("ij,ij->i", ab, ab)
        ap = pts[:, None, :] - a[None, :, :]
        t = np.clip(np.einsum("pij,ij->pi", ap, ab) / denom, 0.0, 1.0)
        proj = a[None, :, :] + t[:, :, None] * ab[None, :, :]
        d = np.linalg.norm(pts[:, None, :] - proj, axis=2)
        return d.min(axis=1)

    def node_element_adjacency(self):
        """List of element indices incident to each node."""
        adj = [[] for _ in range(self.n_nodes)]
        for e, verts in enumerate(self.elements):
            for v in verts:
                adj[v].append(e)
        return adj


def generate_rectangle(nx, ny, extent=(0.0, 1.0, 0.0, 1.0), boundary_spec=None):
    """Structured triangulation of a rectangle, 2 nx ny triangles.

    Each grid cell is split along the same diagonal (lower-left to
    upper-right), which keeps refinement studies reproducible and gives
    every interior node valence 6.

    Parameters
    ----------
    nx, ny : int
        Cells per direction, >= 1.
    extent : (x0, x1, y0, y1)
    boundary_spec : dict, optional
        Tags per side, e.g. ``{"left": "D", "right": "N", "bottom": "D",
        "top": "N"}``.  Defaults to all-Dirichlet.
    """
    nx, ny = int(nx), int(ny)
    if nx < 1 or ny < 1:
        raise ValueError("nx and ny must be >= 1")
    x0, x1, y0, y1 = map(float, extent)
    if x1 <= x0 or y1 <= y0:
        raise ValueError(f"degenerate extent {extent}")
    tags = {"left": DIRICHLET, "right": DIRICHLET, "bottom": DIRICHLET, "top": DIRICHLET}
    if boundary_spec:
        unknown = set(boundary_spec) - set(tags)
        if unknown:
            raise ValueError(f"unknown boundary side(s) {sorted(unknown)}")
        tags.update(boundary_spec)

    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.stack([X.ravel(), Y.ravel()], axis=1)

    def nid(i, j):
        return j * (nx + 1) + i

    elements = []
    for j in range(ny):
        for i in range(nx):
            elements.append((nid(i, j), nid(i + 1, j), nid(i + 1, j + 1)))
            elements.append((nid(i, j), nid(i + 1, j + 1), nid(i, j + 1)))

    bedges = []
    for i in range(nx):
        bedges.append((nid(i, 0), nid(i + 1, 0), tags["bottom"]))
        bedges.append((nid(i, ny), nid(i + 1, ny), tags["top"]))
    for j in range(ny):
        bedges.append((nid(0, j), nid(0, j + 1), tags["left"]))
        bedges.append((nid(nx, j), nid(nx, j + 1), tags["right"]))
    return Mesh(nodes, np.array(elements), bedges)


def load_mesh(path):
    """Parse the text mesh format; see the module docstring for the grammar."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.readlines()
    lines = []
    for ln, text in enumerate(raw, start=1):
        body = text.split("#", 1)[0].strip()
        if body:
            lines.append((ln, body))
    pos = 0

    def next_line(what):
        nonlocal pos
        if pos >= len(lines):
            raise MeshFormatError(f"unexpected end of file while reading {what}")
        item = lines[pos]
        pos += 1
        return item

    def read_header(keyword):
        ln, body = next_line(f"'{keyword}' header")
        parts = body.split()
        if len(parts) != 2 or parts[0] != keyword:
            raise MeshFormatError(f"line {ln}: expected '{keyword} <count>', got {body!r}")
        try:
            n = int(parts[1])
        except ValueError:
            raise MeshFormatError(f"line {ln}: bad count {parts[1]!r}") from None
        if n < 0:
            raise MeshFormatError(f"line {ln}: negative count {n}")
        return n

    n_nodes = read_header("nodes")
    nodes = np.empty((n_nodes, 2))
    for r in range(n_nodes):
        ln, body = next_line("node coordinates")
        parts = body.split()
        if len(parts) != 2:
            raise MeshFormatError(f"line {ln}: expected 'x y', got {body!r}")
        try:
            nodes[r] = [float(parts[0]), float(parts[1])]
        except ValueError:
            raise MeshFormatError(f"line {ln}: bad coordinate in {body!r}") from None

    n_elems = read_header("elements")
    elements = np.empty((n_elems, 3), dtype=np.int64)
    for r in range(n_elems):
        ln, body = next_line("element connectivity")
        parts = body.split()
        if len(parts) != 3:
            raise MeshFormatError(f"line {ln}: expected 'i j k', got {body!r}")
        try:
            elements[r] = [int(p) for p in parts]
        except ValueError:
            raise MeshFormatError(f"line {ln}: bad vertex index in {body!r}") from None
        if elements[r].min() < 0 or elements[r].max() >= n_nodes:
            raise MeshFormatError(f"line {ln}: vertex index out of range in {body!r}")

    n_bed = read_header("boundary")
    bedges = []
    for r in range(n_bed):
        ln, body = next_line("boundary edge")
        parts = body.split()
        if len(parts) != 3 or parts[2] not in (DIRICHLET, NEUMANN):
            raise MeshFormatError(f"line {ln}: expected 'i j D|N', got {body!r}")
        try:
            bedges.append((int(parts[0]), int(parts[1]), parts[2]))
        except ValueError:
            raise MeshFormatError(f"line {ln}: bad vertex index in {body!r}") from None

    if pos != len(lines):
        ln, body = lines[pos]
        raise MeshFormatError(f"line {ln}: trailing content {body!r}")
    return Mesh(nodes, elements, bedges)


def save_mesh(mesh, path):
    """Write the text mesh format (inverse of :func:`load_mesh`)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"nodes {mesh.n_nodes}\n")
        for x, y in mesh.nodes:
            fh.write(f"{x:.17g} {y:.17g}\n")
        fh.write(f"elements {mesh.n_elements}\n")
        for i, j, k in mesh.elements:
            fh.write(f"{i} {j} {k}\n")
        fh.write(f"boundary {len(mesh.boundary_edges)}\n")
        for i, j, tag in mesh.boundary_edges:
            fh.write(f"{i} {j} {tag}\n")


def scalar_mass_matrix(mesh):
    """Consistent P1 mass matrix (exact for piecewise-linear integrands)."""
    m = mesh.n_elements
    local = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
    data = (local[None, :, :] * mesh.areas[:, None, None]).ravel()
    rows = np.repeat(mesh.elements, 3, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, 3)).ravel()
    return sp.coo_matrix((data, (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes)).tocsr()


class DofMap:
    """Component-major numbering of displacement dofs with constraint data.

    Dof ``comp * n_nodes + node`` holds component ``comp`` of the
    displacement at ``node``.  ``dirichlet_mask`` is True exactly on dofs
    whose node touches a Dirichlet-tagged edge (a node where tags meet is
    treated as Dirichlet).  On a pure-Neumann mesh the kernel of the
    symmetric gradient is spanned by ``rigid_mode_basis``: two translations
    and one infinitesimal rotation, orthonormalized in the mass-weighted
    inner product so that projections are single dot products.
    """

    def __init__(self, mesh):
        self.n_nodes = mesh.n_nodes
        self.n_dofs = 2 * mesh.n_nodes
        dn = mesh.dirichlet_nodes()
        mask = np.zeros(self.n_dofs, dtype=bool)
        mask[dn] = True
        mask[self.n_nodes + dn] = True
        self.dirichlet_mask = mask
        self.free = np.nonzero(~mask)[0]

        self.rigid_mode_basis = None
        self.rigid_duals = None  # mass-weighted duals, comp-major flat
        if dn.size == 0:
            M = scalar_mass_matrix(mesh)
            x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
            one = np.ones_like(x)
            zero = np.zeros_like(x)
            raw = [
                np.stack([one, zero], axis=1),
                np.stack([zero, one], axis=1),
                np.stack([-y, x], axis=1),
            ]
            # Gram-Schmidt in the vector mass inner product
            basis = []
            for v in raw:
                for b in basis:
                    v = v - self._mass_dot(M, b, v) * b
                v = v / np.sqrt(self._mass_dot(M, v, v))
                basis.append(v)
            self.rigid_mode_basis = np.array(basis)
            self.rigid_duals = np.array(
                [self.flatten(np.stack([M @ b[:, 0], M @ b[:, 1]], axis=1)) for b in basis]
            )

    @staticmethod
    def _mass_dot(M, u, v):
        return float(u[:, 0] @ (M @ v[:, 0]) + u[:, 1] @ (M @ v[:, 1]))

    def dof_index(self, node, comp):
        return comp * self.n_nodes + node

    def flatten(self, field):
        """(n_nodes, 2) nodal field -> component-major dof vector."""
        field = np.asarray(field, dtype=float)
        return np.concatenate([field[:, 0], field[:, 1]])

    def unflatten(self, vec):
        vec = np.asarray(vec, dtype=float)
        return np.stack([vec[: self.n_nodes], vec[self.n_nodes :]], axis=1)

    @property
    def has_rigid_modes(self):
        return self.rigid_mode_basis is not None

    def project_out_rigid(self, field):
        """Remove the mass-orthogonal rigid components of a nodal field."""
        if not self.has_rigid_modes:
            return field
        flat = self.flatten(field)
        for dual, b in zip(self.rigid_duals, self.rigid_mode_basis):
            field = field - (dual @ flat) * b
        return field

    def project_dual_out_rigid(self, r):
        """Make a dof-vector functional annihilate the rigid modes."""
        if not self.has_rigid_modes:
            return r
        for dual, b in zip(self.rigid_duals, self.rigid_mode_basis):
            r = r - (r @ self.flatten(b)) * dual
        return r


def build_dofmap(mesh):
    """Construct the :class:`DofMap` for a mesh."""
    return DofMap(mesh)
