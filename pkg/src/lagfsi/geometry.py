"""Reference configuration: container, solid inclusions, interface and charts.

The container is a disk (or a box, for flat-interface studies) meshed with
straight-sided triangles.  Solid inclusions are disks strictly inside the
container.  The mesher places nodes on every circle with chord length at most
``h``, fills the interior with a hexagonal lattice kept away from the circles,
and runs a Delaunay triangulation.  Lattice points closer than ``0.7 h`` to a
circle are discarded, which makes every polygon edge a Gabriel edge and hence
an edge of the triangulation, so the interface is always resolved by facets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import Delaunay

FLUID = 0
SOLID = 1


class GeometryError(ValueError):
    """Raised for inadmissible reference configurations."""


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming triangle mesh of the container with fluid/solid tags.

    Attributes
    ----------
    nodes : ndarray, shape (n, 2)
    elements : ndarray, shape (m, 3)
        Counter-clockwise vertex indices.
    tags : ndarray, shape (m,)
        ``FLUID`` or ``SOLID`` per element.
    interface_facets : ndarray, shape (k, 2)
        Vertex pairs on the fluid/solid interface.
    interface_elements : ndarray, shape (k, 2)
        ``(fluid element, solid element)`` adjacent to each interface facet.
    outer_facets : ndarray, shape (b, 2)
    outer_elements : ndarray, shape (b,)
    separation : float
        Smallest distance between two solid components or between a solid and
        the container wall (``inf`` without solids).
    """

    nodes: np.ndarray
    elements: np.ndarray
    tags: np.ndarray
    interface_facets: np.ndarray
    interface_elements: np.ndarray
    outer_facets: np.ndarray
    outer_elements: np.ndarray
    separation: float = np.inf
    dim: int = 2
    meta: dict = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def element_areas(self) -> np.ndarray:
        p = self.nodes[self.elements]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def domain_area(self) -> float:
        """Area enclosed by the outer boundary polygon."""
        return float(_loop_area(self.nodes, self.outer_facets))

    def fluid_area(self) -> float:
        return float(self.element_areas()[self.tags == FLUID].sum())

    def solid_area(self) -> float:
        return float(self.element_areas()[self.tags == SOLID].sum())

    @property
    def h(self) -> float:
        """Longest edge length."""
        p = self.nodes[self.elements]
        lengths = np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2)
        return float(lengths.max())

    def validate(self, solid_may_touch_boundary: bool = False) -> None:
        """Check the mesh invariants, raising ``GeometryError`` on failure."""
        areas = self.element_areas()
        if np.any(areas <= 0):
            raise GeometryError("mesh has non-positive element areas")
        edge_elems = _edge_to_elements(self.elements)
        for (i, j), elems in edge_elems.items():
            if len(elems) > 2:
                raise GeometryError(f"edge ({i}, {j}) shared by {len(elems)} elements")
        tags = self.tags
        for (f, s) in self.interface_elements:
            if tags[f] != FLUID or tags[s] != SOLID:
                raise GeometryError("interface facet not between a fluid and a solid element")
        if not solid_may_touch_boundary and np.any(tags[self.outer_elements] != FLUID):
            raise GeometryError("solid element touches the container boundary")
        total = areas.sum()
        if abs(total - self.domain_area()) > 1e-10 * abs(total):
            raise GeometryError("element areas do not cover the domain")


def _edge_to_elements(elements: np.ndarray) -> dict:
    table: dict = {}
    for e, tri in enumerate(elements):
        for a, b in ((0, 1), (1, 2), (2, 0)):
            key = tuple(sorted((int(tri[a]), int(tri[b]))))
            table.setdefault(key, []).append(e)
    return table


def _loop_area(nodes: np.ndarray, facets: np.ndarray) -> float:
    # facets are oriented counter-clockwise with respect to the interior
    p0 = nodes[facets[:, 0]]
    p1 = nodes[facets[:, 1]]
    return 0.5 * np.sum(p0[:, 0] * p1[:, 1] - p1[:, 0] * p0[:, 1])


def mesh_from_triangles(nodes, elements, tags, separation=np.inf, meta=None) -> Mesh:
    """Assemble a :class:`Mesh` from raw arrays, extracting the facet sets."""
    nodes = np.asarray(nodes, dtype=float)
    elements = np.asarray(elements, dtype=np.int64).copy()
    tags = np.asarray(tags, dtype=np.int8)
    p = nodes[elements]
    cross = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (
        p[:, 1, 1] - p[:, 0, 1]
    ) * (p[:, 2, 0] - p[:, 0, 0])
    flip = cross < 0
    elements[flip] = elements[flip][:, [0, 2, 1]]

    outer, outer_el, iface, iface_el = [], [], [], []
    edge_elems = _edge_to_elements(elements)
    for (i, j), elems in sorted(edge_elems.items()):
        if len(elems) == 1:
            e = elems[0]
            outer.append(_oriented_edge(elements[e], i, j))
            outer_el.append(e)
        elif tags[elems[0]] != tags[elems[1]]:
            f, s = (elems[0], elems[1]) if tags[elems[0]] == FLUID else (elems[1], elems[0])
            iface.append(_oriented_edge(elements[f], i, j))
            iface_el.append((f, s))
    return Mesh(
        nodes=nodes,
        elements=elements,
        tags=tags,
        interface_facets=np.array(iface, dtype=np.int64).reshape(-1, 2),
        interface_elements=np.array(iface_el, dtype=np.int64).reshape(-1, 2),
        outer_facets=np.array(outer, dtype=np.int64).reshape(-1, 2),
        outer_elements=np.array(outer_el, dtype=np.int64),
        separation=float(separation),
        meta=dict(meta or {}),
    )


def _oriented_edge(tri, i, j):
    """Return (i, j) ordered as it appears counter-clockwise in ``tri``."""
    tri = list(tri)
    a = tri.index(i)
    return (i, j) if tri[(a + 1) % 3] == j else (j, i)


def _circle_points(center, radius, h):
    n = max(8, int(np.ceil(2 * np.pi * radius / h)))
    theta = 2 * np.pi * np.arange(n) / n
    return np.column_stack(
        [center[0] + radius * np.cos(theta), center[1] + radius * np.sin(theta)]
    )


def _hex_lattice(xmin, xmax, ymin, ymax, h):
    dy = h * np.sqrt(3) / 2
    rows = []
    for k, y in enumerate(np.arange(ymin, ymax + dy, dy)):
        x = np.arange(xmin + (0.5 * h if k % 2 else 0.0), xmax + h, h)
        rows.append(np.column_stack([x, np.full_like(x, y)]))
    return np.vstack(rows)


def _inside_convex(points, polygon):
    """Strict point-in-convex-polygon test (polygon counter-clockwise)."""
    inside = np.ones(len(points), dtype=bool)
    for a, b in zip(polygon, np.roll(polygon, -1, axis=0)):
        edge = b - a
        rel = points - a
        inside &= edge[0] * rel[:, 1] - edge[1] * rel[:, 0] > 0
    return inside


def solid_separation(container_radius: float, solids: Sequence[tuple]) -> float:
    """Smallest solid-solid or solid-wall distance for disk inclusions.

    Raises
    ------
    GeometryError
        If a solid is not strictly inside the container or two solids touch.
    """
    d = np.inf
    for k, (cx, cy, r) in enumerate(solids):
        if r <= 0:
            raise GeometryError(f"solid {k} has non-positive radius")
        gap = container_radius - np.hypot(cx, cy) - r
        if gap <= 0:
            raise GeometryError(f"solid {k} not strictly interior to the container")
        d = min(d, gap)
        for j in range(k):
            ox, oy, orad = solids[j]
            gap = np.hypot(cx - ox, cy - oy) - r - orad
            if gap <= 0:
                raise GeometryError(f"solids {j} and {k} touch or overlap")
            d = min(d, gap)
    return float(d)


def disk_mesh(container_radius, solids=(), h=0.1, tag_all=None) -> Mesh:
    """Mesh a disk container of the given radius centred at the origin.

    Parameters
    ----------
    container_radius : float
    solids : sequence of (x, y, r)
        Disk inclusions.
    h : float
        Target edge length.
    tag_all : int, optional
        Tag every element with this value (e.g. ``SOLID`` for a clamped solid
        body used by the eigenmode check).  Inclusions are ignored then.
    """
    R = float(container_radius)
    solids = [tuple(map(float, s)) for s in solids]
    d = solid_separation(R, solids) if solids else np.inf
    if solids and d < h:
        raise GeometryError(f"mesh size h={h} does not resolve the gap d={d:.4g}")
    outer = _circle_points((0.0, 0.0), R, h)
    rings = [_circle_points((cx, cy), r, h) for cx, cy, r in solids]
    lattice = _hex_lattice(-R, R, -R, R, h)
    keep = np.hypot(lattice[:, 0], lattice[:, 1]) < R - 0.7 * h
    keep &= _inside_convex(lattice, outer)
    for cx, cy, r in solids:
        keep &= np.abs(np.hypot(lattice[:, 0] - cx, lattice[:, 1] - cy) - r) > 0.7 * h
    points = np.vstack([outer, *rings, lattice[keep]])
    tri = Delaunay(points).simplices
    tags = np.full(len(tri), FLUID, dtype=np.int8)
    if tag_all is not None:
        tags[:] = tag_all
    else:
        centroids = points[tri].mean(axis=1)
        for ring in rings:
            tags[_inside_convex(centroids, ring)] = SOLID
    meta = {"kind": "disk", "container_radius": R, "solids": solids, "h": h}
    mesh = mesh_from_triangles(points, tri, tags, separation=d, meta=meta)
    mesh.validate(solid_may_touch_boundary=tag_all is not None)
    return mesh


def box_mesh(width, height, nx, ny, solid_box=None) -> Mesh:
    """Structured right-triangle mesh of ``[0, width] x [0, height]``.

    ``solid_box = (x0, x1, y0, y1)`` marks an axis-aligned solid block; its
    sides must fall on grid lines.  Used for flat-interface studies.
    """
    x = np.linspace(0.0, width, nx + 1)
    y = np.linspace(0.0, height, ny + 1)
    X, Y = np.meshgrid(x, y)
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    a = idx[:-1, :-1].ravel()
    b = idx[:-1, 1:].ravel()
    c = idx[1:, 1:].ravel()
    dd = idx[1:, :-1].ravel()
    tri = np.vstack([np.column_stack([a, b, c]), np.column_stack([a, c, dd])])
    tags = np.full(len(tri), FLUID, dtype=np.int8)
    separation = np.inf
    if solid_box is not None:
        x0, x1, y0, y1 = solid_box
        cen = nodes[tri].mean(axis=1)
        inside = (cen[:, 0] > x0) & (cen[:, 0] < x1) & (cen[:, 1] > y0) & (cen[:, 1] < y1)
        tags[inside] = SOLID
        separation = min(x0, width - x1, y0, height - y1)
        if separation <= 0:
            raise GeometryError("solid not strictly interior")
    meta = {"kind": "box", "width": width, "height": height, "solid_box": solid_box}
    mesh = mesh_from_triangles(nodes, tri, tags, separation=separation, meta=meta)
    mesh.validate()
    return mesh


def build_reference_config(geometry) -> Mesh:
    """Build the reference mesh described by a geometry block.

    ``geometry`` needs ``container_radius``, ``solids`` (list of ``(x, y, r)``)
    and ``h``; a :class:`lagfsi.config.SimulationConfig` is accepted as well.
    The minimal solid separation is stored on ``Mesh.separation``.
    """
    geometry = getattr(geometry, "geometry", geometry)
    return disk_mesh(geometry.container_radius, geometry.solids, geometry.h)


# -- interface normals --------------------------------------------------------


def interface_normals(mesh: Mesh) -> np.ndarray:
    """Unit normals of all interface facets, pointing from fluid into solid."""
    p0 = mesh.nodes[mesh.interface_facets[:, 0]]
    p1 = mesh.nodes[mesh.interface_facets[:, 1]]
    e = p1 - p0
    # facets are counter-clockwise w.r.t. the fluid element: outward is (ey, -ex)
    n = np.column_stack([e[:, 1], -e[:, 0]])
    return n / np.linalg.norm(n, axis=1, keepdims=True)


def outer_normals(mesh: Mesh) -> np.ndarray:
    """Outward unit normals of the container boundary facets."""
    p0 = mesh.nodes[mesh.outer_facets[:, 0]]
    p1 = mesh.nodes[mesh.outer_facets[:, 1]]
    e = p1 - p0
    n = np.column_stack([e[:, 1], -e[:, 0]])
    return n / np.linalg.norm(n, axis=1, keepdims=True)


def interface_normal(mesh: Mesh, facet) -> np.ndarray:
    """Unit normal ``N`` of one interface facet, pointing into the solid.

    ``facet`` is either an index into ``mesh.interface_facets`` or a vertex
    pair ``(i, j)``.
    """
    if isinstance(facet, (int, np.integer)):
        if not 0 <= facet < len(mesh.interface_facets):
            raise GeometryError(f"no interface facet with index {facet}")
        k = int(facet)
    else:
        key = tuple(sorted(int(v) for v in facet))
        matches = np.flatnonzero(
            (np.sort(mesh.interface_facets, axis=1) == np.array(key)).all(axis=1)
        )
        if len(matches) == 0:
            raise GeometryError(f"facet {key} is not an interface facet")
        k = int(matches[0])
    return interface_normals(mesh)[k]


def vertex_interface_normals(mesh: Mesh) -> dict:
    """Averaged unit normal at every interface vertex."""
    normals = interface_normals(mesh)
    acc: dict = {}
    for (i, j), n in zip(mesh.interface_facets, normals):
        for v in (int(i), int(j)):
            acc[v] = acc.get(v, 0.0) + n
    return {v: n / np.linalg.norm(n) for v, n in acc.items()}


# -- boundary-straightening chart ---------------------------------------------


class LocalChart:
    """Shear chart flattening the interface near a point.

    Local coordinates ``(s, z)`` are measured from ``origin`` along ``tangent``
    and ``normal`` (the latter points into the fluid).  With the graph
    ``z = gamma(s)`` describing the interface,

    ``Phi(x) = (s, z - gamma(s))`` and ``Psi(y) = origin + y0 t + (y1 + gamma(y0)) n``.

    The shear part of ``grad Psi`` is ``[[1, 0], [gamma', 1]]``, whose
    determinant is exactly one.
    """

    def __init__(
        self,
        gamma: Callable,
        dgamma: Callable,
        origin=(0.0, 0.0),
        normal=(0.0, 1.0),
        radius: float = np.inf,
        n_samples: int = 0,
        rng: np.random.Generator | None = None,
    ):
        self.gamma = gamma
        self.dgamma = dgamma
        self.origin = np.asarray(origin, dtype=float)
        n = np.asarray(normal, dtype=float)
        self.normal = n / np.linalg.norm(n)
        # right-handed frame: det[t | n] = 1
        self.tangent = np.array([self.normal[1], -self.normal[0]])
        self.radius = float(radius)
        self.frame = np.column_stack([self.tangent, self.normal])
        if n_samples:
            rng = rng or np.random.default_rng(0)
            r = min(self.radius, 1.0)
            self.sample_points = rng.uniform(-r / 2, r / 2, size=(n_samples, 2))
            self.metric = self.inverse_jacobian(self.sample_points)
        else:
            self.sample_points = np.zeros((0, 2))
            self.metric = np.zeros((0, 2, 2))

    def to_local(self, x):
        return (np.asarray(x, dtype=float) - self.origin) @ self.frame

    def to_global(self, sz):
        return self.origin + np.asarray(sz, dtype=float) @ self.frame.T

    def phi(self, x):
        sz = self.to_local(x)
        s, z = sz[..., 0], sz[..., 1]
        return np.stack([s, z - self.gamma(s)], axis=-1)

    def psi(self, y):
        y = np.asarray(y, dtype=float)
        s = y[..., 0]
        return self.to_global(np.stack([s, y[..., 1] + self.gamma(s)], axis=-1))

    def shear_jacobian(self, y):
        """``grad Psi`` in the local frame."""
        y = np.atleast_2d(y)
        J = np.zeros(y.shape[:-1] + (2, 2))
        J[..., 0, 0] = 1.0
        J[..., 1, 1] = 1.0
        J[..., 1, 0] = self.dgamma(y[..., 0])
        return J

    def jacobian(self, y):
        """``grad Psi`` in global coordinates."""
        return self.frame @ self.shear_jacobian(y)

    def inverse_jacobian(self, y):
        """Metric factor ``[grad Psi]^{-1}`` in the local frame."""
        g = self.shear_jacobian(y)
        g[..., 1, 0] *= -1.0
        return g

    def contains(self, y) -> np.ndarray:
        y = np.atleast_2d(y)
        return np.linalg.norm(y, axis=-1) <= self.radius


def straighten_interface(mesh: Mesh, anchor, radius: float, n_samples: int = 64) -> LocalChart:
    """Chart flattening the interface polyline around ``anchor``.

    The interface chain through ``anchor`` is walked in both directions until
    it leaves the ball of the given radius.  The chain must be a graph over the
    tangent line at ``anchor``; otherwise a ``GeometryError`` is raised.
    """
    anchor = np.asarray(anchor, dtype=float)
    facets = mesh.interface_facets
    p0 = mesh.nodes[facets[:, 0]]
    p1 = mesh.nodes[facets[:, 1]]
    e = p1 - p0
    t = np.clip(np.einsum("ij,ij->i", anchor - p0, e) / np.einsum("ij,ij->i", e, e), 0, 1)
    dist = np.linalg.norm(p0 + t[:, None] * e - anchor, axis=1)
    k = int(np.argmin(dist)) if len(dist) else -1
    if k < 0 or dist[k] > 1e-9 * max(mesh.h, 1.0):
        raise GeometryError("anchor does not lie on the interface")
    N = interface_normals(mesh)[k]

    nxt = {int(a): int(b) for a, b in facets}
    prv = {int(b): int(a) for a, b in facets}
    chain = [int(facets[k, 0]), int(facets[k, 1])]
    for table, front in ((nxt, False), (prv, True)):
        guard = 0
        while guard < len(facets):
            guard += 1
            end = chain[0] if front else chain[-1]
            if np.linalg.norm(mesh.nodes[end] - anchor) > radius:
                break
            nb = table.get(end)
            if nb is None or nb in chain:
                break
            if front:
                chain.insert(0, nb)
            else:
                chain.append(nb)

    chart = LocalChart(lambda s: 0.0 * s, lambda s: 0.0 * s, origin=anchor, normal=-N)
    sz = chart.to_local(mesh.nodes[chain])
    s, z = sz[:, 0], sz[:, 1]
    ds = np.diff(s)
    if not (np.all(ds > 0) or np.all(ds < 0)):
        raise GeometryError("interface patch is not a graph over its tangent line")
    order = np.argsort(s)
    s, z = s[order], z[order]
    slopes = np.diff(z) / np.diff(s)

    def gamma(x):
        return np.interp(x, s, z)

    def dgamma(x):
        seg = np.clip(np.searchsorted(s, x, side="right") - 1, 0, len(slopes) - 1)
        return slopes[seg]

    return LocalChart(gamma, dgamma, origin=anchor, normal=-N, radius=radius, n_samples=n_samples)


# -- snapshot format ----------------------------------------------------------

SNAPSHOT_HEADER = "lagfsi-mesh v1 dim={dim} nodes={n} elems={m}"


def write_snapshot(path, mesh: Mesh, fields: dict | None = None, config_hash: str | None = None):
    """Write the mesh and optional vertex fields in the ASCII snapshot format.

    Layout::

        lagfsi-mesh v1 dim=2 nodes=<n> elems=<m>
        # config_hash=<hash>            (optional)
        <x> <y>                         (n lines)
        <i> <j> <k> <tag>               (m lines, tag 0=fluid 1=solid)
        field <name> <ncomp>            (per field)
        <v_1> ... <v_ncomp>             (n lines)
    """
    lines = [SNAPSHOT_HEADER.format(dim=mesh.dim, n=mesh.n_nodes, m=mesh.n_elements)]
    if config_hash:
        lines.append(f"# config_hash={config_hash}")
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.nodes]
    lines += [f"{a} {b} {c} {t}" for (a, b, c), t in zip(mesh.elements, mesh.tags)]
    for name, values in (fields or {}).items():
        values = np.asarray(values, dtype=float).reshape(mesh.n_nodes, -1)
        lines.append(f"field {name} {values.shape[1]}")
        lines += [" ".join(f"{v:.17g}" for v in row) for row in values]
    Path(path).write_text("\n".join(lines) + "\n")


def read_snapshot(path):
    """Read a snapshot; returns ``(mesh, fields)``."""
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    head = lines[0].split()
    if head[:2] != ["lagfsi-mesh", "v1"]:
        raise ValueError(f"{path}: not a lagfsi-mesh v1 file")
    info = dict(tok.split("=") for tok in head[2:])
    n, m = int(info["nodes"]), int(info["elems"])
    nodes = np.array([[float(v) for v in ln.split()] for ln in lines[1 : 1 + n]])
    el = np.array([[int(v) for v in ln.split()] for ln in lines[1 + n : 1 + n + m]])
    mesh = mesh_from_triangles(nodes, el[:, :3], el[:, 3])
    fields = {}
    pos = 1 + n + m
    while pos < len(lines):
        _, name, ncomp = lines[pos].split()
        block = lines[pos + 1 : pos + 1 + n]
        fields[name] = np.array([[float(v) for v in ln.split()] for ln in block]).reshape(n, int(ncomp))
        pos += 1 + n
    return mesh, fields
