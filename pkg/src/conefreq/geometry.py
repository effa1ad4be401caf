"""Cone sectors, graded triangulations, boundary tagging, and mesh export.

The planar sector {0 < theta < opening, |x| < 1} is triangulated on
concentric circles.  Radial layer widths follow min(target_h, (1-q)*rho),
so the mesh is quasi-uniform away from the vertex and geometrically graded
with ratio q inside the knee radius target_h/(1-q).  Every circle carries
the same polar angles, which keeps the triangulation conforming and puts
each lateral facet exactly on a ray through the origin, so the outward
normal is orthogonal to the position vector up to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, MeshError

LATERAL = "lateral"
OUTER_ARC = "outer_arc"


@dataclass(frozen=True)
class ConeDomain:
    """Dilation-invariant cone: a planar sector (n=2) or a solid cone (n=3).

    For n=3 only the spherical-cap spectrum is computed; FEM stays planar.
    cap_measure is the (n-1)-measure of the unit-sphere cross section:
    the opening angle itself for n=2, 2*pi*(1-cos(opening)) for n=3.
    """

    dimension: int
    opening: float
    outer_radius: float = 1.0
    cap_measure: float = 0.0


def build_domain(dimension: int, opening: float) -> ConeDomain:
    """Validate the opening for the given dimension and compute cap_measure."""
    if dimension not in (2, 3):
        raise DomainError(f"dimension must be 2 or 3, got {dimension}")
    if dimension == 2:
        if not 0.0 < opening < 2.0 * math.pi:
            raise DomainError(f"opening must lie in (0, 2*pi) for n=2, got {opening}")
        cap = opening
    else:
        if not 0.0 < opening <= math.pi:
            raise DomainError(f"opening must lie in (0, pi] for n=3, got {opening}")
        cap = 2.0 * math.pi * (1.0 - math.cos(opening))
    return ConeDomain(dimension=dimension, opening=opening, outer_radius=1.0, cap_measure=cap)


@dataclass
class Mesh:
    """Conforming P1 triangulation of a sector with tagged boundary facets.

    Treated as immutable after construction; arrays are set read-only.
    Structured metadata (layer_radii, n_theta) enables O(1) point location.
    """

    domain: ConeDomain
    nodes: np.ndarray
    elements: np.ndarray
    lateral_facets: np.ndarray
    outer_facets: np.ndarray
    lateral_adjacent: np.ndarray
    outer_adjacent: np.ndarray
    layer_radii: np.ndarray
    n_theta: int
    target_h: float
    grading_ratio: float
    r_min: float
    quad_degree: int = 5
    areas: np.ndarray = field(default=None, repr=False)
    grads: np.ndarray = field(default=None, repr=False)
    elem_min_radius: np.ndarray = field(default=None, repr=False)
    elem_max_radius: np.ndarray = field(default=None, repr=False)
    node_radii: np.ndarray = field(default=None, repr=False)
    outer_node_ids: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        v = self.nodes[self.elements]  # (M, 3, 2)
        e1 = v[:, 1] - v[:, 0]
        e2 = v[:, 2] - v[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        if np.any(det <= 0.0):
            raise MeshError("non-positive element area in triangulation")
        self.areas = 0.5 * det
        # P1 shape-function gradients, one constant vector per (element, vertex)
        g = np.empty((len(self.elements), 3, 2))
        g[:, 1, 0] = e2[:, 1] / det
        g[:, 1, 1] = -e2[:, 0] / det
        g[:, 2, 0] = -e1[:, 1] / det
        g[:, 2, 1] = e1[:, 0] / det
        g[:, 0] = -g[:, 1] - g[:, 2]
        self.grads = g
        self.node_radii = np.hypot(self.nodes[:, 0], self.nodes[:, 1])
        vr = self.node_radii[self.elements]
        self.elem_max_radius = vr.max(axis=1)
        self.elem_min_radius = np.minimum(vr.min(axis=1), _min_edge_radius(v))
        self.outer_node_ids = np.unique(self.outer_facets)
        for arr in (self.nodes, self.elements, self.lateral_facets, self.outer_facets,
                    self.lateral_adjacent, self.outer_adjacent, self.layer_radii,
                    self.areas, self.grads, self.node_radii, self.elem_min_radius,
                    self.elem_max_radius, self.outer_node_ids):
            arr.flags.writeable = False

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_layers(self) -> int:
        return len(self.layer_radii)

    def node_id(self, layer: int, i: int) -> int:
        """Node index of angular slot i on circle ``layer`` (1-based; 0 is the vertex)."""
        if layer == 0:
            return 0
        return 1 + (layer - 1) * (self.n_theta + 1) + i

    def band_element(self, band: int, i: int, half: int) -> int:
        """Element index of triangle ``half`` in annular cell (band, i)."""
        return self.n_theta + 2 * (band * self.n_theta + i) + half

    def locate(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Find containing elements and barycentric coordinates.

        Points slightly outside the polygon (outer rim, tiny negative angles)
        are assigned to the nearest element; the P1 extension is used there.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        rho = np.hypot(pts[:, 0], pts[:, 1])
        omega = self.domain.opening
        theta = sector_angle(omega, pts)
        dtheta = omega / self.n_theta
        iang = np.clip((theta / dtheta).astype(int), 0, self.n_theta - 1)
        bin_idx = np.searchsorted(self.layer_radii, rho, side="left")

        # points near a layer circle sit above its chord, so both adjacent
        # bands are candidates; the fan competes below the innermost circle
        top = self.n_layers - 2
        band_lo = np.clip(bin_idx - 1, 0, top)
        band_hi = np.clip(bin_idx, 0, top)
        cands = np.stack([
            self.band_element(band_lo, iang, 0),
            self.band_element(band_lo, iang, 1),
            self.band_element(band_hi, iang, 0),
            self.band_element(band_hi, iang, 1),
            np.where(bin_idx <= 1, iang, self.band_element(band_lo, iang, 0)),
        ], axis=1)
        barys = np.stack([_barycentric(self, cands[:, j], pts) for j in range(cands.shape[1])],
                         axis=1)
        best = np.argmax(barys.min(axis=2), axis=1)
        take = np.arange(len(pts))
        elem = cands[take, best]
        bary = barys[take, best]

        # fallback search over neighboring cells for stragglers
        bad = np.flatnonzero(bary.min(axis=1) < -1e-9)
        for k in bad:
            elem[k], bary[k] = self._locate_fallback(pts[k], rho[k], iang[k], bin_idx[k])
        return elem, bary

    def _locate_fallback(self, p, rho, iang, bin_idx):
        cands = []
        for db in (-1, 0, 1):
            b = int(bin_idx) + db
            for di in (-1, 0, 1):
                i = int(iang) + di
                if not 0 <= i < self.n_theta:
                    continue
                if b <= 0:
                    cands.append(i)
                elif b <= self.n_layers - 1:
                    cands.append(self.band_element(b - 1, i, 0))
                    cands.append(self.band_element(b - 1, i, 1))
        cands = np.unique(np.array(cands, dtype=np.int64))
        bs = _barycentric(self, cands, np.repeat(p[None, :], len(cands), axis=0))
        best = int(np.argmax(bs.min(axis=1)))
        return cands[best], bs[best]

    def interpolate(self, values: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Evaluate the P1 field with the given nodal values at arbitrary points."""
        idx, bary = self.locate(points)
        return np.einsum("qk,qk->q", bary, values[self.elements[idx]])


def sector_angle(opening: float, pts: np.ndarray) -> np.ndarray:
    """Polar angles in [0, opening], robust against the atan2 branch cut.

    Points that round just below the theta=0 ray stay at 0; points that
    round past pi (possible when opening*k/k overshoots pi) wrap forward
    instead of collapsing onto the wrong ray.
    """
    pts = np.atleast_2d(pts)
    theta = np.arctan2(pts[:, 1], pts[:, 0])
    wrap_cut = -(2.0 * math.pi - opening) / 2.0
    theta = np.where(theta < wrap_cut, theta + 2.0 * math.pi, theta)
    return np.clip(theta, 0.0, opening)


def _barycentric(mesh: Mesh, elems: np.ndarray, pts: np.ndarray) -> np.ndarray:
    v = mesh.nodes[mesh.elements[elems]]
    d = pts - v[:, 0]
    e1 = v[:, 1] - v[:, 0]
    e2 = v[:, 2] - v[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    l1 = (d[:, 0] * e2[:, 1] - d[:, 1] * e2[:, 0]) / det
    l2 = (e1[:, 0] * d[:, 1] - e1[:, 1] * d[:, 0]) / det
    return np.stack([1.0 - l1 - l2, l1, l2], axis=1)


def _min_edge_radius(v: np.ndarray) -> np.ndarray:
    """Minimum distance from the origin to each element boundary."""
    out = np.full(len(v), np.inf)
    for a, b in ((0, 1), (1, 2), (2, 0)):
        p = v[:, a]
        q = v[:, b]
        d = q - p
        denom = np.einsum("ij,ij->i", d, d)
        t = np.clip(-np.einsum("ij,ij->i", p, d) / np.maximum(denom, 1e-300), 0.0, 1.0)
        c = p + t[:, None] * d
        out = np.minimum(out, np.hypot(c[:, 0], c[:, 1]))
    return out


def _radial_ladder(target_h: float, q: float, r_min: float) -> np.ndarray:
    radii = [1.0]
    while radii[-1] > r_min:
        r = radii[-1]
        radii.append(r - min(target_h, (1.0 - q) * r))
    return np.array(radii[::-1])


def generate_mesh(domain: ConeDomain, target_h: float, grading_ratio: float = 0.96,
                  r_min: float = 1e-3) -> Mesh:
    """Graded triangulation of the sector with tagged boundary facets.

    Angular resolution is ceil(opening/target_h) divisions; radial layers
    shrink geometrically toward the vertex until the innermost circle lies
    at or below r_min.  The vertex itself is a mesh node (fan elements).
    """
    if domain.dimension != 2:
        raise MeshError("FEM meshing is planar only (dimension must be 2)")
    if not 0.0 < grading_ratio < 1.0:
        raise MeshError(f"grading_ratio must lie in (0,1), got {grading_ratio}")
    if not 0.0 < r_min < 0.1:
        raise MeshError(f"r_min must lie in (0, 0.1), got {r_min}")
    if target_h <= 0.0:
        raise MeshError(f"target_h must be positive, got {target_h}")
    omega = domain.opening
    n_theta = math.ceil(omega / target_h)
    if n_theta < 4:
        raise MeshError(
            f"target_h={target_h} resolves only {n_theta} angular divisions of "
            f"opening {omega}; at least 4 are required")

    layer_radii = _radial_ladder(target_h, grading_ratio, r_min)
    n_layers = len(layer_radii)
    thetas = np.arange(n_theta + 1) * (omega / n_theta)
    cos_t, sin_t = np.cos(thetas), np.sin(thetas)

    nodes = np.empty((1 + n_layers * (n_theta + 1), 2))
    nodes[0] = (0.0, 0.0)
    for ell, rad in enumerate(layer_radii, start=1):
        base = 1 + (ell - 1) * (n_theta + 1)
        nodes[base:base + n_theta + 1, 0] = rad * cos_t
        nodes[base:base + n_theta + 1, 1] = rad * sin_t

    def nid(ell, i):
        return 0 if ell == 0 else 1 + (ell - 1) * (n_theta + 1) + i

    elements = np.empty((n_theta + 2 * (n_layers - 1) * n_theta, 3), dtype=np.int64)
    for i in range(n_theta):
        elements[i] = (0, nid(1, i), nid(1, i + 1))
    k = n_theta
    for band in range(n_layers - 1):
        lo, hi = band + 1, band + 2
        for i in range(n_theta):
            a, b = nid(lo, i), nid(hi, i)
            c, d = nid(hi, i + 1), nid(lo, i + 1)
            elements[k] = (a, b, c)
            elements[k + 1] = (a, c, d)
            k += 2

    lateral, lateral_adj = [], []
    lateral.append((0, nid(1, 0)))
    lateral_adj.append(0)
    lateral.append((0, nid(1, n_theta)))
    lateral_adj.append(n_theta - 1)
    for band in range(n_layers - 1):
        lateral.append((nid(band + 1, 0), nid(band + 2, 0)))
        lateral_adj.append(n_theta + 2 * (band * n_theta))
        lateral.append((nid(band + 1, n_theta), nid(band + 2, n_theta)))
        lateral_adj.append(n_theta + 2 * (band * n_theta + n_theta - 1) + 1)

    outer, outer_adj = [], []
    top = n_layers
    for i in range(n_theta):
        outer.append((nid(top, i), nid(top, i + 1)))
        outer_adj.append(n_theta + 2 * ((n_layers - 2) * n_theta + i))

    return Mesh(
        domain=domain,
        nodes=nodes,
        elements=elements,
        lateral_facets=np.array(lateral, dtype=np.int64),
        outer_facets=np.array(outer, dtype=np.int64),
        lateral_adjacent=np.array(lateral_adj, dtype=np.int64),
        outer_adjacent=np.array(outer_adj, dtype=np.int64),
        layer_radii=layer_radii,
        n_theta=n_theta,
        target_h=target_h,
        grading_ratio=grading_ratio,
        r_min=r_min,
    )


def check_normal_orthogonality(mesh: Mesh) -> float:
    """Max over lateral facets of |nu . x| / |x| at the facet midpoint.

    Zero in exact arithmetic for straight-ray facets; this is the detector
    for lateral boundaries drifting off their rays.
    """
    if len(mesh.lateral_facets) == 0:
        raise MeshError("mesh carries no lateral facets")
    a = mesh.nodes[mesh.lateral_facets[:, 0]]
    b = mesh.nodes[mesh.lateral_facets[:, 1]]
    mid = 0.5 * (a + b)
    tang = b - a
    tang /= np.hypot(tang[:, 0], tang[:, 1])[:, None]
    nu = np.stack([tang[:, 1], -tang[:, 0]], axis=1)
    return float(np.max(np.abs(np.einsum("ij,ij->i", nu, mid))
                        / np.hypot(mid[:, 0], mid[:, 1])))


def export_mesh(mesh: Mesh, path: str | Path) -> None:
    """Plain-text mesh dump: one record per line (index, data, tag)."""
    lines = []
    for i, (x, y) in enumerate(mesh.nodes):
        lines.append(f"node {i} {x!r} {y!r}")
    for i, (a, b, c) in enumerate(mesh.elements):
        lines.append(f"element {i} {a} {b} {c}")
    k = 0
    for a, b in mesh.lateral_facets:
        lines.append(f"facet {k} {a} {b} {LATERAL}")
        k += 1
    for a, b in mesh.outer_facets:
        lines.append(f"facet {k} {a} {b} {OUTER_ARC}")
        k += 1
    Path(path).write_text("\n".join(lines) + "\n")
