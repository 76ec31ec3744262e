"""Oriented simplicial meshes with tagged boundary parts.

All simplices are stored as strictly increasing vertex tuples; the global
vertex order induces every orientation, so incidence signs are the
alternating face signs and ``d @ d == 0`` holds in integer arithmetic.
Top cells additionally carry ``orientation`` (the sign of their volume in
sorted vertex order) so that the stored orientation ``orientation * sorted``
always has positive volume.
"""
from __future__ import annotations

import itertools
import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from . import _integer
from .errors import MeshError, MeshParseError, UnsupportedDimensionError

MESH_FORMAT = "kml-mesh/1"


class SimplicialComplex:
    """Pure N-dimensional simplicial complex in R^N (immutable after construction).

    Parameters
    ----------
    vertices : (n_vertices, N) array
    cells : (n_cells, N + 1) integer array, any vertex order
    """

    def __init__(self, vertices, cells):
        vertices = np.array(vertices, dtype=float)
        cells = np.array(cells, dtype=np.int64)
        if vertices.ndim != 2:
            raise MeshError("vertices must be a 2-d array")
        n = vertices.shape[1]
        if cells.ndim != 2 or cells.shape[1] != n + 1:
            raise MeshError(f"cells must have {n + 1} vertices each in dimension {n}")
        if cells.size and (cells.min() < 0 or cells.max() >= len(vertices)):
            raise MeshError("cell references a missing vertex")
        if len(cells) == 0:
            raise MeshError("mesh has no cells")
        cells = np.sort(cells, axis=1)
        if np.any(np.diff(cells, axis=1) == 0):
            raise MeshError("cell with repeated vertex")
        cells = np.unique(cells, axis=0)

        self.dim = n
        self._cache: dict = {}
        self.vertices = vertices
        self.vertices.setflags(write=False)

        simplices = []
        for q in range(n + 1):
            combos = list(itertools.combinations(range(n + 1), q + 1))
            faces = cells[:, combos].reshape(-1, q + 1)
            simplices.append(np.unique(faces, axis=0))
        self.simplices: list[np.ndarray] = simplices
        for s in simplices:
            s.setflags(write=False)
        self.cells = simplices[n]

        self._keys = [self._encode(s) for s in simplices]

        # cell_faces[q][c, k]: global index of the k-th local q-face (lex order)
        self.cell_faces = []
        for q in range(n + 1):
            combos = list(itertools.combinations(range(n + 1), q + 1))
            self.cell_faces.append(self.lookup(q, self.cells[:, combos].reshape(-1, q + 1)).reshape(len(self.cells), len(combos)))

        edges = self.vertices[self.cells[:, 1:]] - self.vertices[self.cells[:, :1]]
        det = np.linalg.det(edges) if n > 0 else np.ones(len(self.cells))
        self.signed_volumes = det / math.factorial(n)
        self.orientation = np.sign(self.signed_volumes).astype(np.int8)
        self.volumes = np.abs(self.signed_volumes)

    # -- lookup ---------------------------------------------------------------

    def _encode(self, simplices: np.ndarray) -> np.ndarray:
        base = np.int64(len(self.vertices))
        key = np.zeros(len(simplices), dtype=np.int64)
        for j in range(simplices.shape[1]):
            key = key * base + simplices[:, j]
        return key

    def lookup(self, q: int, simplices) -> np.ndarray:
        """Global indices of sorted q-simplices (raises if any is absent)."""
        simplices = np.asarray(simplices, dtype=np.int64).reshape(-1, q + 1)
        keys = self._encode(simplices)
        idx = np.searchsorted(self._keys[q], keys)
        idx = np.clip(idx, 0, len(self._keys[q]) - 1)
        if len(keys) and np.any(self._keys[q][idx] != keys):
            raise MeshError(f"simplex not in complex at degree {q}")
        return idx

    def contains(self, q: int, simplices) -> np.ndarray:
        simplices = np.asarray(simplices, dtype=np.int64).reshape(-1, q + 1)
        keys = self._encode(simplices)
        idx = np.clip(np.searchsorted(self._keys[q], keys), 0, len(self._keys[q]) - 1)
        return self._keys[q][idx] == keys

    def faces_of(self, p: int, indices, q: int) -> np.ndarray:
        """Indices of all q-faces of the given p-simplices (unique, sorted)."""
        indices = np.asarray(indices, dtype=np.int64)
        if len(indices) == 0:
            return np.zeros(0, dtype=np.int64)
        combos = list(itertools.combinations(range(p + 1), q + 1))
        faces = self.simplices[p][indices][:, combos].reshape(-1, q + 1)
        return np.unique(self.lookup(q, faces))

    # -- combinatorics ------------------------------------------------------

    def count(self, q: int) -> int:
        return len(self.simplices[q])

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def incidence(self, q: int) -> sp.csr_matrix:
        """Signed incidence of (q+1)-simplices against q-simplices (integer)."""
        if not 0 <= q < self.dim:
            raise ValueError(f"incidence needs 0 <= q < {self.dim}, got {q}")
        upper = self.simplices[q + 1]
        rows, cols, vals = [], [], []
        for k in range(q + 2):
            face = np.delete(upper, k, axis=1)
            rows.append(np.arange(len(upper)))
            cols.append(self.lookup(q, face))
            vals.append(np.full(len(upper), (-1) ** k, dtype=np.int64))
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(len(upper), len(self.simplices[q])),
            dtype=np.int64,
        )

    @cached_property
    def facet_cells(self) -> np.ndarray:
        """(n_facets, 2) incident cell indices; -1 marks the missing side."""
        n = self.dim
        out = np.full((self.count(n - 1), 2), -1, dtype=np.int64)
        fill = np.zeros(self.count(n - 1), dtype=np.int64)
        for c, facets in enumerate(self.cell_faces[n - 1]):
            for f in facets:
                if fill[f] >= 2:
                    raise MeshError(f"facet {f} has more than two incident cells")
                out[f, fill[f]] = c
                fill[f] += 1
        return out

    @cached_property
    def boundary_facets(self) -> np.ndarray:
        return np.flatnonzero(self.facet_cells[:, 1] < 0)

    def boundary_simplices(self, q: int) -> np.ndarray:
        if q == self.dim:
            return np.zeros(0, dtype=np.int64)
        return self.faces_of(self.dim - 1, self.boundary_facets, q)

    def centroids(self, q: int, indices=None) -> np.ndarray:
        s = self.simplices[q] if indices is None else self.simplices[q][np.asarray(indices)]
        return self.vertices[s].mean(axis=1)

    @cached_property
    def mesh_size(self) -> float:
        e = self.simplices[1]
        return float(np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1).max())

    @property
    def volume(self) -> float:
        return float(self.volumes.sum())

    def check_invariants(self) -> list[str]:
        """Human-readable list of violated invariants (empty when valid)."""
        problems = []
        degenerate = np.flatnonzero(self.volumes <= 1e-14 * max(self.volumes.max(), 1e-300))
        if len(degenerate):
            problems.append(f"degenerate cells: {degenerate.tolist()[:10]}")
        counts = (self.facet_cells >= 0).sum(axis=1)
        if np.any(counts == 0):
            problems.append("facet without incident cell")
        for q in range(self.dim - 1):
            prod = self.incidence(q + 1) @ self.incidence(q)
            if prod.count_nonzero():
                problems.append(f"d{q + 1} d{q} != 0")
        return problems

    def subcomplex(self, cells: Iterable[int]) -> tuple["SimplicialComplex", np.ndarray]:
        """Complex spanned by a subset of cells and its vertex map (local -> global)."""
        cells = np.asarray(sorted(set(int(c) for c in cells)), dtype=np.int64)
        used = np.unique(self.cells[cells])
        local = np.full(self.n_vertices, -1, dtype=np.int64)
        local[used] = np.arange(len(used))
        return SimplicialComplex(self.vertices[used], local[self.cells[cells]]), used

    def cell_adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n_cells)]
        for a, b in self.facet_cells:
            if b >= 0:
                adj[a].append(int(b))
                adj[b].append(int(a))
        return adj

    def betti(self) -> list[int]:
        """Absolute Betti numbers over the rationals (rank of integer incidences)."""
        ranks = [0] + [_integer.integer_rank(self.incidence(q)) for q in range(self.dim)] + [0]
        return [self.count(q) - ranks[q] - ranks[q + 1] for q in range(self.dim + 1)]

    def __repr__(self):
        counts = ", ".join(str(self.count(q)) for q in range(self.dim + 1))
        return f"SimplicialComplex(N={self.dim}, counts=({counts}))"


# -- boundary partition --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BoundaryPartition:
    """Split of the boundary facets into Gamma_t (stored) and Gamma_n (derived)."""

    complex: SimplicialComplex
    gamma_t: np.ndarray

    def __post_init__(self):
        gt = np.unique(np.asarray(self.gamma_t, dtype=np.int64))
        boundary = self.complex.boundary_facets
        if len(np.setdiff1d(gt, boundary)):
            raise MeshError("Gamma_t contains interior facets")
        gt.setflags(write=False)
        object.__setattr__(self, "gamma_t", gt)

    @property
    def gamma_n(self) -> np.ndarray:
        return np.setdiff1d(self.complex.boundary_facets, self.gamma_t)

    @property
    def is_empty(self) -> bool:
        return len(self.gamma_t) == 0

    @property
    def is_full(self) -> bool:
        return len(self.gamma_n) == 0

    def closure(self, q: int) -> np.ndarray:
        """q-simplices lying in closure(Gamma_t)."""
        if q >= self.complex.dim:
            return np.zeros(0, dtype=np.int64)
        return self.complex.faces_of(self.complex.dim - 1, self.gamma_t, q)

    def closure_n(self, q: int) -> np.ndarray:
        if q >= self.complex.dim:
            return np.zeros(0, dtype=np.int64)
        return self.complex.faces_of(self.complex.dim - 1, self.gamma_n, q)

    @property
    def interface(self) -> np.ndarray:
        """(N-2)-simplices shared by a Gamma_t facet and a Gamma_n facet."""
        q = self.complex.dim - 2
        if q < 0 or self.is_empty or self.is_full:
            return np.zeros(0, dtype=np.int64)
        return np.intersect1d(self.closure(q), self.closure_n(q))

    def swapped(self) -> "BoundaryPartition":
        return BoundaryPartition(self.complex, self.gamma_n)

    def labels(self) -> dict[tuple[int, ...], str]:
        facets = self.complex.simplices[self.complex.dim - 1]
        out = {tuple(int(v) for v in facets[f]): "t" for f in self.gamma_t}
        out.update({tuple(int(v) for v in facets[f]): "n" for f in self.gamma_n})
        return out


def tag_boundary(complex: SimplicialComplex, predicate: Callable[[np.ndarray], bool]) -> BoundaryPartition:
    """Gamma_t := boundary facets whose centroid satisfies ``predicate``."""
    facets = complex.boundary_facets
    cents = complex.centroids(complex.dim - 1, facets)
    chosen = [f for f, x in zip(facets, cents) if predicate(x)]
    return BoundaryPartition(complex, np.asarray(chosen, dtype=np.int64))


def partition_from_labels(complex: SimplicialComplex, labels: dict) -> BoundaryPartition:
    n = complex.dim
    gt = []
    for key, tag in labels.items():
        if tag not in ("t", "n"):
            raise MeshError(f"boundary tag must be 't' or 'n', got {tag!r}")
        if tag == "t":
            gt.append(tuple(sorted(key)))
    idx = complex.lookup(n - 1, np.array(gt, dtype=np.int64).reshape(-1, n)) if gt else []
    return BoundaryPartition(complex, np.asarray(idx, dtype=np.int64))


# -- slices and admissibility --------------------------------------------------


@dataclass(frozen=True, eq=False)
class SliceSpec:
    """Cells of the mesh cut into pieces Omega_j."""

    pieces: tuple

    def __post_init__(self):
        pieces = tuple(np.unique(np.asarray(p, dtype=np.int64)) for p in self.pieces)
        object.__setattr__(self, "pieces", pieces)

    def __len__(self):
        return len(self.pieces)

    @classmethod
    def single(cls, complex: SimplicialComplex) -> "SliceSpec":
        return cls((np.arange(complex.n_cells),))

    def gamma_t_patch(self, partition: BoundaryPartition, j: int) -> np.ndarray:
        """Gamma_t facets bounding piece j."""
        owner = partition.complex.facet_cells[partition.gamma_t, 0]
        return partition.gamma_t[np.isin(owner, self.pieces[j])]

    def check_partition(self, n_cells: int) -> list[str]:
        problems = []
        allc = np.concatenate(self.pieces) if self.pieces else np.zeros(0, dtype=np.int64)
        if len(allc) != len(np.unique(allc)):
            problems.append("pieces overlap")
        if len(np.setdiff1d(np.arange(n_cells), allc)):
            problems.append("pieces do not cover all cells")
        if len(allc) and (allc.min() < 0 or allc.max() >= n_cells):
            problems.append("piece references a missing cell")
        return problems


def _components(nodes: Sequence[int], neighbours: Callable[[int], Iterable[int]]) -> list[list[int]]:
    nodes_set = set(nodes)
    seen: set[int] = set()
    comps = []
    for start in nodes:
        if start in seen:
            continue
        comp = [start]
        seen.add(start)
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for w in neighbours(u):
                if w in nodes_set and w not in seen:
                    seen.add(w)
                    comp.append(w)
                    queue.append(w)
        comps.append(comp)
    return comps


def facet_components(complex: SimplicialComplex, facets) -> list[list[int]]:
    """Connected components of a facet set (adjacent = sharing an (N-2)-face)."""
    facets = [int(f) for f in facets]
    n = complex.dim
    if n == 1:
        return [[f] for f in facets]
    ridge_of = {f: complex.faces_of(n - 1, [f], n - 2).tolist() for f in facets}
    by_ridge: dict[int, list[int]] = {}
    for f, ridges in ridge_of.items():
        for r in ridges:
            by_ridge.setdefault(r, []).append(f)
    return _components(facets, lambda f: (g for r in ridge_of[f] for g in by_ridge[r]))


def cell_components(complex: SimplicialComplex, cells) -> list[list[int]]:
    adj = complex.cell_adjacency()
    return _components([int(c) for c in cells], lambda c: adj[c])


@dataclass
class PieceReport:
    cells: int
    connected: bool
    betti: list
    gamma_t_facets: int

    @property
    def simply_connected(self) -> bool:
        return self.connected and len(self.betti) > 1 and self.betti[1] == 0


@dataclass
class AdmissibilityReport:
    gamma_t_components: int
    gamma_n_components: int
    interface_clean: bool
    sliceable: bool | None
    slice_count: int
    slices_auto: bool
    pieces: list = field(default_factory=list)
    messages: list = field(default_factory=list)
    slices: SliceSpec | None = None

    @property
    def admissible(self) -> bool:
        return bool(self.sliceable) and self.interface_clean

    def as_dict(self) -> dict:
        return {
            "admissible": self.admissible,
            "gamma_t_components": self.gamma_t_components,
            "gamma_n_components": self.gamma_n_components,
            "interface_clean": self.interface_clean,
            "sliceable": self.sliceable,
            "slice_count": self.slice_count,
            "slices_auto": self.slices_auto,
            "pieces": [
                {"cells": p.cells, "connected": p.connected, "betti": p.betti, "gamma_t_facets": p.gamma_t_facets}
                for p in self.pieces
            ],
            "messages": list(self.messages),
        }


def _piece_report(complex: SimplicialComplex, partition: BoundaryPartition, slices: SliceSpec, j: int) -> PieceReport:
    cells = slices.pieces[j]
    connected = len(cell_components(complex, cells)) == 1
    sub, _ = complex.subcomplex(cells)
    return PieceReport(
        cells=len(cells),
        connected=connected,
        betti=sub.betti(),
        gamma_t_facets=len(slices.gamma_t_patch(partition, j)),
    )


def auto_slice(complex: SimplicialComplex, partition: BoundaryPartition, max_pieces: int = 16) -> SliceSpec | None:
    """Greedy slicing heuristic; returns None when it cannot certify a cut.

    Pieces with nonzero first Betti number are split in two along the
    breadth-first order of the dual graph, repeatedly, until every piece is
    simply connected (Betti-1 = 0). Success is not guaranteed.
    """
    adj = complex.cell_adjacency()
    pending = [np.arange(complex.n_cells)]
    done = []
    while pending:
        piece = pending.pop()
        sub, _ = complex.subcomplex(piece)
        if sub.betti()[1] == 0:
            done.append(piece)
            continue
        if len(done) + len(pending) + 2 > max_pieces or len(piece) < 2:
            return None
        members = set(piece.tolist())
        start = int(piece[0])
        order = [start]
        seen = {start}
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for w in adj[u]:
                if w in members and w not in seen:
                    seen.add(w)
                    order.append(w)
                    queue.append(w)
        half = len(order) // 2
        first, second = np.sort(order[:half]), np.sort(order[half:])
        for part in (first, second):
            if len(cell_components(complex, part)) != 1:
                return None
        pending.extend([first, second])
    spec = SliceSpec(tuple(sorted(done, key=lambda p: int(p[0]))))
    if not partition.is_empty and any(len(spec.gamma_t_patch(partition, j)) == 0 for j in range(len(spec))):
        return None
    return spec


def validate_admissible(
    complex: SimplicialComplex,
    partition: BoundaryPartition,
    slices: SliceSpec | None = None,
    auto: bool = True,
) -> AdmissibilityReport:
    """Combinatorial admissibility/sliceability diagnostics (never raises)."""
    messages = []
    gt_comp = facet_components(complex, partition.gamma_t)
    gn_comp = facet_components(complex, partition.gamma_n)

    clean = True
    n = complex.dim
    if not partition.is_empty and not partition.is_full:
        for q in range(n - 1):
            touch = np.intersect1d(partition.closure(q), partition.closure_n(q))
            expected = complex.faces_of(n - 2, partition.interface, q) if n >= 2 else np.zeros(0, dtype=np.int64)
            if len(np.setdiff1d(touch, expected)):
                clean = False
                messages.append(f"closure(Gamma_t) meets closure(Gamma_n) outside the interface at degree {q}")

    used_auto = False
    if slices is None:
        if len(complex.cells) and complex.betti()[1] == 0:
            slices = SliceSpec.single(complex)
        elif auto:
            slices = auto_slice(complex, partition)
            used_auto = slices is not None
            if slices is None:
                messages.append("auto-slicing failed")
        else:
            messages.append("not verified sliceable")

    if slices is None:
        return AdmissibilityReport(len(gt_comp), len(gn_comp), clean, None, 0, False, [], messages)

    problems = slices.check_partition(complex.n_cells)
    messages.extend(problems)
    pieces = [] if problems else [_piece_report(complex, partition, slices, j) for j in range(len(slices))]
    ok = not problems
    for j, p in enumerate(pieces):
        if not p.simply_connected:
            ok = False
            messages.append(f"piece {j} is not simply connected (betti {p.betti})")
        if not partition.is_empty and p.gamma_t_facets == 0:
            ok = False
            messages.append(f"piece {j} does not touch Gamma_t")
    if used_auto:
        messages.append("slices found by the greedy heuristic")
    return AdmissibilityReport(len(gt_comp), len(gn_comp), clean, ok, len(slices), used_auto, pieces, messages, slices)


# -- generators ---------------------------------------------------------------


def build_box_mesh(dim: int, cells_per_axis: int) -> SimplicialComplex:
    """Unit box [0,1]^N split into N! * n^N simplices (Kuhn triangulation)."""
    if dim not in (2, 3):
        raise UnsupportedDimensionError(f"box meshes are generated for N in {{2, 3}}, got {dim}")
    n = int(cells_per_axis)
    if n < 1:
        raise MeshError("cells_per_axis must be >= 1")
    grid = np.stack(np.meshgrid(*[np.arange(n + 1)] * dim, indexing="ij"), axis=-1).reshape(-1, dim)
    vertices = grid / n
    strides = np.array([(n + 1) ** (dim - 1 - k) for k in range(dim)])
    origins = np.stack(np.meshgrid(*[np.arange(n)] * dim, indexing="ij"), axis=-1).reshape(-1, dim)
    cells = []
    for perm in itertools.permutations(range(dim)):
        path = [np.zeros(dim, dtype=np.int64)]
        for axis in perm:
            step = path[-1].copy()
            step[axis] += 1
            path.append(step)
        offsets = np.array([p @ strides for p in path])
        cells.append((origins @ strides)[:, None] + offsets[None, :])
    return SimplicialComplex(vertices, np.concatenate(cells))


def build_annulus_mesh(cells_angular: int, cells_radial: int, inner: float = 0.5, outer: float = 1.0) -> SimplicialComplex:
    """Planar annulus inner <= |x| <= outer, each polar quad split in two."""
    na, nr = int(cells_angular), int(cells_radial)
    if na < 3 or nr < 1:
        raise MeshError(f"annulus needs cells_angular >= 3 and cells_radial >= 1, got ({na}, {nr})")
    theta = 2 * np.pi * np.arange(na) / na
    radii = inner + (outer - inner) * np.arange(nr + 1) / nr
    vertices = np.array([[r * np.cos(t), r * np.sin(t)] for r in radii for t in theta])

    def vid(i, j):
        return j * na + (i % na)

    cells = []
    for j in range(nr):
        for i in range(na):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            cells.append((a, b, c))
            cells.append((a, c, d))
    return SimplicialComplex(vertices, cells)


def annulus_halves(complex: SimplicialComplex) -> SliceSpec:
    """Two half-annuli (upper/lower half plane by cell centroid angle)."""
    cent = complex.centroids(complex.dim)
    angle = np.mod(np.arctan2(cent[:, 1], cent[:, 0]), 2 * np.pi)
    upper = np.flatnonzero(angle < np.pi)
    lower = np.flatnonzero(angle >= np.pi)
    return SliceSpec((upper, lower))


def axis_halves(complex: SimplicialComplex, axis: int = 0, cut: float = 0.5) -> SliceSpec:
    cent = complex.centroids(complex.dim)
    return SliceSpec((np.flatnonzero(cent[:, axis] < cut), np.flatnonzero(cent[:, axis] >= cut)))


# -- serialization ------------------------------------------------------------


@dataclass
class MeshDocument:
    complex: SimplicialComplex
    partition: BoundaryPartition | None = None
    slices: SliceSpec | None = None
    repaired_cells: list = field(default_factory=list)


def save_mesh(complex: SimplicialComplex, partition: BoundaryPartition | None = None, slices: SliceSpec | None = None) -> bytes:
    """Serialize to the JSON mesh document (cells in stored positive orientation)."""
    cells = complex.cells.copy()
    neg = complex.orientation < 0
    cells[neg, :2] = cells[neg, 1::-1]
    doc = {
        "format": MESH_FORMAT,
        "dimension": complex.dim,
        "vertices": complex.vertices.tolist(),
        "cells": cells.tolist(),
    }
    if partition is not None:
        doc["boundary_tags"] = [
            {"facet": list(k), "tag": v} for k, v in sorted(partition.labels().items())
        ]
    if slices is not None:
        doc["slices"] = [p.tolist() for p in slices.pieces]
    return json.dumps(doc, sort_keys=True).encode()


def load_mesh_document(data: bytes | str) -> MeshDocument:
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise MeshParseError(exc.msg, locus=f"line {exc.lineno}, column {exc.colno}") from exc
    if not isinstance(doc, dict):
        raise MeshParseError("document must be a JSON object", locus="$")
    for key in ("dimension", "vertices", "cells"):
        if key not in doc:
            raise MeshParseError("missing field", locus=key)
    dim = doc["dimension"]
    if not isinstance(dim, int) or dim < 1:
        raise MeshParseError("must be a positive integer", locus="dimension")
    verts = doc["vertices"]
    if not isinstance(verts, list):
        raise MeshParseError("must be an array", locus="vertices")
    for i, v in enumerate(verts):
        if not isinstance(v, list) or len(v) != dim or not all(isinstance(x, (int, float)) for x in v):
            raise MeshParseError(f"expected {dim} numbers", locus=f"vertices[{i}]")
    cells = doc["cells"]
    if not isinstance(cells, list) or not cells:
        raise MeshParseError("must be a non-empty array", locus="cells")
    for i, c in enumerate(cells):
        if not isinstance(c, list) or len(c) != dim + 1 or not all(isinstance(x, int) for x in c):
            raise MeshParseError(f"expected {dim + 1} vertex indices", locus=f"cells[{i}]")
        for x in c:
            if not 0 <= x < len(verts):
                raise MeshParseError(f"references missing vertex {x}", locus=f"cells[{i}]")
    vertices = np.array(verts, dtype=float).reshape(-1, dim)
    arr = np.array(cells, dtype=np.int64)
    if dim > 0:
        det = np.linalg.det(vertices[arr[:, 1:]] - vertices[arr[:, :1]])
        scale = max(np.abs(det).max(), 1e-300)
        flat = np.flatnonzero(np.abs(det) <= 1e-14 * scale)
        if len(flat):
            raise MeshParseError("degenerate cell (zero volume)", locus=f"cells[{int(flat[0])}]")
        repaired = np.flatnonzero(det < 0).tolist()
    else:
        repaired = []
    try:
        complex = SimplicialComplex(vertices, arr)
    except MeshError as exc:
        raise MeshParseError(str(exc), locus="cells") from exc

    partition = None
    if "boundary_tags" in doc:
        labels = {}
        for i, item in enumerate(doc["boundary_tags"]):
            try:
                labels[tuple(int(v) for v in item["facet"])] = item["tag"]
            except (KeyError, TypeError, ValueError) as exc:
                raise MeshParseError("expected {facet: [...], tag: 't'|'n'}", locus=f"boundary_tags[{i}]") from exc
        try:
            partition = partition_from_labels(complex, labels)
        except MeshError as exc:
            raise MeshParseError(str(exc), locus="boundary_tags") from exc
    slices = None
    if "slices" in doc:
        try:
            slices = SliceSpec(tuple(np.asarray(p, dtype=np.int64) for p in doc["slices"]))
        except (TypeError, ValueError) as exc:
            raise MeshParseError("expected arrays of cell indices", locus="slices") from exc
        # slices in the file refer to input cell order; map to canonical order
        canon = complex.lookup(dim, np.sort(arr, axis=1))
        slices = SliceSpec(tuple(canon[p] for p in slices.pieces))
    return MeshDocument(complex, partition, slices, repaired)


def load_mesh(data: bytes | str) -> SimplicialComplex:
    return load_mesh_document(data).complex
