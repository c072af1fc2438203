"""Level-n graph approximations of finitely ramified self-similar sets.

A fractal is described by a :class:`FractalSpec`: ``cell_count`` contraction
cells, ``boundary_size`` boundary points p_0..p_{b-1}, and a table saying which
level-1 vertex class the image F_i(p_j) of boundary point j under cell i is.
Classes ``0..b-1`` are the boundary points themselves; larger class labels are
junction points inside the level-1 picture.

Vertices of the level-n graph are the points F_w(p_j) for words w of length n.
They are indexed in order of first appearance when (w, j) is enumerated
lexicographically, i.e. by their smallest cell address.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .errors import GraphMismatchError, PreconditionError, SpecError

__all__ = [
    "FractalSpec",
    "LevelGraph",
    "MeasureWeights",
    "BUILTIN_SPECS",
    "interval_spec",
    "gasket_spec",
    "get_builtin",
    "spec_from_mapping",
    "build_level",
    "self_similar_measure",
    "uniform_measure",
    "cycle_rank",
]


def _fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(value).limit_denominator(10**12)
    return Fraction(value)


@dataclass(frozen=True)
class FractalSpec:
    """Declarative cell structure of a p.c.f. self-similar set.

    ``maps`` (optional) gives one planar affine map per cell as
    ``(a11, a12, a21, a22, b1, b2)``; together with ``boundary_coords`` it is
    only used to embed vertices for export.
    """

    name: str
    cell_count: int
    boundary_size: int
    vertex_identification: tuple[tuple[int, ...], ...]
    conductance_renormalization: Fraction
    measure_weights: tuple[Fraction, ...]
    boundary_coords: tuple[tuple[float, float], ...] | None = None
    maps: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        object.__setattr__(
            self,
            "vertex_identification",
            tuple(tuple(int(k) for k in row) for row in self.vertex_identification),
        )
        object.__setattr__(
            self, "conductance_renormalization", _fraction(self.conductance_renormalization)
        )
        object.__setattr__(
            self, "measure_weights", tuple(_fraction(w) for w in self.measure_weights)
        )
        self._validate()

    def _validate(self):
        N, b = self.cell_count, self.boundary_size
        if N < 1 or b < 1:
            raise SpecError(f"{self.name}: cell_count and boundary_size must be positive")
        table = self.vertex_identification
        if len(table) != N:
            raise SpecError(f"{self.name}: identification table has {len(table)} rows, expected {N}")
        for i, row in enumerate(table):
            if len(row) != b:
                raise SpecError(f"{self.name}: cell {i} lists {len(row)} vertices, expected {b}")
            if len(set(row)) != b:
                raise SpecError(f"{self.name}: cell {i} repeats a vertex class")
            if min(row) < 0:
                raise SpecError(f"{self.name}: cell {i} uses a negative vertex class")
        classes = sorted({k for row in table for k in row})
        if classes != list(range(len(classes))):
            raise SpecError(f"{self.name}: vertex classes must be contiguous 0..K-1")
        missing = [j for j in range(b) if j not in classes]
        if missing:
            raise SpecError(f"{self.name}: boundary classes {missing} are not attached to any cell")
        if self.conductance_renormalization <= 0:
            raise SpecError(f"{self.name}: conductance_renormalization must be positive")
        if len(self.measure_weights) != N or any(w <= 0 for w in self.measure_weights):
            raise SpecError(f"{self.name}: need {N} positive measure weights")
        if sum(self.measure_weights) != 1:
            raise SpecError(
                f"{self.name}: measure weights sum to {sum(self.measure_weights)}, not 1"
            )
        if self.maps is not None and len(self.maps) != N:
            raise SpecError(f"{self.name}: {len(self.maps)} maps given for {N} cells")
        if self.boundary_coords is not None and len(self.boundary_coords) != b:
            raise SpecError(f"{self.name}: boundary_coords must list {b} points")
        self._check_connected()

    def _check_connected(self):
        # cells i, j are adjacent when they share a vertex class
        N = self.cell_count
        owner: dict[int, list[int]] = {}
        for i, row in enumerate(self.vertex_identification):
            for k in row:
                owner.setdefault(k, []).append(i)
        adj = sp.lil_matrix((N, N))
        for cells in owner.values():
            for i, j in itertools.combinations(cells, 2):
                adj[i, j] = adj[j, i] = 1
        ncomp, labels = csgraph.connected_components(adj.tocsr(), directed=False)
        if ncomp > 1:
            other = int(np.flatnonzero(labels != labels[0])[0])
            raise SpecError(
                f"{self.name}: level-1 graph is disconnected; cells 0 and {other} "
                "share no chain of identified vertices"
            )

    @property
    def energy_renormalization(self) -> Fraction:
        """Factor by which level-1 energy of a harmonic extension shrinks (1/r_c)."""
        return 1 / self.conductance_renormalization

    def to_mapping(self) -> dict:
        out = {
            "name": self.name,
            "cell_count": self.cell_count,
            "boundary_size": self.boundary_size,
            "vertex_identification": [list(r) for r in self.vertex_identification],
            "conductance_renormalization": str(self.conductance_renormalization),
            "measure_weights": [str(w) for w in self.measure_weights],
        }
        if self.boundary_coords is not None:
            out["boundary_coords"] = [list(p) for p in self.boundary_coords]
        if self.maps is not None:
            out["maps"] = [list(m) for m in self.maps]
        return out


def interval_spec() -> FractalSpec:
    """Unit interval split in two halves; conductance doubles per level."""
    return FractalSpec(
        name="interval",
        cell_count=2,
        boundary_size=2,
        vertex_identification=((0, 2), (2, 1)),
        conductance_renormalization=Fraction(2),
        measure_weights=(Fraction(1, 2), Fraction(1, 2)),
        boundary_coords=((0.0, 0.0), (1.0, 0.0)),
        maps=((0.5, 0.0, 0.0, 0.5, 0.0, 0.0), (0.5, 0.0, 0.0, 0.5, 0.5, 0.0)),
    )


def gasket_spec() -> FractalSpec:
    """Sierpinski gasket; classes 3, 4, 5 are the midpoints p0p1, p1p2, p0p2."""
    corners = ((0.0, 0.0), (1.0, 0.0), (0.5, math.sqrt(3.0) / 2.0))
    return FractalSpec(
        name="gasket",
        cell_count=3,
        boundary_size=3,
        vertex_identification=((0, 3, 5), (3, 1, 4), (5, 4, 2)),
        conductance_renormalization=Fraction(5, 3),
        measure_weights=(Fraction(1, 3),) * 3,
        boundary_coords=corners,
        maps=tuple((0.5, 0.0, 0.0, 0.5, 0.5 * x, 0.5 * y) for x, y in corners),
    )


BUILTIN_SPECS = {"interval": interval_spec, "gasket": gasket_spec}


def get_builtin(name: str) -> FractalSpec:
    try:
        return BUILTIN_SPECS[name]()
    except KeyError:
        raise SpecError(f"unknown built-in fractal {name!r}; choose from {sorted(BUILTIN_SPECS)}")


def spec_from_mapping(data: Mapping) -> FractalSpec:
    """Build a spec from a config table (either ``builtin = name`` or a full table)."""
    if "builtin" in data:
        return get_builtin(str(data["builtin"]))
    required = (
        "name",
        "cell_count",
        "boundary_size",
        "vertex_identification",
        "conductance_renormalization",
        "measure_weights",
    )
    missing = [k for k in required if k not in data]
    if missing:
        raise SpecError(f"fractal table is missing keys {missing}")
    coords = data.get("boundary_coords")
    maps = data.get("maps")
    try:
        return FractalSpec(
            name=str(data["name"]),
            cell_count=int(data["cell_count"]),
            boundary_size=int(data["boundary_size"]),
            vertex_identification=tuple(tuple(r) for r in data["vertex_identification"]),
            conductance_renormalization=_fraction(data["conductance_renormalization"]),
            measure_weights=tuple(_fraction(w) for w in data["measure_weights"]),
            boundary_coords=None if coords is None else tuple(tuple(map(float, p)) for p in coords),
            maps=None if maps is None else tuple(tuple(map(float, m)) for m in maps),
        )
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise SpecError(f"malformed fractal table: {exc}") from exc


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LevelGraph:
    """Finite weighted graph; edges stored once as (x, y) with x < y."""

    n_vertices: int
    edges: np.ndarray
    conductance: np.ndarray
    boundary: tuple[int, ...] = ()
    level: int = 0
    coords: np.ndarray | None = None
    addresses: tuple[str, ...] | None = None
    spec: FractalSpec | None = None

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        cond = np.asarray(self.conductance, dtype=float).reshape(-1)
        if len(cond) != len(edges):
            raise ValueError("one conductance per edge required")
        if len(edges):
            if np.any(edges[:, 0] >= edges[:, 1]):
                raise ValueError("edges must be canonically oriented (x < y), no loops")
            if edges.min() < 0 or edges.max() >= self.n_vertices:
                raise ValueError("edge endpoint out of range")
            if len(np.unique(edges, axis=0)) != len(edges):
                raise ValueError("duplicate edge")
        if not np.all(np.isfinite(cond)) or np.any(cond <= 0):
            raise ValueError("conductances must be finite and strictly positive")
        if self.spec is not None and len(self.boundary) != self.spec.boundary_size:
            raise ValueError("boundary size does not match the FractalSpec")
        object.__setattr__(self, "edges", _frozen(edges))
        object.__setattr__(self, "conductance", _frozen(cond))
        object.__setattr__(self, "boundary", tuple(int(p) for p in self.boundary))
        if self.coords is not None:
            object.__setattr__(self, "coords", _frozen(np.asarray(self.coords, dtype=float)))

    @classmethod
    def from_edges(cls, n_vertices, edges, conductance=None, boundary=(), coords=None):
        """Build a graph from arbitrary (x, y) pairs; orientation is canonicalized."""
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        cond = np.ones(len(edges)) if conductance is None else np.asarray(conductance, float)
        edges = np.sort(edges, axis=1)
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        return cls(n_vertices, edges[order], cond[order], tuple(boundary), coords=coords)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def incidence(self) -> sp.csr_matrix:
        """Signed E x V matrix of the derivation: row (x, y) is e_y - e_x."""
        E = self.n_edges
        rows = np.repeat(np.arange(E), 2)
        cols = self.edges.reshape(-1)
        vals = np.tile([-1.0, 1.0], E)
        return sp.csr_matrix((vals, (rows, cols)), shape=(E, self.n_vertices))

    @cached_property
    def abs_incidence(self) -> sp.csr_matrix:
        return abs(self.incidence)

    @cached_property
    def laplacian(self) -> sp.csr_matrix:
        """Combinatorial weighted Laplacian D^T C D (positive semidefinite)."""
        D = self.incidence
        return (D.T @ sp.diags(self.conductance) @ D).tocsr()

    @cached_property
    def degree(self) -> np.ndarray:
        return np.asarray(self.abs_incidence.T @ self.conductance).reshape(-1)

    def components(self) -> int:
        if self.n_vertices == 0:
            return 0
        return csgraph.connected_components(self.laplacian, directed=False)[0]

    def is_connected(self) -> bool:
        return self.components() == 1

    def require_connected(self, what="operation"):
        if not self.is_connected():
            raise PreconditionError(f"{what} needs a connected graph ({self.components()} components)")

    def compatible(self, other: "LevelGraph") -> bool:
        if self is other:
            return True
        return (
            self.n_vertices == other.n_vertices
            and np.array_equal(self.edges, other.edges)
            and np.array_equal(self.conductance, other.conductance)
        )

    def check_same(self, other: "LevelGraph"):
        if not self.compatible(other):
            raise GraphMismatchError("operands live on different graphs")

    def edge_index(self) -> dict[tuple[int, int], int]:
        return {(int(x), int(y)): e for e, (x, y) in enumerate(self.edges)}

    def __repr__(self):
        name = self.spec.name if self.spec else "custom"
        return f"LevelGraph({name}, level={self.level}, V={self.n_vertices}, E={self.n_edges})"


def _canonical_key(word: tuple[int, ...], j: int, table, b: int):
    while word:
        k = table[word[-1]][j]
        if k >= b:
            return word[:-1], k
        word, j = word[:-1], k
    return (), j


def build_level(spec: FractalSpec, n: int) -> LevelGraph:
    """Level-n graph with conductance r_c**n on every edge."""
    if n < 0:
        raise PreconditionError("level must be nonnegative")
    N, b = spec.cell_count, spec.boundary_size
    table = spec.vertex_identification
    index: dict = {}
    first_address: list[tuple[tuple[int, ...], int]] = []
    cell_vertices = []
    for word in itertools.product(range(N), repeat=n):
        ids = []
        for j in range(b):
            key = _canonical_key(word, j, table, b)
            if key not in index:
                index[key] = len(first_address)
                first_address.append((word, j))
            ids.append(index[key])
        cell_vertices.append(ids)

    weight = float(spec.conductance_renormalization**n)
    acc: dict[tuple[int, int], float] = {}
    for ids in cell_vertices:
        for x, y in itertools.combinations(ids, 2):
            key = (x, y) if x < y else (y, x)
            acc[key] = acc.get(key, 0.0) + weight
    pairs = sorted(acc)
    edges = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    cond = np.array([acc[p] for p in pairs])

    boundary = tuple(index[((), j)] for j in range(b))
    addresses = tuple("".join(map(str, w)) + f":{j}" for w, j in first_address)
    coords = None
    if spec.boundary_coords is not None and spec.maps is not None:
        coords = np.array([_embed(spec, w, j) for w, j in first_address])
    return LevelGraph(
        n_vertices=len(first_address),
        edges=edges,
        conductance=cond,
        boundary=boundary,
        level=n,
        coords=coords,
        addresses=addresses,
        spec=spec,
    )


def _embed(spec: FractalSpec, word, j):
    x = np.array(spec.boundary_coords[j], dtype=float)
    for i in reversed(word):
        a11, a12, a21, a22, b1, b2 = spec.maps[i]
        x = np.array([a11 * x[0] + a12 * x[1] + b1, a21 * x[0] + a22 * x[1] + b2])
    return x


@dataclass(frozen=True, eq=False)
class MeasureWeights:
    """Vertex weights of a (reference or energy) measure."""

    graph: LevelGraph
    values: np.ndarray
    signed: bool = False

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        if len(vals) != self.graph.n_vertices:
            raise ValueError(f"{len(vals)} weights for {self.graph.n_vertices} vertices")
        if not np.all(np.isfinite(vals)):
            raise ValueError("measure weights must be finite")
        if not self.signed and np.any(vals <= 0):
            raise PreconditionError("reference measure must charge every vertex positively")
        object.__setattr__(self, "values", _frozen(vals))

    @cached_property
    def total(self) -> float:
        return math.fsum(self.values)

    def scaled(self, t: float) -> "MeasureWeights":
        return MeasureWeights(self.graph, t * self.values, self.signed)

    def as_reference(self) -> "MeasureWeights":
        """Reinterpret as a reference measure (raises if some weight is not positive)."""
        return MeasureWeights(self.graph, self.values, signed=False)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]


def self_similar_measure(graph: LevelGraph) -> MeasureWeights:
    """Each level-n cell w carries mass mu_w and shares it equally among its b vertices."""
    spec = graph.spec
    if spec is None:
        raise PreconditionError("self-similar measure needs a graph built from a FractalSpec")
    N, b, n = spec.cell_count, spec.boundary_size, graph.level
    table = spec.vertex_identification
    index = {}
    for v, addr in enumerate(graph.addresses):
        word, j = addr.split(":")
        index[_canonical_key(tuple(int(c) for c in word), int(j), table, b)] = v
    acc = [Fraction(0)] * graph.n_vertices
    for word in itertools.product(range(N), repeat=n):
        mass = Fraction(1)
        for i in word:
            mass *= spec.measure_weights[i]
        share = mass / b
        for j in range(b):
            acc[index[_canonical_key(word, j, table, b)]] += share
    return MeasureWeights(graph, np.array([float(a) for a in acc]))


def uniform_measure(graph: LevelGraph, total: float = 1.0) -> MeasureWeights:
    return MeasureWeights(graph, np.full(graph.n_vertices, total / graph.n_vertices))


def cycle_rank(graph: LevelGraph) -> int:
    """|E| - |V| + 1 for a connected graph."""
    graph.require_connected("cycle_rank")
    return graph.n_edges - graph.n_vertices + 1
