"""Vertex fields and edge 1-forms bound to a :class:`LevelGraph`.

Both are thin wrappers around a numpy vector.  Arithmetic between two
operands checks that they live on the same graph.  A 1-form stores one value
per canonical edge (x, y), x < y; the reversed orientation carries the
negative value.
"""
from __future__ import annotations

import numpy as np

from .graph import LevelGraph

__all__ = [
    "ScalarField",
    "OneForm",
    "ComplexScalarField",
    "ComplexOneForm",
    "circulation",
]


class _Cochain:
    __slots__ = ("graph", "values")
    _dtype = None

    def __init__(self, graph: LevelGraph, values):
        vals = np.array(values, dtype=self._dtype if self._dtype else None, copy=True)
        if vals.dtype.kind not in "fc":
            vals = vals.astype(float)
        vals = vals.reshape(-1)
        if len(vals) != self._size(graph):
            raise ValueError(
                f"{type(self).__name__} needs {self._size(graph)} values, got {len(vals)}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("values must be finite")
        vals.setflags(write=False)
        self.graph = graph
        self.values = vals

    @staticmethod
    def _size(graph):  # pragma: no cover - overridden
        raise NotImplementedError

    @classmethod
    def zeros(cls, graph):
        return cls(graph, np.zeros(cls._size(graph)))

    @classmethod
    def constant(cls, graph, c):
        return cls(graph, np.full(cls._size(graph), c))

    @classmethod
    def random(cls, graph, rng: np.random.Generator):
        return cls(graph, rng.standard_normal(cls._size(graph)))

    def _wrap(self, values):
        kind = type(self)
        if np.iscomplexobj(values) and kind._dtype is None:
            kind = _COMPLEX[kind]
        return kind(self.graph, values)

    def _other(self, other):
        if isinstance(other, _Cochain):
            if type(other)._size is not type(self)._size:
                raise TypeError("cannot mix vertex fields and 1-forms")
            self.graph.check_same(other.graph)
            return other.values
        return other

    def __add__(self, other):
        return self._wrap(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._wrap(self.values - self._other(other))

    def __rsub__(self, other):
        return self._wrap(self._other(other) - self.values)

    def __mul__(self, other):
        return self._wrap(self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._wrap(self.values / self._other(other))

    def __neg__(self):
        return self._wrap(-self.values)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def conj(self):
        return self._wrap(np.conj(self.values))

    @property
    def real(self):
        return _REAL[type(self)](self.graph, self.values.real)

    @property
    def imag(self):
        return _REAL[type(self)](self.graph, self.values.imag)

    def __repr__(self):
        return f"{type(self).__name__}({self.graph!r}, {np.array2string(self.values, threshold=8)})"


class ScalarField(_Cochain):
    __slots__ = ()

    @staticmethod
    def _size(graph):
        return graph.n_vertices


class OneForm(_Cochain):
    __slots__ = ()

    @staticmethod
    def _size(graph):
        return graph.n_edges

    @classmethod
    def from_oriented(cls, graph: LevelGraph, values: dict) -> "OneForm":
        """Build from ``{(x, y): value}`` in any orientation."""
        index = graph.edge_index()
        out = np.zeros(graph.n_edges, dtype=complex if any(np.iscomplexobj(v) for v in values.values()) else float)
        for (x, y), val in values.items():
            if (x, y) in index:
                out[index[x, y]] = val
            elif (y, x) in index:
                out[index[y, x]] = -val
            else:
                raise KeyError(f"({x}, {y}) is not an edge")
        return cls(graph, out)

    def oriented(self, x: int, y: int):
        index = self.graph.edge_index()
        if (x, y) in index:
            return self.values[index[x, y]]
        return -self.values[index[y, x]]


class ComplexScalarField(ScalarField):
    __slots__ = ()
    _dtype = complex


class ComplexOneForm(OneForm):
    __slots__ = ()
    _dtype = complex


_COMPLEX = {ScalarField: ComplexScalarField, OneForm: ComplexOneForm}
_REAL = {
    ScalarField: ScalarField,
    OneForm: OneForm,
    ComplexScalarField: ScalarField,
    ComplexOneForm: OneForm,
}


def circulation(graph: LevelGraph, cycle, value: float = 1.0) -> OneForm:
    """Unit flow ``value`` along the closed vertex path ``cycle`` (first vertex not repeated)."""
    cycle = list(cycle)
    pairs = {(cycle[i], cycle[(i + 1) % len(cycle)]): value for i in range(len(cycle))}
    return OneForm.from_oriented(graph, pairs)
