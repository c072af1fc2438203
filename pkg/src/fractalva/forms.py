"""The space of 1-forms at graph level.

The 1-form space is realized as the edge space with the conductance-weighted
inner product ``<v, w> = sum_e c_e v_e conj(w_e)``.  Vertex functions act on
forms by the average of the two endpoint values; with this choice the
Leibniz rule, the norm identity ``||df||^2 = E(f)`` and the divergence
product rule hold exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .energy import _reference, mean_zero_solver
from .errors import SolverError
from .fields import OneForm, ScalarField
from .graph import LevelGraph, MeasureWeights, cycle_rank

__all__ = [
    "HodgeParts",
    "FiberView",
    "derivation",
    "inner",
    "norm",
    "action_scalar",
    "embed_simple_tensor",
    "divergence",
    "hodge_decompose",
    "harmonic_basis",
    "form_laplacian_apply",
    "form_laplacian_spectrum",
    "fiber_view",
    "fiber_pairing",
]


@dataclass(frozen=True)
class HodgeParts:
    potential: ScalarField
    exact: OneForm
    harmonic: OneForm
    residual: float


@dataclass(frozen=True)
class FiberView:
    """Pointwise norms ||v_x|| of a form in the fibers over each vertex."""

    norms: np.ndarray
    measure: MeasureWeights

    @property
    def norms_squared(self) -> np.ndarray:
        return self.norms**2

    @property
    def sup_norm(self) -> float:
        return float(self.norms.max(initial=0.0))

    @property
    def bounded(self) -> bool:
        """Membership in the space of vector fields of bounded length."""
        return bool(np.isfinite(self.sup_norm))

    @property
    def integral(self) -> float:
        return float(np.sum(self.measure.values * self.norms**2))


def derivation(f: ScalarField) -> OneForm:
    """(df)(x, y) = f(y) - f(x)."""
    return OneForm(f.graph, f.graph.incidence @ f.values)


def inner(v: OneForm, w: OneForm):
    v.graph.check_same(w.graph)
    val = np.sum(v.graph.conductance * v.values * np.conj(w.values))
    return float(val) if np.isrealobj(val) else complex(val)


def norm(v: OneForm) -> float:
    return float(np.sqrt(np.sum(v.graph.conductance * np.abs(v.values) ** 2)))


def _midpoint(g: ScalarField) -> np.ndarray:
    return 0.5 * (g.graph.abs_incidence @ g.values)


def action_scalar(g: ScalarField, v: OneForm) -> OneForm:
    """(g.v)(x, y) = (g(x) + g(y))/2 * v(x, y); left and right actions coincide."""
    g.graph.check_same(v.graph)
    return v._wrap(_midpoint(g) * v.values)


def embed_simple_tensor(a: ScalarField, b: ScalarField) -> OneForm:
    """The form a (x) b, i.e. b . da."""
    return action_scalar(b, derivation(a))


def divergence(m: MeasureWeights, v: OneForm) -> ScalarField:
    """(d*v)(x) = m(x)^-1 sum_{y~x} c_xy v(x, y), so <u, d*v>_m = -<du, v>."""
    m.graph.check_same(v.graph)
    w = _reference(m)
    graph = v.graph
    return ScalarField(graph, -(graph.incidence.T @ (graph.conductance * v.values)) / w)


def form_laplacian_apply(m: MeasureWeights, v: OneForm) -> OneForm:
    """Delta_1 v = d(d* v)."""
    return derivation(divergence(m, v))


def form_laplacian_spectrum(m: MeasureWeights) -> np.ndarray:
    """Eigenvalues of Delta_1 (all <= 0), ascending."""
    w = _reference(m)
    graph = m.graph
    K = graph.incidence.multiply(np.sqrt(graph.conductance)[:, None]).multiply(
        1.0 / np.sqrt(w)[None, :]
    )
    K = K.toarray()
    return np.sort(-la.eigvalsh(K @ K.T))


def hodge_decompose(m: MeasureWeights, v: OneForm, tol: float = 1e-10) -> HodgeParts:
    """Split v = df + w with w divergence free and f m-mean-zero."""
    m.graph.check_same(v.graph)
    graph = v.graph
    solve = mean_zero_solver(m)
    # A f = d*v  <=>  L f = D^T C v
    f = ScalarField(graph, solve(graph.incidence.T @ (graph.conductance * v.values)))
    exact = derivation(f)
    harmonic = v - exact
    div = divergence(m, harmonic).values
    residual = float(np.sqrt(np.sum(m.values * div**2)))
    scale = max(1.0, float(np.sqrt(np.sum(m.values * divergence(m, v).values ** 2))))
    if residual > tol * scale:
        raise SolverError(f"Hodge potential solve left divergence {residual:.3e}", residual)
    return HodgeParts(f, exact, harmonic, residual)


def harmonic_basis(m: MeasureWeights) -> list[OneForm]:
    """Orthonormal basis (in the form inner product) of the divergence-free forms.

    ker d* does not depend on m: it is the set of v with D^T C v = 0.
    """
    graph = m.graph
    _reference(m)
    graph.require_connected("harmonic_basis")
    if graph.n_edges == 0:
        return []
    sqrt_c = np.sqrt(graph.conductance)
    # kernel of D^T C^{1/2} is Euclidean-orthonormal; map back by C^{-1/2}
    K = (graph.incidence.T.multiply(sqrt_c[None, :])).toarray()
    null = la.null_space(K, rcond=1e-10)
    rank = cycle_rank(graph)
    if null.shape[1] != rank:
        raise SolverError(f"kernel dimension {null.shape[1]} differs from cycle rank {rank}")
    forms = []
    for col in null.T:
        k = int(np.flatnonzero(np.abs(col) > 1e-8 * np.abs(col).max())[0])
        col = col if col[k] > 0 else -col
        forms.append(OneForm(graph, col / sqrt_c))
    return forms


def fiber_pairing(m: MeasureWeights, b: OneForm, v: OneForm) -> np.ndarray:
    """<b_x, v_x> in the fiber over each vertex: (2 m(x))^-1 sum_y c_xy b(x,y) v(x,y)."""
    m.graph.check_same(b.graph)
    m.graph.check_same(v.graph)
    w = _reference(m)
    graph = m.graph
    return (graph.abs_incidence.T @ (graph.conductance * b.values * np.conj(v.values))) / (2 * w)


def fiber_view(m: MeasureWeights, v: OneForm) -> FiberView:
    sq = np.real(fiber_pairing(m, v, v))
    return FiberView(np.sqrt(np.maximum(sq, 0.0)), m)
