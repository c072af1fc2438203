"""Energy form, energy measures, the generator and related constants.

Conventions: the energy is summed over undirected edges without a 1/2,
``E(f, g) = sum_{x<y} c_xy (f(x) - f(y)) (g(x) - g(y))``, and the energy
measure charges each vertex with half of the contributions of its edges, so
that its total mass is ``E(f, g)``.  The generator ``A`` acts on
``L2(m)`` as ``(Af)(x) = m(x)^-1 sum_y c_xy (f(y) - f(x))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from ._linalg import GroundedSolver, generalized_eigh, solve_sparse
from .errors import PreconditionError, SolverError, SpecError
from .fields import ScalarField
from .graph import FractalSpec, LevelGraph, MeasureWeights, build_level

__all__ = [
    "EnergyReport",
    "energy",
    "energy_report",
    "energy_measure",
    "generator_matrix",
    "generator_apply",
    "generator_spectrum",
    "spectral_gap",
    "poincare_constant",
    "extension_energy_factor",
    "harmonic_extension",
    "kusuoka_measure",
    "dirichlet_solve",
    "l2_inner",
]


@dataclass(frozen=True)
class EnergyReport:
    energy: float
    per_edge: np.ndarray


def _diff(f: ScalarField) -> np.ndarray:
    return f.graph.incidence @ f.values


def energy(g1: ScalarField, g2: ScalarField) -> float:
    g1.graph.check_same(g2.graph)
    return float(np.sum(g1.graph.conductance * _diff(g1) * _diff(g2)))


def energy_report(f: ScalarField) -> EnergyReport:
    per_edge = f.graph.conductance * _diff(f) ** 2
    return EnergyReport(math.fsum(per_edge), per_edge)


def energy_measure(g: ScalarField, h: ScalarField) -> MeasureWeights:
    """Mutual energy measure Gamma(g, h) as signed vertex weights."""
    graph = g.graph
    graph.check_same(h.graph)
    edge_terms = graph.conductance * _diff(g) * _diff(h)
    return MeasureWeights(graph, 0.5 * (graph.abs_incidence.T @ edge_terms), signed=True)


def l2_inner(m: MeasureWeights, f: ScalarField, g: ScalarField) -> complex | float:
    """<f, g>_{L2(m)}, conjugate-linear in g."""
    m.graph.check_same(f.graph)
    m.graph.check_same(g.graph)
    val = np.sum(m.values * f.values * np.conj(g.values))
    return float(val) if np.isrealobj(val) else complex(val)


def _reference(m: MeasureWeights) -> np.ndarray:
    if np.any(m.values <= 0):
        raise PreconditionError("generator needs a strictly positive reference measure")
    return m.values


def generator_matrix(m: MeasureWeights) -> sp.csr_matrix:
    """Sparse matrix of A = -diag(m)^-1 L."""
    w = _reference(m)
    return (-sp.diags(1.0 / w) @ m.graph.laplacian).tocsr()


def generator_apply(m: MeasureWeights, f: ScalarField) -> ScalarField:
    m.graph.check_same(f.graph)
    w = _reference(m)
    return ScalarField(f.graph, -(m.graph.laplacian @ f.values) / w)


def generator_spectrum(m: MeasureWeights) -> np.ndarray:
    """All eigenvalues of -A in L2(m), ascending."""
    w = _reference(m)
    lam, _ = generalized_eigh(m.graph.laplacian, w)
    return lam


def _gap_pair(m: MeasureWeights):
    graph = m.graph
    if graph.n_vertices < 2:
        raise PreconditionError("spectral gap needs at least two vertices")
    graph.require_connected("spectral_gap")
    w = _reference(m)
    lam, vec = generalized_eigh(graph.laplacian, w, k=2)
    return lam[1], vec[:, 1]


def spectral_gap(m: MeasureWeights) -> float:
    """Smallest nonzero eigenvalue of -A on L2(m).

    Its reciprocal is the best constant c in
    ``int (f - f_X)^2 dm <= c E(f)``.
    """
    return float(_gap_pair(m)[0])


def gap_eigenfield(m: MeasureWeights) -> ScalarField:
    return ScalarField(m.graph, _gap_pair(m)[1])


def poincare_constant(m: MeasureWeights) -> float:
    """Best c_P with ||f||^2_{L2(m)} <= c_P E(f) for m-mean-zero f.

    On a finite connected graph this is exactly ``1 / spectral_gap(m)``:
    the variance inequality and the Poincare inequality coincide once the
    mean is removed.
    """
    return 1.0 / spectral_gap(m)


def _interior(graph: LevelGraph, B: Sequence[int]) -> np.ndarray:
    mask = np.ones(graph.n_vertices, dtype=bool)
    mask[list(B)] = False
    return np.flatnonzero(mask)


def harmonic_extension(graph: LevelGraph, B: Sequence[int], values) -> np.ndarray:
    """Energy-minimizing extension of ``values`` on B to all vertices."""
    B = list(B)
    values = np.asarray(values, dtype=float)
    interior = _interior(graph, B)
    u = np.zeros(graph.n_vertices)
    u[B] = values
    if len(interior):
        L = graph.laplacian
        L_II = L[interior][:, interior]
        rhs = -(L[interior][:, B] @ values)
        u[interior] = solve_sparse(L_II, rhs)
    return u


def extension_energy_factor(spec: FractalSpec, boundary_values=None) -> float:
    """Ratio of the minimal level-1 energy (unit conductances) to the level-0 energy.

    The harmonic extension of boundary data f to level 1 has energy
    ``rho * E_0(f)``; the conductance multiplier is then ``1/rho``, so the
    result should equal ``1 / spec.conductance_renormalization``.

    With ``boundary_values`` the ratio is evaluated for that data; constant
    data has zero energy on both levels and falls back to the basis-free
    value computed from the trace (Schur complement) of the level-1 form.
    """
    g0, g1 = build_level(spec, 0), build_level(spec, 1)
    L0 = g0.laplacian.toarray()
    L1 = g1.laplacian.toarray() / float(spec.conductance_renormalization)
    B = list(g1.boundary)
    interior = _interior(g1, B)
    if len(interior):
        L_II = L1[np.ix_(interior, interior)]
        if np.linalg.matrix_rank(L_II) < len(interior):
            raise SolverError("interior system of the level-1 graph is singular")
        trace = L1[np.ix_(B, B)] - L1[np.ix_(B, interior)] @ np.linalg.solve(
            L_II, L1[np.ix_(interior, B)]
        )
    else:
        trace = L1[np.ix_(B, B)]

    if boundary_values is not None:
        f = np.asarray(boundary_values, dtype=float)
        e0 = f @ L0 @ f
        if e0 > 1e-14 * max(1.0, f @ f):
            return float((f @ trace @ f) / e0)

    rho = np.trace(trace) / np.trace(L0)
    if np.abs(trace - rho * L0).max() > 1e-10 * np.abs(trace).max():
        raise SpecError(
            f"{spec.name}: level-1 trace form is not a multiple of the level-0 form; "
            "no single renormalization factor exists"
        )
    return float(rho)


def kusuoka_measure(m: MeasureWeights, order: Iterable[int] | None = None) -> MeasureWeights:
    """Sum of energy measures of an energy-orthonormal basis of boundary-harmonic functions.

    The basis comes from harmonic extensions of boundary indicators,
    Gram-Schmidt orthonormalized in the energy inner product; the constant
    direction drops out.  ``order`` permutes the indicators (the resulting
    measure does not depend on it).
    """
    graph = m.graph
    B = list(graph.boundary)
    if len(B) < 2:
        raise PreconditionError("Kusuoka measure needs at least two boundary vertices")
    order = list(range(len(B))) if order is None else list(order)
    L = graph.laplacian
    basis: list[np.ndarray] = []
    for j in order:
        h = harmonic_extension(graph, B, np.eye(len(B))[j])
        for q in basis:
            h = h - (q @ (L @ h)) * q
        norm2 = h @ (L @ h)
        if norm2 > 1e-12:
            basis.append(h / np.sqrt(norm2))
    nu = np.zeros(graph.n_vertices)
    for h in basis:
        f = ScalarField(graph, h)
        nu += energy_measure(f, f).values
    return MeasureWeights(graph, nu, signed=not np.all(nu > 0))


def dirichlet_solve(m: MeasureWeights, B: Iterable[int], f: ScalarField) -> ScalarField:
    """u with u = 0 on B and (A u)(x) = f(x) off B (Green operator of B)."""
    graph = m.graph
    graph.check_same(f.graph)
    B = sorted(set(int(p) for p in B))
    if not B:
        raise PreconditionError("Dirichlet boundary set must be nonempty")
    w = _reference(m)
    interior = _interior(graph, B)
    u = np.zeros(graph.n_vertices)
    if len(interior):
        L = graph.laplacian
        try:
            u[interior] = solve_sparse(L[interior][:, interior], -(w * f.values)[interior])
        except SolverError as exc:
            raise SolverError(f"Dirichlet problem is singular (is the graph connected?): {exc}")
    return ScalarField(graph, u)


def mean_zero_solver(m: MeasureWeights) -> GroundedSolver:
    """Factorized solver for L u = r returning the m-mean-zero solution."""
    m.graph.require_connected("mean-zero solve")
    return GroundedSolver(m.graph.laplacian, _reference(m))
