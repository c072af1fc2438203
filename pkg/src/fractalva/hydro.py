"""Navier-Stokes analog on graph approximations: convection term, weak-solution
checks, Neumann problems and pressure recovery.

Time is not discretized.  Weak solutions are necessarily stationary, so a
candidate initial form u0 is checked by evaluating the integrated weak
identity on the constant trajectory u(t) = u0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .energy import energy_measure, l2_inner
from .errors import PreconditionError, SolverError, VerificationError
from .fields import OneForm, ScalarField
from .forms import action_scalar, derivation, divergence, harmonic_basis, inner
from .graph import LevelGraph, MeasureWeights, uniform_measure
from ._linalg import GroundedSolver

__all__ = [
    "NeumannData",
    "NSReport",
    "NSBoundarySolution",
    "convection",
    "verify_weak_ns",
    "neumann_derivative",
    "neumann_derivatives",
    "solve_neumann",
    "boundary_weak_residual",
    "ns_boundary_solution",
]


@dataclass(frozen=True)
class NeumannData:
    """Boundary set B with prescribed fluxes phi; solvable iff sum(phi) = 0."""

    graph: LevelGraph
    boundary: tuple[int, ...]
    flux: tuple[float, ...]

    def __post_init__(self):
        B = tuple(int(p) for p in self.boundary)
        phi = tuple(float(x) for x in self.flux)
        if len(B) != len(phi):
            raise ValueError("one flux value per boundary vertex")
        if len(set(B)) != len(B):
            raise ValueError("boundary vertices repeat")
        if any(p < 0 or p >= self.graph.n_vertices for p in B):
            raise ValueError("boundary vertex out of range")
        object.__setattr__(self, "boundary", B)
        object.__setattr__(self, "flux", phi)

    @classmethod
    def on_fractal_boundary(cls, graph: LevelGraph, flux: Sequence[float]) -> "NeumannData":
        return cls(graph, graph.boundary, tuple(flux))


@dataclass
class NSReport:
    is_weak_solution: bool
    harmonic_residual: float
    convection_values: list[float] = field(default_factory=list)
    dissipation_values: list[float] = field(default_factory=list)
    tolerance: float = 0.0
    stationarity: str = ""

    def to_text(self) -> str:
        lines = [
            f"is_weak_solution: {str(self.is_weak_solution).lower()}",
            f"harmonic_residual: {self.harmonic_residual:.17g}",
            f"tolerance: {self.tolerance:.17g}",
            f"test_forms: {len(self.convection_values)}",
            f"max_convection: {max(map(abs, self.convection_values), default=0.0):.17g}",
            f"max_dissipation: {max(map(abs, self.dissipation_values), default=0.0):.17g}",
            f"stationarity: {self.stationarity}",
        ]
        return "\n".join(lines) + "\n"


def convection(m: MeasureWeights, u: OneForm, v: OneForm) -> float:
    """-<(d*v) u, u>, the weak form of the gradient of the kinetic energy density."""
    u.graph.check_same(v.graph)
    return -float(np.real(inner(action_scalar(divergence(m, v), u), u)))


def verify_weak_ns(m: MeasureWeights, u0: OneForm, tol: float = 1e-10) -> NSReport:
    """Check that u(t) = u0 is a weak solution of the boundary-free system.

    With u constant in time the identity against a divergence-free test form
    v reduces to ``t * (convection(u0, v) + <d*u0, d*v>) = 0``; both terms are
    evaluated for every element of the harmonic basis.
    """
    m.graph.check_same(u0.graph)
    div = divergence(m, u0)
    harmonic_residual = float(np.sqrt(abs(l2_inner(m, div, div))))
    conv, diss = [], []
    for v in harmonic_basis(m):
        conv.append(convection(m, u0, v))
        diss.append(float(l2_inner(m, div, divergence(m, v))))
    ok = harmonic_residual <= tol and all(abs(c) <= tol for c in conv) and all(
        abs(d) <= tol for d in diss
    )
    note = (
        "constant trajectory u(t) = u0 satisfies the integrated identity"
        if ok
        else "u0 is not divergence free; no stationary weak solution starts here"
    )
    return NSReport(ok, harmonic_residual, conv, diss, tol, note)


def neumann_derivative(h: ScalarField, p: int) -> float:
    """(dh)_p = sum_{y~p} c_py (h(p) - h(y))."""
    return float((h.graph.laplacian @ h.values)[p])


def neumann_derivatives(h: ScalarField, B: Sequence[int]) -> np.ndarray:
    return (h.graph.laplacian @ h.values)[list(B)]


def solve_neumann(data: NeumannData, m: MeasureWeights | None = None, tol: float = 1e-10) -> ScalarField:
    """Harmonic h off B with (dh)_p = phi(p) on B, mean zero w.r.t. m (default: counting measure)."""
    graph = data.graph
    if not data.boundary:
        raise PreconditionError("Neumann problem needs a nonempty boundary")
    phi = np.array(data.flux)
    if abs(phi.sum()) > 1e-12 * max(1.0, np.abs(phi).sum()):
        raise PreconditionError(f"boundary fluxes must sum to zero (sum = {phi.sum():.3e})")
    graph.require_connected("solve_neumann")
    weights = uniform_measure(graph).values if m is None else m.values
    if m is not None:
        graph.check_same(m.graph)
    rhs = np.zeros(graph.n_vertices)
    rhs[list(data.boundary)] = phi
    h = GroundedSolver(graph.laplacian, weights)(rhs)
    resid = float(np.abs(graph.laplacian @ h - rhs).max())
    if resid > tol * max(1.0, np.abs(phi).max()):
        raise SolverError(f"Neumann residual {resid:.3e} above tolerance", resid)
    return ScalarField(graph, h)


def boundary_weak_residual(data: NeumannData, u: OneForm) -> float:
    """max over interior vertices x of |<u, d 1_x>|; zero iff u is orthogonal to all d psi with psi|_B = 0."""
    graph = data.graph
    graph.check_same(u.graph)
    tested = graph.incidence.T @ (graph.conductance * u.values)
    mask = np.ones(graph.n_vertices, dtype=bool)
    mask[list(data.boundary)] = False
    return float(np.abs(tested[mask]).max(initial=0.0))


class NSBoundarySolution(NamedTuple):
    velocity: OneForm
    pressure: MeasureWeights


def ns_boundary_solution(m: MeasureWeights, data: NeumannData, tol: float = 1e-10) -> NSBoundarySolution:
    """Stationary solution u = dh of the system on B^c and its pressure p = -Gamma(h)/2."""
    m.graph.check_same(data.graph)
    h = solve_neumann(data, m, tol)
    u = derivation(h)
    resid = boundary_weak_residual(data, u)
    if resid > tol * max(1.0, max(map(abs, data.flux), default=0.0)):
        raise VerificationError(f"u = dh violates the boundary weak identity ({resid:.3e})")
    gam = energy_measure(h, h)
    return NSBoundarySolution(u, MeasureWeights(m.graph, -0.5 * gam.values, signed=True))
