"""Magnetic Schroedinger operators and the Dirac operator on graph approximations.

Two discretizations of the magnetic derivative ``(-i d - a) f`` are offered:

``linear``
    ``-i (f(y) - f(x)) - a(x, y) (f(x) + f(y)) / 2``, the midpoint action of
    the vector potential.  Gauge invariance holds only approximately.
``exponential``
    Peierls phases split symmetrically over the edge,
    ``-i (exp(-i a/2) f(y) - exp(i a/2) f(x))``.  It agrees with the linear
    form to first order in ``a`` and is exactly gauge covariant.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .energy import _reference
from .errors import ConfigError
from .fields import ComplexOneForm, ComplexScalarField, OneForm, ScalarField
from .forms import derivation, fiber_view
from .graph import LevelGraph, MeasureWeights

__all__ = [
    "MagneticConfig",
    "MagneticHamiltonian",
    "DiracOperator",
    "magnetic_derivative",
    "magnetic_derivative_matrix",
    "magnetic_form",
    "assemble_magnetic_hamiltonian",
    "magnetic_spectrum",
    "gauge_transform",
    "dirac_assemble",
    "dirac_spectrum",
]

CONVENTIONS = ("linear", "exponential")


@dataclass(frozen=True)
class MagneticConfig:
    a: OneForm
    V: ScalarField | None = None
    convention: str = "exponential"

    def __post_init__(self):
        if self.convention not in CONVENTIONS:
            raise ConfigError(f"convention must be one of {CONVENTIONS}, got {self.convention!r}")
        if np.iscomplexobj(self.a.values):
            raise ConfigError("vector potential must be real")
        if self.V is not None:
            if np.iscomplexobj(self.V.values):
                raise ConfigError("electric potential must be real")
            self.a.graph.check_same(self.V.graph)

    @property
    def graph(self) -> LevelGraph:
        return self.a.graph

    @property
    def phases(self) -> np.ndarray:
        """Edge phases a(x, y) reduced to (-pi, pi]."""
        return np.pi - np.mod(np.pi - self.a.values, 2 * np.pi)

    def potential(self) -> np.ndarray:
        return np.zeros(self.graph.n_vertices) if self.V is None else self.V.values

    def fiber_sup(self, m: MeasureWeights) -> float:
        """sup_x ||a_x||, finite on every finite graph."""
        return fiber_view(m, self.a).sup_norm


def magnetic_derivative_matrix(cfg: MagneticConfig) -> sp.csr_matrix:
    graph = cfg.graph
    D = graph.incidence
    if cfg.convention == "linear":
        return (-1j * D - sp.diags(0.5 * cfg.a.values) @ graph.abs_incidence).tocsr()
    theta = cfg.phases
    E = graph.n_edges
    rows = np.repeat(np.arange(E), 2)
    cols = graph.edges.reshape(-1)
    vals = np.empty(2 * E, dtype=complex)
    vals[0::2] = 1j * np.exp(0.5j * theta)  # coefficient of f(x)
    vals[1::2] = -1j * np.exp(-0.5j * theta)  # coefficient of f(y)
    return sp.csr_matrix((vals, (rows, cols)), shape=(E, graph.n_vertices))


def magnetic_derivative(cfg: MagneticConfig, f: ScalarField) -> ComplexOneForm:
    cfg.graph.check_same(f.graph)
    return ComplexOneForm(f.graph, magnetic_derivative_matrix(cfg) @ f.values)


def magnetic_form(cfg: MagneticConfig, m: MeasureWeights, f: ScalarField, g: ScalarField) -> complex:
    """E^{a,V}(f, g): linear in f, conjugate-linear in g."""
    graph = cfg.graph
    graph.check_same(m.graph)
    T = magnetic_derivative_matrix(cfg)
    Tf, Tg = T @ f.values, T @ g.values
    kinetic = np.sum(graph.conductance * Tf * np.conj(Tg))
    potential = np.sum(m.values * cfg.potential() * f.values * np.conj(g.values))
    return complex(kinetic + potential)


@dataclass(frozen=True, eq=False)
class MagneticHamiltonian:
    """H = M^-1 (T^* C T) + V, self-adjoint in L2(m).

    ``form_matrix`` is the Hermitian matrix K with ``E^{a,V}(f, g) = g^* K f``.
    """

    form_matrix: np.ndarray
    weights: np.ndarray

    @cached_property
    def matrix(self) -> np.ndarray:
        return self.form_matrix / self.weights[:, None]

    def apply(self, f: ScalarField) -> ComplexScalarField:
        return ComplexScalarField(f.graph, self.matrix @ f.values)

    def hermitian_defect(self) -> float:
        """max |M H - (M H)^*|, the failure of self-adjointness in L2(m)."""
        MH = self.weights[:, None] * self.matrix
        return float(np.abs(MH - MH.conj().T).max())

    def spectrum(self) -> np.ndarray:
        K = 0.5 * (self.form_matrix + self.form_matrix.conj().T)
        return la.eigh(K, np.diag(self.weights), eigvals_only=True)


def assemble_magnetic_hamiltonian(cfg: MagneticConfig, m: MeasureWeights) -> MagneticHamiltonian:
    graph = cfg.graph
    graph.check_same(m.graph)
    w = _reference(m)
    T = magnetic_derivative_matrix(cfg)
    K = (T.conj().T @ sp.diags(graph.conductance) @ T).toarray()
    K = K + np.diag(w * cfg.potential())
    return MagneticHamiltonian(K, w)


def magnetic_spectrum(cfg: MagneticConfig, m: MeasureWeights) -> np.ndarray:
    return assemble_magnetic_hamiltonian(cfg, m).spectrum()


def gauge_transform(cfg: MagneticConfig, lam: ScalarField) -> MagneticConfig:
    """a -> a + d(lam).

    In the exponential convention H' = U H U^* with U = diag(exp(i lam)), so
    spectra coincide; the linear convention is only approximately covariant.
    """
    if np.iscomplexobj(lam.values):
        raise ConfigError("gauge function must be real")
    return MagneticConfig(cfg.a + derivation(lam), cfg.V, cfg.convention)


@dataclass(frozen=True, eq=False)
class DiracOperator:
    """D = [[0, d^dagger], [d, 0]] on L2(m) + forms, with d^dagger = -d* the true adjoint.

    Vectors are concatenations (f, v) of vertex and edge values.
    """

    graph: LevelGraph
    weights: np.ndarray

    @cached_property
    def gradient(self) -> sp.csr_matrix:
        return self.graph.incidence

    @cached_property
    def adjoint(self) -> sp.csr_matrix:
        g = self.graph
        return (sp.diags(1.0 / self.weights) @ g.incidence.T @ sp.diags(g.conductance)).tocsr()

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        return sp.bmat([[None, self.adjoint], [self.gradient, None]], format="csr")

    @property
    def gram(self) -> np.ndarray:
        """Diagonal of the combined inner product."""
        return np.concatenate([self.weights, self.graph.conductance])

    def apply(self, f: ScalarField, v: OneForm) -> tuple[ScalarField, OneForm]:
        f.graph.check_same(self.graph)
        v.graph.check_same(self.graph)
        return (
            f._wrap(self.adjoint @ v.values),
            v._wrap(self.gradient @ f.values),
        )

    def symmetry_defect(self) -> float:
        GD = (sp.diags(self.gram) @ self.matrix).toarray()
        return float(np.abs(GD - GD.T).max(initial=0.0))

    def symmetric_matrix(self) -> np.ndarray:
        """G^{1/2} D G^{-1/2}, a symmetric matrix with the spectrum of D."""
        s = np.sqrt(self.gram)
        return (sp.diags(s) @ self.matrix @ sp.diags(1.0 / s)).toarray()

    def square_blocks(self) -> tuple[np.ndarray, np.ndarray]:
        """(d^dagger d, d d^dagger) = (-A, -Delta_1)."""
        grad, adj = self.gradient, self.adjoint
        return (adj @ grad).toarray(), (grad @ adj).toarray()


def dirac_assemble(m: MeasureWeights) -> DiracOperator:
    return DiracOperator(m.graph, _reference(m).copy())


def dirac_spectrum(D: DiracOperator) -> np.ndarray:
    S = D.symmetric_matrix()
    return np.sort(la.eigvalsh(0.5 * (S + S.T)))
