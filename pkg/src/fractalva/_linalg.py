"""Sparse/dense linear algebra shared by the solvers."""
from __future__ import annotations

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverError

DENSE_LIMIT = 2000
EIG_RTOL = 1e-10


class GroundedSolver:
    """Solve L u = r for a connected-graph Laplacian, r summing to zero.

    Vertex 0 is grounded to remove the constant kernel; the answer is then
    shifted to have zero mean with respect to ``weights``.
    """

    def __init__(self, L: sp.spmatrix, weights: np.ndarray):
        self.n = L.shape[0]
        self.weights = np.asarray(weights, dtype=float)
        if self.n > 1:
            self._lu = spla.splu(sp.csc_matrix(L)[1:, 1:])

    def __call__(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs)
        u = np.zeros(self.n, dtype=np.result_type(rhs, float))
        if self.n > 1:
            u[1:] = self._lu.solve(rhs[1:])
        return u - (self.weights @ u) / self.weights.sum()


def solve_sparse(A: sp.spmatrix, rhs: np.ndarray) -> np.ndarray:
    if A.shape[0] == 0:
        return np.zeros(0, dtype=np.result_type(rhs, float))
    try:
        lu = spla.splu(sp.csc_matrix(A))
    except RuntimeError as exc:  # exactly singular
        raise SolverError(f"singular linear system: {exc}") from exc
    return lu.solve(np.asarray(rhs))


def generalized_eigh(K: sp.spmatrix, mass: np.ndarray, k: int | None = None):
    """Eigenpairs of K phi = lam * diag(mass) phi, ascending.

    Dense below ``DENSE_LIMIT`` unknowns, otherwise shift-invert Lanczos for
    the ``k`` lowest pairs.
    """
    n = K.shape[0]
    mass = np.asarray(mass)
    if n <= DENSE_LIMIT or k is None or k >= n - 1:
        Kd = K.toarray() if sp.issparse(K) else np.asarray(K)
        lam, vec = la.eigh(Kd, np.diag(mass))
        if k is not None:
            lam, vec = lam[:k], vec[:, :k]
    else:
        scale = float(abs(K.diagonal()).max() / mass.max())
        try:
            lam, vec = spla.eigsh(
                sp.csc_matrix(K), k=k, M=sp.diags(mass).tocsc(), sigma=-1e-6 * scale, which="LM"
            )
        except spla.ArpackNoConvergence as exc:
            raise SolverError(f"Lanczos did not converge: {exc}") from exc
        order = np.argsort(lam)
        lam, vec = lam[order], vec[:, order]
    resid = K @ vec - (mass[:, None] * vec) * lam
    rel = np.linalg.norm(resid, axis=0).max(initial=0.0) / max(1.0, abs(lam).max(initial=0.0))
    if rel > EIG_RTOL * max(1.0, np.sqrt(n)):
        raise SolverError(f"eigensolver residual {rel:.3e} above tolerance", residual=rel)
    return lam, vec
