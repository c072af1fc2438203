"""Weak solvers for the quasilinear and drift equations, and the perturbed generator.

* ``d* a(du) = f`` with an edgewise monotone nonlinearity ``a``, solved by a
  damped fixed-point iteration preconditioned with the inverse generator.
* ``-A u + b(du) + rho u = 0`` solved by Picard iteration.
* ``L^Q u = A u + <b_x, d_x u>`` together with a positivity check of
  ``exp(t L^Q)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .energy import _reference, energy, generator_matrix, mean_zero_solver
from .errors import ConfigError, PreconditionError
from .fields import OneForm, ScalarField
from .forms import derivation, divergence, fiber_pairing
from .graph import MeasureWeights

__all__ = [
    "EdgeNonlinearity",
    "DriftCoefficient",
    "SolveDiagnostics",
    "PositivityReport",
    "solve_quasilinear",
    "quasilinear_residual",
    "solve_drift",
    "drift_residual",
    "perturbed_generator",
    "q_form",
    "semigroup_positivity",
]

_SAMPLE_S = np.concatenate([[0.0], np.logspace(-6, 3, 600)])


def _saturating(base: float = 1.0, bump: float = 1.0):
    return lambda s: base + bump / (1.0 + s)


PHI_FAMILIES: dict[str, Callable[..., Callable]] = {
    "saturating": _saturating,
    "constant": lambda base=1.0: (lambda s: np.full_like(np.asarray(s, float), base)),
}


@dataclass(frozen=True)
class EdgeNonlinearity:
    """Edgewise map a(v)(e) = psi(v_e), psi odd, psi(s) = phi(s) s for s >= 0.

    The constants refer to the form-space conditions: growth
    ``||a(v)|| <= c0 (1 + ||v||)``, coercivity ``<a(v), v> >= c1 ||v||^2 - c2``
    and strict monotonicity ``<a(v) - a(w), v - w> >= c3 ||v - w||^2``.
    Because ``a`` acts edge by edge, each follows from the slopes of ``psi``,
    which are sampled on [0, 1000] when not given.
    """

    kind: str
    psi_pos: Callable[[np.ndarray], np.ndarray]
    c0: float
    c1: float
    c2: float
    c3: float

    @classmethod
    def _checked(cls, kind, psi_pos, c0=None, c1=None, c2=None, c3=None):
        s = _SAMPLE_S
        vals = np.asarray(psi_pos(s), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ConfigError(f"{kind}: nonlinearity is not finite on the sample range")
        if abs(vals[0]) > 1e-14:
            raise ConfigError(f"{kind}: psi(0) must vanish")
        slopes = np.diff(vals) / np.diff(s)
        if slopes.min() < -1e-12:
            k = int(np.argmin(slopes))
            raise ConfigError(f"{kind}: not monotone near s={s[k]:.3g} (slope {slopes[k]:.3g})")
        ratios = vals[1:] / s[1:]
        est = dict(c0=float(slopes.max()), c1=float(ratios.min()), c2=0.0, c3=float(slopes.min()))
        given = dict(c0=c0, c1=c1, c2=c2, c3=c3)
        consts = {k: (est[k] if v is None else float(v)) for k, v in given.items()}
        if consts["c0"] <= 0 or consts["c1"] <= 0:
            raise ConfigError(f"{kind}: growth/coercivity constants must be positive, got {consts}")
        # user constants must not contradict the sampled behaviour
        if consts["c3"] > est["c3"] + 1e-9 or consts["c0"] < est["c0"] - 1e-9:
            raise ConfigError(f"{kind}: declared constants {consts} violate sampled {est}")
        return cls(kind, psi_pos, **consts)

    @classmethod
    def identity(cls) -> "EdgeNonlinearity":
        return cls("identity", lambda s: np.asarray(s, dtype=float), 1.0, 1.0, 0.0, 1.0)

    @classmethod
    def scaled_monotone(cls, phi: Callable, **constants) -> "EdgeNonlinearity":
        """a(v) = phi(|v|) v edgewise."""
        return cls._checked("scaled_monotone", lambda s: phi(np.asarray(s, float)) * s, **constants)

    @classmethod
    def user_table(cls, s: Sequence[float], psi: Sequence[float]) -> "EdgeNonlinearity":
        """Piecewise-linear psi through (s_i, psi_i), extended linearly past the last knot."""
        s = np.asarray(s, dtype=float)
        psi = np.asarray(psi, dtype=float)
        if s.ndim != 1 or s.shape != psi.shape or len(s) < 2:
            raise ConfigError("user_table needs matching s/psi lists with at least two knots")
        if np.any(np.diff(s) <= 0) or s[0] < 0:
            raise ConfigError("user_table knots must be nonnegative and increasing")
        if s[0] > 0:
            s, psi = np.concatenate([[0.0], s]), np.concatenate([[0.0], psi])
        tail = (psi[-1] - psi[-2]) / (s[-1] - s[-2])

        def psi_pos(x):
            x = np.asarray(x, dtype=float)
            return np.where(x <= s[-1], np.interp(x, s, psi), psi[-1] + tail * (x - s[-1]))

        return cls._checked("user_table", psi_pos)

    @classmethod
    def from_mapping(cls, data: Mapping) -> "EdgeNonlinearity":
        kind = data.get("kind", "identity")
        if kind == "identity":
            return cls.identity()
        if kind == "scaled_monotone":
            family = data.get("phi", "saturating")
            if family not in PHI_FAMILIES:
                raise ConfigError(f"unknown phi family {family!r}; choose from {sorted(PHI_FAMILIES)}")
            params = {k: float(v) for k, v in data.items() if k not in ("kind", "phi")}
            consts = {k: params.pop(k) for k in ("c0", "c1", "c2", "c3") if k in params}
            try:
                phi = PHI_FAMILIES[family](**params)
            except TypeError as exc:
                raise ConfigError(f"bad parameters for phi family {family!r}: {exc}") from exc
            return cls.scaled_monotone(phi, **consts)
        if kind == "user_table":
            return cls.user_table(data["s"], data["psi"])
        raise ConfigError(f"unknown nonlinearity kind {kind!r}")

    def edge_map(self, values: np.ndarray) -> np.ndarray:
        return np.sign(values) * self.psi_pos(np.abs(values))

    def __call__(self, v: OneForm) -> OneForm:
        return OneForm(v.graph, self.edge_map(v.values))

    @property
    def default_damping(self) -> float:
        return self.c3 / (2.0 * self.c0**2)

    def report(self) -> dict:
        return {"kind": self.kind, "c0": self.c0, "c1": self.c1, "c2": self.c2, "c3": self.c3}


@dataclass
class SolveDiagnostics:
    iterations: int
    residual: float
    converged: bool
    tolerance: float
    monotonicity: dict = field(default_factory=dict)
    damping: float | None = None
    contraction: float | None = None
    history: list = field(default_factory=list)
    note: str = ""

    def to_text(self) -> str:
        lines = [
            f"converged: {str(self.converged).lower()}",
            f"iterations: {self.iterations}",
            f"residual: {self.residual:.17g}",
            f"tolerance: {self.tolerance:.17g}",
        ]
        if self.damping is not None:
            lines.append(f"damping: {self.damping:.17g}")
        if self.contraction is not None:
            lines.append(f"contraction_estimate: {self.contraction:.17g}")
        for k, v in self.monotonicity.items():
            lines.append(f"condition.{k}: {v if isinstance(v, str) else format(v, '.17g')}")
        if self.note:
            lines.append(f"note: {self.note}")
        return "\n".join(lines) + "\n"


def quasilinear_residual(m: MeasureWeights, a: EdgeNonlinearity, u: ScalarField, f: ScalarField):
    """Weak residual against each vertex indicator: <a(du), d1_x> + f(x) m(x)."""
    flux = divergence(m, a(derivation(u))).values
    return m.values * (f.values - flux)


def solve_quasilinear(
    m: MeasureWeights,
    a: EdgeNonlinearity,
    f: ScalarField,
    tol: float = 1e-10,
    *,
    u0: ScalarField | None = None,
    damping: float | None = None,
    max_iter: int = 20000,
) -> tuple[ScalarField, SolveDiagnostics]:
    """Weak solution of d* a(du) = f, normalized to m-mean zero."""
    graph = m.graph
    graph.check_same(f.graph)
    w = _reference(m)
    mass = float(np.sum(w * f.values))
    if abs(mass) > 1e-10 * max(1.0, float(np.sum(w * np.abs(f.values)))):
        raise PreconditionError(
            f"source must integrate to zero against m (got {mass:.3e}); "
            "the weak equation tested with constants forces it"
        )
    if a.c3 <= 0:
        raise PreconditionError("nonlinearity must be strictly monotone (c3 > 0)")
    solve = mean_zero_solver(m)
    tau = a.default_damping if damping is None else float(damping)
    u = np.zeros(graph.n_vertices) if u0 is None else np.array(u0.values, dtype=float)
    u = u - (w @ u) / w.sum()
    L = graph.laplacian
    history = []
    merit_prev = np.inf
    converged = False
    it = 0
    for it in range(max_iter + 1):
        R = quasilinear_residual(m, a, ScalarField(graph, u), f)
        res = float(np.abs(R).max())
        history.append(res)
        if res <= tol:
            converged = True
            break
        if it == max_iter:
            break
        # delta = A^-1 (d*a(du) - f), i.e. L delta = -m (d*a(du) - f) = R
        delta = solve(R)
        merit = float(np.sqrt(max(delta @ (L @ delta), 0.0)))
        if merit > 1.5 * merit_prev:
            tau *= 0.5
        merit_prev = merit
        u = u - tau * delta
    u = u - (w @ u) / w.sum()
    diag = SolveDiagnostics(
        iterations=it,
        residual=history[-1],
        converged=converged,
        tolerance=tol,
        monotonicity=a.report(),
        damping=tau,
        contraction=float(np.sqrt(max(0.0, 1 - 2 * tau * a.c3 + tau**2 * a.c0**2))),
        history=history,
        note="" if converged else f"no convergence in {max_iter} iterations",
    )
    return ScalarField(graph, u), diag


@dataclass(frozen=True)
class DriftCoefficient:
    """b(v)(x) = beta(x) + <w_x, psi(v)_x>, a fiberwise pairing with a fixed form w.

    ``psi`` is an optional edgewise map with Lipschitz constant ``lipschitz``
    and ``psi(0) = 0`` (identity by default, giving an affine b).
    """

    w: OneForm
    beta: ScalarField | None = None
    psi: Callable[[np.ndarray], np.ndarray] | None = None
    lipschitz: float = 1.0

    def __call__(self, m: MeasureWeights, v: OneForm) -> np.ndarray:
        vals = v.values if self.psi is None else self.psi(v.values)
        out = np.real(fiber_pairing(m, self.w, OneForm(v.graph, vals)))
        if self.beta is not None:
            out = out + self.beta.values
        return out

    def pairing_norm(self, m: MeasureWeights) -> float:
        """Operator norm of v -> <w_x, v_x> from the form space to L2(m)."""
        graph = m.graph
        w = _reference(m)
        c = graph.conductance
        P = (graph.abs_incidence.T.multiply((c * self.w.values)[None, :])).toarray() / (2 * w[:, None])
        scaled = np.sqrt(w)[:, None] * P / np.sqrt(c)[None, :]
        return float(np.linalg.norm(scaled, 2)) if scaled.size else 0.0

    def growth_constant(self, m: MeasureWeights) -> float:
        """c5 with ||b(v)||_{L2(m)} <= c5 (1 + ||v||)."""
        K = self.pairing_norm(m) * self.lipschitz
        beta = 0.0 if self.beta is None else float(np.sqrt(np.sum(m.values * self.beta.values**2)))
        return max(K, beta, 1e-300)


def drift_residual(m: MeasureWeights, b: DriftCoefficient, rho: float, u: ScalarField) -> np.ndarray:
    """E(u, 1_x) + <b(du), 1_x>_m + rho <u, 1_x>_m for every vertex x."""
    graph = m.graph
    return graph.laplacian @ u.values + m.values * (b(m, derivation(u)) + rho * u.values)


def solve_drift(
    m: MeasureWeights,
    b: DriftCoefficient,
    rho: float,
    tol: float = 1e-10,
    *,
    u0: ScalarField | None = None,
    max_iter: int = 5000,
) -> tuple[ScalarField, SolveDiagnostics]:
    """Picard iteration (-A + rho) u_{k+1} = -b(du_k) for -A u + b(du) + rho u = 0."""
    if rho <= 0:
        raise PreconditionError("rho must be positive")
    graph = m.graph
    graph.check_same(b.w.graph)
    w = _reference(m)
    c5 = b.growth_constant(m)
    K = b.pairing_norm(m) * b.lipschitz
    # Lipschitz constant of the Picard map in the (L + rho M)-norm
    q = K / np.sqrt(rho)
    op = (graph.laplacian + sp.diags(rho * w)).tocsc()
    lu = spla.splu(op)
    u = np.zeros(graph.n_vertices) if u0 is None else np.array(u0.values, dtype=float)
    history = []
    converged = False
    res = np.inf
    it = 0
    for it in range(max_iter + 1):
        R = drift_residual(m, b, rho, ScalarField(graph, u))
        res = float(np.abs(R).max())
        if res <= tol:
            converged = True
            break
        if it == max_iter:
            break
        delta = lu.solve(R)  # u - u_next
        history.append(float(np.sqrt(max(delta @ (op @ delta), 0.0))))
        u = u - delta
    note = ""
    if not converged:
        note = f"no convergence; try rho > {K**2:.6g} (contraction estimate {q:.3g})"
    elif q >= 1:
        note = "converged although the contraction estimate is >= 1"
    diag = SolveDiagnostics(
        iterations=it,
        residual=res,
        converged=converged,
        tolerance=tol,
        monotonicity={"c5": c5, "pairing_norm": K, "rho": float(rho)},
        contraction=float(q),
        history=history,
        note=note,
    )
    return ScalarField(graph, u), diag


def perturbed_generator(m: MeasureWeights, b: OneForm) -> sp.csr_matrix:
    """Matrix of L^Q u = A u + <b_x, d_x u>."""
    graph = m.graph
    graph.check_same(b.graph)
    w = _reference(m)
    c = graph.conductance
    P = sp.diags(1.0 / (2 * w)) @ graph.abs_incidence.T @ sp.diags(c * b.values)
    return (generator_matrix(m) + P @ graph.incidence).tocsr()


def q_form(m: MeasureWeights, b: OneForm, f: ScalarField, g: ScalarField) -> float:
    """Q(f, g) = E(f, g) - sum_x m(x) g(x) <b_x, d_x f>."""
    pair = np.real(fiber_pairing(m, b, derivation(f)))
    return energy(f, g) - float(np.sum(m.values * g.values * pair))


@dataclass(frozen=True)
class PositivityReport:
    t: float
    positive: bool
    min_entry: float
    witness: tuple[int, int] | None
    metzler: bool
    metzler_witness: tuple[int, int] | None

    def to_text(self) -> str:
        return (
            f"t: {self.t:.17g}\npositive: {str(self.positive).lower()}\n"
            f"min_entry: {self.min_entry:.17g}\nwitness: {self.witness}\n"
            f"offdiagonal_nonnegative: {str(self.metzler).lower()}\n"
            f"offdiagonal_witness: {self.metzler_witness}\n"
        )


def semigroup_positivity(L, t: float, tol: float = 1e-12) -> PositivityReport:
    """Check entrywise positivity of exp(t L).

    If every off-diagonal entry of L is nonnegative, exp(tL) is positive for
    all t >= 0; for L^Q this means ``1 + b(x, y)/2 >= 0`` on every oriented
    edge.  The exponential itself is computed by scaling and squaring.
    """
    if t <= 0:
        raise PreconditionError("t must be positive")
    Ld = L.toarray() if sp.issparse(L) else np.asarray(L, dtype=float)
    off = Ld - np.diag(np.diag(Ld))
    k = np.unravel_index(np.argmin(off), off.shape)
    metzler = bool(off[k] >= -tol)
    S = la.expm(t * Ld)
    j = np.unravel_index(np.argmin(S), S.shape)
    positive = bool(S[j] >= -tol)
    return PositivityReport(
        t=float(t),
        positive=positive,
        min_entry=float(S[j]),
        witness=None if positive else (int(j[0]), int(j[1])),
        metzler=metzler,
        metzler_witness=None if metzler else (int(k[0]), int(k[1])),
    )
