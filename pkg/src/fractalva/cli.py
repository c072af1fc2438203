"""Command-line entry point.

Every run is driven by one TOML config file; the command line only selects
the command, the config path, the output directory and verbosity.

Exit codes: 0 success, 1 internal or solver error, 2 precondition/config
violation, 3 verification failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .energy import kusuoka_measure, spectral_gap, generator_spectrum
from .errors import ConfigError, FractalVAError, PreconditionError
from .fields import OneForm, ScalarField
from .forms import derivation, form_laplacian_spectrum, harmonic_basis
from .graph import build_level, cycle_rank, self_similar_measure, uniform_measure
from .hydro import (
    NeumannData,
    boundary_weak_residual,
    neumann_derivatives,
    ns_boundary_solution,
    solve_neumann,
    verify_weak_ns,
)
from .pde import DriftCoefficient, EdgeNonlinearity, solve_drift, solve_quasilinear
from .quantum import MagneticConfig, dirac_assemble, dirac_spectrum, gauge_transform, magnetic_spectrum

log = logging.getLogger("fractalva")

SOLVE_KINDS = ("quasilinear", "drift", "neumann", "ns-verify")
SPECTRUM_OPERATORS = ("generator", "form-laplacian", "magnetic", "dirac")


def _setup(cfg: io.RunConfig):
    graph = build_level(cfg.spec, cfg.level)
    if cfg.measure == "uniform":
        m = uniform_measure(graph)
    else:
        m = self_similar_measure(graph)
        if cfg.measure == "kusuoka":
            nu = kusuoka_measure(m)
            if nu.signed:
                raise PreconditionError("Kusuoka measure vanishes at some vertex; cannot use it as reference")
            m = nu
    log.info("built %r with %s measure", graph, cfg.measure)
    return graph, m


def _vertex_values(cfg, value, graph, rng, name):
    if isinstance(value, str):
        return io.read_field(cfg.path(value), graph).values
    if isinstance(value, (int, float)):
        return np.full(graph.n_vertices, float(value))
    if isinstance(value, list):
        if len(value) != graph.n_vertices:
            raise ConfigError(f"{name}: expected {graph.n_vertices} values, got {len(value)}")
        return np.asarray(value, dtype=float)
    if isinstance(value, dict) and value.get("random"):
        return float(value.get("scale", 1.0)) * rng.standard_normal(graph.n_vertices)
    raise ConfigError(f"{name}: expected a CSV path, a number, a list or {{random = true}}")


def _form_values(cfg, value, graph, m, rng, name):
    if isinstance(value, str) and value.startswith("harmonic:"):
        basis = harmonic_basis(m)
        k = int(value.split(":", 1)[1])
        if not 0 <= k < len(basis):
            raise ConfigError(f"{name}: harmonic basis has {len(basis)} elements, index {k} requested")
        return basis[k].values
    if isinstance(value, str):
        return io.read_form(cfg.path(value), graph).values
    if isinstance(value, (int, float)):
        return np.full(graph.n_edges, float(value))
    if isinstance(value, list):
        if len(value) != graph.n_edges:
            raise ConfigError(f"{name}: expected {graph.n_edges} values, got {len(value)}")
        return np.asarray(value, dtype=float)
    if isinstance(value, dict) and value.get("random"):
        return float(value.get("scale", 1.0)) * rng.standard_normal(graph.n_edges)
    raise ConfigError(f"{name}: expected 'harmonic:k', a CSV path, a number, a list or {{random = true}}")


def _require(section: dict, key: str, name: str):
    if key not in section:
        raise ConfigError(f"[{name}] needs '{key}'")
    return section[key]


def cmd_build(cfg: io.RunConfig, out: Path) -> int:
    graph, m = _setup(cfg)
    io.write_graph(graph, out)
    io.write_measure(m, out / "measure.csv")
    lines = [
        f"fractal: {cfg.spec.name}",
        f"level: {graph.level}",
        f"vertices: {graph.n_vertices}",
        f"edges: {graph.n_edges}",
        f"cycle_rank: {cycle_rank(graph)}",
        f"measure: {cfg.measure}",
        f"spectral_gap: {io.fmt(spectral_gap(m))}",
    ]
    text = "\n".join(lines) + "\n"
    (out / "summary.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def _solve_quasilinear(cfg, graph, m, out, rng) -> int:
    sec = cfg.section("pde")
    a = EdgeNonlinearity.from_mapping(sec.get("nonlinearity", {"kind": "identity"}))
    source = _require(sec, "source", "pde")
    f = _vertex_values(cfg, source, graph, rng, "pde.source")
    if isinstance(source, dict):
        # generated sources are drawn mean-zero; user data is checked, not projected
        f = f - (m.values @ f) / m.total
    u0 = None
    if "start" in sec:
        u0 = ScalarField(graph, _vertex_values(cfg, sec["start"], graph, rng, "pde.start"))
    u, diag = solve_quasilinear(
        m,
        a,
        ScalarField(graph, f),
        cfg.tolerances["solve"],
        u0=u0,
        damping=sec.get("damping"),
        max_iter=int(sec.get("max_iter", 20000)),
    )
    io.write_field(u, out / "solution.csv")
    (out / "diagnostics.txt").write_text(diag.to_text(), encoding="utf-8")
    sys.stdout.write(diag.to_text())
    return 0 if diag.converged else 1


def _solve_drift(cfg, graph, m, out, rng) -> int:
    sec = cfg.section("drift")
    rho = float(_require(sec, "rho", "drift"))
    w = OneForm(graph, _form_values(cfg, _require(sec, "w", "drift"), graph, m, rng, "drift.w"))
    beta = None
    if "beta" in sec:
        beta = ScalarField(graph, _vertex_values(cfg, sec["beta"], graph, rng, "drift.beta"))
    u, diag = solve_drift(
        m, DriftCoefficient(w, beta), rho, cfg.tolerances["solve"], max_iter=int(sec.get("max_iter", 5000))
    )
    io.write_field(u, out / "solution.csv")
    (out / "diagnostics.txt").write_text(diag.to_text(), encoding="utf-8")
    sys.stdout.write(diag.to_text())
    return 0 if diag.converged else 1


def _solve_neumann(cfg, graph, m, out, rng) -> int:
    sec = cfg.section("neumann")
    boundary = sec.get("boundary", "fractal")
    B = graph.boundary if boundary == "fractal" else tuple(int(p) for p in boundary)
    data = NeumannData(graph, B, tuple(_require(sec, "flux", "neumann")))
    tol = cfg.tolerances["solve"]
    h = solve_neumann(data, m, tol)
    u, p = ns_boundary_solution(m, data, tol)
    io.write_field(h, out / "h.csv")
    io.write_form(u, out / "velocity.csv")
    io.write_measure(p, out / "pressure.csv")
    flux_err = float(np.abs(neumann_derivatives(h, B) - np.array(data.flux)).max())
    text = (
        f"flux_residual: {io.fmt(flux_err)}\n"
        f"boundary_weak_residual: {io.fmt(boundary_weak_residual(data, u))}\n"
    )
    (out / "diagnostics.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def _solve_ns_verify(cfg, graph, m, out, rng) -> int:
    sec = cfg.section("ns")
    u0 = OneForm(graph, _form_values(cfg, _require(sec, "form", "ns"), graph, m, rng, "ns.form"))
    report = verify_weak_ns(m, u0, cfg.tolerances["verify"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(report.to_text(), encoding="utf-8")
    sys.stdout.write(report.to_text())
    return 0 if report.is_weak_solution else 3


_SOLVERS = {
    "quasilinear": _solve_quasilinear,
    "drift": _solve_drift,
    "neumann": _solve_neumann,
    "ns-verify": _solve_ns_verify,
}


def cmd_solve(cfg: io.RunConfig, out: Path, kind: str) -> int:
    graph, m = _setup(cfg)
    out.mkdir(parents=True, exist_ok=True)
    return _SOLVERS[kind](cfg, graph, m, out, cfg.rng())


def _magnetic_config(cfg, graph, m, rng) -> MagneticConfig:
    sec = cfg.section("magnetic")
    a = OneForm(graph, _form_values(cfg, sec.get("potential", 0.0), graph, m, rng, "magnetic.potential"))
    V = None
    if "V" in sec:
        V = ScalarField(graph, _vertex_values(cfg, sec["V"], graph, rng, "magnetic.V"))
    mc = MagneticConfig(a, V, str(sec.get("convention", "exponential")))
    if "gauge" in sec:
        lam = ScalarField(graph, _vertex_values(cfg, sec["gauge"], graph, rng, "magnetic.gauge"))
        mc = gauge_transform(mc, lam)
    return mc


def cmd_spectrum(cfg: io.RunConfig, out: Path) -> int:
    graph, m = _setup(cfg)
    sec = cfg.section("spectrum")
    op = sec.get("operator", "generator")
    if op == "generator":
        eig = generator_spectrum(m)
    elif op == "form-laplacian":
        eig = form_laplacian_spectrum(m)
    elif op == "magnetic":
        eig = magnetic_spectrum(_magnetic_config(cfg, graph, m, cfg.rng()), m)
    elif op == "dirac":
        eig = dirac_spectrum(dirac_assemble(m))
    else:
        raise ConfigError(f"[spectrum] operator must be one of {SPECTRUM_OPERATORS}")
    io.write_spectrum(eig, out / "spectrum.csv")
    sys.stdout.write(f"operator: {op}\ncount: {len(eig)}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fractalva", description="Vector analysis on graph approximations of fractals."
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", required=True, type=Path, help="TOML run config")
    common.add_argument("--out", "-o", type=Path, help="output directory (overrides output_dir)")
    common.add_argument("--verbose", "-v", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("build", parents=[common], help="export the level graph and a summary")
    solve = sub.add_parser("solve", parents=[common], help="run a solver")
    solve.add_argument("kind", choices=SOLVE_KINDS)
    sub.add_parser("spectrum", parents=[common], help="export an operator spectrum")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        cfg = io.load_config(args.config)
        out = args.out or cfg.output_dir or Path("out")
        if args.command == "build":
            return cmd_build(cfg, out)
        if args.command == "solve":
            return cmd_solve(cfg, out, args.kind)
        return cmd_spectrum(cfg, out)
    except FractalVAError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception:  # noqa: BLE001
        log.exception("internal error")
        return 1


if __name__ == "__main__":
    sys.exit(main())
