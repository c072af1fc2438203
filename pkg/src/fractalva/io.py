"""CSV import/export and run-config loading.

All floats are written with 17 significant digits so that values round-trip
exactly.

File layouts::

    edges.csv      src,dst,conductance
    vertices.csv   id,x,y,boundary_flag
    field / measure CSV     vertex_id,value
    form CSV       src,dst,value          (canonical orientation src < dst)
    spectrum CSV   index,eigenvalue
"""
from __future__ import annotations

import csv
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .errors import ConfigError
from .fields import OneForm, ScalarField
from .graph import FractalSpec, LevelGraph, MeasureWeights, spec_from_mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "fmt",
    "write_graph",
    "write_field",
    "write_measure",
    "write_form",
    "write_spectrum",
    "read_field",
    "read_form",
    "read_measure",
    "read_spectrum",
    "RunConfig",
    "load_config",
]


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_rows(path: Path, header: Iterable[str], rows: Iterable[Iterable[Any]]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _read_rows(path: Path, header: tuple[str, ...]):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"missing file {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None or tuple(c.strip() for c in first) != header:
            raise ConfigError(f"{path}: expected header {','.join(header)}")
        return [row for row in reader if row]


def write_graph(graph: LevelGraph, directory: Path) -> tuple[Path, Path]:
    directory = Path(directory)
    edges = _write_rows(
        directory / "edges.csv",
        ("src", "dst", "conductance"),
        ((int(x), int(y), fmt(c)) for (x, y), c in zip(graph.edges, graph.conductance)),
    )
    boundary = set(graph.boundary)
    coords = graph.coords

    def vertex_row(v):
        if coords is None:
            return (v, "", "", int(v in boundary))
        return (v, fmt(coords[v, 0]), fmt(coords[v, 1]), int(v in boundary))

    vertices = _write_rows(
        directory / "vertices.csv",
        ("id", "x", "y", "boundary_flag"),
        (vertex_row(v) for v in range(graph.n_vertices)),
    )
    return edges, vertices


def write_field(f: ScalarField, path: Path) -> Path:
    return _write_rows(path, ("vertex_id", "value"), ((i, fmt(v)) for i, v in enumerate(np.real(f.values))))


def write_measure(m: MeasureWeights, path: Path) -> Path:
    return _write_rows(path, ("vertex_id", "value"), ((i, fmt(v)) for i, v in enumerate(m.values)))


def write_form(v: OneForm, path: Path) -> Path:
    rows = ((int(x), int(y), fmt(val)) for (x, y), val in zip(v.graph.edges, np.real(v.values)))
    return _write_rows(path, ("src", "dst", "value"), rows)


def write_spectrum(eigenvalues, path: Path) -> Path:
    return _write_rows(path, ("index", "eigenvalue"), ((i, fmt(v)) for i, v in enumerate(eigenvalues)))


def _vertex_values(path: Path, graph: LevelGraph) -> np.ndarray:
    out = np.zeros(graph.n_vertices)
    seen = set()
    for row in _read_rows(path, ("vertex_id", "value")):
        try:
            i, val = int(row[0]), float(row[1])
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"{path}: bad row {row}") from exc
        if not 0 <= i < graph.n_vertices:
            raise ConfigError(f"{path}: vertex {i} out of range")
        out[i] = val
        seen.add(i)
    if len(seen) != graph.n_vertices:
        raise ConfigError(f"{path}: expected values for all {graph.n_vertices} vertices")
    return out


def read_field(path: Path, graph: LevelGraph) -> ScalarField:
    return ScalarField(graph, _vertex_values(path, graph))


def read_measure(path: Path, graph: LevelGraph, signed: bool = False) -> MeasureWeights:
    return MeasureWeights(graph, _vertex_values(path, graph), signed=signed)


def read_form(path: Path, graph: LevelGraph) -> OneForm:
    """Read a form; rows may use either orientation, absent edges are zero."""
    values = {}
    for row in _read_rows(path, ("src", "dst", "value")):
        try:
            values[int(row[0]), int(row[1])] = float(row[2])
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"{path}: bad row {row}") from exc
    try:
        return OneForm.from_oriented(graph, values)
    except KeyError as exc:
        raise ConfigError(f"{path}: {exc.args[0]}") from exc


def read_spectrum(path: Path) -> np.ndarray:
    return np.array([float(r[1]) for r in _read_rows(path, ("index", "eigenvalue"))])


MEASURES = ("self_similar", "kusuoka", "uniform")
DEFAULT_TOLERANCES = {"solve": 1e-10, "verify": 1e-10}


@dataclass
class RunConfig:
    """Parsed run configuration (TOML)."""

    spec: FractalSpec
    level: int
    measure: str = "self_similar"
    output_dir: Path | None = None
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    seed: int = 0
    level_cap: int = 6
    sections: dict = field(default_factory=dict)
    base_dir: Path = Path(".")

    def section(self, name: str) -> dict:
        return dict(self.sections.get(name, {}))

    def path(self, value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


_TOP_KEYS = {"fractal", "level", "level_cap", "measure", "output_dir", "tolerances", "seed"}


def _referenced_files(node):
    if isinstance(node, dict):
        for v in node.values():
            yield from _referenced_files(v)
    elif isinstance(node, list):
        for v in node:
            yield from _referenced_files(v)
    elif isinstance(node, str) and node.endswith(".csv"):
        yield node


def load_config(path: Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if "fractal" not in data or "level" not in data:
        raise ConfigError(f"{path}: 'fractal' table and 'level' are required")
    fractal = data["fractal"]
    if isinstance(fractal, str):
        fractal = {"builtin": fractal}
    spec = spec_from_mapping(fractal)
    level, cap = int(data["level"]), int(data.get("level_cap", 6))
    if not 0 <= level <= cap:
        raise ConfigError(f"level {level} outside [0, {cap}]")
    measure = str(data.get("measure", "self_similar"))
    if measure not in MEASURES:
        raise ConfigError(f"measure must be one of {MEASURES}")
    tolerances = dict(DEFAULT_TOLERANCES)
    for k, v in data.get("tolerances", {}).items():
        if float(v) <= 0:
            raise ConfigError(f"tolerance {k} must be positive")
        tolerances[k] = float(v)
    cfg = RunConfig(
        spec=spec,
        level=level,
        measure=measure,
        output_dir=Path(data["output_dir"]) if "output_dir" in data else None,
        tolerances=tolerances,
        seed=int(data.get("seed", 0)),
        level_cap=cap,
        sections={k: v for k, v in data.items() if k not in _TOP_KEYS},
        base_dir=path.parent,
    )
    for ref in _referenced_files(cfg.sections):
        if not cfg.path(ref).is_file():
            raise ConfigError(f"referenced file {ref} does not exist")
    if cfg.output_dir is not None and not cfg.output_dir.is_absolute():
        cfg.output_dir = cfg.base_dir / cfg.output_dir
    return cfg
