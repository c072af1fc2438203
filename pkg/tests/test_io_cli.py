import subprocess
import sys
import textwrap

import numpy as np
import pytest

from fractalva import OneForm, ScalarField, build_level, gasket_spec, interval_spec, self_similar_measure
from fractalva import io
from fractalva.cli import main
from fractalva.errors import ConfigError


def write_config(tmp_path, body, name="run.toml"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(body), encoding="utf-8")
    return path


def run(tmp_path, args, body):
    cfg = write_config(tmp_path, body)
    out = tmp_path / "out"
    return main([*args, "--config", str(cfg), "--out", str(out)]), out


def test_roundtrip_field_form_measure(tmp_path, gasket2, rng):
    f = ScalarField.random(gasket2, rng)
    v = OneForm.random(gasket2, rng)
    m = self_similar_measure(gasket2)
    io.write_field(f, tmp_path / "f.csv")
    io.write_form(v, tmp_path / "v.csv")
    io.write_measure(m, tmp_path / "m.csv")
    np.testing.assert_array_equal(io.read_field(tmp_path / "f.csv", gasket2).values, f.values)
    np.testing.assert_array_equal(io.read_form(tmp_path / "v.csv", gasket2).values, v.values)
    np.testing.assert_array_equal(io.read_measure(tmp_path / "m.csv", gasket2).values, m.values)


def test_read_form_reversed_orientation(tmp_path, triangle):
    (tmp_path / "w.csv").write_text("src,dst,value\n1,0,2.5\n2,1,1\n", encoding="utf-8")
    w = io.read_form(tmp_path / "w.csv", triangle)
    assert w.oriented(0, 1) == -2.5 and w.oriented(1, 2) == -1.0 and w.oriented(0, 2) == 0.0


def test_bad_csv(tmp_path, triangle):
    (tmp_path / "f.csv").write_text("id,value\n0,1\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="header"):
        io.read_field(tmp_path / "f.csv", triangle)
    (tmp_path / "g.csv").write_text("vertex_id,value\n0,1\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="all 3"):
        io.read_field(tmp_path / "g.csv", triangle)


def test_graph_export(tmp_path, gasket2):
    io.write_graph(gasket2, tmp_path)
    edges = (tmp_path / "edges.csv").read_text().splitlines()
    verts = (tmp_path / "vertices.csv").read_text().splitlines()
    assert edges[0] == "src,dst,conductance" and len(edges) == 28
    assert verts[0] == "id,x,y,boundary_flag" and len(verts) == 16
    assert sum(int(r.split(",")[3]) for r in verts[1:]) == 3


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        io.load_config(tmp_path / "missing.toml")
    with pytest.raises(ConfigError, match="level"):
        io.load_config(write_config(tmp_path, 'fractal = "gasket"\nlevel = 9\n'))
    with pytest.raises(ConfigError, match="measure"):
        io.load_config(write_config(tmp_path, 'fractal = "gasket"\nlevel = 1\nmeasure = "lebesgue"\n'))
    with pytest.raises(ConfigError, match="positive"):
        io.load_config(write_config(tmp_path, 'fractal = "gasket"\nlevel = 1\n[tolerances]\nsolve = 0\n'))
    with pytest.raises(ConfigError, match="does not exist"):
        io.load_config(write_config(tmp_path, 'fractal = "gasket"\nlevel = 1\n[pde]\nsource = "nope.csv"\n'))


def test_custom_spec_config(tmp_path):
    cfg = io.load_config(
        write_config(
            tmp_path,
            """
            level = 2
            [fractal]
            name = "interval3"
            cell_count = 3
            boundary_size = 2
            vertex_identification = [[0, 2], [2, 3], [3, 1]]
            conductance_renormalization = 3
            measure_weights = ["1/3", "1/3", "1/3"]
            """,
        )
    )
    assert cfg.spec.cell_count == 3 and cfg.level == 2


def test_build_gasket(tmp_path, capsys):
    code, out = run(tmp_path, ["build"], 'fractal = "gasket"\nlevel = 2\n')
    assert code == 0
    summary = (out / "summary.txt").read_text()
    assert "vertices: 15" in summary and "edges: 27" in summary and "cycle_rank: 13" in summary
    assert (out / "edges.csv").exists() and (out / "measure.csv").exists()


def test_build_interval(tmp_path):
    code, out = run(tmp_path, ["build"], 'fractal = "interval"\nlevel = 3\nmeasure = "kusuoka"\n')
    assert code == 0
    assert "cycle_rank: 0" in (out / "summary.txt").read_text()


def test_missing_config_usage():
    proc = subprocess.run(
        [sys.executable, "-m", "fractalva.cli", "build"], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 2
    assert "usage" in proc.stderr


def test_missing_config_file(tmp_path):
    assert main(["build", "--config", str(tmp_path / "none.toml")]) == 2


def test_solve_neumann_interval(tmp_path):
    code, out = run(
        tmp_path,
        ["solve", "neumann"],
        """
        fractal = "interval"
        level = 3
        [neumann]
        boundary = "fractal"
        flux = [1.0, -1.0]
        """,
    )
    assert code == 0
    g = build_level(interval_spec(), 3)
    h = io.read_field(out / "h.csv", g)
    np.testing.assert_allclose(h.values, -g.coords[:, 0] + 0.5, atol=1e-13)
    assert (out / "velocity.csv").exists() and (out / "pressure.csv").exists()


def test_solve_quasilinear_precondition(tmp_path):
    code, _ = run(
        tmp_path,
        ["solve", "quasilinear"],
        """
        fractal = "gasket"
        level = 1
        [pde]
        source = 1.0
        """,
    )
    assert code == 2


def test_solve_quasilinear_random_source(tmp_path):
    code, out = run(
        tmp_path,
        ["solve", "quasilinear"],
        """
        fractal = "gasket"
        level = 2
        seed = 3
        [pde]
        source = { random = true }
        nonlinearity = { kind = "scaled_monotone", phi = "saturating" }
        """,
    )
    assert code == 0
    assert "converged: true" in (out / "diagnostics.txt").read_text()


def test_solve_quasilinear_nonconvergence_exit(tmp_path):
    code, _ = run(
        tmp_path,
        ["solve", "quasilinear"],
        """
        fractal = "gasket"
        level = 2
        [pde]
        source = { random = true }
        nonlinearity = { kind = "scaled_monotone", phi = "saturating" }
        max_iter = 1
        """,
    )
    assert code == 1


def test_solve_drift(tmp_path):
    code, out = run(
        tmp_path,
        ["solve", "drift"],
        """
        fractal = "gasket"
        level = 2
        [drift]
        rho = 50.0
        w = { random = true, scale = 0.3 }
        beta = 1.0
        """,
    )
    assert code == 0
    assert (out / "solution.csv").exists()


def test_ns_verify_exit_codes(tmp_path):
    code, out = run(tmp_path, ["solve", "ns-verify"], 'fractal = "gasket"\nlevel = 2\n[ns]\nform = "harmonic:3"\n')
    assert code == 0
    assert "is_weak_solution: true" in (out / "report.txt").read_text()
    code, _ = run(tmp_path, ["solve", "ns-verify"], 'fractal = "gasket"\nlevel = 2\n[ns]\nform = { random = true }\n')
    assert code == 3
    code, _ = run(tmp_path, ["solve", "ns-verify"], 'fractal = "interval"\nlevel = 2\n[ns]\nform = "harmonic:0"\n')
    assert code == 2


def spectrum_of(tmp_path, body):
    code, out = run(tmp_path, ["spectrum"], body)
    assert code == 0
    return io.read_spectrum(out / "spectrum.csv")


def test_spectrum_triangle(tmp_path):
    base = 'fractal = "gasket"\nlevel = 0\nmeasure = "uniform"\n[spectrum]\n'
    np.testing.assert_allclose(spectrum_of(tmp_path, base + 'operator = "dirac"\n'), [-3, -3, 0, 0, 3, 3], atol=1e-10)
    np.testing.assert_allclose(spectrum_of(tmp_path, base + 'operator = "generator"\n'), [0, 9, 9], atol=1e-10)


def test_spectrum_magnetic_gauge(tmp_path, rng):
    g = build_level(gasket_spec(), 2)
    io.write_form(OneForm.random(g, rng), tmp_path / "a.csv")
    io.write_field(ScalarField.random(g, rng), tmp_path / "lam.csv")
    body = """
    fractal = "gasket"
    level = 2
    [spectrum]
    operator = "magnetic"
    [magnetic]
    convention = "exponential"
    potential = "a.csv"
    """
    plain = spectrum_of(tmp_path, body)
    gauged = spectrum_of(tmp_path, body + 'gauge = "lam.csv"\n')
    np.testing.assert_allclose(gauged, plain, atol=1e-10)


def test_spectrum_unknown_operator(tmp_path):
    code, _ = run(tmp_path, ["spectrum"], 'fractal = "gasket"\nlevel = 1\n[spectrum]\noperator = "heat"\n')
    assert code == 2


def test_reproducible_outputs(tmp_path):
    body = """
    fractal = "gasket"
    level = 3
    seed = 11
    [pde]
    source = { random = true }
    nonlinearity = { kind = "scaled_monotone", phi = "saturating" }
    """
    cfg = write_config(tmp_path, body)
    outputs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["solve", "quasilinear", "-c", str(cfg), "-o", str(out)]) == 0
        outputs.append((out / "solution.csv").read_bytes())
    assert outputs[0] == outputs[1]
