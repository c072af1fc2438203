"""Vector analysis on graph approximations of finitely ramified fractals."""
from .errors import (
    ConfigError,
    FractalVAError,
    GraphMismatchError,
    PreconditionError,
    SolverError,
    SpecError,
    VerificationError,
)
from .graph import (
    FractalSpec,
    LevelGraph,
    MeasureWeights,
    build_level,
    cycle_rank,
    gasket_spec,
    interval_spec,
    self_similar_measure,
    uniform_measure,
)
from .fields import ComplexOneForm, ComplexScalarField, OneForm, ScalarField, circulation
from .energy import (
    dirichlet_solve,
    energy,
    energy_measure,
    extension_energy_factor,
    generator_apply,
    kusuoka_measure,
    poincare_constant,
    spectral_gap,
)
from .forms import (
    action_scalar,
    derivation,
    divergence,
    embed_simple_tensor,
    fiber_view,
    form_laplacian_apply,
    harmonic_basis,
    hodge_decompose,
    inner,
)

__version__ = "0.1.0"
