"""Level-set based geometry cleaning and body-fitted particle generation."""

from .builtin import BUILTIN_NAMES, builtin_geometry
from .cleaner import (
    CleanReport,
    classify_cells,
    clean,
    corner_phi,
    find_non_resolved,
    redistance,
)
from .confinement import compute_completion, heaviside, probe_completion
from .geometry import SURFACE_FORMATS, SurfaceGeometry, load_surface, surface_from_loops
from .levelset import (
    CORE,
    FAR_NEGATIVE,
    FAR_POSITIVE,
    INNER,
    DataPackage,
    LevelSetField,
    build_field,
    probe_normal,
    probe_phi,
    reinitialize,
)
from .pipeline import PipelineConfig, run_clean_only, run_pipeline
from .relaxation import (
    DiagnosticsSeries,
    ParticleSet,
    RelaxConfig,
    WendlandC2,
    compute_forces,
    lattice_seed,
    neighbor_counts,
    relax,
    step,
)

__version__ = "0.1.0"
