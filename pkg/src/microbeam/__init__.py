"""Real-time haptic microbeam simulation.

A human drives loads into a virtual cantilever or microbridge through a
stylus-like interface; the engine solves the beam dynamics at a 1 kHz
physics rate, returns a scaled feedback force, and models permanent
stiction once the structure touches the substrate.
"""

from .errors import (
    ConvergenceError,
    DivergenceError,
    FullyConstrainedError,
    InvalidArgumentError,
    InvalidConfigError,
    MicrobeamError,
    ModelError,
    ProtocolError,
    RecordingError,
    SingularSystemError,
    UnsupportedOrderError,
)
from .model import (
    BeamConfig,
    BeamState,
    BoundaryCondition,
    CrossSection,
    DirectorFrame,
    MaterialProperties,
    ShapeFunctionBasis,
    SystemMatrices,
    assemble_mass,
    assemble_stiffness_geometric,
    assemble_stiffness_linear,
    assemble_system,
    axial_force,
    consistent_point_load,
    directors_from_state,
    interpolate_deflection,
    section_properties,
    shape_basis,
)
from .solver import (
    LoadSet,
    ModalBasis,
    PointLoad,
    ReducedModel,
    SolveOptions,
    TransientSolver,
    buckling_load,
    energy,
    modal_reduce,
    natural_frequencies,
    static_solve,
    step,
)
from .stiction import (
    GapProfile,
    NullSurfaceForce,
    StictionState,
    StictionStatus,
    SubstrateConfig,
    SurfaceForceModel,
    apply_stuck_constraints,
    evaluate_gaps,
    update_stiction,
)

__version__ = "0.1.0"
