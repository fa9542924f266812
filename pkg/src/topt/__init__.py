"""Time-optimal control of linear evolution systems via value-function
root finding (outer damped Newton, inner accelerated conditional gradient)."""

from .cg import (
    CgOptions,
    DistanceSolution,
    cg_direction,
    cg_solve,
    duality_gap,
    exact_linesearch,
    ssn_combination,
)
from .errors import (
    AccelerationFailure,
    ConfigError,
    DegenerateTarget,
    NoConvergence,
    NonQualifiedStationarity,
    NoSignChange,
    SolverFailure,
    ToptError,
)
from .fem import HeatSystem, UniformMesh, heat_distributed_preset, heat_neumann_preset
from .grid import AdjointData, Control, StateTrajectory, TimeGrid
from .newton import (
    NewtonOptions,
    NewtonTrace,
    delta_eval,
    newton_solve,
    sample_value_function,
    structural_diagnostic,
)
from .ode import (
    PENDULUM_OPTIMAL_TIME,
    DenseLinearSystem,
    pendulum_exact_control,
    pendulum_exact_control_sampled,
    pendulum_preset,
)
from .simplex import SimplexProjection, project_simplex
from .system import (
    EvolutionSystem,
    adjoint_sensitivity,
    distance_value,
    hamiltonian_integral,
)

__version__ = "0.1.0"
