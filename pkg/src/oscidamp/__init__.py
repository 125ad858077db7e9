"""Damping of inter-area oscillations with state-derivative feedback.

Small-signal multi-area models, FD / LQR / SDF controller design,
fixed-step closed-loop simulation and settling metrics.
"""

__version__ = "0.1.0"

from .control import (  # noqa: E402
    FrequencyDifferenceController,
    GainSet,
    LQRController,
    LqrWeights,
    SDFController,
    effective_sdf_gain,
    fd_gain,
    lqr_gain,
    sdf_from_sf,
    validate_assumptions,
)
from .model import (  # noqa: E402
    AreaParams,
    PowerSystem,
    StateSpace,
    TieNetwork,
    assemble_state_space,
    build_torque_matrix,
    check_regularity,
    ring_system,
    two_area_system,
)
from .sim import (  # noqa: E402
    BurstLoad,
    FaultPulse,
    NoDisturbance,
    NoiseSpec,
    Scenario,
    StepLoad,
    Trajectory,
    simulate_closed_loop,
)
from .metrics import compare, peak_deviation, transient_time  # noqa: E402

__all__ = [
    "FrequencyDifferenceController",
    "GainSet",
    "LQRController",
    "LqrWeights",
    "SDFController",
    "effective_sdf_gain",
    "fd_gain",
    "lqr_gain",
    "sdf_from_sf",
    "validate_assumptions",
    "AreaParams",
    "PowerSystem",
    "StateSpace",
    "TieNetwork",
    "assemble_state_space",
    "build_torque_matrix",
    "check_regularity",
    "ring_system",
    "two_area_system",
    "BurstLoad",
    "FaultPulse",
    "NoDisturbance",
    "NoiseSpec",
    "Scenario",
    "StepLoad",
    "Trajectory",
    "simulate_closed_loop",
    "compare",
    "peak_deviation",
    "transient_time",
]
