"""Numerical laboratory for Chua's circuit with an op-amp realized diode."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .analysis import (
    ClassifyConfig,
    Inconclusive,
    LyapunovConfig,
    RegimeClass,
    SweepPoint,
    classify_regime,
    eigen_report,
    eigenvalues3,
    equilibria,
    jacobian,
    largest_lyapunov,
    sweep_bifurcation,
)
from .audio import AudioClip, DegenerateAudio, Modulation, read_wav, synthesize, write_wav
from .circuit import (
    CellParams,
    CircuitParams,
    DiodeModel,
    ModelError,
    State,
    build_diode,
    cell_current,
    diode_current,
    table_one,
    vector_field,
)
from .integrator import (
    Coupling,
    DivergenceError,
    Event,
    Schedule,
    SineR0,
    Trajectory,
    decimate,
    simulate,
    simulate_pair,
    step_rk4,
)
from .sync import (
    SyncConfig,
    mask_transmit,
    masking_correlation,
    recover_message,
    run_synchronization,
    sync_error_metrics,
)
