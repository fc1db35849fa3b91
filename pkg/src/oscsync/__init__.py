"""Dissipation-induced synchronization of quantum harmonic oscillators
coupled through lossy two-level systems: model building, master-equation
integration, mode-frame analysis and synchronization metrics.
"""

from .fock import (
    QOperator,
    SpaceLayout,
    annihilation,
    creation,
    displacement,
    embed,
    identity,
    number,
    oscillator,
    pauli,
    tls,
)
from .model import (
    LindbladGenerator,
    SystemSpec,
    build_chain_hamiltonian,
    build_hamiltonian,
    build_lindblad,
    build_rwa_hamiltonian,
)
from .slmp import (
    ConditionCheck,
    ModeDecomposition,
    SlmpReport,
    build_slmp_unitaries,
    check_conditions,
    mixing_angle,
    mode_decomposition,
    transform_params,
    verify_slmp_equivalence,
)
from .dynamics import (
    DensityState,
    PhysicalityError,
    SolverOptions,
    Trajectory,
    evolve,
    prepare_state,
    standard_observables,
)
from .metrics import (
    AgreementReport,
    AsymptoticPrediction,
    FitTolerances,
    SyncEstimate,
    analytic_asymptote,
    compare,
    expectation,
    fit_sync,
)
from .config import ScenarioConfig, parse_config, parse_config_file, serialize_config

__version__ = "0.1.0"
