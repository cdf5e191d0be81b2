"""crmshadow: exact sample-cost analysis and simulation of fidelity estimation
with common randomized measurements (standard / thrifty / common-randomized
shadow estimation under Clifford, local-Clifford, and 4-design ensembles)."""

from ._errors import BudgetError, ConfigError, HypothesisError
from ._rng import rng_stream
from .channels import (
    NoiseModel,
    apply,
    collective_rotation,
    depolarizing,
    pauli_channel_char,
    pauli_channel_infidelity,
    sample_random_local_rotation,
    sample_random_pauli_channel,
    single_error_channel,
)
from .cliffords import (
    CliffordElement,
    enumerate_cliffords,
    num_cliffords,
    sample_local_clifford,
    sample_uniform_clifford,
)
from .cost import (
    COST_CONSTANT,
    HPFE_THEOREMS,
    PrecisionSpec,
    n_u_generic,
    n_u_hpfe,
    scaling_fit,
)
from .experiments import (
    COLUMNS,
    SCHEMA_VERSION,
    ExperimentSpec,
    FidelityEngine,
    ResultRow,
    RPolicy,
    list_figures,
    load_config,
    mc_validate,
    run_experiment,
    validate_config,
    write_results,
)
from .paulis import (
    CharFunction,
    CommutingPairSum,
    PauliOp,
    char_function,
    cross_char,
    pauli_spectrum,
    sre2_from_char,
)
from .shadows import (
    EstimatorConfig,
    crm_estimate,
    median_of_means,
    reconstruction_profile,
    run_protocol,
    simulate_round,
)
from .states import (
    QuantumState,
    deviation,
    infidelity,
    make_state,
    schatten_norms,
    sre2,
    sre2_snk,
)
from .variance import (
    VarianceReport,
    clifford_bound,
    four_design_depolarizing,
    four_design_orthogonal_flip,
    v_avg_2design_ensemble,
    v_clifford_pauli_observable,
    v_pauli_ensemble,
    v_pauli_ensemble_auto,
    v_pauli_pauli_observable,
    v_R,
    v_standard_3design,
    v_standard_3design_fidelity,
    v_star_4design,
    v_star_clifford,
    v_star_clifford_char,
    v_star_clifford_depolarizing,
    v_star_rho_4design,
)

__version__ = "0.1.0"
