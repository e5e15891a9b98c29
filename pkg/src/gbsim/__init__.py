"""Classical simulation toolkit for Gaussian boson sampling.

Fast loop-hafnian kernels (eigenvalue-trace, finite difference sieve,
collision and batching speedups), exact photon-number and threshold-click
probabilities, chain-rule and Metropolis-independence samplers, and the
validation statistics used to compare sample streams.
"""

__version__ = "0.1.0"

from .states import (  # noqa: F401
    ComplexStateRep,
    ExperimentConfig,
    GaussianState,
    WilliamsonDecomposition,
    apply_loss,
    build_experiment_state,
    build_reduced_matrix,
    haar_random_unitary,
    sample_pure_displacement,
    to_complex_rep,
    vacuum_state,
    williamson_decompose,
)
from .lhaf import (  # noqa: F401
    BatchedLhaf,
    PairMatching,
    f_coefficient,
    lhaf_bruteforce,
    lhaf_eigenvalue_trace,
    lhaf_fds,
    lhaf_repeated,
    matched_reps,
)
from .clicks import (  # noqa: F401
    ClickSample,
    click_position_probability,
    click_probability_exact,
    sample_position_given_count,
)
from .samplers import (  # noqa: F401
    ChainRuleSampler,
    IpsModel,
    MisSampler,
    chain_rule_sample_pnrd,
    chain_rule_sample_threshold,
    ips_probability,
    ips_sample,
    mis_chain_pnrd,
    mis_chain_threshold,
    thermal_sample,
)
from .validation import (  # noqa: F401
    DistributionTable,
    chog_ratio,
    exact_distribution,
    tvd,
    two_point_correlators,
)
