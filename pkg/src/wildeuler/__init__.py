"""Construction and weak-form verification workbench for compressible Euler
flows driven by multiplicative noise.

The pipeline: build divergence-free constant-kinetic-energy fields (exact
stripe fixtures or the staged wave generator), rescale time through the
random clock of a sampled Wiener path, scale into a candidate solution of
the stochastic system, then certify the weak identities, the energy and
entropy laws, prefix causality, and non-uniqueness at desk scale.
"""

__version__ = "0.1.0"

from .convex import (
    GeneratorCertificate,
    GeneratorParams,
    StageError,
    Subsolution,
    branch_family,
    branch_pair,
    generate_wild,
    init_subsolution,
    oscillatory_step,
)
from .domain import (
    Box,
    DomainSpec,
    GasData,
    InfeasibleEnergyError,
    energy_threshold,
    required_lambda,
    sample_gas_data,
    unit_square,
)
from .fields import (
    SpaceGrid,
    VelocityField,
    discrete_divergence,
    load_field,
    paste,
    save_field,
    shear_fixture,
)
from .paths import (
    GridMismatchError,
    RandomClock,
    SamplePath,
    TimeGrid,
    build_clock,
    check_product_rule,
    exp_path,
    ito_integral,
    quadratic_covariation,
    restrict,
    sample_wiener,
    sample_wiener_tail_swap,
    stratonovich_integral,
)
from .solution import (
    ClockOverrunError,
    EnergyLedger,
    EulerSolution,
    assemble,
    entropy,
    ledger,
    temperature,
)
from .verify import (
    ResidualReport,
    ToleranceModel,
    VerifierOptions,
    causality_check,
    nonuniqueness_certificate,
    residual_continuity,
    residual_energy,
    residual_entropy,
    residual_incompressible,
    residual_internal_energy,
    residual_momentum,
    run_equation_suite,
)
