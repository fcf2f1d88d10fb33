"""Maximum-entropy completion of partially specified stationary Markov chains."""
from .errors import (
    CompletionInvalidError,
    DegeneracyError,
    DegenerateSupportError,
    HypothesisError,
    IndeterminateError,
    InfeasibleOrDegenerateError,
    StructuralError,
)
from .model import (
    CompletedChain,
    DerivedQuantities,
    PartialChainSpec,
    StateSpace,
    ValidationReport,
    assemble,
    derive_quantities,
    validate_hypotheses,
)
from .maxent import (
    MaxentSolution,
    ParryMeasure,
    complete_bernoulli,
    complete_constrained,
    complete_parry,
    complete_uniform,
    constrained_chain,
    entropy_full,
    entropy_rate,
    maxent_product_form,
)
from .feasibility import FarkasCertificate, FeasibilityOutcome, build_system, solve_feasibility
from .labyrinths import block_entropies, complete_blocks, decompose
from .qsd import QsdReport, qsd_report_hidden, qsd_report_visible
from .reconstruction import (
    SpliceTrace,
    build_skeleton,
    compare_laws,
    simulate_direct,
    simulate_splice,
)
from .io import load_spec, spec_from_dict, spec_to_dict

__version__ = "0.1.0"
