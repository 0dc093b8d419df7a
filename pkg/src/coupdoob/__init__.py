"""Coupling constructions and convergence checks for Markov chains on finite
and countable state spaces."""

from .analysis import (
    CouplingAnalysis,
    DoobVerdict,
    ExactModeError,
    RecurrenceReport,
    attempt_bound,
    evolve_all_pairs,
    evolve_coupled,
    recurrence_psi,
    verify_doob,
)
from .chain import (
    ChainError,
    ChainStructure,
    Dist,
    FiniteChain,
    check_equivalence,
    check_nonsingular,
    convergence_curve,
    invariant_measures,
    n_step,
    structure,
    total_variation,
)
from .countable import BirthDeathChain, CallbackChain, CountableChain
from .coupling import (
    AssumptionsFail,
    CouplingKernel,
    DoeblinSet,
    JointDist,
    SplittingParts,
    doeblin_set,
    hybrid_kernel,
    independent_kernel,
    maximal_coupling_row,
    maximal_kernel,
    select_doeblin,
    split,
)
from .gallery import build, parse_spec, random_chain
from .montecarlo import (
    AttemptStats,
    CountableCoupling,
    McEstimate,
    PathSample,
    attempt_statistics,
    estimate_hit_probability,
    estimate_uncoupled_tail,
    estimate_visit_probability,
    nonconvergence_lower_bound,
    sample_coupled,
    sample_path,
    simulate_coupled,
    simulate_paths,
)

__version__ = "0.1.0"
