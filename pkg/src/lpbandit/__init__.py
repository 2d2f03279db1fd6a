"""LP relaxations, LP-based policies and simulation for restless bandits."""
from .model import (RBModel, ValidationReport, degenerate_example, identity_example,
                    random_model, screening_model, validate)
from .lp_core import LinearProgram, LPResult, Status, certificate, solve
from .relaxation import (Classification, FiniteLPSolution, InfiniteLPSolution, Partition,
                         classify, solve_finite, solve_finite_min, solve_infinite)
from .indices import IndexTable, finite_lp_indices, infinite_lp_indices, whittle_indices
from .policies import (OccupationVector, RoundingOutcome, lp_index_policy,
                       lp_priority_policy_infinite, lp_update_policy, priority_policy,
                       priority_rule, random_tie_policy, randomized_round,
                       water_filling_policy, water_filling_rule, whittle_policy)
from .simulate import (ValueEstimate, exact_oracle, lemma1_statistics, mean_field, phi,
                       simulate_policy, simulate_policy_infinite, ugap_check)
from .experiments import score

__version__ = "0.1.0"
