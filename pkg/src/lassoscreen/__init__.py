"""Safe dictionary screening for lasso and nonnegative-lasso problems."""

from .core import (LASSO, NONNEG, Dictionary, Instance, Partition, Solution,
                   active_set, compute_lambda_max, dual_from_primal,
                   duality_gap, feasible_dual_point, make_instance,
                   primal_objective, recover_primal, rescale_instance,
                   subsample, upsample)
from .geometry import (Dome, EmptyRegionError, GeometryError, HalfSpace,
                       ImproperRegionError, NotRefinableError, Region2H,
                       Sphere, circumsphere_refine, dome_diameter, make_dome,
                       make_region2h, mu_dome, mu_region2h, mu_sphere)
from .screening import (ScreenReport, TestSpec, combine_disjunction,
                        default_dome, dome_test, halfspace_from_dual_solution,
                        heuristic_test, irdt_test, run_test,
                        select_default_sphere, select_halfspace_greedy,
                        sphere_test, tht_test)
from .sequential import (SequentialTrace, dass_solve, geometric_schedule,
                         next_lambda_feedback)
from .solver import (SafetyViolationError, SolverConfig, solve_lasso,
                     solve_screened, solve_with_partition)
from .bench import ExperimentConfig, generate_rand, run_experiment

__version__ = "0.1.0"
