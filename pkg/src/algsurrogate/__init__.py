"""Sparse algebraic surrogate models from exact best-subset selection."""

from .basis import (BasisFunction, BasisSpec, DesignMatrix, LinearModel, expand, predict,
                    read_model, rich_basis, standard_basis_13, write_model)
from .conreg import (CertificationReport, ConstrainedSolution, ResponseConstraint, certify,
                     max_violation, sip_fit)
from .dataset import Dataset, Domain, read_csv, write_csv
from .errors import (ContractViolation, ConvergenceError, DegenerateRatesError, DomainError,
                     EmptyDatasetError, InfeasibleError, ParseError, SurrogateError)
from .evaluation import (EvaluationReport, ProfileCurve, error_factor, evaluate,
                         performance_profile)
from .kinetics import (ReactionProblem, as_black_box, generate_benchmark,
                       parallel_concentration, series_concentration)
from .regress import (FitnessMetric, FitResult, big_m, elastic_net_fit, lambda_max,
                      metric_value, ols_fit, sigma_hat_sq)
from .sampling import (BlackBoxSystem, EmsConfig, EmsTrace, dfo_maximize, ems_loop,
                       ems_objective, lhs_design)
from .subset import (SubsetSolution, best_subset_cardinality, best_subset_metric,
                     branch_and_bound, exhaustive_search)

__version__ = "0.1.0"
