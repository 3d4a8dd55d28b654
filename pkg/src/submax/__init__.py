"""Decomposition-aware maximization of monotone submodular functions
under a cardinality constraint.

The pipeline splits f into g + h where h satisfies a discrete-concavity
exchange property, runs a discretized continuous greedy guided by the
multilinear extension of g and the concave closure of h, and rounds the
fractional result by randomized swaps.  The approximation guarantee
degrades with the decomposition curvature gamma_h instead of the total
curvature of f.
"""

from .setfn import (CapExceededError, CurvatureReport, GroundSet,
                    SetFunctionOracle, Violation, as_mask, brute_force_max,
                    iter_bits, mask_to_set, marginal, popcount,
                    subsets_of_size, total_curvature,
                    verify_monotone_submodular)
from .mconcave import (ExchangeViolation, ExplicitSetFunction, LaminarConcave,
                       MNatConcaveFn, MNatIntegrityError,
                       ModularPlusIndicator, PartitionMatroid, QuadraticMNat,
                       RankOracleMatroid, UniformMatroid, WeightedMatroidRank,
                       check_exchange_property, combo_greedy,
                       exchange_partner, find_hierarchy_violation,
                       fn_from_payload, greedy_max_card, matroid_from_payload,
                       matroid_rank, max_weight_independent,
                       verify_matroid_rank)
from .extensions import (ConvexCombination, EstimatorConfig,
                         MultilinearEvaluator, closure_special_modular_indicator,
                         combination_from_payload, concave_closure,
                         in_hypersimplex, multilinear_exact, multilinear_grad,
                         multilinear_sample)
from .simplex import SimplexResult, solve_equality_lp
from .decompose import (Decomposition, HessianBounds, LaminarQuadraticRep,
                        UltrametricFit, build_quadratic_decomposition,
                        complete_diagonal, discrete_hessian, h_curvature,
                        hessian_upper_bounds, identity_decomposition,
                        laminar_from_ultrametric, residual_oracle,
                        trivial_curvature_decomposition, ultrametric_fit,
                        verify_decomposition)
from .instances import (CoverageInstance, FacilityLocationInstance,
                        WRSInstance, coverage_decompose, coverage_function,
                        coverage_pair_counts, facility_function,
                        family_decomposition, fl_decompose, fl_to_wrs,
                        generate, instance_from_payload, instance_function,
                        instance_to_payload, load_instance, save_instance,
                        wrs_decompose, wrs_dominant_decompose, wrs_function)
from .optimizer import (DirectionResult, GuessGrid, SolverConfig,
                        TrajectoryWitness, continuous_greedy_run, guess_grid,
                        lazy_greedy_baseline, maximize, pareto_direction,
                        pareto_frontier, reduce_support, resolve_delta,
                        singleton_scale, swap_round)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
