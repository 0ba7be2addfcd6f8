"""Reduced Ricci flow on twisted-periodic surface metrics over a circle.

The package simulates the flow of g = e^{2k}dx^2 + e^{2u}dy^2 with
twisted-periodic k (k(y+1) = k(y) + holonomy) and periodic u, together with
the Haar-weight machinery it couples to: the F-functional and its
monotonicity identity, the lambda eigenproblem, the backward conjugate heat
solve, maximum-principle envelopes, blowdown rescaling diagnostics, the
two-flow uniqueness energy, and steady-state classification.
"""

from .errors import (BlowUpError, ConfigError, DomainError, EigensolverError,
                     GridMismatchError, PositivityLossError, StabilityError,
                     StagnationError, TwistflowError, UnsupportedOrderError)
from .grid import (GridSpec, PeriodicField, TwistedField, constant, derivative,
                   eval_periodic, from_function, integrate, random_band_limited)
from .geometry import (GroupoidMetric, HaarWeight, ReducedTensor, cusp,
                       divergence_1form, flat_torus, grad_norm_sq, ibp_residual,
                       laplace_beltrami, mean_curvature_form, orbit_measure,
                       reference_haar, reparametrize, scalar_curvature,
                       soliton_residual, total_mass)
from .flow import (BlowdownSeries, FlowControls, FlowState, FlowTrajectory,
                   MonitorReport, backward_conjugate_solve,
                   blowdown_diagnostics, evolve, max_principle_monitor,
                   ricci_rhs, stability_limit, step, with_conjugate_haar)
from .functionals import (EnergyBreakdown, HarnackSeries, LambdaResult,
                          LambdaSeries, VariationSeries, f_functional,
                          f_variation_residual, harnack_residual,
                          lambda_functional, lambda_monotonicity,
                          uniqueness_energy)
from .analysis import (Infeasible, ShootingSolution, SteadyClassification,
                       SteadyKind, classify_steady, constant_curvature_shoot)
from .config import ScenarioConfig, from_dict, load_file, to_dict
from .presets import preset, preset_names
from .report import RunReport, SuiteResult, emit_report
from .suites import run_scenario

__version__ = "0.1.0"
