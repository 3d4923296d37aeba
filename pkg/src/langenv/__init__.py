"""langenv: stiff second-order Langevin dynamics in random environments.

Simulation (inertial, overdamped and averaged systems), large-deviations
rate functions for Markov-switching environments, and a Monte Carlo harness
for rare-event epsilon-ladders and convergence studies.
"""

__version__ = "0.1.0"

from .coefficients import (CoefficientField, make_constant_field,
                           make_double_well_field, make_linear_field)
from .config import load_config, load_preset
from .environment import (Distribution, EnvState, FastDiffusion,
                          MarkovSwitching, StateDependentJump,
                          env_step_diffusion, env_step_jump, env_step_markov,
                          stationary_measure, trivial_environment)
from .grid import TimeGrid, make_grid
from .integrate import (Diagnostics, SchemeConfig, TrajectoryBundle,
                        compute_A_eps, compute_H_eps, compute_remainder,
                        representation_residual, simulate_second_order,
                        step_euler, step_exponential)
from .lab import (MCEstimate, PathEvent, RateLadder, estimate_event_probability,
                  h_eps_scaling_study, rate_ladder, sk_convergence_study,
                  tightness_diagnostics, wilson_interval)
from .model import ModelSpec, ValidatedModel, validate_model
from .overdamped import (Path, averaged_drift, simulate_overdamped, sk_distance,
                         solve_averaged_ode)
from .rates import (JumpControls, MinActionResult, RateModel, action,
                    gaussian_action, h_at, h_functional,
                    h_functional_expm_oracle, jump_cost_evaluate, lagrangian,
                    minimize_action)
from .streams import (IncrementTable, NoiseStream, sample_brownian_increments,
                      spawn_stream)
