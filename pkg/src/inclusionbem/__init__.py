"""Boundary-element solver for a Laplace transmission problem with a small
nonlinear inclusion, and tools to study its behaviour as the inclusion shrinks."""

from .bvp import (HarmonicRep, hessian_u_o, solve_auxiliary_transmission, solve_interior_dirichlet,
                  solve_J, u_tilde)
from .errors import (AdmissibilityError, AssumptionError, ClearanceError, ConfigError, ExprDomainError,
                     ExprSyntaxError, InclusionError, InsufficientDataError, NewtonError, SolveError)
from .expr import ExprFn, eval_with_partials, f_tilde, find_zeta_i, parse_expr
from .geometry import (ScaledSurface, Surface, check_admissible, integrate, make_sphere, make_star,
                       scale_surface)
from .potential import (BoundaryField, OperatorMatrix, assemble_V, assemble_W, assemble_Wstar,
                        cross_double_layer, double_layer_eval, fundamental_solution,
                        grad_fundamental_solution, normal_derivative_coupling, single_layer_eval)
from .solution import (SolutionBundle, SweepResult, macro_expansion, micro_expansion, reconstruct,
                       rescaled_inner, sweep_and_fit)
from .system import (DensityQuadruple, MResidual, ProblemSpec, SolverOptions, assemble_M, continuation,
                     jacobian, jacobian_at_zero, newton_solve, solve_limiting)

__version__ = "0.1.0"
