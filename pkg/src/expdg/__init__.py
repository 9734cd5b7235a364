"""Matrix-free exponential time integration for nodal discontinuous Galerkin
discretizations of viscous Burgers and 2D compressible Euler."""
from .basis import (InvalidOrderError, NodalBasis, QuadratureRule, gauss_quadrature, l2_project,
                    lgl_basis, lgl_quadrature)
from .burgers import (BurgersConfig, BurgersDG, burgers_full_rhs, burgers_gradient,
                      burgers_operator, burgers_split_operator, energy_balance)
from .euler import (EulerConfig, EulerDG, InadmissibleStateError, euler_full_rhs,
                    euler_split_operator, isentropic_vortex, roe_average, roe_flux)
from .harness import (ConvergenceRow, ExperimentConfig, courant_numbers, generate_reference,
                      l2_error, observed_order, run_experiment)
from .integrators import (BlowUpError, IntegrationResult, KrylovSettings, ProblemBinding,
                          TimeLoopConfig, integrate, step_epi2, step_exp_euler, step_exprb32,
                          step_exprb42, step_rk)
from .mesh import (DIRICHLET_ZERO, PERIODIC, FieldState, Mesh, MeshError, build_interval_mesh,
                   build_quad_mesh, face_average, face_jump, min_node_spacing)
from .phi import (KrylovDivergenceError, KrylovStats, PhiCombinationProblem, expm, phi_combination,
                  phi_dense, phi_scalar)
from .split import SplitOperator

__version__ = "0.1.0"
