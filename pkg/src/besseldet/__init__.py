"""Fredholm determinants of the Bessel point process and the integrable structures around them."""

from .errors import (AccuracyError, DomainError, NumericError, SingularityError,
                     UnsupportedVariantError)
from .specfun import BesselOrder, bessel_j, bessel_j_deriv, gamma
from .weights import (Fermi, Step, Table, WeightSpec, Zero, eval_sigma, eval_sigma_deriv,
                      integrate_dsigma, riemann_liouville, sigma_from_v0)
from .kernel import (KernelFamily, bessel_kernel, bessel_kernel_conv, bessel_kernel_diag,
                     deformed_kernel_entry, positive_temperature_kernel)
from .fredholm import (DeterminantResult, Quadrature, VField, build_quadrature, fredholm_det,
                       fredholm_det_pt, series_oracle, v_field)
from .pde_verify import differentiated_residual, pde_residual, special_solution_v
from .sturm import (BvpSolution, solve_bvp_f, verify_f_t_equation, verify_idpv,
                    verify_integral_rep, verify_nonlocal)
from .painleve import PainleveSolution, coupled_log_det, solve_coupled, solve_tw, tw_log_det
from .boundary import boundary_limit, solve_boundary_value_problem

__version__ = "0.1.0"
