from .quadrature import integrate_box, box_grid
from .functionals import (functionals, functional_identities, FunctionalSnapshot, IdentityField,
                          PointwiseField, kinetic_decomposition, qm_rate_rows)
from .residual import pde_residual, ResidualReport, linear_forcing, zero_forcing
from .inequalities import (lemma51_check, lemma_constant, gaussian_mixture, singularity_criterion,
                           field_bounds, qm_integrand_residual, qm_quadratic_min,
                           qm_sign_rule_holds, n_gamma_lower_coeff, singularity_inputs)
