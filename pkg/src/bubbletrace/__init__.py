"""Numerical laboratory for 1-equivariant wave maps bubbling off prescribed radiation."""

from .core import (CutoffSpec, FieldState, RadialGrid, bogomolny_defect, energy, h_norm, lambda0_lambda_q,
                   lambda_q, lambda_q_l2_truncated, q_profile, z_profile)
from .radiation import (PhiTable, RadiationSpec, leading_order, linear_evolution, p_constant, p_constant_gamma,
                        p_constant_quadrature, phi_table)

__version__ = "0.1.0"
