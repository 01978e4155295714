"""Closed-form theory: kernels, spacing laws and number variance."""

from .kernels import (
    AnsatzParams,
    KernelModel,
    Truncated,
    ansatz_kernel,
    gue_kernel,
    kepler_kernel,
    kepler_kernel_terms,
    t_min_kepler,
    t_min_rectangle,
    weight_delta_M,
)
from .spacing import (
    ansatz_bin_average,
    ansatz_cdf,
    ansatz_cumulative_P,
    ansatz_cumulative_P_asymptote,
    ansatz_inverse_cdf,
    ansatz_spacing_pdf,
    poisson_bin_average,
    poisson_cumulative_P,
    poisson_spacing_pdf,
    sample_ansatz_spacings,
    spacing_pdf_from_kernel,
    sqrt_energy_coefficient,
)
from .special import sine_integral
from .variance import (
    ansatz_number_variance,
    gue_number_variance,
    law_quadrature,
    rectangle_kernel_integral,
    rectangle_variance_analytic,
    rectangle_variance_curve,
    rectangle_variance_ensemble,
)

__all__ = [name for name in dir() if not name.startswith("_")]
