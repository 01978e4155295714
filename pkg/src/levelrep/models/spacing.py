"""Nearest-spacing laws built from a smooth kernel.

For a conditional density ``g = 1 - kernel`` the spacing density is
``p(s) = g(s) exp(-integral_0^s g)``.  With the step-form-factor kernel the
integral is ``s - Si(s t_min)/pi`` and everything has a closed form.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate

from .._validation import DomainError
from .kernels import AnsatzParams, ansatz_kernel
from .special import sine_integral

_G_CHECK_POINTS = 257


def poisson_spacing_pdf(s):
    s = np.asarray(s, dtype=float)
    out = np.exp(-s)
    return float(out) if out.ndim == 0 else out


def poisson_cumulative_P(s):
    """``(1 - exp(-s)) / s``."""
    s = np.asarray(s, dtype=float)
    out = -np.expm1(-s) / s
    return float(out) if out.ndim == 0 else out


def spacing_pdf_from_kernel(g, s: float, *, epsabs: float = 1e-9) -> float:
    """Evaluate ``g(s) exp(-integral_0^s g)`` with adaptive quadrature.

    ``g`` is a callable for ``1 - kernel``.  Raises DomainError if ``g`` is
    negative anywhere on ``[0, s]`` (checked on a fine grid and at the
    quadrature nodes' span).
    """
    s = float(s)
    if s < 0:
        raise ValueError("s must be >= 0")
    probe = np.linspace(0.0, s, _G_CHECK_POINTS)
    gv = np.asarray(g(probe), dtype=float)
    if np.any(gv < 0):
        raise DomainError("g = 1 - kernel is negative on [0, s]; repulsion strength is invalid")
    if s == 0:
        return float(gv[0])
    inner, _ = integrate.quad(lambda x: float(g(x)), 0.0, s, epsabs=epsabs, epsrel=1e-12, limit=200)
    return float(gv[-1] * math.exp(-inner))


def _check_s(s):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("s must be >= 0")
    return s


def ansatz_exponent(s, params: AnsatzParams):
    """``integral_0^s g = s - Si(s t_min) / pi``."""
    s = _check_s(s)
    return s - sine_integral(s * params.t_min) / math.pi


def ansatz_spacing_pdf(s, params: AnsatzParams):
    """``[1 - sin(s t_min)/(pi s)] exp(-s + Si(s t_min)/pi)``; ``1 - t_min/pi`` at zero."""
    s = _check_s(s)
    out = (1.0 - ansatz_kernel(s, params)) * np.exp(-ansatz_exponent(s, params))
    return float(out) if np.ndim(out) == 0 else out


def ansatz_cdf(s, params: AnsatzParams):
    s = _check_s(s)
    out = -np.expm1(-ansatz_exponent(s, params))
    return float(out) if np.ndim(out) == 0 else out


def ansatz_cumulative_P(s, params: AnsatzParams):
    """Exact mean of the spacing density over ``[0, s]``."""
    s = _check_s(s)
    if np.any(s == 0):
        raise ValueError("s must be > 0")
    out = ansatz_cdf(s, params) / s
    return float(out) if np.ndim(out) == 0 else out


def ansatz_cumulative_P_asymptote(s, params: AnsatzParams):
    """Small-``s`` form ``(1 - exp(-s))/s - t_min/pi``."""
    return poisson_cumulative_P(s) - params.t_min / math.pi


def sqrt_energy_coefficient() -> float:
    """Coefficient ``c`` in ``P(s) ~ P_poisson(s) - c / sqrt(energy)`` for the rectangle: ``2 sqrt(pi)``."""
    return 2.0 * math.sqrt(math.pi)


def ansatz_bin_average(edges, params: AnsatzParams) -> np.ndarray:
    """Mean of the spacing density over each bin ``[edges[k], edges[k+1]]``."""
    edges = np.asarray(edges, dtype=float)
    F = ansatz_cdf(edges, params)
    return np.diff(F) / np.diff(edges)


def poisson_bin_average(edges) -> np.ndarray:
    edges = np.asarray(edges, dtype=float)
    return -np.diff(np.exp(-edges)) / np.diff(edges)


def ansatz_inverse_cdf(u, params: AnsatzParams, *, tol: float = 1e-13, max_iter: int = 60):
    """Spacing ``s`` with ``F(s) = u``; vectorized Newton on ``s - Si(s t)/pi = -log(1 - u)``."""
    u = np.asarray(u, dtype=float)
    if np.any((u < 0) | (u >= 1)):
        raise ValueError("u must lie in [0, 1)")
    target = -np.log1p(-u)
    # the exponent is increasing with slope g in [1 - t/pi, 1 + 0.22 t/pi]
    s = target.copy()
    for _ in range(max_iter):
        f = ansatz_exponent(s, params) - target
        step = f / (1.0 - ansatz_kernel(s, params))
        s = np.maximum(s - step, 0.0)
        if np.all(np.abs(step) <= tol * np.maximum(1.0, s)):
            break
    return float(s) if s.ndim == 0 else s


def sample_ansatz_spacings(n: int, params: AnsatzParams, rng: np.random.Generator) -> np.ndarray:
    return ansatz_inverse_cdf(rng.random(n), params)
