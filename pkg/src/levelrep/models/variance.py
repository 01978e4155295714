"""Level number variance from the kernels.

For a stationary two-point function ``K`` the variance of the number of
levels in an interval of width ``L`` is ``integral_{-L}^{L} (L - |w|) K(w) dw``.
The rectangle correlation function is a sum of cosines ``w_M cos(T_M w)``,
each contributing ``w_M * 2 (1 - cos(T_M L)) / T_M**2``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate

from .._validation import check_int, check_positive
from ..ensemble import ParamLaw, to_alpha
from .kernels import Truncated, gue_kernel
from .special import sine_integral


def ansatz_number_variance(L, t_min: float):
    """``L - (2/pi) [L Si(L t) - (1 - cos(L t)) / t]`` for the step form factor."""
    L = np.asarray(L, dtype=float)
    if t_min == 0:
        out = L.copy()
    else:
        x = L * t_min
        out = L - (2.0 / math.pi) * (L * sine_integral(x) - (1.0 - np.cos(x)) / t_min)
    return float(out) if out.ndim == 0 else out


def gue_number_variance(L):
    def one(Lv):
        val, _ = integrate.quad(lambda w: (Lv - w) * gue_kernel(w), 0.0, Lv, limit=400)
        return Lv - 2.0 * val

    L = np.asarray(L, dtype=float)
    out = np.array([one(v) for v in L.ravel()]).reshape(L.shape)
    return float(out) if out.ndim == 0 else out


def _lattice(energy, alpha, M_max):
    """Winding pairs inside the ellipse ``Q <= Q_cut`` that fits in ``[0, M_max]**2``."""
    sa = math.sqrt(alpha)
    q_cut = M_max * M_max * min(sa, 1.0 / sa)
    m = np.arange(M_max + 1, dtype=float)
    M1, M2 = np.meshgrid(m, m, indexing="ij")
    Q = M1 * M1 * sa + M2 * M2 / sa
    keep = (Q <= q_cut) & (Q > 0)
    M1, M2, Q = M1[keep], M2[keep], Q[keep]
    delta = np.where((M1 > 0) & (M2 > 0), 1.0, 0.25)
    w = 4.0 * delta / math.sqrt(math.pi**3 * energy) / np.sqrt(Q)
    T = np.sqrt(4.0 * math.pi * Q / energy)
    t0 = math.sqrt(4.0 * math.pi * q_cut / energy)
    return w, T, t0


def _continuum_tail(L, t0):
    # (1/pi) * integral_{t0}^inf 2 (1 - cos(L t)) / t**2 dt
    x = L * t0
    return (2.0 / math.pi) * ((1.0 - np.cos(x)) / t0 + L * (math.pi / 2 - sine_integral(x)))


def _staircase_excursion(w, T, t0):
    """Largest deviation of ``sum_{T_M <= t} w_M - t/pi`` from its value at ``t0``, over ``[t0/2, t0]``."""
    order = np.argsort(T, kind="stable")
    Ts, W = T[order], np.cumsum(w[order])
    R_end = W[-1] - t0 / math.pi
    sel = Ts >= t0 / 2
    if not sel.any():
        return abs(R_end)
    # check both sides of each jump
    after = W[sel] - Ts[sel] / math.pi
    before = after - w[order][sel]
    return float(max(np.max(np.abs(after - R_end)), np.max(np.abs(before - R_end))))


def rectangle_variance_analytic(L, energy: float, alpha: float, M_max: int) -> Truncated:
    """Number variance of the rectangle correlation sum for one aspect parameter.

    Windings inside the ellipse ``T_M <= t0`` (the largest that fits in the
    ``[0, M_max]**2`` box) are summed exactly; the remaining windings are
    replaced by their mean density ``1/pi`` per unit period, integrated in
    closed form.  ``tail_bound`` bounds the error of that replacement assuming
    the weight staircase stays within the excursion it shows on ``[t0/2, t0]``.
    ``L`` may be a scalar or an array; value and bound follow its shape.
    """
    check_positive(energy, "energy")
    check_positive(alpha, "alpha")
    check_int(M_max, "M_max", minimum=1)
    L = np.asarray(L, dtype=float)
    if np.any(L < 0):
        raise ValueError("L must be >= 0")
    w, T, t0 = _lattice(energy, alpha, M_max)
    flat = L.ravel()
    vals = np.empty(flat.size)
    for i, Lv in enumerate(flat):
        vals[i] = np.dot(w, 2.0 * (1.0 - np.cos(T * Lv)) / (T * T))
    vals += _continuum_tail(flat, t0)
    excursion = _staircase_excursion(w, T, t0) if w.size else 1.0
    bounds = excursion * (2.0 * flat / t0 + 4.0 / t0**2)
    bounds = np.where(flat == 0, 0.0, bounds)
    if L.ndim == 0:
        return Truncated(float(vals[0]), float(bounds[0]), int(w.size))
    return Truncated(vals.reshape(L.shape), bounds.reshape(L.shape), int(w.size))


def rectangle_variance_curve(L_grid, energy, alpha, *, rel_tol=1e-3, M_start=32, M_limit=8192) -> Truncated:
    """Adaptive version: doubles ``M_max`` until every bound is below ``rel_tol`` of its value."""
    L_grid = np.asarray(L_grid, dtype=float)
    M = M_start
    while True:
        res = rectangle_variance_analytic(L_grid, energy, alpha, M)
        ok = res.tail_bound <= rel_tol * np.abs(res.value)
        if np.all(ok | (L_grid == 0)) or M >= M_limit:
            return res
        M *= 2


def law_quadrature(law: ParamLaw, n_nodes: int = 48):
    """Nodes and weights averaging over the truncated normal law."""
    if law.spread == 0:
        return np.array([law.mean]), np.array([1.0])
    x, wq = np.polynomial.legendre.leggauss(n_nodes)
    a, b = law.lower_cut, law.upper_cut
    nodes = 0.5 * (b - a) * x + 0.5 * (b + a)
    dens = np.exp(-0.5 * ((nodes - law.mean) / law.sigma) ** 2)
    weights = wq * dens
    return nodes, weights / weights.sum()


def rectangle_variance_ensemble(L_grid, energy, law: ParamLaw, *, aspect="period", n_nodes=48,
                                rel_tol=1e-3) -> Truncated:
    """Parametric average of :func:`rectangle_variance_curve` over the aspect law."""
    nodes, weights = law_quadrature(law, n_nodes)
    alphas = to_alpha(nodes, aspect)
    L_grid = np.asarray(L_grid, dtype=float)
    total = np.zeros(L_grid.shape)
    bound = np.zeros(L_grid.shape)
    n_terms = 0
    for a, wt in zip(alphas, weights):
        res = rectangle_variance_curve(L_grid, energy, float(a), rel_tol=rel_tol)
        total += wt * res.value
        bound += wt * res.tail_bound
        n_terms = max(n_terms, res.n_terms)
    return Truncated(total, bound, n_terms)


def rectangle_kernel_integral(omega, energy: float, alpha: float, M_max: int) -> Truncated:
    """``integral_0^omega`` of the rectangle smooth kernel, for one aspect parameter.

    The smooth kernel is ``delta - K`` with ``K`` the cosine sum, so its
    integral from 0 is ``1/2 - sum_M w_M sin(T_M omega) / T_M``.  The sum is
    exact inside the same ellipse as :func:`rectangle_variance_analytic` and
    continued with density ``1/pi`` beyond ``t0``.  ``tail_bound`` is an
    estimate, ``excursion * (2/t0 + omega)``, from the staircase excursion.
    """
    check_positive(energy, "energy")
    check_positive(alpha, "alpha")
    check_int(M_max, "M_max", minimum=1)
    omega = float(omega)
    if omega < 0:
        raise ValueError("omega must be >= 0")
    w, T, t0 = _lattice(energy, alpha, M_max)
    if omega == 0:
        return Truncated(0.0, 0.0, int(w.size))
    head = float(np.sum(w * np.sin(T * omega) / T))
    tail = (math.pi / 2 - sine_integral(omega * t0)) / math.pi
    excursion = _staircase_excursion(w, T, t0) if w.size else 1.0
    return Truncated(0.5 - head - tail, excursion * (2.0 / t0 + omega), int(w.size))
