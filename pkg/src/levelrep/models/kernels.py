"""Smooth two-point kernels and repulsion scales.

All kernels are in units where the mean level spacing is one and hbar = 1.
The repulsion term of the two-point function is ``K(omega) = delta(omega) -
kernel(omega)``, and every kernel here integrates to one over the real line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .._validation import DomainError, check_int, check_positive


class Truncated(NamedTuple):
    """Partial sum of an infinite series with a bound on what was left out."""

    value: float
    tail_bound: float
    n_terms: int


@dataclass(frozen=True)
class AnsatzParams:
    """Step form factor switching on at ``t_min``, the shortest orbit period."""

    t_min: float

    def __post_init__(self):
        if not (np.isfinite(self.t_min) and 0 <= self.t_min < math.pi):
            raise DomainError(f"t_min must lie in [0, pi), got {self.t_min!r}")


def t_min_rectangle(energy: float) -> float:
    """Shortest orbit period of the unit-density rectangle, ``2 pi**1.5 / sqrt(energy)``."""
    check_positive(energy, "energy")
    return 2.0 * math.pi**1.5 / math.sqrt(energy)


def t_min_kepler(energy: float, beta: float) -> float:
    """Period read off the first (M_r = 1) sine of the Kepler kernel.

    This is ``pi / (3 energy sqrt(2 beta))**(1/3)``; it is a convenience
    derived from that kernel, not an independent result.
    """
    check_positive(energy, "energy")
    check_positive(beta, "beta")
    return math.pi / (3.0 * energy * math.sqrt(2.0 * beta)) ** (1.0 / 3.0)


def _sinc_over_pi(omega, scale):
    # sin(omega * scale) / (pi * omega), continuous at omega = 0
    omega = np.asarray(omega, dtype=float)
    return scale * np.sinc(omega * scale / math.pi) / math.pi


def ansatz_kernel(omega, params: AnsatzParams):
    """``sin(omega t_min) / (pi omega)``; equals ``t_min / pi`` at zero."""
    out = _sinc_over_pi(omega, params.t_min)
    return float(out) if out.ndim == 0 else out


def gue_kernel(omega):
    """``sin(omega)**2 / (pi omega**2)``; ``1/pi`` at zero."""
    omega = np.asarray(omega, dtype=float)
    out = np.sinc(omega / math.pi) ** 2 / math.pi
    return float(out) if out.ndim == 0 else out


def weight_delta_M(M1: int, M2: int) -> float:
    """Weight of the winding pair ``(M1, M2)`` in the rectangle kernel sum."""
    check_int(M1, "M1", minimum=0)
    check_int(M2, "M2", minimum=0)
    if M1 == 0 and M2 == 0:
        return 0.0
    if M1 == 0 or M2 == 0:
        return 0.25
    return 1.0


def _kepler_scale(energy, beta):
    return (2.0 * beta / (3.0 * energy)) ** (1.0 / 3.0)


def kepler_kernel_terms(omega, energy, beta, M_max):
    """Individual terms ``M_r = 1..M_max`` of the Kepler sum at scalar ``omega``."""
    check_positive(energy, "energy")
    check_positive(beta, "beta")
    check_int(M_max, "M_max", minimum=1)
    M = np.arange(1, M_max + 1, dtype=float)
    amp = 2.0 * math.sqrt(2.0 * beta) / (math.pi**2 * M**3)
    weight = np.floor(M / _kepler_scale(energy, beta)) + 0.25
    freq = math.pi / (3.0 * energy * math.sqrt(2.0 * beta)) ** (1.0 / 3.0)
    return weight * amp * np.sin(M * freq * float(omega))


def kepler_kernel(omega, energy, beta, M_max) -> Truncated:
    """Modified-Kepler correlation sum truncated after ``M_max`` radial windings.

    Evaluated exactly in the printed form, which is odd in ``omega``.  The tail
    bound uses ``floor(M/c) + 1/4 <= M/c + 1/4`` with ``|sin| <= 1`` and the
    integral bounds ``sum_{M>N} M**-2 <= 1/N``, ``sum_{M>N} M**-3 <= 1/(2 N**2)``.
    """
    terms = kepler_kernel_terms(omega, energy, beta, M_max)
    c = _kepler_scale(energy, beta)
    A = 2.0 * math.sqrt(2.0 * beta) / math.pi**2
    bound = A * (1.0 / (c * M_max) + 0.25 / (2.0 * M_max**2))
    return Truncated(float(terms.sum()), float(bound), int(M_max))


@dataclass(frozen=True)
class KernelModel:
    """A smooth kernel together with its parameters.

    ``kind`` is one of ``"ansatz"`` (params: AnsatzParams), ``"gue"`` (no
    params), ``"rectangle"`` (params: energy, alpha, M_max) or ``"kepler"``
    (params: energy, beta, M_max).  The rectangle sum is a sum of undamped
    cosines and has no pointwise value; only its integrated functionals are
    available (see :meth:`number_variance`).
    """

    kind: str
    params: object = None

    def __post_init__(self):
        if self.kind not in ("ansatz", "gue", "rectangle", "kepler"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "ansatz" and not isinstance(self.params, AnsatzParams):
            raise ValueError("ansatz kernel needs AnsatzParams")
        if self.kind in ("rectangle", "kepler"):
            p = dict(self.params or {})
            check_positive(p.get("energy", float("nan")), "energy")
            check_positive(p.get("alpha" if self.kind == "rectangle" else "beta", float("nan")),
                           "alpha" if self.kind == "rectangle" else "beta")
            check_int(p.get("M_max", 0), "M_max", minimum=1)
            object.__setattr__(self, "params", p)

    @classmethod
    def ansatz(cls, t_min: float) -> "KernelModel":
        return cls("ansatz", AnsatzParams(t_min))

    @classmethod
    def gue(cls) -> "KernelModel":
        return cls("gue")

    def __call__(self, omega):
        if self.kind == "ansatz":
            return ansatz_kernel(omega, self.params)
        if self.kind == "gue":
            return gue_kernel(omega)
        if self.kind == "kepler":
            p = self.params
            vals = [kepler_kernel(w, p["energy"], p["beta"], p["M_max"]).value for w in np.atleast_1d(omega)]
            return vals[0] if np.ndim(omega) == 0 else np.array(vals)
        raise NotImplementedError("the rectangle sum has no pointwise value; use number_variance")

    def g(self, x):
        """``1 - kernel(x)``: the conditional level density next to a level."""
        return 1.0 - self(x)

    def number_variance(self, L):
        from .variance import ansatz_number_variance, gue_number_variance, rectangle_variance_analytic

        if self.kind == "ansatz":
            return ansatz_number_variance(L, self.params.t_min)
        if self.kind == "gue":
            return gue_number_variance(L)
        if self.kind == "rectangle":
            p = self.params
            return rectangle_variance_analytic(L, p["energy"], p["alpha"], p["M_max"]).value
        raise NotImplementedError("no number variance for the Kepler sum")
