"""Recovering the repulsion parameters from measured statistics.

Two fits:

* ``fit_t_min``: weighted least squares between a spacing histogram and the
  bin averages of the step-ansatz spacing law, minimized over ``t_min`` by a
  grid scan followed by golden-section refinement.
* ``fit_sqrt_coefficient``: weighted linear least squares for ``c`` in
  ``P(s; energy) = P_poisson(s) - c / sqrt(energy)``.

Both are also exposed as scikit-learn estimators (``TminEstimator``,
``SqrtScalingRegressor``) so they can be cloned, grid-searched and pipelined.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_1d, check_increasing, check_int, check_positive
from .models.kernels import AnsatzParams
from .models.spacing import ansatz_bin_average, ansatz_spacing_pdf, poisson_cumulative_P
from .stats import SpacingHistogram, spacing_histogram

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class BracketWarning(UserWarning):
    """The best parameter sits on the edge of the search bracket."""


@dataclass(frozen=True)
class FitResult:
    parameter: float
    objective: float
    n_points: int
    parameter_stderr: float
    bracket: tuple[float, float] | None = None
    at_bracket_edge: bool = False

    def report(self, name: str = "parameter") -> str:
        lines = [
            f"{name} = {self.parameter:.10g}",
            f"{name}_stderr = {self.parameter_stderr:.6g}",
            f"objective = {self.objective:.10g}",
            f"n_points = {self.n_points}",
        ]
        if self.bracket is not None:
            lines.append(f"bracket = [{self.bracket[0]:.6g}, {self.bracket[1]:.6g}]")
            lines.append(f"at_bracket_edge = {str(self.at_bracket_edge).lower()}")
        return "\n".join(lines) + "\n"


def golden_section_minimize(f, a: float, b: float, tol: float = 1e-5, max_iter: int = 200):
    """Minimize a unimodal ``f`` on ``[a, b]``; returns ``(x, f(x))``."""
    if not a < b:
        raise ValueError("need a < b")
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def histogram_weights(stderr: np.ndarray, floor_quantile: float = 0.10) -> np.ndarray:
    """``1/stderr**2`` with stderr floored at its ``floor_quantile`` over nonzero bins."""
    stderr = np.asarray(stderr, dtype=float)
    positive = stderr[stderr > 0]
    if positive.size == 0:
        return np.ones_like(stderr)
    floor = np.quantile(positive, floor_quantile)
    return 1.0 / np.maximum(stderr, floor) ** 2


def t_min_objective(hist: SpacingHistogram, weights: np.ndarray | None = None):
    """Callable ``t_min -> weighted squared residual`` for ``hist``."""
    return _objective(hist.bin_edges, hist.density, hist.stderr, weights)


def _objective(edges, density, stderr, weights=None):
    if weights is None:
        weights = histogram_weights(stderr)
    edges = np.asarray(edges, dtype=float)
    density = np.asarray(density, dtype=float)

    def objective(t):
        model = ansatz_bin_average(edges, AnsatzParams(float(t)))
        return float(np.sum(weights * (density - model) ** 2))

    return objective


def fit_t_min(hist: SpacingHistogram, bracket=(0.0, 1.0), *, n_grid: int = 200, tol: float = 1e-5) -> FitResult:
    """Best-fit ``t_min`` of the step-ansatz spacing law for a histogram.

    Coarse scan on ``n_grid`` points, then golden-section refinement around the
    best grid point.  A minimum within one grid step of either bracket end is
    flagged with :class:`BracketWarning` and ``at_bracket_edge``.
    """
    if hist.total_spacings == 0 or hist.counts.sum() == 0:
        raise ValueError("empty histogram")
    return fit_t_min_binned(hist.bin_edges, hist.density, hist.stderr, bracket, n_grid=n_grid, tol=tol)


def fit_t_min_binned(edges, density, stderr, bracket=(0.0, 1.0), *, n_grid: int = 200, tol: float = 1e-5) -> FitResult:
    """Same as :func:`fit_t_min` for bare ``(edges, density, stderr)`` arrays."""
    lo, hi = map(float, bracket)
    if not (0 <= lo < hi < math.pi):
        raise ValueError("bracket must satisfy 0 <= lo < hi < pi")
    check_int(n_grid, "n_grid", minimum=3)
    edges = check_increasing(edges, "edges")
    density = check_1d(density, "density")
    stderr = check_1d(stderr, "stderr")
    if not (density.size == stderr.size == edges.size - 1):
        raise ValueError("need one density and stderr per bin")
    if not np.any(density > 0):
        raise ValueError("empty histogram")
    f = _objective(edges, density, stderr)
    grid = np.linspace(lo, hi, n_grid)
    vals = np.array([f(t) for t in grid])
    k = int(np.argmin(vals))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, n_grid - 1)]
    t, obj = golden_section_minimize(f, a, b, tol=tol)
    # the grid point may still win at a bracket end
    if vals[k] < obj:
        t, obj = float(grid[k]), float(vals[k])
    step = grid[1] - grid[0]
    edge = t - lo <= step or hi - t <= step
    if edge:
        warnings.warn(f"t_min={t:.6g} at the edge of the bracket [{lo}, {hi}]", BracketWarning, stacklevel=3)
    # chi-square style: objective rises by 1 at one stderr from the minimum
    h = max(1e-4, 10 * tol)
    tl, tr = max(t - h, 0.0), min(t + h, math.pi - 1e-9)
    curv = (f(tr) - 2 * f(t) + f(tl)) / (((tr - tl) / 2) ** 2)
    stderr_t = math.sqrt(2.0 / curv) if curv > 0 else float("inf")
    n_points = int(np.count_nonzero(density))
    return FitResult(float(t), float(obj), n_points, stderr_t, (lo, hi), bool(edge))


def fit_sqrt_coefficient(points, s: float) -> FitResult:
    """Weighted least squares for ``c`` in ``P(energy) = P_poisson(s) - c / sqrt(energy)``.

    ``points`` is a sequence of ``(energy, P_measured, stderr)``.  A zero
    stderr everywhere means unweighted.
    """
    check_positive(s, "s")
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError("points must be rows of (energy, P, stderr)")
    energy, P, err = pts.T
    if np.any(energy <= 0):
        raise ValueError("energies must be > 0")
    if np.unique(energy).size < 3:
        raise ValueError("need at least three distinct energies for the scaling fit")
    w = 1.0 / err**2 if np.all(err > 0) else np.ones_like(err)
    x = 1.0 / np.sqrt(energy)
    y = poisson_cumulative_P(s) - P
    sxx = float(np.sum(w * x * x))
    c = float(np.sum(w * x * y) / sxx)
    resid = y - c * x
    obj = float(np.sum(w * resid**2))
    return FitResult(c, obj, int(energy.size), 1.0 / math.sqrt(sxx))


# -- scikit-learn estimators ---------------------------------------------------


class TminEstimator(BaseEstimator):
    """Fit the step-ansatz ``t_min`` to pooled nearest spacings.

    ``fit(X)`` takes a 1-D array of spacings (or an ``(n, 1)`` column),
    histograms it and stores ``t_min_``, ``result_`` and ``histogram_``.
    ``predict(s)`` returns the fitted spacing density.
    """

    def __init__(self, bin_width=0.05, s_max=5.0, bracket=(0.0, 1.0), n_grid=200, tol=1e-5):
        self.bin_width = bin_width
        self.s_max = s_max
        self.bracket = bracket
        self.n_grid = n_grid
        self.tol = tol

    def fit(self, X, y=None):
        spacings = check_1d(np.ravel(np.asarray(X, dtype=float)), "X", allow_empty=False)
        return self.fit_histogram(spacing_histogram(spacings, self.bin_width, self.s_max))

    def fit_histogram(self, hist: SpacingHistogram):
        self.histogram_ = hist
        self.result_ = fit_t_min(hist, self.bracket, n_grid=self.n_grid, tol=self.tol)
        self.t_min_ = self.result_.parameter
        return self

    def predict(self, X):
        check_is_fitted(self, "t_min_")
        s = np.ravel(np.asarray(X, dtype=float))
        return ansatz_spacing_pdf(s, AnsatzParams(self.t_min_))

    def score(self, X, y=None):
        """Negative weighted squared residual of the histogram of ``X`` against the fit."""
        check_is_fitted(self, "t_min_")
        spacings = np.ravel(np.asarray(X, dtype=float))
        hist = spacing_histogram(spacings, self.bin_width, self.s_max)
        return -t_min_objective(hist)(self.t_min_)


class SqrtScalingRegressor(RegressorMixin, BaseEstimator):
    """``P(energy) = P_poisson(s) - coef_ / sqrt(energy)`` fitted by weighted least squares.

    ``X`` holds energies (shape ``(n,)`` or ``(n, 1)``), ``y`` the measured
    ``P(s)``; ``sample_weight`` plays the role of ``1/stderr**2``.
    """

    def __init__(self, s=0.05):
        self.s = s

    def fit(self, X, y, sample_weight=None):
        energy = np.ravel(np.asarray(X, dtype=float))
        y = np.ravel(np.asarray(y, dtype=float))
        if energy.shape != y.shape:
            raise ValueError("X and y have different lengths")
        if sample_weight is None:
            err = np.zeros_like(y)
        else:
            sw = np.ravel(np.asarray(sample_weight, dtype=float))
            if np.any(sw <= 0):
                raise ValueError("sample_weight must be > 0")
            err = 1.0 / np.sqrt(sw)
        self.result_ = fit_sqrt_coefficient(np.column_stack([energy, y, err]), self.s)
        self.coef_ = self.result_.parameter
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        energy = np.ravel(np.asarray(X, dtype=float))
        return poisson_cumulative_P(self.s) - self.coef_ / np.sqrt(energy)
