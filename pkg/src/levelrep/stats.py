"""Spectral observables estimated from ensembles of unfolded windows.

Every estimator keeps integer counts until the final division.  The ``*Tally``
classes hold those counts, can be updated one batch of windows at a time and
merged by integer addition, so results do not depend on how an ensemble was
split between workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from ._validation import WindowError, check_1d, check_increasing, check_positive
from .spectra import UnfoldedWindow, WindowBatch


# -- result types ----------------------------------------------------------


@dataclass(frozen=True)
class SpacingHistogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    total_spacings: int

    def __post_init__(self):
        edges = check_increasing(self.bin_edges, "bin_edges")
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (edges.size - 1,):
            raise ValueError("need one count per bin")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        if self.total_spacings < counts.sum():
            raise ValueError("total_spacings is smaller than the binned count")
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "counts", counts)

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)

    @property
    def s_mid(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    @property
    def density(self) -> np.ndarray:
        return self.counts / (self.total_spacings * self.widths)

    @property
    def stderr(self) -> np.ndarray:
        """Binomial standard error of each bin's density."""
        n = self.total_spacings
        frac = self.counts / n
        return np.sqrt(frac * (1.0 - frac) / n) / self.widths

    @property
    def covered_mass(self) -> float:
        return float(self.counts.sum() / self.total_spacings)


@dataclass(frozen=True)
class VarianceCurve:
    L_grid: np.ndarray
    sigma2: np.ndarray
    stderr: np.ndarray
    member_count: int
    mean_count: np.ndarray | None = None


@dataclass(frozen=True)
class CorrelationEstimate:
    omega_grid: np.ndarray
    k_smooth: np.ndarray
    stderr: np.ndarray
    reference_levels: int = 0


# -- spacings --------------------------------------------------------------


def nearest_spacings(window: UnfoldedWindow) -> np.ndarray:
    """Gaps between consecutive in-window levels of one member."""
    if len(window) < 2:
        return np.empty(0)
    return np.diff(window.levels)


def batch_spacings(batch: WindowBatch) -> np.ndarray:
    """Nearest spacings of every member of a batch, pooled."""
    d = np.diff(batch.levels)
    if d.size == 0:
        return d
    keep = np.ones(d.size, dtype=bool)
    # gaps between the last level of one member and the first of the next
    bounds = batch.offsets[1:-1] - 1
    bounds = bounds[(bounds >= 0) & (bounds < d.size)]
    keep[bounds] = False
    return d[keep]


def _histogram_edges(bin_width, s_max):
    check_positive(bin_width, "bin_width")
    check_positive(s_max, "s_max")
    if s_max < bin_width:
        raise ValueError("s_max must be >= bin_width")
    nbins = int(round(s_max / bin_width))
    return bin_width * np.arange(nbins + 1)


def _bin_counts(spacings, edges):
    # bins are [edges[k], edges[k+1]); the rightmost edge is closed
    counts, _ = np.histogram(spacings, bins=edges)
    return counts.astype(np.int64)


def spacing_histogram(spacings, bin_width: float, s_max: float) -> SpacingHistogram:
    """Histogram estimate of the spacing density on ``[0, s_max]``."""
    spacings = check_1d(spacings, "spacings")
    if spacings.size == 0:
        raise ValueError("cannot normalize a histogram of zero spacings")
    edges = _histogram_edges(bin_width, s_max)
    return SpacingHistogram(edges, _bin_counts(spacings, edges), int(spacings.size))


def cumulative_P(spacings, s: float) -> float:
    """Unbinned estimate of ``(1/s) * integral_0^s p``: fraction of spacings <= s, over s."""
    check_positive(s, "s")
    spacings = check_1d(spacings, "spacings")
    if spacings.size == 0:
        raise ValueError("no spacings")
    return float(np.count_nonzero(spacings <= s) / spacings.size / s)


def cumulative_P_stderr(n_below: int, total: int, s: float) -> float:
    frac = n_below / total
    return math.sqrt(frac * (1.0 - frac) / total) / s


@dataclass
class SpacingTally:
    """Integer spacing counts: a histogram and the number of spacings <= each threshold."""

    bin_edges: np.ndarray
    thresholds: np.ndarray = field(default_factory=lambda: np.empty(0))
    counts: np.ndarray = None
    below: np.ndarray = None
    total: int = 0

    def __post_init__(self):
        self.bin_edges = check_increasing(self.bin_edges, "bin_edges")
        self.thresholds = check_1d(self.thresholds, "thresholds")
        if self.counts is None:
            self.counts = np.zeros(self.bin_edges.size - 1, dtype=np.int64)
        if self.below is None:
            self.below = np.zeros(self.thresholds.size, dtype=np.int64)

    @classmethod
    def regular(cls, bin_width, s_max, thresholds=()):
        return cls(_histogram_edges(bin_width, s_max), np.asarray(thresholds, dtype=float))

    def empty_like(self) -> "SpacingTally":
        return SpacingTally(self.bin_edges.copy(), self.thresholds.copy())

    def update(self, batch: WindowBatch) -> None:
        sp = batch_spacings(batch)
        self.update_spacings(sp)

    def update_spacings(self, sp) -> None:
        sp = np.asarray(sp, dtype=float)
        self.counts += _bin_counts(sp, self.bin_edges)
        for i, s in enumerate(self.thresholds):
            self.below[i] += np.count_nonzero(sp <= s)
        self.total += int(sp.size)

    def merge(self, other: "SpacingTally") -> None:
        if not (np.array_equal(self.bin_edges, other.bin_edges) and np.array_equal(self.thresholds, other.thresholds)):
            raise ValueError("tallies have different bins")
        self.counts += other.counts
        self.below += other.below
        self.total += other.total

    def histogram(self) -> SpacingHistogram:
        if self.total == 0:
            raise ValueError("cannot normalize a histogram of zero spacings")
        return SpacingHistogram(self.bin_edges, self.counts.copy(), self.total)

    def cumulative_P(self, s: float) -> tuple[float, float]:
        """``(P(s), stderr)`` for one of the configured thresholds."""
        idx = np.flatnonzero(self.thresholds == s)
        if idx.size == 0:
            raise KeyError(f"threshold {s} was not tallied")
        if self.total == 0:
            raise ValueError("no spacings")
        n = int(self.below[idx[0]])
        return n / self.total / s, cumulative_P_stderr(n, self.total, s)


# -- level number variance -------------------------------------------------


@numba.njit(cache=True, nogil=True)
def _interval_counts(levels, offsets, center, halves):
    nm = offsets.size - 1
    out = np.zeros((nm, halves.size), dtype=np.int64)
    for k in range(nm):
        seg = levels[offsets[k]:offsets[k + 1]]
        for j in range(halves.size):
            a = np.searchsorted(seg, center - halves[j], side="left")
            b = np.searchsorted(seg, center + halves[j], side="right")
            out[k, j] = b - a
    return out


@dataclass
class VarianceTally:
    """Sums of per-member interval counts and their squares."""

    L_grid: np.ndarray
    s1: np.ndarray = None
    s2: np.ndarray = None
    members: int = 0

    def __post_init__(self):
        self.L_grid = check_1d(self.L_grid, "L_grid", allow_empty=False)
        if np.any(self.L_grid <= 0):
            raise ValueError("interval widths must be positive")
        if self.s1 is None:
            self.s1 = np.zeros(self.L_grid.size, dtype=np.int64)
            self.s2 = np.zeros(self.L_grid.size, dtype=np.int64)

    def empty_like(self) -> "VarianceTally":
        return VarianceTally(self.L_grid.copy())

    def update(self, batch: WindowBatch) -> None:
        if np.max(self.L_grid) > 2 * batch.half_width * (1 + 1e-12):
            raise WindowError("interval width L exceeds the window width")
        counts = _interval_counts(batch.levels, batch.offsets, batch.center, 0.5 * self.L_grid)
        self.s1 += counts.sum(axis=0)
        self.s2 += (counts * counts).sum(axis=0)
        self.members += counts.shape[0]

    def merge(self, other: "VarianceTally") -> None:
        if not np.array_equal(self.L_grid, other.L_grid):
            raise ValueError("tallies have different L grids")
        self.s1 += other.s1
        self.s2 += other.s2
        self.members += other.members

    def curve(self) -> VarianceCurve:
        n = self.members
        if n < 2:
            raise ValueError("need at least two members for a variance")
        # exact integers up to the last step: n*s2 - s1**2 via Python ints
        num = np.array([n * int(b) - int(a) * int(a) for a, b in zip(self.s1, self.s2)], dtype=float)
        sigma2 = num / (n * (n - 1))
        stderr = sigma2 * math.sqrt(2.0 / (n - 1))
        return VarianceCurve(self.L_grid.copy(), sigma2, stderr, n, self.s1 / n)


def number_variance(windows, L_grid) -> VarianceCurve:
    """Across-member variance of the number of levels in ``[center - L/2, center + L/2]``."""
    batch = windows if isinstance(windows, WindowBatch) else WindowBatch.from_windows(windows)
    if len(batch) < 2:
        raise ValueError("need at least two members")
    tally = VarianceTally(L_grid)
    tally.update(batch)
    return tally.curve()


# -- pair correlation --------------------------------------------------------


@numba.njit(cache=True, nogil=True)
def _pair_counts(levels, offsets, core_lo, core_hi, grid, half_bin, reach):
    counts = np.zeros(grid.size, dtype=np.int64)
    # a pair with both ends in the core is seen from both ends: it adds 2 to
    # the count and 4 to its variance; sq accumulates those variances
    sq = np.zeros(grid.size, dtype=np.int64)
    nref = 0
    for k in range(offsets.size - 1):
        a = offsets[k]
        b = offsets[k + 1]
        for i in range(a, b):
            x = levels[i]
            if x < core_lo or x > core_hi:
                continue
            nref += 1
            for direction in (1, -1):
                j = i + direction
                while a <= j < b:
                    d = abs(levels[j] - x)
                    if d >= reach:
                        break
                    w = 2 if core_lo <= levels[j] <= core_hi else 1
                    # grid points with omega - half_bin <= d < omega + half_bin
                    g0 = np.searchsorted(grid, d - half_bin, side="right")
                    g = g0
                    while g < grid.size and grid[g] <= d + half_bin:
                        if grid[g] - half_bin <= d < grid[g] + half_bin:
                            counts[g] += 1
                            sq[g] += w
                        g += 1
                    j += direction
    return counts, sq, nref


@dataclass
class KernelTally:
    """Pair counts per omega bin and the number of reference levels."""

    omega_grid: np.ndarray
    bin: float
    counts: np.ndarray = None
    count_var: np.ndarray = None
    n_ref: int = 0

    def __post_init__(self):
        self.omega_grid = check_increasing(self.omega_grid, "omega_grid")
        self.bin = check_positive(self.bin, "bin")
        if np.any(self.omega_grid <= 0):
            raise ValueError("omega grid must be positive")
        if self.counts is None:
            self.counts = np.zeros(self.omega_grid.size, dtype=np.int64)
        if self.count_var is None:
            self.count_var = np.zeros(self.omega_grid.size, dtype=np.int64)

    @property
    def reach(self) -> float:
        return float(self.omega_grid[-1] + self.bin / 2)

    def empty_like(self) -> "KernelTally":
        return KernelTally(self.omega_grid.copy(), self.bin)

    def check_window(self, half_width: float) -> None:
        if self.omega_grid[-1] + self.bin > half_width * (1 + 1e-12):
            raise WindowError(
                f"omega grid reaches {self.omega_grid[-1] + self.bin}, beyond half the window ({half_width})"
            )

    def update(self, batch: WindowBatch) -> None:
        self.check_window(batch.half_width)
        reach = self.reach
        counts, sq, nref = _pair_counts(
            batch.levels, batch.offsets,
            batch.center - batch.half_width + reach, batch.center + batch.half_width - reach,
            self.omega_grid, self.bin / 2, reach,
        )
        self.counts += counts
        self.count_var += sq
        self.n_ref += int(nref)

    def merge(self, other: "KernelTally") -> None:
        if not (np.array_equal(self.omega_grid, other.omega_grid) and self.bin == other.bin):
            raise ValueError("tallies have different grids")
        self.counts += other.counts
        self.count_var += other.count_var
        self.n_ref += other.n_ref

    def estimate(self) -> CorrelationEstimate:
        if self.n_ref == 0:
            raise ValueError("no reference levels in the window core")
        norm = self.n_ref * 2.0 * self.bin
        r2 = self.counts / norm
        # pairs treated as Poisson counts, double-counted pairs weighted accordingly
        return CorrelationEstimate(self.omega_grid.copy(), 1.0 - r2, np.sqrt(self.count_var) / norm, self.n_ref)


def empirical_kernel(windows, omega_grid, bin: float) -> CorrelationEstimate:
    """Estimate of the smooth kernel ``1 - R2(omega)`` from level pairs ``i != j``.

    Reference levels are restricted to the window core so that every partner
    within reach of a reference level is itself inside the window.
    """
    batch = windows if isinstance(windows, WindowBatch) else WindowBatch.from_windows(windows)
    tally = KernelTally(omega_grid, bin)
    tally.update(batch)
    return tally.estimate()
