"""Closed-form spectra of the two model systems, unfolded to unit mean spacing.

Rectangle (Dirichlet, area fixed)
    e(n, m) = (pi/4) * (n**2 / r + m**2 * r),   n, m >= 1,
where ``r = sqrt(alpha)`` is the side ratio.  ``alpha`` is the aspect
parameter in the convention of the orbit-period formula, where the periods
scale as ``sqrt(M1**2 * alpha**0.5 + M2**2 * alpha**-0.5)``.  The pi/4 scale
makes the Weyl area density exactly one.

Modified Kepler problem
    E(p, l) = 2 p sqrt(2 beta) + l**2,   p >= 0, l >= 1,
each (p, l) counted once.

Only levels whose unfolded position falls inside the observation window are
generated; the raw-energy bounds come from inverting the smooth counting
function, so the cost per member scales with the window, not the spectrum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from ._validation import DegeneracyError, check_int, check_positive

#: Two levels closer than this (in units of the mean spacing) are a degeneracy.
TIE_THRESHOLD = 1e-12

_QUARTER_PI = math.pi / 4
_KEPLER_OFFSET = -0.25


@dataclass(frozen=True)
class UnfoldedWindow:
    """Sorted unfolded levels of one member inside ``[center - half_width, center + half_width]``."""

    member_id: int
    center: float
    half_width: float
    levels: np.ndarray

    def __post_init__(self):
        levels = np.asarray(self.levels, dtype=float)
        object.__setattr__(self, "levels", levels)
        if levels.size and (
            levels[0] < self.center - self.half_width or levels[-1] > self.center + self.half_width
        ):
            raise ValueError("levels outside the window")
        if np.any(np.diff(levels) < 0):
            raise ValueError("levels must be sorted ascending")

    def __len__(self):
        return self.levels.size

    @property
    def lo(self) -> float:
        return self.center - self.half_width

    @property
    def hi(self) -> float:
        return self.center + self.half_width

    def ties(self, threshold: float = TIE_THRESHOLD) -> int:
        return int(np.count_nonzero(np.diff(self.levels) < threshold))


@dataclass
class WindowBatch:
    """Windows of several members stored as one flat array plus offsets.

    Levels of member ``k`` are ``levels[offsets[k]:offsets[k + 1]]``.
    """

    levels: np.ndarray
    offsets: np.ndarray
    member_ids: np.ndarray
    params: np.ndarray
    center: float
    half_width: float

    def __len__(self):
        return self.member_ids.size

    @property
    def counts(self) -> np.ndarray:
        return np.diff(self.offsets)

    def window(self, k: int) -> UnfoldedWindow:
        a, b = self.offsets[k], self.offsets[k + 1]
        return UnfoldedWindow(int(self.member_ids[k]), self.center, self.half_width, self.levels[a:b])

    def windows(self):
        for k in range(len(self)):
            yield self.window(k)

    def ties(self, threshold: float = TIE_THRESHOLD) -> int:
        return int(_count_ties(self.levels, self.offsets, threshold))

    @classmethod
    def from_windows(cls, windows) -> "WindowBatch":
        windows = list(windows)
        if not windows:
            raise ValueError("need at least one window")
        center, half = windows[0].center, windows[0].half_width
        for w in windows:
            if w.center != center or w.half_width != half:
                raise ValueError("all windows must share center and width")
        counts = np.array([len(w) for w in windows], dtype=np.int64)
        offsets = np.zeros(len(windows) + 1, dtype=np.int64)
        np.cumsum(counts, out=offsets[1:])
        levels = np.concatenate([w.levels for w in windows]) if counts.sum() else np.empty(0)
        ids = np.array([w.member_id for w in windows], dtype=np.int64)
        return cls(levels, offsets, ids, np.full(len(windows), np.nan), center, half)


@numba.njit(cache=True, nogil=True)
def _count_ties(levels, offsets, threshold):
    n = 0
    for k in range(offsets.size - 1):
        for i in range(offsets[k] + 1, offsets[k + 1]):
            if levels[i] - levels[i - 1] < threshold:
                n += 1
    return n


# -- rectangle -------------------------------------------------------------


def _side_ratio(alpha):
    return np.sqrt(alpha)


def rectangle_raw_level(n, m, alpha):
    """Level ``e(n, m)`` of the unit-density rectangle with aspect parameter ``alpha``."""
    n = np.asarray(n)
    m = np.asarray(m)
    if np.any(n < 1) or np.any(m < 1):
        raise ValueError("quantum numbers n, m must be >= 1")
    r = _side_ratio(alpha)
    # same operation order as the window enumeration, so results agree bit for bit
    out = (_QUARTER_PI / r) * (n * n) + (_QUARTER_PI * r) * (m * m)
    return float(out) if out.ndim == 0 else out


def _perimeter_coefficient(alpha):
    r = _side_ratio(alpha)
    return (np.sqrt(r) + 1.0 / np.sqrt(r)) / math.sqrt(math.pi)


def unfold_rectangle(e, alpha):
    """Smooth level count (Weyl area, perimeter and corner terms) at raw energy ``e``."""
    e = np.asarray(e, dtype=float)
    if np.any(e < 0):
        raise ValueError("energy must be >= 0")
    out = e - _perimeter_coefficient(alpha) * np.sqrt(e) + 0.25
    return float(out) if out.ndim == 0 else out


@numba.njit(cache=True, nogil=True)
def _rect_invert(x, c):
    # e - c sqrt(e) + 1/4 = x  ->  quadratic in sqrt(e); take the increasing branch
    disc = c * c - 4.0 * (0.25 - x)
    if disc < 0.0:
        return 0.0
    u = 0.5 * (c + math.sqrt(disc))
    return u * u


@numba.njit(cache=True, nogil=True)
def _grow(out):
    grown = np.empty(2 * out.size + 64)
    grown[: out.size] = out
    return grown


@numba.njit(cache=True, nogil=True)
def _rect_batch(ratios, lo, hi, guess):
    out = np.empty(max(guess, 64))
    offsets = np.zeros(ratios.size + 1, dtype=np.int64)
    k = 0
    for j in range(ratios.size):
        r = ratios[j]
        c = (math.sqrt(r) + 1.0 / math.sqrt(r)) / math.sqrt(math.pi)
        elo = _rect_invert(lo, c) if lo > 0.25 else 0.0
        ehi = _rect_invert(hi, c)
        qa = _QUARTER_PI / r
        qb = _QUARTER_PI * r
        start = k
        n = 1
        while qa * (n * n) + qb <= ehi * (1.0 + 1e-12) + 1e-9:
            base = qa * (n * n)
            # slack on both ends; membership is decided by the exact test on x below
            m2lo = (elo - base) / qb * (1.0 - 1e-12) - 1e-9
            m2hi = (ehi - base) / qb * (1.0 + 1e-12) + 1e-9
            mlo = int(math.sqrt(m2lo)) if m2lo > 1.0 else 1
            mhi = int(math.sqrt(m2hi)) + 1
            for m in range(mlo, mhi + 1):
                e = base + qb * (m * m)
                x = e - c * math.sqrt(e) + 0.25
                if x > hi:
                    break
                if x >= lo:
                    if k >= out.size:
                        out = _grow(out)
                    out[k] = x
                    k += 1
            n += 1
        out[start:k] = np.sort(out[start:k])
        offsets[j + 1] = k
    return out[:k].copy(), offsets


# -- modified Kepler ---------------------------------------------------------


def kepler_raw_level(p, l, beta):
    """Level ``2 p sqrt(2 beta) + l**2`` of the modified Kepler problem."""
    p = np.asarray(p)
    l = np.asarray(l)
    if np.any(p < 0) or np.any(l < 1):
        raise ValueError("need p >= 0 and l >= 1")
    check_positive(float(beta), "beta")
    out = 2.0 * p * math.sqrt(2.0 * beta) + l * l
    return float(out) if np.ndim(out) == 0 else out


def unfold_kepler(E, beta, offset: float = _KEPLER_OFFSET):
    """Smooth level count of the modified Kepler spectrum at raw energy ``E``.

    Euler-Maclaurin average of ``sum_l (floor((E - l**2) / b) + 1)`` with
    ``b = 2 sqrt(2 beta)``:

        N(E) = E**1.5 / (3 b') - E / (4 b') + sqrt(E) / 2 + offset,  b' = sqrt(2 beta)
    """
    E = np.asarray(E, dtype=float)
    if np.any(E <= 0):
        raise ValueError("energy must be > 0")
    sb = math.sqrt(2.0 * beta)
    rt = np.sqrt(E)
    out = E * rt / (3.0 * sb) - E / (4.0 * sb) + 0.5 * rt + offset
    return float(out) if out.ndim == 0 else out


@numba.njit(cache=True, nogil=True)
def _kepler_count(E, sb, offset):
    rt = math.sqrt(E)
    return E * rt / (3.0 * sb) - E / (4.0 * sb) + 0.5 * rt + offset


@numba.njit(cache=True, nogil=True)
def _kepler_invert(x, sb, offset):
    # smooth count is increasing for E > 1/4; Newton from the leading-order guess
    E = max((3.0 * sb * max(x, 1.0)) ** (2.0 / 3.0), 1.0)
    for _ in range(60):
        f = _kepler_count(E, sb, offset) - x
        df = math.sqrt(E) / (2.0 * sb) - 1.0 / (4.0 * sb) + 0.25 / math.sqrt(E)
        E_new = E - f / df
        if E_new < 0.25:
            E_new = 0.5 * (E + 0.25)
        if abs(E_new - E) <= 1e-13 * E:
            return E_new
        E = E_new
    return E


@numba.njit(cache=True, nogil=True)
def _kepler_batch(betas, lo, hi, offset, guess):
    out = np.empty(max(guess, 64))
    offsets = np.zeros(betas.size + 1, dtype=np.int64)
    k = 0
    for j in range(betas.size):
        sb = math.sqrt(2.0 * betas[j])
        b = 2.0 * sb
        Elo = _kepler_invert(lo, sb, offset) if lo > _kepler_count(1.0, sb, offset) else 1.0
        Ehi = _kepler_invert(hi, sb, offset)
        Elo = Elo * (1.0 - 1e-12)
        Ehi = Ehi * (1.0 + 1e-12)
        start = k
        l = 1
        while l * l <= Ehi:
            l2 = float(l * l)
            plo = max(int(math.floor((Elo - l2) / b)) - 1, 0)
            phi = int(math.floor((Ehi - l2) / b)) + 1
            for p in range(plo, phi + 1):
                x = _kepler_count(b * p + l2, sb, offset)
                if x > hi:
                    break
                if x >= lo:
                    if k >= out.size:
                        out = _grow(out)
                    out[k] = x
                    k += 1
            l += 1
        out[start:k] = np.sort(out[start:k])
        offsets[j + 1] = k
    return out[:k].copy(), offsets


# -- public window API -------------------------------------------------------


def _check_window(energy, window_width):
    check_positive(energy, "energy")
    check_positive(window_width, "window_width")
    return energy - window_width / 2, energy + window_width / 2


def _finish(batch: WindowBatch, check_degeneracy: bool) -> WindowBatch:
    if check_degeneracy:
        n = batch.ties()
        if n:
            raise DegeneracyError(
                f"{n} level pair(s) closer than {TIE_THRESHOLD}; "
                "the shape parameter is not generic"
            )
    return batch


def rectangle_batch(alphas, energy, window_width, member_ids=None, *, check_degeneracy=True) -> WindowBatch:
    """In-window unfolded rectangle levels for every ``alpha`` in ``alphas``."""
    alphas = np.ascontiguousarray(alphas, dtype=float)
    if np.any(alphas <= 0):
        raise ValueError("alpha must be > 0")
    lo, hi = _check_window(energy, window_width)
    guess = int(alphas.size * (1.1 * window_width + 16))
    levels, offsets = _rect_batch(_side_ratio(alphas), lo, hi, guess)
    ids = np.arange(alphas.size, dtype=np.int64) if member_ids is None else np.asarray(member_ids, dtype=np.int64)
    return _finish(WindowBatch(levels, offsets, ids, alphas, float(energy), window_width / 2), check_degeneracy)


def kepler_batch(betas, energy, window_width, member_ids=None, *, offset=_KEPLER_OFFSET,
                 check_degeneracy=True) -> WindowBatch:
    """In-window unfolded Kepler levels for every ``beta`` in ``betas``."""
    betas = np.ascontiguousarray(betas, dtype=float)
    if np.any(betas <= 0):
        raise ValueError("beta must be > 0")
    lo, hi = _check_window(energy, window_width)
    guess = int(betas.size * (1.1 * window_width + 16))
    levels, offsets = _kepler_batch(betas, lo, hi, offset, guess)
    ids = np.arange(betas.size, dtype=np.int64) if member_ids is None else np.asarray(member_ids, dtype=np.int64)
    return _finish(WindowBatch(levels, offsets, ids, betas, float(energy), window_width / 2), check_degeneracy)


def rectangle_window(alpha, energy, window_width, member_id=0, *, check_degeneracy=True) -> UnfoldedWindow:
    check_int(member_id, "member_id", minimum=0)
    return rectangle_batch([alpha], energy, window_width, [member_id], check_degeneracy=check_degeneracy).window(0)


def kepler_window(beta, energy, window_width, member_id=0, *, check_degeneracy=True) -> UnfoldedWindow:
    check_int(member_id, "member_id", minimum=0)
    return kepler_batch([beta], energy, window_width, [member_id], check_degeneracy=check_degeneracy).window(0)


def generate_batch(system, params, energy, window_width, member_ids=None, *, check_degeneracy=True) -> WindowBatch:
    if system == "rect":
        return rectangle_batch(params, energy, window_width, member_ids, check_degeneracy=check_degeneracy)
    if system == "kepler":
        return kepler_batch(params, energy, window_width, member_ids, check_degeneracy=check_degeneracy)
    raise ValueError(f"unknown system {system!r}")


def write_raw_rows(fh, batch: WindowBatch) -> None:
    """Append ``member_id,x`` rows for every level of ``batch`` to an open text file."""
    ids = np.repeat(batch.member_ids, batch.counts)
    fh.writelines(f"{i},{x:.17g}\n" for i, x in zip(ids.tolist(), batch.levels.tolist()))


def write_raw_dump(path, batches) -> None:
    """Write ``member_id,x`` rows for every level of every batch."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("member_id,x\n")
        for batch in batches:
            write_raw_rows(fh, batch)
