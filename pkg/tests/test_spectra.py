from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from levelrep._validation import DegeneracyError
from levelrep.ensemble import EnsembleConfig
from levelrep.run import LevelCountTally, run_ensemble
from levelrep.spectra import (
    UnfoldedWindow,
    WindowBatch,
    generate_batch,
    kepler_raw_level,
    kepler_window,
    rectangle_raw_level,
    rectangle_window,
    unfold_kepler,
    unfold_rectangle,
    write_raw_dump,
)


# -- rectangle -------------------------------------------------------------


def test_ground_level_square():
    assert rectangle_raw_level(1, 1, 1.0) == pytest.approx(math.pi / 2, rel=1e-15)


def test_square_symmetry():
    a = rectangle_raw_level(2, 1, 1.0)
    b = rectangle_raw_level(1, 2, 1.0)
    assert a == b == pytest.approx(5 * math.pi / 4, rel=1e-15)


def test_quantum_numbers_checked():
    with pytest.raises(ValueError):
        rectangle_raw_level(0, 1, 1.0)


def test_level_count_matches_smooth_count():
    alpha = 1.1
    n = np.arange(1, 200)
    e = rectangle_raw_level(n[:, None], n[None, :], alpha)
    count = int(np.count_nonzero(e <= 1e4))
    smooth = unfold_rectangle(1e4, alpha)
    assert abs(count - smooth) / smooth < 0.015


def test_unfold_square_value():
    expected = 1e4 - 2 * math.sqrt(1e4 / math.pi) + 0.25
    assert expected == pytest.approx(9887.412, abs=1e-3)
    assert unfold_rectangle(1e4, 1.0) == pytest.approx(expected, rel=1e-15)


def test_unfold_at_zero():
    for alpha in (0.5, 1.0, 1.7):
        assert unfold_rectangle(0.0, alpha) == 0.25
        assert unfold_rectangle(1e-14, alpha) == pytest.approx(0.25, abs=1e-6)


@given(e1=st.floats(1.0, 1e7), de=st.floats(1e-6, 1e6), alpha=st.floats(0.5, 2.0))
def test_unfold_increasing(e1, de, alpha):
    e2 = e1 + max(de, 1e-9 * e1)
    assert unfold_rectangle(e2, alpha) > unfold_rectangle(e1, alpha)


def test_window_below_ground_state_is_empty():
    w = rectangle_window(1.3, 0.3, 0.02)
    assert len(w) == 0 and w.levels.size == 0


def _brute_rect(alpha, lo, hi):
    r = math.sqrt(alpha)
    cap = 1.05 * hi + 20 * math.sqrt(hi) + 10
    n = np.arange(1, int(math.sqrt(cap * 4 * r / math.pi)) + 2)
    m = np.arange(1, int(math.sqrt(cap * 4 / (r * math.pi))) + 2)
    x = unfold_rectangle(rectangle_raw_level(n[:, None], m[None, :], alpha).ravel(), alpha)
    return np.sort(x[(x >= lo) & (x <= hi)])


@given(alpha=st.floats(0.5, 2.0), energy=st.floats(20.0, 3000.0), frac=st.floats(0.001, 0.1))
def test_rectangle_window_equals_brute_force(alpha, energy, frac):
    width = frac * energy
    w = rectangle_window(alpha, energy, width, check_degeneracy=False)
    assert np.array_equal(w.levels, _brute_rect(alpha, energy - width / 2, energy + width / 2))


def test_exact_square_is_degenerate():
    with pytest.raises(DegeneracyError):
        rectangle_window(1.0, 1e4, 100.0)
    w = rectangle_window(1.0, 1e4, 100.0, check_degeneracy=False)
    assert w.ties() > 0


def test_generic_alpha_has_no_ties():
    w = rectangle_window(1.0 + math.sqrt(2) / 10, 1e4, 100.0)
    assert w.ties() == 0


def _mean_density(system, members=10_000):
    cfg = EnsembleConfig(system=system, energy=1e4, window_width=100.0, member_count=members, seed=2)
    count = LevelCountTally()
    run_ensemble(cfg, [count], threads=1)
    return count.density


def test_rectangle_mean_density_is_one():
    # measured 0.985 at this energy: orbits whose period is stationary in
    # alpha near the square survive the parametric average
    assert _mean_density("rect") == pytest.approx(1.0, abs=0.01)


def test_kepler_mean_density_is_one():
    assert _mean_density("kepler") == pytest.approx(1.0, abs=0.01)


# -- modified Kepler ---------------------------------------------------------


def test_kepler_levels():
    assert kepler_raw_level(0, 1, 3.7) == 1.0
    assert kepler_raw_level(1, 1, 0.5) == 3.0
    assert kepler_raw_level(3, 7, 5.0) == pytest.approx(6 * math.sqrt(10) + 49, rel=1e-15)
    assert kepler_raw_level(3, 7, 5.0) == pytest.approx(67.9737, abs=1e-4)


def test_kepler_quantum_numbers_checked():
    with pytest.raises(ValueError):
        kepler_raw_level(-1, 1, 1.0)
    with pytest.raises(ValueError):
        kepler_raw_level(0, 0, 1.0)


@given(E1=st.floats(1.01, 1e7), dE=st.floats(1e-6, 1e6), beta=st.floats(0.1, 20.0))
def test_kepler_unfold_increasing(E1, dE, beta):
    E2 = E1 + max(dE, 1e-9 * E1)
    assert unfold_kepler(E2, beta) > unfold_kepler(E1, beta)


def test_kepler_leading_term_dominates():
    E, beta = 1e4, 0.5
    lead = E**1.5 / (3 * math.sqrt(2 * beta))
    assert lead == pytest.approx(333333.3, abs=0.1)
    rest = unfold_kepler(E, beta) - lead
    # the next term is -E / (4 sqrt(2 beta)) = -2500 here, so the margin is ~130
    assert rest == pytest.approx(-E / 4 + math.sqrt(E) / 2 - 0.25)
    assert lead > 1e2 * abs(rest)


def test_kepler_smooth_count_tracks_exact_count():
    # exact staircase sum_l (floor((E - l^2) / b) + 1) against the smooth count
    beta = 5.3
    b = 2 * math.sqrt(2 * beta)
    for E in (2e3, 1e4, 5e4):
        l = np.arange(1, int(math.sqrt(E)) + 1)
        exact = np.sum(np.floor((E - l * l) / b) + 1)
        assert abs(exact - unfold_kepler(E, beta)) < 5 * E**0.25


def test_kepler_window_below_ground_is_empty():
    assert len(kepler_window(5.0, 0.3, 0.02)) == 0


def _brute_kepler(beta, lo, hi):
    sb = math.sqrt(2 * beta)
    cap = 1.2 * (3 * sb * max(hi, 1.0)) ** (2 / 3) + 10
    l = np.arange(1, int(math.sqrt(cap)) + 2)
    p = np.arange(0, int(cap / (2 * sb)) + 2)
    x = unfold_kepler(kepler_raw_level(p[:, None], l[None, :], beta).ravel(), beta)
    return np.sort(x[(x >= lo) & (x <= hi)])


@given(beta=st.floats(1.0, 10.0), energy=st.floats(50.0, 5000.0), frac=st.floats(0.001, 0.1))
def test_kepler_window_equals_brute_force(beta, energy, frac):
    width = frac * energy
    w = kepler_window(beta, energy, width, check_degeneracy=False)
    assert np.array_equal(w.levels, _brute_kepler(beta, energy - width / 2, energy + width / 2))


# -- containers ----------------------------------------------------------------


def test_window_invariants():
    with pytest.raises(ValueError):
        UnfoldedWindow(0, 10.0, 1.0, np.array([9.5, 9.2]))
    with pytest.raises(ValueError):
        UnfoldedWindow(0, 10.0, 1.0, np.array([9.5, 11.5]))
    w = UnfoldedWindow(0, 10.0, 1.0, np.array([9.0, 9.5, 11.0]))
    assert (w.lo, w.hi) == (9.0, 11.0)


def test_batch_round_trip():
    # rational alpha gives exact degeneracies, so keep the values generic
    alphas = [0.9 + math.pi / 100, 1.2 + math.e / 100, 1.5 + math.sqrt(3) / 100]
    batch = generate_batch("rect", alphas, 1e3, 20.0, [4, 5, 6])
    again = WindowBatch.from_windows(list(batch.windows()))
    assert np.array_equal(again.levels, batch.levels)
    assert np.array_equal(again.offsets, batch.offsets)
    assert [w.member_id for w in batch.windows()] == [4, 5, 6]


def test_raw_dump(tmp_path):
    batch = generate_batch("kepler", [4.2, 6.1], 1e3, 10.0)
    path = tmp_path / "levels.csv"
    write_raw_dump(path, [batch])
    lines = path.read_text().splitlines()
    assert lines[0] == "member_id,x"
    assert len(lines) == 1 + batch.levels.size
    ids, xs = zip(*(ln.split(",") for ln in lines[1:]))
    assert np.array_equal(np.array(xs, dtype=float), batch.levels)
    assert set(ids) == {"0", "1"}
