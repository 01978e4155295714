from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from levelrep._validation import ConfigurationError
from levelrep.ensemble import (
    EnsembleConfig,
    ParamLaw,
    config_from_mapping,
    default_law,
    load_config,
    parse_config_text,
    sample_parameter,
    sample_parameters,
    to_alpha,
)


def test_zero_spread_gives_mean_exactly():
    cfg = EnsembleConfig(member_count=257, param_law=ParamLaw(1.0, 0.0, 0.5, 2.0))
    vals = sample_parameters(cfg)
    assert vals.shape == (257,)
    assert np.all(vals == 1.0)


def test_same_index_same_value():
    law = default_law("rect")
    assert sample_parameter(7, 12345, law) == sample_parameter(7, 12345, law)


def test_large_sample_moments():
    cfg = EnsembleConfig(member_count=300_000, seed=11, param_law=ParamLaw(1.0, 0.2, 0.5, 2.0))
    vals = sample_parameters(cfg)
    assert abs(vals.mean() - 1.0) <= 0.005
    assert abs(vals.std() - 0.2) <= 0.005
    assert vals.min() >= 0.5 and vals.max() <= 2.0


def test_reproducible_across_runs():
    cfg = EnsembleConfig(member_count=2000, seed=3)
    a = sample_parameters(cfg)
    b = sample_parameters(EnsembleConfig.from_dict(cfg.to_dict()))
    assert a.tobytes() == b.tobytes()


@given(seed=st.integers(0, 2**64 - 1), n=st.integers(1, 60), data=st.data())
def test_sharding_matches_whole_sequence(seed, n, data):
    k = data.draw(st.integers(0, n))
    cfg = EnsembleConfig(member_count=n, seed=seed)
    whole = sample_parameters(cfg)
    parts = np.concatenate([sample_parameters(cfg, 0, k), sample_parameters(cfg, k, n)])
    assert whole.tobytes() == parts.tobytes()


@given(seed=st.integers(0, 2**64 - 1), i=st.integers(0, 10**9))
def test_samples_stay_inside_cuts(seed, i):
    law = ParamLaw(1.0, 0.5, 0.8, 1.3)
    v = sample_parameter(seed, i, law)
    assert 0.8 <= v <= 1.3


def test_pathological_cuts_raise():
    law = ParamLaw(0.0, 100.0, -1e-7, 1e-7)
    with pytest.raises(ConfigurationError):
        sample_parameter(0, 0, law)


def test_hwhm_width_kind():
    law = ParamLaw(1.0, 0.2, 0.5, 2.0, width_kind="hwhm")
    assert law.sigma == pytest.approx(0.2 / math.sqrt(2 * math.log(2)))
    assert law.sigma == pytest.approx(0.2 / 1.1774100225154747)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(energy=0.0),
        dict(energy=-1.0),
        dict(window_width=0.0),
        dict(energy=500.0, window_width=100.0),  # W > energy/10
        dict(member_count=0),
        dict(seed=-1),
        dict(seed=2**64),
        dict(system="circle"),
        dict(aspect="diagonal"),
    ],
)
def test_config_invariants(kwargs):
    with pytest.raises(ConfigurationError):
        EnsembleConfig(**kwargs)


@pytest.mark.parametrize(
    "law",
    [
        dict(mean=1.0, spread=0.2, lower_cut=1.0, upper_cut=2.0),
        dict(mean=1.0, spread=-0.1, lower_cut=0.5, upper_cut=2.0),
        dict(mean=1.0, spread=0.2, lower_cut=0.5, upper_cut=float("inf")),
    ],
)
def test_law_invariants(law):
    with pytest.raises(ConfigurationError):
        ParamLaw(**law)


def test_kepler_default_law():
    cfg = EnsembleConfig(system="kepler")
    assert cfg.param_law == ParamLaw(5.0, 0.5, 3.0, 8.0)


def test_side_aspect_squares():
    assert np.array_equal(to_alpha([1.1, 0.9], "side"), np.array([1.1, 0.9]) ** 2)
    assert np.array_equal(to_alpha([1.1], "period"), np.array([1.1]))


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(
        "# experiment\nsystem = rect\nenergy = 2500\nmembers = 1000\nseed = 9\n"
        "window = 50\nalpha_mean = 1.1\nalpha_spread = 0.1\n",
        encoding="utf-8",
    )
    cfg = load_config(path)
    assert (cfg.energy, cfg.member_count, cfg.seed, cfg.window_width) == (2500.0, 1000, 9, 50.0)
    assert cfg.param_law.mean == 1.1 and cfg.param_law.spread == 0.1
    assert cfg.param_law.lower_cut == 0.5
    over = config_from_mapping({"seed": 10, "spread": 0.0}, cfg)
    assert over.seed == 10 and over.param_law.spread == 0.0 and over.energy == 2500.0


def test_config_file_errors():
    with pytest.raises(ConfigurationError):
        parse_config_text("energy 100\n")
    with pytest.raises(ConfigurationError):
        parse_config_text("colour = blue\n")
