import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rpusim.device import (
    DOWN,
    UP,
    DeviceParams,
    DevicePopulationConfig,
    apply_pulse,
    branch_steps_from_fg,
    expected_step,
    fg_decompose,
    sample_device,
    sample_devices,
)


def baseline_mean_device(w=0.0):
    return DeviceParams(0.001, 1.66, 1.66, 0.0, w)


class TestConfig:
    def test_defaults_are_baseline(self):
        cfg = DevicePopulationConfig()
        assert (cfg.dw_min0_mean, cfg.slope_p_mean, cfg.slope_n_mean) == (0.001, 1.66, 1.66)
        assert cfg.dw_min0_rel_std == 0.30
        assert cfg.slope_p_rel_std == cfg.slope_n_rel_std == 0.25
        assert cfg.cycle_noise_rel_std == 0.30
        assert cfg.symmetry_offset_std == 0.0

    @pytest.mark.parametrize("kwargs", [
        {"dw_min0_mean": 0.0},
        {"slope_p_mean": -0.1},
        {"dw_min0_rel_std": 1.0},
        {"cycle_noise_rel_std": -0.1},
        {"symmetry_offset_std": -1e-3},
    ])
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(ValueError):
            DevicePopulationConfig(**kwargs)

    def test_ideal_has_no_spread(self):
        cfg = DevicePopulationConfig.ideal()
        d = sample_devices(cfg, np.random.default_rng(0), (4, 4))
        assert np.all(d.dw_min0 == 0.001)
        assert np.all(np.isinf(d.w_hi)) and np.all(np.isinf(d.w_lo))


class TestSampling:
    def test_population_statistics(self):
        cfg = DevicePopulationConfig()
        d = sample_devices(cfg, np.random.default_rng(1), (200, 200))
        assert np.all(d.dw_min0 > 0) and np.all(d.slope_p > 0) and np.all(d.slope_n > 0)
        assert d.dw_min0.mean() == pytest.approx(0.001, rel=0.01)
        assert d.slope_p.mean() == pytest.approx(1.66, rel=0.01)
        assert d.slope_p.std() / d.slope_p.mean() == pytest.approx(0.25, rel=0.05)
        assert np.all(d.w_s == 0)

    def test_symmetry_offsets_drawn(self):
        cfg = DevicePopulationConfig(symmetry_offset_std=0.05)
        d = sample_devices(cfg, np.random.default_rng(2), (100, 100))
        assert d.w_s.std() == pytest.approx(0.05, rel=0.03)

    def test_same_seed_same_devices(self):
        cfg = DevicePopulationConfig()
        a = sample_devices(cfg, np.random.default_rng(5), (3, 3))
        b = sample_devices(cfg, np.random.default_rng(5), (3, 3))
        np.testing.assert_array_equal(a.dw_min0, b.dw_min0)
        np.testing.assert_array_equal(a.slope_n, b.slope_n)

    def test_initial_weight_clipped_into_bounds(self):
        d = sample_devices(DevicePopulationConfig(), np.random.default_rng(0), (10,), w0=5.0)
        np.testing.assert_array_equal(d.w, d.w_hi)

    def test_scalar_device(self):
        d = sample_device(DevicePopulationConfig(), np.random.default_rng(0))
        assert isinstance(d.w, float) and isinstance(d.dw_min0, float)


class TestSteps:
    def test_ideal_single_up_pulse(self):
        d = DeviceParams(0.001, 0.0, 0.0)
        assert apply_pulse(d, UP, np.random.default_rng(0), 0.0).w == pytest.approx(0.001)

    def test_step_at_symmetry_point_equals_dw0(self):
        d = baseline_mean_device()
        assert expected_step(d, UP) == pytest.approx(0.001)
        assert expected_step(d, DOWN) == pytest.approx(0.001)

    def test_hand_evaluated_branches(self):
        # independent evaluation of the linear step model at w = 0.3
        d = baseline_mean_device(0.3)
        assert expected_step(d, UP) == pytest.approx(0.001 * (1 - 1.66 * 0.3))
        assert expected_step(d, DOWN) == pytest.approx(0.001 * (1 + 1.66 * 0.3))

    def test_up_step_vanishes_at_upper_bound(self):
        d = baseline_mean_device()
        d.w = d.w_hi
        assert d.w_hi == pytest.approx(1 / 1.66)
        assert expected_step(d, UP) == pytest.approx(0.0, abs=1e-15)
        assert apply_pulse(d, UP, np.random.default_rng(0), 0.0).w == pytest.approx(d.w_hi)

    def test_unknown_direction(self):
        with pytest.raises(ValueError):
            expected_step(baseline_mean_device(), "sideways")

    def test_apply_pulse_returns_new_record(self):
        d = baseline_mean_device(0.1)
        out = apply_pulse(d, DOWN, np.random.default_rng(0), 0.3)
        assert d.w == 0.1 and out.w < 0.1

    def test_cycle_noise_mean_and_spread(self):
        d = DeviceParams(0.001, 0.0, 0.0)
        rng = np.random.default_rng(3)
        steps = np.array([apply_pulse(d, UP, rng, 0.3).w for _ in range(20000)])
        assert steps.mean() == pytest.approx(0.001, rel=0.01)
        assert steps.std() == pytest.approx(0.0003, rel=0.03)

    def test_fixed_point_of_alternating_pulses_is_symmetry_point(self):
        d = DeviceParams(0.001, 1.66, 1.66, 0.2, 0.5)
        rng = np.random.default_rng(0)
        for _ in range(3000):
            d = apply_pulse(apply_pulse(d, UP, rng, 0.0), DOWN, rng, 0.0)
        assert abs(d.w - 0.2) < 0.002


@settings(max_examples=200, deadline=None)
@given(
    w=st.floats(-0.6, 0.6),
    dw=st.floats(1e-4, 1e-2),
    sp=st.floats(0.0, 3.0),
    sn=st.floats(0.0, 3.0),
    noise=st.floats(0.0, 0.9),
    seed=st.integers(0, 2**31),
    direction=st.sampled_from([UP, DOWN]),
)
def test_pulse_stays_in_bounds(w, dw, sp, sn, noise, seed, direction):
    d = DeviceParams(dw, sp, sn, 0.0, 0.0)
    d.w = float(np.clip(w, d.w_lo, d.w_hi))
    out = apply_pulse(d, direction, np.random.default_rng(seed), noise)
    assert d.w_lo - 1e-15 <= out.w <= d.w_hi + 1e-15
    if direction == UP:
        assert out.w >= d.w
    else:
        assert out.w <= d.w


class TestFG:
    def test_baseline_device_values(self):
        # F = 1 everywhere; G grows linearly with w and restores towards the symmetry point
        d = baseline_mean_device()
        w = np.array([-0.4, 0.0, 0.2, 0.5])
        f, g = fg_decompose(d, w)
        np.testing.assert_allclose(f, 1.0)
        np.testing.assert_allclose(g, 1.66 * w)

    def test_ideal_device(self):
        f, g = fg_decompose(DeviceParams(0.001, 0.0, 0.0), np.linspace(-1, 1, 5))
        np.testing.assert_allclose(f, 1.0)
        np.testing.assert_allclose(g, 0.0)

    def test_reconstruction(self):
        rng = np.random.default_rng(0)
        d = sample_devices(DevicePopulationConfig(), rng, (50,))
        w = rng.uniform(d.w_lo, d.w_hi)
        f, g = fg_decompose(d, w)
        up, down = branch_steps_from_fg(f, g, d.dw_min0)
        np.testing.assert_allclose(up, expected_step(d, UP, w), rtol=1e-12)
        np.testing.assert_allclose(down, expected_step(d, DOWN, w), rtol=1e-12)
