import math

import numpy as np
import pytest

from sqzkit import physics
from sqzkit.errors import UnphysicalInputError


def test_peak_power_max_average_power():
    # 310 uW / 100 MHz = 3.1 pJ; 3.1 pJ / 10 ps = 0.31 W
    train = physics.PulseTrain(310e-6, 100e6, 10e-12, 1.0)
    assert physics.peak_power(train) == pytest.approx(0.31, abs=1e-9)


def test_peak_power_zero_input():
    train = physics.PulseTrain(0.0, 100e6, 10e-12, 1.0)
    assert physics.peak_power(train) == 0.0


def test_peak_power_direct_arithmetic():
    train = physics.PulseTrain(290e-6, 100e6, 10e-12, 1.0)
    assert physics.peak_power(train) == pytest.approx(0.29, abs=1e-9)


def test_peak_power_shape_factors():
    train = physics.PulseTrain(1e-4, 1e8, 1e-11, physics.SHAPE_FACTOR_SECH2)
    assert physics.peak_power(train) == pytest.approx(0.08813735870, rel=1e-9)
    assert physics.SHAPE_FACTOR_SECH2 == pytest.approx(0.8814, abs=5e-5)
    assert physics.SHAPE_FACTOR_GAUSSIAN == pytest.approx(0.9394, abs=5e-5)


@pytest.mark.parametrize("kwargs", [
    dict(avg_power_w=1e-4, rep_rate_hz=0.0, fwhm_s=1e-11),
    dict(avg_power_w=1e-4, rep_rate_hz=1e8, fwhm_s=0.0),
    dict(avg_power_w=1e-4, rep_rate_hz=1e8, fwhm_s=1e-11, shape_factor=1.3),
    dict(avg_power_w=-1e-4, rep_rate_hz=1e8, fwhm_s=1e-11),
])
def test_pulse_train_rejects_bad_fields(kwargs):
    with pytest.raises(ValueError):
        physics.PulseTrain(**kwargs)


def test_parametric_gain_zero_power_is_unity():
    for eta in (0.0, 0.5, 1.0):
        g = physics.parametric_gain(0.0, 0.7, eta)
        assert g.g_plus_db == 0.0 and g.g_minus_db == 0.0
        assert g.g_plus_lin == 1.0 and g.g_minus_lin == 1.0


def test_parametric_gain_at_reference_point():
    # exp(2*sqrt(0.28*0.29)) = 1.768144; 0.95*1.768144 + 0.05 = 1.729706
    g = physics.parametric_gain(0.29, 0.28, 0.95)
    assert g.g_plus_db == pytest.approx(2.3797, abs=5e-4)
    assert g.g_minus_db == pytest.approx(-2.3114, abs=5e-4)
    # dB <-> linear consistency is exact by construction
    assert g.g_plus_lin == pytest.approx(10 ** (g.g_plus_db / 10.0), rel=1e-12)
    assert g.g_minus_lin == pytest.approx(10 ** (g.g_minus_db / 10.0), rel=1e-12)


def test_parametric_gain_branch_ordering():
    rng = np.random.default_rng(1)
    for _ in range(200):
        g = physics.parametric_gain(rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1))
        assert g.g_plus_lin >= 1.0 >= g.g_minus_lin > 0.0


def test_parametric_gain_product_invariance_at_unit_mode_matching():
    # pure amplifier: G+ * G- = 1 for eta_mm = 1
    for power in np.linspace(0.0, 2.0, 41):
        g = physics.parametric_gain(power, 0.28, 1.0)
        assert g.g_plus_lin * g.g_minus_lin == pytest.approx(1.0, rel=1e-12)


def test_squeezing_levels_fully_lossy_channel():
    s = physics.squeezing_levels(0.5, 0.28, 0.0)
    assert s.s_minus_lin == 1.0 and s.s_plus_lin == 1.0
    assert s.s_minus_db == 0.0 and s.s_plus_db == 0.0


def test_squeezing_levels_at_reference_point():
    # exp(+-2*sqrt(0.28*0.31)): S- = 0.22*0.554765 + 0.78 = 0.902045
    s = physics.squeezing_levels(0.31, 0.28, 0.22)
    assert s.s_minus_db == pytest.approx(-0.448, abs=5e-4)
    assert s.s_plus_db == pytest.approx(0.706, abs=5e-4)


def test_squeezing_levels_monotonic_in_power():
    powers = np.linspace(0.0, 1.0, 40)
    minus = [physics.squeezing_levels(p, 0.28, 0.22).s_minus_lin for p in powers]
    plus = [physics.squeezing_levels(p, 0.28, 0.22).s_plus_lin for p in powers]
    assert np.all(np.diff(minus) < 0)
    assert np.all(np.diff(plus) > 0)


def test_squeezing_levels_purity_bound():
    # loss makes the state impure: S- * S+ >= 1, equality only at eta = 1
    rng = np.random.default_rng(2)
    for _ in range(200):
        power = rng.uniform(0.01, 1.0)
        eta = rng.uniform(0.01, 0.99)
        s = physics.squeezing_levels(power, 0.3, eta)
        assert s.s_minus_lin * s.s_plus_lin > 1.0
    s = physics.squeezing_levels(0.5, 0.3, 1.0)
    assert s.s_minus_lin * s.s_plus_lin == pytest.approx(1.0, rel=1e-12)


def test_electronic_efficiency_values():
    assert physics.electronic_efficiency(8.0) == pytest.approx(0.8415, abs=5e-5)
    assert physics.electronic_efficiency(math.inf) == 1.0
    assert physics.electronic_efficiency(0.0) == 0.0
    with pytest.raises(ValueError):
        physics.electronic_efficiency(-1.0)


def test_visibility_to_efficiency():
    assert physics.visibility_to_efficiency(0.92) == pytest.approx(0.8464, rel=1e-12)
    assert physics.visibility_to_efficiency(1.0) == 1.0
    assert physics.visibility_to_efficiency(0.0) == 0.0
    with pytest.raises(ValueError):
        physics.visibility_to_efficiency(1.01)


def test_budget_total_reference_chain():
    budget = physics.DetectionBudget(
        eta_waveguide=10 ** (-0.029),
        eta_optics=10 ** (-0.457),
        eta_visibility=0.85,
        eta_quantum=0.98,
        eta_electronic=0.84,
    )
    total, total_db = physics.budget_total(budget)
    assert total == pytest.approx(0.229, abs=5e-3)
    assert total_db == pytest.approx(-6.41, abs=5e-3)


def test_budget_total_identity_and_zero():
    ones = physics.DetectionBudget(1.0, 1.0, 1.0, 1.0, 1.0)
    assert physics.budget_total(ones) == (1.0, 0.0)
    dead = physics.DetectionBudget(1.0, 0.0, 1.0, 1.0, 1.0)
    total, total_db = physics.budget_total(dead)
    assert total == 0.0 and total_db == -math.inf


def test_budget_from_raw_matches_components():
    budget = physics.DetectionBudget.from_raw(
        eta_waveguide=0.9354, eta_optics=0.3491, visibility=0.92,
        eta_quantum=0.98, clearance_db=8.0)
    assert budget.eta_visibility == pytest.approx(0.8464)
    assert budget.eta_electronic == pytest.approx(0.841511, abs=1e-6)


def test_infer_onchip_squeezing_reference():
    # (10^(-0.033) - (1 - 10^(-0.612))) / 10^(-0.612) = 0.700543 -> -1.5457 dB
    onchip = physics.infer_onchip_squeezing(-0.33, 10 ** (-0.612))
    assert onchip == pytest.approx(-1.5457, abs=5e-4)
    assert -2.1 <= onchip <= -1.3


def test_infer_onchip_squeezing_identities():
    assert physics.infer_onchip_squeezing(-3.0, 1.0) == pytest.approx(-3.0, abs=1e-12)
    assert physics.infer_onchip_squeezing(0.0, 0.37) == pytest.approx(0.0, abs=1e-12)


def test_infer_onchip_squeezing_rejects_unphysical():
    # -8 dB measured through eta_ext = 0.1: floor is 0.9 > 10^(-0.8)
    with pytest.raises(UnphysicalInputError):
        physics.infer_onchip_squeezing(-8.0, 0.1)
    with pytest.raises(ValueError):
        physics.infer_onchip_squeezing(-1.0, 0.0)


def test_loss_then_inference_round_trip():
    # infer_onchip_squeezing inverts apply_detection_loss to 1e-9 dB
    s_grid = np.linspace(-15.0, 15.0, 61)
    eta_grid = np.linspace(0.011, 1.0, 23)
    for s_db in s_grid:
        for eta in eta_grid:
            measured = physics.apply_detection_loss(s_db, eta)
            recovered = physics.infer_onchip_squeezing(measured, eta)
            assert recovered == pytest.approx(s_db, abs=1e-9)


def test_db_linear_round_trip():
    rng = np.random.default_rng(3)
    for _ in range(500):
        db = rng.uniform(-60, 60)
        assert physics.linear_to_db(physics.db_to_linear(db)) == pytest.approx(db, abs=1e-12)
        lin = rng.uniform(1e-6, 1e6)
        assert physics.db_to_linear(physics.linear_to_db(lin)) == pytest.approx(lin, rel=1e-12)


def test_normalized_to_total_efficiency():
    assert physics.normalized_to_total_efficiency(127.0, 0.47) == pytest.approx(28.05, abs=5e-3)
    assert physics.normalized_to_total_efficiency(5.0, 0.0) == 0.0
    assert physics.normalized_to_total_efficiency(1070.0, 0.47) == pytest.approx(236.4, abs=0.05)
    with pytest.raises(ValueError):
        physics.normalized_to_total_efficiency(-1.0, 0.5)


def test_budget_and_fitted_efficiency_agree():
    # loss-budget product sits within the fitted value's +-4 point window
    budget = physics.DetectionBudget.from_raw(
        eta_waveguide=10 ** (-0.029), eta_optics=10 ** (-0.457),
        visibility=0.92, eta_quantum=0.98, clearance_db=8.0)
    assert abs(budget.total() - 0.22) <= 0.04
