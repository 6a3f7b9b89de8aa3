import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from maglev_drem.control import (Backstepping, BacksteppingConfig, IdaPbcConfig, ReferenceProfile,
                                 ida_pbc_law, ida_pbc_sensorless, ida_pbc_state_feedback,
                                 ida_pbc_warmup, reference, saturate, signed_sqrt)
from maglev_drem.plant import SIM_PARAMS as P
from maglev_drem.plant import current

CFG = IdaPbcConfig()


def test_default_gains():
    assert (CFG.Kp, CFG.alpha, CFG.u_max) == (200.7, 33.4, 30.0)
    assert CFG.flux_target(P) == P.lambda_star
    bs = BacksteppingConfig()
    assert (bs.Ki, bs.gamma1, bs.gamma2) == (1.0, 340.0, 3.0)


@pytest.mark.parametrize("kwargs", [{"Kp": 0.0}, {"alpha": -1.0}, {"u_max": 0.0}])
def test_ida_config_validation(kwargs):
    with pytest.raises(ValueError):
        IdaPbcConfig(**kwargs)


def test_backstepping_config_validation():
    with pytest.raises(ValueError):
        BacksteppingConfig(Ki=0.0)
    with pytest.raises(ValueError):
        BacksteppingConfig(wiring="other")
    with pytest.raises(ValueError):
        BacksteppingConfig(resistance="other")


@given(q_star=st.floats(-0.004, 0.0045))
def test_equilibrium_gives_resistive_feedforward(q_star):
    x = (P.lambda_star, q_star - P.c, 0.0)
    y = x[0] * x[1]
    i_star = current(x, P)
    assert ida_pbc_state_feedback(x, q_star, P, CFG) == pytest.approx(P.R * i_star, rel=1e-12)
    assert ida_pbc_sensorless(x, P.R, y, q_star, P, CFG) == pytest.approx(-(P.R / P.k) * y)


@given(x1=st.floats(0.05, 0.15), x2=st.floats(-0.008, -0.0005), x3=st.floats(-0.01, 0.01),
       q_star=st.floats(-0.003, 0.004))
def test_sensorless_equals_state_feedback_with_perfect_estimates(x1, x2, x3, q_star):
    x = (x1, x2, x3)
    assert ida_pbc_sensorless(x, P.R, x1 * x2, q_star, P, CFG) == \
        ida_pbc_state_feedback(x, q_star, P, CFG)


def test_gain_zero_limit_leaves_feedforward():
    # the momentum damping alpha/m grows with alpha, so the limit holds at x3 = 0
    y = -3e-4
    u = ida_pbc_law(P.R, y, 0.2, -0.001, 0.0, 0.002, P, Kp=0.0, alpha=1e12, lambda_star=0.1)
    assert u == pytest.approx(-(P.R / P.k) * y, rel=1e-9)


def test_warmup_law_is_feedforward():
    assert ida_pbc_warmup(1.2, -3e-4, P, CFG) == pytest.approx(-(1.2 / P.k) * -3e-4)


@given(st.floats(-1e9, 1e9), st.floats(0.1, 100.0))
def test_saturation_bounds(u, u_max):
    v = saturate(u, u_max)
    assert abs(v) <= u_max
    if abs(u) <= u_max:
        assert v == u


@given(x1=st.floats(-10, 10), x2=st.floats(-1, -1e-6), x3=st.floats(-10, 10))
def test_control_output_always_saturated(x1, x2, x3):
    assert abs(ida_pbc_state_feedback((x1, x2, x3), 0.001, P, CFG)) <= CFG.u_max


def test_signed_sqrt():
    assert signed_sqrt(0.0) == 0.0
    assert signed_sqrt(4.0) == 2.0
    assert signed_sqrt(-9.0) == -3.0


def test_backstepping_equilibrium_value():
    bs = Backstepping(BacksteppingConfig(), P)
    q_star = 0.001
    u = bs.law(q_star, 0.0, q_star, P.R)
    assert u == pytest.approx(P.R * (P.c - q_star) * math.sqrt(2 * P.m * P.g_acc / P.k))
    # which is the resistive voltage at the levitation current
    assert u == pytest.approx(P.R * current((P.lambda_star, q_star - P.c, 0.0), P))


def test_backstepping_zero_upsilon_and_integral():
    cfg = BacksteppingConfig(gamma1=1.0, u_max=1e6)
    bs = Backstepping(cfg, P)
    # momentum that cancels the gravity term exactly
    p = P.m * P.g_acc
    assert bs.upsilon(0.001, p, 0.001) == 0.0
    assert bs.law(0.001, p, 0.001, P.R) == 0.0
    u0 = bs.step(0.002, 0.0, 0.001, P.R, 0.01)
    assert u0 == pytest.approx(bs.law(0.002, 0.0, 0.001, P.R) + cfg.Ki * bs.integral)
    assert bs.integral == pytest.approx(0.01 * 0.001)


def test_reference_profiles():
    single = ReferenceProfile(levels=(0.002,))
    assert all(single(t) == 0.002 for t in np.linspace(0, 50, 101))
    prof = ReferenceProfile()
    assert prof.levels == (P.c - 0.004, P.c - 0.002)
    assert prof(0.0) == prof.levels[0]
    for t in (0.3, 1.7, 2.5, 5.1):
        assert prof(t + prof.period) != prof(t)
        assert prof(t + 2 * prof.period) == prof(t)
        assert reference(t, prof) == prof(t)
    delayed = ReferenceProfile(levels=(0.001, 0.002), period=1.0, start=0.5)
    assert delayed(0.2) == 0.001 and delayed(0.7) == 0.001 and delayed(1.6) == 0.002
    assert delayed.plateau_bounds(0) == (0.0, 1.5)
    assert delayed.plateau_bounds(1) == (1.5, 2.5)
    t = np.linspace(0, 6, 601)
    assert np.array_equal(delayed.sample(t), [delayed(v) for v in t])


def test_reference_validation():
    with pytest.raises(ValueError):
        ReferenceProfile(levels=())
    with pytest.raises(ValueError):
        ReferenceProfile(period=0.0)
    with pytest.raises(ValueError):
        ReferenceProfile(levels=(0.001, 0.006)).check(P)
