import math
import warnings
from dataclasses import replace

import numpy as np
import pytest

from maglev_drem import harness
from maglev_drem.config import ScenarioConfig, config_from_dict, load_config
from maglev_drem.control import ReferenceProfile
from maglev_drem.harness import (LOG_FIELDS, SimulationAborted, TrajectoryLog, epsilon_sweep,
                                 export_csv, pe_metric, read_csv, run_metrics, simulate,
                                 trailing_energy)
from maglev_drem.plant import SIM_PARAMS as P
from maglev_drem.plant import NoiseConfig

needs_kernel = pytest.mark.skipif(not harness.compiled_available(),
                                  reason="compiled kernel not built")


def short(cfg=None, duration=0.5, **sim):
    cfg = ScenarioConfig() if cfg is None else cfg
    return replace(cfg, sim=replace(cfg.sim, duration=duration, **sim))


def test_zero_duration_gives_initial_record():
    log = simulate(short(duration=0.0))
    assert len(log) == 1
    assert log.t[0] == 0.0
    assert (log.x1[0], log.x2[0], log.x3[0]) == ScenarioConfig().x0


def test_log_shape_and_wiring():
    cfg = short(duration=0.2)
    log = simulate(cfg)
    assert len(log) == cfg.n_steps // cfg.sim.log_every + 1
    assert np.all(np.diff(log.t) > 0)
    assert np.allclose(np.diff(log.t), cfg.sim.log_every * cfg.h, rtol=1e-9)
    assert np.array_equal(log.u, log.u_C + log.s)
    assert np.allclose(log.y, log.x1 * log.x2, rtol=0, atol=0)
    assert np.allclose(log.i, -log.x1 * log.x2 / P.k)
    assert np.all(log.yv_hat <= cfg.observer.ell)
    assert np.allclose(log.theta2_hat / cfg.injection.epsilon, log.yv_hat, rtol=1e-15)


def test_state_feedback_equilibrium_start_stays_close():
    cfg = short(duration=1.0)
    log = simulate(cfg)
    q = log.x2 + P.c
    assert np.max(np.abs(q - log.q_star)) < cfg.injection.epsilon * 1e-2


def test_measurement_noise_is_bounded_and_seeded():
    cfg = replace(short(duration=0.2), noise=NoiseConfig(0.003, seed=4))
    a, b = simulate(cfg), simulate(cfg)
    assert a.equals(b)
    assert np.max(np.abs(a.y - a.x1 * a.x2)) <= P.k * 0.003
    assert not a.equals(simulate(cfg.with_seed(5)))


@needs_kernel
@pytest.mark.parametrize("controller", ["ida-state", "ida-sensorless", "backstepping"])
@pytest.mark.parametrize("observer", ["kkl", "luenberger"])
def test_backends_bitwise_identical(controller, observer):
    cfg = replace(short(duration=0.15), noise=NoiseConfig(0.003, seed=1))
    cfg = cfg.with_controller(controller).with_observer(observer)
    logs = []
    for backend in ("compiled", "python"):
        try:
            logs.append(simulate(cfg, backend=backend))
        except SimulationAborted as exc:
            logs.append(exc.log)
    assert logs[0].equals(logs[1])


@needs_kernel
def test_backends_identical_with_hooks_and_alternatives():
    cfg = short(duration=0.15).with_controller("backstepping")
    cfg = replace(cfg, observer=replace(cfg.observer, true_yv=True, variant="luenberger",
                                        luenberger_correction="position"),
                  controller=replace(cfg.controller, backstepping=replace(
                      cfg.controller.backstepping, wiring="truth", resistance="true")))
    assert simulate(cfg, backend="compiled").equals(simulate(cfg, backend="python"))


def test_backend_selection(monkeypatch):
    monkeypatch.setenv("MAGLEV_DREM_BACKEND", "python")
    assert harness.resolve_backend("auto") == "python"
    assert harness.resolve_backend("compiled") == "python"
    monkeypatch.delenv("MAGLEV_DREM_BACKEND")
    expected = "compiled" if harness.compiled_available() else "python"
    assert harness.resolve_backend("auto") == expected


def test_crash_is_reported_with_partial_log():
    cfg = replace(short(duration=0.5), sim=replace(short().sim, x0=(P.lambda_star, -1e-5, 0.5)))
    with pytest.raises(SimulationAborted) as info:
        simulate(cfg)
    assert "crash" in info.value.reason
    assert 0 < len(info.value.log) < 0.5 / (cfg.h * cfg.sim.log_every)


def test_overflow_is_reported():
    cfg = replace(short(duration=0.5), sim=replace(short().sim, x0=(1e200, -0.003, 0.0)))
    with pytest.raises(SimulationAborted) as info:
        simulate(cfg)
    assert "overflow" in info.value.reason


def test_invalid_scenarios_rejected():
    with pytest.raises(ValueError):
        simulate(short(duration=0.05))  # shorter than the warm-up window
    with pytest.raises(ValueError):
        simulate(replace(short(), reference=ReferenceProfile(levels=(0.006,))))
    with pytest.raises(ValueError):
        simulate(short(duration=0.30001))


def test_estimates_stay_finite_under_noise():
    cfg = replace(ScenarioConfig(), noise=NoiseConfig(0.003, seed=11))
    log = simulate(cfg)
    assert np.all(np.isfinite(log.as_array()[:, :-1]))


def test_pe_metric_examples():
    t = np.linspace(0.0, 3.0, 3001)
    assert pe_metric(t, np.zeros_like(t), 1.0) == 0.0
    assert pe_metric(t, np.sin(2 * np.pi * t), 1.0) == pytest.approx(0.5, rel=1e-5)
    with pytest.raises(ValueError):
        pe_metric(t, t, 5.0)


def test_pe_positive_in_closed_loop():
    cfg = short(duration=1.0)
    log = simulate(cfg)
    assert pe_metric(log.t, log.i, cfg.pe_window) > 0
    pe = log.pe[np.isfinite(log.pe)]
    assert len(pe) > 0 and np.all(pe > 0)


def test_trailing_energy_matches_direct_integral():
    h = 0.01
    cur = np.cos(np.arange(500) * h)
    e = trailing_energy(cur, h, 1.0)
    assert np.all(np.isnan(e[:100]))
    j = 321
    seg = cur[j - 100:j + 1]
    assert e[j] == pytest.approx(np.trapezoid(seg * seg, dx=h), rel=1e-12)


def _synthetic_log(offset=0.0, duration=4.0, dt=0.01):
    t = np.arange(int(round(duration / dt)) + 1) * dt
    prof = ReferenceProfile()
    qs = prof.sample(t)
    x2 = qs - P.c
    data = {f: np.zeros_like(t) for f in LOG_FIELDS}
    data.update(t=t, x1=np.full_like(t, P.lambda_star), x2=x2, q_star=qs,
                yv_hat=x2 + offset, x1_hat=np.full_like(t, P.lambda_star) + offset,
                x3_hat=np.zeros_like(t) + offset, R_hat=np.full_like(t, P.R) + offset)
    return TrajectoryLog(data, dt), prof


def test_run_metrics_on_synthetic_logs():
    log, prof = _synthetic_log()
    m = run_metrics(log, prof, P)
    assert len(m.plateaus) == 2
    for p in m.plateaus:
        assert (p.position_hat, p.flux, p.momentum, p.resistance, p.tracking) == (0, 0, 0, 0, 0)
        assert p.settling_time == 0.0
    log, prof = _synthetic_log(offset=1e-4)
    for p in run_metrics(log, prof, P).plateaus:
        for v in (p.position_hat, p.flux, p.momentum, p.resistance):
            assert v == pytest.approx(1e-4, rel=1e-6)


def test_run_metrics_skips_warmup_plateaus():
    log, _ = _synthetic_log()
    prof = ReferenceProfile(period=0.05)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        m = run_metrics(log, prof, P, warmup=0.1)
    assert any("warm-up" in str(w.message) for w in caught)
    assert m.plateaus[0].index == 2
    with pytest.raises(ValueError):
        run_metrics(TrajectoryLog.empty(), prof, P)


def test_csv_round_trip(tmp_path):
    log = simulate(short(duration=0.1))
    path = tmp_path / "run.csv"
    export_csv(log, path)
    lines = path.read_text().splitlines()
    assert lines[0].split(",") == list(LOG_FIELDS)
    assert all(len(line.split(",")) == len(LOG_FIELDS) for line in lines)
    back = read_csv(path)
    assert back.equals(log)
    empty = tmp_path / "empty.csv"
    export_csv(TrajectoryLog.empty(), empty)
    assert empty.read_text().strip() == ",".join(LOG_FIELDS)


def test_csv_write_error_names_path(tmp_path):
    bad = tmp_path / "missing" / "run.csv"
    with pytest.raises(OSError, match="missing"):
        export_csv(TrajectoryLog.empty(), bad)


def test_sweep_degenerate_and_failures():
    cfg = short(duration=2.0)
    res = epsilon_sweep(cfg, [1 / 300])
    assert res.degenerate and math.isnan(res.slopes["position_hat"])
    res = epsilon_sweep(cfg.with_controller("ida-sensorless"), [1 / 150, 1 / 300])
    assert all(e is not None for e in res.errors)
    assert len(res.metrics) == 2


def test_sweep_reports_regression_residual_slope():
    res = epsilon_sweep(short(duration=2.0), [1 / 150, 1 / 300, 1 / 600])
    assert res.regression_slope == pytest.approx(2.0, abs=0.4)
    assert all(m is not None for m in res.metrics)


def test_rk4_step_refinement_on_plant_trajectory():
    # closed-loop runs with N and 2N under state feedback: end states must agree
    cfg = short(duration=1.0)
    a = simulate(cfg)
    b = simulate(replace(cfg, sim=replace(cfg.sim, N=2 * cfg.sim.N,
                                          log_every=2 * cfg.sim.log_every)))
    assert a.t[-1] == b.t[-1]
    xa = np.array([a.x1[-1], a.x2[-1], a.x3[-1]])
    xb = np.array([b.x1[-1], b.x2[-1], b.x3[-1]])
    assert np.linalg.norm(xa - xb) / np.linalg.norm(xb) < 1e-6
    assert abs(xa[1] - xb[1]) / abs(xb[1]) < 1e-6


def test_config_loading(tmp_path):
    cfg = load_config("configs/default.toml")
    assert cfg == ScenarioConfig()
    path = tmp_path / "c.toml"
    path.write_text('[injection]\nepsilon = "1/150"\n[controller]\nkind = "backstepping"\n'
                    'wiring = "truth"\n[noise]\namplitude = 0.003\nseed = 9\n')
    cfg = load_config(path)
    assert cfg.injection.epsilon == 1 / 150
    assert cfg.controller.kind == "backstepping"
    assert cfg.controller.backstepping.wiring == "truth"
    assert cfg.noise == NoiseConfig(0.003, 9)
    with pytest.raises(ValueError):
        config_from_dict({"plant": {"mass": 1.0}})
    with pytest.raises(ValueError):
        config_from_dict({"extra": {}})
    with pytest.raises(OSError):
        load_config(tmp_path / "nope.toml")
