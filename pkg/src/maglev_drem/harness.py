"""Closed-loop simulation engine, metrics, sweeps and CSV export."""

from __future__ import annotations

import csv
import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _pyloop
from .config import ScenarioConfig
from .plant import noise_samples
from .sigproc import InjectionConfig, RunningIntegral, samples_per
from .vout import VoutEstimator

try:
    from . import _kernel
except ImportError:  # extension not built
    _kernel = None

LOG_FIELDS = _pyloop.LOG_FIELDS


def compiled_available() -> bool:
    return _kernel is not None


def resolve_backend(requested: str = "auto") -> str:
    """``compiled`` or ``python``; ``MAGLEV_DREM_BACKEND=python`` forces the fallback."""
    env = os.environ.get("MAGLEV_DREM_BACKEND", "").strip().lower()
    if env in ("python", "compiled"):
        requested = env
    if requested == "python":
        return "python"
    if requested == "compiled":
        if _kernel is None:
            raise RuntimeError("compiled backend requested but maglev_drem._kernel is not built")
        return "compiled"
    return "compiled" if _kernel is not None else "python"


BACKEND = resolve_backend()


@dataclass
class TrajectoryLog:
    """Uniformly sampled closed-loop record; one array per field in ``LOG_FIELDS``."""

    data: dict
    dt: float = float("nan")

    def __getattr__(self, name):
        try:
            return self.__dict__["data"][name]
        except KeyError:
            raise AttributeError(name) from None

    def __len__(self):
        return len(self.data["t"])

    @classmethod
    def empty(cls, dt=float("nan")) -> "TrajectoryLog":
        return cls({f: np.zeros(0) for f in LOG_FIELDS}, dt)

    def as_array(self) -> np.ndarray:
        return np.column_stack([self.data[f] for f in LOG_FIELDS]) if len(self) else \
            np.zeros((0, len(LOG_FIELDS)))

    def equals(self, other: "TrajectoryLog") -> bool:
        """Bitwise equality of every field (NaNs compare equal by position)."""
        a, b = self.as_array(), other.as_array()
        return a.shape == b.shape and a.tobytes() == b.tobytes()


class SimulationAborted(RuntimeError):
    """Raised on a crash (``x2 >= 0``) or non-finite state; carries the partial log."""

    def __init__(self, reason: str, t: float, log: TrajectoryLog):
        super().__init__(f"{reason} at t = {t:.6g} s")
        self.reason = reason
        self.t = t
        self.log = log


def _run_kernel(cfg: ScenarioConfig, noise, qstar, log, cur, backend: str):
    if backend == "python":
        return _pyloop.run(cfg, noise, qstar, log, cur)
    return _kernel.run(*kernel_arguments(cfg), noise, qstar, log, cur)


VARIANT_CODES = {("kkl", "printed"): 0, ("kkl", "position"): 0,
                 ("luenberger", "printed"): 1, ("luenberger", "position"): 2}
CONTROLLER_CODES = {"ida-sensorless": 0, "ida-state": 1, "backstepping": 2}


def kernel_arguments(cfg: ScenarioConfig):
    """Flatten a scenario into the scalar parameter vectors of the compiled loop."""
    p, inj, o, sim = cfg.plant, cfg.injection, cfg.observer, cfg.sim
    ida, bs = cfg.controller.ida, cfg.controller.backstepping
    yv0 = -p.c if o.yv0 is None else o.yv0
    R_hat0 = 0.5 * p.R if o.R_hat0 is None else o.R_hat0
    c1 = 2.0 * o.gamma_p / p.m if o.c1 is None else o.c1
    c2 = o.gamma_p * o.gamma_p / p.m if o.c2 is None else o.c2
    x1, x2, x3 = cfg.x0
    fpar = np.array([
        p.m, p.g_acc, p.R, p.c, p.k,
        inj.A0, inj.epsilon,
        o.gamma, o.a, o.gamma_R, o.gamma_lambda, o.gamma_p, o.ell, c1, c2, yv0, R_hat0,
        ida.Kp, ida.alpha, ida.flux_target(p), ida.u_max,
        bs.Ki, bs.gamma1, bs.gamma2, bs.p_star, bs.u_max,
        x1, x2, x3,
    ], dtype=np.float64)
    ipar = np.array([
        inj.n, sim.N, cfg.n_steps, sim.log_every,
        CONTROLLER_CODES[cfg.controller.kind],
        VARIANT_CODES[(o.variant, o.luenberger_correction)],
        int(o.true_yv), int(bs.wiring == "truth"), int(bs.resistance == "true"),
    ], dtype=np.int64)
    return fpar, ipar


def trailing_energy(cur: np.ndarray, h: float, window: float) -> np.ndarray:
    """Trailing trapezoidal integral of ``cur**2`` over ``window``; NaN until filled."""
    L = samples_per(window, h)
    with np.errstate(over="ignore", invalid="ignore"):
        sq = cur * cur
        cum = np.concatenate(([0.0], np.cumsum(0.5 * h * (sq[1:] + sq[:-1]))))
    out = np.full(len(cur), np.nan)
    if L < len(cur):
        with np.errstate(invalid="ignore"):
            out[L:] = cum[L:] - cum[:-L]
    return out


def simulate(cfg: ScenarioConfig, backend: str | None = None) -> TrajectoryLog:
    """Run a closed-loop scenario; raises ``SimulationAborted`` on crash or overflow."""
    cfg.validate()
    backend = resolve_backend(cfg.sim.backend if backend is None else backend)
    h = cfg.h
    n = cfg.n_steps
    every = cfg.sim.log_every
    noise = noise_samples(cfg.noise, n + 1, h)
    qstar = np.ascontiguousarray(cfg.reference.sample(np.arange(n + 1) * h))
    n_rows = n // every + 1
    log = np.full((n_rows, len(LOG_FIELDS)), np.nan)
    cur = np.full(n + 1, np.nan)

    status, k_end = _run_kernel(cfg, noise, qstar, log, cur, backend)

    rows = k_end // every + 1 if status == _pyloop.STATUS_OK else (k_end - 1) // every + 1
    pe = trailing_energy(cur[:k_end + 1] if status == _pyloop.STATUS_OK else cur[:k_end],
                         h, cfg.pe_window)
    log = log[:rows]
    log[:, LOG_FIELDS.index("pe")] = pe[::every][:rows]
    result = TrajectoryLog({f: log[:, j].copy() for j, f in enumerate(LOG_FIELDS)}, every * h)
    if status != _pyloop.STATUS_OK:
        reason = "crash: ball reached the magnet (x2 >= 0)" if status == _pyloop.STATUS_CRASH \
            else "numeric overflow: non-finite state"
        raise SimulationAborted(reason, k_end * h, result)
    return result


# ---------------------------------------------------------------- CSV

def export_csv(log: TrajectoryLog, path) -> None:
    """Header plus one row per sample; floats written with ``repr`` (round-trip exact)."""
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(LOG_FIELDS)
            cols = [log.data[f] for f in LOG_FIELDS]
            for j in range(len(log)):
                w.writerow([repr(float(c[j])) for c in cols])
    except OSError as exc:
        raise OSError(f"cannot write CSV {path}: {exc}") from exc


def read_csv(path) -> TrajectoryLog:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = {f: np.array([float(r[j]) for r in body]) for j, f in enumerate(header)}
    t = data["t"]
    return TrajectoryLog(data, float(t[1] - t[0]) if len(t) > 1 else float("nan"))


# ---------------------------------------------------------------- metrics

def pe_metric(t, i, T_i: float) -> float:
    """Minimum over ``t`` of the trapezoidal integral of ``i**2`` over ``[t, t + T_i]``.

    ``t`` must be uniformly spaced.
    """
    t = np.asarray(t, float)
    i = np.asarray(i, float)
    if len(t) < 2:
        raise ValueError("need at least two samples")
    dt = t[1] - t[0]
    if T_i > t[-1] - t[0] + 1e-12 * abs(dt):
        raise ValueError("T_i exceeds the record length")
    L = samples_per(T_i, dt)
    sq = i * i
    cum = np.concatenate(([0.0], np.cumsum(0.5 * dt * (sq[1:] + sq[:-1]))))
    return float(np.min(cum[L:] - cum[:-L]))


@dataclass
class PlateauMetrics:
    index: int
    t0: float
    t1: float
    q_star: float
    position_hat: float  # mean |q_hat - q| over the window
    flux: float          # mean |x1_hat - x1|
    momentum: float      # mean |x3_hat - x3|
    resistance: float    # mean |R_hat - R|
    tracking: float      # mean |q - q_star|
    settling_time: float
    noise_rms: float     # RMS of the zero-mean part of q_hat - q


@dataclass
class RunMetrics:
    plateaus: list = field(default_factory=list)

    @property
    def last(self) -> PlateauMetrics:
        if not self.plateaus:
            raise ValueError("no complete plateau in the record")
        return self.plateaus[-1]

    def as_dict(self) -> dict:
        return {f"plateau{p.index}": vars(p) for p in self.plateaus}


STEADY_FRACTION = 0.2
SETTLING_BAND = 0.05


def _settling_time(t, q, qs, t0, t1, band) -> float:
    """Time after ``t0`` from which ``|q - qs|`` stays within ``band``; NaN if never."""
    sel = (t >= t0) & (t < t1)
    tt, err = t[sel], np.abs(q[sel] - qs)
    outside = np.nonzero(err > band)[0]
    if len(outside) == 0:
        return 0.0
    last = outside[-1]
    if last == len(tt) - 1:
        return float("nan")
    return float(tt[last + 1] - t0)


def run_metrics(log: TrajectoryLog, profile, params, warmup: float = 0.0) -> RunMetrics:
    """Error statistics over the final 20% of every complete reference plateau.

    Plateaus that end inside ``warmup`` are skipped with a warning. The
    settling band is 5% of the set-point step (or of ``|q_star|`` on the first
    plateau).
    """
    if len(log) == 0:
        raise ValueError("empty log")
    t = log.t
    t_end = t[-1]
    tol = 1e-9 * max(1.0, abs(t_end))
    q = log.x2 + params.c
    out = RunMetrics()
    idx = 0
    while True:
        t0, t1 = profile.plateau_bounds(idx)
        if t1 > t_end + tol:
            break
        if t1 <= warmup:
            warnings.warn(f"plateau {idx} ends inside the warm-up window; skipped")
            idx += 1
            continue
        ws = t1 - STEADY_FRACTION * (t1 - t0)
        sel = (t >= ws - tol) & (t < t1 - tol)
        if not sel.any():
            idx += 1
            continue
        qs = profile(0.5 * (t0 + t1))
        prev = profile(t0 - 0.5 * profile.period) if idx > 0 else 0.0
        band = SETTLING_BAND * (abs(qs - prev) if idx > 0 and qs != prev else abs(qs))
        e_q = log.yv_hat[sel] - log.x2[sel]
        out.plateaus.append(PlateauMetrics(
            index=idx, t0=t0, t1=t1, q_star=qs,
            position_hat=float(np.mean(np.abs(e_q))),
            flux=float(np.mean(np.abs(log.x1_hat[sel] - log.x1[sel]))),
            momentum=float(np.mean(np.abs(log.x3_hat[sel] - log.x3[sel]))),
            resistance=float(np.mean(np.abs(log.R_hat[sel] - params.R))),
            tracking=float(np.mean(np.abs(q[sel] - log.q_star[sel]))),
            settling_time=_settling_time(t, q, qs, t0, t1, band),
            noise_rms=float(np.std(e_q)),
        ))
        idx += 1
    return out


METRIC_NAMES = ("position_hat", "flux", "momentum", "resistance", "tracking")


def scenario_metrics(cfg: ScenarioConfig, log: TrajectoryLog) -> RunMetrics:
    return run_metrics(log, cfg.reference, cfg.plant, cfg.warmup)


# ---------------------------------------------------------------- sweeps

def loglog_slope(x, y) -> float:
    """Least-squares slope of log(y) against log(x); NaN if fewer than two usable points."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    ok = np.isfinite(x) & np.isfinite(y) & (x > 0) & (y > 0)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


@dataclass
class SweepResult:
    epsilons: list
    metrics: list          # RunMetrics or None per epsilon
    errors: list           # abort message or None per epsilon
    slopes: dict           # metric name -> log-log slope of the last-plateau value
    regression_slope: float
    regression_residuals: list
    degenerate: bool

    def table(self) -> list:
        rows = []
        for eps, m, err in zip(self.epsilons, self.metrics, self.errors):
            row = {"epsilon": eps, "error": err}
            if m is not None and m.plateaus:
                row.update({k: getattr(m.last, k) for k in METRIC_NAMES})
            rows.append(row)
        return rows


def epsilon_sweep(cfg: ScenarioConfig, epsilons, simulate_fn=None, on_log=None) -> SweepResult:
    """Run ``cfg`` at each probe period; failed runs are recorded and skipped.

    Slopes are fitted on the steady metrics of the last complete plateau.
    ``on_log(epsilon, log)`` receives every log, including partial ones.
    """
    simulate_fn = simulate if simulate_fn is None else simulate_fn
    epsilons = [float(e) for e in epsilons]
    metrics, errors = [], []
    for eps in epsilons:
        c = cfg.with_epsilon(eps)
        try:
            log = simulate_fn(c)
        except SimulationAborted as exc:
            if on_log is not None:
                on_log(eps, exc.log)
            metrics.append(None)
            errors.append(str(exc))
            continue
        if on_log is not None:
            on_log(eps, log)
        m = scenario_metrics(c, log)
        metrics.append(m if m.plateaus else None)
        errors.append(None if m.plateaus else "no complete plateau")
    slopes = {}
    for name in METRIC_NAMES:
        xs = [e for e, m in zip(epsilons, metrics) if m is not None]
        ys = [getattr(m.last, name) for m in metrics if m is not None]
        slopes[name] = loglog_slope(xs, ys)
    residuals = [regression_residual(InjectionConfig(cfg.injection.A0, e, cfg.injection.n),
                                     cfg.sim.N) for e in epsilons]
    return SweepResult(epsilons, metrics, errors, slopes, loglog_slope(epsilons, residuals),
                       residuals, degenerate=len(set(epsilons)) < 2)


# ---------------------------------------------------------------- synthetic checks

def _slow_theta1(t):
    return 0.1 + 0.02 * np.sin(2 * np.pi * 0.7 * t)


def _slow_yv(t):
    return -0.003 + 0.001 * np.sin(2 * np.pi * 0.5 * t + 0.3)


def wzoh_residual(epsilon: float, n: int = 1, N: int = 200, A0: float = 1.0,
                  duration: float = 1.0) -> float:
    """max over ``t in [w, duration]`` of ``|Z_w[r](t) - r_bar(t - w/2)|`` with
    ``r = r_bar + epsilon S r_v``, ``r_bar = 1 + 0.1 sin 2t``, ``r_v = 2 + 0.05 cos t``."""
    h = epsilon / N
    w = 2 * n * epsilon
    steps = samples_per(duration, h)
    k = np.arange(steps + 1)
    t = k * h
    S = -(A0 / (2 * np.pi)) * np.cos(2 * np.pi * (k % N) / N)
    r = 1.0 + 0.1 * np.sin(2 * t) + epsilon * S * (2.0 + 0.05 * np.cos(t))
    op = RunningIntegral(w, h)
    z = np.array([op.step(v) for v in r])
    L = samples_per(w, h)
    tt = t[L:]
    return float(np.max(np.abs(z[L:] - (1.0 + 0.1 * np.sin(2 * (tt - w / 2))))))


def regression_residual(injection: InjectionConfig, N: int = 200, duration: float = 1.0) -> float:
    """max |Y(t) - S(t - d) theta2(t - d)| on y = theta1 + S theta2 with slowly varying
    theta1 and theta2 = epsilon * y_v (after the buffers fill)."""
    eps = injection.epsilon
    est = VoutEstimator(injection, N, gamma=0.0)
    h = est.h
    steps = samples_per(duration, h)
    k = np.arange(steps + 1)
    t = k * h
    S = -(injection.A0 / (2 * np.pi)) * np.cos(2 * np.pi * (k % N) / N)
    y = _slow_theta1(t) + S * eps * _slow_yv(t)
    Y = np.array([est.build_Y(v) for v in y])
    L = est.n_window
    kd = k[L:] - est.n_delay
    target = S[kd] * eps * _slow_yv(t[L:] - injection.d)
    return float(np.max(np.abs(Y[L:] - target)))


def drem_decay_rate(injection: InjectionConfig, gamma: float = 3.89e3, N: int = 200,
                    yv_true: float = -0.003, yv0: float = -0.0005,
                    duration: float = 0.15) -> float:
    """Fitted exponential rate of |theta2_tilde| on the exact scalar regression
    ``Y = S(t - d) theta2`` with constant ``theta2``."""
    eps = injection.epsilon
    est = VoutEstimator(injection, N, gamma, yv0=yv0)
    theta2 = eps * yv_true
    steps = samples_per(duration, est.h)
    err = np.empty(steps)
    for j in range(steps):
        s_d = est.s_delayed(j)
        est.drem_update(s_d * theta2, s_d)
        err[j] = abs(est.theta2_hat - theta2)
    t = np.arange(1, steps + 1) * est.h
    # sample once per period to remove the within-period ripple of S^2
    sel = slice(N - 1, None, N)
    return -float(np.polyfit(t[sel], np.log(err[sel]), 1)[0])


def predicted_decay_rate(injection: InjectionConfig, gamma: float) -> float:
    """Averaged rate gamma * S0 / epsilon = gamma A0^2 / (8 pi^2)."""
    return gamma * injection.A0 ** 2 / (8.0 * math.pi ** 2)
