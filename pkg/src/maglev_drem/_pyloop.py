"""Reference stepping loop in plain Python, assembled from the component classes.

The compiled kernel reproduces this loop operation by operation, so both
backends produce bitwise-identical logs.
"""

from __future__ import annotations

import math

from .control import Backstepping, ida_pbc_sensorless, ida_pbc_state_feedback, ida_pbc_warmup
from .observer import ObserverBundle
from .plant import rk4_step
from .sigproc import probe_half_sample, probe_sample, probe_step_mean

STATUS_OK = 0
STATUS_CRASH = 1
STATUS_OVERFLOW = 2

LOG_FIELDS = ("t", "x1", "x2", "x3", "y", "i", "u", "u_C", "s", "yv_hat", "x1_hat", "x3_hat",
              "R_hat", "theta2_hat", "Y", "q_star", "pe")


def make_bundle(cfg, y0: float) -> ObserverBundle:
    o = cfg.observer
    return ObserverBundle.create(
        cfg.plant, cfg.injection, cfg.sim.N, y0, gamma=o.gamma, a=o.a, gamma_R=o.gamma_R,
        gamma_lambda=o.gamma_lambda, gamma_p=o.gamma_p, ell=o.ell, yv0=o.yv0, R_hat0=o.R_hat0,
        variant=o.variant, c1=o.c1, c2=o.c2, luenberger_correction=o.luenberger_correction)


def run(cfg, noise, qstar, log, cur) -> tuple[int, int]:
    """Run ``cfg.n_steps`` steps, writing log rows and the per-step current.

    ``noise`` and ``qstar`` hold one value per sample (``n_steps + 1``).
    Returns ``(status, k)`` where ``k`` is the last sample index processed.
    """
    p = cfg.plant
    inj = cfg.injection
    N = cfg.sim.N
    A0 = inj.A0
    eps = inj.epsilon
    h = cfg.h
    n = cfg.n_steps
    every = cfg.sim.log_every
    kind = cfg.controller.kind
    ida = cfg.controller.ida
    true_yv = cfg.observer.true_yv
    bs = Backstepping(cfg.controller.backstepping, p)
    bs_truth = bs.cfg.wiring == "truth"
    bs_true_R = bs.cfg.resistance == "true"

    x1, x2, x3 = cfg.x0
    bundle = make_bundle(cfg, x1 * x2 - p.k * noise[0])

    for k in range(n + 1):
        y = x1 * x2 - p.k * noise[k]
        qs = qstar[k]
        override = x2 if true_yv else None
        x1h, yvh, x3h = bundle.output(override)
        Rh = bundle.R_hat
        th2 = bundle.vout.theta2_hat

        if kind == "ida-state":
            u_c = ida_pbc_state_feedback((x1, x2, x3), qs, p, ida)
        elif kind == "ida-sensorless":
            if bundle.vout.warm:
                u_c = ida_pbc_sensorless((x1h, yvh, x3h), Rh, y, qs, p, ida)
            else:
                u_c = ida_pbc_warmup(Rh, y, p, ida)
        else:
            if bs_truth:
                q, mom = x2 + p.c, x3
            else:
                q, mom = yvh + p.c, x3h
            u_c = bs.step(q, mom, qs, p.R if bs_true_R else Rh, h)

        s = probe_sample(k, N, A0)
        Y = bundle.step(u_c + probe_step_mean(k, N, A0, eps, h), y, h, override)
        i = -x1 * x2 / p.k
        cur[k] = i
        if k % every == 0:
            row = log[k // every]
            row[0] = k * h
            row[1] = x1
            row[2] = x2
            row[3] = x3
            row[4] = y
            row[5] = i
            row[6] = u_c + s
            row[7] = u_c
            row[8] = s
            row[9] = yvh
            row[10] = x1h
            row[11] = x3h
            row[12] = Rh
            row[13] = th2
            row[14] = Y
            row[15] = qs
        if k == n:
            break

        x1, x2, x3 = rk4_step((x1, x2, x3), u_c, s, probe_half_sample(k, N, A0),
                              probe_sample(k + 1, N, A0), h, p)
        x1h, yvh, x3h = bundle.output(x2 if true_yv else None)
        if not math.isfinite(x1 + x2 + x3 + x1h + yvh + x3h + bundle.R_hat):
            return STATUS_OVERFLOW, k + 1
        if x2 >= 0.0:
            return STATUS_CRASH, k + 1
    return STATUS_OK, n
