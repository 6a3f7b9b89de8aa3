"""Reference generation and controllers.

All controllers return the voltage ``u_C``; the probe is added by the
simulation loop. Outputs are clamped to ``[-u_max, u_max]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .plant import PlantParams


def saturate(u: float, u_max: float) -> float:
    if u > u_max:
        return u_max
    if u < -u_max:
        return -u_max
    return u


@dataclass(frozen=True)
class IdaPbcConfig:
    Kp: float = 200.7
    alpha: float = 33.4
    lambda_star: float | None = None  # None: sqrt(2 k m g) of the plant
    u_max: float = 30.0

    def __post_init__(self):
        if not (self.Kp > 0 and self.alpha > 0):
            raise ValueError("Kp and alpha must be positive")
        if not self.u_max > 0:
            raise ValueError("u_max must be positive")

    def flux_target(self, params: PlantParams) -> float:
        return params.lambda_star if self.lambda_star is None else self.lambda_star


def ida_pbc_law(R: float, y: float, x1: float, x2: float, x3: float, q_star: float,
                params: PlantParams, Kp: float, alpha: float, lambda_star: float) -> float:
    """Unsaturated IDA-PBC voltage for the given (estimated or true) signals."""
    p = params
    return (-(R / p.k) * y - Kp * ((x1 - lambda_star) / alpha + (x2 + p.c - q_star))
            - (alpha / p.m + Kp) * x3)


def ida_pbc_sensorless(x_hat, R_hat: float, y: float, q_star: float, params: PlantParams,
                       cfg: IdaPbcConfig) -> float:
    """Certainty-equivalence law fed by the observer output ``(x1_hat, yv_hat, x3_hat)``
    and the measured ``y``."""
    x1, x2, x3 = x_hat
    u = ida_pbc_law(R_hat, y, x1, x2, x3, q_star, params, cfg.Kp, cfg.alpha,
                    cfg.flux_target(params))
    return saturate(u, cfg.u_max)


def ida_pbc_warmup(R_hat: float, y: float, params: PlantParams, cfg: IdaPbcConfig) -> float:
    """Feedforward-only voltage applied while the observer buffers fill."""
    return saturate(-(R_hat / params.k) * y, cfg.u_max)


def ida_pbc_state_feedback(x, q_star: float, params: PlantParams, cfg: IdaPbcConfig) -> float:
    """Same law with the true state and resistance."""
    x1, x2, x3 = x
    u = ida_pbc_law(params.R, x1 * x2, x1, x2, x3, q_star, params, cfg.Kp, cfg.alpha,
                    cfg.flux_target(params))
    return saturate(u, cfg.u_max)


@dataclass(frozen=True)
class BacksteppingConfig:
    Ki: float = 1.0
    gamma1: float = 340.0
    gamma2: float = 3.0
    p_star: float = 0.0
    u_max: float = 30.0
    wiring: str = "estimate"      # (q, p) from the observer or from the plant
    resistance: str = "estimate"  # R_hat or the true R

    def __post_init__(self):
        if not (self.Ki > 0 and self.gamma1 > 0 and self.gamma2 > 0):
            raise ValueError("Ki, gamma1 and gamma2 must be positive")
        if self.wiring not in ("estimate", "truth"):
            raise ValueError(f"unknown backstepping wiring {self.wiring!r}")
        if self.resistance not in ("estimate", "true"):
            raise ValueError(f"unknown backstepping resistance source {self.resistance!r}")


def signed_sqrt(v: float) -> float:
    """sqrt(|v|) sign(v), with sign(0) = 0."""
    if v > 0.0:
        return math.sqrt(v)
    if v < 0.0:
        return -math.sqrt(-v)
    return 0.0


class Backstepping:
    """Backstepping law with an integral action on the position error."""

    def __init__(self, cfg: BacksteppingConfig, params: PlantParams, integral: float = 0.0):
        self.cfg = cfg
        self.params = params
        self.integral = integral

    def upsilon(self, q: float, p: float, q_star: float) -> float:
        c, P = self.cfg, self.params
        return 2.0 / P.k * (P.m * P.g_acc - c.gamma1 * (p - c.p_star) - c.gamma2 * P.m * (q - q_star))

    def law(self, q: float, p: float, q_star: float, R: float) -> float:
        """u0 before saturation, using the current integral."""
        ups = self.upsilon(q, p, q_star)
        return R * (self.params.c - q) * signed_sqrt(ups) - self.cfg.Ki * self.integral

    def step(self, q: float, p: float, q_star: float, R: float, dt: float) -> float:
        """Return the saturated voltage, then advance the integral by ``dt``."""
        u = saturate(self.law(q, p, q_star, R), self.cfg.u_max)
        self.integral = self.integral + dt * (q - q_star)
        return u


@dataclass(frozen=True)
class ReferenceProfile:
    """Pulse train of position set points.

    Before ``start`` the first level is held; afterwards the levels cycle with
    each one held for ``period`` seconds.
    """

    levels: tuple[float, ...] = (0.001, 0.003)
    period: float = 2.0
    start: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(float(v) for v in self.levels))
        if not self.levels:
            raise ValueError("reference needs at least one level")
        if not self.period > 0:
            raise ValueError("reference period must be positive")

    def check(self, params: PlantParams):
        bad = [v for v in self.levels if not v < params.c]
        if bad:
            raise ValueError(f"reference levels {bad} are not below c = {params.c}")

    def plateau_index(self, t: float) -> int:
        if t < self.start:
            return 0
        return int(math.floor((t - self.start) / self.period))

    def plateau_bounds(self, index: int) -> tuple[float, float]:
        """Time interval of plateau ``index``; plateau 0 also covers ``[0, start)``."""
        lo = self.start + index * self.period
        return (0.0 if index == 0 else lo), lo + self.period

    def sample(self, t) -> np.ndarray:
        """Vectorised evaluation on an array of times."""
        t = np.asarray(t, dtype=float)
        idx = np.where(t < self.start, 0, np.floor((t - self.start) / self.period)).astype(np.int64)
        return np.asarray(self.levels)[idx % len(self.levels)]

    def __call__(self, t: float) -> float:
        return self.levels[self.plateau_index(t) % len(self.levels)]


def reference(t: float, profile: ReferenceProfile) -> float:
    return profile(t)
