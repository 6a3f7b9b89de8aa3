"""Levitated-ball plant: dynamics, output map, current noise and RK4 stepping.

State vector ``x = (x1, x2, x3)``:

    x1   flux linkage lambda            [Wb]
    x2   shifted position q - c         [m]   (q < c, so x2 < 0)
    x3   momentum p                     [kg m/s]

The coil voltage ``u`` enters only the flux equation. The measurable output
is ``y = x1 * x2``, which equals ``-k * i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


@dataclass(frozen=True)
class PlantParams:
    """Physical constants of the levitated ball (SI units)."""

    m: float = 0.0844
    g_acc: float = 9.81
    R: float = 2.52
    c: float = 0.005
    k: float = 6404.2e-6

    def __post_init__(self):
        for name in ("m", "g_acc", "R", "c", "k"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"PlantParams.{name} must be positive and finite, got {value!r}")

    @property
    def lambda_star(self) -> float:
        """Flux that balances gravity: sqrt(2 k m g)."""
        return math.sqrt(2.0 * self.k * self.m * self.g_acc)

    def equilibrium_voltage(self, x2: float) -> float:
        """Voltage holding ``(lambda_star, x2, 0)`` at rest."""
        return -(self.R / self.k) * self.lambda_star * x2


# Simulation parameter set and the experimental rig set.
SIM_PARAMS = PlantParams()
RIG_PARAMS = PlantParams(m=0.0844, g_acc=9.81, R=10.615, c=0.0079, k=49950e-6)


class PlantState(NamedTuple):
    x1: float
    x2: float
    x3: float

    def position(self, params: PlantParams) -> float:
        return self.x2 + params.c


def dynamics(x, u: float, params: PlantParams) -> tuple[float, float, float]:
    """Right-hand side f(x) + g u."""
    x1, x2, x3 = x
    p = params
    return (p.R / p.k * x1 * x2 + u, x3 / p.m, x1 * x1 / (2.0 * p.k) - p.m * p.g_acc)


def averaged_dynamics(x_bar, u_c: float, params: PlantParams) -> tuple[float, float, float]:
    """Averaged system: same vector field driven by the controller output only."""
    return dynamics(x_bar, u_c, params)


def output(x) -> float:
    return x[0] * x[1]


def current(x, params: PlantParams) -> float:
    return -x[0] * x[1] / params.k


def measure(x, nu: float, params: PlantParams) -> float:
    """Measured output for a current-sensor error ``nu`` (A); y = -k (i + nu)."""
    return x[0] * x[1] - params.k * nu


def rk4_step(x, u_hold: float, s0: float, s_mid: float, s1: float, h: float,
             params: PlantParams) -> tuple[float, float, float]:
    """One classical RK4 step.

    The controller voltage ``u_hold`` is held over the step while the probe is
    sampled at the stage times (``s0`` at t, ``s_mid`` at t + h/2, ``s1`` at t + h).
    """
    x1, x2, x3 = x
    k1a, k1b, k1c = dynamics((x1, x2, x3), u_hold + s0, params)
    y1 = x1 + 0.5 * h * k1a
    y2 = x2 + 0.5 * h * k1b
    y3 = x3 + 0.5 * h * k1c
    k2a, k2b, k2c = dynamics((y1, y2, y3), u_hold + s_mid, params)
    y1 = x1 + 0.5 * h * k2a
    y2 = x2 + 0.5 * h * k2b
    y3 = x3 + 0.5 * h * k2c
    k3a, k3b, k3c = dynamics((y1, y2, y3), u_hold + s_mid, params)
    y1 = x1 + h * k3a
    y2 = x2 + h * k3b
    y3 = x3 + h * k3c
    k4a, k4b, k4c = dynamics((y1, y2, y3), u_hold + s1, params)
    return (
        x1 + h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a),
        x2 + h / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b),
        x3 + h / 6.0 * (k1c + 2.0 * k2c + 2.0 * k3c + k4c),
    )


@dataclass(frozen=True)
class NoiseConfig:
    """Uniform current-sensor noise, sample-and-hold.

    ``hold_interval=None`` holds each draw for one integration step.
    """

    amplitude: float = 0.0
    seed: int = 0
    hold_interval: float | None = None

    def __post_init__(self):
        if not self.amplitude >= 0:
            raise ValueError("noise amplitude must be >= 0")
        if self.hold_interval is not None and not self.hold_interval > 0:
            raise ValueError("hold_interval must be positive")


def noise_samples(noise: NoiseConfig, n_samples: int, h: float) -> np.ndarray:
    """Per-step current noise nu_k in [-amplitude, amplitude].

    The same (seed, amplitude, hold, h) always yields the same sequence.
    """
    if noise.amplitude == 0.0:
        return np.zeros(n_samples)
    hold = 1
    if noise.hold_interval is not None:
        ratio = noise.hold_interval / h
        hold = int(round(ratio))
        if hold < 1 or abs(ratio - hold) > 1e-9 * max(1.0, ratio):
            raise ValueError(
                f"noise hold_interval {noise.hold_interval} is not a multiple of the step {h}")
    rng = np.random.default_rng(noise.seed)
    n_draws = -(-n_samples // hold)
    draws = rng.uniform(-noise.amplitude, noise.amplitude, size=n_draws)
    return np.repeat(draws, hold)[:n_samples]
