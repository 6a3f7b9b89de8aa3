"""Probing signal and the two sampled linear operators used to build the
scalar regression: a pure delay and a windowed average (WZOH).

Both operators run on a uniform grid of step ``h`` and need their window to
be an exact multiple of ``h``; the ring buffers are sized once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class InjectionConfig:
    """Sinusoidal probe ``A0 sin(2 pi t / epsilon)`` and the delay multiple ``n``."""

    A0: float = 1.0
    epsilon: float = 1.0 / 300.0
    n: int = 10

    def __post_init__(self):
        if not self.A0 > 0:
            raise ValueError("A0 must be positive")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")

    @property
    def d(self) -> float:
        return self.n * self.epsilon

    @property
    def w(self) -> float:
        return 2.0 * self.d


def probe(t: float, cfg: InjectionConfig) -> float:
    return cfg.A0 * math.sin(TWO_PI * t / cfg.epsilon)


def probe_primitive(t: float, cfg: InjectionConfig) -> float:
    """S(t) = -(A0 / 2 pi) cos(2 pi t / epsilon).

    Note the normalisation: ``epsilon * dS/dt = s``, so the flux ripple
    produced by the probe is ``epsilon * S``.
    """
    return -(cfg.A0 / TWO_PI) * math.cos(TWO_PI * t / cfg.epsilon)


# Sample-index forms used inside the stepping loop. The phase is reduced
# modulo one period in integer arithmetic, which keeps long runs accurate.

def probe_sample(j: int, N: int, A0: float) -> float:
    """s at t = j h with h = epsilon / N."""
    return A0 * math.sin(TWO_PI * (j % N) / N)


def probe_half_sample(j: int, N: int, A0: float) -> float:
    """s at t = (j + 1/2) h."""
    return A0 * math.sin(TWO_PI * (2 * (j % N) + 1) / (2 * N))


def primitive_sample(j: int, N: int, A0: float) -> float:
    """S at t = j h."""
    return -(A0 / TWO_PI) * math.cos(TWO_PI * (j % N) / N)


def probe_step_mean(j: int, N: int, A0: float, epsilon: float, h: float) -> float:
    """Exact mean of s over [j h, (j + 1) h]."""
    return epsilon * (primitive_sample(j + 1, N, A0) - primitive_sample(j, N, A0)) / h


def excitation_integral(cfg: InjectionConfig) -> float:
    """Integral of S^2 over one probe period: A0^2 epsilon / (8 pi^2)."""
    return cfg.A0 * cfg.A0 * cfg.epsilon / (8.0 * math.pi * math.pi)


def samples_per(duration: float, h: float) -> int:
    """``duration / h`` as an exact integer, or ValueError."""
    ratio = duration / h
    count = int(round(ratio))
    if abs(ratio - count) > 1e-9 * max(1.0, ratio):
        raise ValueError(f"{duration} is not an integer multiple of the step {h}")
    return count


class DelayLine:
    """Pure delay ``v(t - delay)`` on a fixed ring buffer.

    Until the buffer has seen ``delay / h`` samples, reads return the first
    sample (repeat-first padding).
    """

    def __init__(self, delay: float, h: float):
        self.capacity = samples_per(delay, h)
        self._ring = [0.0] * self.capacity
        self._pos = 0
        self._started = False

    def step(self, sample: float) -> float:
        if self.capacity == 0:
            return sample
        if not self._started:
            self._ring = [sample] * self.capacity
            self._started = True
        out = self._ring[self._pos]
        self._ring[self._pos] = sample
        self._pos = (self._pos + 1) % self.capacity
        return out


class RunningIntegral:
    """Windowed mean ``(chi(t) - chi(t - w)) / w`` with ``chi`` the trapezoidal
    running integral of the input.

    Before the window fills, the input is treated as having been equal to its
    first sample for all earlier times.
    """

    def __init__(self, window: float, h: float):
        self.length = samples_per(window, h)
        if self.length < 1:
            raise ValueError("window must span at least one step")
        self.window = window
        self.h = h
        self.chi = 0.0
        self._prev = 0.0
        self._ring = [0.0] * self.length
        self._pos = 0
        self._started = False

    def step(self, sample: float) -> float:
        h = self.h
        if not self._started:
            self._ring = [-(self.length - j) * h * sample for j in range(self.length)]
            self._started = True
        else:
            self.chi += h * 0.5 * (self._prev + sample)
        self._prev = sample
        old = self._ring[self._pos]
        self._ring[self._pos] = self.chi
        self._pos = (self._pos + 1) % self.length
        return (self.chi - old) / self.window
