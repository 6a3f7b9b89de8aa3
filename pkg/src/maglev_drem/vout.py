"""Virtual-output estimator.

The measured output carries the probe imprint ``y ~ y_bar + epsilon S y_v``.
Delaying ``y`` by ``d = n epsilon`` and subtracting its mean over ``2d``
leaves the scalar regression ``Y(t) ~ S(t - d) theta2`` with
``theta2 = epsilon * y_v``, which a projected gradient law identifies.
"""

from __future__ import annotations

import math

from .sigproc import TWO_PI, DelayLine, InjectionConfig, RunningIntegral


class VoutEstimator:
    """DREM gradient estimator of ``theta2 = epsilon * y_v``.

    The estimate is clamped so that ``theta2_hat / epsilon <= ell < 0``.
    Adaptation is frozen while the delay/average buffers warm up
    (first ``2d / h`` samples).
    """

    def __init__(self, injection: InjectionConfig, N: int, gamma: float, ell: float = -1e-4,
                 yv0: float = -0.005):
        if not gamma >= 0:
            raise ValueError("gamma must be non-negative")
        if not ell < 0:
            raise ValueError("projection ceiling ell must be strictly negative")
        if int(N) != N or N < 1:
            raise ValueError("N must be a positive integer")
        self.injection = injection
        self.N = int(N)
        self.h = injection.epsilon / self.N
        self.gamma = gamma
        self.ell = ell
        self.n_delay = injection.n * self.N
        self.n_window = 2 * self.n_delay
        self.delay = DelayLine(injection.d, self.h)
        self.mean = RunningIntegral(injection.w, self.h)
        self.theta2_hat = injection.epsilon * yv0
        self._project()
        self.k = 0

    @property
    def warm(self) -> bool:
        """True once the averaging window holds real samples only."""
        return self.k >= self.n_window

    @property
    def yv_hat(self) -> float:
        return self.theta2_hat / self.injection.epsilon

    def s_delayed(self, k: int | None = None) -> float:
        """S(t_k - d), computed from the sample index."""
        if k is None:
            k = self.k
        j = (k - self.n_delay) % self.N
        return -(self.injection.A0 / TWO_PI) * math.cos(TWO_PI * j / self.N)

    def build_Y(self, y: float) -> float:
        """Push one output sample and return ``Y = H_d[y] - Z_2d[y]``."""
        return self.delay.step(y) - self.mean.step(y)

    def drem_update(self, Y: float, s_d: float) -> float:
        eps_ell = self.injection.epsilon * self.ell
        th = self.theta2_hat + self.h * self.gamma * s_d * (Y - s_d * self.theta2_hat)
        if th > eps_ell:
            th = eps_ell
        self.theta2_hat = th
        return th

    def _project(self):
        eps_ell = self.injection.epsilon * self.ell
        if self.theta2_hat > eps_ell:
            self.theta2_hat = eps_ell

    def step(self, y: float) -> float:
        """Consume the sample ``y(t_k)``, adapt, advance to ``k + 1``.

        Returns ``Y(t_k)``.
        """
        Y = self.build_Y(y)
        if self.warm:
            self.drem_update(Y, self.s_delayed())
        self.k += 1
        return Y


def virtual_output(theta2_hat: float, epsilon: float) -> float:
    return theta2_hat / epsilon
