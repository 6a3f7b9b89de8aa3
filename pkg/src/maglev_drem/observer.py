"""Adaptive observers for resistance, flux, position and momentum.

Every component is a forward-Euler discretisation at the integration step.
``ObserverBundle.step`` advances them synchronously: all right-hand sides are
evaluated from the values held at the start of the step.
"""

from __future__ import annotations

from .plant import PlantParams
from .sigproc import InjectionConfig
from .vout import VoutEstimator


class ResistanceEstimator:
    """Gradient estimator of the coil resistance on the filtered regression
    ``Y_R = R phi_R`` (first-order filters with pole ``a``)."""

    def __init__(self, a: float, gamma_R: float, k: float, R_hat0: float,
                 v1: float = 0.0, v2: float = 0.0, phi_R: float = 0.0):
        if not a > 0 or not gamma_R > 0:
            raise ValueError("a and gamma_R must be positive")
        self.a = a
        self.gamma_R = gamma_R
        self.k = k
        self.R_hat = R_hat0
        self.v1 = v1
        self.v2 = v2
        self.phi_R = phi_R

    def regressor(self, y: float, yv_hat: float) -> tuple[float, float]:
        """Current ``(Y_R, phi_R)`` without advancing the filters."""
        a = self.a
        return -self.v1 + a * (y / yv_hat) - a * self.v2, self.phi_R

    def filter_step(self, u: float, y: float, yv_hat: float, h: float) -> tuple[float, float]:
        """Return ``(Y_R, phi_R)`` at the start of the step, then advance the filters."""
        a = self.a
        r = y / yv_hat
        Y_R = -self.v1 + a * r - a * self.v2
        phi_R = self.phi_R
        self.v1 = self.v1 + h * (-a * self.v1 + a * u)
        self.v2 = self.v2 + h * (-a * self.v2 + a * r)
        self.phi_R = self.phi_R + h * (-a * self.phi_R + a / self.k * y)
        return Y_R, phi_R

    def update(self, Y_R: float, phi_R: float, h: float) -> float:
        self.R_hat = self.R_hat + h * self.gamma_R * phi_R * (Y_R - phi_R * self.R_hat)
        return self.R_hat


class FluxObserver:
    def __init__(self, gamma_lambda: float, k: float, x1_hat0: float):
        if not gamma_lambda > 0:
            raise ValueError("gamma_lambda must be positive")
        self.gamma_lambda = gamma_lambda
        self.k = k
        self.x1_hat = x1_hat0

    def rate(self, R_hat: float, y: float, u: float, yv_hat: float) -> float:
        return R_hat / self.k * y + u - self.gamma_lambda * (y - yv_hat * self.x1_hat)

    def step(self, R_hat: float, y: float, u: float, yv_hat: float, h: float) -> float:
        self.x1_hat = self.x1_hat + h * self.rate(R_hat, y, u, yv_hat)
        return self.x1_hat


def algebraic_flux(y: float, yv_hat: float) -> float:
    """Division-based flux estimate; noise sensitive, diagnostic only."""
    return y / yv_hat


def position_estimate(yv_hat: float, c: float) -> tuple[float, float]:
    """(x2_hat, q_hat)."""
    return yv_hat, yv_hat + c


class KKLMomentumObserver:
    """First-order observer whose state tracks ``T = x3 - gamma_p y_v``."""

    variant = "kkl"

    def __init__(self, gamma_p: float, params: PlantParams, z0: float):
        if not gamma_p > 0:
            raise ValueError("gamma_p must be positive")
        self.gamma_p = gamma_p
        self.params = params
        self.z = z0

    def estimate(self, yv_hat: float) -> float:
        return self.z + self.gamma_p * yv_hat

    def step(self, x1_hat: float, yv_hat: float, h: float) -> float:
        p = self.params
        gp = self.gamma_p
        self.z = self.z + h * (-(gp / p.m) * self.z + x1_hat * x1_hat / (2.0 * p.k)
                               - gp * gp / p.m * yv_hat - p.m * p.g_acc)
        return self.z

    @property
    def state(self) -> tuple[float, ...]:
        return (self.z,)


class LuenbergerMomentumObserver:
    """Two-state Luenberger alternative.

    ``correction="printed"`` drives ``z2`` with ``c2 (x2_hat - z2)``;
    ``correction="position"`` uses ``c2 (x2_hat - z1)`` instead.
    """

    variant = "luenberger"

    def __init__(self, c1: float, c2: float, params: PlantParams, z1_0: float, z2_0: float = 0.0,
                 correction: str = "printed"):
        if not (c1 > 0 and c2 > 0):
            raise ValueError("c1 and c2 must be positive")
        if correction not in ("printed", "position"):
            raise ValueError(f"unknown Luenberger correction {correction!r}")
        self.c1 = c1
        self.c2 = c2
        self.params = params
        self.z1 = z1_0
        self.z2 = z2_0
        self.correction = correction

    def estimate(self, yv_hat: float) -> float:
        return self.z2

    def step(self, x1_hat: float, x2_hat: float, h: float) -> float:
        p = self.params
        z1, z2 = self.z1, self.z2
        e2 = x2_hat - z2 if self.correction == "printed" else x2_hat - z1
        self.z1 = z1 + h * (z2 / p.m + self.c1 * (x2_hat - z1))
        self.z2 = z2 + h * (x1_hat * x1_hat / (2.0 * p.k) - p.m * p.g_acc + self.c2 * e2)
        return self.z2

    @property
    def state(self) -> tuple[float, ...]:
        return (self.z1, self.z2)


class ObserverBundle:
    """The composite adaptive observer.

    ``chi`` lists ``(theta2_hat, v1, v2, phi_R, R_hat, x1_hat, z...)``; the
    output map gives ``(x1_hat, yv_hat, x3_hat)``.
    """

    def __init__(self, vout: VoutEstimator, resistance: ResistanceEstimator, flux: FluxObserver,
                 momentum):
        self.vout = vout
        self.resistance = resistance
        self.flux = flux
        self.momentum = momentum

    @classmethod
    def create(cls, params: PlantParams, injection: InjectionConfig, N: int, y0: float, *,
               gamma: float = 3.89e3, a: float = 500.0, gamma_R: float = 500.0,
               gamma_lambda: float = 8000.0, gamma_p: float = 30.0, ell: float = -1e-4,
               yv0: float | None = None, R_hat0: float | None = None, variant: str = "kkl",
               c1: float | None = None, c2: float | None = None,
               luenberger_correction: str = "printed") -> "ObserverBundle":
        """Build a bundle initialised from the first measurement ``y0``."""
        if yv0 is None:
            yv0 = -params.c
        if R_hat0 is None:
            R_hat0 = 0.5 * params.R
        vout = VoutEstimator(injection, N, gamma, ell, yv0)
        yv = vout.yv_hat
        # filters start at the fixed point consistent with R_hat0 and a constant y0
        res = ResistanceEstimator(a, gamma_R, params.k, R_hat0,
                                  v1=-R_hat0 / params.k * y0, v2=y0 / yv, phi_R=y0 / params.k)
        flux = FluxObserver(gamma_lambda, params.k, y0 / yv)
        if variant == "kkl":
            mom = KKLMomentumObserver(gamma_p, params, -gamma_p * yv)
        elif variant == "luenberger":
            c1 = 2.0 * gamma_p / params.m if c1 is None else c1
            c2 = gamma_p * gamma_p / params.m if c2 is None else c2
            mom = LuenbergerMomentumObserver(c1, c2, params, yv, 0.0, luenberger_correction)
        else:
            raise ValueError(f"unknown momentum observer {variant!r}")
        return cls(vout, res, flux, mom)

    @property
    def chi(self) -> tuple[float, ...]:
        r = self.resistance
        return (self.vout.theta2_hat, r.v1, r.v2, r.phi_R, r.R_hat, self.flux.x1_hat,
                *self.momentum.state)

    @property
    def R_hat(self) -> float:
        return self.resistance.R_hat

    def output(self, yv_override: float | None = None) -> tuple[float, float, float]:
        yv = self.vout.yv_hat if yv_override is None else yv_override
        return self.flux.x1_hat, yv, self.momentum.estimate(yv)

    def step(self, u: float, y: float, h: float, yv_override: float | None = None) -> float:
        """Advance every component by one step; returns ``Y`` at this sample.

        ``yv_override`` replaces ``yv_hat`` in every consumer (the DREM
        estimator itself still runs); it exists for diagnostics.
        """
        yv = self.vout.yv_hat if yv_override is None else yv_override
        x1_hat = self.flux.x1_hat
        R_hat = self.resistance.R_hat

        Y = self.vout.step(y)
        Y_R, phi_R = self.resistance.filter_step(u, y, yv, h)
        self.resistance.update(Y_R, phi_R, h)
        self.flux.step(R_hat, y, u, yv, h)
        # KKL takes yv_hat directly; Luenberger uses it as the position measurement
        self.momentum.step(x1_hat, yv, h)
        return Y
