"""Closed-form dephasing moments for stationary classical noise models.

A dephasing qubit driven by stationary noise xi(t) accumulates the random
phase theta = integral of xi between measurements.  Every observable of the
three-measurement protocol reduces to three noise averages,

    f(t)     = E[cos 2 theta1]               first-interval moment,
    f'(tau)  = E[cos 2 theta2] = f(tau)      second interval (stationarity),
    f(t,tau) = E[cos 2 theta1 cos 2 theta2]  joint moment,

with theta1 = int_0^t xi dt' and theta2 = int_t^{t+tau} xi dt'.  Models:

    White(gamma_w)         chi(dt) = gamma_w delta(dt)
        f(t) = exp(-2 gamma_w t),   f(t,tau) = f(t) f(tau)
    ExpCorrGauss(g, tau_c) chi(dt) = g^2 exp(-|dt|/tau_c)   (OU noise)
        f(t) = exp{-4 (tau_c g)^2 [t/tau_c - (1 - e^{-t/tau_c})]}
        f(t,tau) = f(t) f(tau) cosh(phi),
        phi = 4 (tau_c g)^2 (1 - e^{-t/tau_c})(1 - e^{-tau/tau_c})
    StaticGauss(g)         chi(dt) = g^2   (frozen Gaussian frequency)
        f(t) = exp(-2 (g t)^2),     f(t,tau) = [f(t+tau) + f(t-tau)] / 2
    StaticLorentz(gamma, omega)   frozen Cauchy frequency; chi undefined
        f(t) = exp(-gamma |t|) cos(omega t)
        f(t,tau) = [e^{-gamma|t+tau|} cos(omega (t+tau))
                    + e^{-gamma|t-tau|} cos(omega (t-tau))] / 2

From the moments: C_pf = f(t,tau) - f(t) f(tau) and the post-measurement
conditional coherence c^{yx} = [f(tau) + yx f(t,tau)] / [1 + yx f(t)].

All operations are pure functions of the frozen model dataclasses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import core
from .errors import (
    DeltaSingularCorrelation,
    UndefinedCorrelation,
    ZeroProbabilityPostselection,
)

# Postselection feasibility threshold on |1 + yx f(t)|.
POSTSELECTION_EPS = 1e-12


def _positive(value: float, name: str) -> float:
    v = float(value)
    if not math.isfinite(v) or v <= 0.0:
        raise ValueError(f"{name} must be finite and > 0, got {value!r}")
    return v


def _time(value: float, name: str = "t") -> float:
    v = float(value)
    if not math.isfinite(v) or v < 0.0:
        raise ValueError(f"{name} must be finite and >= 0, got {value!r}")
    return v


@dataclass(frozen=True)
class White:
    """Delta-correlated (Markovian) noise with rate weight gamma_w."""

    gamma_w: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "gamma_w", _positive(self.gamma_w, "gamma_w"))


@dataclass(frozen=True)
class ExpCorrGauss:
    """Gaussian noise with exponential autocorrelation (OU process).

    g is the stationary amplitude (chi(0) = g^2), tau_c the correlation time.
    """

    g: float
    tau_c: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "g", _positive(self.g, "g"))
        object.__setattr__(self, "tau_c", _positive(self.tau_c, "tau_c"))


@dataclass(frozen=True)
class StaticGauss:
    """Frozen Gaussian random frequency: xi constant per realization."""

    g: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "g", _positive(self.g, "g"))


@dataclass(frozen=True)
class StaticLorentz:
    """Frozen Cauchy random frequency with half-width gamma/2, center omega/2.

    The frequency 2*gtilde of the accumulated phase is distributed so that
    E exp(2 i gtilde t) = exp(i omega t) exp(-gamma |t|).
    """

    gamma: float
    omega: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "gamma", _positive(self.gamma, "gamma"))
        w = float(self.omega)
        if not math.isfinite(w):
            raise ValueError(f"omega must be finite, got {self.omega!r}")
        object.__setattr__(self, "omega", w)


NoiseModel = White | ExpCorrGauss | StaticGauss | StaticLorentz

GAUSSIAN_FAMILY = (White, ExpCorrGauss, StaticGauss)


def model_tag(model: NoiseModel) -> str:
    """Short lowercase tag used in CSV output and configs."""
    return {
        White: "white",
        ExpCorrGauss: "exp_corr_gauss",
        StaticGauss: "static_gauss",
        StaticLorentz: "static_lorentz",
    }[type(model)]


def correlation_function(model: NoiseModel, dt: float) -> float:
    """Stationary autocorrelation chi(dt) of the underlying noise.

    White noise is delta-correlated: chi(0) is singular, so dt = 0 raises
    DeltaSingularCorrelation (carrying the weight gamma_w); integrals over
    chi must use phase_covariance instead.  StaticLorentz has no finite
    second moment at all and always raises UndefinedCorrelation.
    """
    dt = _time(dt, "dt")
    match model:
        case White(gamma_w=gw):
            if dt == 0.0:
                raise DeltaSingularCorrelation(
                    f"white noise chi(0) is a Dirac delta of weight {gw}", weight=gw
                )
            return 0.0
        case ExpCorrGauss(g=g, tau_c=tc):
            return g * g * math.exp(-dt / tc)
        case StaticGauss(g=g):
            return g * g
        case StaticLorentz():
            raise UndefinedCorrelation(
                "Cauchy-distributed frequency has no second moment"
            )
    raise TypeError(f"unknown noise model {model!r}")


def _h(u: float) -> float:
    # h(u) = u - (1 - e^{-u}) = u + expm1(-u), accurate for small u.
    return u + math.expm1(-u)


def phase_covariance(model: NoiseModel, t: float, tau: float) -> tuple[float, float, float]:
    """(Var theta1, Var theta2, Cov) of the two integrated phases.

    theta1 integrates the noise over [0, t], theta2 over [t, t + tau].  These
    are the double integrals of chi over the corresponding rectangles:

        White:        (gamma_w t, gamma_w tau, 0)
        ExpCorrGauss: Var = 2 g^2 tau_c^2 h(s/tau_c), h(u) = u - 1 + e^{-u}
                      Cov = g^2 tau_c^2 (1-e^{-t/tau_c})(1-e^{-tau/tau_c})
        StaticGauss:  (g^2 t^2, g^2 tau^2, g^2 t tau)

    The Gaussian moments follow as E cos 2theta1 = exp(-2 Var theta1) and
    E cos 2theta1 cos 2theta2
        = [exp(-2 Var(theta1+theta2)) + exp(-2 Var(theta1-theta2))] / 2.

    Raises UndefinedCorrelation for StaticLorentz.
    """
    t = _time(t, "t")
    tau = _time(tau, "tau")
    match model:
        case White(gamma_w=gw):
            return gw * t, gw * tau, 0.0
        case ExpCorrGauss(g=g, tau_c=tc):
            a = g * g * tc * tc
            var1 = 2.0 * a * _h(t / tc)
            var2 = 2.0 * a * _h(tau / tc)
            cov = a * (-math.expm1(-t / tc)) * (-math.expm1(-tau / tc))
            return var1, var2, cov
        case StaticGauss(g=g):
            return g * g * t * t, g * g * tau * tau, g * g * t * tau
        case StaticLorentz():
            raise UndefinedCorrelation(
                "Cauchy-distributed frequency has no phase covariance"
            )
    raise TypeError(f"unknown noise model {model!r}")


def first_moment(model: NoiseModel, s: float) -> float:
    """f(s) = E[cos 2 theta] over one interval of length s; f(0) = 1."""
    s = _time(s, "s")
    match model:
        case White(gamma_w=gw):
            return math.exp(-2.0 * gw * s)
        case ExpCorrGauss(g=g, tau_c=tc):
            return math.exp(-4.0 * (tc * g) ** 2 * _h(s / tc))
        case StaticGauss(g=g):
            return math.exp(-2.0 * (g * s) ** 2)
        case StaticLorentz(gamma=gamma, omega=omega):
            return math.exp(-gamma * abs(s)) * math.cos(omega * s)
    raise TypeError(f"unknown noise model {model!r}")


def _lorentz_f(gamma: float, omega: float, s: float) -> float:
    # s may be negative here (via t - tau); f is even in s.
    return math.exp(-gamma * abs(s)) * math.cos(omega * s)


def joint_moment(model: NoiseModel, t: float, tau: float) -> float:
    """f(t, tau) = E[cos 2 theta1 cos 2 theta2]; reduces to f at t=0 or tau=0."""
    t = _time(t, "t")
    tau = _time(tau, "tau")
    match model:
        case White():
            return first_moment(model, t) * first_moment(model, tau)
        case ExpCorrGauss(g=g, tau_c=tc):
            a = (tc * g) ** 2
            phi = 4.0 * a * (-math.expm1(-t / tc)) * (-math.expm1(-tau / tc))
            if phi == 0.0:
                # t = 0 or tau = 0: factorize exactly so cpf cancels to 0.0
                return first_moment(model, t) * first_moment(model, tau)
            # log-space combination avoids 0 * inf from underflow * cosh overflow
            log_ff = -4.0 * a * (_h(t / tc) + _h(tau / tc))
            return 0.5 * (math.exp(log_ff + phi) + math.exp(log_ff - phi))
        case StaticGauss():
            return 0.5 * (first_moment(model, t + tau) + first_moment(model, abs(t - tau)))
        case StaticLorentz(gamma=gamma, omega=omega):
            return 0.5 * (_lorentz_f(gamma, omega, t + tau) + _lorentz_f(gamma, omega, t - tau))
    raise TypeError(f"unknown noise model {model!r}")


def moment_set(model: NoiseModel, t: float, tau: float) -> core.MomentSet:
    """The protocol MomentSet (f_t, f_tau, f_joint) for this model.

    For White the joint moment is computed as the literal product of the two
    first moments, so the connected combination cancels to exactly 0.0.
    """
    f_t = first_moment(model, t)
    f_tau = first_moment(model, tau)
    if isinstance(model, White):
        f_joint = f_t * f_tau
    else:
        f_joint = joint_moment(model, t, tau)
    return core.MomentSet(f_t=f_t, f_tau=f_tau, f_joint=f_joint)


def cpf(model: NoiseModel, t: float, tau: float) -> float:
    """Conditional past-future correlation C_pf(t, tau) = f(t,tau) - f(t) f(tau).

    Identically zero for White; non-negative for the other three models with
    omega = 0 (their joint moments dominate the factorized product).
    """
    return core.cpf_from_moments(moment_set(model, t, tau))


def probability_table(model: NoiseModel, t: float, tau: float, y: int) -> core.CpfProbabilityTable:
    """Conditional outcome table P(z, x | y) for this model at (t, tau)."""
    return core.cpf_probability_table(moment_set(model, t, tau), y)


def conditional_coherence(model: NoiseModel, t: float, tau: float, yx: int) -> float:
    """Coherence after the second measurement, conditioned on the product yx.

    c^{yx}(t,tau) = [f(tau) + yx f(t,tau)] / [1 + yx f(t)].  The deviation
    from the unconditional f(tau) is the measurement back action; it vanishes
    for White noise, where this returns exactly f(tau) for both yx.
    """
    yx = core.validate_outcome(yx, "yx")
    m = moment_set(model, t, tau)
    denom = 1.0 + yx * m.f_t
    if abs(denom) <= POSTSELECTION_EPS:
        raise ZeroProbabilityPostselection(
            f"outcome pair with yx={yx:+d} has probability (1 + yx f(t))/2 ~ 0 at t={t}"
        )
    return (m.f_tau + yx * m.f_joint) / denom


def dephasing_rate(model: NoiseModel, t: float) -> float:
    """Instantaneous dephasing rate gamma(t) = -d/dt ln f(t).

    White: 2 gamma_w.  StaticGauss: 4 g^2 t.  ExpCorrGauss:
    4 g^2 tau_c (1 - e^{-t/tau_c}).  StaticLorentz: gamma + omega tan(omega t)
    (constant gamma for omega = 0; diverges where the cosine envelope crosses
    zero, i.e. where the coherence itself vanishes).
    """
    t = _time(t, "t")
    match model:
        case White(gamma_w=gw):
            return 2.0 * gw
        case ExpCorrGauss(g=g, tau_c=tc):
            return 4.0 * g * g * tc * (-math.expm1(-t / tc))
        case StaticGauss(g=g):
            return 4.0 * g * g * t
        case StaticLorentz(gamma=gamma, omega=omega):
            return gamma if omega == 0.0 else gamma + omega * math.tan(omega * t)
    raise TypeError(f"unknown noise model {model!r}")
