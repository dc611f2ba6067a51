"""Exact finite-N spin-bath engine and its Cauchy-coupling ensemble average.

The qubit couples to N bath spins through H = -sigma_z (x) sum_k g_k
sigma_z^(k) (phase convention below).  For the product initial bath state
with per-spin amplitudes (alpha_k, beta_k), everything is set by the
coherence overlap

    c_t = prod_k (|alpha_k|^2 e^{+i 2 g_k t} + |beta_k|^2 e^{-i 2 g_k t}),

an even-real-part function with c_{-t} = conj(c_t).  With f(u) = Re c_u the
three-measurement table moments are f_t = f(t), f_tau = f(tau) and
f_joint = [f(t+tau) + f(t-tau)] / 2, and the coherence after the second
measurement, conditioned on the product y*x, is

    c^{yx}(t,tau) = [c_tau + yx (c_{t+tau} + conj(c_{t-tau})) / 2]
                    / [1 + yx Re c_t].

Phase convention: the dense statevector oracle applies the diagonal
propagator phase e^{+i s t L} with s = +-1 the system z-eigenvalue and
L = sum_k g_k m_k the bath magnetization level, so the *relative* phase
between the two system branches is 2 g_k t per spin, exactly reproducing
c_t above.  (Flipping the global phase sign conjugates c_t and leaves all
probabilities unchanged; both conventions are exposed for testing.)

The Lorentz-ensemble model draws each total coupling gtilde_k = N g_k from
an independent Cauchy(omega/2, gamma/2) density.  Averaging e^{2 i gtilde s}
gives e^{i omega s - gamma |s|}, hence the closed forms implemented in
lorentz_coherence / lorentz_cpf / lorentz_conditional_coherence.  The Monte
Carlo estimators average the per-realization probability *table* over the
ensemble before combining moments (table-first order); averaging the
per-realization CPF instead is a documented negative control that yields
identically zero for this model.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from . import core
from ._mc import McConfig, RunningMoments, collect_moments
from .errors import (
    BathTooLarge,
    UnreachablePolarization,
    ZeroProbabilityPostselection,
)

ORACLE_MAX_SPINS = 14
POSTSELECTION_EPS = 1e-12


def _normalized_pair(a: complex, b: complex, what: str) -> tuple[complex, complex]:
    a, b = complex(a), complex(b)
    for v in (a, b):
        if not (math.isfinite(v.real) and math.isfinite(v.imag)):
            raise ValueError(f"{what} amplitudes must be finite")
    norm = abs(a) ** 2 + abs(b) ** 2
    if abs(norm - 1.0) > 1e-12:
        raise ValueError(f"{what} amplitudes must satisfy |a|^2+|b|^2=1, got {norm!r}")
    return a, b


@dataclass(frozen=True)
class SpinBathSpec:
    """N bath spins with couplings g_k and initial amplitudes (alpha_k, beta_k)."""

    couplings: np.ndarray
    alphas: np.ndarray
    betas: np.ndarray

    def __post_init__(self) -> None:
        g = np.atleast_1d(np.asarray(self.couplings, dtype=float))
        a = np.atleast_1d(np.asarray(self.alphas, dtype=complex))
        b = np.atleast_1d(np.asarray(self.betas, dtype=complex))
        if not (g.ndim == a.ndim == b.ndim == 1) or not (g.size == a.size == b.size):
            raise ValueError("couplings, alphas, betas must be 1-d of equal length")
        if g.size < 1:
            raise ValueError("need at least one bath spin")
        if not np.all(np.isfinite(g)):
            raise ValueError("couplings must be finite")
        norms = np.abs(a) ** 2 + np.abs(b) ** 2
        if not np.all(np.isfinite(norms)) or np.max(np.abs(norms - 1.0)) > 1e-12:
            raise ValueError("per-spin amplitudes must satisfy |alpha|^2+|beta|^2=1")
        for name, arr in (("couplings", g), ("alphas", a), ("betas", b)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n_spins(self) -> int:
        return self.couplings.size


@dataclass(frozen=True)
class SystemInit:
    """System amplitudes (a, b) on the z-eigenstates |+>, |->."""

    a: complex
    b: complex

    def __post_init__(self) -> None:
        a, b = _normalized_pair(self.a, self.b, "system")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def plus(cls) -> SystemInit:
        """The |+> state assumed by all closed-form results."""
        return cls(a=1.0, b=0.0)


@dataclass(frozen=True)
class LorentzCouplingSpec:
    """Ensemble of N-spin baths with iid Cauchy total couplings.

    gtilde_k ~ Cauchy(center omega/2, half-width gamma/2); the per-spin
    coupling is gtilde_k / N.  alpha and beta are shared by every spin.
    """

    gamma: float
    omega: float = 0.0
    n_spins: int = 1
    alpha: complex = 1.0 / math.sqrt(2.0)
    beta: complex = 1.0 / math.sqrt(2.0)

    def __post_init__(self) -> None:
        gm = float(self.gamma)
        if not math.isfinite(gm) or gm <= 0.0:
            raise ValueError(f"gamma must be finite and > 0, got {self.gamma!r}")
        w = float(self.omega)
        if not math.isfinite(w):
            raise ValueError(f"omega must be finite, got {self.omega!r}")
        n = int(self.n_spins)
        if n < 1:
            raise ValueError(f"n_spins must be >= 1, got {self.n_spins!r}")
        a, b = _normalized_pair(self.alpha, self.beta, "bath spin")
        object.__setattr__(self, "gamma", gm)
        object.__setattr__(self, "omega", w)
        object.__setattr__(self, "n_spins", n)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)


def coherence(spec: SpinBathSpec, t: float) -> complex:
    """Bath overlap c_t by the product formula; c_0 = 1, |c_t| <= 1.

    The protocol only uses t >= 0, but negative arguments (arising as t-tau
    inside conditional quantities) evaluate the same product formula, which
    is the analytic continuation: c_{-t} = conj(c_t).
    """
    t = float(t)
    if not math.isfinite(t):
        raise ValueError(f"t must be finite, got {t!r}")
    phases = np.exp(2j * t * spec.couplings)
    w_up = np.abs(spec.alphas) ** 2
    w_dn = np.abs(spec.betas) ** 2
    return complex(np.prod(w_up * phases + w_dn * np.conj(phases)))


def moment_set(spec: SpinBathSpec, t: float, tau: float) -> core.MomentSet:
    """Table moments (f(t), f(tau), [f(t+tau)+f(t-tau)]/2) with f = Re c."""
    f = lambda u: coherence(spec, u).real
    return core.MomentSet(
        f_t=f(t),
        f_tau=f(tau),
        f_joint=0.5 * (f(t + tau) + f(t - tau)),
    )


def cpf(spec: SpinBathSpec, t: float, tau: float) -> float:
    """Exact CPF [f(t+tau) + f(t-tau)]/2 - f(t) f(tau) of the bath spec.

    Vanishes at t = 0 or tau = 0 only up to state-normalization rounding
    (a few n_spins ulp), since f(0) is the computed product of per-spin
    norms rather than an exact 1.0.
    """
    return core.cpf_from_moments(moment_set(spec, t, tau))


def cpf_probability(spec: SpinBathSpec, t: float, tau: float, y: int) -> core.CpfProbabilityTable:
    """Conditional table P(z, x | y) implied by the product formula."""
    return core.cpf_probability_table(moment_set(spec, t, tau), y)


def conditional_coherence(spec: SpinBathSpec, t: float, tau: float, yx: int) -> complex:
    """Post-second-measurement coherence c^{yx}(t, tau) (complex).

    c^{yx} = [c_tau + yx (c_{t+tau} + conj(c_{t-tau}))/2] / [1 + yx Re c_t].
    Raises ZeroProbabilityPostselection when the denominator magnitude is
    below 1e-12 (the conditioning outcome pair cannot occur).
    """
    yx = core.validate_outcome(yx, "yx")
    denom = 1.0 + yx * coherence(spec, t).real
    if abs(denom) <= POSTSELECTION_EPS:
        raise ZeroProbabilityPostselection(
            f"outcome pair with yx={yx:+d} has vanishing probability at t={t}"
        )
    num = coherence(spec, tau) + yx * 0.5 * (
        coherence(spec, t + tau) + coherence(spec, t - tau).conjugate()
    )
    return num / denom


def scaled_gaussian_bath(n_spins: int, g: float, omega: float = 0.0) -> SpinBathSpec:
    """Uniform bath realizing the large-N Gaussian scaling.

    Couplings g_k = g / sqrt(N) and amplitudes with |alpha|^2 - |beta|^2 =
    omega / (2 g sqrt(N)), so that c_t -> exp(i omega t - 2 (g t)^2) for
    N >> 1.  Raises UnreachablePolarization when |omega/(2 g sqrt(N))| > 1.
    """
    n = int(n_spins)
    if n < 1:
        raise ValueError(f"n_spins must be >= 1, got {n_spins!r}")
    g = float(g)
    if not math.isfinite(g) or g <= 0.0:
        raise ValueError(f"g must be finite and > 0, got {g!r}")
    pol = float(omega) / (2.0 * g * math.sqrt(n))
    if abs(pol) > 1.0:
        raise UnreachablePolarization(
            f"|alpha|^2 - |beta|^2 = {pol!r} is outside [-1, 1]; "
            "increase N or g, or reduce omega"
        )
    w_up = 0.5 * (1.0 + pol)
    w_dn = 0.5 * (1.0 - pol)
    gk = g / math.sqrt(n)
    return SpinBathSpec(
        couplings=np.full(n, gk),
        alphas=np.full(n, math.sqrt(w_up), dtype=complex),
        betas=np.full(n, math.sqrt(w_dn), dtype=complex),
    )


# ---------------------------------------------------------------------------
# Cauchy-coupling ensemble: closed forms


def lorentz_coherence(spec: LorentzCouplingSpec, t: float) -> complex:
    """Ensemble-averaged coherence e^{-gamma|t|} (|a|^2 e^{i w t/N} + |b|^2 e^{-i w t/N})^N.

    Reduces to a pure exponential e^{-gamma|t|} for omega = 0 or balanced
    amplitudes |alpha| = |beta|... the latter because the bracket then equals
    cos(omega t / N) -- strictly, only for omega = 0 is the decay purely
    exponential; balanced amplitudes make it e^{-gamma|t|} cos^N(omega t/N).
    """
    t = float(t)
    if not math.isfinite(t):
        raise ValueError(f"t must be finite, got {t!r}")
    n = spec.n_spins
    w_up = abs(spec.alpha) ** 2
    w_dn = abs(spec.beta) ** 2
    bracket = w_up * cmath.exp(1j * spec.omega * t / n) + w_dn * cmath.exp(
        -1j * spec.omega * t / n
    )
    return math.exp(-spec.gamma * abs(t)) * bracket**n


def lorentz_cpf(gamma: float, t: float, tau: float) -> float:
    """Closed-form ensemble CPF [e^{-g(t+tau)} + e^{-g|t-tau|}]/2 - e^{-g(t+tau)}.

    Non-negative, zero at tau = 0, and -> 1/2 along the diagonal t = tau ->
    infinity even though the averaged coherence is exactly exponential (a
    time-independent dephasing Lindblad dynamics on average).
    """
    gamma, t, tau = float(gamma), float(t), float(tau)
    if gamma <= 0.0 or not math.isfinite(gamma):
        raise ValueError(f"gamma must be finite and > 0, got {gamma!r}")
    if t < 0.0 or tau < 0.0:
        raise ValueError("t and tau must be >= 0")
    return (
        0.5 * (math.exp(-gamma * (t + tau)) + math.exp(-gamma * abs(t - tau)))
        - math.exp(-gamma * (t + tau))
    )


def lorentz_conditional_coherence(gamma: float, t: float, tau: float, yx: int) -> float:
    """Ensemble conditional coherence with the yx term halved.

    c^{yx} = [e^{-g tau} + yx (e^{-g(t+tau)} + e^{-g|t-tau|})/2]
             / [1 + yx e^{-g t}]
    which stays within [-1, 1] and has the kink at tau = t.  The denominator
    vanishes only at t = 0 with yx = -1 (zero-probability postselection).
    """
    gamma, t, tau = float(gamma), float(t), float(tau)
    yx = core.validate_outcome(yx, "yx")
    if gamma <= 0.0 or not math.isfinite(gamma):
        raise ValueError(f"gamma must be finite and > 0, got {gamma!r}")
    if t < 0.0 or tau < 0.0:
        raise ValueError("t and tau must be >= 0")
    denom = 1.0 + yx * math.exp(-gamma * t)
    if abs(denom) <= POSTSELECTION_EPS:
        raise ZeroProbabilityPostselection(
            f"outcome pair with yx={yx:+d} cannot occur at t={t}"
        )
    num = math.exp(-gamma * tau) + yx * 0.5 * (
        math.exp(-gamma * (t + tau)) + math.exp(-gamma * abs(t - tau))
    )
    return num / denom


def lorentz_moment_set(spec: LorentzCouplingSpec, t: float, tau: float) -> core.MomentSet:
    """Ensemble-averaged protocol moments under Cauchy coupling draws.

    The probability table is linear in (f_t, f_tau, f_joint), so the table
    of the realization-averaged moments equals the realization average of
    the tables; each moment is Re lorentz_coherence at the right lag.
    Valid for any omega and polarization, unlike the scalar-gamma forms.
    """
    f_t = lorentz_coherence(spec, t).real
    f_tau = lorentz_coherence(spec, tau).real
    f_joint = 0.5 * (
        lorentz_coherence(spec, t + tau).real + lorentz_coherence(spec, t - tau).real
    )
    return core.MomentSet(f_t=f_t, f_tau=f_tau, f_joint=f_joint)


def lorentz_ensemble_conditional_coherence(
    spec: LorentzCouplingSpec, t: float, tau: float, yx: int
) -> complex:
    """Conditional coherence of the averaged statistics for Cauchy couplings.

    Same ratio as conditional_coherence but built from ensemble-averaged
    branch overlaps; reduces to lorentz_conditional_coherence(gamma, ...)
    when omega = 0.
    """
    yx = core.validate_outcome(yx, "yx")
    denom = 1.0 + yx * lorentz_coherence(spec, t).real
    if abs(denom) <= POSTSELECTION_EPS:
        raise ZeroProbabilityPostselection(
            f"outcome pair with yx={yx:+d} cannot occur at t={t}"
        )
    num = lorentz_coherence(spec, tau) + yx * 0.5 * (
        lorentz_coherence(spec, t + tau) + lorentz_coherence(spec, t - tau).conjugate()
    )
    return num / denom


# ---------------------------------------------------------------------------
# Cauchy-coupling ensemble: Monte Carlo

# Column layout of the ensemble statistics:
# (Re c_t, Re c_tau, Re c_{t+tau}, Re c_{t-tau}, per-realization CPF).
_COL_T, _COL_TAU, _COL_SUM, _COL_DIFF, _COL_CPF = range(5)


def _ensemble_cols(spec: LorentzCouplingSpec, t: float, tau: float):
    n = spec.n_spins
    w_up = abs(spec.alpha) ** 2
    w_dn = abs(spec.beta) ** 2
    half_w = 0.5 * spec.omega
    half_g = 0.5 * spec.gamma

    def sample(rng: np.random.Generator, m: int) -> np.ndarray:
        u = rng.random((m, n))
        gk = (half_w + half_g * np.tan(math.pi * (u - 0.5))) / n
        cols = np.empty((m, 5))
        for j, arg in ((_COL_T, t), (_COL_TAU, tau), (_COL_SUM, t + tau), (_COL_DIFF, t - tau)):
            prod = np.ones(m, dtype=complex)
            for k in range(n):
                ph = np.exp(2j * arg * gk[:, k])
                prod *= w_up * ph + w_dn * np.conj(ph)
            cols[:, j] = prod.real
        cols[:, _COL_CPF] = (
            0.5 * (cols[:, _COL_SUM] + cols[:, _COL_DIFF]) - cols[:, _COL_T] * cols[:, _COL_TAU]
        )
        return cols

    return sample


def _ensemble_stats(
    spec: LorentzCouplingSpec, t: float, tau: float, cfg: McConfig, workers: int
) -> RunningMoments:
    t, tau = float(t), float(tau)
    if not (math.isfinite(t) and math.isfinite(tau)) or t < 0.0 or tau < 0.0:
        raise ValueError("t and tau must be finite and >= 0")
    return collect_moments(_ensemble_cols(spec, t, tau), cfg, workers)


def lorentz_mc_coherence(
    spec: LorentzCouplingSpec, t: float, cfg: McConfig, workers: int = 1
) -> core.Estimate:
    """Ensemble-averaged Re c_t by direct Cauchy sampling."""
    return _ensemble_stats(spec, t, 0.0, cfg, workers).estimate(_COL_T)


def lorentz_mc_moments(
    spec: LorentzCouplingSpec, t: float, tau: float, cfg: McConfig, workers: int = 1
) -> tuple[core.Estimate, core.Estimate, core.Estimate]:
    """Ensemble means of (f(t), f(tau), f_joint): the averaged-table moments."""
    stats = _ensemble_stats(spec, t, tau, cfg, workers)
    m = stats.mean()
    joint = 0.5 * (m[_COL_SUM] + m[_COL_DIFF])
    grad = np.array([0.0, 0.0, 0.5, 0.5, 0.0])
    return (
        stats.estimate(_COL_T),
        stats.estimate(_COL_TAU),
        stats.delta_estimate(joint, grad),
    )


def lorentz_mc_cpf(
    spec: LorentzCouplingSpec,
    t: float,
    tau: float,
    cfg: McConfig,
    workers: int = 1,
    y: int = +1,
) -> core.Estimate:
    """Ensemble CPF in table-first order: average the table, then combine.

    The per-realization probability table is linear in the per-realization
    moments, so the ensemble-averaged table is the table of the averaged
    moments; the estimate applies cpf_from_table to it.  This reproduces the
    closed form lorentz_cpf (for omega = 0), unlike the per-realization
    average below.
    """
    stats = _ensemble_stats(spec, t, tau, cfg, workers)
    m = stats.mean()
    table = core.cpf_probability_table(
        core.MomentSet(
            f_t=m[_COL_T],
            f_tau=m[_COL_TAU],
            f_joint=0.5 * (m[_COL_SUM] + m[_COL_DIFF]),
        ),
        y=y,
    )
    value = core.cpf_from_table(table)
    grad = np.array([-m[_COL_TAU], -m[_COL_T], 0.5, 0.5, 0.0])
    return stats.delta_estimate(value, grad)


def lorentz_mc_cpf_per_realization(
    spec: LorentzCouplingSpec, t: float, tau: float, cfg: McConfig, workers: int = 1
) -> core.Estimate:
    """Negative control: ensemble mean of the per-realization CPF.

    Each fixed-coupling realization has its own deterministic CPF; averaging
    those does NOT commute with averaging the tables.  For N = 1 the
    per-realization CPF is identically zero (product-to-sum identity), so
    this estimator returns 0 +- 0 and does not reproduce lorentz_cpf.
    """
    return _ensemble_stats(spec, t, tau, cfg, workers).estimate(_COL_CPF)


def lorentz_mc_conditional_coherence(
    spec: LorentzCouplingSpec, t: float, tau: float, yx: int, cfg: McConfig, workers: int = 1
) -> core.Estimate:
    """Ensemble conditional coherence (real part) from averaged moments.

    Evaluates [E c_tau + yx (E c_{t+tau} + E conj(c_{t-tau}))/2] /
    [1 + yx E Re c_t] over the Cauchy ensemble, with delta-method error.
    """
    yx = core.validate_outcome(yx, "yx")
    stats = _ensemble_stats(spec, t, tau, cfg, workers)
    m = stats.mean()
    denom = 1.0 + yx * m[_COL_T]
    if abs(denom) <= POSTSELECTION_EPS:
        raise ZeroProbabilityPostselection(
            f"ensemble postselection weight vanishes at t={t}, yx={yx:+d}"
        )
    num = m[_COL_TAU] + yx * 0.5 * (m[_COL_SUM] + m[_COL_DIFF])
    value = num / denom
    grad = np.array(
        [-yx * num / denom**2, 1.0 / denom, yx * 0.5 / denom, yx * 0.5 / denom, 0.0]
    )
    return stats.delta_estimate(value, grad)


# ---------------------------------------------------------------------------
# Dense statevector oracle


def _bath_levels(spec: SpinBathSpec) -> np.ndarray:
    """L[i] = sum_k g_k m_k for bath basis index i (bit k = 0 means spin k up)."""
    n = spec.n_spins
    idx = np.arange(1 << n)
    levels = np.zeros(1 << n)
    for k in range(n):
        m_k = 1.0 - 2.0 * ((idx >> k) & 1)
        levels += spec.couplings[k] * m_k
    return levels


def _bath_product_state(spec: SpinBathSpec) -> np.ndarray:
    """Amplitudes of prod_k (alpha_k |up> + beta_k |down>), spin k on bit k."""
    amp = np.ones(1, dtype=complex)
    for a_k, b_k in zip(spec.alphas, spec.betas):
        amp = np.concatenate([a_k * amp, b_k * amp])
    return amp


def _evolve_diagonal(state: np.ndarray, levels: np.ndarray, dt: float, sign: int) -> np.ndarray:
    """Apply exp(+i sign dt L) to the |+> row and the conjugate to the |-> row."""
    phase = np.exp(1j * sign * dt * levels)
    return np.vstack([state[0] * phase, state[1] * np.conj(phase)])


def _evolve_gatewise(state: np.ndarray, spec: SpinBathSpec, dt: float, sign: int) -> np.ndarray:
    """Same unitary as _evolve_diagonal, built spin by spin (independent path)."""
    out = state.copy()
    dim = out.shape[1]
    idx = np.arange(dim)
    for k in range(spec.n_spins):
        m_k = 1.0 - 2.0 * ((idx >> k) & 1)
        ph = np.exp(1j * sign * dt * spec.couplings[k] * m_k)
        out[0] *= ph
        out[1] *= np.conj(ph)
    return out


def _project_x(state: np.ndarray, outcome: int) -> tuple[float, np.ndarray]:
    """Probability and collapsed state of an x-basis system measurement."""
    bath = (state[0] + outcome * state[1]) / math.sqrt(2.0)
    prob = float(np.vdot(bath, bath).real)
    if prob <= 0.0:
        return 0.0, np.zeros_like(state)
    bath = bath / math.sqrt(prob)
    collapsed = np.vstack([bath / math.sqrt(2.0), outcome * bath / math.sqrt(2.0)])
    return prob, collapsed


def oracle_protocol(
    spec: SpinBathSpec,
    init: SystemInit,
    t: float,
    tau: float,
    y: int,
    *,
    propagator: str = "diagonal",
    phase_sign: int = +1,
) -> core.CpfProbabilityTable:
    """Replay the full three-measurement protocol on the dense statevector.

    Builds the (2, 2^N) system-bath state, applies the first x projector to
    both branches, evolves each by the diagonal propagator over t, applies
    the y projector, evolves over tau, reads out the z probabilities, and
    assembles P(z, x | y) = P(z|y,x) P(y|x) P(x) / P(y).

    propagator selects one of two independent implementations of the same
    unitary ("diagonal" or "gatewise"); phase_sign = -1 runs the conjugate
    phase convention (observable probabilities are invariant).  Raises
    BathTooLarge for N > 14 and ZeroProbabilityPostselection if P(y) = 0.
    """
    if spec.n_spins > ORACLE_MAX_SPINS:
        raise BathTooLarge(
            f"N = {spec.n_spins} exceeds the dense oracle limit {ORACLE_MAX_SPINS}"
        )
    t, tau = float(t), float(tau)
    if t < 0.0 or tau < 0.0:
        raise ValueError("t and tau must be >= 0")
    y = core.validate_outcome(y, "y")
    if propagator == "diagonal":
        levels = _bath_levels(spec)
        evolve = lambda st, dt: _evolve_diagonal(st, levels, dt, phase_sign)
    elif propagator == "gatewise":
        evolve = lambda st, dt: _evolve_gatewise(st, spec, dt, phase_sign)
    else:
        raise ValueError(f"unknown propagator {propagator!r}")

    bath0 = _bath_product_state(spec)
    state = np.vstack([init.a * bath0, init.b * bath0])

    p_x: dict[int, float] = {}
    p_y_given_x: dict[int, float] = {}
    p_z_given_yx: dict[tuple[int, int], float] = {}
    for x in core.OUTCOMES:
        px, st_x = _project_x(state, x)
        p_x[x] = px
        if px == 0.0:
            p_y_given_x[x] = 0.0
            continue
        py, st_y = _project_x(evolve(st_x, t), y)
        p_y_given_x[x] = py
        if py == 0.0:
            continue
        st_final = evolve(st_y, tau)
        for z in core.OUTCOMES:
            pz, _ = _project_x(st_final, z)
            p_z_given_yx[(z, x)] = pz

    p_y = sum(p_y_given_x[x] * p_x[x] for x in core.OUTCOMES)
    if p_y <= 0.0:
        raise ZeroProbabilityPostselection(f"P(y={y:+d}) = 0 for this protocol")

    entries = {}
    for z in core.OUTCOMES:
        for x in core.OUTCOMES:
            if p_y_given_x[x] == 0.0 or p_x[x] == 0.0:
                entries[(z, x)] = 0.0
            else:
                entries[(z, x)] = p_z_given_yx[(z, x)] * p_y_given_x[x] * p_x[x] / p_y
    return core.CpfProbabilityTable(y=y, entries=entries)


def oracle_conditional_coherence(
    spec: SpinBathSpec, init: SystemInit, t: float, tau: float, x: int, y: int
) -> complex:
    """Post-second-measurement bath overlap replayed on the statevector.

    Returns the complex coherence c^{yx} of the state after collapsing on
    (x, then y) and evolving tau; matches conditional_coherence(spec, t,
    tau, x*y) for init = |+>.
    """
    if spec.n_spins > ORACLE_MAX_SPINS:
        raise BathTooLarge(
            f"N = {spec.n_spins} exceeds the dense oracle limit {ORACLE_MAX_SPINS}"
        )
    x = core.validate_outcome(x, "x")
    y = core.validate_outcome(y, "y")
    levels = _bath_levels(spec)
    bath0 = _bath_product_state(spec)
    state = np.vstack([init.a * bath0, init.b * bath0])
    px, st_x = _project_x(state, x)
    if px == 0.0:
        raise ZeroProbabilityPostselection(f"P(x={x:+d}) = 0")
    py, st_y = _project_x(_evolve_diagonal(st_x, levels, t, +1), y)
    if py == 0.0:
        raise ZeroProbabilityPostselection(f"P(y={y:+d}|x={x:+d}) = 0")
    st_final = _evolve_diagonal(st_y, levels, tau, +1)
    return 2.0 * y * complex(np.vdot(st_final[1], st_final[0]))
