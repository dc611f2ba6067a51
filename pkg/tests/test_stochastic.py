"""Monte Carlo estimators: distributional correctness, error bars, streams."""

import math

import numpy as np
import pytest
from scipy import stats as sps

from cpfsim import analytic, core, stochastic
from cpfsim.errors import EmptyPostselection, StepTooCoarse, ZeroProbabilityPostselection
from cpfsim.stochastic import McConfig

WHITE = analytic.White(0.35)
GAUSS = analytic.StaticGauss(0.8)
OU = analytic.ExpCorrGauss(0.9, 1.3)
LORENTZ = analytic.StaticLorentz(0.6, 0.4)
ALL_MODELS = [WHITE, GAUSS, OU, LORENTZ]


def _pull(est: core.Estimate, truth: float) -> float:
    return (est.value - truth) / est.std_error


# ---------------------------------------------------------------------------
# building blocks

def test_phase_pair_validation():
    stochastic.PhasePair(0.1, -0.2)
    with pytest.raises(ValueError):
        stochastic.PhasePair(math.nan, 0.0)


def test_trajectory_probabilities_validation():
    good = stochastic.trajectory_probabilities(stochastic.PhasePair(0.3, 1.1))
    assert good.p_y_given_x[(+1, +1)] == pytest.approx(
        0.5 * (1.0 + math.cos(0.6))
    )
    bad_y = dict(good.p_y_given_x)
    bad_y[(+1, +1)] = 0.9
    with pytest.raises(ValueError):
        stochastic.TrajectoryProbabilities(bad_y, good.p_z_given_yx)
    with pytest.raises(ValueError):
        stochastic.TrajectoryProbabilities(
            {(y, x): 1.5 for y in core.OUTCOMES for x in core.OUTCOMES},
            good.p_z_given_yx,
        )


def test_sample_phase_pair_matches_model_law():
    # static Gaussian noise: theta2/theta1 = tau/t on every draw
    stream = np.random.default_rng(5)
    for _ in range(20):
        pp = stochastic.sample_phase_pair(GAUSS, 2.0, 0.5, stream)
        assert pp.theta2 == pytest.approx(pp.theta1 * 0.25, rel=1e-12)


def test_sample_outcome_triple_is_valid():
    stream = np.random.default_rng(6)
    pp = stochastic.sample_phase_pair(OU, 1.0, 0.7, stream)
    for _ in range(10):
        trip = stochastic.sample_outcome_triple(pp, stream)
        assert trip.x in core.OUTCOMES
        assert trip.y in core.OUTCOMES
        assert trip.z in core.OUTCOMES


# ---------------------------------------------------------------------------
# the sampled triples follow the analytic eight-cell law

def _cell_counts(model, t, tau, n, seed):
    stream = np.random.default_rng(seed)
    counts = {}
    for _ in range(n):
        pp = stochastic.sample_phase_pair(model, t, tau, stream)
        trip = stochastic.sample_outcome_triple(pp, stream)
        key = (trip.x, trip.y, trip.z)
        counts[key] = counts.get(key, 0) + 1
    return counts


def _cell_expected(model, t, tau, n):
    expected = {}
    for y in core.OUTCOMES:
        table = analytic.probability_table(model, t, tau, y)
        for (z, x), p in table.entries.items():
            expected[(x, y, z)] = 0.5 * p * n  # P(y) = 1/2
    return expected


@pytest.mark.parametrize("model", [WHITE, OU])
def test_triple_frequencies_chi_squared(model):
    n = 40_000
    counts = _cell_counts(model, 0.9, 0.6, n, seed=71)
    expected = _cell_expected(model, 0.9, 0.6, n)
    keys = sorted(expected)
    chi2, p = sps.chisquare(
        [counts.get(k, 0) for k in keys], [expected[k] for k in keys]
    )
    assert p > 1e-4, f"chi2 = {chi2}, p = {p}"


def test_triple_frequencies_reject_wrong_model():
    # negative control: the same counts against a misspecified law
    n = 40_000
    counts = _cell_counts(WHITE, 0.9, 0.6, n, seed=71)
    expected = _cell_expected(analytic.White(1.4), 0.9, 0.6, n)
    keys = sorted(expected)
    _, p = sps.chisquare(
        [counts.get(k, 0) for k in keys], [expected[k] for k in keys]
    )
    assert p < 1e-6


# ---------------------------------------------------------------------------
# moment estimators vs closed forms

@pytest.mark.parametrize("model", ALL_MODELS)
def test_mc_moments_match_analytic(model):
    cfg = McConfig(n_trajectories=400_000, seed=90)
    want = analytic.moment_set(model, 1.1, 0.8)
    f_t, f_tau, f_joint = stochastic.mc_moments(model, 1.1, 0.8, cfg)
    assert abs(_pull(f_t, want.f_t)) < 4.0
    assert abs(_pull(f_tau, want.f_tau)) < 4.0
    assert abs(_pull(f_joint, want.f_joint)) < 4.0


def test_mc_moments_stationarity_at_equal_times():
    # both intervals have the same marginal law when t = tau
    cfg = McConfig(n_trajectories=300_000, seed=91)
    f_t, f_tau, _ = stochastic.mc_moments(OU, 1.4, 1.4, cfg)
    want = analytic.first_moment(OU, 1.4)
    assert abs(_pull(f_t, want)) < 4.0
    assert abs(_pull(f_tau, want)) < 4.0


@pytest.mark.parametrize("model", ALL_MODELS)
def test_mc_cpf_semianalytic_matches_analytic(model):
    cfg = McConfig(n_trajectories=400_000, seed=92)
    want = analytic.cpf(model, 0.9, 1.2)
    est = stochastic.mc_cpf_semianalytic(model, 0.9, 1.2, cfg)
    assert abs(_pull(est, want)) < 4.0


def test_mc_conditional_coherence_matches_analytic():
    cfg = McConfig(n_trajectories=400_000, seed=93)
    for model in (GAUSS, OU):
        for yx in (+1, -1):
            want = analytic.conditional_coherence(model, 1.0, 0.7, yx)
            est = stochastic.mc_conditional_coherence(model, 1.0, 0.7, yx, cfg)
            assert abs(_pull(est, want)) < 4.0


def test_mc_conditional_coherence_white_is_memoryless():
    cfg = McConfig(n_trajectories=300_000, seed=94)
    want = analytic.first_moment(WHITE, 0.7)
    for yx in (+1, -1):
        est = stochastic.mc_conditional_coherence(WHITE, 1.0, 0.7, yx, cfg)
        assert abs(_pull(est, want)) < 4.0


def test_mc_cpf_sampling_matches_analytic():
    cfg = McConfig(n_trajectories=400_000, seed=95)
    for model, t, tau, want in (
        (WHITE, 1.0, 0.8, 0.0),
        (GAUSS, 4.0, 4.0, analytic.cpf(GAUSS, 4.0, 4.0)),
        (OU, 1.3, 0.9, analytic.cpf(OU, 1.3, 0.9)),
    ):
        for y_select in (+1, -1):
            est = stochastic.mc_cpf_sampling(model, t, tau, y_select, cfg)
            assert abs(_pull(est, want)) < 4.0
            assert 0 < est.n_samples < cfg.n_trajectories


def test_mc_cpf_sampling_n_samples_is_kept_count():
    cfg = McConfig(n_trajectories=100_000, seed=96)
    est = stochastic.mc_cpf_sampling(WHITE, 0.4, 0.4, +1, cfg)
    # P(y = +1) = 1/2 exactly, so the kept count sits near n/2
    assert abs(est.n_samples - 50_000) < 4 * math.sqrt(25_000)


# ---------------------------------------------------------------------------
# error bars are honest

def test_semianalytic_pulls_are_standard_normal():
    truth = analytic.cpf(OU, 1.0, 1.0)
    pulls = []
    for seed in range(40):
        cfg = McConfig(n_trajectories=20_000, seed=500 + seed)
        pulls.append(_pull(stochastic.mc_cpf_semianalytic(OU, 1.0, 1.0, cfg), truth))
    pulls = np.asarray(pulls)
    within2 = np.mean(np.abs(pulls) < 2.0)
    assert within2 >= 0.8
    assert 0.6 < pulls.std(ddof=1) < 1.45
    assert abs(pulls.mean()) < 3.0 / math.sqrt(len(pulls))


def test_sampling_bootstrap_error_bar_is_honest():
    truth = analytic.cpf(GAUSS, 1.0, 1.0)
    pulls = []
    for seed in range(40):
        cfg = McConfig(n_trajectories=20_000, seed=800 + seed)
        est = stochastic.mc_cpf_sampling(GAUSS, 1.0, 1.0, +1, cfg)
        pulls.append((est.value - truth) / est.std_error)
    pulls = np.asarray(pulls)
    assert np.mean(np.abs(pulls) < 2.0) >= 0.8
    assert 0.6 < pulls.std(ddof=1) < 1.45


def test_standard_error_scales_as_inverse_sqrt_n():
    small = stochastic.mc_cpf_semianalytic(
        OU, 1.0, 1.0, McConfig(n_trajectories=40_000, seed=7)
    )
    large = stochastic.mc_cpf_semianalytic(
        OU, 1.0, 1.0, McConfig(n_trajectories=400_000, seed=7)
    )
    ratio = small.std_error / large.std_error
    assert ratio == pytest.approx(math.sqrt(10.0), rel=0.2)


# ---------------------------------------------------------------------------
# reproducibility contract

def test_worker_count_does_not_change_results():
    cfg = McConfig(n_trajectories=96_000, seed=41, chunk_size=16_000)
    for fn in (
        lambda w: stochastic.mc_cpf_semianalytic(OU, 1.0, 0.8, cfg, workers=w),
        lambda w: stochastic.mc_cpf_sampling(OU, 1.0, 0.8, -1, cfg, workers=w),
        lambda w: stochastic.ou_path_reference(OU, 0.6, 0.4, cfg, workers=w),
    ):
        base = fn(1)
        assert fn(2) == base
        assert fn(4) == base


def test_chunk_size_is_part_of_the_stream_layout():
    a = stochastic.mc_cpf_semianalytic(
        OU, 1.0, 0.8, McConfig(n_trajectories=64_000, seed=4, chunk_size=8_000)
    )
    b = stochastic.mc_cpf_semianalytic(
        OU, 1.0, 0.8, McConfig(n_trajectories=64_000, seed=4, chunk_size=16_000)
    )
    c = stochastic.mc_cpf_semianalytic(
        OU, 1.0, 0.8, McConfig(n_trajectories=64_000, seed=4, chunk_size=8_000)
    )
    assert a != b
    assert a == c


def test_mc_config_validation():
    with pytest.raises(ValueError):
        McConfig(n_trajectories=0)
    with pytest.raises(ValueError):
        McConfig(n_trajectories=10, chunk_size=11)
    with pytest.raises(ValueError):
        McConfig(n_trajectories=10, path_dt=-0.1)
    assert McConfig(n_trajectories=10).resolved_chunk_size == 10


# ---------------------------------------------------------------------------
# failure modes

def test_empty_postselection_raises():
    # with a single trajectory some seed leaves the y = +1 bin empty
    raised = False
    for seed in range(64):
        try:
            stochastic.mc_cpf_sampling(
                WHITE, 0.5, 0.5, +1, McConfig(n_trajectories=1, seed=seed)
            )
        except EmptyPostselection:
            raised = True
            break
    assert raised


def test_conditional_coherence_rejects_dead_branch():
    # t = 0 pins the middle outcome to y = x, so yx = -1 has zero weight
    cfg = McConfig(n_trajectories=1_000, seed=3)
    with pytest.raises(ZeroProbabilityPostselection):
        stochastic.mc_conditional_coherence(WHITE, 0.0, 0.5, -1, cfg)


def test_negative_times_rejected():
    cfg = McConfig(n_trajectories=100, seed=0)
    with pytest.raises(ValueError):
        stochastic.mc_moments(WHITE, -1.0, 0.5, cfg)
    with pytest.raises(ValueError):
        stochastic.mc_cpf_sampling(WHITE, 0.5, -0.5, +1, cfg)


def test_ou_path_reference_input_checks():
    with pytest.raises(TypeError):
        stochastic.ou_path_reference(WHITE, 1.0, 1.0, McConfig(n_trajectories=10))
    with pytest.raises(StepTooCoarse):
        stochastic.ou_path_reference(
            OU, 1.0, 1.0, McConfig(n_trajectories=10, path_dt=OU.tau_c)
        )


# ---------------------------------------------------------------------------
# discretized-path reference vs its exact discrete law
#
# The one-step update is distributionally exact on the grid, so the phase
# integrals are Gaussian with covariance w^T K w computed from the trapezoid
# weights and the OU kernel on the very grid the sampler uses.  That gives a
# sharp target (MC error only); the continuum formulas then quantify the
# O(dt^2) quadrature bias separately.

def _discrete_moments(model, t, tau, dt):
    g, tc = model.g, model.tau_c

    def seg(length):
        if length == 0.0:
            return 0, 0.0
        n = max(1, math.ceil(length / dt))
        return n, length / n

    n1, dt1 = seg(t)
    n2, dt2 = seg(tau)
    s = np.concatenate([
        np.linspace(0.0, t, n1 + 1),
        t + dt2 * np.arange(1, n2 + 1),
    ])
    w1 = np.zeros(len(s))
    w1[: n1 + 1] = dt1
    w1[0] *= 0.5
    w1[n1] *= 0.5
    w2 = np.zeros(len(s))
    w2[n1:] = dt2
    w2[n1] *= 0.5
    w2[-1] *= 0.5
    kernel = g * g * np.exp(-np.abs(s[:, None] - s[None, :]) / tc)
    v1 = float(w1 @ kernel @ w1)
    v2 = float(w2 @ kernel @ w2)
    cov = float(w1 @ kernel @ w2)
    joint = 0.5 * (
        math.exp(-2.0 * (v1 + v2 + 2.0 * cov)) + math.exp(-2.0 * (v1 + v2 - 2.0 * cov))
    )
    return math.exp(-2.0 * v1), math.exp(-2.0 * v2), joint


def test_ou_path_reference_matches_exact_discrete_law():
    t, tau, dt = 1.0, 0.8, 0.02
    cfg = McConfig(n_trajectories=400_000, seed=61, path_dt=dt)
    want = _discrete_moments(OU, t, tau, dt)
    got = stochastic.ou_path_reference(OU, t, tau, cfg)
    for est, target in zip(got, want):
        assert abs(_pull(est, target)) < 4.0


def test_ou_path_quadrature_bias_is_second_order():
    t, tau = 1.0, 0.8
    cont = analytic.joint_moment(OU, t, tau)
    bias = abs(_discrete_moments(OU, t, tau, 0.02)[2] - cont)
    bias_half = abs(_discrete_moments(OU, t, tau, 0.01)[2] - cont)
    assert bias / bias_half == pytest.approx(4.0, rel=0.15)
    # default step keeps the bias well under the MC error of a typical run
    default_dt = min(OU.tau_c, 1.0 / OU.g) / 50.0
    assert abs(_discrete_moments(OU, t, tau, default_dt)[2] - cont) < 1e-4


def test_ou_path_reference_agrees_with_analytic_moments():
    cfg = McConfig(n_trajectories=200_000, seed=62)
    want = analytic.moment_set(OU, 1.0, 0.8)
    f_t, f_tau, f_joint = stochastic.ou_path_reference(OU, 1.0, 0.8, cfg)
    assert abs(f_t.value - want.f_t) < 4.0 * f_t.std_error + 1e-4
    assert abs(f_tau.value - want.f_tau) < 4.0 * f_tau.std_error + 1e-4
    assert abs(f_joint.value - want.f_joint) < 4.0 * f_joint.std_error + 1e-4


def test_ou_path_reference_zero_time_segments():
    cfg = McConfig(n_trajectories=50_000, seed=63)
    f_t, f_tau, f_joint = stochastic.ou_path_reference(OU, 0.0, 0.5, cfg)
    assert f_t.value == 1.0 and f_t.std_error == 0.0
    assert abs(f_tau.value - analytic.first_moment(OU, 0.5)) < 4.0 * f_tau.std_error + 1e-4
    assert f_joint.value == f_tau.value
