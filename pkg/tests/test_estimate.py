import math

import numpy as np
import pytest

from clustersense import estimate as est
from clustersense import mbqc, probes, simcore
from clustersense.estimate import (
    BayesState,
    EstimateError,
    MSEValidityWarning,
    Povm,
    bayes_round,
    bayes_variance_quadrature,
    classical_parallel_variance,
    classical_parallel_variance_quadrature,
    dephased_fisher_information,
    fisher_information,
    flat_prior,
    frequency_round,
    gamma_eta,
    gaussian_prior,
    golden_section_minimize,
    holevo_bayes_round,
    holevo_variance,
    mse_limit_curve,
    noisy_local_equivalence_check,
    optimize_tau,
    optimize_tau_classical,
    parity_probs_fn,
    parity_strategy,
    product_probs_fn,
    qfi_pure,
    qfi_statevector,
    qft_phase_variance,
    qft_povm,
    single_qubit_optimal_povm,
    van_trees_bound,
    van_trees_general,
    wrapped_gaussian_prior,
)

PLUS_PROBE = probes.SubspaceState(1, np.array([1.0, 1.0], dtype=complex) / math.sqrt(2))


# ---------------------------------------------------------------------------
# local estimation

def test_parity_strategy_values():
    p_plus, p_minus, variance = parity_strategy(3, math.pi / 3)
    assert p_plus == pytest.approx(math.cos(math.pi / 2) ** 2, abs=1e-15)
    assert p_plus == pytest.approx(0.0, abs=1e-15)
    assert p_minus == pytest.approx(1.0, abs=1e-15)
    assert parity_strategy(1, 0.0)[0] == pytest.approx(1.0)
    for N in (1, 2, 7):
        assert parity_strategy(N, 0.4)[2] == pytest.approx(1.0 / N**2)


def test_fisher_information_of_parity_is_N_squared():
    for N in range(1, 9):
        fi = fisher_information(parity_probs_fn(N), math.pi / (3 * N))
        assert fi == pytest.approx(N**2, rel=1e-6)


def test_fisher_information_of_product_probe_is_N():
    fi = fisher_information(product_probs_fn(5), 0.0)
    assert fi == pytest.approx(5.0, rel=1e-6)


def test_fisher_information_constant_distribution_is_zero():
    assert fisher_information(lambda theta: np.array([0.25, 0.75]), 0.3) == 0.0


def test_fisher_information_rejects_negative_probabilities():
    with pytest.raises(EstimateError):
        fisher_information(lambda theta: np.array([-0.1, 1.1]), 0.0)


def test_finite_difference_matches_analytic_derivative():
    # for the parity strategy dp/dtheta is -+ N sin(N theta) / 2
    N, theta = 5, 0.37
    p_plus, p_minus, _ = parity_strategy(N, theta)
    dp = N * math.sin(N * theta) / 2
    analytic = dp**2 / p_plus + dp**2 / p_minus
    numeric = fisher_information(parity_probs_fn(N), theta, step=1e-5)
    assert numeric == pytest.approx(analytic, rel=1e-5)


def test_qfi_pure_examples():
    for N in (1, 4, 9):
        assert qfi_pure(probes.ghz_subspace(N)) == pytest.approx(N**2, abs=1e-10)
    basis = np.zeros(5, dtype=complex)
    basis[2] = 1.0
    assert qfi_pure(probes.SubspaceState(4, basis)) == pytest.approx(0.0, abs=1e-12)
    for N in (3, 6, 12):
        assert qfi_pure(probes.sine_coefficients(N)) >= N


def test_qfi_statevector_product_state():
    assert qfi_statevector(simcore.plus_state(5)) == pytest.approx(5.0, abs=1e-10)


# ---------------------------------------------------------------------------
# POVMs

def test_qft_povm_completeness_and_size():
    for N in (1, 4, 9):
        povm = qft_povm(N)
        assert len(povm.effects) == N + 2
        total = sum(povm.effects)
        np.testing.assert_allclose(total, np.eye(N + 1), atol=1e-10)


def test_qft_povm_single_qubit_effects():
    povm = qft_povm(1)
    plus = np.full((2, 2), 0.5)
    minus = np.array([[0.5, -0.5], [-0.5, 0.5]])
    np.testing.assert_allclose(povm.effects[0], plus, atol=1e-12)
    np.testing.assert_allclose(povm.effects[1], minus, atol=1e-12)
    np.testing.assert_allclose(povm.effects[2], np.zeros((2, 2)), atol=1e-15)


def test_probe_weight_never_reaches_completion_effect():
    N = 6
    povm = qft_povm(N)
    probs = povm.outcome_probabilities(est.encoded_rho(probes.sine_coefficients(N), 0.83))
    assert probs[-1] < 1e-12
    assert np.sum(probs) == pytest.approx(1.0, abs=1e-10)


def test_povm_validation():
    with pytest.raises(EstimateError):
        Povm((np.eye(2) * 0.5,), ("half",))
    with pytest.raises(EstimateError):
        Povm((np.diag([1.5, 1.0]), np.diag([-0.5, 0.0])), ("a", "b"))


# ---------------------------------------------------------------------------
# Gamma / eta and the Bayes round

def test_gamma_dephases_to_diagonal_for_wide_priors():
    probe = probes.sine_coefficients(3)
    gamma, _ = gamma_eta(gaussian_prior(50.0), probe)
    np.testing.assert_allclose(gamma, np.diag(probe.probabilities()), atol=1e-12)


def test_gamma_eta_match_quadrature():
    probe = probes.sine_coefficients(2)
    prior = gaussian_prior(0.3, theta0=0.4)
    gamma, eta = gamma_eta(prior, probe)
    n = np.arange(3)
    for i in range(3):
        for j in range(3):
            kappa = n[i] - n[j]
            char = est._quad_complex(
                lambda t: float(prior.pdf(t)) * np.exp(-1j * kappa * t),
                prior.theta0 - 8 * prior.sigma, prior.theta0 + 8 * prior.sigma)
            first = est._quad_complex(
                lambda t: t * float(prior.pdf(t)) * np.exp(-1j * kappa * t),
                prior.theta0 - 8 * prior.sigma, prior.theta0 + 8 * prior.sigma)
            outer = probe.coeffs[i] * probe.coeffs[j].conjugate()
            assert gamma[i, j] == pytest.approx(outer * char, abs=1e-8)
            assert eta[i, j] == pytest.approx(outer * first, abs=1e-8)


def test_gamma_properties():
    probe = probes.sine_coefficients(4)
    prior = gaussian_prior(0.5, theta0=0.9)
    gamma, eta = gamma_eta(prior, probe)
    np.testing.assert_allclose(gamma, gamma.conj().T, atol=1e-12)
    np.testing.assert_allclose(eta, eta.conj().T, atol=1e-12)
    assert np.trace(gamma).real == pytest.approx(1.0, abs=1e-10)
    assert min(np.linalg.eigvalsh(gamma)) >= -1e-12
    # the estimator averages back to the prior mean
    assert np.trace(eta).real == pytest.approx(prior.theta0, abs=1e-10)


def test_wrapped_gamma_matches_gaussian_harmonics():
    # integer harmonics of the wrapped Gaussian equal the plain Gaussian ones
    probe = probes.sine_coefficients(3)
    wrapped, _ = gamma_eta(wrapped_gaussian_prior(0.6, 0.2), probe)
    plain, _ = gamma_eta(gaussian_prior(0.6, 0.2), probe)
    np.testing.assert_allclose(wrapped, plain, atol=1e-8)


@pytest.mark.parametrize("sigma", [0.1, 0.5, 1.0])
def test_single_qubit_closed_forms(sigma):
    state = BayesState(gaussian_prior(sigma), PLUS_PROBE, single_qubit_optimal_povm(0.0))
    result = bayes_round(state)
    expected_estimate = sigma**2 * math.exp(-(sigma**2) / 2)
    expected_vbar = sigma**2 * (1 - sigma**2 * math.exp(-(sigma**2)))
    np.testing.assert_allclose(np.sort(result.estimates),
                               [-expected_estimate, expected_estimate], atol=1e-8)
    assert result.avg_posterior_variance == pytest.approx(expected_vbar, abs=1e-8)
    np.testing.assert_allclose(result.probs, [0.5, 0.5], atol=1e-12)


def test_single_qubit_closed_forms_with_offset_mean():
    sigma, theta0 = 0.5, 1.1
    state = BayesState(gaussian_prior(sigma, theta0), PLUS_PROBE,
                       single_qubit_optimal_povm(theta0))
    result = bayes_round(state)
    shift = sigma**2 * math.exp(-(sigma**2) / 2)
    np.testing.assert_allclose(np.sort(result.estimates),
                               [theta0 - shift, theta0 + shift], atol=1e-8)
    assert result.avg_posterior_variance == pytest.approx(
        sigma**2 * (1 - sigma**2 * math.exp(-(sigma**2))), abs=1e-8)


def test_sine_qft_beats_classical_bound_at_six_qubits():
    vbar = est.average_posterior_variance(gaussian_prior(0.5), probes.sine_coefficients(6),
                                          qft_povm(6))
    assert 1.0 / vbar > 6 + 1 / 0.5**2


def test_posterior_never_wider_than_prior():
    for N in (1, 3, 7):
        for sigma in (0.2, 0.6, 1.0):
            vbar = est.average_posterior_variance(gaussian_prior(sigma),
                                                  probes.sine_coefficients(N), qft_povm(N))
            assert 0.0 <= vbar <= sigma**2


def test_bayes_round_quadrature_oracle_agreement():
    for N in (2, 5):
        probe = probes.sine_coefficients(N)
        povm = qft_povm(N)
        for sigma in (0.1, 0.5, 1.0):
            closed = est.average_posterior_variance(gaussian_prior(sigma), probe, povm)
            quad = bayes_variance_quadrature(gaussian_prior(sigma), probe, povm)
            assert closed == pytest.approx(quad, rel=1e-6)


def test_fast_qft_path_matches_generic_route():
    for N in (2, 6, 11):
        for sigma in (0.2, 0.8):
            fast = qft_phase_variance(N, sigma, theta0=0.3)
            via_povm = est.average_posterior_variance(
                gaussian_prior(sigma, 0.3), probes.sine_coefficients(N), qft_povm(N))
            assert fast == pytest.approx(via_povm, rel=1e-12)


def test_mse_warning_for_wide_priors():
    with pytest.warns(MSEValidityWarning):
        est.average_posterior_variance(gaussian_prior(1.2), PLUS_PROBE,
                                       single_qubit_optimal_povm())


def test_outcome_pruning_limit():
    # an effect whose weight vanishes contributes nothing in the limit
    base = np.diag([1.0, 0.0]).astype(complex)
    rest = np.diag([0.0, 1.0]).astype(complex)
    povm = Povm((base, rest), ("0", "1"))
    prior = gaussian_prior(0.4)
    vbars = []
    for eps in (1e-4, 1e-6, 0.0):
        coeffs = np.array([math.sqrt(1 - eps**2), eps], dtype=complex)
        vbars.append(est.average_posterior_variance(prior, probes.SubspaceState(1, coeffs), povm))
    assert vbars[1] == pytest.approx(vbars[2], abs=1e-8)
    assert vbars[0] == pytest.approx(vbars[2], abs=1e-4)


# ---------------------------------------------------------------------------
# Holevo

def test_holevo_variance_wrapped_gaussian():
    assert holevo_variance(wrapped_gaussian_prior(1.0)) == pytest.approx(math.e - 1, rel=1e-9)


def test_holevo_variance_point_mass_and_flat():
    assert holevo_variance(([0.4], [1.0])) == pytest.approx(0.0, abs=1e-12)
    assert holevo_variance(flat_prior()) == math.inf
    assert holevo_variance(lambda t: 1.0 / (2 * math.pi)) == math.inf


def test_holevo_round_improves_on_near_flat_prior():
    prior = wrapped_gaussian_prior(math.pi)
    assert holevo_bayes_round(1, prior) < holevo_variance(prior)


def test_holevo_round_monotone_in_N():
    prior = wrapped_gaussian_prior(math.pi / 8)
    values = [holevo_bayes_round(N, prior) for N in range(10, 101, 10)]
    gains = [1.0 / v for v in values]
    assert all(b > a for a, b in zip(gains, gains[1:]))


def test_holevo_outcome_distribution_shifts_with_prior_mean():
    N = 4
    base = est.holevo_outcome_probabilities(N, wrapped_gaussian_prior(0.7, 0.3))
    shifted = est.holevo_outcome_probabilities(
        N, wrapped_gaussian_prior(0.7, 0.3 + 2 * math.pi / (N + 1)))
    np.testing.assert_allclose(np.roll(base[: N + 1], -1), shifted[: N + 1], atol=1e-10)


def test_holevo_round_with_explicit_povm_matches_fft_path():
    N = 3
    prior = wrapped_gaussian_prior(0.5)
    fast = holevo_bayes_round(N, prior)
    generic = holevo_bayes_round(N, prior, povm=qft_povm(N))
    assert fast == pytest.approx(generic, rel=1e-9)


def test_wrapped_bayes_round_carries_holevo_fields():
    N = 3
    prior = wrapped_gaussian_prior(0.5)
    result = bayes_round(BayesState(prior, probes.sine_coefficients(N), qft_povm(N)))
    assert result.avg_holevo_variance is not None
    assert result.avg_holevo_variance == pytest.approx(holevo_bayes_round(N, prior), rel=1e-7)
    live = result.probs > est.PROB_FLOOR
    assert np.all(result.holevo_variances[live] >= 0)
    # gaussian rounds do not populate the circular fields
    plain = bayes_round(BayesState(gaussian_prior(0.5), probes.sine_coefficients(N), qft_povm(N)))
    assert plain.avg_holevo_variance is None


# ---------------------------------------------------------------------------
# classical baselines and bounds

def test_signed_expansion_matches_double_binomial_sum():
    # the Krawtchouk recurrence must reproduce the literal double sum
    # sum_{k+k'=s} C(N-m,k) C(m,k') (-1)^k'
    for N in (1, 2, 5, 9, 16):
        for m in range(N + 1):
            direct = [
                sum((-1) ** kp * math.comb(m, kp) * math.comb(N - m, s - kp)
                    for kp in range(max(0, s - (N - m)), min(m, s) + 1))
                for s in range(N + 1)
            ]
            assert est._signed_expansion(N, m) == direct


def test_classical_parallel_single_qubit_closed_form():
    for sigma in (0.1, 0.5, 1.0):
        expected = sigma**2 * (1 - sigma**2 * math.exp(-(sigma**2)))
        assert classical_parallel_variance(1, sigma) == pytest.approx(expected, rel=1e-12)


def test_classical_parallel_matches_quadrature_oracle():
    for sigma in (0.1, 0.5, 1.0):
        for N in (2, 6, 10):
            closed = classical_parallel_variance(N, sigma)
            quad = classical_parallel_variance_quadrature(N, sigma)
            assert closed == pytest.approx(quad, rel=1e-6)


def test_classical_parallel_mean_independence():
    closed = classical_parallel_variance(4, 0.35)
    for theta0 in (0.0, 0.7, 2.9):
        quad = classical_parallel_variance_quadrature(4, 0.35, theta0=theta0)
        assert quad == pytest.approx(closed, abs=1e-10)


def test_classical_parallel_range_checks():
    with pytest.raises(EstimateError):
        classical_parallel_variance(0, 0.5)
    with pytest.raises(EstimateError):
        classical_parallel_variance(4, 2.0)
    with pytest.raises(EstimateError):
        classical_parallel_variance(est.CLASSICAL_PARALLEL_N_CAP + 1, 0.5)


def test_classical_parallel_dominates_van_trees_bound():
    for sigma in (0.1, 0.4, 0.8, 1.2):
        for N in (1, 3, 10, 40):
            assert classical_parallel_variance(N, sigma) >= van_trees_bound(N, sigma) - 1e-14


def test_van_trees_values():
    assert van_trees_bound(100, 0.1) == pytest.approx(0.005, rel=1e-12)
    assert van_trees_bound(0, 0.3) == pytest.approx(0.09, rel=1e-12)
    assert gaussian_prior(0.2).fisher_information() == pytest.approx(25.0, rel=1e-12)
    assert van_trees_general(25.0, 16.0) == pytest.approx(1.0 / 41.0, rel=1e-12)


def test_mse_limit_curve():
    values = mse_limit_curve([0.2, 5 * math.pi / 4])
    assert values[0] < 1e-6
    assert values[1] > 0.9
    grid = np.linspace(math.pi / 2, 5 * math.pi / 4, 200)
    curve = mse_limit_curve(grid)
    assert np.any(curve < 0.5) and np.any(curve > 0.5)


# ---------------------------------------------------------------------------
# noisy-local equivalence

def test_noisy_local_equivalence():
    residual = noisy_local_equivalence_check(1, 0.3, PLUS_PROBE, single_qubit_optimal_povm(0.0))
    assert residual < 1e-8
    residual = noisy_local_equivalence_check(4, 0.8, probes.sine_coefficients(4), qft_povm(4))
    assert residual < 1e-8
    assert noisy_local_equivalence_check(1, 0.0, PLUS_PROBE,
                                         single_qubit_optimal_povm(0.0)) == 0.0


def test_dephased_fisher_matches_central_differences():
    probe = probes.sine_coefficients(3)
    povm = qft_povm(3)
    sigma, theta = 0.4, 0.2

    def probs(t):
        return povm.outcome_probabilities(est.dephased_rho(probe, sigma, t))

    analytic = dephased_fisher_information(probe, povm, sigma, theta)
    numeric = fisher_information(probs, theta, step=1e-5)
    assert numeric == pytest.approx(analytic, rel=1e-5)


# ---------------------------------------------------------------------------
# frequency estimation

def test_frequency_round_is_scale_free_in_delta():
    probe = probes.sine_coefficients(3)
    povm = qft_povm(3)
    values = [frequency_round(3, delta, 0.7, probe, povm) for delta in (0.1, 1.0, 10.0)]
    assert max(values) - min(values) < 1e-12


def test_frequency_round_equals_phase_at_matched_width():
    for N in (2, 5):
        probe = probes.sine_coefficients(N)
        povm = qft_povm(N)
        for width in (0.3, 0.8):
            freq = frequency_round(N, 1.0, width, probe, povm)
            phase = est.average_posterior_variance(gaussian_prior(width), probe, povm)
            assert freq == pytest.approx(phase / width**2, rel=1e-12)


def test_frequency_round_requires_positive_tau():
    with pytest.raises(EstimateError):
        frequency_round(2, 1.0, 0.0, probes.sine_coefficients(2), qft_povm(2))


def test_optimize_tau_quantum_beats_fixed_tau():
    N = 6
    probe = probes.sine_coefficients(N)
    povm = qft_povm(N)
    optimum = optimize_tau(N, 1.0, probe, povm)
    assert not optimum.boundary
    assert optimum.vbar <= frequency_round(N, 1.0, 1.0, probe, povm) + 1e-12
    assert optimum.vbar <= 1.0


def test_optimize_tau_classical_single_qubit():
    # 1 - tau^2 e^{-tau^2} over tau^2 is minimized at tau = 1
    optimum = optimize_tau_classical(1)
    assert optimum.tau == pytest.approx(1.0, abs=1e-4)
    assert 1.0 / optimum.vbar == pytest.approx(1.0 / (1.0 - math.exp(-1.0)), rel=1e-6)
    assert not optimum.boundary


def test_golden_section_minimize():
    x, fx = golden_section_minimize(lambda t: (t - 1.3) ** 2 + 2.0, 0.0, 4.0, tol=1e-8)
    assert x == pytest.approx(1.3, abs=1e-6)
    assert fx == pytest.approx(2.0, abs=1e-12)


# ---------------------------------------------------------------------------
# priors

def test_wrapped_prior_normalization():
    prior = wrapped_gaussian_prior(1.3, theta0=0.4)
    total = est._quad(lambda t: float(prior.pdf(t)), -math.pi, math.pi)
    assert total == pytest.approx(1.0, abs=1e-10)


def test_prior_validation():
    with pytest.raises(EstimateError):
        est.Prior("gaussian", 0.0, 0.0)
    with pytest.raises(EstimateError):
        est.Prior("triangle", 0.0, 1.0)


def test_flat_prior_gamma_is_diagonal():
    probe = probes.sine_coefficients(2)
    gamma, _ = gamma_eta(flat_prior(), probe)
    np.testing.assert_allclose(gamma, np.diag(probe.probabilities()), atol=1e-10)
