"""Local and Bayesian estimation on the unary-encoded probe subspace.

Phase conventions: the generator acts as H |n>_un = (n - N/2) |n>_un, the
encoding is exp(-i theta H), so a probe with coefficients psi_n picks up
relative phases e^{-i n theta}.  All operators on the subspace are plain
(N+1) x (N+1) matrices in the |n>_un basis.

Gaussian-prior quantities have closed forms built from the characteristic
function E[e^{-i k theta}]; everything else integrates the prior
numerically.  The optimal-parallel classical strategy is evaluated from its
exact combinatorial sums, done in fixed high precision because two nested
alternating binomial sums cancel far beyond double precision at large N.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import mpmath
import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate
from scipy.special import xlogy

from .probes import SubspaceState, sine_coefficients
from .simcore import StateVector

PROB_FLOOR = 1e-14
CLASSICAL_PARALLEL_N_CAP = 256


class EstimateError(Exception):
    pass


class QuadratureError(EstimateError):
    """An adaptive integral failed to reach the requested tolerance."""


class MSEValidityWarning(UserWarning):
    """Mean-square-error results are unreliable for priors wider than 1."""


# ---------------------------------------------------------------------------
# Numerics helpers

def _quad(f, a: float, b: float, rtol: float = 1e-9) -> float:
    value, err = integrate.quad(f, a, b, epsabs=1e-13, epsrel=rtol, limit=400)
    if err > 1e-8 * max(1.0, abs(value)):
        raise QuadratureError(f"integral error estimate {err:.2e} too large for value {value:.6e}")
    return value


def _quad_complex(f, a: float, b: float, rtol: float = 1e-9) -> complex:
    re = _quad(lambda t: f(t).real, a, b, rtol)
    im = _quad(lambda t: f(t).imag, a, b, rtol)
    return re + 1j * im


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_minimize(f, a: float, b: float, tol: float = 1e-6) -> tuple[float, float]:
    """Locate the minimum of a unimodal f on [a, b] to within tol."""
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    x = (a + b) / 2
    return x, f(x)


# ---------------------------------------------------------------------------
# Priors

@dataclass(frozen=True)
class Prior:
    """Gaussian / wrapped-Gaussian / flat prior with mean theta0 and width sigma.

    The wrapped density lives on [-pi, pi]; image terms are kept while
    |2 pi q| <= pi + 10 sigma and the truncated sum is renormalized.
    """

    kind: str
    theta0: float = 0.0
    sigma: float = 0.0
    _norm: float = field(default=1.0, init=False, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in ("gaussian", "wrapped_gaussian", "flat"):
            raise EstimateError(f"unknown prior kind {self.kind!r}")
        if self.kind != "flat" and not self.sigma > 0:
            raise EstimateError("sigma must be positive")
        if self.kind == "wrapped_gaussian":
            raw = _quad(lambda t: float(self._wrapped_sum(np.asarray(t))), -math.pi, math.pi)
            object.__setattr__(self, "_norm", raw)

    def _wrapped_sum(self, theta: np.ndarray) -> np.ndarray:
        q_max = math.ceil((math.pi + 10 * self.sigma) / (2 * math.pi))
        total = np.zeros_like(theta, dtype=float)
        for q in range(-q_max, q_max + 1):
            total = total + np.exp(
                -((theta - self.theta0 + 2 * math.pi * q) ** 2) / (2 * self.sigma**2))
        return total / (math.sqrt(2 * math.pi) * self.sigma)

    def pdf(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.kind == "gaussian":
            return np.exp(-((theta - self.theta0) ** 2) / (2 * self.sigma**2)) / (
                math.sqrt(2 * math.pi) * self.sigma)
        if self.kind == "wrapped_gaussian":
            return self._wrapped_sum(theta) / self._norm
        return np.full_like(theta, 1.0 / (2 * math.pi))

    def support(self) -> tuple[float, float]:
        if self.kind == "gaussian":
            return self.theta0 - 10 * self.sigma, self.theta0 + 10 * self.sigma
        return -math.pi, math.pi

    def fisher_information(self) -> float:
        """I(p) = E[(d log p / d theta)^2]; 1/sigma^2 for a Gaussian."""
        if self.kind == "gaussian":
            return 1.0 / self.sigma**2
        if self.kind == "flat":
            return 0.0
        eps = 1e-6
        lo, hi = self.support()

        def integrand(t):
            p = float(self.pdf(t))
            dp = (float(self.pdf(t + eps)) - float(self.pdf(t - eps))) / (2 * eps)
            return dp**2 / p if p > PROB_FLOOR else 0.0

        return _quad(integrand, lo, hi, rtol=1e-7)

    def variance(self) -> float:
        if self.kind == "gaussian":
            return self.sigma**2
        lo, hi = self.support()
        mean = _quad(lambda t: t * float(self.pdf(t)), lo, hi)
        return _quad(lambda t: (t - mean) ** 2 * float(self.pdf(t)), lo, hi)


def gaussian_prior(sigma: float, theta0: float = 0.0) -> Prior:
    return Prior("gaussian", theta0, sigma)


def wrapped_gaussian_prior(sigma: float, theta0: float = 0.0) -> Prior:
    return Prior("wrapped_gaussian", theta0, sigma)


def flat_prior() -> Prior:
    return Prior("flat")


# ---------------------------------------------------------------------------
# POVMs on the unary subspace

@dataclass(frozen=True)
class Povm:
    """Positive effects on the (N+1)-dimensional subspace, summing to 1."""

    effects: tuple[np.ndarray, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        effects = tuple(np.asarray(e, dtype=complex) for e in self.effects)
        dim = effects[0].shape[0]
        if len(self.labels) != len(effects):
            raise EstimateError("one label per effect required")
        total = np.zeros((dim, dim), dtype=complex)
        for e in effects:
            if e.shape != (dim, dim):
                raise EstimateError("effects must share one square shape")
            if np.max(np.abs(e - e.conj().T)) > 1e-10:
                raise EstimateError("effect is not Hermitian")
            if np.min(np.linalg.eigvalsh(e)) < -1e-10:
                raise EstimateError("effect is not positive semidefinite")
            total += e
        if np.max(np.abs(total - np.eye(dim))) > 1e-10:
            raise EstimateError("effects do not sum to the identity")
        for e in effects:
            e.setflags(write=False)
        object.__setattr__(self, "effects", effects)
        stacked = np.stack(effects)
        stacked.setflags(write=False)
        object.__setattr__(self, "_stacked", stacked)

    @property
    def dim(self) -> int:
        return self.effects[0].shape[0]

    def stacked(self) -> np.ndarray:
        return self._stacked

    def outcome_probabilities(self, rho: np.ndarray) -> np.ndarray:
        return np.einsum("kij,ji->k", self.stacked(), rho).real


def qft_povm(N: int) -> Povm:
    """Fourier-basis projectors |e_k><e_k| for k = 0..N plus the zero
    completion effect for the subspace-orthogonal outcome (never fires for
    states inside the subspace)."""
    if N < 1:
        raise EstimateError("N must be >= 1")
    n = np.arange(N + 1)
    effects = []
    for k in range(N + 1):
        vec = np.exp(1j * n * 2 * math.pi * k / (N + 1)) / math.sqrt(N + 1)
        effects.append(np.outer(vec, vec.conj()))
    effects.append(np.zeros((N + 1, N + 1), dtype=complex))
    labels = tuple(f"k={k}" for k in range(N + 1)) + ("overflow",)
    return Povm(tuple(effects), labels)


def single_qubit_optimal_povm(theta0: float = 0.0) -> Povm:
    """Rotated-X projectors, the optimal single-qubit Bayesian measurement
    for a Gaussian prior centered at theta0."""
    effects = []
    phi = theta0 + math.pi / 2
    for sign in (+1.0, -1.0):
        vec = np.array([1.0, sign], dtype=complex) / math.sqrt(2)
        # encoding phases e^{-i phi (n - 1/2)}
        vec = vec * np.exp(-1j * phi * (np.arange(2) - 0.5))
        effects.append(np.outer(vec, vec.conj()))
    return Povm(tuple(effects), ("+", "-"))


# ---------------------------------------------------------------------------
# Encoded states and local estimation

def encoded_rho(probe: SubspaceState, theta: float) -> np.ndarray:
    """Density matrix of the probe after the phase encoding."""
    u = probe.coeffs * np.exp(-1j * np.arange(probe.N + 1) * theta)
    return np.outer(u, u.conj())


def probe_probs_fn(probe: SubspaceState, povm: Povm):
    """theta -> outcome distribution for the probe/POVM pair."""
    stacked = povm.stacked()

    def probs(theta: float) -> np.ndarray:
        return np.einsum("kij,ji->k", stacked, encoded_rho(probe, theta)).real

    return probs


def fisher_information(probs_fn, theta: float, step: float = 1e-5) -> float:
    """Central-difference Fisher information of an outcome distribution."""
    p0 = np.asarray(probs_fn(theta), dtype=float)
    if np.min(p0) < -1e-12:
        raise EstimateError(f"negative outcome probability {np.min(p0):.3e}")
    dp = (np.asarray(probs_fn(theta + step)) - np.asarray(probs_fn(theta - step))) / (2 * step)
    mask = p0 > PROB_FLOOR
    return float(np.sum(dp[mask] ** 2 / p0[mask]))


def qfi_pure(probe: SubspaceState) -> float:
    """4 Var(H) over |psi_n|^2; the N/2 offset cancels in the variance."""
    weights = probe.probabilities()
    n = np.arange(probe.N + 1)
    mean = float(np.dot(weights, n))
    return 4.0 * (float(np.dot(weights, n**2)) - mean**2)


def qfi_statevector(state: StateVector) -> float:
    """4 Var(H) for a full N-qubit state under H = sum_i Z_i / 2."""
    n = state.n_qubits
    weights = np.abs(state.amps) ** 2
    index = np.arange(2**n)
    popcount = np.zeros(2**n, dtype=np.int64)
    for k in range(n):
        popcount += (index >> k) & 1
    eigen = popcount - n / 2.0
    mean = float(np.dot(weights, eigen))
    return 4.0 * (float(np.dot(weights, eigen**2)) - mean**2)


def parity_strategy(N: int, theta: float) -> tuple[float, float, float]:
    """GHZ probe with local X measurements multiplied into a parity bit.

    Returns (p(+|theta), p(-|theta), reparametrized estimator variance);
    the variance is 1/N^2 independently of theta.
    """
    if N < 1:
        raise EstimateError("N must be >= 1")
    p_plus = math.cos(N * theta / 2) ** 2
    return p_plus, 1.0 - p_plus, 1.0 / N**2


def parity_probs_fn(N: int):
    def probs(theta: float) -> np.ndarray:
        p_plus, p_minus, _ = parity_strategy(N, theta)
        return np.array([p_plus, p_minus])

    return probs


def product_probs_fn(N: int, theta_ref: float = 0.0):
    """Outcome distribution of N |+> qubits each measured in the rotated-X
    basis aligned to theta_ref; m counts '-' results (binomial)."""
    m = np.arange(N + 1)
    log_binom = np.array([math.lgamma(N + 1) - math.lgamma(k + 1) - math.lgamma(N - k + 1)
                          for k in m])

    def probs(theta: float) -> np.ndarray:
        s = math.sin(theta - theta_ref)
        return np.exp(log_binom + xlogy(N - m, (1 + s) / 2) + xlogy(m, (1 - s) / 2))

    return probs


# ---------------------------------------------------------------------------
# Bayesian machinery

def _characteristic_gaussian(kappa: np.ndarray, theta0: float, sigma: float) -> np.ndarray:
    return np.exp(-1j * kappa * theta0 - kappa**2 * sigma**2 / 2.0)


def gamma_eta(prior: Prior, probe: SubspaceState) -> tuple[np.ndarray, np.ndarray]:
    """Prior-averaged state Gamma = int p rho dtheta and first moment
    eta = int theta p rho dtheta on the subspace.

    Gaussian priors use the closed forms
    Gamma_nm = psi_n psi_m* e^{-i(n-m) theta0} e^{-(n-m)^2 sigma^2 / 2},
    eta_nm  = (theta0 - i (n-m) sigma^2) Gamma_nm;
    other priors are integrated numerically.
    """
    probe_outer = np.outer(probe.coeffs, probe.coeffs.conj())
    n = np.arange(probe.N + 1)
    kappa = n[:, None] - n[None, :]
    if prior.kind == "gaussian":
        char = _characteristic_gaussian(kappa, prior.theta0, prior.sigma)
        gamma = probe_outer * char
        eta = probe_outer * (prior.theta0 - 1j * kappa * prior.sigma**2) * char
        return gamma, eta
    lo, hi = prior.support()
    char = np.empty_like(kappa, dtype=complex)
    first = np.empty_like(kappa, dtype=complex)
    for k in range(-probe.N, probe.N + 1):
        c = _quad_complex(lambda t: float(prior.pdf(t)) * np.exp(-1j * k * t), lo, hi)
        f = _quad_complex(lambda t: t * float(prior.pdf(t)) * np.exp(-1j * k * t), lo, hi)
        char[kappa == k] = c
        first[kappa == k] = f
    return probe_outer * char, probe_outer * first


def _second_moment_matrix(prior: Prior, probe: SubspaceState) -> np.ndarray:
    """Omega = int theta^2 p rho dtheta, for per-outcome posterior variances."""
    probe_outer = np.outer(probe.coeffs, probe.coeffs.conj())
    n = np.arange(probe.N + 1)
    kappa = n[:, None] - n[None, :]
    if prior.kind == "gaussian":
        s2, t0 = prior.sigma**2, prior.theta0
        factor = s2 + t0**2 - 2j * t0 * kappa * s2 - kappa**2 * s2**2
        return probe_outer * factor * _characteristic_gaussian(kappa, t0, prior.sigma)
    lo, hi = prior.support()
    second = np.empty_like(kappa, dtype=complex)
    for k in range(-probe.N, probe.N + 1):
        val = _quad_complex(lambda t: t**2 * float(prior.pdf(t)) * np.exp(-1j * k * t), lo, hi)
        second[kappa == k] = val
    return probe_outer * second


@dataclass(frozen=True)
class BayesState:
    """A prior/probe/POVM triple with the cached Gamma and eta matrices."""

    prior: Prior
    probe: SubspaceState
    povm: Povm
    gamma: np.ndarray = field(init=False, repr=False)
    eta: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.povm.dim != self.probe.N + 1:
            raise EstimateError("POVM dimension does not match the probe subspace")
        gamma, eta = gamma_eta(self.prior, self.probe)
        if abs(np.trace(gamma).real - 1.0) > 1e-10:
            raise EstimateError("Gamma is not trace one")
        gamma.setflags(write=False)
        eta.setflags(write=False)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "eta", eta)


@dataclass(frozen=True)
class EstimationResult:
    labels: tuple[str, ...]
    probs: np.ndarray
    estimates: np.ndarray
    posterior_variances: np.ndarray
    avg_posterior_variance: float
    # populated for wrapped/flat priors, where the circular width is the
    # meaningful posterior measure
    holevo_variances: np.ndarray | None = None
    avg_holevo_variance: float | None = None


def bayes_round(state: BayesState) -> EstimationResult:
    """Single-shot Bayesian update: outcome probabilities Tr(E Gamma),
    estimates Tr(E eta)/Tr(E Gamma), and posterior MSE variances.

    For Gaussian priors the average variance uses the exact simplification
    sigma^2 - sum_m gamma_m^2 / Tr(E_m Gamma); outcomes with probability
    below 1e-14 carry zero weight and are skipped.
    """
    prior, povm = state.prior, state.povm
    if prior.kind == "gaussian" and prior.sigma > 1.0:
        warnings.warn("MSE phase results are unreliable for sigma > 1", MSEValidityWarning)
    stacked = povm.stacked()
    probs = np.einsum("kij,ji->k", stacked, state.gamma).real
    firsts = np.einsum("kij,ji->k", stacked, state.eta).real
    omega = _second_moment_matrix(prior, state.probe)
    seconds = np.einsum("kij,ji->k", stacked, omega).real

    live = probs > PROB_FLOOR
    estimates = np.full(len(probs), np.nan)
    variances = np.full(len(probs), np.nan)
    estimates[live] = firsts[live] / probs[live]
    variances[live] = seconds[live] / probs[live] - estimates[live] ** 2

    if prior.kind == "gaussian":
        centered = firsts[live] - prior.theta0 * probs[live]
        avg = prior.sigma**2 - float(np.sum(centered**2 / probs[live]))
        return EstimationResult(povm.labels, probs, estimates, variances, avg)

    avg = float(np.sum(probs[live] * variances[live]))
    phasors = np.einsum("kij,ji->k", stacked, _phasor_moment_matrix(prior, state.probe))
    holevo = np.full(len(probs), np.nan)
    mod_sq = np.abs(phasors[live] / probs[live]) ** 2
    holevo[live] = np.where(mod_sq < 1e-28, np.inf, 1.0 / np.maximum(mod_sq, 1e-28) - 1.0)
    avg_holevo = float(np.sum(probs[live] * holevo[live]))
    return EstimationResult(povm.labels, probs, estimates, variances, avg,
                            holevo_variances=holevo, avg_holevo_variance=avg_holevo)


def _phasor_moment_matrix(prior: Prior, probe: SubspaceState) -> np.ndarray:
    """Phi = int p(theta) rho(theta) e^{i theta} dtheta, for posterior phasors."""
    probe_outer = np.outer(probe.coeffs, probe.coeffs.conj())
    n = np.arange(probe.N + 1)
    kappa = n[:, None] - n[None, :]
    lo, hi = prior.support()
    moment = np.empty_like(kappa, dtype=complex)
    for k in range(-probe.N, probe.N + 1):
        val = _quad_complex(lambda t: float(prior.pdf(t)) * np.exp(1j * (1 - k) * t), lo, hi)
        moment[kappa == k] = val
    return probe_outer * moment


def average_posterior_variance(prior: Prior, probe: SubspaceState, povm: Povm) -> float:
    return bayes_round(BayesState(prior, probe, povm)).avg_posterior_variance


def _dft_columns(N: int) -> np.ndarray:
    n = np.arange(N + 1)
    return np.exp(1j * np.outer(n, n) * 2 * math.pi / (N + 1)) / math.sqrt(N + 1)


def qft_phase_variance(N: int, sigma: float, theta0: float = 0.0,
                       probe: SubspaceState | None = None) -> float:
    """Average posterior MSE for the probe + Fourier-basis measurement.

    Same quantity as bayes_round with qft_povm, but evaluated through two
    dense matrix products instead of stacked projectors, so it stays cheap
    up to N of a few hundred.
    """
    probe = probe if probe is not None else sine_coefficients(N)
    gamma, eta = gamma_eta(gaussian_prior(sigma, theta0), probe)
    f = _dft_columns(N)
    p = np.einsum("nk,nk->k", f.conj(), gamma @ f).real
    g = np.einsum("nk,nk->k", f.conj(), eta @ f).real - theta0 * p
    live = p > PROB_FLOOR
    return sigma**2 - float(np.sum(g[live] ** 2 / p[live]))


def qft_frequency_variance(N: int, delta: float, tau: float,
                           probe: SubspaceState | None = None) -> float:
    """frequency_round for the Fourier-basis measurement, dense-matrix path;
    returns the average posterior frequency MSE in units of delta^2."""
    probe = probe if probe is not None else sine_coefficients(N)
    gamma, eta = frequency_gamma_eta(probe, delta, tau)
    f = _dft_columns(N)
    p = np.einsum("nk,nk->k", f.conj(), gamma @ f).real
    g = np.einsum("nk,nk->k", f.conj(), eta @ f).real
    live = p > PROB_FLOOR
    return (delta**2 - float(np.sum(g[live] ** 2 / p[live]))) / delta**2


def bayes_variance_quadrature(prior: Prior, probe: SubspaceState, povm: Povm,
                              rtol: float = 1e-9) -> float:
    """Average posterior variance by direct integration of p(m|theta) against
    the prior — the independent oracle for the closed-form route."""
    probs_fn = probe_probs_fn(probe, povm)
    lo, hi = prior.support()
    n_out = len(povm.effects)
    p = np.empty(n_out)
    first = np.empty(n_out)
    second = np.empty(n_out)
    for m in range(n_out):
        def weighted(t, power, m=m):
            return t**power * float(prior.pdf(t)) * float(probs_fn(t)[m])

        p[m] = _quad(lambda t: weighted(t, 0), lo, hi, rtol)
        first[m] = _quad(lambda t: weighted(t, 1), lo, hi, rtol)
        second[m] = _quad(lambda t: weighted(t, 2), lo, hi, rtol)
    live = p > PROB_FLOOR
    return float(np.sum(second[live]) - np.sum(first[live] ** 2 / p[live]))


# ---------------------------------------------------------------------------
# Holevo phase variance

def holevo_variance(dist) -> float:
    """|<e^{i theta}>|^-2 - 1 for a circular distribution.

    Accepts a Prior (closed form e^{sigma^2} - 1 for Gaussian shapes,
    infinite for flat), a pdf callable on [-pi, pi], or a (values, weights)
    pair of samples.  A vanishing mean phasor is flagged as math.inf.
    """
    if isinstance(dist, Prior):
        if dist.kind == "flat":
            return math.inf
        if dist.kind == "gaussian":
            return math.exp(dist.sigma**2) - 1.0
        phasor = _quad_complex(lambda t: float(dist.pdf(t)) * np.exp(1j * t), -math.pi, math.pi)
    elif callable(dist):
        norm = _quad(lambda t: float(dist(t)), -math.pi, math.pi)
        phasor = _quad_complex(lambda t: float(dist(t)) * np.exp(1j * t), -math.pi, math.pi) / norm
    else:
        values, weights = dist
        weights = np.asarray(weights, dtype=float)
        phasor = np.sum(weights * np.exp(1j * np.asarray(values, dtype=float))) / np.sum(weights)
    mod_sq = abs(phasor) ** 2
    if mod_sq < 1e-28:
        return math.inf
    return 1.0 / mod_sq - 1.0


def _qft_outcome_matrix(probe: SubspaceState, thetas: np.ndarray) -> np.ndarray:
    """p(k | theta) for all QFT outcomes at once: the DFT of psi_n e^{-i n theta}."""
    n = np.arange(probe.N + 1)
    u = probe.coeffs[None, :] * np.exp(-1j * np.outer(thetas, n))
    return np.abs(np.fft.fft(u, axis=1)) ** 2 / (probe.N + 1)


def _generic_outcome_matrix(probe: SubspaceState, povm: Povm, thetas: np.ndarray) -> np.ndarray:
    n = np.arange(probe.N + 1)
    u = probe.coeffs[None, :] * np.exp(-1j * np.outer(thetas, n))
    return np.einsum("kij,tj,ti->tk", povm.stacked(), u, u.conj()).real


def holevo_bayes_round(N: int, prior: Prior, probe: SubspaceState | None = None,
                       povm: Povm | None = None, tol: float = 1e-8) -> float:
    """Average posterior Holevo phase variance over the measurement outcomes.

    Integrates p(m|theta) p(theta) and its e^{i theta} moment over
    [-pi, pi] with Gauss-Legendre rules of doubling order until two
    refinements agree to `tol`.  The default probe/POVM pair is the sine
    state with the Fourier-basis measurement (fast FFT path).
    """
    probe = probe if probe is not None else sine_coefficients(N)
    previous = None
    for order in (64, 128, 256, 512, 1024, 2048):
        nodes, weights = leggauss(order)
        thetas = nodes * math.pi
        w = weights * math.pi * prior.pdf(thetas)
        if povm is None:
            P = _qft_outcome_matrix(probe, thetas)
        else:
            P = _generic_outcome_matrix(probe, povm, thetas)
        p_m = w @ P
        phasors = (w * np.exp(1j * thetas)) @ P
        live = p_m > PROB_FLOOR
        mod_sq = np.abs(phasors[live] / p_m[live]) ** 2
        if np.any(mod_sq < 1e-28):
            return math.inf
        total = float(np.sum(p_m[live] * (1.0 / mod_sq - 1.0)))
        if previous is not None and abs(total - previous) <= tol * max(1.0, abs(total)):
            return total
        previous = total
    raise QuadratureError("Holevo averaging did not converge between refinements")


def holevo_outcome_probabilities(N: int, prior: Prior,
                                 probe: SubspaceState | None = None,
                                 order: int = 512) -> np.ndarray:
    """Unconditional QFT outcome distribution p(k) under a wrapped prior."""
    probe = probe if probe is not None else sine_coefficients(N)
    nodes, weights = leggauss(order)
    thetas = nodes * math.pi
    w = weights * math.pi * prior.pdf(thetas)
    return w @ _qft_outcome_matrix(probe, thetas)


# ---------------------------------------------------------------------------
# Classical baselines and bounds

def van_trees_bound(N: int, sigma: float) -> float:
    """Lower bound sigma^2 / (1 + N sigma^2) on the average posterior MSE of
    any classical strategy with a Gaussian prior."""
    if sigma <= 0:
        raise EstimateError("sigma must be positive")
    return sigma**2 / (1.0 + N * sigma**2)


def van_trees_general(prior_fisher: float, qfi: float) -> float:
    """Generic form 1 / (I(p) + QFI)."""
    return 1.0 / (prior_fisher + qfi)


def _signed_expansion(N: int, m: int) -> list[int]:
    """Exact integer coefficients of (1+x)^(N-m) (1-x)^m.

    These are the binary Krawtchouk values K_s(m; N), generated by their
    three-term recurrence (the division is always exact), which is O(N)
    instead of the O(N^2) double binomial sum.
    """
    out = [0] * (N + 1)
    out[0] = 1
    if N >= 1:
        out[1] = N - 2 * m
    for s in range(1, N):
        out[s + 1] = ((N - 2 * m) * out[s] - (N - s + 1) * out[s - 1]) // (s + 1)
    return out


def _sin_power_moment(n: int, sigma) -> "mpmath.mpf":
    """E[sin^n theta] for theta ~ N(0, sigma^2); zero for odd n."""
    if n % 2 == 1:
        return mpmath.mpf(0)
    if n == 0:
        return mpmath.mpf(1)
    half = n // 2
    scale = mpmath.mpf(2) ** (-n)
    total = mpmath.binomial(n, half) * scale
    for l in range(half):
        total += (2 * (-1) ** (half - l)) * mpmath.binomial(n, l) * scale * mpmath.exp(
            -((n - 2 * l) ** 2) * sigma**2 / 2)
    return total


def _theta_sin_power_moment(n: int, sigma) -> "mpmath.mpf":
    """E[theta sin^n theta] for theta ~ N(0, sigma^2); zero for even n."""
    if n % 2 == 0:
        return mpmath.mpf(0)
    prefactor = n * sigma**2 * mpmath.mpf(2) ** (1 - n)
    total = mpmath.exp(-(sigma**2) / 2) * mpmath.binomial(n - 1, (n - 1) // 2)
    for l in range((n - 1) // 2):
        sign = (-1) ** ((n - 2 * l - 1) // 2)
        total += sign * mpmath.binomial(n - 1, l) * (
            mpmath.exp(-((n - 2 * l - 2) ** 2) * sigma**2 / 2)
            + mpmath.exp(-((n - 2 * l) ** 2) * sigma**2 / 2))
    return prefactor * total


def _classical_parallel_from_tables(N: int, sig, even_moments: dict, odd_moments: dict) -> float:
    scale = mpmath.mpf(2) ** (-N)
    subtract = mpmath.mpf(0)
    for m in range(N + 1):
        coeffs = _signed_expansion(N, m)
        binom = mpmath.binomial(N, m) * scale
        weight = binom * mpmath.fsum(coeffs[s] * even_moments[s] for s in range(0, N + 1, 2))
        gamma_m = binom * mpmath.fsum(coeffs[s] * odd_moments[s] for s in range(1, N + 1, 2))
        if weight > mpmath.mpf(10) ** (-30):
            subtract += gamma_m**2 / weight
    return float(sig**2 - subtract)


def _classical_parallel_mp(N: int, sigma: float) -> float:
    """High-precision evaluation of the exact parallel-strategy sums."""
    return classical_parallel_curve([N], sigma)[0]


def classical_parallel_curve(Ns, sigma: float) -> list[float]:
    """classical_parallel_variance over an N grid, sharing the moment tables
    (they depend on sigma and the power only)."""
    Ns = list(Ns)
    n_max = max(Ns)
    dps = 40 + int(0.35 * n_max)
    with mpmath.workdps(dps):
        sig = mpmath.mpf(sigma)
        even = {s: _sin_power_moment(s, sig) for s in range(0, n_max + 1, 2)}
        odd = {s: _theta_sin_power_moment(s, sig) for s in range(1, n_max + 1, 2)}
        return [_classical_parallel_from_tables(N, sig, even, odd) for N in Ns]


def classical_parallel_variance(N: int, sigma: float) -> float:
    """Average posterior MSE of the optimal parallel classical strategy
    (|+>^N probe, per-qubit rotated-X measurements, Gaussian prior).

    Exact combinatorial sums: outcome weights expand into moments
    E[sin^s theta] and E[theta sin^s theta].  The binomial expansions cancel
    catastrophically, so the integer part is exact and the transcendental
    part runs at ~0.35 N + 40 decimal digits.  The derivation absorbs
    theta0, so the result does not depend on the prior mean.
    """
    if N < 1:
        raise EstimateError("N must be >= 1")
    if N > CLASSICAL_PARALLEL_N_CAP:
        raise EstimateError(f"N={N} exceeds the cap {CLASSICAL_PARALLEL_N_CAP}")
    if not 0 < sigma <= 1.5:
        raise EstimateError("supported width range is 0 < sigma <= 1.5")
    return _classical_parallel_mp(N, sigma)


def classical_parallel_variance_quadrature(N: int, sigma: float, theta0: float = 0.0,
                                           rtol: float = 1e-9) -> float:
    """Quadrature oracle for the parallel classical strategy (any theta0)."""
    probs_fn = product_probs_fn(N, theta_ref=theta0)
    prior = gaussian_prior(sigma, theta0)
    lo, hi = prior.support()
    subtract = 0.0
    for m in range(N + 1):
        def weighted(t, power, m=m):
            return (t - theta0) ** power * float(prior.pdf(t)) * float(probs_fn(t)[m])

        p = _quad(lambda t: weighted(t, 0), lo, hi, rtol)
        if p < PROB_FLOOR:
            continue
        g = _quad(lambda t: weighted(t, 1), lo, hi, rtol)
        subtract += g**2 / p
    return sigma**2 - subtract


def mse_limit_curve(sigmas) -> np.ndarray:
    """Minimal achievable posterior MSE, normalized by the prior variance.

    The limiting posterior is a delta comb at 2 pi k weighted by the prior;
    V_min = N sum_k e^{-(2 pi k)^2 / 2 sigma^2} (2 pi k)^2 with the
    normalization N over the same comb.  Terms are kept while
    2 pi k <= 10 sigma + 2 pi.
    """
    out = []
    for sigma in np.atleast_1d(np.asarray(sigmas, dtype=float)):
        k_max = math.ceil((10 * sigma + 2 * math.pi) / (2 * math.pi))
        k = np.arange(1, k_max + 1)
        w = np.exp(-((2 * math.pi * k) ** 2) / (2 * sigma**2))
        norm = 1.0 + 2.0 * float(np.sum(w))
        vmin = 2.0 * float(np.sum(w * (2 * math.pi * k) ** 2)) / norm
        out.append(vmin / sigma**2)
    return np.array(out)


# ---------------------------------------------------------------------------
# Noisy-local equivalence

def dephased_rho(probe: SubspaceState, sigma: float, theta: float) -> np.ndarray:
    """Probe after Gaussian parallel dephasing of width sigma, then encoding."""
    n = np.arange(probe.N + 1)
    kappa = n[:, None] - n[None, :]
    damp = np.exp(-(kappa**2) * sigma**2 / 2.0)
    return np.outer(probe.coeffs, probe.coeffs.conj()) * damp * np.exp(-1j * kappa * theta)


def dephased_fisher_information(probe: SubspaceState, povm: Povm, sigma: float,
                                theta: float) -> float:
    """FI of the dephased probe at theta, via the analytic state derivative."""
    n = np.arange(probe.N + 1)
    kappa = n[:, None] - n[None, :]
    rho = dephased_rho(probe, sigma, theta)
    drho = -1j * kappa * rho
    stacked = povm.stacked()
    p = np.einsum("kij,ji->k", stacked, rho).real
    dp = np.einsum("kij,ji->k", stacked, drho).real
    mask = p > PROB_FLOOR
    return float(np.sum(dp[mask] ** 2 / p[mask]))


def noisy_local_equivalence_check(N: int, sigma: float, probe: SubspaceState,
                                  povm: Povm, theta0: float = 0.0) -> float:
    """|V_post(Bayes) - (sigma^2 - sigma^4 FI(dephased probe at theta0))|.

    The Gaussian-prior Bayesian update and local estimation under parallel
    Gaussian noise are two readings of the same quantities, so the residual
    should sit at numerical noise.
    """
    if sigma == 0.0:
        return 0.0
    vbar = average_posterior_variance(gaussian_prior(sigma, theta0), probe, povm)
    fi = dephased_fisher_information(probe, povm, sigma, theta0)
    return abs(vbar - (sigma**2 - sigma**4 * fi))


# ---------------------------------------------------------------------------
# Frequency estimation

def frequency_gamma_eta(probe: SubspaceState, delta: float, tau: float
                        ) -> tuple[np.ndarray, np.ndarray]:
    """Gamma and eta for frequency estimation with a centered Gaussian prior
    of width delta and dimensionless interrogation time tau = t * delta."""
    n = np.arange(probe.N + 1)
    kappa = n[:, None] - n[None, :]
    damp = np.exp(-(kappa**2) * tau**2 / 2.0)
    outer = np.outer(probe.coeffs, probe.coeffs.conj())
    gamma = outer * damp
    eta = outer * (-1j * tau * delta * kappa) * damp
    return gamma, eta


def frequency_round(N: int, delta: float, tau: float, probe: SubspaceState,
                    povm: Povm) -> float:
    """Average posterior frequency MSE, in units of delta^2."""
    if tau <= 0:
        raise EstimateError("tau must be positive")
    if probe.N != N:
        raise EstimateError("probe size does not match N")
    gamma, eta = frequency_gamma_eta(probe, delta, tau)
    stacked = povm.stacked()
    p = np.einsum("kij,ji->k", stacked, gamma).real
    g = np.einsum("kij,ji->k", stacked, eta).real
    live = p > PROB_FLOOR
    vbar = delta**2 - float(np.sum(g[live] ** 2 / p[live]))
    return vbar / delta**2


@dataclass(frozen=True)
class TauOptimum:
    tau: float
    vbar: float  # in units of delta^2
    boundary: bool


TAU_GRID = np.geomspace(1e-3, 20.0, 60)


def _optimize_objective(objective, grid: np.ndarray) -> TauOptimum:
    values = [objective(t) for t in grid]
    best = int(np.argmin(values))
    if best == 0 or best == len(grid) - 1:
        return TauOptimum(float(grid[best]), float(values[best]), boundary=True)
    tau, val = golden_section_minimize(objective, float(grid[best - 1]), float(grid[best + 1]),
                                       tol=1e-6)
    if val > values[best]:
        tau, val = float(grid[best]), float(values[best])
    return TauOptimum(tau, val, boundary=False)


def optimize_tau(N: int, delta: float, probe: SubspaceState, povm: Povm) -> TauOptimum:
    """Best interrogation time: coarse log grid in [1e-3, 20] followed by
    golden-section refinement around the best grid point (the objective is
    observed to be unimodal, but the grid guards against surprises)."""

    def objective(tau: float) -> float:
        return frequency_round(N, delta, tau, probe, povm)

    return _optimize_objective(objective, TAU_GRID)


def optimize_tau_classical(N: int) -> TauOptimum:
    """Interrogation-time optimum of the parallel classical strategy; the
    frequency objective (in delta^2 units) is the phase variance at width
    tau divided by tau^2."""

    def objective(tau: float) -> float:
        return _classical_parallel_mp(N, tau) / tau**2

    return _optimize_objective(objective, TAU_GRID)
