"""Market models for the hedging engine.

Two families:
* regime-switching geometric random walks: a hidden finite Markov chain picks
  each period's return distribution; includes the one-regime Gaussian and
  gamma-difference (Laplace at maturity) models used in the experiments,
* GARCH-type processes driven by i.i.d. innovations, with the asymmetric
  NGARCH(1,1) specialization.

Throughout, xi denotes the per-period relative increment of the *discounted*
price: beta_k S_k = beta_{k-1} S_{k-1} (1 + xi_k).  Model-specific backward
step formulas (rho/gamma recursion, value and hedge integrals) live here;
the grid solver drives them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import DiscountCurve, check_gamma
from .exceptions import (
    DegenerateModelError,
    InvalidArgumentError,
    InvalidStateError,
)
from .numerics import spd_factor, spd_solve


# ---------------------------------------------------------------------------
# Per-regime increment laws
# ---------------------------------------------------------------------------

class DiscreteIncrementLaw:
    """Explicit finite law for xi: atoms (n_atoms, d) with probabilities.

    Moments are exact sums, and the quadrature is the atom set itself, which
    makes tree fixtures and the dynamic-programming solver agree to machine
    precision.
    """

    def __init__(self, atoms, probs):
        atoms = np.atleast_2d(np.asarray(atoms, dtype=float))
        if atoms.shape[0] == 1 and np.asarray(probs).size > 1:
            atoms = atoms.T
        probs = np.asarray(probs, dtype=float)
        if atoms.shape[0] != probs.size:
            raise InvalidArgumentError("atoms and probs must align")
        if np.any(probs <= 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise InvalidArgumentError("probs must be positive and sum to 1")
        self.atoms = atoms
        self.probs = probs
        self.d = atoms.shape[1]
        self.mean = probs @ atoms
        self.second_moment = (atoms * probs[:, None]).T @ atoms

    def sample(self, rng, n):
        idx = rng.choice(self.probs.size, size=n, p=self.probs)
        return self.atoms[idx]

    def quadrature(self, m, rng):
        # exact atoms regardless of the requested size
        return self.atoms, self.probs


class NormalIncrementLaw:
    """xi itself Gaussian (d = 1): xi ~ N(mean, std^2).

    Used as the exact one-regime counterpart of a degenerate GARCH model.
    """

    d = 1

    def __init__(self, mean, std):
        if std <= 0:
            raise InvalidArgumentError("std must be positive")
        self.mu = float(mean)
        self.sigma = float(std)
        self.mean = np.array([self.mu])
        self.second_moment = np.array([[self.mu**2 + self.sigma**2]])

    def sample(self, rng, n):
        return (self.mu + self.sigma * rng.standard_normal(n))[:, None]

    def quadrature(self, m, rng):
        z = rng.standard_normal(m)
        return (self.mu + self.sigma * z)[:, None], np.full(m, 1.0 / m)


class GaussianLogReturnLaw:
    """Per-period log-return N(mu_p, sigma_p^2); xi = exp(L - r*dt) - 1 (d = 1).

    Moments are lognormal closed forms, so the rho/gamma recursion uses exact
    means while the value integrals use the Monte Carlo quadrature.
    """

    d = 1

    def __init__(self, mu_period, sigma_period, log_discount):
        if sigma_period <= 0:
            raise InvalidArgumentError("sigma_period must be positive")
        self.mu_p = float(mu_period)
        self.sigma_p = float(sigma_period)
        self.log_df = float(log_discount)   # r * dt
        e1 = math.exp(self.mu_p - self.log_df + 0.5 * self.sigma_p**2)
        e2 = math.exp(2.0 * (self.mu_p - self.log_df) + 2.0 * self.sigma_p**2)
        self.mean = np.array([e1 - 1.0])
        self.second_moment = np.array([[e2 - 2.0 * e1 + 1.0]])

    def _xi(self, log_returns):
        return np.exp(log_returns - self.log_df) - 1.0

    def sample(self, rng, n):
        log_r = self.mu_p + self.sigma_p * rng.standard_normal(n)
        return self._xi(log_r)[:, None]

    def quadrature(self, m, rng):
        log_r = self.mu_p + self.sigma_p * rng.standard_normal(m)
        return self._xi(log_r)[:, None], np.full(m, 1.0 / m)


class GammaDifferenceLogReturnLaw:
    """Per-period log-return mu_p + (G1 - G2), G_i i.i.d. Gamma(shape, scale).

    Summing n periods with shape = 1/n makes the centered terminal log-return
    Laplace with variance 2*scale^2.  xi = exp(L - r*dt) - 1 (d = 1).
    """

    d = 1

    def __init__(self, mu_period, shape, scale, log_discount):
        if shape <= 0 or scale <= 0:
            raise InvalidArgumentError("shape and scale must be positive")
        if 2.0 * scale >= 1.0:
            raise InvalidArgumentError("scale >= 1/2 has no finite second moment for xi")
        self.mu_p = float(mu_period)
        self.shape = float(shape)
        self.scale = float(scale)
        self.log_df = float(log_discount)
        # E[exp(c*(G1-G2))] = (1 - (c*scale)^2)^(-shape)
        e1 = math.exp(self.mu_p - self.log_df) * (1.0 - self.scale**2) ** (-self.shape)
        e2 = math.exp(2.0 * (self.mu_p - self.log_df)) * (1.0 - 4.0 * self.scale**2) ** (-self.shape)
        self.mean = np.array([e1 - 1.0])
        self.second_moment = np.array([[e2 - 2.0 * e1 + 1.0]])

    def _xi(self, g1, g2):
        return np.exp(self.mu_p + g1 - g2 - self.log_df) - 1.0

    def sample(self, rng, n):
        g1 = rng.gamma(self.shape, self.scale, size=n)
        g2 = rng.gamma(self.shape, self.scale, size=n)
        return self._xi(g1, g2)[:, None]

    def quadrature(self, m, rng):
        g1 = rng.gamma(self.shape, self.scale, size=m)
        g2 = rng.gamma(self.shape, self.scale, size=m)
        return self._xi(g1, g2)[:, None], np.full(m, 1.0 / m)


# ---------------------------------------------------------------------------
# Regime-switching model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegimeSwitchingModel:
    """Hidden Markov chain over per-regime increment laws.

    transition[i, j] is the probability of moving from regime i to regime j;
    the increment of the coming period is drawn from the *new* regime's law.
    """

    transition: np.ndarray
    regimes: tuple

    def __post_init__(self):
        q = np.asarray(self.transition, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise InvalidArgumentError("transition matrix must be square")
        if q.shape[0] != len(self.regimes):
            raise InvalidArgumentError("one transition row per regime required")
        if np.any(q < 0) or np.max(np.abs(q.sum(axis=1) - 1.0)) > 1e-12:
            raise InvalidArgumentError("transition rows must be nonnegative and sum to 1")
        d = self.regimes[0].d
        if any(law.d != d for law in self.regimes):
            raise InvalidArgumentError("all regimes must share the asset dimension")
        for i, law in enumerate(self.regimes):
            cov = law.second_moment - np.outer(law.mean, law.mean)
            try:
                spd_factor(cov)
            except DegenerateModelError as exc:
                raise DegenerateModelError(
                    f"regime {i} has singular increment covariance: {exc}"
                ) from exc
        q = q.copy()
        q.setflags(write=False)
        object.__setattr__(self, "transition", q)
        object.__setattr__(self, "regimes", tuple(self.regimes))

    @property
    def n_regimes(self) -> int:
        return len(self.regimes)

    @property
    def d(self) -> int:
        return self.regimes[0].d

    def make_quadrature(self, m: int, seed: int):
        """Fixed per-regime quadrature (points, weights), drawn once and reused
        at every node and period.  Regime 0 consumes the stream first."""
        rng = np.random.default_rng(seed)
        return tuple(law.quadrature(m, rng) for law in self.regimes)


def _mixed_moments(model: RegimeSwitchingModel, gamma_next):
    """Weighted mixture moments sum_j Q_ij gamma'(j) B(j) and ... m(j)."""
    gamma_next = np.asarray(gamma_next, dtype=float)
    l, d = model.n_regimes, model.d
    b_stack = np.stack([law.second_moment for law in model.regimes])
    m_stack = np.stack([law.mean for law in model.regimes])
    wq = model.transition * gamma_next[None, :]
    wb = np.einsum("ij,jab->iab", wq, b_stack)
    wm = wq @ m_stack
    return wb, wm


def rs_rho_gamma_step(model: RegimeSwitchingModel, gamma_next):
    """One backward update of the state-independent coefficients.

    rho(i) = [sum_j Q_ij g'(j) B(j)]^{-1} [sum_j Q_ij g'(j) m(j)]
    gamma(i) = sum_j Q_ij g'(j) (1 - rho(i) . m(j)), guaranteed in (0, 1].
    """
    gamma_next = np.asarray(gamma_next, dtype=float)
    if np.any(gamma_next <= 0) or np.any(gamma_next > 1.0 + 1e-9):
        raise InvalidArgumentError("gamma_next entries must lie in (0, 1]")
    wb, wm = _mixed_moments(model, gamma_next)
    l = model.n_regimes
    rho = np.empty((l, model.d))
    gamma = np.empty(l)
    m_stack = np.stack([law.mean for law in model.regimes])
    for i in range(l):
        try:
            rho[i] = spd_solve(wb[i], wm[i])
        except DegenerateModelError as exc:
            raise DegenerateModelError(
                f"singular mixed second moment: {exc}", state=f"regime {i}"
            ) from exc
        contrib = model.transition[i] * gamma_next * (1.0 - m_stack @ rho[i])
        gamma[i] = check_gamma(float(contrib.sum()), state=f"regime {i}")
    return rho, gamma


def rs_Ab(model: RegimeSwitchingModel, s, i: int, gamma_next, beta_prev: float):
    """State-dependent regression inputs at price s in regime i:
    A = beta_prev^2 D(s) [sum_j Q_ij g'(j) B(j)] D(s),  b = rho(i) / (beta_prev s).
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(s <= 0):
        raise InvalidStateError("asset prices must be positive")
    wb, _ = _mixed_moments(model, gamma_next)
    rho, _ = rs_rho_gamma_step(model, gamma_next)
    a_mat = beta_prev**2 * (s[:, None] * wb[i] * s[None, :])
    b = rho[i] / (beta_prev * s)
    return a_mat, b


def rs_value_alpha(model: RegimeSwitchingModel, c_next, s, i: int, betas,
                   gamma_next, rho, quadrature):
    """Value and hedge integrals at state (s, i), one period back.

    c_next(s_next, j) must accept an (m, d) price array for regime j and
    return the option values there.  betas = (beta_prev, beta_next);
    quadrature = per-regime (points, weights) as from make_quadrature.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(s <= 0):
        raise InvalidStateError("asset prices must be positive")
    beta_prev, beta_next = betas
    ratio = beta_next / beta_prev
    gamma_next = np.asarray(gamma_next, dtype=float)
    rho = np.atleast_2d(np.asarray(rho, dtype=float))
    wb, _ = _mixed_moments(model, gamma_next)

    m_stack = np.stack([law.mean for law in model.regimes])
    gamma_i = check_gamma(float(
        (model.transition[i] * gamma_next * (1.0 - m_stack @ rho[i])).sum()
    ), state=f"regime {i}")

    val_sum = 0.0
    vec_sum = np.zeros(model.d)
    for j in range(model.n_regimes):
        qg = model.transition[i, j] * gamma_next[j]
        if qg == 0.0:
            continue
        y, w = quadrature[j]
        s_next = (s[None, :] / ratio) * (1.0 + y)
        c_vals = np.asarray(c_next(s_next, j), dtype=float)
        if not np.all(np.isfinite(c_vals)):
            raise InvalidArgumentError(f"payoff/value produced non-finite entries in regime {j}")
        val_sum += qg * float(w @ (c_vals * (1.0 - y @ rho[i])))
        vec_sum += qg * ((w * c_vals) @ y)
    c_prev = ratio * val_sum / gamma_i
    alpha = ratio * spd_solve(wb[i], vec_sum) / s
    return c_prev, alpha


# ---------------------------------------------------------------------------
# GARCH family
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NgarchParams:
    """Asymmetric NGARCH(1,1) parameters; r is the per-period simple rate
    appearing in the return equation."""

    alpha0: float
    alpha1: float
    beta1: float
    lam: float
    r: float = 0.0

    def __post_init__(self):
        if self.alpha0 <= 0:
            raise InvalidArgumentError("alpha0 must be positive")
        if self.alpha1 < 0 or self.beta1 < 0:
            raise InvalidArgumentError("alpha1 and beta1 must be nonnegative")
        if self.alpha1 + self.beta1 >= 1.0:
            raise InvalidArgumentError("alpha1 + beta1 must be < 1 (stationarity)")

    @property
    def stationary_variance(self) -> float:
        return self.alpha0 / (1.0 - self.alpha1 - self.beta1)


def ngarch_transition(params: NgarchParams, h, eps, measure: str = "physical"):
    """One NGARCH step.  Returns (xi, h_next) where xi is the log gross
    (undiscounted) return; the tradable discounted increment is
    exp(xi) * exp(-r dt) - 1.

    physical: exp(xi) - 1 = r + lam sqrt(h) - h/2 + sqrt(h) eps,
              h' = alpha0 + alpha1 h eps^2 + beta1 h
    emm:      exp(xi) - 1 = r - h/2 + sqrt(h) eps,
              h' = alpha0 + alpha1 h (eps - lam)^2 + beta1 h
    """
    h = np.asarray(h, dtype=float)
    eps = np.asarray(eps, dtype=float)
    if np.any(h <= 0):
        raise InvalidStateError("variance state must be positive")
    root = np.sqrt(h)
    if measure == "physical":
        gross = 1.0 + params.r + params.lam * root - 0.5 * h + root * eps
        h_next = params.alpha0 + params.alpha1 * h * eps**2 + params.beta1 * h
    elif measure == "emm":
        gross = 1.0 + params.r - 0.5 * h + root * eps
        h_next = params.alpha0 + params.alpha1 * h * (eps - params.lam) ** 2 + params.beta1 * h
    else:
        raise InvalidArgumentError(f"unknown measure {measure!r}")
    if np.any(gross <= 0):
        raise InvalidStateError("gross return fell below zero; model invalid at this state")
    return np.log(gross), h_next


@dataclass(frozen=True)
class GarchModel:
    """GARCH-type dynamics of the discounted increment.

    pi1(h, eps) -> xi (discounted relative increment), pi2(h, eps) -> h'.
    Innovations are i.i.d. under `innovation_sampler`; `h_init` seeds paths
    and hedging runs.
    """

    pi1: Callable
    pi2: Callable
    innovation_sampler: Callable
    h_init: float
    period_df: float = 1.0
    params: Optional[NgarchParams] = None
    measure: str = "physical"

    def make_quadrature(self, m: int, seed: int):
        rng = np.random.default_rng(seed)
        return self.innovation_sampler(rng, m), np.full(m, 1.0 / m)


def _build_ngarch(params: NgarchParams, df: float, h0: float, measure: str) -> GarchModel:
    def pi1(h, eps, _params=params, _df=df, _measure=measure):
        xi_log, _ = ngarch_transition(_params, h, eps, _measure)
        return np.exp(xi_log) * _df - 1.0

    def pi2(h, eps, _params=params, _measure=measure):
        _, h_next = ngarch_transition(_params, h, eps, _measure)
        return h_next

    def innovations(rng, size):
        return rng.standard_normal(size)

    return GarchModel(pi1=pi1, pi2=pi2, innovation_sampler=innovations,
                      h_init=float(h0), period_df=df, params=params, measure=measure)


def make_ngarch_model(alpha0: float, alpha1: float, beta1: float, lam: float,
                      rate: float, dt: float, h0: Optional[float] = None,
                      measure: str = "physical") -> GarchModel:
    """NGARCH model with the per-period rate implied by the discount curve:
    (1 + r_period) * exp(-rate * dt) = 1.  h0 defaults to the stationary
    variance alpha0 / (1 - alpha1 - beta1)."""
    r_period = math.expm1(rate * dt)
    params = NgarchParams(alpha0=alpha0, alpha1=alpha1, beta1=beta1, lam=lam, r=r_period)
    if h0 is None:
        h0 = params.stationary_variance
    if h0 <= 0:
        raise InvalidArgumentError("h0 must be positive")
    return _build_ngarch(params, math.exp(-rate * dt), h0, measure)


def emm_counterpart(model: GarchModel) -> GarchModel:
    """The same NGARCH model under its martingale measure: the risk premium
    leaves the return equation and recenters the variance innovation."""
    if model.params is None:
        raise InvalidArgumentError("emm dynamics need explicit NGARCH parameters")
    return _build_ngarch(model.params, model.period_df, model.h_init, "emm")


def garch_step_coeffs(model: GarchModel, h: float, gamma_next, quadrature):
    """State coefficients at variance h:
    B = int pi1^2 g'(pi2) dnu,  m = int pi1 g'(pi2) dnu,
    gamma = int (1 - (m/B) pi1) g'(pi2) dnu, in (0, 1].

    gamma_next is a callable h' -> gamma value (vectorized).
    """
    eps, w = quadrature
    xi = np.asarray(model.pi1(h, eps), dtype=float)
    h_next = np.asarray(model.pi2(h, eps), dtype=float)
    g = np.asarray(gamma_next(h_next), dtype=float)
    wg = w * g
    b_k = float(wg @ xi**2)
    if b_k <= 0.0:
        raise DegenerateModelError("weighted second moment B <= 0", state=f"h={h!r}")
    m_k = float(wg @ xi)
    gamma = check_gamma(float(wg.sum() - m_k**2 / b_k), state=f"h={h!r}")
    return b_k, m_k, gamma


def garch_value_alpha(model: GarchModel, c_next, s: float, h: float,
                      beta1_period: float, gamma_next, quadrature):
    """Value and hedge integrals at state (s, h), one period back.

    c_next(s_next, h_next) must accept aligned arrays.  beta1_period is the
    one-period discount factor beta_k / beta_{k-1}.
    """
    if s <= 0:
        raise InvalidStateError("asset price must be positive")
    eps, w = quadrature
    xi = np.asarray(model.pi1(h, eps), dtype=float)
    h_next = np.asarray(model.pi2(h, eps), dtype=float)
    g = np.asarray(gamma_next(h_next), dtype=float)
    wg = w * g
    b_k = float(wg @ xi**2)
    if b_k <= 0.0:
        raise DegenerateModelError("weighted second moment B <= 0", state=f"h={h!r}")
    m_k = float(wg @ xi)
    gamma = check_gamma(float(wg.sum() - m_k**2 / b_k), state=f"h={h!r}")

    s_next = s * (1.0 + xi) / beta1_period
    c_vals = np.asarray(c_next(s_next, h_next), dtype=float)
    if not np.all(np.isfinite(c_vals)):
        raise InvalidArgumentError("payoff/value produced non-finite entries")
    c_prev = beta1_period * float(wg @ (c_vals * (1.0 - (m_k / b_k) * xi))) / gamma
    alpha = beta1_period * float(wg @ (c_vals * xi)) / (s * b_k)
    return c_prev, alpha


# ---------------------------------------------------------------------------
# Experiment model factories
# ---------------------------------------------------------------------------

def make_bs_model(n_periods: int, total_mean: float, total_vol: float,
                  rate: float, maturity: float) -> RegimeSwitchingModel:
    """One-regime Gaussian random walk: the terminal undiscounted log-return
    has mean total_mean and standard deviation total_vol."""
    if n_periods < 1 or total_vol <= 0:
        raise InvalidArgumentError("need n_periods >= 1 and total_vol > 0")
    dt = maturity / n_periods
    law = GaussianLogReturnLaw(
        mu_period=total_mean / n_periods,
        sigma_period=total_vol / math.sqrt(n_periods),
        log_discount=rate * dt,
    )
    return RegimeSwitchingModel(transition=np.array([[1.0]]), regimes=(law,))


def make_vg_model(n_periods: int, total_mean: float, total_vol: float,
                  rate: float, maturity: float) -> RegimeSwitchingModel:
    """One-regime gamma-difference walk: centered terminal log-return is
    Laplace with standard deviation total_vol (shape 1/n per period sums to
    a unit-shape gamma difference)."""
    if n_periods < 1 or total_vol <= 0:
        raise InvalidArgumentError("need n_periods >= 1 and total_vol > 0")
    dt = maturity / n_periods
    law = GammaDifferenceLogReturnLaw(
        mu_period=total_mean / n_periods,
        shape=1.0 / n_periods,
        scale=total_vol / math.sqrt(2.0),
        log_discount=rate * dt,
    )
    return RegimeSwitchingModel(transition=np.array([[1.0]]), regimes=(law,))


# ---------------------------------------------------------------------------
# Path simulation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimulatedPath:
    """One simulated price path: cash prices s[0..n], the latent state per
    period (regime index or variance), and the discounted increments xi."""

    s: np.ndarray
    latent: np.ndarray
    xi: np.ndarray


def sample_path(model, n: int, s0, discount: DiscountCurve, rng,
                latent0=None) -> SimulatedPath:
    """Simulate one path of length n from s0 (positive scalar or d-vector)."""
    if isinstance(model, RegimeSwitchingModel):
        s, latent, xi = _sample_rs(model, n, s0, discount, rng, latent0, 1)
        return SimulatedPath(s=s[0], latent=latent[0], xi=xi[0])
    if isinstance(model, GarchModel):
        s, latent, xi = sample_paths_garch(model, n, s0, discount, rng, 1, h0=latent0)
        return SimulatedPath(s=s[0], latent=latent[0], xi=xi[0])
    raise InvalidArgumentError(f"unsupported model type {type(model).__name__}")


def _sample_rs(model: RegimeSwitchingModel, n, s0, discount, rng, regime0, n_paths):
    s0 = np.atleast_1d(np.asarray(s0, dtype=float))
    if np.any(s0 <= 0):
        raise InvalidStateError("s0 must be positive")
    if s0.size != model.d:
        raise InvalidArgumentError("s0 dimension does not match the model")
    regime0 = 0 if regime0 is None else int(regime0)

    regimes = np.empty((n_paths, n + 1), dtype=int)
    regimes[:, 0] = regime0
    cum_q = np.cumsum(model.transition, axis=1)
    xi = np.empty((n_paths, n, model.d))
    for k in range(1, n + 1):
        u = rng.random(n_paths)
        regimes[:, k] = (u[:, None] > cum_q[regimes[:, k - 1]]).sum(axis=1)
        for j in range(model.n_regimes):
            mask = regimes[:, k] == j
            cnt = int(mask.sum())
            if cnt:
                xi[mask, k - 1, :] = model.regimes[j].sample(rng, cnt)

    x = np.empty((n_paths, n + 1, model.d))
    x[:, 0, :] = s0
    for k in range(n):
        x[:, k + 1, :] = x[:, k, :] * (1.0 + xi[:, k, :])
    s = x / discount.beta[None, : n + 1, None]
    if model.d == 1:
        return s[:, :, 0], regimes, xi[:, :, 0]
    return s, regimes, xi


def sample_paths_rs(model: RegimeSwitchingModel, n: int, s0, discount: DiscountCurve,
                    rng, n_paths: int, regime0: int = 0):
    """Vectorized batch of regime-switching paths (d = 1 arrays when d = 1).
    Returns (s, regimes, xi) with shapes (p, n+1), (p, n+1), (p, n)."""
    return _sample_rs(model, n, s0, discount, rng, regime0, n_paths)


def sample_paths_garch(model: GarchModel, n: int, s0: float, discount: DiscountCurve,
                       rng, n_paths: int, h0: Optional[float] = None):
    """Vectorized batch of GARCH paths.  Returns (s, h, xi) with shapes
    (p, n+1), (p, n+1), (p, n); h[k] is the variance entering period k+1."""
    s0 = float(s0)
    if s0 <= 0:
        raise InvalidStateError("s0 must be positive")
    h0 = model.h_init if h0 is None else float(h0)
    eps = rng.standard_normal((n_paths, n))
    h = np.empty((n_paths, n + 1))
    h[:, 0] = h0
    xi = np.empty((n_paths, n))
    for k in range(n):
        xi[:, k] = model.pi1(h[:, k], eps[:, k])
        h[:, k + 1] = model.pi2(h[:, k], eps[:, k])
    x = np.empty((n_paths, n + 1))
    x[:, 0] = s0
    for k in range(n):
        x[:, k + 1] = x[:, k] * (1.0 + xi[:, k])
    s = x / discount.beta[None, : n + 1]
    return s, h, xi
