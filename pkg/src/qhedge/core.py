"""Model-agnostic backward recursion for the global quadratic hedging problem.

One backward step regresses next-period value on the discounted price
increment under the weight carried back from later periods.  All arithmetic
is in discounted units: Delta_k = beta_k S_k - beta_{k-1} S_{k-1}, portfolio
value V_k = V_0 + sum phi_j . Delta_j, terminal error G = beta_n C - V_n.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateModelError, InvalidArgumentError, WeightBoundsError
from .numerics import spd_solve

# gamma is mathematically <= 1; accumulated rounding may overshoot by this much
# before we treat it as a genuine hypothesis violation.
GAMMA_ONE_SLACK = 1e-9


@dataclass(frozen=True)
class DiscountCurve:
    """Deterministic discounting at a continuously compounded annual rate.

    beta[k] = exp(-rate * k * dt) for k = 0..n_periods.
    """

    rate: float
    dt: float
    n_periods: int
    beta: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.dt <= 0 or self.n_periods < 1:
            raise InvalidArgumentError("dt must be positive and n_periods >= 1")
        beta = np.exp(-self.rate * self.dt * np.arange(self.n_periods + 1))
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)

    @property
    def step_factor(self) -> float:
        """beta_k / beta_{k-1}, constant across periods."""
        return float(np.exp(-self.rate * self.dt))

    @property
    def maturity(self) -> float:
        return self.dt * self.n_periods


@dataclass(frozen=True)
class DiscreteStep:
    """Explicit conditional law of the one-period discounted increment:
    atom a occurs with probability probs[a], moves discounted prices by
    deltas[a] (a d-vector) and lands in next_state_ids[a]."""

    probs: np.ndarray
    deltas: np.ndarray
    next_state_ids: np.ndarray | None = None

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        deltas = np.atleast_2d(np.asarray(self.deltas, dtype=float))
        if deltas.shape[0] != probs.size:
            deltas = deltas.T
        if probs.ndim != 1 or probs.size == 0 or deltas.shape[0] != probs.size:
            raise InvalidArgumentError("probs and deltas must align, one row per atom")
        if np.any(probs <= 0):
            raise InvalidArgumentError("atom probabilities must be positive")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise InvalidArgumentError(f"atom probabilities sum to {probs.sum()!r}, not 1")
        ids = self.next_state_ids
        if ids is not None:
            ids = np.asarray(ids, dtype=int)
            if ids.shape != probs.shape:
                raise InvalidArgumentError("next_state_ids must align with probs")
            ids.setflags(write=False)
        probs = probs.copy()
        deltas = deltas.copy()
        probs.setflags(write=False)
        deltas.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "deltas", deltas)
        object.__setattr__(self, "next_state_ids", ids)

    @property
    def n_atoms(self) -> int:
        return self.probs.size

    @property
    def d(self) -> int:
        return self.deltas.shape[1]


@dataclass(frozen=True)
class StepCoefficients:
    """Per-period regression coefficients of the backward recursion.

    a_mat : weighted second moment E[Delta Delta^T gamma'] (d x d)
    mu    : weighted mean E[Delta gamma'] (d,)
    b     : a_mat^{-1} mu, the mean-correction slope of the optimal hedge
    gamma : one-period weight E[(1 - b.Delta) gamma'], in (0, 1]
    """

    a_mat: np.ndarray
    mu: np.ndarray
    b: np.ndarray
    gamma: float

    def __post_init__(self):
        a = np.asarray(self.a_mat, dtype=float)
        mu = np.asarray(self.mu, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if np.max(np.abs(a - a.T)) > 1e-10 * max(1.0, np.max(np.abs(a))):
            raise InvalidArgumentError("a_mat must be symmetric")
        scale = max(1.0, float(np.max(np.abs(mu))))
        if np.max(np.abs(a @ b - mu)) > 1e-10 * scale:
            raise InvalidArgumentError("b does not solve a_mat @ b = mu within 1e-10")
        if not 0.0 < self.gamma <= 1.0:
            raise WeightBoundsError(f"gamma = {self.gamma!r} is outside (0, 1]")
        for arr in (a, mu, b):
            arr.setflags(write=False)
        object.__setattr__(self, "a_mat", a)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "b", b)


def check_gamma(gamma: float, period=None, state=None) -> float:
    if gamma <= 0.0:
        raise WeightBoundsError(f"gamma = {gamma!r} <= 0", period=period, state=state)
    if gamma > 1.0 + GAMMA_ONE_SLACK:
        raise WeightBoundsError(f"gamma = {gamma!r} > 1", period=period, state=state)
    return min(gamma, 1.0)


def step_backward_discrete(step: DiscreteStep, gamma_next, c_next, beta_ratio: float = 1.0,
                           period=None, state=None):
    """One backward step of the recursion over an explicit discrete law.

    gamma_next, c_next : per-atom values at the reached states; c_next is the
        option value in cash units of the later period.  beta_ratio is
        beta_k / beta_{k-1}; pass 1.0 when c_next is already in the discounted
        units of the atoms' deltas.

    Returns (StepCoefficients, c_prev, alpha) where c_prev is the option value
    one period earlier (cash units) and phi = alpha - V_prev * b is the
    optimal hedge.
    """
    gamma_next = np.asarray(gamma_next, dtype=float)
    x = beta_ratio * np.asarray(c_next, dtype=float)
    p, deltas = step.probs, step.deltas
    if gamma_next.shape != p.shape or x.shape != p.shape:
        raise InvalidArgumentError("gamma_next and c_next must align with the atoms")

    w = p * gamma_next
    a_mat = (deltas * w[:, None]).T @ deltas
    mu = deltas.T @ w
    try:
        b = spd_solve(a_mat, mu)
    except DegenerateModelError as exc:
        raise DegenerateModelError(
            f"singular weighted second moment: {exc}", period=period, state=state
        ) from exc
    one_minus = 1.0 - deltas @ b
    gamma = check_gamma(float(w @ one_minus), period=period, state=state)
    alpha = spd_solve(a_mat, deltas.T @ (w * x))
    c_prev = float(w @ (one_minus * x)) / gamma
    coeffs = StepCoefficients(a_mat=a_mat, mu=mu, b=b, gamma=gamma)
    return coeffs, c_prev, alpha


def initial_capital(expectation_cp1: float, gamma_1: float) -> float:
    """Optimal initial investment: E[beta_n C P_1] / gamma_1."""
    if not 0.0 < gamma_1 <= 1.0 + GAMMA_ONE_SLACK:
        raise WeightBoundsError(f"gamma_1 = {gamma_1!r} is outside (0, 1]")
    return expectation_cp1 / min(gamma_1, 1.0)


def hedge_ratio(alpha, b, v_prev: float):
    """Optimal holdings for the coming period: alpha - V_prev * b."""
    alpha = np.asarray(alpha, dtype=float)
    b = np.asarray(b, dtype=float)
    if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(b)) and np.isfinite(v_prev)):
        raise InvalidArgumentError("hedge_ratio requires finite inputs")
    return alpha - v_prev * b


def accrue_portfolio(v_prev: float, phi, delta) -> float:
    """Self-financing update in discounted units: V_k = V_{k-1} + phi . Delta_k."""
    return v_prev + float(np.dot(np.asarray(phi, dtype=float), np.asarray(delta, dtype=float)))


@dataclass(frozen=True)
class HedgeRun:
    """One simulated path's portfolio trajectory and terminal error."""

    v: np.ndarray      # V_0..V_n
    phi: np.ndarray    # (n, d) holdings phi_1..phi_n
    g: float           # beta_n * C - V_n

    @classmethod
    def from_policy(cls, v0: float, phis, deltas, discounted_payoff: float) -> "HedgeRun":
        phis = np.atleast_2d(np.asarray(phis, dtype=float))
        deltas = np.atleast_2d(np.asarray(deltas, dtype=float))
        if phis.shape != deltas.shape:
            raise InvalidArgumentError("phi and delta sequences must align")
        v = np.empty(phis.shape[0] + 1)
        v[0] = v0
        for k in range(phis.shape[0]):
            v[k + 1] = accrue_portfolio(v[k], phis[k], deltas[k])
        return cls(v=v, phi=phis, g=discounted_payoff - v[-1])


@dataclass(frozen=True)
class MartingaleDiagnostics:
    """Realizations of the weight processes along one path.

    u[k-1] = U_k, z[k] = Z_k = prod_{j<=k} U_j (z[0] = 1), and
    p[k-1] = P_k = prod_{j>=k} (1 - b_j . Delta_j) with p[n] = P_{n+1} = 1.
    """

    u: np.ndarray
    z: np.ndarray
    p: np.ndarray


def diagnostics_along_path(bs, deltas, gammas) -> MartingaleDiagnostics:
    """Compute U_k, Z_k, P_k along one realized path.

    bs, deltas : per-period vectors b_k and Delta_k, k = 1..n.
    gammas     : gamma_k evaluated at the realized state, k = 1..n+1, with
                 gammas[-1] = 1 by convention.
    """
    bs = np.atleast_2d(np.asarray(bs, dtype=float))
    deltas = np.atleast_2d(np.asarray(deltas, dtype=float))
    gammas = np.asarray(gammas, dtype=float)
    n = bs.shape[0]
    if deltas.shape != bs.shape:
        raise InvalidArgumentError("bs and deltas must align")
    if gammas.shape != (n + 1,):
        raise InvalidArgumentError("gammas must have length n+1 (gamma_1..gamma_{n+1})")

    factors = 1.0 - np.einsum("kd,kd->k", bs, deltas)
    u = factors * gammas[1:] / gammas[:-1]
    z = np.concatenate([[1.0], np.cumprod(u)])
    p = np.concatenate([np.cumprod(factors[::-1])[::-1], [1.0]])
    return MartingaleDiagnostics(u=u, z=z, p=p)
