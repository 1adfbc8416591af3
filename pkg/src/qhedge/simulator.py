"""Monte Carlo evaluation of hedging strategies.

Simulates model paths once, runs each strategy on the same paths (paired
comparison), and produces the hedging-error statistics block and kernel
density data.  Strategies: the variance-optimal policy from the tables, a
lognormal-formula delta hedger, and a martingale-measure delta hedger for
the GARCH family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.special

from .core import DiscountCurve, HedgeRun
from .exceptions import InvalidArgumentError
from .models import (
    GammaDifferenceLogReturnLaw,
    GarchModel,
    GaussianLogReturnLaw,
    RegimeSwitchingModel,
    SimulatedPath,
    emm_counterpart,
    sample_paths_garch,
    sample_paths_rs,
)
from .numerics import bilinear_interp, linear_interp
from .solver import (
    CallPayoff,
    PolicyTables,
    PutPayoff,
    SolverSpec,
    policy_lookup,
    solve_garch,
    solve_rs,
)

STRATEGY_KINDS = ("optimal", "bs_delta", "duan_delta")


# ---------------------------------------------------------------------------
# Closed-form lognormal pricing (the delta hedger's model)
# ---------------------------------------------------------------------------

def _norm_cdf(x):
    return scipy.special.ndtr(np.asarray(x, dtype=float))


def bs_price(s, strike: float, vol: float, rate: float, tau: float, kind: str = "call"):
    """Lognormal-model option value with annualized vol and remaining
    maturity tau in years."""
    s = np.asarray(s, dtype=float)
    if tau <= 0.0 or vol <= 0.0:
        intrinsic = s - strike if kind == "call" else strike - s
        out = np.maximum(intrinsic, 0.0)
        return float(out) if out.ndim == 0 else out
    sq = vol * math.sqrt(tau)
    d1 = (np.log(s / strike) + (rate + 0.5 * vol**2) * tau) / sq
    d2 = d1 - sq
    disc = math.exp(-rate * tau)
    if kind == "call":
        out = s * _norm_cdf(d1) - strike * disc * _norm_cdf(d2)
    else:
        out = strike * disc * _norm_cdf(-d2) - s * _norm_cdf(-d1)
    return float(out) if out.ndim == 0 else out


def bs_delta(s, strike: float, vol: float, rate: float, tau: float, kind: str = "call"):
    """Lognormal-model delta; at tau = 0 the call delta degenerates to the
    indicator of finishing in the money."""
    s = np.asarray(s, dtype=float)
    if strike <= 0 or np.any(s <= 0):
        raise InvalidArgumentError("bs_delta needs positive prices and strike")
    if tau <= 0.0 or vol <= 0.0:
        ind = (s > strike).astype(float)
        out = ind if kind == "call" else ind - 1.0
        return float(out) if out.ndim == 0 else out
    sq = vol * math.sqrt(tau)
    d1 = (np.log(s / strike) + (rate + 0.5 * vol**2) * tau) / sq
    out = _norm_cdf(d1)
    if kind == "put":
        out = out - 1.0
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Error statistics and densities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ErrorStats:
    """The ten-row hedging-error statistics block.

    VaR is the upper empirical quantile of G = discounted payoff minus
    terminal portfolio (positive = shortfall), by order statistic ceil(q*N).
    Kurtosis is the raw (non-excess) standardized fourth moment.
    """

    average: float
    median: float
    volatility: float
    skewness: float
    kurtosis: float
    minimum: float
    maximum: float
    var99: float
    var999: float
    rmse: float
    n: int
    degenerate_moments: bool = False

    ROWS = ("Average", "Median", "Volatility", "Skewness", "Kurtosis",
            "Minimum", "Maximum", "VaR(99%)", "VaR(99.9%)", "RMSE")

    def as_rows(self):
        return [self.average, self.median, self.volatility, self.skewness,
                self.kurtosis, self.minimum, self.maximum, self.var99,
                self.var999, self.rmse]


def error_statistics(errors) -> ErrorStats:
    x = np.asarray(errors, dtype=float).ravel()
    n = x.size
    if n < 2:
        raise InvalidArgumentError("need at least 2 errors")
    avg = float(x.mean())
    centered = x - avg
    m2 = float((centered**2).mean())
    degenerate = m2 == 0.0
    if degenerate:
        skew = kurt = 0.0
    else:
        skew = float((centered**3).mean() / m2**1.5)
        kurt = float((centered**4).mean() / m2**2)
    srt = np.sort(x)

    def upper_quantile(q):
        return float(srt[min(math.ceil(q * n), n) - 1])

    return ErrorStats(
        average=avg,
        median=float(np.median(x)),
        volatility=float(x.std(ddof=1)),
        skewness=skew,
        kurtosis=kurt,
        minimum=float(srt[0]),
        maximum=float(srt[-1]),
        var99=upper_quantile(0.99),
        var999=upper_quantile(0.999),
        rmse=float(np.sqrt((x**2).mean())),
        n=n,
        degenerate_moments=degenerate,
    )


def density_data(errors, bandwidth: Optional[float] = None, n_points: int = 512):
    """Gaussian kernel density on n_points equally spaced points covering
    [min - 3 bw, max + 3 bw]; Silverman bandwidth 1.06 sigma N^(-1/5)."""
    x = np.asarray(errors, dtype=float).ravel()
    if x.size < 10:
        raise InvalidArgumentError("need at least 10 errors for a density")
    sigma = float(x.std(ddof=1))
    bw = bandwidth if bandwidth is not None else 1.06 * sigma * x.size ** (-0.2)
    if bw <= 0:
        raise InvalidArgumentError("bandwidth must be positive (degenerate sample?)")
    grid = np.linspace(x.min() - 3.0 * bw, x.max() + 3.0 * bw, n_points)
    z = (grid[:, None] - x[None, :]) / bw
    dens = np.exp(-0.5 * z**2).sum(axis=1) / (x.size * bw * math.sqrt(2.0 * math.pi))
    return grid, dens


def optimality_moments(errors, increments):
    """Sampled first-order conditions of the quadratic problem:
    mean(G) and mean(G * Delta_k) per period, with their standard errors."""
    g = np.asarray(errors, dtype=float)
    deltas = np.asarray(increments, dtype=float)
    n = g.size
    mean_g = float(g.mean())
    se_g = float(g.std(ddof=1) / math.sqrt(n))
    prods = g[:, None] * deltas
    means = prods.mean(axis=0)
    ses = prods.std(axis=0, ddof=1) / math.sqrt(n)
    return mean_g, se_g, means, ses


# ---------------------------------------------------------------------------
# Strategy evaluation on simulated paths
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DuanDeltaTables:
    """Martingale-measure price surface and its finite-difference deltas.

    deltas[k-1] is the hedge used for period k, evaluated at the period-(k-1)
    state; q_values[k] is the measure-Q price table at period k."""

    q_values: np.ndarray
    deltas: np.ndarray
    tables: PolicyTables


def duan_delta_tables(model: GarchModel, spec: SolverSpec, discount: DiscountCurve,
                      payoff, meta: Optional[dict] = None) -> DuanDeltaTables:
    """Price the payoff by plain backward expectation under the model's
    martingale-measure dynamics, then differentiate in the asset coordinate
    (central differences inside the grid, one-sided at the boundaries)."""
    emm = emm_counterpart(model)
    tabs = solve_garch(emm, payoff, spec, discount, meta=meta, weighting="plain")
    deltas = np.stack([
        np.gradient(tabs.values[k], spec.asset_grid.nodes, axis=1, edge_order=1)
        for k in range(spec.n_periods)
    ])
    return DuanDeltaTables(q_values=tabs.values, deltas=deltas, tables=tabs)


def _initial_value(tables: PolicyTables, s0: float, latent0) -> float:
    if tables.kind == "rs":
        return float(linear_interp(tables.asset_grid, tables.values[0, int(latent0)], s0))
    return float(bilinear_interp(tables.asset_grid, tables.variance_grid,
                                 tables.values[0].T, s0, latent0))


def hedge_paths_optimal(tables: PolicyTables, s, latent, discount: DiscountCurve,
                        payoff):
    """Run the optimal policy on a batch of paths.  Returns (errors, v0)."""
    s = np.asarray(s, dtype=float)
    n = s.shape[1] - 1
    if n != tables.n_periods:
        raise InvalidArgumentError("path length does not match the tables")
    x = s * discount.beta[None, :]
    v0 = _initial_value(tables, float(s[0, 0]), latent[0, 0])
    v = np.full(s.shape[0], v0)
    for k in range(1, n + 1):
        s_prev = s[:, k - 1]
        if tables.kind == "rs":
            i = int(latent[0, k - 1]) if tables.n_latent == 1 else None
            if i is not None:
                a = linear_interp(tables.asset_grid, tables.alphas[k - 1, i], s_prev)
                b = linear_interp(tables.asset_grid, tables.bs[k - 1, i], s_prev)
            else:
                a = np.empty(s.shape[0])
                b = np.empty(s.shape[0])
                for j in range(tables.n_latent):
                    mask = latent[:, k - 1] == j
                    if mask.any():
                        a[mask] = linear_interp(tables.asset_grid,
                                                tables.alphas[k - 1, j], s_prev[mask])
                        b[mask] = linear_interp(tables.asset_grid,
                                                tables.bs[k - 1, j], s_prev[mask])
        else:
            h_prev = latent[:, k - 1]
            a = bilinear_interp(tables.asset_grid, tables.variance_grid,
                                tables.alphas[k - 1].T, s_prev, h_prev)
            b = bilinear_interp(tables.asset_grid, tables.variance_grid,
                                tables.bs[k - 1].T, s_prev, h_prev)
        phi = a - v * b
        v = v + phi * (x[:, k] - x[:, k - 1])
    g = discount.beta[n] * np.asarray(payoff(s[:, n]), dtype=float) - v
    return g, v0


def hedge_paths_bs_delta(s, latent, discount: DiscountCurve, payoff, vol,
                         variance_scaled: bool = False):
    """Delta hedging with the lognormal formula.  vol is the annualized
    volatility; with variance_scaled=True the current latent variance is
    annualized instead (GARCH case) and vol is ignored."""
    kind = "call" if isinstance(payoff, CallPayoff) else "put"
    if not isinstance(payoff, (CallPayoff, PutPayoff)):
        raise InvalidArgumentError("delta hedging needs a call or put payoff")
    s = np.asarray(s, dtype=float)
    n = s.shape[1] - 1
    x = s * discount.beta[None, :]
    dt = discount.dt
    if variance_scaled:
        vol0 = math.sqrt(float(latent[0, 0]) / dt)
    else:
        vol0 = vol
    v0 = float(bs_price(s[0, 0], payoff.strike, vol0, discount.rate,
                        discount.maturity, kind))
    v = np.full(s.shape[0], v0)
    for k in range(1, n + 1):
        tau = (n - k + 1) * dt
        if variance_scaled:
            vol_k = np.sqrt(latent[:, k - 1] / dt)
            sq = vol_k * math.sqrt(tau)
            d1 = (np.log(s[:, k - 1] / payoff.strike)
                  + (discount.rate + 0.5 * vol_k**2) * tau) / sq
            phi = _norm_cdf(d1)
            if kind == "put":
                phi = phi - 1.0
        else:
            phi = bs_delta(s[:, k - 1], payoff.strike, vol, discount.rate, tau, kind)
        v = v + phi * (x[:, k] - x[:, k - 1])
    g = discount.beta[n] * np.asarray(payoff(s[:, n]), dtype=float) - v
    return g, v0


def hedge_paths_duan(duan: DuanDeltaTables, s, latent, discount: DiscountCurve,
                     payoff):
    """Delta hedging on the martingale-measure price surface."""
    tabs = duan.tables
    s = np.asarray(s, dtype=float)
    n = s.shape[1] - 1
    x = s * discount.beta[None, :]
    v0 = float(bilinear_interp(tabs.asset_grid, tabs.variance_grid,
                               duan.q_values[0].T, s[0, 0], latent[0, 0]))
    v = np.full(s.shape[0], v0)
    for k in range(1, n + 1):
        phi = bilinear_interp(tabs.asset_grid, tabs.variance_grid,
                              duan.deltas[k - 1].T, s[:, k - 1], latent[:, k - 1])
        v = v + phi * (x[:, k] - x[:, k - 1])
    g = discount.beta[n] * np.asarray(payoff(s[:, n]), dtype=float) - v
    return g, v0


def run_hedge(tables: PolicyTables, path: SimulatedPath, discount: DiscountCurve,
              payoff) -> HedgeRun:
    """Hedge one simulated path with the optimal policy; the self-financing
    identity V_k = V_{k-1} + phi_k . Delta_k holds exactly by construction."""
    s = np.asarray(path.s, dtype=float)
    n = s.size - 1
    x = s * discount.beta
    deltas = np.diff(x)
    v0 = _initial_value(tables, float(s[0]), path.latent[0])
    phis = np.empty(n)
    v = v0
    for k in range(1, n + 1):
        phi, _ = policy_lookup(tables, k, (float(s[k - 1]), path.latent[k - 1]), v)
        phis[k - 1] = phi
        v = v + phi * deltas[k - 1]
    payoff_disc = discount.beta[n] * float(payoff(s[n]))
    return HedgeRun.from_policy(v0, phis[:, None], deltas[:, None], payoff_disc)


# ---------------------------------------------------------------------------
# Paired strategy comparison
# ---------------------------------------------------------------------------

@dataclass
class StrategyResult:
    name: str
    v0: float
    stats: ErrorStats
    errors: np.ndarray
    density_grid: np.ndarray
    density: np.ndarray


@dataclass
class ComparisonResult:
    results: dict
    increments: np.ndarray
    seed: int

    def stats_table(self):
        """Rows Average..RMSE, one column per strategy, in run order."""
        names = list(self.results)
        rows = []
        for r, label in enumerate(ErrorStats.ROWS):
            rows.append([label] + [self.results[n].stats.as_rows()[r] for n in names])
        return ["Stats"] + names, rows


def default_bs_vol(model, dt: float) -> float:
    """Annualized log-return volatility implied by a one-regime model."""
    laws = getattr(model, "regimes", None)
    if laws is None or len(laws) != 1:
        raise InvalidArgumentError("bs_delta needs an explicit vol for this model")
    law = laws[0]
    if isinstance(law, GaussianLogReturnLaw):
        return law.sigma_p / math.sqrt(dt)
    if isinstance(law, GammaDifferenceLogReturnLaw):
        return math.sqrt(2.0 * law.shape * law.scale**2 / dt)
    raise InvalidArgumentError("bs_delta needs an explicit vol for this model")


def compare_strategies(model, payoff, spec: SolverSpec, discount: DiscountCurve,
                       n_paths: int, seed: int, s0: float,
                       strategies=("optimal", "bs_delta"),
                       tables: Optional[PolicyTables] = None,
                       duan: Optional[DuanDeltaTables] = None,
                       bs_vol: Optional[float] = None,
                       latent0=None) -> ComparisonResult:
    """Simulate n_paths once and evaluate every requested strategy on the
    same paths.  Tables are solved on demand when not supplied."""
    for name in strategies:
        if name not in STRATEGY_KINDS:
            raise InvalidArgumentError(f"unknown strategy {name!r}")
    is_garch = isinstance(model, GarchModel)
    if "duan_delta" in strategies and not is_garch:
        raise InvalidArgumentError("duan_delta is only valid for GARCH-family models")

    rng = np.random.default_rng(seed)
    if is_garch:
        s, latent, _ = sample_paths_garch(model, spec.n_periods, s0, discount, rng,
                                          n_paths, h0=latent0)
    else:
        if model.d != 1:
            raise InvalidArgumentError("path comparison supports a single asset")
        s, latent, _ = sample_paths_rs(model, spec.n_periods, s0, discount, rng,
                                       n_paths, regime0=int(latent0 or 0))

    x = s * discount.beta[None, :]
    increments = np.diff(x, axis=1)

    results = {}
    for name in strategies:
        if name == "optimal":
            if tables is None:
                solve = solve_garch if is_garch else solve_rs
                tables = solve(model, payoff, spec, discount)
            g, v0 = hedge_paths_optimal(tables, s, latent, discount, payoff)
        elif name == "bs_delta":
            if is_garch:
                g, v0 = hedge_paths_bs_delta(s, latent, discount, payoff,
                                             vol=None, variance_scaled=True)
            else:
                vol = bs_vol if bs_vol is not None else default_bs_vol(model, discount.dt)
                g, v0 = hedge_paths_bs_delta(s, latent, discount, payoff, vol=vol)
        else:
            if duan is None:
                duan = duan_delta_tables(model, spec, discount, payoff)
            g, v0 = hedge_paths_duan(duan, s, latent, discount, payoff)
        grid, dens = density_data(g)
        results[name] = StrategyResult(
            name=name, v0=v0, stats=error_statistics(g), errors=g,
            density_grid=grid, density=dens,
        )
    return ComparisonResult(results=results, increments=increments, seed=seed)
