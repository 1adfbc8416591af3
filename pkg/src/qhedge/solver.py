"""Grid-based backward induction producing policy tables.

State spaces: (asset price, regime) for regime-switching models and
(asset price, variance) for the GARCH family.  One fixed quadrature draw set
is reused at every node and period (common random numbers), which makes the
tables smooth in the state and bit-reproducible for a given seed.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .core import DiscountCurve, check_gamma, hedge_ratio
from .exceptions import (
    DegenerateModelError,
    InvalidArgumentError,
    WeightBoundsError,
)
from .models import (
    GarchModel,
    RegimeSwitchingModel,
    _mixed_moments,
    rs_rho_gamma_step,
)
from .numerics import Grid1D, bilinear_interp, linear_interp

TABLES_MAGIC = b"QHPT01\n"
GAMMA_FLOOR = 1e-300


@dataclass(frozen=True)
class CallPayoff:
    strike: float

    def __call__(self, s):
        return np.maximum(np.asarray(s, dtype=float) - self.strike, 0.0)


@dataclass(frozen=True)
class PutPayoff:
    strike: float

    def __call__(self, s):
        return np.maximum(self.strike - np.asarray(s, dtype=float), 0.0)


@dataclass(frozen=True)
class SolverSpec:
    asset_grid: Grid1D
    n_periods: int
    quadrature_size: int
    seed: int
    variance_grid: Optional[Grid1D] = None

    def __post_init__(self):
        if self.n_periods < 1:
            raise InvalidArgumentError("n_periods must be >= 1")
        if self.quadrature_size < 1:
            raise InvalidArgumentError("quadrature_size must be >= 1")


@dataclass
class PolicyTables:
    """Gridded value/hedge functions from the backward induction.

    Layout (n = n_periods, L = number of regimes or variance nodes,
    n_s = asset nodes):

      values[k]      C_k over the state grid, k = 0..n, shape (L, n_s)
      alphas[k-1]    alpha_k, k = 1..n
      bs[k-1]        b_k, k = 1..n
      gammas[k-1]    gamma_k per latent state, k = 1..n+1 (last row all 1)
    """

    kind: str
    asset_grid: Grid1D
    variance_grid: Optional[Grid1D]
    n_periods: int
    values: np.ndarray
    alphas: np.ndarray
    bs: np.ndarray
    gammas: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n, n_s = self.n_periods, self.asset_grid.size
        n_lat = self.gammas.shape[1]
        if self.kind not in ("rs", "garch"):
            raise InvalidArgumentError(f"unknown tables kind {self.kind!r}")
        if self.values.shape != (n + 1, n_lat, n_s):
            raise InvalidArgumentError("values shape does not match grids")
        if self.alphas.shape != (n, n_lat, n_s) or self.bs.shape != (n, n_lat, n_s):
            raise InvalidArgumentError("alpha/b shape does not match grids")
        if self.gammas.shape != (n + 1, n_lat):
            raise InvalidArgumentError("gammas shape does not match")
        if np.any(self.gammas <= 0.0) or np.any(self.gammas > 1.0):
            raise WeightBoundsError("stored gamma tables must lie in (0, 1]")
        if self.kind == "garch":
            if self.variance_grid is None or self.variance_grid.size != n_lat:
                raise InvalidArgumentError("garch tables need a matching variance grid")

    @property
    def n_latent(self) -> int:
        return self.gammas.shape[1]


def _require_uniform(grid: Grid1D) -> tuple[float, float]:
    if not grid.is_uniform():
        raise InvalidArgumentError("the grid solver requires a uniform asset grid")
    return grid.lo, float(grid.nodes[1] - grid.nodes[0])


def _payoff_kind(payoff):
    if isinstance(payoff, CallPayoff):
        return _kernels.CALL, payoff.strike
    if isinstance(payoff, PutPayoff):
        return _kernels.PUT, payoff.strike
    return None, None


def _weighted_payoff_sums(s_nodes, scales, w_a, w_b, payoff, chunk=4096):
    """Generic-terminal fallback: exact payoff at the transformed points,
    two weighted sums, chunked over atoms to bound memory."""
    out_a = np.zeros(s_nodes.size)
    out_b = np.zeros(s_nodes.size)
    for a in range(0, scales.size, chunk):
        sl = slice(a, a + chunk)
        vals = np.asarray(payoff(s_nodes[:, None] * scales[sl][None, :]), dtype=float)
        out_a += vals @ w_a[sl]
        out_b += vals @ w_b[sl]
    return out_a, out_b


def solve_rs(model: RegimeSwitchingModel, payoff, spec: SolverSpec,
             discount: DiscountCurve, meta: Optional[dict] = None) -> PolicyTables:
    """Backward induction for a regime-switching model on the asset grid.

    The rho/gamma recursion is kept exact per regime; only the value and
    hedge integrals are discretized (quadrature in the increment, linear
    interpolation of C in the asset price).
    """
    if model.d != 1:
        raise InvalidArgumentError("the grid solver supports a single asset")
    if discount.n_periods != spec.n_periods:
        raise InvalidArgumentError("discount curve and solver disagree on n_periods")
    n, l = spec.n_periods, model.n_regimes
    s_lo, s_step = _require_uniform(spec.asset_grid)
    s_nodes = spec.asset_grid.nodes
    n_s = s_nodes.size
    ratio = discount.step_factor
    kind, strike = _payoff_kind(payoff)

    quad = model.make_quadrature(spec.quadrature_size, spec.seed)
    ys = [np.ascontiguousarray(points[:, 0]) for points, _ in quad]
    ws = [np.ascontiguousarray(w) for _, w in quad]

    values = np.empty((n + 1, l, n_s))
    alphas = np.empty((n, l, n_s))
    bs_tab = np.empty((n, l, n_s))
    gammas = np.empty((n + 1, l))
    gammas[n] = 1.0
    values[n] = np.asarray(payoff(s_nodes), dtype=float)[None, :]

    gam_next = np.ones(l)
    for k in range(n, 0, -1):
        try:
            rho, gam_k = rs_rho_gamma_step(model, gam_next)
        except (DegenerateModelError, WeightBoundsError) as exc:
            raise type(exc)(str(exc), period=k) from exc
        wb, _ = _mixed_moments(model, gam_next)
        wb_s = wb[:, 0, 0]
        rho_s = rho[:, 0]

        out0 = np.empty((l, n_s))
        outy = np.empty((l, n_s))
        for j in range(l):
            scales = np.ascontiguousarray((1.0 + ys[j]) / ratio)
            if k == n and kind is not None:
                o0, oy = _kernels.rs_terminal_sums(
                    s_lo, s_step, n_s, scales, ys[j], ws[j], strike, kind)
            elif k == n:
                o0, oy = _weighted_payoff_sums(s_nodes, scales, ws[j], ws[j] * ys[j], payoff)
            else:
                o0, oy = _kernels.rs_step_sums(
                    s_lo, s_step, values[k, j], scales, ys[j], ws[j])
            out0[j] = o0
            outy[j] = oy

        beta_prev = discount.beta[k - 1]
        for i in range(l):
            qg = model.transition[i] * gam_next
            sum0 = qg @ out0
            sumy = qg @ outy
            values[k - 1, i] = ratio * (sum0 - rho_s[i] * sumy) / gam_k[i]
            alphas[k - 1, i] = ratio * sumy / (s_nodes * wb_s[i])
            bs_tab[k - 1, i] = rho_s[i] / (beta_prev * s_nodes)
        gammas[k - 1] = gam_k
        gam_next = gam_k

    return PolicyTables(
        kind="rs", asset_grid=spec.asset_grid, variance_grid=None,
        n_periods=n, values=values, alphas=alphas, bs=bs_tab, gammas=gammas,
        meta=dict(meta or {}),
    )


def solve_garch(model: GarchModel, payoff, spec: SolverSpec,
                discount: DiscountCurve, meta: Optional[dict] = None,
                weighting: str = "optimal") -> PolicyTables:
    """Backward induction over the (asset, variance) grid.

    weighting="optimal" runs the variance-optimal recursion.  weighting="plain"
    computes the unweighted conditional expectation of the discounted value
    instead (used for pricing under a martingale measure, e.g. the Duan-style
    delta baseline); alpha/b tables are then zero.
    """
    if spec.variance_grid is None:
        raise InvalidArgumentError("solve_garch requires a variance grid")
    if discount.n_periods != spec.n_periods:
        raise InvalidArgumentError("discount curve and solver disagree on n_periods")
    if weighting not in ("optimal", "plain"):
        raise InvalidArgumentError(f"unknown weighting {weighting!r}")
    n = spec.n_periods
    s_lo, s_step = _require_uniform(spec.asset_grid)
    s_nodes = spec.asset_grid.nodes
    h_nodes = spec.variance_grid.nodes
    n_s, n_h = s_nodes.size, h_nodes.size
    ratio = discount.step_factor
    kind, strike = _payoff_kind(payoff)

    eps, w = model.make_quadrature(spec.quadrature_size, spec.seed)
    xi_tab = np.asarray(model.pi1(h_nodes[:, None], eps[None, :]), dtype=float)
    hq_tab = np.asarray(model.pi2(h_nodes[:, None], eps[None, :]), dtype=float)
    jh = np.clip(np.searchsorted(h_nodes, hq_tab, side="right") - 1, 0, n_h - 2).astype(np.int64)
    th = (hq_tab - h_nodes[jh]) / (h_nodes[jh + 1] - h_nodes[jh])
    scales = np.ascontiguousarray((1.0 + xi_tab) / ratio)

    values = np.empty((n + 1, n_h, n_s))
    alphas = np.zeros((n, n_h, n_s))
    bs_tab = np.zeros((n, n_h, n_s))
    gammas = np.empty((n + 1, n_h))
    gammas[n] = 1.0
    values[n] = np.asarray(payoff(s_nodes), dtype=float)[None, :]

    gam_next = np.ones(n_h)
    for k in range(n, 0, -1):
        g = gam_next[jh] + th * (gam_next[jh + 1] - gam_next[jh])
        np.clip(g, GAMMA_FLOOR, 1.0, out=g)
        wg = w[None, :] * g
        if weighting == "plain":
            # martingale-measure pricing: no reweighting, straight average
            wg = np.broadcast_to(w, (n_h, w.size)).copy()
            b_k = np.full(n_h, np.nan)
            m_k = np.zeros(n_h)
            gam_k = np.ones(n_h)
            w0 = wg
            wgx = np.zeros_like(wg)
        else:
            b_k = np.einsum("jm,jm->j", wg, xi_tab**2)
            if np.any(b_k <= 0.0):
                idx = int(np.argmin(b_k))
                raise DegenerateModelError(
                    "weighted second moment B <= 0",
                    period=k, state=f"h={h_nodes[idx]!r}",
                )
            m_k = np.einsum("jm,jm->j", wg, xi_tab)
            gam_k = wg.sum(axis=1) - m_k**2 / b_k
            bad = np.where((gam_k <= 0.0) | (gam_k > 1.0 + 1e-9))[0]
            if bad.size:
                raise WeightBoundsError(
                    f"gamma = {gam_k[bad[0]]!r} outside (0, 1]",
                    period=k, state=f"h={h_nodes[bad[0]]!r}",
                )
            gam_k = np.minimum(gam_k, 1.0)
            w0 = wg
            wgx = wg * xi_tab

        if k == n and kind is not None:
            out0, outg = _kernels.garch_terminal_sums(
                s_lo, s_step, n_s, scales, w0, wgx, strike, kind)
        elif k == n:
            out0 = np.empty((n_h, n_s))
            outg = np.empty((n_h, n_s))
            for j in range(n_h):
                o0, og = _weighted_payoff_sums(s_nodes, scales[j], w0[j], wgx[j], payoff)
                out0[j] = o0
                outg[j] = og
        else:
            out0, outg = _kernels.garch_step_sums(
                s_lo, s_step, values[k], jh, th, scales, w0, wgx)

        if weighting == "plain":
            values[k - 1] = ratio * out0
        else:
            beta_prev = discount.beta[k - 1]
            values[k - 1] = ratio * (out0 - (m_k / b_k)[:, None] * outg) / gam_k[:, None]
            alphas[k - 1] = ratio * outg / (s_nodes[None, :] * b_k[:, None])
            bs_tab[k - 1] = m_k[:, None] / (s_nodes[None, :] * (beta_prev * b_k)[:, None])
        gammas[k - 1] = gam_k
        gam_next = gam_k

    return PolicyTables(
        kind="garch", asset_grid=spec.asset_grid, variance_grid=spec.variance_grid,
        n_periods=n, values=values, alphas=alphas, bs=bs_tab, gammas=gammas,
        meta=dict(meta or {}),
    )


def policy_lookup(tables: PolicyTables, k: int, state, v_prev: float):
    """Interpolate (alpha_k, b_k, C_{k-1}) at the state and return
    (phi, c) with phi = alpha - v_prev * b.

    state = (s, regime index) for rs tables, (s, h) for garch tables.
    """
    if not 1 <= k <= tables.n_periods:
        raise InvalidArgumentError(f"period {k} outside 1..{tables.n_periods}")
    s, latent = state
    if tables.kind == "rs":
        i = int(latent)
        a = linear_interp(tables.asset_grid, tables.alphas[k - 1, i], s)
        b = linear_interp(tables.asset_grid, tables.bs[k - 1, i], s)
        c = linear_interp(tables.asset_grid, tables.values[k - 1, i], s)
    else:
        a = bilinear_interp(tables.asset_grid, tables.variance_grid,
                            tables.alphas[k - 1].T, s, latent)
        b = bilinear_interp(tables.asset_grid, tables.variance_grid,
                            tables.bs[k - 1].T, s, latent)
        c = bilinear_interp(tables.asset_grid, tables.variance_grid,
                            tables.values[k - 1].T, s, latent)
    return float(hedge_ratio(a, b, v_prev)), float(c)


# ---------------------------------------------------------------------------
# Serialization: versioned deterministic container (documented in README)
# ---------------------------------------------------------------------------

def save_tables(tables: PolicyTables, path) -> None:
    """Write tables to the QHPT01 container: magic, little-endian uint32
    header length, JSON header, then raw C-order float64/int buffers."""
    arrays = [
        ("values", tables.values),
        ("alphas", tables.alphas),
        ("bs", tables.bs),
        ("gammas", tables.gammas),
        ("asset_nodes", tables.asset_grid.nodes),
    ]
    if tables.variance_grid is not None:
        arrays.append(("variance_nodes", tables.variance_grid.nodes))
    header = {
        "format": "QHPT01",
        "kind": tables.kind,
        "n_periods": tables.n_periods,
        "arrays": [
            {"name": name, "shape": list(arr.shape), "dtype": "<f8"}
            for name, arr in arrays
        ],
        "meta": tables.meta,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(TABLES_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for _, arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_tables(path) -> PolicyTables:
    with open(path, "rb") as fh:
        magic = fh.read(len(TABLES_MAGIC))
        if magic != TABLES_MAGIC:
            raise InvalidArgumentError(f"{path} is not a policy tables file")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        data = {}
        for desc in header["arrays"]:
            count = int(np.prod(desc["shape"])) if desc["shape"] else 1
            buf = fh.read(count * 8)
            data[desc["name"]] = np.frombuffer(buf, dtype="<f8").reshape(desc["shape"]).copy()
    asset_grid = Grid1D(data["asset_nodes"])
    variance_grid = Grid1D(data["variance_nodes"]) if "variance_nodes" in data else None
    return PolicyTables(
        kind=header["kind"], asset_grid=asset_grid, variance_grid=variance_grid,
        n_periods=header["n_periods"], values=data["values"], alphas=data["alphas"],
        bs=data["bs"], gammas=data["gammas"], meta=header.get("meta", {}),
    )
