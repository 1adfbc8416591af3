"""Reproduction front-end: config parsing, experiment orchestration, and
artifact emission (policy files, statistics tables, figure data).

Commands:
  qhedge solve --config CFG --out DIR
  qhedge hedge --config CFG --tables FILE --out DIR
  qhedge oracle-check --config CFG

Exit codes: 0 ok, 1 configuration/validation error, 2 numerical error.
The QHEDGE_WORKERS environment variable bounds the numba thread count.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .core import DiscountCurve
from .exceptions import (
    ConfigError,
    DegenerateModelError,
    InvalidArgumentError,
    InvalidStateError,
    QHedgeError,
    StaleTablesError,
    WeightBoundsError,
)
from .models import (
    DiscreteIncrementLaw,
    GarchModel,
    RegimeSwitchingModel,
    make_bs_model,
    make_ngarch_model,
    make_vg_model,
)
from .numerics import Grid1D, linear_interp
from .oracle import build_tree_from_rs, recursion_vs_oracle
from .simulator import (
    ErrorStats,
    compare_strategies,
    duan_delta_tables,
)
from .solver import (
    CallPayoff,
    PolicyTables,
    PutPayoff,
    SolverSpec,
    load_tables,
    save_tables,
    solve_garch,
    solve_rs,
)

CONFIG_VERSION = 1
FLOAT_FMT = "%.10g"


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    """Parsed, normalized experiment description.  `data` is the canonical
    dict: serializing and re-parsing it is an identity."""

    data: dict

    @property
    def s0(self) -> float:
        return self.data["s0"]

    @property
    def rate(self) -> float:
        return self.data["rate"]

    @property
    def maturity(self) -> float:
        return self.data["maturity"]

    @property
    def model(self) -> dict:
        return self.data["model"]

    @property
    def payoff(self) -> dict:
        return self.data["payoff"]

    @property
    def solver(self) -> dict:
        return self.data["solver"]

    @property
    def simulation(self) -> dict:
        return self.data["simulation"]

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True)

    def solve_hash(self) -> str:
        """Hash of everything the policy tables depend on (simulation block
        and s0 excluded)."""
        relevant = {k: self.data[k] for k in ("version", "rate", "maturity",
                                              "model", "payoff", "solver")}
        blob = json.dumps(relevant, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _require(block: dict, key: str, context: str):
    if key not in block:
        raise ConfigError(f"missing {context}.{key}")
    return block[key]


def _number(block: dict, key: str, context: str, positive=False, nonneg=False):
    val = _require(block, key, context)
    if not isinstance(val, (int, float)) or isinstance(val, bool):
        raise ConfigError(f"{context}.{key} must be a number")
    if positive and val <= 0:
        raise ConfigError(f"{context}.{key} must be > 0")
    if nonneg and val < 0:
        raise ConfigError(f"{context}.{key} must be >= 0")
    return float(val)


def _integer(block: dict, key: str, context: str, minimum=None):
    val = _require(block, key, context)
    if not isinstance(val, int) or isinstance(val, bool):
        raise ConfigError(f"{context}.{key} must be an integer")
    if minimum is not None and val < minimum:
        raise ConfigError(f"{context}.{key} must be >= {minimum}")
    return val


def _grid_block(block: dict, context: str) -> dict:
    return {
        "lo": _number(block, "lo", context),
        "hi": _number(block, "hi", context),
        "n": _integer(block, "n", context, minimum=2),
    }


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate and normalize a config dict (defaults filled in)."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    version = raw.get("version")
    if version != CONFIG_VERSION:
        raise ConfigError(f"config version must be {CONFIG_VERSION}, got {version!r}")

    model_in = _require(raw, "model", "config")
    family = _require(model_in, "family", "model")
    model = {"family": family, "n_periods": _integer(model_in, "n_periods", "model", 1)}
    if family in ("bs", "vg"):
        model["total_mean"] = _number(model_in, "total_mean", "model")
        model["total_vol"] = _number(model_in, "total_vol", "model", positive=True)
    elif family == "ngarch":
        for key in ("alpha0", "alpha1", "beta1", "lam"):
            model[key] = _number(model_in, key, "model", nonneg=(key != "alpha0"),
                                 positive=(key == "alpha0"))
        h0 = model_in.get("h0")
        if h0 is not None:
            if not isinstance(h0, (int, float)) or h0 <= 0:
                raise ConfigError("model.h0 must be a positive number or null")
            h0 = float(h0)
        model["h0"] = h0
    elif family == "rs_discrete":
        transition = _require(model_in, "transition", "model")
        regimes = _require(model_in, "regimes", "model")
        if not isinstance(regimes, list) or not regimes:
            raise ConfigError("model.regimes must be a nonempty list")
        model["transition"] = transition
        model["regimes"] = [
            {"atoms": _require(reg, "atoms", f"model.regimes[{i}]"),
             "probs": _require(reg, "probs", f"model.regimes[{i}]")}
            for i, reg in enumerate(regimes)
        ]
        model["initial_regime"] = model_in.get("initial_regime", 0)
    else:
        raise ConfigError(f"unknown model.family {family!r}")

    payoff_in = _require(raw, "payoff", "config")
    kind = _require(payoff_in, "kind", "payoff")
    if kind not in ("call", "put"):
        raise ConfigError(f"payoff.kind must be 'call' or 'put', got {kind!r}")
    payoff = {"kind": kind, "strike": _number(payoff_in, "strike", "payoff", positive=True)}

    solver_in = _require(raw, "solver", "config")
    solver = {
        "asset_grid": _grid_block(_require(solver_in, "asset_grid", "solver"),
                                  "solver.asset_grid"),
        "quadrature_size": _integer(solver_in, "quadrature_size", "solver", 1),
        "seed": _integer(solver_in, "seed", "solver"),
    }
    if family == "ngarch":
        solver["variance_grid"] = _grid_block(
            _require(solver_in, "variance_grid", "solver"), "solver.variance_grid")
    elif "variance_grid" in solver_in:
        solver["variance_grid"] = _grid_block(solver_in["variance_grid"],
                                              "solver.variance_grid")

    sim_in = raw.get("simulation", {})
    strategies = sim_in.get("strategies", ["optimal", "bs_delta"])
    if not isinstance(strategies, list) or not strategies:
        raise ConfigError("simulation.strategies must be a nonempty list")
    for s in strategies:
        if s not in ("optimal", "bs_delta", "duan_delta"):
            raise ConfigError(f"unknown strategy {s!r}")
        if s == "duan_delta" and family != "ngarch":
            raise ConfigError("duan_delta is only valid for the ngarch family")
    simulation = {
        "n_paths": _integer(sim_in, "n_paths", "simulation", 2) if sim_in else 10000,
        "seed": _integer(sim_in, "seed", "simulation") if sim_in else 0,
        "strategies": strategies,
    }

    data = {
        "version": CONFIG_VERSION,
        "s0": _number(raw, "s0", "config", positive=True),
        "rate": _number(raw, "rate", "config"),
        "maturity": _number(raw, "maturity", "config", positive=True),
        "model": model,
        "payoff": payoff,
        "solver": solver,
        "simulation": simulation,
    }
    return ExperimentConfig(data=data)


def load_config(path_or_name: str) -> ExperimentConfig:
    """Load a config from disk, or from the bundled set when the argument
    names one of the shipped experiments (e.g. 'bs_22')."""
    path = Path(path_or_name)
    if path.exists():
        text = path.read_text()
    else:
        name = path_or_name if path_or_name.endswith(".json") else path_or_name + ".json"
        ref = resources.files("qhedge").joinpath("configs", name)
        if not ref.is_file():
            raise ConfigError(f"config {path_or_name!r} is neither a file nor bundled")
        text = ref.read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    return parse_config(raw)


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def build_model(cfg: ExperimentConfig):
    m = cfg.model
    n = m["n_periods"]
    dt = cfg.maturity / n
    if m["family"] == "bs":
        return make_bs_model(n, m["total_mean"], m["total_vol"], cfg.rate, cfg.maturity)
    if m["family"] == "vg":
        return make_vg_model(n, m["total_mean"], m["total_vol"], cfg.rate, cfg.maturity)
    if m["family"] == "ngarch":
        return make_ngarch_model(m["alpha0"], m["alpha1"], m["beta1"], m["lam"],
                                 cfg.rate, dt, h0=m["h0"])
    if m["family"] == "rs_discrete":
        laws = tuple(DiscreteIncrementLaw(np.asarray(reg["atoms"], dtype=float),
                                          np.asarray(reg["probs"], dtype=float))
                     for reg in m["regimes"])
        return RegimeSwitchingModel(transition=np.asarray(m["transition"], dtype=float),
                                    regimes=laws)
    raise ConfigError(f"unknown model family {m['family']!r}")


def build_payoff(cfg: ExperimentConfig):
    p = cfg.payoff
    return CallPayoff(p["strike"]) if p["kind"] == "call" else PutPayoff(p["strike"])


def build_spec(cfg: ExperimentConfig) -> SolverSpec:
    sol = cfg.solver
    ag = sol["asset_grid"]
    vg = sol.get("variance_grid")
    return SolverSpec(
        asset_grid=Grid1D.uniform(ag["lo"], ag["hi"], ag["n"]),
        variance_grid=Grid1D.uniform(vg["lo"], vg["hi"], vg["n"]) if vg else None,
        n_periods=cfg.model["n_periods"],
        quadrature_size=sol["quadrature_size"],
        seed=sol["seed"],
    )


def build_discount(cfg: ExperimentConfig) -> DiscountCurve:
    n = cfg.model["n_periods"]
    return DiscountCurve(rate=cfg.rate, dt=cfg.maturity / n, n_periods=n)


def initial_latent(cfg: ExperimentConfig, model):
    if isinstance(model, GarchModel):
        return model.h_init
    return int(cfg.model.get("initial_regime", 0))


# ---------------------------------------------------------------------------
# CSV helpers (deterministic formatting)
# ---------------------------------------------------------------------------

def _write_csv(path: Path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for cell in row:
            if isinstance(cell, str):
                cells.append(cell)
            else:
                cells.append(FLOAT_FMT % cell)
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_solve(cfg: ExperimentConfig, out_dir: Path) -> int:
    model = build_model(cfg)
    payoff = build_payoff(cfg)
    spec = build_spec(cfg)
    discount = build_discount(cfg)
    meta = {
        "config_hash": cfg.solve_hash(),
        "rate": cfg.rate,
        "maturity": cfg.maturity,
        "payoff": cfg.payoff,
        "family": cfg.model["family"],
        "seed": spec.seed,
        "quadrature_size": spec.quadrature_size,
    }
    if isinstance(model, GarchModel):
        tables = solve_garch(model, payoff, spec, discount, meta=meta)
    else:
        tables = solve_rs(model, payoff, spec, discount, meta=meta)

    out_dir.mkdir(parents=True, exist_ok=True)
    save_tables(tables, out_dir / "tables.qhpt")

    latent0 = initial_latent(cfg, model)
    s_nodes = spec.asset_grid.nodes
    if tables.kind == "rs":
        c0 = tables.values[0, int(latent0)]
        a1 = tables.alphas[0, int(latent0)]
        b1 = tables.bs[0, int(latent0)]
    else:
        # slice the 2-D tables at the initial variance
        hg = tables.variance_grid
        c0 = np.array([linear_interp(hg, tables.values[0, :, i], latent0)
                       for i in range(s_nodes.size)])
        a1 = np.array([linear_interp(hg, tables.alphas[0, :, i], latent0)
                       for i in range(s_nodes.size)])
        b1 = np.array([linear_interp(hg, tables.bs[0, :, i], latent0)
                       for i in range(s_nodes.size)])
    phi1 = a1 - c0 * b1
    _write_csv(out_dir / "value_profile.csv", ["s", "value"], zip(s_nodes, c0))
    _write_csv(out_dir / "hedge_profile.csv", ["s", "phi1"], zip(s_nodes, phi1))

    v0 = float(linear_interp(spec.asset_grid, c0, cfg.s0))
    print(f"solved {cfg.model['family']} model: C_0({cfg.s0:g}) = {v0:.6f}")
    print(f"tables written to {out_dir / 'tables.qhpt'}")
    return 0


def cmd_hedge(cfg: ExperimentConfig, tables_path: Path, out_dir: Path) -> int:
    tables = load_tables(tables_path)
    expected = cfg.solve_hash()
    found = tables.meta.get("config_hash")
    if found != expected:
        raise StaleTablesError(
            f"tables were built under config hash {found}, current config hashes to {expected}"
        )
    model = build_model(cfg)
    payoff = build_payoff(cfg)
    spec = build_spec(cfg)
    discount = build_discount(cfg)
    sim = cfg.simulation
    strategies = tuple(sim["strategies"])

    duan = None
    if "duan_delta" in strategies:
        duan = duan_delta_tables(model, spec, discount, payoff)

    comparison = compare_strategies(
        model, payoff, spec, discount, sim["n_paths"], sim["seed"], cfg.s0,
        strategies=strategies, tables=tables, duan=duan,
        latent0=initial_latent(cfg, model),
    )

    out_dir.mkdir(parents=True, exist_ok=True)
    header, rows = comparison.stats_table()
    _write_csv(out_dir / "hedge_stats.csv", header, rows)
    for name, result in comparison.results.items():
        _write_csv(out_dir / f"density_{name}.csv", ["error", "density"],
                   zip(result.density_grid, result.density))

    for name, result in comparison.results.items():
        print(f"{name}: V0 = {result.v0:.6f}, RMSE = {result.stats.rmse:.6f}")
    print(f"statistics written to {out_dir / 'hedge_stats.csv'}")
    return 0


def cmd_oracle_check(cfg: ExperimentConfig, tolerance: float = 1e-9) -> int:
    if cfg.model["family"] != "rs_discrete":
        raise ConfigError("oracle-check requires an rs_discrete model (explicit atoms)")
    model = build_model(cfg)
    payoff = build_payoff(cfg)
    discount = build_discount(cfg)
    n = cfg.model["n_periods"]
    tree = build_tree_from_rs(model, n, np.full(model.d, cfg.s0),
                              regime0=int(cfg.model.get("initial_regime", 0)))
    report = recursion_vs_oracle(tree, payoff, discount)
    print(f"nodes: {tree.n_nodes}")
    print(f"V0 recursion = {report.v0_recursion:.12f}, oracle = {report.v0_oracle:.12f}")
    print(f"max deviation (V0, all phi): {report.max_deviation:.3e}")
    print(f"mse recursion = {report.mse_recursion:.12f}, oracle = {report.mse_oracle:.12f}")
    if report.max_deviation < tolerance:
        print("PASS")
        return 0
    print("FAIL")
    return 2


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _apply_worker_env():
    workers = os.environ.get("QHEDGE_WORKERS")
    if not workers:
        return
    try:
        count = max(1, int(workers))
    except ValueError:
        raise ConfigError(f"QHEDGE_WORKERS must be an integer, got {workers!r}")
    import numba

    numba.set_num_threads(min(count, numba.config.NUMBA_NUM_THREADS))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="qhedge",
                                     description="variance-optimal discrete-time hedging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="compute policy tables and profiles")
    p_solve.add_argument("--config", required=True)
    p_solve.add_argument("--out", required=True)

    p_hedge = sub.add_parser("hedge", help="simulate and compare hedging strategies")
    p_hedge.add_argument("--config", required=True)
    p_hedge.add_argument("--tables", required=True)
    p_hedge.add_argument("--out", required=True)

    p_oracle = sub.add_parser("oracle-check", help="recursion vs brute-force oracle")
    p_oracle.add_argument("--config", required=True)

    args = parser.parse_args(argv)
    try:
        _apply_worker_env()
        cfg = load_config(args.config)
        if args.command == "solve":
            return cmd_solve(cfg, Path(args.out))
        if args.command == "hedge":
            return cmd_hedge(cfg, Path(args.tables), Path(args.out))
        return cmd_oracle_check(cfg)
    except (ConfigError, StaleTablesError, InvalidArgumentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DegenerateModelError, WeightBoundsError, InvalidStateError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2
    except QHedgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
