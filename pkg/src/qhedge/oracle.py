"""Exact brute-force solver of the global quadratic hedging problem on small
finite trees, used to certify the backward recursion.

The oracle never touches the recursion: it stacks one unknown per
(initial capital, hedge vector per non-terminal node) and solves the weighted
least-squares problem min E[G^2] directly, so agreement with the recursion is
a genuine two-route check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .core import DiscountCurve, DiscreteStep, step_backward_discrete
from .exceptions import DegenerateModelError, InvalidArgumentError
from .models import RegimeSwitchingModel

MAX_TREE_NODES = 10_000


@dataclass
class TreeNode:
    node_id: int
    period: int
    regime: int
    prob: float                 # probability of reaching this node from the root
    x: np.ndarray               # discounted price vector
    parent: int | None = None
    delta: np.ndarray | None = None   # discounted increment on the entering edge
    children: list = field(default_factory=list)
    branch_probs: list = field(default_factory=list)


@dataclass
class MarketTree:
    """Explicit finite filtration: nodes[0] is the root with probability 1."""

    nodes: list
    depth: int

    def __post_init__(self):
        if not self.nodes or self.nodes[0].prob != 1.0:
            raise InvalidArgumentError("tree must have a root with probability 1")
        for node in self.nodes:
            if node.children:
                total = sum(node.branch_probs)
                if abs(total - 1.0) > 1e-12:
                    raise InvalidArgumentError(
                        f"branch probabilities at node {node.node_id} sum to {total!r}"
                    )

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def d(self) -> int:
        return self.nodes[0].x.size

    def leaves(self):
        return [node for node in self.nodes if not node.children]

    def nonterminal(self):
        return [node for node in self.nodes if node.children]

    def at_period(self, k: int):
        return [node for node in self.nodes if node.period == k]


def build_tree_from_rs(model: RegimeSwitchingModel, n: int, s0,
                       atoms=None, regime0: int = 0,
                       max_nodes: int = MAX_TREE_NODES) -> MarketTree:
    """Enumerate all regime/return combinations of a regime-switching model.

    atoms: per-regime (points, probs); defaults to each law's exact quadrature
    (discrete laws only).  Branches with zero transition probability are
    pruned.  Node count above max_nodes raises.
    """
    s0 = np.atleast_1d(np.asarray(s0, dtype=float))
    if atoms is None:
        if not all(hasattr(law, "atoms") for law in model.regimes):
            raise InvalidArgumentError(
                "continuous regimes need an explicit per-regime atoms argument"
            )
        atoms = tuple((law.atoms, law.probs) for law in model.regimes)
    root = TreeNode(node_id=0, period=0, regime=regime0, prob=1.0, x=s0)
    nodes = [root]
    frontier = [root]
    for k in range(1, n + 1):
        next_frontier = []
        for node in frontier:
            for j in range(model.n_regimes):
                q = model.transition[node.regime, j]
                if q == 0.0:
                    continue
                points, probs = atoms[j]
                points = np.atleast_2d(np.asarray(points, dtype=float))
                if points.shape[0] != np.asarray(probs).size:
                    points = points.T
                for y, p in zip(points, np.asarray(probs, dtype=float)):
                    delta = node.x * y
                    child = TreeNode(
                        node_id=len(nodes), period=k, regime=j,
                        prob=node.prob * q * p, x=node.x + delta,
                        parent=node.node_id, delta=delta,
                    )
                    node.children.append(child.node_id)
                    node.branch_probs.append(q * p)
                    nodes.append(child)
                    next_frontier.append(child)
                    if len(nodes) > max_nodes:
                        raise InvalidArgumentError(
                            f"tree exceeds the {max_nodes}-node cap at period {k}"
                        )
        frontier = next_frontier
    return MarketTree(nodes=nodes, depth=n)


@dataclass
class ExactSolution:
    """Stacked least-squares minimizer of E[G^2] over the whole tree."""

    v0: float
    phi: dict               # node_id -> hedge vector for the coming period
    mse: float


def _leaf_paths(tree: MarketTree):
    """Yield (leaf, [edge nodes from root], path probability)."""
    for leaf in tree.leaves():
        path = []
        node = leaf
        while node.parent is not None:
            path.append(node)
            node = tree.nodes[node.parent]
        yield leaf, path[::-1]


def discounted_payoff_at(tree: MarketTree, node: TreeNode, payoff,
                         discount: DiscountCurve) -> float:
    beta = discount.beta[node.period]
    cash_price = node.x / beta
    val = payoff(cash_price if tree.d > 1 else float(cash_price[0]))
    return beta * float(val)


def brute_force_solve(tree: MarketTree, payoff, discount: DiscountCurve) -> ExactSolution:
    """Solve min E[(beta_n C - V_n)^2] as one weighted linear least-squares
    problem with unknowns (V_0, phi at every non-terminal node)."""
    d = tree.d
    interior = tree.nonterminal()
    index = {node.node_id: 1 + i * d for i, node in enumerate(interior)}
    n_unknowns = 1 + d * len(interior)

    leaves = tree.leaves()
    rows = np.zeros((len(leaves), n_unknowns))
    targets = np.empty(len(leaves))
    weights = np.empty(len(leaves))
    for r, (leaf, path) in enumerate(_leaf_paths(tree)):
        rows[r, 0] = 1.0
        for edge_node in path:
            col = index[edge_node.parent]
            rows[r, col:col + d] = edge_node.delta
        targets[r] = discounted_payoff_at(tree, leaf, payoff, discount)
        weights[r] = leaf.prob

    sqw = np.sqrt(weights)
    theta, _, rank, _ = scipy.linalg.lstsq(rows * sqw[:, None], targets * sqw)
    if rank < n_unknowns:
        raise DegenerateModelError(
            f"stacked normal equations are rank deficient ({rank} < {n_unknowns})"
        )
    residual = targets - rows @ theta
    mse = float(weights @ residual**2)
    phi = {node.node_id: theta[index[node.node_id]:index[node.node_id] + d]
           for node in interior}
    return ExactSolution(v0=float(theta[0]), phi=phi, mse=mse)


@dataclass
class TreeSolution:
    """Backward recursion evaluated node by node on a tree.

    Per node: discounted option value, gamma = E[P_{k+1} | node], regression
    slope b and intercept alpha of the step leaving the node, the recursion
    portfolio value v, and the chosen hedge phi (rows of NaN at leaves).
    """

    value: np.ndarray
    gamma: np.ndarray
    b: np.ndarray
    alpha: np.ndarray
    v: np.ndarray
    phi: np.ndarray

    @property
    def v0(self) -> float:
        return float(self.value[0])


def tree_backward(tree: MarketTree, payoff, discount: DiscountCurve) -> TreeSolution:
    """Run the one-step backward recursion over every node of the tree, then
    roll the self-financing portfolio forward to get the hedge at each node."""
    n_nodes, d = tree.n_nodes, tree.d
    value = np.zeros(n_nodes)
    gamma = np.ones(n_nodes)
    b = np.full((n_nodes, d), np.nan)
    alpha = np.full((n_nodes, d), np.nan)

    for node in sorted(tree.nodes, key=lambda nd: -nd.period):
        if not node.children:
            value[node.node_id] = discounted_payoff_at(tree, node, payoff, discount)
            continue
        child_ids = np.asarray(node.children, dtype=int)
        deltas = np.stack([tree.nodes[c].delta for c in child_ids])
        step = DiscreteStep(probs=np.asarray(node.branch_probs), deltas=deltas)
        coeffs, c_prev, a = step_backward_discrete(
            step, gamma[child_ids], value[child_ids],
            period=node.period + 1, state=f"node {node.node_id}",
        )
        value[node.node_id] = c_prev
        gamma[node.node_id] = coeffs.gamma
        b[node.node_id] = coeffs.b
        alpha[node.node_id] = a

    v = np.zeros(n_nodes)
    phi = np.full((n_nodes, d), np.nan)
    v[0] = value[0]
    for node in sorted(tree.nodes, key=lambda nd: nd.period):
        if not node.children:
            continue
        phi[node.node_id] = alpha[node.node_id] - v[node.node_id] * b[node.node_id]
        for c in node.children:
            v[c] = v[node.node_id] + float(phi[node.node_id] @ tree.nodes[c].delta)
    return TreeSolution(value=value, gamma=gamma, b=b, alpha=alpha, v=v, phi=phi)


@dataclass
class OracleReport:
    v0_recursion: float
    v0_oracle: float
    max_phi_deviation: float
    mse_recursion: float
    mse_oracle: float

    @property
    def max_deviation(self) -> float:
        return max(abs(self.v0_recursion - self.v0_oracle), self.max_phi_deviation)


def recursion_vs_oracle(tree: MarketTree, payoff, discount: DiscountCurve) -> OracleReport:
    """Compare the recursion's (V_0, all phi) against the stacked solver."""
    exact = brute_force_solve(tree, payoff, discount)
    rec = tree_backward(tree, payoff, discount)

    max_phi_dev = 0.0
    for node in tree.nonterminal():
        dev = float(np.max(np.abs(rec.phi[node.node_id] - exact.phi[node.node_id])))
        max_phi_dev = max(max_phi_dev, dev)

    mse_rec = 0.0
    for leaf in tree.leaves():
        target = discounted_payoff_at(tree, leaf, payoff, discount)
        mse_rec += leaf.prob * (target - rec.v[leaf.node_id]) ** 2
    return OracleReport(
        v0_recursion=rec.v0, v0_oracle=exact.v0,
        max_phi_deviation=max_phi_dev,
        mse_recursion=float(mse_rec), mse_oracle=exact.mse,
    )
