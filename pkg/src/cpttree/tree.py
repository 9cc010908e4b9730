"""Finite multiperiod scenario-tree markets, trading strategies and reference points.

A market is a rooted tree: each non-root node carries the transition
probability from its parent and the price-increment vector realised on that
step. Node depth is the time index, every leaf sits at depth T, and wealth is
the initial capital plus the path sum of allocation-increment dot products.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .errors import ValidationError

PROB_TOL = 1e-12


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True)
class ScenarioTree:
    """Event tree with per-node transition probabilities and increments.

    Node 0 is the root (parent -1, probability 1, zero increment). Parents
    precede children in the id order, so id order is a topological order.
    ``states`` optionally carries a per-node state vector for builders that
    evolve an underlying process.
    """

    horizon: int
    asset_dim: int
    parent: tuple[int, ...]
    prob: tuple[float, ...]
    increments: tuple[tuple[float, ...], ...]
    states: tuple[tuple[float, ...], ...] | None = None
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValidationError("horizon must be >= 1")
        if self.asset_dim < 1:
            raise ValidationError("asset_dim must be >= 1")
        n = len(self.parent)
        if len(self.prob) != n or len(self.increments) != n:
            raise ValidationError("parent, prob and increments must have equal length")
        if n == 0 or self.parent[0] != -1:
            raise ValidationError("node 0 must be the root with parent -1")
        for i in range(1, n):
            if not 0 <= self.parent[i] < i:
                raise ValidationError(f"node {i}: parent must precede the node")
        for i, p in enumerate(self.prob):
            if i == 0:
                if p != 1.0:
                    raise ValidationError("root probability must be 1")
            elif not 0.0 < p <= 1.0:
                raise ValidationError(f"node {i}: probability {p} outside (0, 1]")
        for i, ds in enumerate(self.increments):
            if len(ds) != self.asset_dim:
                raise ValidationError(f"node {i}: increment dimension != {self.asset_dim}")
            if not all(np.isfinite(ds)):
                raise ValidationError(f"node {i}: non-finite increment")
        if self.states is not None:
            if len(self.states) != n:
                raise ValidationError("states must cover every node")
            width = len(self.states[0])
            if any(len(s) != width for s in self.states):
                raise ValidationError("state vectors must share one dimension")
        depth = self.depth
        for i in range(n):
            children = self.children[i]
            if depth[i] == self.horizon:
                if children:
                    raise ValidationError(f"node {i}: children below depth T")
            else:
                if not children:
                    raise ValidationError(f"node {i}: leaf at depth {depth[i]} != T")
                s = float(sum(self.prob[c] for c in children))
                if abs(s - 1.0) > PROB_TOL:
                    raise ValidationError(
                        f"node {i}: children probabilities sum to {s!r}, not 1"
                    )

    @property
    def n_nodes(self) -> int:
        return len(self.parent)

    @cached_property
    def depth(self) -> np.ndarray:
        d = np.zeros(self.n_nodes, dtype=int)
        for i in range(1, self.n_nodes):
            d[i] = d[self.parent[i]] + 1
        d.flags.writeable = False
        return d

    @cached_property
    def children(self) -> tuple[tuple[int, ...], ...]:
        kids: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for i in range(1, self.n_nodes):
            kids[self.parent[i]].append(i)
        return tuple(tuple(k) for k in kids)

    @cached_property
    def leaf_ids(self) -> np.ndarray:
        ids = np.array([i for i in range(self.n_nodes) if not self.children[i]], dtype=int)
        ids.flags.writeable = False
        return ids

    @cached_property
    def nonterminal_ids(self) -> np.ndarray:
        ids = np.array([i for i in range(self.n_nodes) if self.children[i]], dtype=int)
        ids.flags.writeable = False
        return ids

    @cached_property
    def increment_matrix(self) -> np.ndarray:
        m = np.array(self.increments, dtype=float)
        m.flags.writeable = False
        return m

    @cached_property
    def path_prob(self) -> np.ndarray:
        """Probability of reaching each node (product of branch probabilities)."""
        p = np.ones(self.n_nodes)
        for i in range(1, self.n_nodes):
            p[i] = p[self.parent[i]] * self.prob[i]
        p.flags.writeable = False
        return p

    @cached_property
    def leaf_prob(self) -> np.ndarray:
        p = self.path_prob[self.leaf_ids]
        p.flags.writeable = False
        return p

    def is_leaf(self, node: int) -> bool:
        return not self.children[node]


@dataclass(frozen=True)
class PureStrategy:
    """Predictable allocation: the vector attached to a non-terminal node at
    depth t is the position held over the step t -> t+1."""

    allocations: Mapping[int, tuple[float, ...]]

    @classmethod
    def constant(cls, tree: ScenarioTree, vector: Sequence[float] | float) -> "PureStrategy":
        if np.isscalar(vector):
            vector = (float(vector),) * tree.asset_dim
        vec = tuple(float(v) for v in vector)
        if len(vec) != tree.asset_dim:
            raise ValidationError("allocation dimension != asset_dim")
        return cls({int(i): vec for i in tree.nonterminal_ids})

    @classmethod
    def zeros(cls, tree: ScenarioTree) -> "PureStrategy":
        return cls.constant(tree, (0.0,) * tree.asset_dim)

    @classmethod
    def from_flat(cls, tree: ScenarioTree, flat: np.ndarray) -> "PureStrategy":
        """Inverse of ``as_flat``: one row of length asset_dim per non-terminal node."""
        mat = np.asarray(flat, dtype=float).reshape(len(tree.nonterminal_ids), tree.asset_dim)
        return cls(
            {int(n): tuple(float(x) for x in mat[k]) for k, n in enumerate(tree.nonterminal_ids)}
        )

    def as_matrix(self, tree: ScenarioTree) -> np.ndarray:
        """Allocations stacked in nonterminal-id order; rejects structural mismatch."""
        rows = []
        for node in tree.nonterminal_ids:
            vec = self.allocations.get(int(node))
            if vec is None:
                raise ValidationError(f"strategy missing allocation for node {int(node)}")
            if len(vec) != tree.asset_dim:
                raise ValidationError(f"node {int(node)}: allocation dimension != asset_dim")
            rows.append(vec)
        extra = set(self.allocations) - {int(i) for i in tree.nonterminal_ids}
        if extra:
            raise ValidationError(f"strategy allocates at non-strategy node {min(extra)}")
        return np.array(rows, dtype=float)

    def as_flat(self, tree: ScenarioTree) -> np.ndarray:
        return self.as_matrix(tree).reshape(-1)


@dataclass(frozen=True)
class RandomizedStrategy:
    """Mixture of pure strategies driven by a finite external random source."""

    atoms: tuple[tuple[float, PureStrategy], ...]

    def __post_init__(self) -> None:
        if not self.atoms:
            raise ValidationError("randomized strategy needs at least one atom")
        total = 0.0
        for w, _ in self.atoms:
            if not 0.0 < w <= 1.0:
                raise ValidationError(f"atom weight {w} outside (0, 1]")
            total += w
        if abs(total - 1.0) > PROB_TOL:
            raise ValidationError(f"atom weights sum to {total!r}, not 1")

    @classmethod
    def equal_weights(cls, strategies: Sequence[PureStrategy]) -> "RandomizedStrategy":
        m = len(strategies)
        if m == 0:
            raise ValidationError("randomized strategy needs at least one atom")
        return cls(tuple((1.0 / m, s) for s in strategies))


Strategy = PureStrategy | RandomizedStrategy


@dataclass(frozen=True)
class ReferenceSpec:
    """Stochastic reference point together with a sub-hedging strategy and floor."""

    benchmark: Mapping[int, float]
    subhedge: PureStrategy
    floor: float

    @classmethod
    def zero(cls, tree: ScenarioTree) -> "ReferenceSpec":
        return cls(
            benchmark={int(leaf): 0.0 for leaf in tree.leaf_ids},
            subhedge=PureStrategy.zeros(tree),
            floor=0.0,
        )

    @classmethod
    def constant(cls, tree: ScenarioTree, level: float) -> "ReferenceSpec":
        """Constant benchmark, sub-hedged by the zero strategy with floor min(level, 0)."""
        return cls(
            benchmark={int(leaf): float(level) for leaf in tree.leaf_ids},
            subhedge=PureStrategy.zeros(tree),
            floor=min(float(level), 0.0),
        )

    def benchmark_array(self, tree: ScenarioTree) -> np.ndarray:
        vals = []
        for leaf in tree.leaf_ids:
            b = self.benchmark.get(int(leaf))
            if b is None:
                raise ValidationError(f"benchmark missing leaf {int(leaf)}")
            vals.append(float(b))
        return np.array(vals)


def terminal_wealth(tree: ScenarioTree, strategy: PureStrategy, x0: float) -> dict[int, float]:
    """Terminal wealth per leaf: x0 plus the path sum of allocation.increment."""
    theta = strategy.as_matrix(tree)
    col = {int(n): k for k, n in enumerate(tree.nonterminal_ids)}
    ds = tree.increment_matrix
    wealth = np.empty(tree.n_nodes)
    wealth[0] = float(x0)
    for i in range(1, tree.n_nodes):
        p = tree.parent[i]
        wealth[i] = wealth[p] + float(theta[col[p]] @ ds[i])
    return {int(leaf): float(wealth[leaf]) for leaf in tree.leaf_ids}


def validate_subhedge(tree: ScenarioTree, ref: ReferenceSpec, tol: float = 1e-12) -> tuple[bool, int | None]:
    """Check floor + subhedge wealth <= benchmark leaf-by-leaf; returns a witness leaf."""
    wealth = terminal_wealth(tree, ref.subhedge, ref.floor)
    for leaf in tree.leaf_ids:
        b = ref.benchmark.get(int(leaf))
        if b is None:
            raise ValidationError(f"benchmark missing leaf {int(leaf)}")
        if wealth[int(leaf)] > b + tol:
            return False, int(leaf)
    return True, None


def emit_market(tree: ScenarioTree) -> str:
    """Line-oriented market text; canonical node order makes round-trips byte-stable."""
    lines = [f"T={tree.horizon} d={tree.asset_dim}"]
    for i in range(1, tree.n_nodes):
        ds = " ".join(_fmt(v) for v in tree.increments[i])
        lines.append(f"node {i} parent {tree.parent[i]} p {_fmt(tree.prob[i])} dS {ds}")
    return "\n".join(lines) + "\n"


def parse_market(text: str) -> ScenarioTree:
    """Parse the market text format; the root (node 0) is implicit."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise ValidationError("empty market file")
    header = lines[0].split()
    try:
        horizon = int(header[0].removeprefix("T="))
        asset_dim = int(header[1].removeprefix("d="))
    except (IndexError, ValueError) as exc:
        raise ValidationError(f"bad market header {lines[0]!r}") from exc
    entries: dict[int, tuple[int, float, tuple[float, ...]]] = {}
    for ln in lines[1:]:
        tok = ln.split()
        if len(tok) < 7 or tok[0] != "node" or tok[2] != "parent" or tok[4] != "p" or tok[6] != "dS":
            raise ValidationError(f"bad market line {ln!r}")
        try:
            node = int(tok[1])
            par = int(tok[3])
            p = float(tok[5])
            ds = tuple(float(v) for v in tok[7:])
        except ValueError as exc:
            raise ValidationError(f"bad market line {ln!r}") from exc
        if node in entries:
            raise ValidationError(f"duplicate node {node}")
        entries[node] = (par, p, ds)
    n = len(entries)
    if sorted(entries) != list(range(1, n + 1)):
        raise ValidationError("node ids must be 1..n")
    parent = [-1] + [entries[i][0] for i in range(1, n + 1)]
    prob = [1.0] + [entries[i][1] for i in range(1, n + 1)]
    incs = [(0.0,) * asset_dim] + [entries[i][2] for i in range(1, n + 1)]
    return ScenarioTree(
        horizon=horizon,
        asset_dim=asset_dim,
        parent=tuple(parent),
        prob=tuple(prob),
        increments=tuple(incs),
    )
