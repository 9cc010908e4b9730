"""Exact Choquet integrals on finite laws and the CPT objective on trees.

For a nonnegative discrete random variable the survival function is a step
function, so the distorted integral int_0^inf w(P(X >= y)) dy is a finite sum
over the distinct atom values. Atom order is canonicalized before any
summation, which makes equal laws evaluate to bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .extreal import POS_INF, ExtReal, ext_sub, is_finite, is_inf
from .preferences import PreferenceSpec
from .tree import (
    PROB_TOL,
    PureStrategy,
    RandomizedStrategy,
    ReferenceSpec,
    ScenarioTree,
    Strategy,
)


@dataclass(frozen=True)
class DiscreteRV:
    """Finite law given by (value, probability) atoms."""

    atoms: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if not self.atoms:
            raise ValidationError("discrete law needs at least one atom")
        total = 0.0
        for v, p in self.atoms:
            if not np.isfinite(v):
                raise ValidationError("atom values must be finite")
            if not 0.0 < p <= 1.0:
                raise ValidationError(f"atom probability {p} outside (0, 1]")
            total += p
        if abs(total - 1.0) > PROB_TOL:
            raise ValidationError(f"atom probabilities sum to {total!r}, not 1")

    @classmethod
    def from_arrays(cls, values: Sequence[float], probs: Sequence[float]) -> "DiscreteRV":
        return cls(tuple((float(v), float(p)) for v, p in zip(values, probs, strict=True)))

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        a = np.array(self.atoms, dtype=float)
        return a[:, 0], a[:, 1]


def _choquet_arrays(values: np.ndarray, probs: np.ndarray, w: Callable) -> float:
    if values.size == 0:
        return 0.0
    if np.any(values < 0.0):
        raise ValidationError("choquet_nonneg requires nonnegative atom values")
    order = np.lexsort((probs, values))
    v = values[order]
    p = probs[order]
    distinct, start = np.unique(v, return_index=True)
    mass = np.add.reduceat(p, start)
    # rounding in the cumulative sum may push the total an ulp past 1
    survival = np.minimum(np.cumsum(mass[::-1])[::-1], 1.0)
    prev = np.concatenate(([0.0], distinct[:-1]))
    return float(np.sum((distinct - prev) * np.asarray(w(survival), dtype=float)))


def choquet_nonneg(rv: DiscreteRV, w: Callable) -> float:
    """Exact distorted survival integral of a nonnegative finite law."""
    if abs(float(w(0.0))) > 1e-12:
        raise ValidationError("distortion must satisfy w(0) = 0")
    values, probs = rv.arrays()
    return _choquet_arrays(values, probs, w)


@dataclass(frozen=True)
class CPTValue:
    """Gain side, loss side and their difference, with the admissibility flag.

    v is defined whenever the loss side is finite; an infinite gain side then
    yields an infinite v. On finite trees every component is finite.
    """

    v_plus: ExtReal
    v_minus: ExtReal
    v: ExtReal | None
    admissible: bool

    @classmethod
    def from_parts(cls, v_plus: ExtReal, v_minus: ExtReal) -> "CPTValue":
        admissible = is_finite(v_minus)
        v = ext_sub(v_plus, v_minus) if admissible else None
        return cls(v_plus=v_plus, v_minus=v_minus, v=v, admissible=admissible)

    def to_json_dict(self) -> dict:
        return {
            "v_plus": None if is_inf(self.v_plus) else float(self.v_plus),
            "v_minus": None if is_inf(self.v_minus) else float(self.v_minus),
            "v": None if self.v is None or is_inf(self.v) else float(self.v),
            "admissible": self.admissible,
            "v_plus_infinite": is_inf(self.v_plus),
        }


class OutcomeEngine:
    """Precomputed linear map from flat allocations to leaf outcomes X_T - B.

    Leaf wealth is affine in the allocation vector, so one leaf-by-variable
    matrix built per (tree, reference) pair turns each objective evaluation
    into a matrix-vector product.
    """

    def __init__(self, tree: ScenarioTree, ref: ReferenceSpec | None = None):
        self.tree = tree
        nt = tree.nonterminal_ids
        self.col = {int(n): k for k, n in enumerate(nt)}
        d = tree.asset_dim
        self.n_vars = len(nt) * d
        leaves = tree.leaf_ids
        A = np.zeros((len(leaves), self.n_vars))
        for row, leaf in enumerate(leaves):
            node = int(leaf)
            while node != 0:
                par = tree.parent[node]
                c = self.col[par] * d
                A[row, c : c + d] += tree.increment_matrix[node]
                node = par
        self.matrix = A
        self.leaf_prob = tree.leaf_prob
        self.benchmark = ref.benchmark_array(tree) if ref is not None else np.zeros(len(leaves))

    def outcomes(self, flat_theta: np.ndarray, x0: float) -> np.ndarray:
        return x0 + self.matrix @ flat_theta - self.benchmark


def _leaf_outcomes_mat(
    tree: ScenarioTree, theta: np.ndarray, x0: float, benchmark: np.ndarray | None = None
) -> np.ndarray:
    col = {int(n): k for k, n in enumerate(tree.nonterminal_ids)}
    ds = tree.increment_matrix
    wealth = np.empty(tree.n_nodes)
    wealth[0] = float(x0)
    for i in range(1, tree.n_nodes):
        p = tree.parent[i]
        wealth[i] = wealth[p] + float(theta[col[p]] @ ds[i])
    outs = wealth[tree.leaf_ids]
    if benchmark is not None:
        outs = outs - benchmark
    return outs


def leaf_outcomes(
    tree: ScenarioTree, strategy: PureStrategy, x0: float, benchmark: np.ndarray | None = None
) -> np.ndarray:
    """X_T - B per leaf by direct wealth recursion; linear memory in the tree."""
    return _leaf_outcomes_mat(tree, strategy.as_matrix(tree), x0, benchmark)


def _strategy_outcome_law(
    tree: ScenarioTree, strategy: Strategy, x0: float, benchmark: np.ndarray | None
) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(strategy, RandomizedStrategy):
        outs = []
        probs = []
        for weight, pure in strategy.atoms:
            outs.append(leaf_outcomes(tree, pure, x0, benchmark))
            probs.append(weight * tree.leaf_prob)
        return np.concatenate(outs), np.concatenate(probs)
    return leaf_outcomes(tree, strategy, x0, benchmark), tree.leaf_prob


def cpt_value_from_outcomes(
    outcomes: np.ndarray, probs: np.ndarray, pref: PreferenceSpec
) -> CPTValue:
    """CPT value of a finite outcome law relative to an already-subtracted benchmark."""
    gains = np.asarray(pref.utility.u_plus(np.maximum(outcomes, 0.0)), dtype=float)
    losses = np.asarray(pref.utility.u_minus(np.maximum(-outcomes, 0.0)), dtype=float)
    v_plus = _choquet_arrays(gains, probs, pref.distortion.plus)
    v_minus = _choquet_arrays(losses, probs, pref.distortion.minus)
    return CPTValue.from_parts(v_plus, v_minus)


def cpt_value(
    tree: ScenarioTree,
    strategy: Strategy,
    x0: float,
    ref: ReferenceSpec,
    pref: PreferenceSpec,
) -> CPTValue:
    """Exact CPT value of a pure or randomized strategy on a finite tree.

    Randomized strategies are evaluated on the product law of the external
    mixing atom and the tree scenario.
    """
    outs, probs = _strategy_outcome_law(tree, strategy, x0, ref.benchmark_array(tree))
    return cpt_value_from_outcomes(outs, probs, pref)


@dataclass(frozen=True)
class AuxParams:
    """Constants of the distortion-free dominating objective.

    k_minus_tilde is the product of the loss-side envelope constants; the
    gain-side constant assembles the Chebyshev tail chain that certifies the
    domination inequalities. Minimality is not claimed.
    """

    k_plus_tilde: float
    k_minus_tilde: float
    lam: float
    subhedge: PureStrategy
    floor: float

    def __post_init__(self) -> None:
        if self.k_plus_tilde <= 0 or self.k_minus_tilde <= 0:
            raise ValidationError("aux constants must be positive")


def derive_aux_params(pref: PreferenceSpec, ref: ReferenceSpec) -> AuxParams:
    """Aux constants certified by the envelope assumptions for (pref, ref)."""
    if pref.lam is None:
        raise ValidationError("aux params need the decisive gate (lambda is undefined)")
    lam = pref.lam
    gp = pref.distortion.g_plus
    gamma_p = pref.distortion.gamma_plus
    if lam * gamma_p <= 1.0:
        raise ValidationError("need lambda * gamma_plus > 1")
    kp = pref.utility.k_plus
    b = ref.floor
    lam_ap = lam * pref.utility.alpha_plus
    core = 2.0 ** (lam - 1.0) * kp**lam
    k_plus_tilde = 1.0 + (gp / (lam * gamma_p - 1.0)) * (
        core * (1.0 + abs(b) ** lam_ap) + core + 1.0
    )
    k_minus_tilde = pref.distortion.g_minus * pref.utility.k_minus
    return AuxParams(
        k_plus_tilde=k_plus_tilde,
        k_minus_tilde=k_minus_tilde,
        lam=lam,
        subhedge=ref.subhedge,
        floor=ref.floor,
    )


def aux_value(
    tree: ScenarioTree,
    strategy: Strategy,
    x0: float,
    aux: AuxParams,
    pref: PreferenceSpec,
) -> tuple[float, float, float]:
    """Dominating objective: moment bound on gains, truncated moment on losses.

    Returns (plus, minus, plus - minus) where
    plus  = k+~ E(1 + |x0 + sum (theta-phi) dS|^(lam alpha+)) and
    minus = k-~ (E [x0 + sum (theta-phi) dS - b]_-^alpha-  - 1).
    """
    phi = aux.subhedge.as_matrix(tree)
    lam_ap = aux.lam * pref.utility.alpha_plus
    am = pref.utility.alpha_minus

    def parts(pure: PureStrategy) -> tuple[float, float]:
        w = _leaf_outcomes_mat(tree, pure.as_matrix(tree) - phi, x0)
        p = tree.leaf_prob
        plus = float(p @ (1.0 + np.abs(w) ** lam_ap))
        minus = float(p @ np.maximum(aux.floor - w, 0.0) ** am)
        return plus, minus

    if isinstance(strategy, RandomizedStrategy):
        plus = minus = 0.0
        for weight, pure in strategy.atoms:
            pl, mi = parts(pure)
            plus += weight * pl
            minus += weight * mi
    else:
        plus, minus = parts(strategy)
    v_plus = aux.k_plus_tilde * plus
    v_minus = aux.k_minus_tilde * (minus - 1.0)
    return v_plus, v_minus, v_plus - v_minus


def tail_power_integral(c: float, e: float) -> ExtReal:
    """int_1^inf c / y^e dy: c/(e-1) when e > 1, +inf otherwise."""
    if c <= 0 or e <= 0:
        raise ValidationError("tail_power_integral needs c > 0 and e > 0")
    if e > 1.0:
        return c / (e - 1.0)
    return POS_INF


def moment_tail_certificate(moments: Mapping[int, float], delta: float) -> float:
    """Finite bound on int_0^inf P^delta(Y >= y) dy from one polynomial moment.

    Chebyshev gives P(Y >= y) <= E[Y^N] y^-N, so the smallest N with
    N*delta > 1 certifies the bound 1 + (E[Y^N])^delta / (N*delta - 1).
    """
    if delta <= 0:
        raise ValidationError("delta must be positive")
    admissible = sorted(n for n in moments if n * delta > 1.0)
    if not admissible:
        raise ValidationError("insufficient moments: need some N with N * delta > 1")
    n = admissible[0]
    m = float(moments[n])
    if m < 0:
        raise ValidationError("moments must be nonnegative")
    return 1.0 + m**delta / (n * delta - 1.0)


def cpt_value_json(value: CPTValue) -> dict:
    return value.to_json_dict()


__all__ = [
    "AuxParams",
    "CPTValue",
    "DiscreteRV",
    "OutcomeEngine",
    "aux_value",
    "choquet_nonneg",
    "cpt_value",
    "cpt_value_from_outcomes",
    "derive_aux_params",
    "moment_tail_certificate",
    "tail_power_integral",
]
