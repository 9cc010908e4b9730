"""Derivative-free maximization of the CPT objective over tree strategies.

The objective is non-concave and, through the rank-dependent weighting,
piecewise smooth with sort-induced kinks, so the search is a seeded
multistart compass search: poll one coordinate at a time, accept strict
improvements, shrink the step when a full sweep fails. Results are
deterministic given the seed. No global-optimality claim is made.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .choquet import (
    CPTValue,
    OutcomeEngine,
    _choquet_arrays,
    cpt_value,
    cpt_value_from_outcomes,
)
from .errors import ValidationError
from .preferences import Distortion, PreferenceSpec
from .tree import PureStrategy, RandomizedStrategy, ReferenceSpec, ScenarioTree


@dataclass(frozen=True)
class SearchConfig:
    """Knobs for the compass search; the box is linear in the initial capital."""

    box_radius: float | None = None
    multistart: int = 4
    shrink: float = 0.5
    tol: float = 1e-9
    seed: int = 0
    max_box_doublings: int = 6

    def __post_init__(self) -> None:
        if self.box_radius is not None and self.box_radius <= 0:
            raise ValidationError("box_radius must be positive")
        if not 0.0 < self.shrink < 1.0:
            raise ValidationError("shrink must lie in (0, 1)")
        if self.tol <= 0:
            raise ValidationError("tol must be positive")
        if self.multistart < 1:
            raise ValidationError("multistart must be >= 1")


def default_box_radius(x0: float) -> float:
    return 8.0 * (abs(float(x0)) + 1.0)


_EVAL_BUDGET = 2_000_000


def _compass(
    value_of: Callable[[np.ndarray], float],
    shift: Callable[[np.ndarray, int, float], np.ndarray],
    z0: np.ndarray,
    state0: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    shrink: float,
    tol: float,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Coordinate poll with opportunistic acceptance and step shrinking.

    ``state`` is whatever cached transform of z the objective consumes;
    ``shift`` updates it when coordinate j moves by delta. The full step
    schedule is restarted from the incumbent until a whole cycle brings no
    improvement, which guards against unlucky step phasing near kinks.
    """
    z = z0.copy()
    state = state0
    best = value_of(state)
    m = z.size
    step0 = float(np.max(hi - lo)) / 4.0
    evals = 0
    for _ in range(50):
        cycle_start = best
        step = step0
        while step > tol and evals < _EVAL_BUDGET:
            fails = 0
            j = 0
            while fails < m and evals < _EVAL_BUDGET:
                improved = False
                for sgn in (1.0, -1.0):
                    nc = min(hi[j], max(lo[j], z[j] + sgn * step))
                    delta = nc - z[j]
                    if delta == 0.0:
                        continue
                    cand = shift(state, j, delta)
                    v = value_of(cand)
                    evals += 1
                    if v > best:
                        z[j] = nc
                        state = cand
                        best = v
                        improved = True
                        break
                fails = 0 if improved else fails + 1
                j = (j + 1) % m
            step *= shrink
        if best <= cycle_start or evals >= _EVAL_BUDGET:
            break
    return z, state, best


def _finite(v: float) -> float:
    if not np.isfinite(v):
        raise RuntimeError("non-finite objective value during search")
    return v


def _pure_objective(engine: OutcomeEngine, pref: PreferenceSpec, x0: float):
    def value_of(outs: np.ndarray) -> float:
        val = cpt_value_from_outcomes(outs, engine.leaf_prob, pref)
        return _finite(float(val.v))

    def shift(outs: np.ndarray, j: int, delta: float) -> np.ndarray:
        return outs + delta * engine.matrix[:, j]

    return value_of, shift


def optimize_pure(
    tree: ScenarioTree,
    pref: PreferenceSpec,
    x0: float,
    ref: ReferenceSpec,
    cfg: SearchConfig | None = None,
    extra_starts: Sequence[PureStrategy] = (),
) -> tuple[PureStrategy, CPTValue]:
    """Best pure strategy found by seeded multistart compass search in the box
    ||theta - subhedge||_inf <= radius per node, with boundary-hit doubling."""
    cfg = cfg or SearchConfig()
    if not pref.condition_a:
        warnings.warn("preferences fail the decisive well-posedness gate; the "
                      "objective may be effectively unbounded", stacklevel=2)
    engine = OutcomeEngine(tree, ref)
    phi = ref.subhedge.as_flat(tree)
    m = engine.n_vars
    radius = cfg.box_radius if cfg.box_radius is not None else default_box_radius(x0)
    rng = np.random.default_rng(cfg.seed)
    value_of, shift = _pure_objective(engine, pref, x0)

    starts = [np.zeros(m), np.clip(-phi, -radius, radius)]
    for s in extra_starts:
        starts.append(np.clip(s.as_flat(tree) - phi, -radius, radius))
    while len(starts) < 2 + len(extra_starts) + cfg.multistart:
        starts.append(rng.uniform(-radius, radius, m))

    lo = np.full(m, -radius)
    hi = np.full(m, radius)
    best_z, best_v = None, -np.inf
    for z0 in starts:
        outs0 = engine.outcomes(phi + z0, x0)
        z, _, v = _compass(value_of, shift, z0, outs0, lo, hi, cfg.shrink, cfg.tol)
        if v > best_v:
            best_z, best_v = z, v

    doublings = 0
    while doublings < cfg.max_box_doublings and np.max(np.abs(best_z)) >= radius * (1 - 1e-9):
        radius *= 2.0
        doublings += 1
        lo = np.full(m, -radius)
        hi = np.full(m, radius)
        outs0 = engine.outcomes(phi + best_z, x0)
        best_z, _, best_v = _compass(
            value_of, shift, best_z, outs0, lo, hi, cfg.shrink, cfg.tol
        )

    strategy = PureStrategy.from_flat(tree, phi + best_z)
    return strategy, cpt_value(tree, strategy, x0, ref, pref)


def optimize_randomized(
    tree: ScenarioTree,
    pref: PreferenceSpec,
    x0: float,
    ref: ReferenceSpec,
    n_atoms: int,
    cfg: SearchConfig | None = None,
) -> tuple[RandomizedStrategy, CPTValue]:
    """Joint search over an equal-weight mixture of pure strategies.

    One multistart atom-block is seeded at the pure optimum, so the value
    can only improve on the pure search.
    """
    if n_atoms < 1:
        raise ValidationError("n_atoms must be >= 1")
    cfg = cfg or SearchConfig()
    pure_strat, pure_val = optimize_pure(tree, pref, x0, ref, cfg)
    if n_atoms == 1:
        return RandomizedStrategy.equal_weights([pure_strat]), pure_val

    engine = OutcomeEngine(tree, ref)
    phi = ref.subhedge.as_flat(tree)
    m = engine.n_vars
    n_leaf = len(engine.leaf_prob)
    radius = cfg.box_radius if cfg.box_radius is not None else default_box_radius(x0)
    rng = np.random.default_rng(cfg.seed)
    probs = np.tile(engine.leaf_prob, n_atoms) / n_atoms

    def value_of(outs: np.ndarray) -> float:
        return _finite(float(cpt_value_from_outcomes(outs, probs, pref).v))

    def shift(outs: np.ndarray, j: int, delta: float) -> np.ndarray:
        block, local = divmod(j, m)
        new = outs.copy()
        seg = slice(block * n_leaf, (block + 1) * n_leaf)
        new[seg] = new[seg] + delta * engine.matrix[:, local]
        return new

    z_pure = np.clip(pure_strat.as_flat(tree) - phi, -radius, radius)
    starts = [np.tile(z_pure, n_atoms)]
    jitter = np.tile(z_pure, n_atoms) + rng.uniform(-radius / 8, radius / 8, m * n_atoms)
    starts.append(np.clip(jitter, -radius, radius))
    while len(starts) < 2 + cfg.multistart:
        starts.append(rng.uniform(-radius, radius, m * n_atoms))

    def outcomes_of(zz: np.ndarray) -> np.ndarray:
        return np.concatenate(
            [engine.outcomes(phi + zz[b * m : (b + 1) * m], x0) for b in range(n_atoms)]
        )

    lo = np.full(m * n_atoms, -radius)
    hi = np.full(m * n_atoms, radius)
    best_z, best_v = None, -np.inf
    for z0 in starts:
        z, _, v = _compass(value_of, shift, z0, outcomes_of(z0), lo, hi, cfg.shrink, cfg.tol)
        if v > best_v:
            best_z, best_v = z, v

    atoms = [PureStrategy.from_flat(tree, phi + best_z[b * m : (b + 1) * m]) for b in range(n_atoms)]
    strategy = RandomizedStrategy.equal_weights(atoms)
    value = cpt_value(tree, strategy, x0, ref, pref)
    if pure_val.v is not None and value.v < pure_val.v - 1e-9:
        raise RuntimeError("randomized search fell below its pure seed; search is broken")
    return strategy, value


# --- the fair-coin one-step model with quartic-root gains -------------------

_SQRT_DISTORTION = Distortion.power(0.5)


def coin_cpt_value(
    theta_values: Sequence[float],
    weights: Sequence[float] | None = None,
    w_plus: Distortion | Callable = _SQRT_DISTORTION,
) -> CPTValue:
    """Exact CPT value of an externally mixed position in the fair-coin market.

    The position takes value theta with the given external weight; the coin
    makes |theta| a gain or a loss with probability 1/2 each, gains valued by
    the quartic root, losses linearly with no loss distortion.
    """
    vals = np.abs(np.asarray(theta_values, dtype=float))
    if vals.size == 0:
        raise ValidationError("need at least one position atom")
    if weights is None:
        w = np.full(vals.size, 1.0 / vals.size)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != vals.shape:
            raise ValidationError("weights must match theta_values")
        if np.any(w <= 0) or abs(float(w.sum()) - 1.0) > 1e-12:
            raise ValidationError("weights must be positive and sum to 1")
    gains = np.concatenate((vals**0.25, [0.0]))
    gprobs = np.concatenate((w / 2.0, [0.5]))
    v_plus = _choquet_arrays(gains, gprobs, w_plus)
    v_minus = 0.5 * float(w @ vals)
    return CPTValue.from_parts(v_plus, v_minus)


@dataclass(frozen=True)
class LadderResult:
    """Best values and argmax |theta| atom lists, one level per external coin."""

    values: tuple[float, ...]
    argmax: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        for a, b in zip(self.values, self.values[1:]):
            if b < a - 1e-9:
                raise ValidationError("ladder values must be nondecreasing within 1e-9")


def ladder(
    n_max: int,
    cfg: SearchConfig | None = None,
    w_plus: Distortion | Callable = _SQRT_DISTORTION,
) -> LadderResult:
    """Maximal coin-model value using 2^k equal-weight external atoms, k <= n_max.

    Level k searches the nonnegative atom values directly (the objective
    depends on the position only through |theta|); level k+1 is seeded with
    the level-k argmax duplicated, so the ladder is nondecreasing by
    construction.
    """
    if n_max < 0:
        raise ValidationError("n_max must be >= 0")
    if n_max > 12:
        raise ValidationError("n_max > 12 refused: 2^n atoms per level")
    cfg = cfg or SearchConfig()
    radius = cfg.box_radius if cfg.box_radius is not None else 8.0
    rng = np.random.default_rng(cfg.seed)

    def value_of(vals: np.ndarray) -> float:
        return _finite(float(coin_cpt_value(vals, w_plus=w_plus).v))

    def shift(vals: np.ndarray, j: int, delta: float) -> np.ndarray:
        new = vals.copy()
        new[j] += delta
        return new

    values: list[float] = []
    argmaxes: list[tuple[float, ...]] = []
    prev: np.ndarray | None = None
    for k in range(n_max + 1):
        m = 2**k
        lo = np.zeros(m)
        hi = np.full(m, radius)
        starts = []
        if prev is not None:
            starts.append(np.repeat(prev, 2))
        starts.append(np.full(m, 0.25))
        while len(starts) < 1 + cfg.multistart:
            starts.append(rng.uniform(0.0, 1.0, m))
        best_z, best_v = None, -np.inf
        for z0 in starts:
            z, _, v = _compass(value_of, shift, z0, z0.copy(), lo, hi, cfg.shrink, cfg.tol)
            if v > best_v:
                best_z, best_v = z, v
        prev = np.sort(best_z)
        values.append(best_v)
        argmaxes.append(tuple(float(b) for b in prev))
    return LadderResult(values=tuple(values), argmax=tuple(argmaxes))


@dataclass(frozen=True)
class PerturbationResult:
    rows: tuple[tuple[float, float, float], ...]  # (delta, v, v_minus)
    base_value: float
    smallest_atom: float
    derivative: float


def perturbation_check(
    theta_values: Sequence[float],
    deltas: Sequence[float],
    weights: Sequence[float] | None = None,
) -> PerturbationResult:
    """Value curve of the split perturbation a +- delta on the smallest nonzero atoms.

    The loss side is invariant along delta, so the curve's slope at zero is
    the gain-side derivative
    (sqrt2/8) a^(-3/4) (-sqrt(P(A)+P1) + sqrt2 sqrt(P(A)+2 P1) - sqrt(P1)),
    with P(A) the mass at the smallest nonzero magnitude a and P1 the mass
    strictly above it.
    """
    vals = np.abs(np.asarray(theta_values, dtype=float))
    if weights is None:
        w = np.full(vals.size, 1.0 / vals.size)
    else:
        w = np.asarray(weights, dtype=float)
    positive = vals > 0.0
    if not np.any(positive):
        raise ValidationError("argmax has no nonzero atom; nothing to perturb")
    a = float(vals[positive].min())
    mass_a = float(w[vals == a].sum())
    p1 = float(w[vals > a].sum())
    deriv = (
        (np.sqrt(2.0) / 8.0)
        * a ** (-0.75)
        * (-np.sqrt(mass_a + p1) + np.sqrt(2.0) * np.sqrt(mass_a + 2.0 * p1) - np.sqrt(p1))
    )
    rows = []
    for delta in deltas:
        delta = float(delta)
        if not 0.0 <= delta <= a:
            raise ValidationError(f"delta={delta} outside [0, smallest atom {a}]")
        keep = vals != a
        new_vals = np.concatenate((vals[keep], vals[~keep] + delta, vals[~keep] - delta))
        new_w = np.concatenate((w[keep], w[~keep] / 2.0, w[~keep] / 2.0))
        val = coin_cpt_value(new_vals, new_w)
        rows.append((delta, float(val.v), float(val.v_minus)))
    base = float(coin_cpt_value(vals, w).v)
    return PerturbationResult(
        rows=tuple(rows), base_value=base, smallest_atom=a, derivative=float(deriv)
    )
