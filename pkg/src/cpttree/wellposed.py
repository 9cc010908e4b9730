"""Closed-form ill-posedness constructions and an empirical boundedness probe.

The two-step construction trades a heavy-tailed second-period position whose
gain integral diverges while the loss integral stays finite whenever the
gain exponent ratio can be squeezed below 1 and the loss ratio above it.
Truncating the position keeps the value finite but lets it grow without
bound, so boundedness cannot be restored by capping strategies.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

from .builders import build_market_from_level_pmfs, coin_pmf, uniform_quantile_pmf
from .choquet import cpt_value, tail_power_integral
from .errors import ValidationError
from .extreal import POS_INF, ExtReal, ext_json, ext_sub, is_finite, is_inf
from .optimize import SearchConfig, optimize_pure
from .preferences import PreferenceSpec, check_conditions
from .tree import PureStrategy, ReferenceSpec, ScenarioTree

VERDICT_ILL_POSED = "ill-posed"
VERDICT_WELL_POSED_INSTANCE = "well-posed-instance"
VERDICT_INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class IllposednessReport:
    v_plus: ExtReal
    v_minus: ExtReal
    verdict: str
    scan: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self) -> None:
        if self.verdict == VERDICT_ILL_POSED:
            diverging_scan = self.scan is not None and all(
                a[1] < b[1] for a, b in zip(self.scan, self.scan[1:])
            )
            if not ((is_inf(self.v_plus) and is_finite(self.v_minus)) or diverging_scan):
                raise ValidationError(
                    "ill-posed verdict needs an infinite gain side with finite losses "
                    "or a strictly growing scan"
                )

    def to_json_dict(self) -> dict:
        v = None
        if is_finite(self.v_minus):
            v = ext_json(ext_sub(self.v_plus, self.v_minus))
        return {
            "v_plus": ext_json(self.v_plus),
            "v_minus": ext_json(self.v_minus),
            "v": v,
            "verdict": self.verdict,
            "scan": [list(row) for row in self.scan] if self.scan is not None else None,
        }


class ScanRow(NamedTuple):
    n: float
    v_plus: float
    v_minus: float
    v: float


def _power_power_params(pref: PreferenceSpec) -> tuple[float, float, float, float, float]:
    if pref.utility.family_plus != "power" or pref.utility.family_minus != "power":
        raise ValidationError("two-step construction needs power utilities")
    if pref.distortion.plus.family not in ("power", "identity") or pref.distortion.minus.family not in (
        "power",
        "identity",
    ):
        raise ValidationError("two-step construction needs power distortions")
    return (
        pref.utility.alpha_plus,
        pref.utility.alpha_minus,
        pref.distortion.gamma_plus,
        pref.distortion.gamma_minus,
        pref.utility.k_minus,
    )


def two_step_example(pref: PreferenceSpec, ell: float) -> IllposednessReport:
    """Closed-form gain/loss tail integrals of the heavy-tailed two-step position.

    The position on the second period has survival y^-ell above 1, so the
    tails reduce to power integrals with exponents ell*gamma/alpha on each
    side; the verdict splits on which exponents exceed 1.
    """
    if ell <= 0:
        raise ValidationError("ell must be positive")
    ap, am, gp, gm, km = _power_power_params(pref)
    v_plus = tail_power_integral(2.0 ** (-gp), ell * gp / ap)
    v_minus_base = tail_power_integral(2.0 ** (-gm), ell * gm / am)
    v_minus: ExtReal = km * v_minus_base if is_finite(v_minus_base) else POS_INF
    if is_inf(v_minus):
        verdict = VERDICT_INCONCLUSIVE
    elif is_inf(v_plus):
        verdict = VERDICT_ILL_POSED
    else:
        verdict = VERDICT_WELL_POSED_INSTANCE
    return IllposednessReport(v_plus=v_plus, v_minus=v_minus, verdict=verdict)


def _incomplete_power(exponent: float, alpha: float, n: float) -> float:
    """int_1^{n^alpha} y^-exponent dy in closed form."""
    if abs(exponent - 1.0) < 1e-15:
        return alpha * math.log(n)
    return (n ** (alpha * (1.0 - exponent)) - 1.0) / (1.0 - exponent)


def truncation_scan(pref: PreferenceSpec, ell: float, n_list: Sequence[float]) -> list[ScanRow]:
    """Exact CPT values of the position capped at n, for each n in n_list.

    The capped law keeps the y^-ell survival up to n with an atom at n, so
    each side is the [0, 1] band plus an incomplete power integral.
    """
    if ell <= 0:
        raise ValidationError("ell must be positive")
    ap, am, gp, gm, km = _power_power_params(pref)
    rows = []
    for n in n_list:
        n = float(n)
        if n < 1.0:
            raise ValidationError("truncation levels must be >= 1")
        v_plus = 2.0 ** (-gp) * (1.0 + _incomplete_power(ell * gp / ap, ap, n))
        v_minus = km * 2.0 ** (-gm) * (1.0 + _incomplete_power(ell * gm / am, am, n))
        rows.append(ScanRow(n=n, v_plus=v_plus, v_minus=v_minus, v=v_plus - v_minus))
    return rows


def illposed_demo(pref: PreferenceSpec, ell: float, n_list: Sequence[float]) -> tuple[IllposednessReport, list[ScanRow]]:
    """Report plus truncation scan, as emitted by the CLI."""
    rows = truncation_scan(pref, ell, n_list)
    report = two_step_example(pref, ell)
    return replace(report, scan=tuple((r.n, r.v) for r in rows)), rows


def one_step_scaling(pref: PreferenceSpec, p: float, n: float) -> float:
    """Value of the constant position n in the one-step two-point market:
    w_plus(p) n^alpha_plus - k w_minus(1-p) n^alpha_minus."""
    if not 0.0 < p < 1.0:
        raise ValidationError("p must lie in (0, 1)")
    if n < 0.0:
        raise ValidationError("n must be >= 0")
    ut, dist = pref.utility, pref.distortion
    gain = float(dist.plus(p)) * n**ut.alpha_plus
    loss = ut.k_minus * float(dist.minus(1.0 - p)) * n**ut.alpha_minus
    return gain - loss


def two_step_uniform_market(n_atoms: int) -> ScenarioTree:
    """Two-period market: equal-mass discretized uniform [-1, 1] first-period
    increment, then an independent fair +-1 coin."""
    return build_market_from_level_pmfs([uniform_quantile_pmf(-1.0, 1.0, n_atoms), coin_pmf(1.0)])


def heavy_tail_strategy(tree: ScenarioTree, ell: float, cap: float) -> PureStrategy:
    """theta_1 = 0 and theta_2 = min((2/(1-x))^(1/ell), cap) with x the first increment."""
    if ell <= 0 or cap <= 0:
        raise ValidationError("need ell > 0 and cap > 0")
    if tree.horizon != 2 or tree.asset_dim != 1:
        raise ValidationError("heavy-tail strategy is defined on two-period single-asset trees")
    alloc: dict[int, tuple[float, ...]] = {0: (0.0,)}
    for node in tree.nonterminal_ids:
        node = int(node)
        if node == 0:
            continue
        x = tree.increments[node][0]
        if x >= 1.0:
            theta = cap
        else:
            theta = min((2.0 / (1.0 - x)) ** (1.0 / ell), cap)
        alloc[node] = (float(theta),)
    return PureStrategy(alloc)


@dataclass(frozen=True)
class ProbeResult:
    points: tuple[tuple[float, float], ...]
    plateau: bool
    plateau_rel_tol: float

    def to_json_dict(self) -> dict:
        return {
            "points": [list(p) for p in self.points],
            "plateau": self.plateau,
            "plateau_rel_tol": self.plateau_rel_tol,
        }


def boundedness_probe(
    tree: ScenarioTree,
    pref: PreferenceSpec,
    x0: float,
    ref: ReferenceSpec,
    box_radii: Sequence[float],
    cfg: SearchConfig | None = None,
    allow_condition_a_violation: bool = False,
    plateau_rel_tol: float = 1e-6,
) -> ProbeResult:
    """Best value found under growing per-node boxes; an empirical probe.

    For gate-respecting preferences the sequence must plateau (relative
    improvement below tolerance over the last three radius doublings). The
    probe refuses gate-violating preferences unless explicitly overridden
    for pathology demonstrations. Each radius is warm-started from the
    previous argmax, so the sequence is nondecreasing.
    """
    if not check_conditions(pref).condition_a and not allow_condition_a_violation:
        raise ValidationError("boundedness probe refused: the decisive gate fails")
    radii = [float(r) for r in box_radii]
    if not radii or any(r < 0 for r in radii) or any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValidationError("box_radii must be increasing and nonnegative")
    cfg = cfg or SearchConfig()
    points: list[tuple[float, float]] = []
    prev: list[PureStrategy] = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for r in radii:
            if r == 0.0:
                # the box degenerates to the single point theta = subhedge
                val = cpt_value(tree, ref.subhedge, x0, ref, pref)
                strat = ref.subhedge
            else:
                cfg_r = replace(cfg, box_radius=r, max_box_doublings=0)
                strat, val = optimize_pure(tree, pref, x0, ref, cfg_r, extra_starts=prev)
            points.append((r, float(val.v)))
            prev = [strat]
    vals = [v for _, v in points]
    plateau = False
    if len(vals) >= 4:
        rels = [
            (vals[i] - vals[i - 1]) / max(1.0, abs(vals[i - 1]))
            for i in range(len(vals) - 3, len(vals))
        ]
        plateau = all(r < plateau_rel_tol for r in rels)
    return ProbeResult(points=tuple(points), plateau=plateau, plateau_rel_tol=plateau_rel_tol)
