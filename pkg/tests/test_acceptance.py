"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
report. Tolerances are pinned here and nowhere else.
"""

import time

import numpy as np
import pytest

from conftest import random_pure, random_ref, random_tree, random_valid_pref, tame_valid_pref
from cpttree import (
    DiscreteRV,
    PureStrategy,
    ReferenceSpec,
    SearchConfig,
    aux_value,
    boundedness_probe,
    check_NA,
    choquet_nonneg,
    coin_model_preferences,
    cpt_value,
    derive_aux_params,
    is_inf,
    ladder,
    marche_certificate,
    one_step_scaling,
    tk_pathology_threshold,
    toolkit_self_test,
    truncation_scan,
    tversky_kahneman_preferences,
    two_step_example,
    two_step_uniform_market,
    validate_certificate,
)
from cpttree.preferences import Distortion, DistortionPair, PreferenceSpec, UtilityPair


def report(criterion: int, ok: bool, detail: str) -> None:
    print(f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


def test_criterion_1_ladder_base_value():
    t0 = time.perf_counter()
    res = ladder(0, SearchConfig(seed=7))
    elapsed = time.perf_counter() - t0
    m0 = res.values[0]
    theta = res.argmax[0][0]
    ok = abs(m0 - 0.375) < 1e-6 and abs(theta - 0.25) < 1e-4 and elapsed < 1.0
    report(1, ok, f"M0={m0:.9f} argmax={theta:.6f} runtime={elapsed:.3f}s")


def test_criterion_2_strict_randomization_gain():
    t0 = time.perf_counter()
    res = ladder(1, SearchConfig(seed=7))
    m0, m1 = res.values
    a, b = res.argmax[1]

    # independent 2-D grid oracle at step 1e-3 with local refinement
    grid = np.arange(0.0, 1.0 + 1e-12, 1e-3)
    A, B = np.meshgrid(grid, grid, indexing="ij")

    def mixture_value(A, B):
        ya, yb = A**0.25, B**0.25
        lo, hi = np.minimum(ya, yb), np.maximum(ya, yb)
        return lo * np.sqrt(0.5) + (hi - lo) * 0.5 - (A + B) / 4.0

    V = mixture_value(A, B)
    idx = np.unravel_index(np.argmax(V), V.shape)
    best = (float(V[idx]), float(A[idx]), float(B[idx]))
    step = 1e-3
    for _ in range(12):
        step /= 4.0
        aa = np.clip(np.arange(best[1] - 5 * step, best[1] + 5 * step + step / 2, step), 0, 1)
        bb = np.clip(np.arange(best[2] - 5 * step, best[2] + 5 * step + step / 2, step), 0, 1)
        AA, BB = np.meshgrid(aa, bb, indexing="ij")
        VV = mixture_value(AA, BB)
        ii = np.unravel_index(np.argmax(VV), VV.shape)
        best = (float(VV[ii]), float(AA[ii]), float(BB[ii]))
    oracle_m1 = best[0]
    elapsed = time.perf_counter() - t0

    ok = (
        m1 >= m0 + 1e-4
        and abs(a - b) > 1e-4
        and abs(m1 - oracle_m1) < 1e-5
        and elapsed < 30.0
    )
    report(
        2,
        ok,
        f"M1={m1:.9f} oracle={oracle_m1:.9f} gap={m1 - m0:.6f} "
        f"atoms=({a:.6f},{b:.6f}) runtime={elapsed:.1f}s",
    )


def test_criterion_3_tower_law_collapse():
    res = ladder(3, SearchConfig(seed=7), w_plus=Distortion.identity())
    gaps = [abs(v - res.values[0]) for v in res.values[1:]]
    ok = all(g < 1e-8 for g in gaps)
    report(3, ok, f"M0={res.values[0]:.9f} max|M_k - M0|={max(gaps):.2e} for k in 1..3")


def test_criterion_4_two_step_illposedness():
    pref = PreferenceSpec(
        utility=UtilityPair.power(0.9, 1.0),
        distortion=DistortionPair(Distortion.power(0.5), Distortion.power(1.0)),
    )
    rep = two_step_example(pref, ell=1.5)
    rows = truncation_scan(pref, 1.5, [10.0, 1e3, 1e6])
    vals = [r.v for r in rows]
    v_minus = rep.v_minus
    ok = (
        abs(v_minus - 1.0) <= 1e-9
        and is_inf(rep.v_plus)
        and vals[0] < vals[1] < vals[2]
        and vals[2] > 10.0 * (v_minus + 1.0)
    )
    report(
        4,
        ok,
        f"V-={v_minus!r} V+=inf scan=({vals[0]:.3f},{vals[1]:.3f},{vals[2]:.3f}) "
        f"bound={10.0 * (v_minus + 1.0):.1f}",
    )


def test_criterion_5_tk_pathology():
    p_star = tk_pathology_threshold(2.25, 0.61, 0.69)
    pref = tversky_kahneman_preferences()
    vals = [one_step_scaling(pref, 0.8, n) for n in (1.0, 10.0, 100.0, 1000.0)]
    increasing = all(x < y for x, y in zip(vals, vals[1:]))
    ok = 0.783 <= p_star <= 0.793 and increasing
    report(5, ok, f"p*={p_star:.6f} scaling at p=0.8: {[f'{v:.3f}' for v in vals]}")


def test_criterion_6_choquet_correctness():
    rng = np.random.default_rng(2024)
    worst_id = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 51))
        vals = rng.uniform(0.0, 5.0, n)
        probs = rng.uniform(0.1, 1.0, n)
        probs /= probs.sum()
        probs[-1] = 1.0 - probs[:-1].sum()
        rv = DiscreteRV.from_arrays(vals, probs)
        worst_id = max(worst_id, abs(choquet_nonneg(rv, lambda p: p) - float(vals @ probs)))

    worst_riemann = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 31))
        vals = rng.uniform(0.0, 5.0, n)
        probs = rng.uniform(0.1, 1.0, n)
        probs /= probs.sum()
        probs[-1] = 1.0 - probs[:-1].sum()
        rv = DiscreteRV.from_arrays(vals, probs)
        top = vals.max()
        y = (np.arange(1_000_000) + 0.5) * (top / 1_000_000)
        order = np.argsort(vals)
        sv = vals[order]
        sp = np.cumsum(probs[order][::-1])[::-1]
        idx = np.searchsorted(sv, y, side="left")
        survival = np.where(idx < len(sv), np.concatenate((sp, [0.0]))[idx], 0.0)
        riemann = float(np.sqrt(survival).sum() * (top / 1_000_000))
        worst_riemann = max(worst_riemann, abs(riemann - choquet_nonneg(rv, np.sqrt)))

    ok = worst_id <= 1e-12 and worst_riemann < 1e-5
    report(6, ok, f"identity gap={worst_id:.2e} (100 laws), riemann gap={worst_riemann:.2e} (20 laws)")


def test_criterion_7_domination():
    violations = 0
    worst_plus = -np.inf
    worst_minus = -np.inf
    for i in range(200):
        rng = np.random.default_rng(5000 + i)
        tree = random_tree(rng, max_horizon=3, asset_dim=int(rng.integers(1, 3)))
        pref = random_valid_pref(rng)
        ref = random_ref(rng, tree)
        x0 = float(rng.uniform(-2.0, 2.0))
        theta = random_pure(rng, tree)
        aux = derive_aux_params(pref, ref)
        val = cpt_value(tree, theta, x0, ref, pref)
        plus, minus, _ = aux_value(tree, theta, x0, aux, pref)
        worst_plus = max(worst_plus, val.v_plus - plus)
        worst_minus = max(worst_minus, minus - val.v_minus)
        if val.v_plus > plus + 1e-9 or val.v_minus < minus - 1e-9:
            violations += 1
    ok = violations == 0
    report(
        7,
        ok,
        f"{violations} violations / 200; worst gain-side slack {worst_plus:.3e}, "
        f"loss-side slack {worst_minus:.3e}",
    )


def test_criterion_8_certificate_validation():
    tree = two_step_uniform_market(1000)
    ok_pairs, witness = validate_certificate(tree, [0.5, 0.5], [0.25, 0.5])
    cert = marche_certificate(tree, pi=[0.25, 0.5])
    kappa0 = cert.entries[0][0]
    ok = ok_pairs and 0.49 <= kappa0 <= 0.5
    report(8, ok, f"calibrated pairs valid={ok_pairs} (witness {witness}), max kappa(t=0)={kappa0}")


def test_criterion_9_boundedness_probe():
    plateaus = []
    for seed in range(10):
        rng = np.random.default_rng(1000 + seed)
        tree = random_tree(rng)
        pref = tame_valid_pref(rng)
        ref = random_ref(rng, tree)
        x0 = float(rng.uniform(-1.0, 1.0))
        assert check_NA(tree).ok
        res = boundedness_probe(
            tree, pref, x0, ref, [0.5, 1, 2, 4, 8, 16], SearchConfig(seed=seed, multistart=3)
        )
        plateaus.append(res.plateau)

    bad_pref = PreferenceSpec(
        utility=UtilityPair.power(0.9, 1.0),
        distortion=DistortionPair(Distortion.power(0.5), Distortion.identity()),
    )
    tree = two_step_uniform_market(41)
    res = boundedness_probe(
        tree, bad_pref, 0.0, ReferenceSpec.zero(tree), [1, 2, 4, 8, 16, 32, 64],
        SearchConfig(seed=3, multistart=2), allow_condition_a_violation=True,
    )
    vals = [v for _, v in res.points]
    growing = all(a < b for a, b in zip(vals, vals[1:]))
    ok = all(plateaus) and growing and not res.plateau
    report(
        9,
        ok,
        f"{sum(plateaus)}/10 gate-respecting instances plateau; violating instance grows "
        f"{vals[0]:.3f} -> {vals[-1]:.3f} with no plateau",
    )


def test_criterion_10_toolkit():
    rep = toolkit_self_test()
    named = {c["name"]: c for c in rep["checks"]}
    tv = named["transport_reconstruction_tv"]
    chi = named["split_uniform_chi2_independence"]
    ks = named["uniformize_ks"]
    ok = rep["all_passed"] and tv["statistic"] <= 1e-12
    report(
        10,
        ok,
        f"seed={rep['seed']} transport TV={tv['statistic']:.2e} (50 joints), "
        f"chi2={chi['statistic']:.1f}<{chi['threshold']:.1f}, KS={ks['statistic']:.4f}<{ks['threshold']:.4f}",
    )
