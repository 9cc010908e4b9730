import numpy as np
import pytest

from conftest import random_ref, tame_valid_pref, random_tree
from cpttree import (
    POS_INF,
    PureStrategy,
    ReferenceSpec,
    SearchConfig,
    ValidationError,
    boundedness_probe,
    check_NA,
    coin_model_preferences,
    cpt_value,
    heavy_tail_strategy,
    illposed_demo,
    is_inf,
    one_step_scaling,
    truncation_scan,
    two_step_example,
    two_step_uniform_market,
    tversky_kahneman_preferences,
)
from cpttree.preferences import Distortion, DistortionPair, PreferenceSpec, UtilityPair


def power_pref(ap, am, gp, gm, k=1.0, lam=None):
    return PreferenceSpec(
        utility=UtilityPair.power(ap, am, k=k),
        distortion=DistortionPair(Distortion.power(gp), Distortion.power(gm)),
        lam=lam,
    )


ILL = power_pref(0.9, 1.0, 0.5, 1.0)  # alpha+/gamma+ = 1.8 > alpha-/gamma- = 1
FLAT = power_pref(1.0, 1.0, 1.0, 1.0)


class TestTwoStepExample:
    def test_divergent_gain_finite_loss(self):
        report = two_step_example(ILL, ell=1.5)
        assert is_inf(report.v_plus)
        assert report.v_minus == pytest.approx(1.0, abs=1e-12)
        assert report.verdict == "ill-posed"

    def test_all_unit_parameters(self):
        report = two_step_example(FLAT, ell=2.0)
        assert report.v_plus == pytest.approx(0.5, abs=1e-12)
        assert report.v_minus == pytest.approx(0.5, abs=1e-12)
        assert report.verdict == "well-posed-instance"

    def test_both_exponents_above_one(self):
        report = two_step_example(power_pref(0.5, 1.0, 0.8, 0.9), ell=1.5)
        # e+ = 1.5*0.8/0.5 = 2.4 > 1 and e- = 1.35 > 1
        assert report.verdict == "well-posed-instance"

    def test_inadmissible_position_is_inconclusive(self):
        report = two_step_example(FLAT, ell=0.5)  # e- = 0.5 <= 1: loss diverges
        assert is_inf(report.v_minus) and report.verdict == "inconclusive"

    def test_rejects_nonpositive_ell(self):
        with pytest.raises(ValidationError):
            two_step_example(FLAT, ell=0.0)

    def test_rejects_tk_distortions(self):
        with pytest.raises(ValidationError, match="power"):
            two_step_example(tversky_kahneman_preferences(), ell=1.5)

    def test_constructible_iff_gain_ratio_dominates(self):
        rng = np.random.default_rng(55)
        for _ in range(100):
            ap, am, gp, gm = rng.uniform(0.2, 1.0, 4)
            pref = power_pref(float(ap), float(am), float(gp), float(gm))
            lo, hi = am / gm, ap / gp
            if lo < hi:  # the divergence window is exactly (am/gm, ap/gp]
                ell = 0.5 * (lo + hi)
                assert two_step_example(pref, ell).verdict == "ill-posed"
            else:
                for ell in np.linspace(0.1, 5.0, 23):
                    assert two_step_example(pref, float(ell)).verdict != "ill-posed"


class TestTruncationScan:
    def test_degenerate_cap_is_single_atom(self):
        rows = truncation_scan(ILL, 1.5, [1.0])
        assert rows[0].v_plus == pytest.approx(2.0**-0.5, abs=1e-15)
        assert rows[0].v_minus == pytest.approx(2.0**-1.0, abs=1e-15)

    def test_divergent_instance_grows_without_bound(self):
        rows = truncation_scan(ILL, 1.5, [10.0, 1e3, 1e6])
        vals = [r.v for r in rows]
        assert vals[0] < vals[1] < vals[2]
        # frozen closed-form oracle values
        assert vals[0] == pytest.approx(1.2735831189841713, abs=1e-12)
        assert vals[1] == pytest.approx(6.953474966734038, abs=1e-12)
        assert vals[2] == pytest.approx(28.665958969756037, abs=1e-9)

    def test_convergence_to_untruncated_value(self):
        rows = truncation_scan(FLAT, 2.0, [1e6])
        report = two_step_example(FLAT, 2.0)
        assert abs(rows[0].v - (report.v_plus - report.v_minus)) < 1e-3

    def test_loss_side_converges_monotonically(self):
        rows = truncation_scan(ILL, 1.5, [10.0, 1e2, 1e4, 1e6])
        minus = [r.v_minus for r in rows]
        assert all(a < b for a, b in zip(minus, minus[1:]))
        assert minus[-1] < 1.5  # k * 2^-gm * (1 + 1/(e- - 1)) = 1.5 in the limit

    def test_discretized_tree_cross_check(self):
        # same capped position evaluated exactly on a fine tree
        tree = two_step_uniform_market(4001)
        theta = heavy_tail_strategy(tree, 1.5, cap=2.0)
        val = cpt_value(tree, theta, 0.0, ReferenceSpec.zero(tree), ILL)
        row = truncation_scan(ILL, 1.5, [2.0])[0]
        assert abs(val.v - row.v) < 1e-4

    def test_rejects_caps_below_one(self):
        with pytest.raises(ValidationError):
            truncation_scan(FLAT, 2.0, [0.5])

    def test_illposed_demo_report_carries_scan(self):
        report, rows = illposed_demo(ILL, 1.5, [10.0, 100.0])
        assert report.scan == tuple((r.n, r.v) for r in rows)
        assert report.to_json_dict()["v_plus"] == "inf"


class TestOneStepScaling:
    def test_zero_position(self):
        assert one_step_scaling(FLAT, 0.5, 0.0) == 0.0

    def test_symmetric_cancellation(self):
        for n in (1.0, 10.0, 100.0):
            assert one_step_scaling(FLAT, 0.5, n) == 0.0

    def test_tk_calibration_above_threshold_grows(self):
        pref = tversky_kahneman_preferences()
        vals = [one_step_scaling(pref, 0.8, n) for n in (1.0, 10.0, 100.0, 1000.0)]
        assert all(a < b for a, b in zip(vals, vals[1:]))
        assert vals[0] > 0.0

    def test_large_n_sign_classification(self):
        # the dominant power decides the sign once the exponent gap is real
        rng = np.random.default_rng(56)
        for _ in range(50):
            k = float(rng.uniform(0.5, 3.0))
            p = float(rng.uniform(0.1, 0.9))
            am = float(rng.uniform(0.2, 0.8))
            case = rng.integers(0, 3)
            if case == 0:
                ap = min(1.0, am + float(rng.uniform(0.15, 0.5)))
            elif case == 1:
                ap = max(0.05, am - float(rng.uniform(0.15, 0.5)))
            else:
                ap = am
            pref = power_pref(ap, am, 1.0, 1.0, k=k)
            big = one_step_scaling(pref, p, 1e8)
            if ap > am:
                assert big > 0.0
            elif ap < am:
                assert big < 0.0
            else:
                expected = (p - k * (1.0 - p)) * 1e8**am
                if abs(p - k * (1.0 - p)) > 1e-6:
                    assert np.sign(big) == np.sign(expected)

    def test_rejects_degenerate_probability(self):
        with pytest.raises(ValidationError):
            one_step_scaling(FLAT, 1.0, 1.0)


class TestBoundednessProbe:
    def test_coin_model_plateaus_at_closed_form(self, coin_tree):
        res = boundedness_probe(
            coin_tree, coin_model_preferences(), 0.0, ReferenceSpec.zero(coin_tree),
            [0.5, 1.0, 2.0, 4.0, 8.0, 16.0], SearchConfig(seed=0, multistart=2),
        )
        assert res.plateau
        for radius, v in res.points:
            if radius >= 1.0:
                assert v == pytest.approx(0.375, abs=1e-7)

    def test_zero_radius_evaluates_subhedge_point(self, coin_tree):
        pref = coin_model_preferences()
        ref = ReferenceSpec.zero(coin_tree)
        res = boundedness_probe(
            coin_tree, pref, 0.0, ref, [0.0, 1.0], SearchConfig(seed=0, multistart=1)
        )
        expected = cpt_value(coin_tree, ref.subhedge, 0.0, ref, pref)
        assert res.points[0] == (0.0, expected.v)

    def test_refuses_gate_violation_by_default(self, coin_tree):
        with pytest.raises(ValidationError, match="gate"):
            boundedness_probe(
                coin_tree, ILL, 0.0, ReferenceSpec.zero(coin_tree), [1.0, 2.0, 4.0, 8.0]
            )

    def test_gate_respecting_random_instances_plateau(self):
        for seed in range(3):
            rng = np.random.default_rng(1000 + seed)
            tree = random_tree(rng)
            pref = tame_valid_pref(rng)
            ref = random_ref(rng, tree)
            x0 = float(rng.uniform(-1.0, 1.0))
            assert check_NA(tree).ok
            res = boundedness_probe(
                tree, pref, x0, ref, [0.5, 1, 2, 4, 8, 16], SearchConfig(seed=seed, multistart=3)
            )
            assert res.plateau, res.points

    def test_gate_violating_discretized_market_grows(self):
        tree = two_step_uniform_market(21)
        res = boundedness_probe(
            tree, ILL, 0.0, ReferenceSpec.zero(tree), [1, 2, 4, 8, 16],
            SearchConfig(seed=3, multistart=2), allow_condition_a_violation=True,
        )
        vals = [v for _, v in res.points]
        assert all(a < b for a, b in zip(vals, vals[1:]))
        assert not res.plateau

    def test_radii_must_increase(self, coin_tree):
        with pytest.raises(ValidationError, match="increasing"):
            boundedness_probe(
                coin_tree, coin_model_preferences(), 0.0,
                ReferenceSpec.zero(coin_tree), [2.0, 1.0],
            )
