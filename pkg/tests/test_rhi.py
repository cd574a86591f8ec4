"""Verifier-level tests: sharp constants, admissible ranges, and the verdict
machinery for every one-dimensional theorem id.

Expected numbers fall in three buckets: closed forms evaluated by hand
(sqrt(2), 5/3, weak norms of two-piece weights), engine outputs frozen after
cross-checking against those forms, and structural assertions (monotonicity,
blow-up at the range endpoint) that need no magic numbers at all.
"""

import math
import random
from fractions import Fraction as F

import pytest

from rhi_lab.core import DomainError, Interval, RangeError, StepWeight, average
from rhi_lab.constants import a1_constant, a1_plus_constant
from rhi_lab.rhi import (
    TheoremId,
    admissible_range,
    sharp_constant,
    verify,
    verify_bsw,
    verify_embedding,
    verify_extremizer_equality,
    verify_rearrangement_lemma,
    verify_wik_bound,
)

W13 = StepWeight((F(0), F(1, 2), F(1)), (F(1), F(3)))
W31 = StepWeight((F(0), F(1, 2), F(1)), (F(3), F(1)))
CONST5 = StepWeight((F(0), F(1)), (F(5),))


def rand_weight(rng, pieces=6, denom=32):
    cuts = sorted(rng.sample(range(1, denom), pieces - 1))
    bp = (F(0),) + tuple(F(c, denom) for c in cuts) + (F(1),)
    vals = tuple(F(rng.randint(1, 12)) for _ in range(pieces))
    return StepWeight(bp, vals)


# ---------------------------------------------------------------------------
# sharp constants and ranges


def test_sharp_constant_frozen_values():
    c = sharp_constant(F(3, 2), F(2), TheoremId.T1_2)
    assert float(c.value) == pytest.approx(math.sqrt(2), abs=1e-14)
    c = sharp_constant(F(3, 2), F(5, 4), TheoremId.T1_1, n=1)
    assert c.exact == F(5, 3)


def test_sharp_constant_r_equal_one_limits():
    assert sharp_constant(F(1), F(7, 2), TheoremId.T1_2).exact == 1
    assert sharp_constant(F(1), F(7, 2), TheoremId.T1_3).exact == 1
    # families without the delta^(1-r) normalization keep a delta limit
    assert sharp_constant(F(1), F(7, 2), TheoremId.T1_1, n=1).exact == F(7, 2)
    assert sharp_constant(F(1), F(7, 2), TheoremId.T1_2_COR).exact == F(7, 2)
    assert sharp_constant(F(1), F(3), TheoremId.L2_2).exact == 1


def test_admissible_range_values():
    assert admissible_range(F(2), TheoremId.T1_2).exact == 2
    assert admissible_range(F(5, 4), TheoremId.T1_1, n=1).exact == 3
    assert admissible_range(F(5, 4), TheoremId.T4_2, n=2).exact == 2
    assert math.isinf(float(admissible_range(F(1), TheoremId.T1_3).value))
    with pytest.raises(DomainError):
        admissible_range(F(1, 2), TheoremId.T1_2)


def test_sharp_constant_blows_up_at_the_range_endpoint():
    for tid, delta, n in (
        (TheoremId.T1_2, F(2), 1),
        (TheoremId.T1_1, F(5, 4), 1),
        (TheoremId.T4_2, F(5, 4), 2),
    ):
        bound = admissible_range(delta, tid, n=n).exact
        prev = 0.0
        for k in range(1, 7):
            r = bound * (1 - F(1, 10**k))
            val = float(sharp_constant(r, delta, tid, n=n).value)
            assert val > prev
            prev = val
        assert prev > 1e3


def test_sharp_constant_flatness_limit():
    vals = [
        float(sharp_constant(F(3, 2), 1 + F(1, 10**k), TheoremId.T1_1, n=1).value)
        for k in range(1, 7)
    ]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] == pytest.approx(1.0, abs=1e-5)


def test_sharp_constant_range_error_names_bound():
    with pytest.raises(RangeError, match=r"\[1, 2\)"):
        sharp_constant(F(5, 2), F(2), TheoremId.T1_2)
    with pytest.raises(RangeError):
        sharp_constant(F(1, 2), F(2), TheoremId.T1_2)


def test_unknown_theorem_id_rejected():
    with pytest.raises(DomainError, match="t9.9"):
        verify("t9.9", W13, r=F(3, 2))


# ---------------------------------------------------------------------------
# weak endpoint (A1) and its embedding corollaries


def test_weak_endpoint_two_piece():
    v = verify("t1.3", W13)
    # ||w||_{L^{3/2,inf}} = 3 (1/2)^{2/3} against the average 2
    assert float(v.lhs.value) == pytest.approx(3 / 2 ** (2 / 3), abs=1e-12)
    assert v.rhs.exact == 2
    assert v.holds
    assert v.delta_source == "exact A1"
    assert v.params["delta"] == 3
    assert v.params["rw"] == F(3, 2)


def test_weak_endpoint_constant_weight_is_equality():
    v = verify("t1.3", CONST5)
    assert v.exact and v.holds
    assert v.ratio.exact == 1


def test_embedding_i_two_piece():
    v = verify_embedding(W13, W13.support, [Interval(F(1, 2), F(1))], "i")
    assert v.lhs.exact == F(3, 4)
    assert float(v.rhs.value) == pytest.approx(3 * 0.5 ** (1 / 3), abs=1e-12)
    assert v.holds and v.delta_source == "exact A1"


def test_embedding_i_full_interval():
    v = verify_embedding(W13, W13.support, [W13.support], "i")
    assert v.lhs.exact == 1 and v.holds


def test_embedding_ii_two_piece():
    v = verify_embedding(W13, W13.support, [Interval(F(1, 2), F(1))], "ii")
    assert v.holds
    assert "FW grid lower bound" in v.delta_source


def test_embedding_region_validation():
    with pytest.raises(DomainError):
        verify_embedding(W13, W13.support, [Interval(F(1, 2), F(3, 2))], "i")
    with pytest.raises(DomainError):
        verify_embedding(
            W13, W13.support, [Interval(F(0), F(1, 2)), Interval(F(1, 4), F(1))], "i"
        )


def test_embedding_i_power_weight_mass_is_sqrt():
    # the discretized power weight keeps exact cell masses, so w(0,eps)/w(0,1)
    # is sqrt(eps) up to the value-rounding of the discretizer
    from rhi_lab.extremal import step_discretize

    w = step_discretize(F(1, 2), 256)
    v = verify_embedding(w, w.support, [Interval(F(0), F(1, 64))], "i")
    assert float(v.lhs.value) == pytest.approx(1 / 8, rel=1e-9)
    assert v.holds


# ---------------------------------------------------------------------------
# Wik power bound and the rearranged-maximal lemma


def test_wik_bound_two_piece():
    v = verify_wik_bound(W13, W13.support, F(3))
    assert v.holds
    assert float(v.ratio.value) == pytest.approx(1.0, abs=1e-12)
    assert v.witness["t"] == 1  # equality lives at t = |I|


def test_wik_bound_rejects_delta_below_a1():
    with pytest.raises(DomainError):
        verify_wik_bound(W13, W13.support, F(2))


def test_wik_bound_discretized_power_weight():
    # the discretization inflates A1 to 1 + sqrt(2) no matter how fine, so the
    # hypothesis check must use that constant rather than the continuum 2
    from rhi_lab.extremal import step_discretize

    w = step_discretize(F(1, 2), 64)
    d = a1_constant(w).value.exact
    assert float(d) == pytest.approx(1 + math.sqrt(2), abs=1e-9)
    with pytest.raises(DomainError):
        verify_wik_bound(w, w.support, F(2))
    assert verify_wik_bound(w, w.support, d).holds


def test_rearrangement_lemma_two_piece():
    v = verify_rearrangement_lemma(W13)
    assert v.holds
    assert float(v.ratio.value) == pytest.approx(0.9203845414879479, abs=1e-9)
    assert v.witness["t"] == 1


def test_rearrangement_lemma_constant():
    v = verify_rearrangement_lemma(CONST5)
    assert v.holds and float(v.ratio.value) == pytest.approx(1.0, abs=1e-12)


def test_rearrangement_dispatch_through_verify():
    v = verify("l.rearinfty", W13)
    assert v.theorem == "l.rearinfty" and v.holds


# ---------------------------------------------------------------------------
# master lemma


def test_master_lemma_two_piece_passes():
    v = verify("l2.2", W13, r=F(4, 3), lam0=F(2, 3), delta=F(3))
    assert v.holds
    assert float(v.lhs.value) == pytest.approx(2.6633743554611127, abs=1e-10)
    # lam0^(r-1) (r'-1)/(r'-delta) avg = (2/3)^(1/3) * 3 * 2
    assert float(v.rhs.value) == pytest.approx(6 * (2 / 3) ** (1 / 3), abs=1e-10)


def test_master_lemma_detects_hypothesis_violation():
    v = verify("l2.2", W13, r=F(4, 3), lam0=F(4, 5), delta=F(5, 2))
    assert not v.holds
    assert v.witness["hypothesisViolatedAt"] == 1


def test_master_lemma_r_sweep():
    for r in (F(1), F(5, 4), F(7, 5)):
        assert verify("l2.2", W13, r=r, lam0=F(2, 3), delta=F(3)).holds


def test_master_lemma_needs_parameters():
    with pytest.raises(DomainError):
        verify("l2.2", W13, r=F(4, 3))


# ---------------------------------------------------------------------------
# strong forms with exact one-sided constants


def test_t31_first_decreasing_two_piece():
    v = verify("t3.1.first", W31, r=F(4, 3))
    assert v.holds and v.delta_source == "exact A1+"
    assert float(v.lhs.value) == pytest.approx(2.6633743554611127, abs=1e-10)
    assert float(v.rhs.value) == pytest.approx(5.241482788417793, abs=1e-10)


def test_t31_first_range_error():
    # [w]_{A1+} of the decreasing two-piece weight is 3, so r must stay below 3/2
    assert a1_plus_constant(W31).value.exact == 3
    with pytest.raises(RangeError):
        verify("t3.1.first", W31, r=F(3, 2))


def test_t31_second_matches_first_on_degenerate_triple():
    v = verify("t3.1.second", W31, r=F(4, 3), triple=(F(0), F(1, 2), F(1)))
    assert v.holds and v.delta_source == "exact A1+"


def test_triple_validation():
    with pytest.raises(DomainError, match="a < b < c"):
        verify("t3.1.second", W31, r=F(4, 3), triple=(F(1, 2), F(1, 2), F(1)))
    with pytest.raises(DomainError):
        verify("t3.1.second", W31, r=F(4, 3), triple=(F(0), F(1, 2), F(2)))


def test_bsw_two_piece_and_constant():
    v = verify_bsw(W13, F(4, 3))
    assert v.holds and v.delta_source == "exact A1"
    assert float(v.lhs.value) == pytest.approx(2.6633743554611127, abs=1e-10)
    assert float(v.rhs.value) == pytest.approx(5.241482788417793, abs=1e-10)

    v = verify_bsw(CONST5, F(2))
    assert v.exact and v.ratio.exact == 1
    v = verify_bsw(CONST5, F(7, 3))
    assert v.holds and float(v.ratio.value) == 1.0


# ---------------------------------------------------------------------------
# endpoint family


def test_maximal_weak_endpoint_two_piece():
    v = verify("t.ainfty.endpoint", W13)
    assert v.holds
    assert float(v.lhs.value) == pytest.approx(2.4075215350182764, abs=1e-9)
    assert float(v.rhs.value) == pytest.approx(2.6931471805599454, abs=1e-9)


def test_onesided_endpoint_a1_decreasing():
    v = verify("t.onesided.endpoint.a1", W31)
    assert v.holds and v.delta_source == "exact A1+"
    assert float(v.lhs.value) == pytest.approx(2.598076211353316, abs=1e-9)
    assert float(v.rhs.value) == pytest.approx(2 * math.sqrt(2), abs=1e-12)


def test_onesided_endpoint_a1_flat_side_limit():
    # nondecreasing weight has [w]_{A1+} = 1; the check degenerates to
    # ess sup w <= M-(b), an equality here
    v = verify("t.onesided.endpoint.a1", W13)
    assert v.holds
    assert float(v.lhs.value) == pytest.approx(3.0)
    assert "limit form" in v.delta_source


def test_onesided_endpoint_ainfty_decreasing():
    v = verify("t.onesided.endpoint.ainfty", W31)
    assert v.holds
    assert "two-sided in delta" in v.delta_source


# ---------------------------------------------------------------------------
# the printed general-measure corollary (documented erratum)


def test_cor35_printed_form_fails_on_two_piece():
    # the printed w-form with the Fujii-Wilson constant is falsified by the
    # 1/3 weight: the grid delta is converged (1.46306 at depth 8, stable to
    # 1e-12 at depth 12) while the inequality would need delta >= 1.518
    v = verify("cor3.5", W13, r=F(3, 2), depth=4)
    assert not v.holds
    assert float(v.ratio.value) == pytest.approx(1.0181357607245372, abs=1e-6)
    assert v.delta_source == "FW grid lower bound, depth=8; printed-form check"


def test_cor35_printed_form_holds_on_big_jump():
    w = StepWeight((F(0), F(1), F(2)), (F(1), F(10)))
    v = verify("cor3.5", w, r=F(3, 2))
    assert v.holds
    assert float(v.ratio.value) == pytest.approx(0.8239266770448993, abs=1e-6)
    assert v.delta_source.endswith("printed-form check")


def test_cor35_sound_sibling_is_bsw():
    # same constant shape, exact A1 delta: sound on the counterexample weight
    d = a1_constant(W13).value.exact
    assert d == 3
    v = verify_bsw(W13, F(4, 3))
    assert v.holds


# ---------------------------------------------------------------------------
# extremizer equality


def test_extremizer_equality_fractional_r():
    v = verify_extremizer_equality(F(1, 2), F(3, 2))
    assert v.holds
    assert float(v.ratio.value) == pytest.approx(1.0, abs=1e-9)


def test_extremizer_equality_r_one_exact():
    v = verify_extremizer_equality(F(1, 2), F(1))
    assert v.holds and v.ratio.exact == 1 and v.lhs.exact == 4


def test_extremizer_equality_range_error():
    with pytest.raises(RangeError):
        verify_extremizer_equality(F(1, 2), F(2))


# ---------------------------------------------------------------------------
# maximal-function strong forms with grid delta


def test_t12_at_r_one_is_equality():
    v = verify("t1.2", W13, r=1)
    assert v.holds
    assert float(v.ratio.value) == pytest.approx(1.0, abs=1e-9)


def test_grid_mean_forms_on_random_weights():
    rng = random.Random(7)
    for _ in range(4):
        w = rand_weight(rng, pieces=4, denom=16)
        for tid in ("t1.1", "t1.2", "t1.2.cor", "t3.3", "t3.3.cor.first"):
            v = verify(tid, w, r=F(21, 20))
            assert v.holds, (tid, float(v.ratio.value), v.delta_source)


def test_t33_cor_second_random_triples():
    rng = random.Random(19)
    for _ in range(3):
        w = rand_weight(rng, pieces=4, denom=16)
        pts = sorted(rng.sample(range(1, 16), 3))
        a, b, c = (F(p, 16) for p in pts)
        v = verify("t3.3.cor.second", w, r=F(21, 20), triple=(a, b, c))
        assert v.holds, (float(v.ratio.value), v.delta_source)


# ---------------------------------------------------------------------------
# exact-delta sweeps (the strict families)


def test_exact_delta_families_on_random_weights():
    rng = random.Random(23)
    for _ in range(8):
        w = rand_weight(rng)
        assert verify("t1.3", w).holds
        d = a1_constant(w).value.exact
        if d > 1:
            bound = d / (d - 1)
            for q in (F(1, 3), F(9, 10)):
                r = 1 + q * (bound - 1) * F(99, 100)
                assert verify_bsw(w, r).holds
        dp = a1_plus_constant(w).value.exact
        r = 1 + (dp / (dp - 1) - 1) * F(1, 2) if dp > 1 else F(3, 2)
        pts = sorted(rng.sample(range(1, 32), 3))
        a, b, c = (F(p, 32) for p in pts)
        assert verify("t3.1.second", w, r=r, triple=(a, b, c)).holds
        assert verify("t3.1.first", w, r=r, interval=Interval(a, b)).holds


# ---------------------------------------------------------------------------
# verdict surface


def test_verdict_json_shape():
    v = verify("t1.3", W13)
    d = v.to_json_dict()
    assert set(d) == {
        "theorem",
        "params",
        "lhs",
        "rhs",
        "ratio",
        "holds",
        "exact",
        "deltaSource",
        "witness",
    }
    assert d["theorem"] == "t1.3"
    assert d["holds"] is True


def test_verify_rejects_non_step_weight():
    with pytest.raises(DomainError, match="step weight"):
        verify("t1.3", [1, 2, 3])
