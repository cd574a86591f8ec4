import math
from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from rhi_lab.core import DomainError, Interval, RangeError, StepWeight
from rhi_lab.constants import a1_constant, a1_plus_constant
from rhi_lab.extremal import (
    PowerWeight,
    SearchConfig,
    SearchResult,
    _fast_constant,
    power_oracle,
    sharpness_search,
    step_discretize,
)
from rhi_lab.maximal1d import Op, eval_maximal

SQRT2 = math.sqrt(2.0)


# ------------------------------------------------------------------ closed forms


def test_power_weight_frozen_values():
    pw = PowerWeight(F(1, 2))
    assert pw.a1_plus().exact == 2
    assert pw.mass(1).exact == 2
    assert pw.mminus(1).exact == 2
    assert pw.mminus2(1).exact == 4
    # integral of (x^(-1/2)/ (1/2))^r over (0,1) at r = 3/2 is 8 sqrt 2
    assert float(pw.avg_power(F(3, 2)).value) == pytest.approx(8 * SQRT2, rel=1e-15)


def test_power_weight_integer_exponent_is_exact():
    assert PowerWeight(F(1, 2)).avg_power(1).exact == 4
    assert PowerWeight(F(2, 3)).avg_power(2).exact == F(27, 4)


def test_power_weight_interior_points():
    pw = PowerWeight(F(1, 2))
    assert float(pw.mass(F(1, 4)).value) == pytest.approx(1.0, rel=1e-15)
    assert float(pw.mminus(F(1, 4)).value) == pytest.approx(4.0, rel=1e-15)
    assert float(pw.mminus2(F(1, 4)).value) == pytest.approx(8.0, rel=1e-15)


@pytest.mark.parametrize("tau", [F(0), F(1), F(3, 2), F(-1, 2)])
def test_power_weight_rejects_bad_tau(tau):
    with pytest.raises(DomainError):
        PowerWeight(tau)


def test_power_weight_domain_checks():
    pw = PowerWeight(F(1, 2))
    for bad in (F(0), F(2), F(-1)):
        with pytest.raises(DomainError):
            pw.mass(bad)
        with pytest.raises(DomainError):
            pw.mminus(bad)


def test_avg_power_divergence_names_the_bound():
    with pytest.raises(RangeError, match="r < 2"):
        PowerWeight(F(1, 2)).avg_power(2)
    with pytest.raises(RangeError, match="r < 3"):
        PowerWeight(F(2, 3)).avg_power(F(7, 2))


def test_oracle_dispatch_is_forgiving_about_spelling():
    assert power_oracle(F(1, 2), "A1plus").exact == 2
    assert power_oracle(F(1, 2), "a1_plus").exact == 2
    assert power_oracle(F(1, 2), "M-minus", F(1)).exact == 2
    assert power_oracle(F(1, 2), "avg_power", 1).exact == 4


def test_oracle_rejects_unknown_and_missing():
    with pytest.raises(DomainError):
        power_oracle(F(1, 2), "mass")
    with pytest.raises(DomainError):
        power_oracle(F(1, 2), "entropy", 1)


# ------------------------------------------------------------------ discretization


def test_discretize_one_piece_is_the_mean():
    w = step_discretize(F(1, 2), 1)
    assert w.breakpoints == (F(0), F(1))
    assert w.values == (F(2),)


def test_discretize_two_pieces():
    w = step_discretize(F(1, 2), 2)
    assert w.breakpoints == (F(0), F(1, 2), F(1))
    assert float(w.values[0]) == pytest.approx(2 * SQRT2, abs=1e-11)
    assert float(w.values[1]) == pytest.approx(4 - 2 * SQRT2, abs=1e-11)


def test_discretize_rejects_bad_input():
    with pytest.raises(DomainError):
        step_discretize(F(1, 2), 0)
    with pytest.raises(DomainError):
        step_discretize(F(3, 2), 4)


@given(
    tau=st.sampled_from([F(1, 5), F(1, 2), F(2, 3), F(9, 10)]),
    m=st.integers(min_value=1, max_value=24),
)
def test_discretize_preserves_mass_and_order(tau, m):
    w = step_discretize(tau, m)
    assert w.npieces == m
    # cell averaging preserves the integral up to the value rounding
    assert abs(w.total_mass - 1 / tau) <= F(m, 1 << 40)
    assert all(a >= b for a, b in zip(w.values, w.values[1:]))


def test_discretize_constant_does_not_converge_to_the_continuum():
    # the first two cell averages of x^(-1/2) keep the fixed ratio
    # 1/(sqrt 2 - 1), so the backward constant of the equal-cell
    # discretization stays near 1 + sqrt 2 > 2 = [x^(-1/2)]_{A1+} at every m
    for m in (2, 64, 256):
        got = float(a1_plus_constant(step_discretize(F(1, 2), m)).value.value)
        assert got == pytest.approx(1 + SQRT2, abs=1e-9)


@pytest.mark.parametrize("tau", [F(1, 2), F(1, 5)])
def test_oracle_matches_maximal_engine_in_the_limit(tau):
    I = Interval(F(0), F(1))
    x = F(1, 3)
    closed = float(power_oracle(tau, "Mminus", x).value)
    errs = []
    for m in (8, 16, 32, 64):
        got = float(eval_maximal(step_discretize(tau, m), I, Op.MMINUS, x))
        err = abs(got - closed)
        assert err <= 2.0 / m
        errs.append(err)
    assert errs[-1] < errs[0]


# ------------------------------------------------------------------ fast constant


def test_fast_constant_matches_hull_engines():
    import random

    rng = random.Random(3)
    for _ in range(10):
        m = rng.randint(2, 9)
        cuts = sorted(rng.sample(range(1, 64), m - 1))
        bps = (F(0),) + tuple(F(c, 64) for c in cuts) + (F(1),)
        vals = tuple(sorted((F(rng.randint(1, 99), 8) for _ in range(m)), reverse=True))
        w = StepWeight(bps, vals)
        fast = _fast_constant(w)
        assert fast == a1_constant(w).value.exact
        assert fast == a1_plus_constant(w).value.exact


def test_fast_constant_declines_increasing_weights():
    assert _fast_constant(StepWeight((F(0), F(1, 2), F(1)), (F(1), F(3)))) is None


# ------------------------------------------------------------------ sharpness search


def run(**kw):
    return sharpness_search(SearchConfig(**kw))


def test_search_backward_strong_form_floor():
    res = run(variant="t3.1.first", delta=F(2), r=F(3, 2), pieces=64, budget=200, restarts=2, seed=0)
    assert isinstance(res, SearchResult)
    assert 0.9 <= res.best_ratio <= 1 + 1e-9
    assert res.witness_constant <= 2
    assert res.witness.npieces == 64
    ratios = [t[2] for t in res.trace]
    assert ratios == sorted(ratios)
    assert ratios[-1] == res.best_ratio


def test_search_is_deterministic():
    kw = dict(variant="t3.1.first", delta=F(2), r=F(3, 2), pieces=64, budget=120, restarts=2, seed=0)
    a, b = run(**kw), run(**kw)
    assert a.trace_hash == b.trace_hash
    assert a.best_ratio == b.best_ratio
    c = run(**{**kw, "seed": 5})
    assert c.trace_hash != a.trace_hash


def test_search_weak_endpoint_floor():
    res = run(variant="t1.3", delta=F(2), r=F(1), pieces=48, budget=80, restarts=1)
    assert 0.93 <= res.best_ratio <= 1 + 1e-9


def test_search_two_sided_strong_form_floor():
    res = run(variant="bsw", delta=F(2), r=F(3, 2), pieces=64, budget=100, restarts=1)
    assert 0.9 <= res.best_ratio <= 1 + 1e-9


def test_search_delta_one_needs_constant_weights():
    res = run(variant="bsw", delta=F(1), r=F(1))
    assert res.best_ratio == 1.0
    assert res.witness.npieces == 1
    assert res.witness_constant == 1


def test_search_validation():
    with pytest.raises(DomainError):
        run(delta=F(1, 2))
    with pytest.raises(DomainError):
        run(variant="nope")
    with pytest.raises(DomainError):
        run(pieces=0)
    with pytest.raises(DomainError):
        run(budget=0)
    with pytest.raises(RangeError, match=r"\[1, 2\)"):
        run(delta=F(2), r=F(2))
    with pytest.raises(RangeError):
        run(delta=F(2), r=F(1, 2))


def test_search_json_shape():
    res = run(variant="t3.1.first", delta=F(2), r=F(3, 2), pieces=16, budget=40, restarts=1)
    d = res.to_json_dict()
    assert set(d) == {"bestRatio", "witnessWeight", "witnessConstant", "iterations", "trace", "traceHash"}
    assert d["witnessWeight"]["kind"] == "step"
    assert len(d["witnessWeight"]["values"]) == 16
    assert d["iterations"] == res.iterations
    assert all(len(t) == 3 for t in d["trace"])
