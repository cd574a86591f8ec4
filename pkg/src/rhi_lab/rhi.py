"""Sharp reverse Holder constants and verdict-producing verifiers.

Every inequality handled here has the same anatomy: a power mean or a weak
norm on the left, and on the right a multiplicative constant depending on a
weight constant delta times a plainer quantity.  This module knows, for each
theorem id, the constant's closed form and the admissible exponent range,
and it can evaluate both sides on a concrete step weight, sourcing delta
from the exact A1-type engines where the theorem calls for them and from
certified grid lower bounds otherwise.

Two printed-formula repairs are baked in and flagged here rather than in the
formulas themselves: the strong corollary family uses denominator r' - delta
(the form that actually follows from the theorem it is derived from; the
variant with r - delta is dimensionally inconsistent at r = 1), and the
backward-maximal iterate theorem uses the range r < delta/(delta - 1) (the
alternative delta/(1 - delta) is negative for delta > 1, so it cannot bound
an exponent range).
"""

from __future__ import annotations

import math
from enum import Enum
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .constants import (
    RefinementGrid,
    a1_constant,
    a1_plus_constant,
    fujii_wilson_constant,
    fujii_wilson_plus_constant,
)
from .core import (
    DomainError,
    Interval,
    RangeError,
    Real,
    StepWeight,
    Verdict,
    as_fraction,
    average,
    format_rational,
    make_verdict,
    power_average,
    restrict,
    tolerance,
)
from .extremal import PowerWeight
from .maximal1d import (
    Const,
    MaximalProfile,
    Op,
    eval_maximal,
    eval_mminus2,
    integrate_profile,
    maximal_profile,
    profile_distribution,
    rearrangement,
    superlevel_set,
    weak_lorentz_norm,
)

__all__ = [
    "TheoremId",
    "admissible_range",
    "sharp_constant",
    "verify",
    "verify_bsw",
    "verify_embedding",
    "verify_extremizer_equality",
    "verify_rearrangement_lemma",
    "verify_wik_bound",
]

_LD = np.longdouble


def _ld(q) -> np.longdouble:
    q = as_fraction(q)
    return _LD(q.numerator) / _LD(q.denominator)


class TheoremId(str, Enum):
    T1_1 = "t1.1"
    T1_2 = "t1.2"
    T1_2_COR = "t1.2.cor"
    T1_3 = "t1.3"
    T3_1_FIRST = "t3.1.first"
    T3_1_SECOND = "t3.1.second"
    T3_3 = "t3.3"
    T3_3_COR_FIRST = "t3.3.cor.first"
    T3_3_COR_SECOND = "t3.3.cor.second"
    T_AINFTY_ENDPOINT = "t.ainfty.endpoint"
    T_ONESIDED_ENDPOINT_A1 = "t.onesided.endpoint.a1"
    T_ONESIDED_ENDPOINT_AINFTY = "t.onesided.endpoint.ainfty"
    L2_2 = "l2.2"
    L_REARINFTY = "l.rearinfty"
    WIK_BOUND = "wik"
    EMB_COR_I = "emb.i"
    EMB_COR_II = "emb.ii"
    T4_2 = "t4.2"
    COR3_5 = "cor3.5"
    COR4_3 = "cor4.3"


# ids whose admissible range and constant use the 2^n dyadic defect
_CUBE_RANGE = {TheoremId.T1_1, TheoremId.T4_2, TheoremId.COR4_3}

# constant families: how delta and r enter the multiplicative constant
_FAM_STRONG = {  # delta^(1-r) (r'-1)/(r'-delta)
    TheoremId.T1_2,
    TheoremId.T3_1_FIRST,
    TheoremId.T3_1_SECOND,
    TheoremId.T3_3,
    TheoremId.COR3_5,
}
_FAM_STRONG_COR = {  # delta (r'-1)/(r'-delta)
    TheoremId.T1_2_COR,
    TheoremId.T3_3_COR_FIRST,
    TheoremId.T3_3_COR_SECOND,
}
_FAM_UNIT = {  # endpoint forms with constant 1
    TheoremId.T1_3,
    TheoremId.T_AINFTY_ENDPOINT,
    TheoremId.T_ONESIDED_ENDPOINT_A1,
    TheoremId.T_ONESIDED_ENDPOINT_AINFTY,
    TheoremId.WIK_BOUND,
}
_FAM_DELTA = {TheoremId.L_REARINFTY, TheoremId.EMB_COR_I, TheoremId.EMB_COR_II}


def _coerce_id(theorem) -> TheoremId:
    if isinstance(theorem, TheoremId):
        return theorem
    try:
        return TheoremId(str(theorem).lower())
    except ValueError:
        known = ", ".join(t.value for t in TheoremId)
        raise DomainError(f"unknown theorem id {theorem!r}; expected one of {known}") from None


def admissible_range(delta, theorem, n: int = 1) -> Real:
    """Open upper bound on the exponent r for which the theorem's constant
    is finite: 1 + 1/(2^n (delta-1)) for the cube-range family, delta' =
    delta/(delta-1) for the rest, and +inf at delta = 1."""
    tid = _coerce_id(theorem)
    delta = as_fraction(delta)
    if delta < 1:
        raise DomainError(f"delta must be >= 1, got {format_rational(delta)}")
    if not isinstance(n, int) or n < 1:
        raise DomainError(f"dimension must be a positive integer, got {n!r}")
    if delta == 1:
        return Real(_LD(np.inf), None)
    if tid in _CUBE_RANGE:
        q = 1 + 1 / ((1 << n) * (delta - 1))
    else:
        q = delta / (delta - 1)
    return Real(_ld(q), q)


def _check_r(r: Fraction, delta: Fraction, tid: TheoremId, n: int) -> None:
    if r < 1:
        raise RangeError(f"r must be >= 1, got {format_rational(r)}")
    bound = admissible_range(delta, tid, n)
    if bound.exact is not None and r >= bound.exact:
        raise RangeError(
            f"r = {format_rational(r)} outside the admissible range "
            f"[1, {format_rational(bound.exact)}) for delta = {format_rational(delta)}"
        )


def _rpow(base: Real, e: Fraction) -> Real:
    """base**e, exact when the base is exact and e is an integer."""
    if e == 0:
        return Real(_LD(1), Fraction(1))
    if base.exact is not None and e.denominator == 1:
        q = base.exact ** e.numerator
        return Real(_ld(q), q)
    return Real(np.power(base.value, _ld(e)), None)


def _rmul(*xs: Real) -> Real:
    val = _LD(1)
    exact: Optional[Fraction] = Fraction(1)
    for x in xs:
        val = val * x.value
        exact = None if (exact is None or x.exact is None) else exact * x.exact
    return Real(val, exact)


def _as_real(q) -> Real:
    q = as_fraction(q)
    return Real(_ld(q), q)


def sharp_constant(r, delta, theorem, n: int = 1) -> Real:
    """The theorem's multiplicative constant at exponent r and weight
    constant delta; r = 1 is handled as the limit r' -> inf, which sends
    every (r'-1)/(r'-c) factor to 1."""
    tid = _coerce_id(theorem)
    delta = as_fraction(delta)
    if delta < 1:
        raise DomainError(f"delta must be >= 1, got {format_rational(delta)}")
    dl = _as_real(delta)
    if tid in _FAM_UNIT:
        return Real(_LD(1), Fraction(1))
    if tid in _FAM_DELTA:
        return dl
    r = as_fraction(r)
    _check_r(r, delta, tid, n)
    if r == 1:
        # r' -> inf: the r'-ratio tends to 1 and delta^(1-r) to 1
        if tid in (TheoremId.T1_1, TheoremId.COR4_3) or tid in _FAM_STRONG_COR:
            return dl
        return Real(_LD(1), Fraction(1))
    rp = r / (r - 1)
    if tid in _CUBE_RANGE:
        core = (rp - 1) / (rp - 1 - (1 << n) * (delta - 1))
        if tid is TheoremId.T4_2:
            return _rmul(_rpow(dl, 1 - r), _as_real(core))
        return _rmul(dl, _as_real(core))
    core = (rp - 1) / (rp - delta)
    if tid is TheoremId.L2_2:
        # the lambda_o-free factor; the verifier supplies lambda_o^(r-1)
        return _as_real(core)
    if tid in _FAM_STRONG_COR:
        return _rmul(dl, _as_real(core))
    return _rmul(_rpow(dl, 1 - r), _as_real(core))


# ---------------------------------------------------------------------------
# profile integration and weak norms


_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_GL_X = _GL_X.astype(np.longdouble)
_GL_W = _GL_W.astype(np.longdouble)


def _gl16(alpha, v, q, lo, hi, r):
    mid = (lo + hi) / 2
    half = (hi - lo) / 2
    xs = mid + half * _GL_X
    vals = (alpha - v * xs) / (q - xs)
    return half * np.sum(_GL_W * np.power(vals, r))


def _segment_power_integral(form, lo: Fraction, hi: Fraction, r, abs_tol) -> np.longdouble:
    rl = _ld(r)
    a, b = _ld(lo), _ld(hi)
    if isinstance(form, Const):
        return np.power(_ld(form.c), rl) * (b - a)
    al, vl, ql = _ld(form.alpha), _ld(form.v), _ld(form.q)
    total = _LD(0)
    stack = [(a, b, _gl16(al, vl, ql, a, b, rl), _LD(abs_tol))]
    while stack:
        x0, x1, est, budget = stack.pop()
        xm = (x0 + x1) / 2
        left = _gl16(al, vl, ql, x0, xm, rl)
        right = _gl16(al, vl, ql, xm, x1, rl)
        if abs(left + right - est) <= budget or (x1 - x0) < 1e-15:
            total += left + right
        else:
            stack.append((x0, xm, left, budget / 2))
            stack.append((xm, x1, right, budget / 2))
    return total


def profile_power_integral(p: MaximalProfile, r, J: Optional[Interval] = None, abs_tol: float = 1e-12) -> Real:
    """Integral of profile^r over J (default: the whole domain), by order-16
    Gauss-Legendre quadrature with interval bisection per Moebius segment;
    abs_tol is the total absolute error budget, split across segments by
    length.  Powers of Moebius transforms have no elementary antiderivative
    for general r, so quadrature is the honest route."""
    if J is None:
        J = p.domain
    length = float(J.length)
    total = _LD(0)
    for iv, form in p.segments:
        lo, hi = max(iv.lo, J.lo), min(iv.hi, J.hi)
        if lo >= hi:
            continue
        share = abs_tol * max(float(hi - lo) / length, 1e-6) if length else abs_tol
        total += _segment_power_integral(form, lo, hi, r, share)
    return Real(total, None)


def _form_endpoint_values(p: MaximalProfile) -> List[Fraction]:
    vals = set()
    for iv, form in p.segments:
        for x in (iv.lo, iv.hi):
            if isinstance(form, Const):
                vals.add(form.c)
            elif x == form.q:
                # removable singularity: the averaging window shrinks to a
                # point, where the average tends to the piece value
                vals.add(form.v)
            else:
                vals.add((form.alpha - form.v * x) / (form.q - x))
    return sorted(vals)


def _weak_power_sup_profile(p: MaximalProfile, rho, samples: int = 64) -> Tuple[np.longdouble, Fraction]:
    """Sampled lower bound of sup over lambda of lambda^rho * |{profile >
    lambda}|.  Candidates are the profile's endpoint values (where the
    distribution function kinks) plus log-spaced levels, refined by a local
    ternary pass; between kinks the sup can sit in the interior, so the
    reported value certifies failures but bounds the true sup from below."""
    crits = _form_endpoint_values(p)
    lo, hi = float(crits[0]), float(crits[-1])
    lams = [Fraction(c) for c in crits]
    if hi > lo:
        for t in np.linspace(math.log(max(lo, 1e-30)), math.log(hi), samples):
            lams.append(Fraction(float(math.exp(t))))
    rl = _ld(rho)

    def g(lam: Fraction) -> np.longdouble:
        d = profile_distribution(p, lam)
        if d == 0:
            return _LD(0)
        return np.power(_ld(lam), rl) * _ld(d)

    best_lam = max(lams, key=g)
    span = (hi - lo) / max(samples, 1)
    a, b = max(lo, float(best_lam) - span), min(hi, float(best_lam) + span)
    for _ in range(40):
        m1, m2 = a + (b - a) / 3, b - (b - a) / 3
        if g(Fraction(m1)) < g(Fraction(m2)):
            a = m1
        else:
            b = m2
    cand = Fraction((a + b) / 2)
    if g(cand) > g(best_lam):
        best_lam = cand
    return g(best_lam), best_lam


def _weak_power_sup_step(w: StepWeight, I: Interval, rho) -> Tuple[np.longdouble, Fraction]:
    """Exact sup over lambda of lambda^rho * |{x in I: w > lambda}| for a
    step weight: the distribution is a right-continuous staircase, so the
    sup is attained in the limit lambda -> v from below at one of the
    finitely many values v."""
    u = restrict(w, I)
    rl = _ld(rho)
    best, best_v = _LD(-1), None
    for v in sorted(set(u.values)):
        measure = sum((iv.length for iv, val in u.pieces() if val >= v), Fraction(0))
        g = np.power(_ld(v), rl) * _ld(measure)
        if g > best:
            best, best_v = g, v
    return best, best_v


# ---------------------------------------------------------------------------
# rearrangement helpers


def _profile_distribution_float(p: MaximalProfile):
    """Float rendering of lam -> |{profile > lam}|, for bisection interiors.
    Crossings come from the same Moebius inversion the exact code uses;
    callers must re-certify anything that rides on the answer."""
    segs = []
    for iv, form in p.segments:
        xlo, xhi = float(iv.lo), float(iv.hi)
        if isinstance(form, Const):
            c = float(form.c)
            segs.append((xlo, xhi, c, c, 0.0, 0.0, 0.0))
        else:
            va = form.v if iv.lo == form.q else _form_value(form, iv.lo)
            vb = form.v if iv.hi == form.q else _form_value(form, iv.hi)
            segs.append((xlo, xhi, float(va), float(vb),
                         float(form.alpha), float(form.v), float(form.q)))

    def dist(lam: float) -> float:
        tot = 0.0
        for xlo, xhi, va, vb, alpha, v, q in segs:
            if va > lam and vb > lam:
                tot += xhi - xlo
            elif va > lam or vb > lam:
                den = v - lam
                xs = (alpha - lam * q) / den if den else xlo
                xs = min(max(xs, xlo), xhi)
                tot += xs - xlo if va > lam else xhi - xs
        return tot

    return dist


def _rearr_value(p: MaximalProfile, t: Fraction, table, fdist) -> Fraction:
    """Left-continuous non-increasing rearrangement of the profile at t:
    inf of the levels whose superlevel set has measure at most t.  The table
    carries the exact distribution at every kink level; between kinks a
    float bisection against fdist locates the level and a single exact check
    certifies it, nudging upward in the rare case rounding left it a hair
    infeasible.  The result always satisfies profile_distribution(p, .) <= t
    and overshoots the true value by a machine-precision fraction of the
    bracket."""
    lo = hi = None
    for lam, d in table:
        if d <= t:
            hi = lam
            break
        lo = lam
    if hi is None:
        return table[-1][0]
    if lo is None:
        return hi
    a, b = float(lo), float(hi)
    tf = float(t)
    for _ in range(60):
        mid = (a + b) / 2
        if not a < mid < b:
            break
        if fdist(mid) <= tf:
            b = mid
        else:
            a = mid
    out = min(Fraction(b), hi)
    step = (hi - out) / 2**50
    while profile_distribution(p, out) > t:
        out = min(hi, out + step)
        step *= 64
    return out


def _rearr_head_integral(p: MaximalProfile, t: Fraction, lam: Fraction) -> np.longdouble:
    """Integral of the rearranged profile over (0, t), where lam is any
    level with |{profile > lam}| <= t: the superlevel mass plus a flat run
    at height lam filling out to t."""
    dec = superlevel_set(p, lam)
    head = _LD(0)
    for comp in dec.components:
        head += integrate_profile(p, comp).value
    return head + (_ld(t) - _ld(dec.total_length)) * _ld(lam)


# ---------------------------------------------------------------------------
# delta sourcing


def _grid_fw(w: StepWeight, depth: int, plus: bool) -> Tuple[Fraction, str]:
    grid = RefinementGrid.for_weight(w, depth)
    rep = fujii_wilson_plus_constant(w, grid) if plus else fujii_wilson_constant(w, grid)
    lab = "FW+" if plus else "FW"
    delta = Fraction(float(rep.value.value))
    return delta, f"{lab} grid lower bound, depth={depth}"


_GRID_IDS = {
    TheoremId.T1_1,
    TheoremId.T1_2,
    TheoremId.T1_2_COR,
    TheoremId.T3_3,
    TheoremId.T3_3_COR_FIRST,
    TheoremId.T3_3_COR_SECOND,
    TheoremId.T_AINFTY_ENDPOINT,
    TheoremId.T_ONESIDED_ENDPOINT_AINFTY,
    TheoremId.L_REARINFTY,
    TheoremId.EMB_COR_II,
    TheoremId.COR3_5,
}


# ---------------------------------------------------------------------------
# the verifier


def verify(
    theorem,
    w,
    *,
    r=None,
    interval: Optional[Interval] = None,
    triple: Optional[Sequence] = None,
    regions: Optional[Sequence[Interval]] = None,
    lam0=None,
    delta=None,
    depth: int = 6,
    tol: Optional[float] = None,
) -> Verdict:
    """Evaluate both sides of the identified inequality on w.

    delta is sourced internally: exact A1 or backward-A1 for the ids whose
    statements use them, grid lower bounds (Fujii-Wilson flavors) otherwise.
    A lower-bound delta shrinks every constant in sight and widens nothing
    that matters, so a holding Verdict is conservative; a failing Verdict
    with a grid delta is retried at depth+2 and depth+4 before being
    reported, since under-resolved constants are the usual innocent
    explanation.  The endpoint ids whose two sides both move with delta
    (the backward endpoint pair) are indicative rather than one-sided and
    say so in their delta source.

    cor3.5 checks the printed general-measure corollary specialized to
    Lebesgue measure, i.e. the plain power mean of w against the
    delta^(1-r)-normalized constant with delta the Fujii-Wilson lower
    bound.  That printed form is falsified by explicit step weights (the
    two-piece weight 1/3 fails both its displays at converged delta), so
    its verdicts are indicative and tagged "printed-form check"; the
    strict w-form with this constant shape is verify_bsw, whose delta is
    the exact A1 constant.  Measure-weighted verification lives in the
    mu-grid module, which uses the cube-family constant.
    """
    tid = _coerce_id(theorem)
    if tid is TheoremId.T4_2:
        from .dyadicnd import verify_dyadic_rhi

        return verify_dyadic_rhi(w, r=r, tol=tol)
    if tid is TheoremId.COR4_3:
        from .mugrid import verify_mu_rhi

        return verify_mu_rhi(w.grid, w, r=r, tol=tol)
    if not isinstance(w, StepWeight):
        raise DomainError(f"theorem {tid.value} verifies step weights, got {type(w).__name__}")

    if tid in _GRID_IDS:
        last = None
        for d in (depth, depth + 2, depth + 4):
            v = _verify_once(tid, w, r, interval, triple, regions, lam0, delta, d, tol)
            if v.holds:
                return v
            last = v
        return last
    return _verify_once(tid, w, r, interval, triple, regions, lam0, delta, depth, tol)


def _interval_or_support(w: StepWeight, interval: Optional[Interval]) -> Interval:
    if interval is None:
        return w.support
    if not w.support.contains(interval):
        raise DomainError(f"interval {interval} outside the weight support {w.support}")
    return interval


def _verify_once(tid, w, r, interval, triple, regions, lam0, delta, depth, tol):
    if tid is TheoremId.L_REARINFTY:
        return verify_rearrangement_lemma(w, interval, depth=depth, tol=tol)
    if tid is TheoremId.WIK_BOUND:
        if delta is None:
            delta = a1_constant(w).value.exact
        return verify_wik_bound(w, _interval_or_support(w, interval), delta, tol=tol)
    if tid in (TheoremId.EMB_COR_I, TheoremId.EMB_COR_II):
        if regions is None:
            raise DomainError("embedding verification needs the target regions")
        which = "i" if tid is TheoremId.EMB_COR_I else "ii"
        return verify_embedding(w, _interval_or_support(w, interval), regions, which, depth=depth, tol=tol)
    if tid is TheoremId.L2_2:
        return _verify_master_lemma(w, r, interval, lam0, delta, tol)
    if tid is TheoremId.T1_3:
        return _verify_weak_endpoint(w, interval, tol)
    if tid is TheoremId.T_AINFTY_ENDPOINT:
        return _verify_maximal_weak_endpoint(w, interval, depth, tol)
    if tid is TheoremId.T_ONESIDED_ENDPOINT_A1:
        return _verify_onesided_endpoint_a1(w, interval, tol)
    if tid is TheoremId.T_ONESIDED_ENDPOINT_AINFTY:
        return _verify_onesided_endpoint_ainfty(w, interval, depth, tol)
    if tid in (TheoremId.T3_1_SECOND, TheoremId.T3_3_COR_SECOND):
        return _verify_triple_form(tid, w, r, triple, depth, tol)
    return _verify_mean_form(tid, w, r, interval, depth, tol)


def _verify_mean_form(tid, w, r, interval, depth, tol):
    """The single-interval strong forms: power mean or maximal-power mass on
    the left, sharp constant times a plain mean or mass on the right."""
    if r is None:
        raise DomainError(f"theorem {tid.value} needs the exponent r")
    r = as_fraction(r)
    I = _interval_or_support(w, interval)
    params = {"r": r, "interval": I}

    if tid in (TheoremId.T3_1_FIRST,):
        delta = a1_plus_constant(w).value.exact
        source = "exact A1+"
    elif tid in _GRID_IDS:
        plus = tid in (TheoremId.T3_3, TheoremId.T3_3_COR_FIRST)
        delta, source = _grid_fw(w, depth, plus)
        if tid is TheoremId.COR3_5:
            source += "; printed-form check"
    else:
        raise DomainError(f"theorem {tid.value} is not a mean-form id")
    params["delta"] = delta
    const = sharp_constant(r, delta, tid, n=1)
    tol_eff = tolerance() if tol is None else float(tol)

    if tid in (TheoremId.T1_1, TheoremId.T1_2_COR, TheoremId.COR3_5):
        lhs = power_average(w, I, r)
        rhs = _rmul(const, _rpow(_as_real(average(w, I)), r))
    elif tid is TheoremId.T1_2:
        p = maximal_profile(w, I, Op.M)
        mean = Real(integrate_profile(p, I).value / _ld(I.length), None)
        lhs = Real(profile_power_integral(p, r, abs_tol=tol_eff).value / _ld(I.length), None)
        rhs = _rmul(const, _rpow(mean, r))
    elif tid is TheoremId.T3_1_FIRST:
        mb = eval_maximal(w, I, Op.MMINUS, I.hi)
        lhs = _rmul(power_average(w, I, r), _as_real(I.length))
        rhs = _rmul(const, _rpow(_as_real(mb), r - 1), _as_real(w.mass(I)))
        params["MminusAtRightEnd"] = mb
    elif tid is TheoremId.T3_3:
        p = maximal_profile(w, I, Op.MMINUS)
        mb2 = eval_mminus2(w, I, I.hi, refine=depth)
        lhs = profile_power_integral(p, r, abs_tol=tol_eff)
        rhs = _rmul(const, _rpow(mb2, r - 1), integrate_profile(p, I))
        params["Mminus2AtRightEnd"] = mb2
    elif tid is TheoremId.T3_3_COR_FIRST:
        p = maximal_profile(w, I, Op.MMINUS)
        mb = eval_maximal(w, I, Op.MMINUS, I.hi)
        lhs = profile_power_integral(p, r, abs_tol=tol_eff)
        rhs = _rmul(const, _rpow(_as_real(mb), r - 1), _as_real(w.mass(I)))
        params["MminusAtRightEnd"] = mb
    else:
        raise DomainError(f"theorem {tid.value} is not a mean-form id")
    return make_verdict(tid.value, params, lhs, rhs, True, tol=tol, delta_source=source)


def _verify_triple_form(tid, w, r, triple, depth, tol):
    """The chained forms over a < b < c: the left factor lives on (a, b),
    the right one reaches out to c."""
    if r is None:
        raise DomainError(f"theorem {tid.value} needs the exponent r")
    if triple is None or len(triple) != 3:
        raise DomainError(f"theorem {tid.value} needs a triple a < b < c")
    r = as_fraction(r)
    a, b, c = (as_fraction(x) for x in triple)
    if not a < b < c:
        raise DomainError("triple must satisfy a < b < c")
    outer = Interval(a, c)
    if not w.support.contains(outer):
        raise DomainError(f"triple {triple} outside the weight support {w.support}")
    inner = Interval(a, b)
    params = {"r": r, "a": a, "b": b, "c": c}
    tol_eff = tolerance() if tol is None else float(tol)

    if tid is TheoremId.T3_1_SECOND:
        delta = a1_plus_constant(w).value.exact
        source = "exact A1+"
        lhs_core = _rmul(power_average(w, inner, r), _as_real(inner.length))
    else:
        delta, source = _grid_fw(w, depth, plus=True)
        p = maximal_profile(w, inner, Op.MMINUS)
        lhs_core = profile_power_integral(p, r, abs_tol=tol_eff)
    params["delta"] = delta
    const = sharp_constant(r, delta, tid, n=1)
    lhs = _rmul(_rpow(_as_real(c - b), r - 1), lhs_core)
    rhs = _rmul(const, _rpow(_as_real(w.mass(outer)), r))
    return make_verdict(tid.value, params, lhs, rhs, True, tol=tol, delta_source=source)


def _verify_weak_endpoint(w, interval, tol):
    """Weak endpoint norm of the weight itself against its average, at the
    critical exponent delta/(delta-1) with delta the exact A1 constant."""
    I = _interval_or_support(w, interval)
    delta = a1_constant(w).value.exact
    avg = average(w, I)
    params = {"interval": I, "delta": delta}
    if delta == 1:
        # constant weight: the endpoint exponent degenerates and both sides
        # are the constant value
        v = restrict(w, I).values[0]
        return make_verdict(
            TheoremId.T1_3.value, params, _as_real(v), _as_real(avg), True, tol=tol,
            delta_source="exact A1",
        )
    rw = delta / (delta - 1)
    params["rw"] = rw
    lhs = weak_lorentz_norm(w, I, rw)
    return make_verdict(
        TheoremId.T1_3.value, params, lhs, _as_real(avg), True, tol=tol, delta_source="exact A1"
    )


def _verify_maximal_weak_endpoint(w, interval, depth, tol):
    """Same endpoint shape with the maximal function on both sides and the
    Fujii-Wilson constant steering the exponent.  With a lower-bound delta
    the exponent comes out too large, which inflates the left side and
    leaves the right side alone, so a pass is still conservative."""
    I = _interval_or_support(w, interval)
    delta, source = _grid_fw(w, depth, plus=False)
    p = maximal_profile(w, I, Op.M)
    mean = Real(integrate_profile(p, I).value / _ld(I.length), None)
    params = {"interval": I, "delta": delta}
    if delta == 1:
        top = _form_endpoint_values(p)[-1]
        return make_verdict(
            TheoremId.T_AINFTY_ENDPOINT.value, params, _as_real(top), mean, True,
            tol=tol, delta_source=source,
        )
    rw = delta / (delta - 1)
    params["rw"] = rw
    sup, lam = _weak_power_sup_profile(p, rw)
    lhs = Real(np.power(sup, _LD(1) / _ld(rw)) / np.power(_ld(I.length), _LD(1) / _ld(rw)), None)
    return make_verdict(
        TheoremId.T_AINFTY_ENDPOINT.value, params, lhs, mean, True, tol=tol,
        witness={"lambda": lam}, delta_source=source,
    )


def _verify_onesided_endpoint_a1(w, interval, tol):
    """Backward endpoint bound in its scale-consistent form: the raw sup of
    lambda^rw |{w > lambda}| against M-(w 1_I)(b)^(rw-1) w(I).  The printed
    normalized-norm-versus-mass pairing fails on constant weights over short
    intervals, and dividing it by |I| lands on exactly this statement."""
    I = _interval_or_support(w, interval)
    delta = a1_plus_constant(w).value.exact
    mb = eval_maximal(w, I, Op.MMINUS, I.hi)
    params = {"interval": I, "delta": delta, "MminusAtRightEnd": mb}
    if delta == 1:
        # nondecreasing weight: the limiting statement is ess sup w <= M-(b)
        top = max(restrict(w, I).values)
        return make_verdict(
            TheoremId.T_ONESIDED_ENDPOINT_A1.value, params, _as_real(top), _as_real(mb),
            True, tol=tol, delta_source="exact A1+ (limit form)",
        )
    rw = delta / (delta - 1)
    params["rw"] = rw
    sup, lam = _weak_power_sup_step(w, I, rw)
    rhs = _rmul(_rpow(_as_real(mb), rw - 1), _as_real(w.mass(I)))
    return make_verdict(
        TheoremId.T_ONESIDED_ENDPOINT_A1.value, params, Real(sup, None), rhs, True,
        tol=tol, witness={"lambda": lam}, delta_source="exact A1+",
    )


def _verify_onesided_endpoint_ainfty(w, interval, depth, tol):
    """Backward endpoint bound for the backward maximal function itself,
    with the backward Fujii-Wilson constant.  Both sides move with delta
    here (the exponent sits on each), so the grid lower bound makes this
    check indicative, not one-sided; the delta source says so."""
    I = _interval_or_support(w, interval)
    delta, source = _grid_fw(w, depth, plus=True)
    p = maximal_profile(w, I, Op.MMINUS)
    mass = integrate_profile(p, I)
    mb2 = eval_mminus2(w, I, I.hi, refine=depth)
    params = {"interval": I, "delta": delta, "Mminus2AtRightEnd": mb2}
    if delta == 1:
        top = _form_endpoint_values(p)[-1]
        return make_verdict(
            TheoremId.T_ONESIDED_ENDPOINT_AINFTY.value, params, _as_real(top), mb2,
            True, tol=tol, delta_source=source + " (limit form)",
        )
    rw = delta / (delta - 1)
    params["rw"] = rw
    sup, lam = _weak_power_sup_profile(p, rw)
    rhs = _rmul(_rpow(mb2, rw - 1), mass)
    return make_verdict(
        TheoremId.T_ONESIDED_ENDPOINT_AINFTY.value, params, Real(sup, None), rhs, True,
        tol=tol, witness={"lambda": lam}, delta_source=source + " (two-sided in delta)",
    )


def _verify_master_lemma(w, r, interval, lam0, delta, tol):
    """Hypothesis-checking form of the superlevel lemma: first confirm
    w(E_lambda) <= delta lambda |E_lambda| for all lambda >= lambda_o (it
    suffices to test lambda_o and the weight's values above it, where the
    left side jumps), then the conclusion with constant lambda_o^(r-1)
    (r'-1)/(r'-delta).  A violated hypothesis is reported as a failing
    Verdict pinned to the violating level."""
    if r is None or lam0 is None or delta is None:
        raise DomainError("the superlevel lemma needs r, lam0 and delta")
    r = as_fraction(r)
    lam0 = as_fraction(lam0)
    delta = as_fraction(delta)
    if lam0 < 0:
        raise DomainError(f"lambda_o must be >= 0, got {format_rational(lam0)}")
    if delta <= 1:
        raise DomainError(f"the lemma needs delta > 1, got {format_rational(delta)}")
    _check_r(r, delta, TheoremId.L2_2, 1)
    I = _interval_or_support(w, interval)
    u = restrict(w, I)
    params = {"r": r, "lam0": lam0, "delta": delta, "interval": I}

    levels = [lam0] + sorted(v for v in set(u.values) if v >= lam0)
    for lam in levels:
        mass = Fraction(0)
        length = Fraction(0)
        for iv, v in u.pieces():
            if v > lam:
                mass += v * iv.length
                length += iv.length
        bound = delta * lam * length
        if mass > bound:
            return make_verdict(
                TheoremId.L2_2.value, params, _as_real(mass), _as_real(bound), True,
                tol=tol, witness={"hypothesisViolatedAt": lam}, delta_source="given",
            )
    lhs = power_average(u, I, r)
    rhs = _rmul(_rpow(_as_real(lam0), r - 1), sharp_constant(r, delta, TheoremId.L2_2), _as_real(average(u, I)))
    return make_verdict(TheoremId.L2_2.value, params, lhs, rhs, True, tol=tol, delta_source="given")


# ---------------------------------------------------------------------------
# named lemma verifiers


def verify_rearrangement_lemma(w: StepWeight, I: Optional[Interval] = None, depth: int = 6, tol=None) -> Verdict:
    """Check (1/t) int_0^t M* <= delta M*(t) for the rearrangement M* of the
    maximal profile of w on I, with delta the Fujii-Wilson grid lower bound.

    The check runs at t = |{M > lambda}| for every kink level lambda of the
    profile, at 64 interior t samples, and at t = |I|, where the left side
    is the Fujii-Wilson functional itself and the right side is delta times
    the profile minimum.  The worst ratio wins the Verdict."""
    I = _interval_or_support(w, I)
    delta, source = _grid_fw(w, depth, plus=False)
    p = maximal_profile(w, I, Op.M)
    crits = _form_endpoint_values(p)
    length = I.length

    ts: List[Fraction] = [length]
    for lam in crits:
        d = profile_distribution(p, lam)
        if 0 < d <= length:
            ts.append(d)
    for k in range(1, 65):
        ts.append(Fraction(k, 65) * length)
    ts = sorted(set(ts))

    worst = None  # (ratio, lhs, rhs, t)
    dl = _ld(delta)
    for t in ts:
        lam = _rearr_value(p, t, crits)
        head = _rearr_head_integral(p, t, lam)
        lhs = head / _ld(t)
        rhs = dl * _ld(lam)
        ratio = lhs / rhs
        if worst is None or ratio > worst[0]:
            worst = (ratio, lhs, rhs, t)
    _, lhs, rhs, t = worst
    params = {"interval": I, "delta": delta, "samples": len(ts)}
    return make_verdict(
        TheoremId.L_REARINFTY.value, params, Real(lhs, None), Real(rhs, None), False,
        tol=tol, witness={"t": t}, delta_source=source,
    )


def verify_wik_bound(w: StepWeight, I: Interval, delta, tol=None) -> Verdict:
    """Check int_0^t w* <= (t/|I|)^(1/delta) int_0^|I| w* at the
    rearrangement's breakpoints plus 64 samples; delta must dominate the
    exact A1 constant, which is the hypothesis the bound rides on."""
    delta = as_fraction(delta)
    a1 = a1_constant(restrict(w, I)).value.exact
    if delta < a1:
        raise DomainError(
            f"delta = {format_rational(delta)} below the A1 constant {format_rational(a1)}"
        )
    star = rearrangement(w, I)
    length = I.length
    total = star.total_mass
    ts = set(star.breakpoints[1:])
    for k in range(1, 65):
        ts.add(Fraction(k, 65) * length)
    inv = Fraction(1) / delta
    worst = None
    for t in sorted(ts):
        head = star.mass(Interval(Fraction(0), t))
        lhs = _ld(head)
        rhs = np.power(_ld(t / length), _ld(inv)) * _ld(total)
        ratio = lhs / rhs
        if worst is None or ratio > worst[0]:
            worst = (ratio, lhs, rhs, t)
    _, lhs, rhs, t = worst
    params = {"interval": I, "delta": delta, "a1": a1}
    return make_verdict(
        TheoremId.WIK_BOUND.value, params, Real(lhs, None), Real(rhs, None), False,
        tol=tol, witness={"t": t}, delta_source="given (checked against exact A1)",
    )


def verify_embedding(
    w: StepWeight,
    I: Interval,
    regions: Sequence[Interval],
    which: str = "i",
    depth: int = 6,
    tol=None,
) -> Verdict:
    """Mass-ratio embedding: variant i compares weight masses with the exact
    A1 constant, variant ii compares maximal-profile masses with the
    Fujii-Wilson grid lower bound.  delta s^(1/delta) grows with delta for
    s <= 1, so the lower bound only makes variant ii harder to pass."""
    which = which.lower()
    if which not in ("i", "ii"):
        raise DomainError(f"embedding variant must be 'i' or 'ii', got {which!r}")
    if not regions:
        raise DomainError("embedding verification needs at least one region")
    regs = sorted(regions, key=lambda J: J.lo)
    prev = None
    for J in regs:
        if not I.contains(J):
            raise DomainError(f"region {J} outside the ambient interval {I}")
        if prev is not None and J.lo < prev:
            raise DomainError("embedding regions must be pairwise disjoint")
        prev = J.hi
    total_len = sum((J.length for J in regs), Fraction(0))
    share = total_len / I.length

    if which == "i":
        tid = TheoremId.EMB_COR_I
        delta = a1_constant(w).value.exact
        source = "exact A1"
        num = sum((w.mass(J) for J in regs), Fraction(0))
        den = w.mass(I)
        lhs = _as_real(num / den)
    else:
        tid = TheoremId.EMB_COR_II
        delta, source = _grid_fw(w, depth, plus=False)
        p = maximal_profile(w, I, Op.M)
        num = sum(integrate_profile(p, J).value for J in regs)
        den = integrate_profile(p, I).value
        lhs = Real(num / den, None)
    rhs = _rmul(_as_real(delta), _rpow(_as_real(share), Fraction(1) / delta))
    params = {"interval": I, "regions": list(regs), "delta": delta, "share": share}
    return make_verdict(tid.value, params, lhs, rhs, True, tol=tol, delta_source=source)


def verify_extremizer_equality(tau, r, tol=None) -> Verdict:
    """Both sides of the backward-maximal strong bound on the power weight
    x^(tau-1), which is the equality case: the left side is the r-mean of
    its backward maximal function, the right side the sharp constant at
    delta = 1/tau times M-_[2](1)^(r-1) times the mean of M-.

    The match rests on the identity (r'-1)/(r'-1/tau) = tau/((tau-1)r+1),
    which is asserted exactly in rational arithmetic before the two sides
    are compared within tolerance."""
    pw = PowerWeight(tau)
    tau = pw.tau
    r = as_fraction(r)
    if r < 1:
        raise RangeError(f"r must be >= 1, got {format_rational(r)}")
    delta = 1 / tau
    lhs = pw.avg_power(r)  # raises RangeError at or beyond 1/(1-tau)
    mean_m = pw.avg_power(1)
    params = {"tau": tau, "r": r, "delta": delta}
    if r == 1:
        rhs = mean_m
    else:
        rp = r / (r - 1)
        assert (rp - 1) / (rp - delta) == tau / ((tau - 1) * r + 1)
        const = sharp_constant(r, delta, TheoremId.T3_3)
        rhs = _rmul(const, _rpow(pw.mminus2(1), r - 1), mean_m)
    v = make_verdict(
        TheoremId.T3_3.value + " (extremizer)", params, lhs, rhs, True, tol=tol,
        delta_source="exact 1/tau",
    )
    t = tolerance() if tol is None else float(tol)
    if abs(float(v.ratio.value) - 1.0) > t:
        return Verdict(v.theorem, v.params, v.lhs, v.rhs, v.ratio, False, v.exact, v.witness, v.delta_source)
    return v


def verify_bsw(w: StepWeight, r, interval: Optional[Interval] = None, tol=None) -> Verdict:
    """Two-sided strong reverse Holder bound normalized by the average, with
    the exact A1 constant: avg of w^r against delta^(1-r) (r'-1)/(r'-delta)
    times avg(w)^r."""
    r = as_fraction(r)
    I = _interval_or_support(w, interval)
    delta = a1_constant(w).value.exact
    params = {"r": r, "interval": I, "delta": delta}
    if delta == 1:
        v = restrict(w, I).values[0]
        lhs = _rpow(_as_real(v), r)
        return make_verdict("bsw", params, lhs, lhs, True, tol=tol, delta_source="exact A1")
    _check_r(r, delta, TheoremId.T1_2, 1)
    const = _rmul(_rpow(_as_real(delta), 1 - r), sharp_constant(r, delta, TheoremId.L2_2))
    lhs = power_average(w, I, r)
    rhs = _rmul(const, _rpow(_as_real(average(w, I)), r))
    return make_verdict("bsw", params, lhs, rhs, True, tol=tol, delta_source="exact A1")
