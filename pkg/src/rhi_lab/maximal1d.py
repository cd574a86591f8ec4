"""One-dimensional maximal operators on step weights, evaluated exactly.

The operators: M (uncentered two-sided), M+ (forward), M- (backward), and the
iterated backward variant M-[2].  Everything rests on one observation: the
average (W(b) - W(a)) / (b - a) of a step weight is a Moebius function of each
endpoint while that endpoint stays inside one constant piece, hence monotone
there.  Suprema are therefore attained with endpoints in the finite set
{x} | breakpoints, and maximal functions of step weights are piecewise
Moebius with rational breakpoints.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .core import (
    DomainError,
    InternalConsistencyError,
    Interval,
    Real,
    StepWeight,
    _ld_fraction,
    canonical_json,
    restrict,
    step_weight_to_json,
)

__all__ = [
    "Op",
    "Const",
    "Moebius",
    "MaximalProfile",
    "LevelSetDecomposition",
    "eval_maximal",
    "eval_mminus2",
    "maximal_profile",
    "evaluate_profile",
    "integrate_profile",
    "superlevel_set",
    "rising_sun_minus",
    "rising_sun_two_sided",
    "rearrangement",
    "profile_distribution",
    "weak_lorentz_norm",
    "sup_ratio",
    "reflect_weight",
    "profile_csv",
]


class Op(str, Enum):
    M = "M"
    MPLUS = "Mplus"
    MMINUS = "Mminus"
    MMINUS2 = "Mminus2"


@dataclass(frozen=True)
class Const:
    c: Fraction


@dataclass(frozen=True)
class Moebius:
    """x -> (alpha - v*x) / (q - x); the average of the weight between x and
    the fixed endpoint q, as x moves through a piece of value v."""

    alpha: Fraction
    v: Fraction
    q: Fraction


Form = Union[Const, Moebius]


def _form_value(form: Form, x: Fraction) -> Fraction:
    if isinstance(form, Const):
        return form.c
    if x == form.q:
        raise InternalConsistencyError("profile evaluated at a Moebius pole")
    return (form.alpha - form.v * x) / (form.q - x)


def _form_value_ld(form: Form, x) -> np.longdouble:
    if isinstance(form, Const):
        return _ld_fraction(form.c)
    return (_ld_fraction(form.alpha) - _ld_fraction(form.v) * x) / (_ld_fraction(form.q) - x)


@dataclass(frozen=True)
class MaximalProfile:
    """Exact piecewise-Moebius representation of a maximal function on I."""

    op: Op
    domain: Interval
    segments: tuple  # ((Interval, Form), ...) partitioning domain

    def __post_init__(self):
        segs = tuple(self.segments)
        prev = self.domain.lo
        for iv, form in segs:
            if iv.lo != prev:
                raise InternalConsistencyError("profile segments do not partition the domain")
            if isinstance(form, Moebius) and iv.lo < form.q < iv.hi:
                raise InternalConsistencyError("Moebius pole inside a profile segment")
            prev = iv.hi
        if prev != self.domain.hi:
            raise InternalConsistencyError("profile segments do not cover the domain")
        object.__setattr__(self, "segments", segs)
        if self.op is Op.M:
            for (ivl, fl), (_ivr, fr) in zip(segs, segs[1:]):
                if _form_value(fl, ivl.hi) != _form_value(fr, ivl.hi):
                    raise InternalConsistencyError(
                        f"M profile discontinuous at {ivl.hi}"
                    )

    def limits_at(self, x: Fraction) -> Tuple[Optional[Fraction], Optional[Fraction]]:
        """One-sided limits (left, right) at x in closure(domain)."""
        left = right = None
        for iv, form in self.segments:
            if iv.lo < x <= iv.hi:
                left = _form_value(form, x)
            if iv.lo <= x < iv.hi:
                right = _form_value(form, x)
                break
        return left, right


@dataclass(frozen=True)
class LevelSetDecomposition:
    lam: Fraction
    components: tuple  # open Intervals, sorted
    touches_left: tuple
    touches_right: tuple
    certified_mass: tuple

    @property
    def total_length(self) -> Fraction:
        return sum((c.length for c in self.components), Fraction(0))

    def interior(self, j: int) -> bool:
        return not (self.touches_left[j] or self.touches_right[j])


# ---------------------------------------------------------------------------
# pointwise evaluation


def _candidate_points(u: StepWeight, x: Fraction) -> List[Fraction]:
    pts = set(u.breakpoints)
    pts.add(x)
    return sorted(pts)


def eval_maximal(w: StepWeight, I: Interval, op: Op, x) -> Fraction:
    """Exact value of the chosen maximal function of w*1_I at x in closure(I).

    The maximum runs over averaging windows whose endpoints lie in
    {x} | breakpoints; monotonicity of the average in each endpoint within a
    piece makes this finite set sufficient."""
    x = Fraction(x) if not isinstance(x, Fraction) else x
    op = Op(op)
    if op is Op.MMINUS2:
        raise DomainError("M-[2] has no exact pointwise oracle here; use eval_mminus2")
    if not I.contains_point(x, closed=True):
        raise DomainError(f"{x} outside the closure of {I}")
    u = restrict(w, I) if I != w.support else w
    best = Fraction(0)
    pts = _candidate_points(u, x)
    if op in (Op.M, Op.MMINUS):
        lefts = [a for a in pts if a < x] or []
    if op in (Op.M, Op.MPLUS):
        rights = [b for b in pts if b > x] or []
    if op is Op.MMINUS:
        if not lefts:
            return u.values[0]  # closure endpoint: inner one-sided limit
        for a in lefts:
            best = max(best, (u.cummass(x) - u.cummass(a)) / (x - a))
    elif op is Op.MPLUS:
        if not rights:
            return u.values[-1]
        for b in rights:
            best = max(best, (u.cummass(b) - u.cummass(x)) / (b - x))
    else:
        for a in lefts + [x]:
            for b in rights + [x]:
                if a < b:
                    best = max(best, (u.cummass(b) - u.cummass(a)) / (b - a))
    return best


def _eval_anywhere(w: StepWeight, x: Fraction, op: Op = Op.M) -> Fraction:
    """M(w)(x) for compactly supported w, x anywhere on the line."""
    pts = sorted(set(w.breakpoints) | {x})
    best = Fraction(0)
    if op in (Op.M, Op.MMINUS):
        for a in pts:
            if a < x:
                best = max(best, (w.cummass(x) - w.cummass(a)) / (x - a))
    if op in (Op.M, Op.MPLUS):
        for b in pts:
            if b > x:
                best = max(best, (w.cummass(b) - w.cummass(x)) / (b - x))
    if op is Op.M:
        for a in pts:
            for b in pts:
                if a < x < b:
                    best = max(best, (w.cummass(b) - w.cummass(a)) / (b - a))
    return best


# ---------------------------------------------------------------------------
# profile construction


def reflect_weight(w: StepWeight) -> StepWeight:
    return StepWeight(tuple(-b for b in reversed(w.breakpoints)), tuple(reversed(w.values)))


def _reflect_form(form: Form) -> Form:
    if isinstance(form, Const):
        return form
    return Moebius(-form.alpha, form.v, -form.q)


def _reflect_segments(segs) -> tuple:
    return tuple(
        (Interval(-iv.hi, -iv.lo), _reflect_form(form)) for iv, form in reversed(segs)
    )


def _envelope_minus_piece(u: StepWeight, k: int):
    """Upper envelope of the backward-average candidates on piece k, as a list
    of (Interval, Form) covering (x_k, x_{k+1})."""
    bps, W = u.breakpoints, u.prefix_mass
    a, b = bps[k], bps[k + 1]
    v = u.values[k]
    g = W[k] - v * bps[k]
    # candidate j: average over (x_j, x) = v + c_j / (x - q_j), pole q_j <= a
    cands = []
    for j in range(k + 1):
        q = bps[j]
        c = g + v * q - W[j]
        cands.append((c, q))

    def val(i: int, x: Fraction) -> Fraction:
        c, q = cands[i]
        return v if c == 0 else v + c / (x - q)

    def slope(i: int, x: Fraction) -> Fraction:
        c, q = cands[i]
        return Fraction(0) if c == 0 else -c / (x - q) ** 2

    def winner_at(x: Fraction) -> int:
        best = 0
        for i in range(1, len(cands)):
            dv = val(i, x) - val(best, x)
            if dv > 0 or (dv == 0 and slope(i, x) > slope(best, x)):
                best = i
        return best

    segs = []
    t = a
    lead = winner_at(a)
    guard = 0
    while True:
        guard += 1
        if guard > len(cands) + 2:
            raise InternalConsistencyError("envelope sweep failed to terminate")
        c_l, q_l = cands[lead]
        nxt_x: Optional[Fraction] = None
        nxt_i = -1
        for i, (c, q) in enumerate(cands):
            if i == lead or c <= c_l:
                continue  # only a larger residue coefficient can overtake
            if c == c_l:
                continue
            xs = (c * q_l - c_l * q) / (c - c_l)
            if t < xs < b and (nxt_x is None or xs < nxt_x or (xs == nxt_x and c > cands[nxt_i][0])):
                nxt_x, nxt_i = xs, i
        if nxt_x is None:
            segs.append((Interval(t, b), _make_form(v, cands[lead])))
            return segs
        segs.append((Interval(t, nxt_x), _make_form(v, cands[lead])))
        t, lead = nxt_x, nxt_i


def _make_form(v: Fraction, cand) -> Form:
    c, q = cand
    if c == 0:
        return Const(v)
    return Moebius(v * q - c, v, q)


def _profile_minus_segments(u: StepWeight) -> tuple:
    segs = []
    for k in range(u.npieces):
        segs.extend(_envelope_minus_piece(u, k))
    return _coalesce(segs)


def _coalesce(segs) -> tuple:
    out = []
    for iv, form in segs:
        if out and out[-1][1] == form and out[-1][0].hi == iv.lo:
            out[-1] = (Interval(out[-1][0].lo, iv.hi), form)
        else:
            out.append((iv, form))
    return tuple(out)


def _merge_max(segs_a, segs_b) -> tuple:
    """Pointwise maximum of two profiles over the same domain.

    Within any common cell both forms share the piece value v, so their
    difference has a linear numerator: at most one crossing per cell."""
    bounds = sorted({iv.lo for iv, _ in segs_a} | {iv.hi for iv, _ in segs_a}
                    | {iv.lo for iv, _ in segs_b} | {iv.hi for iv, _ in segs_b})

    def form_at(segs, lo, hi):
        for iv, form in segs:
            if iv.lo <= lo and hi <= iv.hi:
                return form
        raise InternalConsistencyError("profile cell not covered")

    out = []
    for lo, hi in zip(bounds, bounds[1:]):
        fa = form_at(segs_a, lo, hi)
        fb = form_at(segs_b, lo, hi)
        mid = (lo + hi) / 2
        d_lo = _form_value(fa, lo) - _form_value(fb, lo)
        d_mid = _form_value(fa, mid) - _form_value(fb, mid)
        d_hi = _form_value(fa, hi) - _form_value(fb, hi)
        if d_lo >= 0 and d_mid >= 0 and d_hi >= 0:
            out.append((Interval(lo, hi), fa))
        elif d_lo <= 0 and d_mid <= 0 and d_hi <= 0:
            out.append((Interval(lo, hi), fb))
        else:
            xs = _crossing(fa, fb)
            if xs is None or not lo < xs < hi:
                raise InternalConsistencyError("expected a single profile crossing")
            first, second = (fa, fb) if d_lo > 0 else (fb, fa)
            out.append((Interval(lo, xs), first))
            out.append((Interval(xs, hi), second))
    return _coalesce(out)


def _crossing(fa: Form, fb: Form) -> Optional[Fraction]:
    """Root of fa - fb given both share the same v (possibly as Const(v))."""
    ca, qa = _residue(fa)
    cb, qb = _residue(fb)
    if ca == cb:
        return None
    return (ca * qb - cb * qa) / (ca - cb)


def _residue(form: Form):
    if isinstance(form, Const):
        return Fraction(0), Fraction(0)
    return form.v * form.q - form.alpha, form.q


def maximal_profile(w: StepWeight, I: Interval, op: Op) -> MaximalProfile:
    """Exact profile of the maximal function of w*1_I on I.

    Per weight piece the maximal function is the upper envelope of finitely
    many backward/forward average candidates; envelope crossings solve linear
    equations, so every breakpoint of the result is rational."""
    op = Op(op)
    if op is Op.MMINUS2:
        raise DomainError("M-[2] is not piecewise Moebius; profiles exist for M, M+, M-")
    u = restrict(w, I)
    if op is Op.MMINUS:
        segs = _profile_minus_segments(u)
    elif op is Op.MPLUS:
        segs = _reflect_segments(_profile_minus_segments(reflect_weight(u)))
    else:
        minus = _profile_minus_segments(u)
        plus = _reflect_segments(_profile_minus_segments(reflect_weight(u)))
        segs = _merge_max(minus, plus)
    return MaximalProfile(op, I, segs)


def evaluate_profile(p: MaximalProfile, x) -> Fraction:
    """Profile value at x with the operator's one-sided convention: M- is
    left-continuous, M+ right-continuous, M continuous.  Domain endpoints use
    the inner one-sided limit."""
    x = Fraction(x) if not isinstance(x, Fraction) else x
    if not p.domain.contains_point(x, closed=True):
        raise DomainError(f"{x} outside profile domain {p.domain}")
    left, right = p.limits_at(x)
    if p.op is Op.MMINUS:
        return left if left is not None else right
    if p.op is Op.MPLUS:
        return right if right is not None else left
    if left is not None and right is not None and left != right:
        raise InternalConsistencyError(f"M profile discontinuous at {x}")
    return left if left is not None else right


def integrate_profile(p: MaximalProfile, J: Interval) -> Real:
    """integral of the profile over J via closed-form antiderivatives
    (v*x + (v*q - alpha) * log|x - q| on Moebius segments).  Logarithms make
    the result approximate; the flag on the returned Real says so."""
    if not p.domain.contains(J):
        raise DomainError(f"{J} outside profile domain {p.domain}")
    total = np.longdouble(0)
    for iv, form in p.segments:
        cell = iv.intersect(J)
        if cell is None:
            continue
        if isinstance(form, Const):
            total += _ld_fraction(form.c * cell.length)
            continue
        c = form.v * form.q - form.alpha
        if cell.lo < form.q < cell.hi:
            raise InternalConsistencyError("Moebius pole inside integration cell")
        ratio = (cell.hi - form.q) / (cell.lo - form.q)
        if ratio <= 0:
            raise InternalConsistencyError("integration cell straddles the pole")
        total += _ld_fraction(form.v * cell.length)
        total += _ld_fraction(c) * np.log(_ld_fraction(ratio))
    return Real(total, None)


# ---------------------------------------------------------------------------
# level sets


def _segment_superlevel(iv: Interval, form: Form, lam: Fraction):
    """Open sub-interval of iv where the (monotone) form exceeds lam."""
    va = _form_value(form, iv.lo)
    vb = _form_value(form, iv.hi)
    if va > lam and vb > lam:
        return iv
    if va <= lam and vb <= lam:
        return None
    if isinstance(form, Const):
        return iv if form.c > lam else None
    if form.v == lam:
        # f - lam = (v*q - alpha)/(q - x) keeps one sign; endpoints decided it
        raise InternalConsistencyError("monotone segment cannot straddle its own v")
    xs = (form.alpha - lam * form.q) / (form.v - lam)
    if va > lam:
        return Interval(iv.lo, xs) if iv.lo < xs else None
    return Interval(xs, iv.hi) if xs < iv.hi else None


def superlevel_set(p: MaximalProfile, lam) -> LevelSetDecomposition:
    """Exact components of {x in domain : profile(x) > lam}; touching pieces
    merge exactly when the operator's pointwise value at the junction exceeds
    lam."""
    lam = Fraction(lam) if not isinstance(lam, Fraction) else lam
    if lam <= 0:
        raise DomainError(f"level must be positive, got {lam}")
    comps: List[Interval] = []
    for iv, form in p.segments:
        part = _segment_superlevel(iv, form, lam)
        if part is None:
            continue
        if comps and comps[-1].hi == part.lo and evaluate_profile(p, part.lo) > lam:
            comps[-1] = Interval(comps[-1].lo, part.hi)
        else:
            comps.append(part)
    return _decorate(lam, comps, p.domain)


def _decorate(lam: Fraction, comps: Sequence[Interval], ambient: Optional[Interval]) -> LevelSetDecomposition:
    tl = tuple(ambient is not None and c.lo == ambient.lo for c in comps)
    tr = tuple(ambient is not None and c.hi == ambient.hi for c in comps)
    cert = tuple(False for _ in comps)
    return LevelSetDecomposition(lam, tuple(comps), tl, tr, cert)


def profile_distribution(p: MaximalProfile, lam) -> Fraction:
    """|{x in domain : profile(x) > lam}|, exact."""
    return superlevel_set(p, lam).total_length


# ---------------------------------------------------------------------------
# rising-sun decompositions


def rising_sun_minus(w: StepWeight, I: Interval, lam) -> LevelSetDecomposition:
    """Components of {M-(w*1_I) > lam} within I, with the exact mass identity
    w((a_j,b_j)) = lam * (b_j - a_j) certified per component.

    Interior components must satisfy the identity (a failure is an engine
    bug); components whose closure reaches the right endpoint of I keep a
    flag and may legitimately fail it, because the superlevel set continues
    beyond I."""
    lam = Fraction(lam) if not isinstance(lam, Fraction) else lam
    if lam <= 0:
        raise DomainError(f"level must be positive, got {lam}")
    u = restrict(w, I)
    p = maximal_profile(u, I, Op.MMINUS)
    dec = superlevel_set(p, lam)
    cert = []
    for j, comp in enumerate(dec.components):
        ok = u.mass(comp) == lam * comp.length
        if not ok and not dec.touches_right[j]:
            raise InternalConsistencyError(
                f"mass identity failed on interior rising-sun component {comp}"
            )
        cert.append(ok)
    return LevelSetDecomposition(
        lam, dec.components, dec.touches_left, dec.touches_right, tuple(cert)
    )


def _superlevel_minus_line(w: StepWeight, lam: Fraction) -> List[Interval]:
    """Components of {M-(w) > lam} over the whole line (w compactly
    supported).  Inside the support this is the profile superlevel set; past
    the right endpoint the backward maximal decays, extending the last
    component to the exact point where the best average drops to lam."""
    I = w.support
    p = maximal_profile(w, I, Op.MMINUS)
    comps = list(superlevel_set(p, lam).components)
    hi = I.hi
    value_at_hi = max((
        (w.total_mass - w.prefix_mass[j]) / (hi - w.breakpoints[j])
        for j in range(len(w.breakpoints) - 1)
    ), default=Fraction(0))
    if value_at_hi > lam:
        b_star = max(
            w.breakpoints[j] + (w.total_mass - w.prefix_mass[j]) / lam
            for j in range(len(w.breakpoints) - 1)
        )
        if comps and comps[-1].hi == hi:
            comps[-1] = Interval(comps[-1].lo, b_star)
        else:
            comps.append(Interval(hi, b_star))
    return comps


def rising_sun_two_sided(w: StepWeight, lam) -> LevelSetDecomposition:
    """Components of {Mw > lam} over the whole line, self-certified: every
    breakpoint window with average above lam lies in a component, one-sided
    averages from component endpoints never exceed lam, and the maximal
    function localizes to each component (checked exactly at rational
    samples)."""
    lam = Fraction(lam) if not isinstance(lam, Fraction) else lam
    if lam <= 0:
        raise DomainError(f"level must be positive, got {lam}")
    minus = _superlevel_minus_line(w, lam)
    plus = [
        Interval(-c.hi, -c.lo)
        for c in reversed(_superlevel_minus_line(reflect_weight(w), lam))
    ]
    merged: List[Interval] = []
    for c in sorted(minus + plus):
        if merged and c.lo < merged[-1].hi:
            merged[-1] = Interval(merged[-1].lo, max(merged[-1].hi, c.hi))
        elif merged and c.lo == merged[-1].hi and _eval_anywhere(w, c.lo) > lam:
            merged[-1] = Interval(merged[-1].lo, c.hi)
        else:
            merged.append(c)
    _certify_two_sided(w, lam, merged)
    return _decorate(lam, merged, None)


def _certify_two_sided(w: StepWeight, lam: Fraction, comps: Sequence[Interval]) -> None:
    bps = w.breakpoints
    # (i) maximality: any breakpoint window averaging above lam sits inside a component
    for i in range(len(bps)):
        for j in range(i + 1, len(bps)):
            if w.mass(Interval(bps[i], bps[j])) > lam * (bps[j] - bps[i]):
                if not any(c.lo <= bps[i] and bps[j] <= c.hi for c in comps):
                    raise InternalConsistencyError(
                        f"window ({bps[i]},{bps[j]}) beats level {lam} outside all components"
                    )
    for c in comps:
        corners = [t for t in bps if c.lo < t < c.hi]
        # (ii) endpoint averages stay at or below lam (piecewise-linear mass, so corners suffice)
        for t in corners + [c.hi]:
            if w.mass(Interval(c.lo, t)) > lam * (t - c.lo):
                raise InternalConsistencyError(f"left-endpoint average above {lam} on {c}")
        for t in [c.lo] + corners:
            if w.mass(Interval(t, c.hi)) > lam * (c.hi - t):
                raise InternalConsistencyError(f"right-endpoint average above {lam} on {c}")
        # (iii) localization: restricting to the component leaves M unchanged on it
        overlap = c.intersect(w.support)
        if overlap is None:
            raise InternalConsistencyError(f"component {c} carries no mass")
        local = restrict(w, overlap)
        samples = sorted({c.lo, c.hi} | set(corners))
        samples = [ (a + b) / 2 for a, b in zip(samples, samples[1:]) ]
        for s in samples:
            if _eval_anywhere(local, s) != _eval_anywhere(w, s):
                raise InternalConsistencyError(
                    f"maximal function fails to localize to {c} at x={s}"
                )


# ---------------------------------------------------------------------------
# rearrangement and weak-type norms


def rearrangement(w: StepWeight, I: Interval) -> StepWeight:
    """Decreasing rearrangement of w*1_I on (0, |I|): pieces sorted by value,
    equal values merged; exact.  (Thought of as left-continuous.)"""
    u = restrict(w, I)
    pieces = sorted(
        ((v, iv.length) for iv, v in u.pieces()), key=lambda t: t[0], reverse=True
    )
    bps = [Fraction(0)]
    vals: List[Fraction] = []
    for v, ln in pieces:
        if vals and vals[-1] == v:
            bps[-1] += ln
        else:
            vals.append(v)
            bps.append(bps[-1] + ln)
    return StepWeight(tuple(bps), tuple(vals))


def weak_lorentz_norm(w: StepWeight, I: Interval, r) -> Real:
    """|I|^{-1/r} * sup_lam lam * |{w*1_I > lam}|^{1/r}; the sup is a maximum
    over levels just below each piece value."""
    rv = np.longdouble(float(r))
    if not rv > 1:
        raise DomainError(f"weak norm needs r > 1, got {r}")
    u = restrict(w, I)
    best = np.longdouble(0)
    for v in set(u.values):
        d = sum((iv.length for iv, val in u.pieces() if val >= v), Fraction(0))
        cand = _ld_fraction(v) * _ld_fraction(d) ** (1 / rv)
        best = max(best, cand)
    return Real(best / _ld_fraction(I.length) ** (1 / rv), None)


# ---------------------------------------------------------------------------
# the iterated backward operator


def eval_mminus2(w: StepWeight, I: Interval, x, refine: int = 6) -> Real:
    """M-[2](w*1_I)(x) = sup_{h>0} (1/h) * integral over (x-h, x) of
    M-(w*1_{(x-h,x)}).

    The sup over window starts at breakpoints is exact; between breakpoints
    the objective is smooth but need not peak at a candidate, so the bracket
    is refined around the running best and the result is a certified lower
    bound (exact only in the constant-weight case)."""
    x = Fraction(x) if not isinstance(x, Fraction) else x
    if not I.contains_point(x, closed=True):
        raise DomainError(f"{x} outside the closure of {I}")
    u = restrict(w, I)
    lo = u.support.lo
    if x == lo:
        return Real.of(0)
    window = Interval(lo, x)
    inner = restrict(u, window)
    if len(set(inner.values)) == 1:
        return Real.of(inner.values[0])

    def objective(a: Fraction) -> np.longdouble:
        win = Interval(a, x)
        p = maximal_profile(inner, win, Op.MMINUS)
        return integrate_profile(p, win).value / _ld_fraction(win.length)

    starts = [b for b in inner.breakpoints if b < x]
    samples = {a: objective(a) for a in starts}
    for _ in range(refine):
        grid = sorted(samples)
        best_a = max(samples, key=lambda a: samples[a])
        i = grid.index(best_a)
        for nb in (grid[i - 1] if i > 0 else None, grid[i + 1] if i + 1 < len(grid) else x):
            if nb is None:
                continue
            mid = (best_a + nb) / 2
            if mid not in samples and mid < x:
                samples[mid] = objective(mid)
    return Real(max(samples.values()), None)


# ---------------------------------------------------------------------------
# fast essential suprema of M(w 1_I)/w (convex-hull chords, O(m log m))


def _piece_sups_minus(u: StepWeight) -> List[Tuple[Fraction, Interval]]:
    """For each piece, sup of M-(u) there (attained at the left limit) and a
    witness window; max backward chord slopes via the lower hull of the
    prefix-mass graph."""
    bps, W = u.breakpoints, u.prefix_mass
    hull: List[int] = []
    out = []

    def slope(j: int, k: int) -> Fraction:
        return (W[k] - W[j]) / (bps[k] - bps[j])

    for k in range(u.npieces):
        v = u.values[k]
        best_val, best_j = v, None
        if hull:
            lo_i, hi_i = 0, len(hull) - 1
            while lo_i < hi_i:
                mid = (lo_i + hi_i) // 2
                if slope(hull[mid + 1], k) > slope(hull[mid], k):
                    lo_i = mid + 1
                else:
                    hi_i = mid
            j = hull[lo_i]
            s = slope(j, k)
            if s > best_val:
                best_val, best_j = s, j
        window = (
            Interval(bps[k], bps[k + 1])
            if best_j is None
            else Interval(bps[best_j], bps[k])
        )
        out.append((best_val, window))
        while (
            len(hull) >= 2
            and (W[k] - W[hull[-1]]) * (bps[hull[-1]] - bps[hull[-2]])
            <= (W[hull[-1]] - W[hull[-2]]) * (bps[k] - bps[hull[-1]])
        ):
            hull.pop()
        hull.append(k)
    return out


def sup_ratio(w: StepWeight, I: Interval, op: Op) -> Tuple[Fraction, dict]:
    """Exact ess-sup over I of (maximal op of w*1_I) / w with a witness.

    Uses the hull shortcut instead of full profiles, so it stays fast for
    weights with thousands of pieces."""
    op = Op(op)
    if op is Op.MMINUS2:
        raise DomainError("sup_ratio supports M, M+, M-")
    u = restrict(w, I)
    per_piece: List[Tuple[Fraction, Interval]] = [(Fraction(0), I)] * u.npieces
    if op in (Op.MMINUS, Op.M):
        per_piece = _piece_sups_minus(u)
    if op in (Op.MPLUS, Op.M):
        refl = _piece_sups_minus(reflect_weight(u))
        plus = [
            (val, Interval(-win.hi, -win.lo)) for val, win in reversed(refl)
        ]
        if op is Op.MPLUS:
            per_piece = plus
        else:
            per_piece = [max(a, b, key=lambda t: t[0]) for a, b in zip(per_piece, plus)]
    best_k = max(range(u.npieces), key=lambda k: per_piece[k][0] / u.values[k])
    val, window = per_piece[best_k]
    ratio = val / u.values[best_k]
    witness = {
        "piece": Interval(u.breakpoints[best_k], u.breakpoints[best_k + 1]),
        "window": window,
        "value": val,
    }
    return ratio, witness


# ---------------------------------------------------------------------------
# CSV emitter


def weight_hash(w: StepWeight) -> str:
    text = canonical_json(step_weight_to_json(w))
    return hashlib.sha256(text.encode()).hexdigest()


def profile_csv(w: StepWeight, p: MaximalProfile, interior: int = 8) -> str:
    """Rows x,value at segment boundaries plus `interior` samples inside each
    segment; the header records the operator and the source weight hash."""
    lines = [
        f"# op={p.op.value} weight=sha256:{weight_hash(w)} domain={p.domain}",
        "x,value",
    ]
    for iv, form in p.segments:
        xs = [iv.lo + iv.length * Fraction(t, interior + 1) for t in range(interior + 2)]
        for xq in xs:
            val = _form_value(form, xq)
            lines.append(f"{float(xq)!r},{float(val)!r}")
    return "\n".join(lines) + "\n"
