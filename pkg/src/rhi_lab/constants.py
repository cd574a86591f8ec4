"""Weight-class constants of step weights.

A1-type constants are exact (the inner supremum collapses onto the maximal
profile).  The integral functionals (Fujii-Wilson, Khrushchev, Ap,
Gurov-Reshetnyak) take their supremum over all intervals, with no closed-form
extremal interval available, so they are reported as monotone grid-refined
lower bounds: candidate intervals have endpoints on a dyadic refinement of
the breakpoint grid, and deeper grids never decrease the value.

Every per-window value is computed from prefix data anchored at the weight's
own breakpoints, never from grid-resolution-dependent running sums; two grids
therefore assign bit-identical values to a shared window, which is what makes
depth monotonicity hold exactly and results independent of sweep order."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Callable, List, Tuple

import numpy as np

from .core import (
    ConstantKind,
    ConstantReport,
    DomainError,
    Interval,
    Real,
    StepWeight,
    _ld_fraction,
    average,
    power_average,
)
from .maximal1d import Op, integrate_profile, maximal_profile, sup_ratio

__all__ = [
    "RefinementGrid",
    "a1_constant",
    "a1_plus_constant",
    "ap_constant",
    "fujii_wilson_constant",
    "fujii_wilson_plus_constant",
    "khrushchev_constant",
    "gurov_reshetnyak",
]

_MAX_GRID_POINTS = 200_000


@dataclass(frozen=True)
class RefinementGrid:
    """Breakpoints plus dyadic subdivisions of every gap, to a given depth.

    Candidate sets are nested in the depth, which is what makes the reported
    lower bounds monotone under refinement."""

    base: tuple
    depth: int

    def __post_init__(self):
        base = tuple(sorted(set(self.base)))
        if len(base) < 2:
            raise DomainError("refinement grid needs at least two base points")
        if self.depth < 0:
            raise DomainError(f"depth must be >= 0, got {self.depth}")
        total = len(base) + (len(base) - 1) * ((1 << self.depth) - 1)
        if total > _MAX_GRID_POINTS:
            raise DomainError(
                f"grid would hold {total} points (cap {_MAX_GRID_POINTS}); lower the depth"
            )
        object.__setattr__(self, "base", base)

    @staticmethod
    def for_weight(w: StepWeight, depth: int) -> "RefinementGrid":
        return RefinementGrid(w.breakpoints, depth)

    @cached_property
    def points(self) -> tuple:
        steps = 1 << self.depth
        out: List[Fraction] = []
        for a, b in zip(self.base, self.base[1:]):
            gap = b - a
            out.extend(a + gap * Fraction(k, steps) for k in range(steps))
        out.append(self.base[-1])
        return tuple(out)


# ---------------------------------------------------------------------------
# exact A1-type constants


def a1_constant(w: StepWeight) -> ConstantReport:
    """[w]_{A1} = ess sup M(w 1_I)/w over the support I, exact."""
    val, wit = sup_ratio(w, w.support, Op.M)
    return ConstantReport(ConstantKind.A1, Real.of(val), False, 0, wit)


def a1_plus_constant(w: StepWeight) -> ConstantReport:
    """[w]_{A1+} = ess sup M-(w 1_I)/w, exact; M- carries mass only forward."""
    val, wit = sup_ratio(w, w.support, Op.MMINUS)
    return ConstantReport(ConstantKind.A1PLUS, Real.of(val), False, 0, wit)


# ---------------------------------------------------------------------------
# shared grid plumbing


def _grid_points(w: StepWeight, grid: RefinementGrid) -> tuple:
    pts = grid.points
    if pts[0] < w.support.lo or pts[-1] > w.support.hi:
        raise DomainError("grid extends beyond the weight support")
    return pts

def _ld_array(xs) -> np.ndarray:
    return np.array([_ld_fraction(Fraction(x)) for x in xs], dtype=np.longdouble)


def _transform_prefix(w: StepWeight, pts, f: Callable) -> np.ndarray:
    """F(x) = integral from the support's left end of f(w(t)) dt, evaluated
    at every grid point from per-piece prefixes (so the rounding of a value
    does not depend on the grid)."""
    fv = [f(_ld_fraction(v)) for v in w.values]
    piece_prefix = [np.longdouble(0)]
    for k in range(w.npieces):
        ln = _ld_fraction(w.breakpoints[k + 1] - w.breakpoints[k])
        piece_prefix.append(piece_prefix[-1] + ln * fv[k])
    out = np.empty(len(pts), dtype=np.longdouble)
    for i, x in enumerate(pts):
        k = min(bisect.bisect_right(w.breakpoints, x) - 1, w.npieces - 1)
        out[i] = piece_prefix[k] + _ld_fraction(x - w.breakpoints[k]) * fv[k]
    return out


def _pair_indices(n: int):
    return np.triu_indices(n, k=1)


def _pair_sup(pts, vals: np.ndarray, iu, ju) -> Tuple[np.longdouble, dict]:
    k = int(np.argmax(vals))
    return vals[k], {"interval": Interval(pts[int(iu[k])], pts[int(ju[k])])}


# ---------------------------------------------------------------------------
# Fujii-Wilson sweeps
#
# The backward maximal function of w 1_(a,b) on (a,b) never looks past b, so
# it equals the backward maximal function of w 1_(a,hi) there; symmetrically
# the forward one depends only on b.  One row envelope per left endpoint
# therefore scores every window (a, b_j) of that row, which makes the
# one-sided functionals exhaustively computable in O(n^2) float operations.
# The two-sided functional is trapped between the one-sided ones:
#
#     max(Fm, Fp) <= val <= Fm + Fp - 1
#
# (the upper bound because min(M-, M+) >= w almost everywhere), and only the
# few windows whose upper bound beats the one-sided maximum are merged and
# integrated individually.  Everything here runs on float64 snapshots of the
# exact data; a window's value is a deterministic function of the window
# alone, never of the rest of the grid, so refinement stays exactly monotone.
# Values carry ~1e-12 relative rounding, far inside every stated tolerance.

_FW_TABLE_MAX_N = 2100  # above this, pair tables would not fit; stream rows
_FW_SLACK = 1e-6  # dwarfs float rounding of bounds, still prunes near-ties


class _SweepAxis:
    """Float64 scaffold for one sweep direction over an aligned grid.

    Rows are left endpoints.  `row_segments(i)` builds the upper envelope of
    the backward averages on (pts[i], hi) as (lo, hi, v, c, q) pieces meaning
    x -> v + c/(x - q); `row_prefix` integrates it up to every grid point.
    Instantiated once forward and once on the reflected axis, which turns
    forward maximal functions into backward ones."""

    def __init__(self, bp, W, v, g, pts, pm, steps):
        self.bp = bp  # piece boundaries, len m+1
        self.W = W  # mass at piece boundaries
        self.v = v  # piece values
        self.g = g  # piece intercepts: W(x) = g[k] + v[k] x on piece k
        self.pts = pts
        self.ptsa = np.array(pts)
        self.pm = pm  # mass at grid points
        self.steps = steps
        self.n = len(pts)

    def row_segments(self, i: int) -> list:
        pts, bp, v, g = self.pts, self.bp, self.v, self.g
        a = pts[i]
        k0 = i // self.steps
        segs = [(a, bp[k0 + 1], v[k0], 0.0, a)]
        anchors_q = [a]
        anchors_w = [self.pm[i]]
        for k in range(k0 + 1, len(v)):
            anchors_q.append(bp[k])
            anchors_w.append(self.W[k])
            x0, x1 = bp[k], bp[k + 1]
            vk, gk = v[k], g[k]
            cs = [gk + vk * q - wq for q, wq in zip(anchors_q, anchors_w)]
            cs[-1] = 0.0  # the piece's own start sits on its line exactly
            lead, lead_val, lead_slp = len(cs) - 1, vk, 0.0
            for t in range(len(cs) - 1):
                dq = x0 - anchors_q[t]
                cv = vk + cs[t] / dq
                if cv > lead_val or (cv == lead_val and -cs[t] / (dq * dq) > lead_slp):
                    lead, lead_val, lead_slp = t, cv, -cs[t] / (dq * dq)
            t0 = x0
            guard = 0
            while True:
                guard += 1
                cl, ql = cs[lead], anchors_q[lead]
                if guard > len(cs) + 2:  # float ties; settle for the current lead
                    segs.append((t0, x1, vk, cl, ql))
                    break
                nxt_x = nxt_i = None
                for t in range(len(cs)):
                    ct = cs[t]
                    if t == lead or ct <= cl:
                        continue  # only a larger residue coefficient overtakes
                    xs = (ct * ql - cl * anchors_q[t]) / (ct - cl)
                    if t0 < xs < x1 and (nxt_x is None or xs < nxt_x):
                        nxt_x, nxt_i = xs, t
                if nxt_x is None:
                    segs.append((t0, x1, vk, cl, ql))
                    break
                segs.append((t0, nxt_x, vk, cl, ql))
                t0, lead = nxt_x, nxt_i
        return segs

    def row_prefix(self, i: int, segs: list) -> np.ndarray:
        """out[j] = integral of the row envelope over (pts[i], pts[j])."""
        ptsa, n = self.ptsa, self.n
        out = np.full(n, np.nan)
        acc = 0.0
        j = i + 1
        for lo, hi, v, c, q in segs:
            j1 = int(np.searchsorted(ptsa, hi, side="right"))
            if c == 0.0:
                if j1 > j:
                    out[j:j1] = (acc - v * lo) + v * ptsa[j:j1]
                acc += v * (hi - lo)
            else:
                base = acc - (v * lo + c * math.log(lo - q))
                if j1 > j:
                    x = ptsa[j:j1]
                    out[j:j1] = base + v * x + c * np.log(x - q)
                acc = base + v * hi + c * math.log(hi - q)
            j = max(j, j1)
        return out


def _fw_axes(w: StepWeight, pts, masses, steps) -> Tuple[_SweepAxis, _SweepAxis]:
    total = w.prefix_mass[-1]
    n = len(pts)
    fwd = _SweepAxis(
        [float(x) for x in w.breakpoints],
        [float(x) for x in w.prefix_mass],
        [float(x) for x in w.values],
        [float(w.prefix_mass[k] - w.values[k] * w.breakpoints[k]) for k in range(w.npieces)],
        [float(x) for x in pts],
        [float(x) for x in masses],
        steps,
    )
    ref = _SweepAxis(
        [float(-w.breakpoints[len(w.values) - k]) for k in range(w.npieces + 1)],
        [float(total - w.prefix_mass[len(w.values) - k]) for k in range(w.npieces + 1)],
        [float(v) for v in reversed(w.values)],
        [
            float((total - w.prefix_mass[k + 1]) + w.values[k] * w.breakpoints[k + 1])
            for k in reversed(range(w.npieces))
        ],
        [float(-pts[n - 1 - s]) for s in range(n)],
        [float(total - masses[n - 1 - s]) for s in range(n)],
        steps,
    )
    return fwd, ref


def _reflect_row_segments(segs: list) -> list:
    """Map reflected-axis envelope pieces back to the original axis."""
    return [(-hi, -lo, v, -c, -q) for lo, hi, v, c, q in reversed(segs)]


def _form_integral(v: float, c: float, q: float, u0: float, u1: float) -> float:
    if c == 0.0:
        return v * (u1 - u0)
    return v * (u1 - u0) + c * (math.log(abs(u1 - q)) - math.log(abs(u0 - q)))


def _merged_window_integral(fsegs: list, hsegs: list, a: float, b: float) -> float:
    """Integral over (a, b) of max(row envelope, mapped column envelope).

    Both envelopes carry the underlying piece value v on any common cell, so
    their difference has a single sign change per cell at most."""

    def ratpart(c, q, x):
        return 0.0 if c == 0.0 else c / (x - q)

    total = 0.0
    fi = hi = 0
    x0 = a
    while x0 < b:
        while fsegs[fi][1] <= x0:
            fi += 1
        while hsegs[hi][1] <= x0:
            hi += 1
        _, fhi, fv, fc, fq = fsegs[fi]
        _, hhi, hv, hc, hq = hsegs[hi]
        x1 = min(fhi, hhi, b)
        d0 = fv - hv + ratpart(fc, fq, x0) - ratpart(hc, hq, x0)
        d1 = fv - hv + ratpart(fc, fq, x1) - ratpart(hc, hq, x1)
        if d0 >= 0.0 and d1 >= 0.0:
            total += _form_integral(fv, fc, fq, x0, x1)
        elif d0 <= 0.0 and d1 <= 0.0:
            total += _form_integral(hv, hc, hq, x0, x1)
        else:
            root = (fc * hq - hc * fq) / (fc - hc) if fc != hc else x0
            if not x0 < root < x1:  # float noise; settle by the wider side
                win = (fv, fc, fq) if d0 + d1 >= 0.0 else (hv, hc, hq)
                total += _form_integral(*win, x0, x1)
            elif d0 > 0.0:
                total += _form_integral(fv, fc, fq, x0, root)
                total += _form_integral(hv, hc, hq, root, x1)
            else:
                total += _form_integral(hv, hc, hq, x0, root)
                total += _form_integral(fv, fc, fq, root, x1)
        x0 = x1
    return total


def _one_sided_max(axis: _SweepAxis) -> Tuple[float, Tuple[int, int]]:
    best, pair = -math.inf, (0, axis.n - 1)
    pma = np.array(axis.pm)
    for i in range(axis.n - 1):
        raw = axis.row_prefix(i, axis.row_segments(i))[i + 1 :]
        vals = raw / (pma[i + 1 :] - pma[i])
        k = int(np.argmax(vals))
        if vals[k] > best:
            best, pair = float(vals[k]), (i, i + 1 + k)
    return best, pair


def _fw_fast(w: StepWeight, grid: RefinementGrid, op: Op, kind: ConstantKind) -> ConstantReport:
    pts = grid.points
    n = len(pts)
    steps = 1 << grid.depth
    masses = [w.cummass(x) for x in pts]
    fwd, ref = _fw_axes(w, pts, masses, steps)
    pm = np.array(fwd.pm)

    if op is Op.MMINUS:
        fm_best, (i, j) = _one_sided_max(fwd)
        witness = {"interval": Interval(pts[i], pts[j])}
        return ConstantReport(kind, Real(np.longdouble(fm_best), None), True, grid.depth, witness)

    # two-sided: seed with both one-sided maxima, then visit bound-ordered pairs
    if n <= _FW_TABLE_MAX_N:
        Fm = np.full((n, n), np.nan)
        for i in range(n - 1):
            raw = fwd.row_prefix(i, fwd.row_segments(i))
            Fm[i, i + 1 :] = raw[i + 1 :] / (pm[i + 1 :] - pm[i])
        Fp = np.full((n, n), np.nan)
        for r in range(n - 1):
            raw = ref.row_prefix(r, ref.row_segments(r))
            j = n - 1 - r
            Fp[:j, j] = raw[r + 1 :][::-1] / (pm[j] - pm[:j])
        fi, fj = np.unravel_index(np.nanargmax(Fm), Fm.shape)
        pi, pj = np.unravel_index(np.nanargmax(Fp), Fp.shape)
        fm_pair, fp_pair = (int(fi), int(fj)), (int(pi), int(pj))
        seed = max(float(Fm[fm_pair]), float(Fp[fp_pair]))
        iu, ju = np.triu_indices(n, k=1)
        ub = Fm[iu, ju] + Fp[iu, ju] - 1.0
    else:
        # streamed variant: replace the per-column table by the global
        # forward profile, a weaker but O(n)-memory upper bound
        fm_best, fm_pair = _one_sided_max(fwd)
        fp_best, (rp_i, rp_j) = _one_sided_max(ref)
        fp_pair = (n - 1 - rp_j, n - 1 - rp_i)
        seed = max(fm_best, fp_best)
        hglob = ref.row_prefix(0, ref.row_segments(0))
        hglob[0] = 0.0
        hflip = hglob[::-1].copy()
        part_i, part_j, part_u = [], [], []
        for i in range(n - 1):
            raw = fwd.row_prefix(i, fwd.row_segments(i))[i + 1 :]
            dm = pm[i + 1 :] - pm[i]
            row_ub = raw / dm + (hflip[i] - hflip[i + 1 :]) / dm - 1.0
            keep = np.nonzero(row_ub * (1 + _FW_SLACK) > seed)[0]
            if keep.size:
                part_i.append(np.full(keep.size, i))
                part_j.append(i + 1 + keep)
                part_u.append(row_ub[keep])
        if part_u:
            iu = np.concatenate(part_i)
            ju = np.concatenate(part_j)
            ub = np.concatenate(part_u)
        else:
            iu = ju = ub = np.empty(0)

    fcache: dict = {}
    hcache: dict = {}

    def visit(i: int, j: int) -> float:
        if i not in fcache:
            fcache[i] = fwd.row_segments(i)
        if j not in hcache:
            hcache[j] = _reflect_row_segments(ref.row_segments(n - 1 - j))
        raw = _merged_window_integral(fcache[i], hcache[j], fwd.pts[i], fwd.pts[j])
        return raw / (fwd.pm[j] - fwd.pm[i])

    best, best_pair = -math.inf, fm_pair
    for pair in dict.fromkeys([fm_pair, fp_pair]):
        val = visit(*pair)
        if val > best:
            best, best_pair = val, pair

    if len(ub):
        kept = np.nonzero(ub * (1 + _FW_SLACK) > seed)[0]
        order = kept[np.argsort(-ub[kept], kind="stable")]
        for idx in order:
            if ub[idx] * (1 + _FW_SLACK) <= best:
                break
            i, j = int(iu[idx]), int(ju[idx])
            val = visit(i, j)
            if val > best:
                best, best_pair = val, (i, j)
    witness = {"interval": Interval(pts[best_pair[0]], pts[best_pair[1]])}
    return ConstantReport(kind, Real(np.longdouble(best), None), True, grid.depth, witness)


def _fw_sweep(w: StepWeight, grid: RefinementGrid, op: Op, kind: ConstantKind) -> ConstantReport:
    if all(v == w.values[0] for v in w.values):
        return ConstantReport(kind, Real.of(1), True, grid.depth, {"interval": w.support})
    if grid.base == w.breakpoints:
        return _fw_fast(w, grid, op, kind)
    return _fw_sweep_generic(w, grid, op, kind)


def _fw_sweep_generic(w: StepWeight, grid: RefinementGrid, op: Op, kind: ConstantKind) -> ConstantReport:
    """Fallback for grids not anchored at the weight's breakpoints: visit
    pairs in decreasing bound order, scoring each window from its own exact
    localized profile.  The bound combines the full-support antiderivative
    increment with (sup_J w)|J|/w(J); windows inside one piece score 1."""
    I = w.support
    pts = _grid_points(w, grid)
    n = len(pts)
    glob = maximal_profile(w, I, op)
    G = np.empty(n, dtype=np.longdouble)
    G[0] = 0
    for i in range(1, n):
        G[i] = G[i - 1] + integrate_profile(glob, Interval(pts[i - 1], pts[i])).value
    masses = [w.cummass(x) for x in pts]
    bp = w.breakpoints

    # jmax[i]: largest j such that (pts[i], pts[j]) stays inside one piece
    jmax = [0] * (n - 1)
    gsup = np.empty(n - 1)  # ess sup of w over each grid gap
    for i in range(n - 1):
        nb = bp[min(bisect.bisect_right(bp, pts[i]), len(bp) - 1)]
        jmax[i] = bisect.bisect_right(pts, nb) - 1
        k0 = min(bisect.bisect_right(bp, pts[i]) - 1, w.npieces - 1)
        k1 = min(bisect.bisect_left(bp, pts[i + 1]) - 1, w.npieces - 1)
        gsup[i] = max(float(v) for v in w.values[max(k0, 0) : k1 + 1])

    x64 = np.array([float(x) for x in pts])
    W64 = np.array([float(m) for m in masses])
    G64 = G.astype(np.float64)
    slack = 1 + 1e-9

    rows_i, rows_j, rows_b = [], [], []
    for i in range(n - 1):
        j0 = jmax[i] + 1
        if j0 >= n:
            continue
        dmass = W64[j0:] - W64[i]
        bg = (G64[j0:] - G64[i]) / dmass
        bm = np.maximum.accumulate(gsup[i:])[j0 - i - 1 :] * (x64[j0:] - x64[i]) / dmass
        b = np.minimum(bg, bm)
        keep = np.nonzero(b * slack > 1.0)[0]
        if keep.size:
            rows_i.append(np.full(keep.size, i))
            rows_j.append(j0 + keep)
            rows_b.append(b[keep])

    # any window inside one piece scores exactly 1, so that is the floor
    best = np.longdouble(1)
    best_pair: Tuple[int, int] = (0, n - 1)
    if rows_b:
        iu = np.concatenate(rows_i)
        ju = np.concatenate(rows_j)
        bound = np.concatenate(rows_b)
        order = np.argsort(-bound, kind="stable")
        for idx in order:
            if bound[idx] * slack <= best:
                break
            i, j = int(iu[idx]), int(ju[idx])
            J = Interval(pts[i], pts[j])
            prof = maximal_profile(w, J, op)
            val = integrate_profile(prof, J).value / _ld_fraction(masses[j] - masses[i])
            if val > best:
                best, best_pair = val, (i, j)
    witness = {"interval": Interval(pts[best_pair[0]], pts[best_pair[1]])}
    return ConstantReport(kind, Real(best, None), True, grid.depth, witness)


def fujii_wilson_constant(w: StepWeight, grid: RefinementGrid) -> ConstantReport:
    """(w)_{A_infty}: sup over windows J of (1/w(J)) * integral of M(w 1_J)."""
    return _fw_sweep(w, grid, Op.M, ConstantKind.FUJII_WILSON)


def fujii_wilson_plus_constant(w: StepWeight, grid: RefinementGrid) -> ConstantReport:
    """(w)_{A_infty+}: the one-sided variant, with M- in place of M."""
    return _fw_sweep(w, grid, Op.MMINUS, ConstantKind.FUJII_WILSON_PLUS)


# ---------------------------------------------------------------------------
# direct pair functionals


def khrushchev_constant(w: StepWeight, grid: RefinementGrid) -> ConstantReport:
    """sup over windows of (avg w) * exp(avg log(1/w))."""
    if all(v == w.values[0] for v in w.values):
        return ConstantReport(
            ConstantKind.KHRUSHCHEV, Real.of(1), True, grid.depth, {"interval": w.support}
        )
    pts = _grid_points(w, grid)
    xs = _ld_array(pts)
    Wf = _transform_prefix(w, pts, lambda v: v)
    Lf = _transform_prefix(w, pts, np.log)
    iu, ju = _pair_indices(len(pts))
    length = xs[ju] - xs[iu]
    vals = (Wf[ju] - Wf[iu]) / length * np.exp(-(Lf[ju] - Lf[iu]) / length)
    val, witness = _pair_sup(pts, vals, iu, ju)
    return ConstantReport(
        ConstantKind.KHRUSHCHEV, Real(val, None), True, grid.depth, witness
    )


def ap_constant(w: StepWeight, p, grid: RefinementGrid) -> ConstantReport:
    """[w]_{A_p}: sup over windows of (avg w) * (avg w^{-1/(p-1)})^{p-1}.

    Exact when p = 2 (the dual average is a rational); a longdouble sweep
    otherwise."""
    pf = np.longdouble(float(p))
    if not pf > 1:
        raise DomainError(f"Ap needs p > 1, got {p}")
    pts = _grid_points(w, grid)
    xs = _ld_array(pts)
    Wf = _transform_prefix(w, pts, lambda v: v)
    Sf = _transform_prefix(w, pts, lambda v: np.power(v, -1 / (pf - 1)))
    iu, ju = _pair_indices(len(pts))
    length = xs[ju] - xs[iu]
    vals = (Wf[ju] - Wf[iu]) / length * ((Sf[ju] - Sf[iu]) / length) ** (pf - 1)
    val, witness = _pair_sup(pts, vals, iu, ju)
    value = Real(val, None)
    if float(p) == 2.0:
        J = witness["interval"]
        value = Real.of(average(w, J)) * power_average(w, J, -1)
    return ConstantReport(ConstantKind.AP, value, True, grid.depth, witness)


def gurov_reshetnyak(w: StepWeight, grid: RefinementGrid) -> ConstantReport:
    """sup over windows J of (1/w(J)) * integral over J of |w - avg_J w|.

    Per-window values are exact rationals; a float sweep shortlists the
    near-maximal windows, which are then re-evaluated exactly."""
    pts = _grid_points(w, grid)
    n = len(pts)
    masses = [w.cummass(x) for x in pts]
    gap_vals = [w.value_at((a + b) / 2) for a, b in zip(pts, pts[1:])]
    gap_lens = [b - a for a, b in zip(pts, pts[1:])]
    xs64 = np.array([float(x) for x in pts])
    W64 = np.array([float(m) for m in masses])
    gv = np.array([float(v) for v in gap_vals])
    gl = np.array([float(v) for v in gap_lens])
    best = 0.0
    rows = []
    for i in range(n - 1):
        avg = (W64[i + 1 :] - W64[i]) / (xs64[i + 1 :] - xs64[i])
        # deviation integral of window (i, j): sum_{g=i}^{j-1} len_g |v_g - avg_ij|
        A = gl[i:, None] * np.abs(gv[i:, None] - avg[None, :])
        row = np.diagonal(np.cumsum(A, axis=0)) / (W64[i + 1 :] - W64[i])
        rows.append(row)
        best = max(best, float(row.max()))
    if best == 0.0:
        return ConstantReport(
            ConstantKind.GUROV_RESHETNYAK, Real.of(0), True, grid.depth,
            {"interval": w.support},
        )
    best_exact = Fraction(-1)
    best_pair = None
    for i, row in enumerate(rows):
        for off in np.nonzero(row >= best * (1 - 1e-9))[0]:
            j = i + 1 + int(off)
            mass = masses[j] - masses[i]
            c = mass / (pts[j] - pts[i])
            dev = sum(gap_lens[g] * abs(gap_vals[g] - c) for g in range(i, j))
            val = dev / mass
            if val > best_exact:
                best_exact, best_pair = val, (i, j)
    witness = {"interval": Interval(pts[best_pair[0]], pts[best_pair[1]])}
    return ConstantReport(
        ConstantKind.GUROV_RESHETNYAK, Real.of(best_exact), True, grid.depth, witness
    )
