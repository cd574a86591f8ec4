"""Power-law extremizers and a sharpness search over step weights.

The family w(x) = x^(tau-1) on (0, 1) saturates the backward-maximal reverse
Holder inequality, and everything the verifiers want to know about it comes
in closed form: masses, M-, the iterated M-[2], power means.  This module
keeps those closed forms in one place, discretizes the family into step
weights, and runs a deterministic search for step weights that drive an
inequality's two sides together while keeping the relevant weight constant
under a prescribed budget.
"""

from __future__ import annotations

import hashlib
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .constants import a1_constant, a1_plus_constant
from .core import (
    DomainError,
    InternalConsistencyError,
    Interval,
    RangeError,
    Real,
    StepWeight,
    as_fraction,
    average,
    format_rational,
    power_average,
)
from .maximal1d import Op, eval_maximal, weak_lorentz_norm

_LD = np.longdouble


def _ldf(q: Fraction) -> np.longdouble:
    return _LD(q.numerator) / _LD(q.denominator)


# ---------------------------------------------------------------------------
# the closed-form family


@dataclass(frozen=True)
class PowerWeight:
    """w(x) = x^(tau-1) on (0, 1), 0 < tau < 1.

    Decreasing, integrable, and with backward-A1 constant exactly 1/tau: the
    best left window at any x is the full one, whose average x^(tau-1)/tau
    exceeds the weight by the fixed factor 1/tau."""

    tau: Fraction

    def __post_init__(self):
        tau = as_fraction(self.tau)
        if not 0 < tau < 1:
            raise DomainError(f"power weight needs 0 < tau < 1, got {format_rational(tau)}")
        object.__setattr__(self, "tau", tau)

    def mass(self, t) -> Real:
        """Integral over (0, t) for t in (0, 1]: t^tau / tau."""
        t = as_fraction(t)
        if not 0 < t <= 1:
            raise DomainError(f"mass wants t in (0, 1], got {format_rational(t)}")
        if t == 1:
            q = 1 / self.tau
            return Real(_ldf(q), q)
        return Real(np.power(_ldf(t), _ldf(self.tau)) / _ldf(self.tau), None)

    def mminus(self, x) -> Real:
        """Backward maximal function at x: the running average x^(tau-1)/tau."""
        x = as_fraction(x)
        if not 0 < x <= 1:
            raise DomainError(f"Mminus wants x in (0, 1], got {format_rational(x)}")
        if x == 1:
            q = 1 / self.tau
            return Real(_ldf(q), q)
        return Real(np.power(_ldf(x), _ldf(self.tau - 1)) / _ldf(self.tau), None)

    def mminus2(self, x) -> Real:
        """Iterated backward maximal function: averaging x^(tau-1)/tau from
        the left once more multiplies by another 1/tau."""
        x = as_fraction(x)
        if not 0 < x <= 1:
            raise DomainError(f"Mminus2 wants x in (0, 1], got {format_rational(x)}")
        if x == 1:
            q = 1 / self.tau ** 2
            return Real(_ldf(q), q)
        return Real(np.power(_ldf(x), _ldf(self.tau - 1)) / _ldf(self.tau) ** 2, None)

    def a1_plus(self) -> Real:
        q = 1 / self.tau
        return Real(_ldf(q), q)

    def avg_power(self, r) -> Real:
        """Integral over (0, 1) of (x^(tau-1)/tau)^r = tau^-r / ((tau-1)r + 1).

        Finite exactly when r < 1/(1-tau); beyond that the integral diverges
        and asking for it is a range error."""
        r = as_fraction(r)
        den = (self.tau - 1) * r + 1
        if den <= 0:
            bound = 1 / (1 - self.tau)
            raise RangeError(
                f"power mean diverges: need r < {format_rational(bound)}, got {format_rational(r)}"
            )
        if r.denominator == 1:
            q = self.tau ** (-r.numerator) / den
            return Real(_ldf(q), q)
        return Real(np.power(_ldf(self.tau), -_ldf(r)) / _ldf(den), None)


def power_oracle(tau, query: str, arg=None) -> Real:
    """Closed-form facts about the power weight x^(tau-1).

    query is one of "mass", "Mminus", "Mminus2", "A1plus", "avg_power"
    (case-insensitive, separators ignored); all but "A1plus" take the point
    or exponent in arg."""
    pw = PowerWeight(tau)
    key = query.replace("_", "").replace("-", "").lower()
    if key == "a1plus":
        return pw.a1_plus()
    if arg is None:
        raise DomainError(f"oracle query {query!r} needs an argument")
    if key == "mass":
        return pw.mass(arg)
    if key == "mminus":
        return pw.mminus(arg)
    if key == "mminus2":
        return pw.mminus2(arg)
    if key == "avgpower":
        return pw.avg_power(arg)
    raise DomainError(f"unknown oracle query {query!r}")


_VALUE_GRID = 1 << 40


def step_discretize(tau, m: int) -> StepWeight:
    """Cut (0, 1) into m equal cells, each carrying the cell average of
    x^(tau-1).

    The averages are irrational, so each is rounded to the nearest multiple
    of 2^-40; sharing one dyadic grid keeps prefix-sum denominators small.
    The L1 distance to the power weight is O(1/m) and the rounding adds at
    most 2^-41 per piece, but ratio-type functionals of the result need not
    converge to the continuum ones: cell averaging flattens the singularity
    at 0, and scale-invariant constants see the flattening at every m."""
    tau = as_fraction(tau)
    if not 0 < tau < 1:
        raise DomainError(f"step_discretize needs 0 < tau < 1, got {format_rational(tau)}")
    if not isinstance(m, int) or m < 1:
        raise DomainError(f"piece count must be a positive integer, got {m!r}")
    tld = _ldf(tau)
    scale = np.power(_LD(m), 1 - tld) / tld
    ks = np.arange(m, dtype=np.longdouble)
    # (k+1)^tau - k^tau via expm1 to dodge cancellation for large k
    diffs = np.empty(m, dtype=np.longdouble)
    diffs[0] = 1.0
    if m > 1:
        k = ks[1:]
        diffs[1:] = np.power(k, tld) * np.expm1(tld * np.log1p(1 / k))
    vals = scale * diffs
    grid = _LD(_VALUE_GRID)
    values = tuple(Fraction(int(np.rint(v * grid)), _VALUE_GRID) for v in vals)
    breakpoints = tuple(Fraction(k, m) for k in range(m + 1))
    return StepWeight(breakpoints, values)


# ---------------------------------------------------------------------------
# sharpness search


_VARIANTS = {
    "t3.1.first": "strong form against the backward maximal at the right endpoint",
    "bsw": "two-sided strong form normalized by the plain average",
    "t1.3": "weak-type endpoint norm against the average",
}


@dataclass(frozen=True)
class SearchConfig:
    """Knobs for sharpness_search.  budget counts objective evaluations per
    restart, split across the two phases; everything downstream is a pure
    function of the config, so equal configs give equal traces.

    pieces = None picks a count that grows like 1/(1 - r/bound): the closer
    r sits to the admissible endpoint, the deeper into the singularity a
    witness must reach, and a fixed piece count caps the achievable ratio
    well below 1."""

    variant: str = "t3.1.first"
    delta: Fraction = Fraction(2)
    r: Fraction = Fraction(3, 2)
    pieces: Optional[int] = None
    budget: int = 400
    seed: int = 0
    restarts: int = 3
    tol: float = 1e-9


@dataclass(frozen=True)
class SearchResult:
    best_ratio: float
    witness: StepWeight
    witness_constant: Fraction  # exact constant of the witness (<= the budget)
    iterations: int
    trace: tuple  # ((phase, eval index, ratio) at every improvement)
    trace_hash: str

    def to_json_dict(self) -> dict:
        return {
            "bestRatio": self.best_ratio,
            "witnessWeight": {
                "kind": "step",
                "breakpoints": [format_rational(b) for b in self.witness.breakpoints],
                "values": [format_rational(v) for v in self.witness.values],
            },
            "witnessConstant": format_rational(self.witness_constant),
            "iterations": self.iterations,
            "trace": [[p, i, float(t)] for p, i, t in self.trace],
            "traceHash": self.trace_hash,
        }


def _ceil_rel(q: Fraction, bits: int = 60) -> Fraction:
    """Round up to ~bits significant binary digits (feasible direction)."""
    if q <= 0:
        raise InternalConsistencyError("constraint floor should be positive")
    s = bits - (q.numerator.bit_length() - q.denominator.bit_length())
    if s >= 0:
        return Fraction(-((-q.numerator << s) // q.denominator), 1 << s)
    return Fraction(-((-q.numerator) // (q.denominator << -s)) << -s)


def _fast_constant(w: StepWeight) -> Optional[Fraction]:
    """Exact A1-type constant for non-increasing step weights, or None.

    When the values never increase, the running average from the left edge
    dominates every other window average, so the backward and the two-sided
    maximal functions coincide with it; the per-cell sup of average/value
    then sits at the cell's left boundary, leaving a max over the interior
    breakpoints.  All the search's candidates live in this cone, which turns
    each feasibility check into m exact divisions instead of a hull build."""
    vals = w.values
    for a, b in zip(vals, vals[1:]):
        if b > a:
            return None
    best = Fraction(1)
    mass = Fraction(0)
    lo = w.breakpoints[0]
    for k in range(w.npieces - 1):
        mass += vals[k] * (w.breakpoints[k + 1] - w.breakpoints[k])
        q = mass / ((w.breakpoints[k + 1] - lo) * vals[k + 1])
        if q > best:
            best = q
    return best


def _with_fast_path(official: Callable[[StepWeight], Fraction]) -> Callable[[StepWeight], Fraction]:
    def const(w: StepWeight) -> Fraction:
        fast = _fast_constant(w)
        return fast if fast is not None else official(w)

    return const


def _binding_weight(bps: Sequence[Fraction], delta: Fraction) -> StepWeight:
    """Weight on the given breakpoints of (0, 1) whose running average over
    (0, b_k) is delta times the next piece value at every boundary.

    For a decreasing weight the best maximal window at any point is the one
    anchored at 0, so this floor pins both the one- and two-sided constants
    to exactly delta; among all feasible value vectors on fixed breakpoints
    it is the unique extreme point, which is where a convex objective peaks."""
    vals = [Fraction(1)]
    mass = bps[1] - bps[0]
    for k in range(1, len(bps) - 1):
        v = _ceil_rel(mass / (delta * bps[k]))
        vals.append(v)
        mass += v * (bps[k + 1] - bps[k])
    return StepWeight(tuple(bps), tuple(vals))


def _theta_breakpoints(theta: np.ndarray) -> Optional[tuple]:
    """Cell widths exp(theta) normalized to partition (0, 1); None when the
    floats collapse two boundaries."""
    u = np.exp(theta - np.max(theta))
    c = np.cumsum(u)
    c /= c[-1]
    bps = [Fraction(0)]
    for x in c[:-1]:
        f = Fraction(float(x))
        if f <= bps[-1] or f >= 1:
            return None
        bps.append(f)
    bps.append(Fraction(1))
    return tuple(bps)


def _graded_theta(m: int, span: float, grade: float) -> np.ndarray:
    """Log cell widths of a grid reaching down to x0 = exp(-span), with the
    log-width of the cells growing like exp(grade * depth); grade = 0 is the
    plain geometric grid.  The innermost cell is (0, x0)."""
    if m == 1:
        return np.zeros(1)
    depths = np.linspace(0, 1, m - 1)
    h = np.exp(grade * depths)
    h *= span / h.sum()
    lows = np.exp(-np.cumsum(h))  # b_{m-1} > ... > b_1 = x0
    gaps = np.empty(m)
    prev = 1.0
    for i, b in enumerate(lows):
        gaps[m - 1 - i] = prev - b
        prev = b
    gaps[0] = lows[-1]
    return np.log(gaps)


def _make_objective(variant: str, delta: Fraction, r: Fraction):
    """(ratio, constant) closures for one variant; ratio is lhs/rhs of the
    inequality with the constant evaluated at the configured delta."""
    dl = float(delta)
    if variant == "t1.3":
        rw = delta / (delta - 1)

        def ratio(w: StepWeight) -> float:
            I = w.support
            return float(weak_lorentz_norm(w, I, rw).value) / float(average(w, I))

        return ratio, lambda w: a1_constant(w).value.exact

    rf = float(r)
    if rf == 1.0:
        cfac = 1.0
    else:
        rp = rf / (rf - 1.0)
        cfac = dl ** (1.0 - rf) * (rp - 1.0) / (rp - dl)

    if variant == "bsw":

        def ratio(w: StepWeight) -> float:
            I = w.support
            lhs = float(power_average(w, I, r).value)
            return lhs / (cfac * float(average(w, I)) ** rf)

        return ratio, lambda w: a1_constant(w).value.exact

    def ratio(w: StepWeight) -> float:
        I = w.support
        lhs = float(power_average(w, I, r).value) * float(I.length)
        mb = float(eval_maximal(w, I, Op.MMINUS, I.hi))
        return lhs / (cfac * mb ** (rf - 1.0) * float(w.total_mass))

    return ratio, lambda w: a1_plus_constant(w).value.exact


class _Tracker:
    """Best-so-far bookkeeping shared by both phases of one restart."""

    def __init__(self):
        self.best = -math.inf
        self.witness: Optional[StepWeight] = None
        self.trace: List[Tuple[int, int, float]] = []
        self.evals = 0

    def offer(self, phase: int, ratio: float, w: StepWeight) -> bool:
        self.evals += 1
        if ratio > self.best + 1e-15:
            self.best = ratio
            self.witness = w
            self.trace.append((phase, self.evals, ratio))
            return True
        return False


def _shrink_project(w: StepWeight, const_fn, cap: Fraction, iters: int = 18) -> StepWeight:
    """Pull w toward the constant weight of equal mean until its constant
    fits under cap: bisection on s in w_s = (1-s) w + s wbar.  The constant
    is 1 at s = 1 and varies continuously, so a feasible blend exists even
    though monotonicity in s is only typical, not guaranteed."""
    if const_fn(w) <= cap:
        return w
    mean = average(w, w.support)

    def blend(s: Fraction) -> StepWeight:
        return StepWeight(w.breakpoints, tuple(v + s * (mean - v) for v in w.values))

    bad, good = Fraction(0), Fraction(1)
    for _ in range(iters):
        mid = (bad + good) / 2
        if const_fn(blend(mid)) <= cap:
            good = mid
        else:
            bad = mid
    return blend(good)


def _search_values(cfg, tracker, ratio_fn, const_fn, w0: StepWeight, rng, budget: int) -> None:
    """Coordinate ascent on piece values; multiplicative moves clamped to
    the non-increasing cone (where the extremal profiles live and constants
    are cheap), with moves that overshoot the constraint projected back by
    shrinkage."""
    w = w0
    tracker.offer(0, ratio_fn(w), w)
    start = tracker.evals
    step = 0.35
    m = w.npieces
    while tracker.evals - start < budget and step > 1e-4:
        improved = False
        for k in rng.permutation(m):
            for sgn in (1, -1):
                if tracker.evals - start >= budget:
                    return
                factor = Fraction(int(round(math.exp(sgn * step) * (1 << 24))), 1 << 24)
                vals = list(w.values)
                nv = vals[k] * factor
                if sgn > 0 and k > 0 and nv > vals[k - 1]:
                    nv = vals[k - 1]
                elif sgn < 0 and k + 1 < m and nv < vals[k + 1]:
                    nv = vals[k + 1]
                if nv == vals[k]:
                    continue
                vals[k] = nv
                cand = _shrink_project(StepWeight(w.breakpoints, tuple(vals)), const_fn, cfg.delta)
                if tracker.offer(0, ratio_fn(cand), cand):
                    w = cand
                    improved = True
                    break
        if not improved:
            step /= 2


def _search_breakpoints(cfg, tracker, ratio_fn, const_fn, theta0: np.ndarray, rng, budget: int) -> None:
    """Coordinate ascent on log cell widths, values riding the constraint
    floor.  The floor only guarantees feasibility for decreasing weights, so
    each candidate is still checked exactly before it can score."""

    def build(theta: np.ndarray) -> Optional[StepWeight]:
        bps = _theta_breakpoints(theta)
        if bps is None:
            return None
        w = _binding_weight(bps, cfg.delta)
        if const_fn(w) > cfg.delta:
            return None
        return w

    theta = theta0.copy()
    w = build(theta)
    if w is None:
        return
    tracker.offer(1, ratio_fn(w), w)
    start = tracker.evals
    step = 0.6
    m = len(theta)
    while tracker.evals - start < budget and step > 1e-3:
        improved = False
        for k in rng.permutation(m):
            for sgn in (1, -1):
                if tracker.evals - start >= budget:
                    return
                cand_theta = theta.copy()
                cand_theta[k] += sgn * step
                cand = build(cand_theta)
                if cand is None:
                    tracker.evals += 1
                    continue
                if tracker.offer(1, ratio_fn(cand), cand):
                    theta = cand_theta
                    improved = True
                    break
        if not improved:
            step /= 2


def _seed_theta(cfg, ratio_fn, const_fn) -> np.ndarray:
    """Scan a small family of graded grids and keep the best feasible
    binding weight.  The truncation depth trades singularity coverage
    against per-cell flatness, and grading the cells (finer near 1, coarser
    deep down, where less of the objective lives) beats a plain geometric
    grid, so both knobs are scanned."""
    best, best_theta = -math.inf, None
    for span in (4.0, 6.0, 9.0, 13.0, 18.0, 24.0, 31.0, 39.0, 48.0):
        for grade in (0.0, 1.0, 1.5, 2.0, 2.5):
            theta = _graded_theta(cfg.pieces, span, grade)
            bps = _theta_breakpoints(theta)
            if bps is None:
                continue
            w = _binding_weight(bps, cfg.delta)
            val = ratio_fn(w)
            if val > best and const_fn(w) <= cfg.delta:
                best, best_theta = val, theta
    if best_theta is None:
        raise InternalConsistencyError("no feasible graded seed")
    return best_theta


def _run_restart(cfg, ratio_fn, const_fn, theta_seed: np.ndarray, restart: int) -> _Tracker:
    rng = np.random.default_rng((cfg.seed, restart))
    tracker = _Tracker()
    bp_budget = max(1, 3 * cfg.budget // 5)
    theta = theta_seed if restart == 0 else theta_seed + rng.normal(0, 0.4, len(theta_seed))
    _search_breakpoints(cfg, tracker, ratio_fn, const_fn, theta, rng, bp_budget)
    val_budget = cfg.budget - min(tracker.evals, bp_budget)
    if tracker.witness is not None and val_budget > 0:
        w = tracker.witness
        if restart > 0:
            vals = [
                v * Fraction(int(round(math.exp(x) * (1 << 24))), 1 << 24)
                for v, x in zip(w.values, rng.normal(0, 0.1, w.npieces))
            ]
            for i in range(len(vals) - 2, -1, -1):
                if vals[i] < vals[i + 1]:
                    vals[i] = vals[i + 1]
            w = _shrink_project(StepWeight(w.breakpoints, tuple(vals)), const_fn, cfg.delta)
        _search_values(cfg, tracker, ratio_fn, const_fn, w, rng, val_budget)
    return tracker


def sharpness_search(cfg: SearchConfig) -> SearchResult:
    """Look for an m-piece step weight with constant at most cfg.delta whose
    lhs/rhs ratio under the chosen variant comes close to 1.

    Each restart runs two deterministic coordinate-ascent phases: one over
    cell boundaries with the values pinned to the constraint floor, one over
    free values.  Restarts execute in a thread pool (RHI_LAB_THREADS caps
    the width) and the winner is chosen by (ratio, restart index), so the
    outcome is independent of scheduling.  Every candidate that scores has
    its constant checked exactly against cfg.delta; since the inequality
    holds for any such weight, the reported ratio can only exceed 1 by
    floating-point noise, and more than cfg.tol of it is an internal error."""
    variant = cfg.variant.lower()
    if variant not in _VARIANTS:
        known = ", ".join(sorted(_VARIANTS))
        raise DomainError(f"unknown variant {cfg.variant!r}; expected one of {known}")
    delta = as_fraction(cfg.delta)
    r = as_fraction(cfg.r)
    if delta < 1:
        raise DomainError(f"delta must be >= 1, got {format_rational(delta)}")
    if cfg.pieces is not None and cfg.pieces < 1:
        raise DomainError(f"pieces must be >= 1, got {cfg.pieces}")
    if cfg.budget < 1 or cfg.restarts < 1:
        raise DomainError("budget and restarts must be positive")
    if variant != "t1.3" and delta > 1:
        if not 1 <= r:
            raise RangeError(f"r must be >= 1, got {format_rational(r)}")
        bound = delta / (delta - 1)
        if r >= bound:
            raise RangeError(
                f"r = {format_rational(r)} outside the admissible range "
                f"[1, {format_rational(bound)}) for delta = {format_rational(delta)}"
            )
    pieces = cfg.pieces if cfg.pieces is not None else _auto_pieces(variant, delta, r)
    cfg = SearchConfig(variant, delta, r, pieces, cfg.budget, cfg.seed, cfg.restarts, cfg.tol)
    if delta == 1:
        # only constant weights qualify, and they give plain equality
        w = StepWeight((Fraction(0), Fraction(1)), (Fraction(1),))
        return _finish(cfg, 1.0, w, Fraction(1), 1, ((0, 1, 1.0),))
    ratio_fn, const_fn = _make_objective(variant, delta, r)
    fast_const = _with_fast_path(const_fn)
    theta_seed = _seed_theta(cfg, ratio_fn, fast_const)

    workers = int(os.environ.get("RHI_LAB_THREADS", "0")) or min(cfg.restarts, os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        trackers = list(
            pool.map(lambda j: _run_restart(cfg, ratio_fn, fast_const, theta_seed, j), range(cfg.restarts))
        )
    iterations = sum(t.evals for t in trackers)
    winner = max(range(cfg.restarts), key=lambda j: (trackers[j].best, -j))
    t = trackers[winner]
    if t.witness is None:
        raise InternalConsistencyError("search finished without a feasible candidate")
    # the winner's constant is recomputed by the full engine, not the
    # monotone shortcut, so a shortcut bug cannot smuggle in a bad witness
    return _finish(cfg, t.best, t.witness, const_fn(t.witness), iterations, tuple(t.trace))


def _auto_pieces(variant: str, delta: Fraction, r: Fraction) -> int:
    """Piece count for configs that do not fix one.  The objective's mass
    spreads over log x like exp(-(1 - r/bound) depth), so the resolution a
    witness needs grows like the reciprocal of that exponent."""
    if variant == "t1.3" or delta == 1:
        return 128
    eps = 1 - r * (delta - 1) / delta
    return min(1024, max(64, math.ceil(64 / float(eps))))


def _finish(
    cfg: SearchConfig,
    best: float,
    witness: StepWeight,
    witness_constant: Fraction,
    iterations: int,
    trace,
) -> SearchResult:
    if best > 1 + cfg.tol:
        raise InternalConsistencyError(
            f"sharpness ratio {best} exceeds 1 + {cfg.tol}: constraint or formula broken"
        )
    if witness_constant > cfg.delta:
        raise InternalConsistencyError(
            f"witness constant {format_rational(witness_constant)} exceeds the budget "
            f"{format_rational(cfg.delta)}"
        )
    digest = hashlib.sha256()
    for p, i, ratio in trace:
        digest.update(f"{p}:{i}:{ratio:.17g};".encode())
    digest.update(",".join(format_rational(b) for b in witness.breakpoints).encode())
    digest.update(",".join(format_rational(v) for v in witness.values).encode())
    return SearchResult(best, witness, witness_constant, iterations, trace, digest.hexdigest())
