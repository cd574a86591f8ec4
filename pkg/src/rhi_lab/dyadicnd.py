"""Exact n-dimensional dyadic model.

Everything here lives on the dyadic grid of a cube Q: the weight is a flat
array of per-cell rationals at depth L, subcubes are (level, multi-index)
pairs, and every average is a Fraction, so the maximal operator, the
stopping-time decomposition, the superlevel estimate and both reverse Hölder
forms evaluate with no rounding anywhere except an explicit r-th power.
"""

from __future__ import annotations

import json
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import chain
from math import lcm
from typing import List, Sequence, Tuple, Union

from .core import (
    ConstantKind,
    ConstantReport,
    Cube,
    DomainError,
    ParseError,
    Real,
    Verdict,
    _ld_fraction,
    as_fraction,
    format_rational,
    make_verdict,
)
from .rhi import TheoremId, sharp_constant

__all__ = [
    "DyadicWeight",
    "GridCube",
    "CzForest",
    "local_dyadic_maximal",
    "dyadic_fujii_wilson",
    "cz_decomposition",
    "verify_superlevel_lemma",
    "verify_dyadic_rhi",
    "flatness_check",
    "parse_dyadic_weight",
    "dyadic_weight_to_json",
]


# ---------------------------------------------------------------------------
# index arithmetic (row-major, last axis fastest)


def _coords(flat: int, n: int, m: int) -> Tuple[int, ...]:
    out = []
    for _ in range(n):
        out.append(flat % m)
        flat //= m
    return tuple(reversed(out))


def _flat(coords: Sequence[int], m: int) -> int:
    f = 0
    for c in coords:
        f = f * m + c
    return f


def _parent_flat(flat: int, n: int, m_child: int) -> int:
    return _flat([c >> 1 for c in _coords(flat, n, m_child)], m_child >> 1)


# The grids reuse a handful of shapes over and over (corpus sweeps draw
# thousands of weights at the same few (n, depth) pairs), so the index maps
# are worth caching as flat tuples.


@lru_cache(maxsize=None)
def _parent_map(n: int, m_child: int) -> Tuple[int, ...]:
    return tuple(_parent_flat(j, n, m_child) for j in range(m_child**n))


@lru_cache(maxsize=None)
def _child_map(n: int, m_parent: int) -> Tuple[Tuple[int, ...], ...]:
    return tuple(tuple(_children(p, n, m_parent)) for p in range(m_parent**n))


# ---------------------------------------------------------------------------
# types


@dataclass(frozen=True)
class DyadicWeight:
    """Positive cell weight on the dyadic grid of ``cube`` at ``depth``.

    ``cells`` holds 2^(n*depth) rationals in row-major multi-index order
    (last axis fastest)."""

    cube: Cube
    depth: int
    cells: tuple

    def __post_init__(self):
        if not isinstance(self.depth, int) or self.depth < 0:
            raise DomainError(f"depth must be a non-negative integer, got {self.depth}")
        cells = tuple(as_fraction(c) for c in self.cells)
        n = self.cube.dimension
        want = (1 << self.depth) ** n
        if len(cells) != want:
            raise DomainError(
                f"need {want} cells for dimension {n} at depth {self.depth}, got {len(cells)}"
            )
        if any(c <= 0 for c in cells):
            raise DomainError("cell values must be positive")
        object.__setattr__(self, "cells", cells)

    @property
    def dimension(self) -> int:
        return self.cube.dimension

    @property
    def ncells(self) -> int:
        return len(self.cells)

    @property
    def cell_volume(self) -> Fraction:
        return self.cube.volume / self.ncells

    def average(self) -> Fraction:
        return sum(self.cells) / self.ncells


@dataclass(frozen=True)
class GridCube:
    """A dyadic subcube: grid level (0 = the root cube) and its per-axis
    multi-index among the 2^level cubes of that level."""

    level: int
    index: Tuple[int, ...]

    def cell_ranges(self, depth: int) -> Tuple[range, ...]:
        span = 1 << (depth - self.level)
        return tuple(range(j * span, (j + 1) * span) for j in self.index)

    def geometry(self, root: Cube) -> Cube:
        side = root.side / (1 << self.level)
        lo = [iv.lo + j * side for iv, j in zip(root.intervals, self.index)]
        return Cube.of(lo, side)


@dataclass(frozen=True)
class CzForest:
    """Maximal dyadic cubes with average above the stopping level."""

    lam: Fraction
    cubes: Tuple[GridCube, ...]

    def covered_cells(self, dw: DyadicWeight) -> set:
        m = 1 << dw.depth
        out = set()
        for q in self.cubes:
            cells: List[Tuple[int, ...]] = [()]
            for rg in q.cell_ranges(dw.depth):
                cells = [c + (i,) for c in cells for i in rg]
            out.update(_flat(c, m) for c in cells)
        return out


# ---------------------------------------------------------------------------
# level sums


def _level_sums(dw: DyadicWeight) -> List[List[Fraction]]:
    """sums[l][j] = sum of the cells inside the level-l cube j."""
    n, L = dw.dimension, dw.depth
    sums = [None] * (L + 1)
    sums[L] = list(dw.cells)
    for lev in range(L - 1, -1, -1):
        m_child = 1 << (lev + 1)
        cur = [Fraction(0)] * ((1 << lev) ** n)
        for j, s in enumerate(sums[lev + 1]):
            cur[_parent_flat(j, n, m_child)] += s
        sums[lev] = cur
    return sums


def _avg(sums, n: int, L: int, level: int, j: int) -> Fraction:
    return sums[level][j] / (1 << (n * (L - level)))


def _children(j: int, n: int, m_parent: int) -> List[int]:
    base = _coords(j, n, m_parent)
    m_child = m_parent << 1
    kids = [()]
    for c in base:
        kids = [k + (2 * c + b,) for k in kids for b in (0, 1)]
    return [_flat(k, m_child) for k in kids]


# Integer core.  Clearing the common denominator turns every average into a
# shifted integer (value * den * 2^(n*L)), so the maximal chains, the best
# subcube and the level sweeps below run on machine ints and build Fractions
# only at the boundary.  The Fraction versions above stay as the reference
# implementations.


def _int_cells(cells: Sequence[Fraction]) -> Tuple[List[int], int]:
    """The cells times their common denominator, plus that denominator."""
    den = 1
    for c in cells:
        den = lcm(den, c.denominator)
    return [c.numerator * (den // c.denominator) for c in cells], den


def _int_level_sums(ints: Sequence[int], n: int, L: int) -> List[List[int]]:
    sums = [None] * (L + 1)
    sums[L] = list(ints)
    for lev in range(L - 1, -1, -1):
        pm = _parent_map(n, 1 << (lev + 1))
        cur = [0] * ((1 << lev) ** n)
        for j, s in enumerate(sums[lev + 1]):
            cur[pm[j]] += s
        sums[lev] = cur
    return sums


def _chainmax_ints(sums: Sequence[Sequence[int]], n: int, L: int) -> List[int]:
    """Per leaf, the largest ancestor-chain average, scaled by den * 2^(n*L)."""
    run = [sums[0][0]]
    for lev in range(1, L + 1):
        pm = _parent_map(n, 1 << lev)
        shift = n * lev
        nxt = [0] * len(sums[lev])
        for j, s in enumerate(sums[lev]):
            a = s << shift
            p = run[pm[j]]
            nxt[j] = a if a > p else p
        run = nxt
    return run


def _fw_scan(sums: Sequence[Sequence[int]], n: int, L: int) -> Tuple[Fraction, int, int]:
    """Best subcube of the local maximal-mass functional.

    Bottom-up merge: each cube keeps the sorted leaf chain maxima of its
    subtree, and raising the prefix below the cube's own average is the only
    update a parent needs, so the whole scan is one pass over the tree
    instead of one descent per subcube.  Returns (value, level, flat index)
    under the same first-strictly-better order as scanning levels root
    first; leaf cubes score exactly 1 and can never beat the root of a
    non-constant weight, so they are not materialized."""
    C = 1 << (n * L)
    arrs = [[v << (n * L)] for v in sums[L]]
    tots = [a[0] for a in arrs]
    cand = [None] * L
    for lev in range(L - 1, -1, -1):
        cm = _child_map(n, 1 << lev)
        shift = n * lev
        level_sums = sums[lev]
        new_arrs = [None] * len(level_sums)
        new_tots = [0] * len(level_sums)
        row = [None] * len(level_sums)
        for p, s in enumerate(level_sums):
            kids = cm[p]
            merged = sorted(chain.from_iterable(arrs[k] for k in kids))
            total = sum(tots[k] for k in kids)
            v = s << shift
            cut = bisect_left(merged, v)
            if cut:
                total += v * cut - sum(merged[:cut])
                merged[:cut] = [v] * cut
            new_arrs[p] = merged
            new_tots[p] = total
            row[p] = (total, C * s)
        arrs, tots = new_arrs, new_tots
        cand[lev] = row
    best_num, best_den = 0, 1
    where = (0, 0)
    for lev in range(L):
        for j, (num, den) in enumerate(cand[lev]):
            if num * best_den > best_num * den:
                best_num, best_den, where = num, den, (lev, j)
    return Fraction(best_num, best_den), where[0], where[1]


# ---------------------------------------------------------------------------
# operators


def local_dyadic_maximal(dw: DyadicWeight) -> DyadicWeight:
    """Cellwise values of the local dyadic maximal function: per leaf, the
    largest average over its ancestor chain (the leaf itself included)."""
    n, L = dw.dimension, dw.depth
    ints, den = _int_cells(dw.cells)
    run = _chainmax_ints(_int_level_sums(ints, n, L), n, L)
    scale = den << (n * L)
    return DyadicWeight(dw.cube, L, tuple(Fraction(v, scale) for v in run))


def _max_sum(sums, n: int, L: int, level: int, j: int, run: Fraction) -> Fraction:
    """Sum over the leaves of cube (level, j) of the running chain maximum."""
    a = _avg(sums, n, L, level, j)
    if a > run:
        run = a
    if level == L:
        return run
    return sum(_max_sum(sums, n, L, level + 1, c, run) for c in _children(j, n, 1 << level))


def dyadic_fujii_wilson(dw: DyadicWeight) -> ConstantReport:
    """Exact dyadic A_infty constant: the best subcube S of the functional
    (1/w(S)) * sum over S of M_S(w 1_S), cell volumes cancelling."""
    n, L = dw.dimension, dw.depth
    if all(c == dw.cells[0] for c in dw.cells):
        return ConstantReport(
            ConstantKind.DYADIC_FUJII_WILSON, Real.of(1), False, L, {"cube": dw.cube}
        )
    ints, den = _int_cells(dw.cells)
    best, lev, j = _fw_scan(_int_level_sums(ints, n, L), n, L)
    best_cube = GridCube(lev, _coords(j, n, 1 << lev))
    return ConstantReport(
        ConstantKind.DYADIC_FUJII_WILSON,
        Real.of(best),
        False,
        L,
        {"cube": best_cube.geometry(dw.cube), "level": best_cube.level},
    )


def cz_decomposition(dw: DyadicWeight, lam) -> CzForest:
    """Stopping-time forest: the maximal dyadic subcubes with average > lam."""
    lam = as_fraction(lam)
    if lam <= 0:
        raise DomainError(f"decomposition level must be positive, got {lam}")
    n, L = dw.dimension, dw.depth
    sums = _level_sums(dw)
    out: List[GridCube] = []

    def walk(level: int, j: int) -> None:
        if _avg(sums, n, L, level, j) > lam:
            out.append(GridCube(level, _coords(j, n, 1 << level)))
            return
        if level == L:
            return
        for c in _children(j, n, 1 << level):
            walk(level + 1, c)

    walk(0, 0)
    return CzForest(lam, tuple(out))


def flatness_check(dw: DyadicWeight) -> bool:
    """Constant-one criterion: the dyadic A_infty constant is 1 exactly iff
    the weight is constant."""
    return dyadic_fujii_wilson(dw).value.exact == 1


# ---------------------------------------------------------------------------
# verifiers


def _cn(n: int, delta: Fraction) -> Fraction:
    return delta + ((1 << n) - 1) * (delta - 1)


def _delta_exact(ints: Sequence[int], sums, n: int, L: int) -> Fraction:
    """The exact dyadic A_infty constant from prepared integer level sums."""
    if all(v == ints[0] for v in ints):
        return Fraction(1)
    return _fw_scan(sums, n, L)[0]


def verify_superlevel_lemma(dw: DyadicWeight, lam_list=None, tol=None) -> Verdict:
    """Superlevel estimate for the local dyadic maximal function: for each
    lambda in the list (default: every distinct cube average at or above
    lam0 = mean(M)/delta), checks

        sum over {M > lambda} of M * |cell|  <=  c_n(delta) * lambda * |{M > lambda}|

    exactly in rationals, with delta the exact dyadic A_infty constant and
    c_n(delta) = delta + (2^n - 1)(delta - 1).  The reported sides are the
    worst level's."""
    n, L = dw.dimension, dw.depth
    ints, den = _int_cells(dw.cells)
    sums = _int_level_sums(ints, n, L)
    delta = _delta_exact(ints, sums, n, L)
    cn = _cn(n, delta)
    vol = dw.cell_volume
    mscaled = _chainmax_ints(sums, n, L)  # M values times scale
    scale = den << (n * L)
    lam0s = Fraction(sum(mscaled), dw.ncells) / delta  # lam0 times scale

    if lam_list is None:
        # candidate levels: the distinct cube averages at or above lam0,
        # still in the scaled integers
        seen = set()
        for lev in range(L + 1):
            shift = n * lev
            for s in sums[lev]:
                a = s << shift
                if a * lam0s.denominator >= lam0s.numerator:
                    seen.add(a)
        levels = sorted(seen)
    else:
        given = sorted(as_fraction(x) for x in lam_list)
        if any(x <= 0 for x in given):
            raise DomainError("superlevel checks need positive levels")
        levels = [x * scale for x in given]

    keyed = sorted(mscaled)
    prefix = [0]
    for v in keyed:
        prefix.append(prefix[-1] + v)
    total = prefix[-1]

    worst = None  # (num, den, lam_s, sumsel, k); rhs = 0 forces lhs = 0, ratio 0
    for lam_s in levels:
        idx = bisect_right(keyed, lam_s)  # count of M-values at or below lam
        k = len(keyed) - idx
        sumsel = total - prefix[idx]
        num = sumsel * cn.denominator
        d = cn.numerator * lam_s * k
        if d == 0:
            num, d = 0, 1
        if worst is None or num * worst[1] > worst[0] * d:
            worst = (num, d, lam_s, sumsel, k)
    lam0 = lam0s / scale
    if worst is None:  # empty level list: nothing to check, trivially holds
        z = Real.of(0)
        return make_verdict(
            "dyadic.superlevel", {"delta": delta, "cn": cn, "lam0": lam0, "levels": 0}, z, z, True
        )
    _, _, lam_s, sumsel, k = worst
    lam = lam_s / scale if isinstance(lam_s, Fraction) else Fraction(lam_s, scale)
    lhs = Fraction(sumsel) / scale * vol
    rhs = cn * lam * (k * vol)
    params = {"delta": delta, "cn": cn, "lam0": lam0, "levels": len(levels)}
    return make_verdict(
        "dyadic.superlevel",
        params,
        Real.of(lhs),
        Real.of(rhs),
        True,
        tol=tol,
        witness={"lambda": lam},
        delta_source="exact dyadic FW",
    )


def _pow_ints(vals: Sequence[int], den: int, r: Fraction):
    """Mean of the r-th powers of vals/den: exact for integer r, longdouble
    otherwise (sequential sum, to stay bit-compatible across callers)."""
    count = len(vals)
    if r.denominator == 1:
        e = int(r)
        return Real.of(Fraction(sum(v**e for v in vals), den**e * count))
    dd = _ld_fraction(Fraction(den))
    rr = float(r)
    total = sum((_ld_fraction(Fraction(v)) / dd) ** rr for v in vals)
    return Real(total / count, None)


def _pow_cells(cells: Sequence[Fraction], r: Fraction):
    """Mean of the r-th powers: exact for integer r, longdouble otherwise."""
    ints, den = _int_cells(cells)
    return _pow_ints(ints, den, r)


def verify_dyadic_rhi(dw: DyadicWeight, r=None, which=TheoremId.T4_2, tol=None) -> Verdict:
    """Reverse Hölder check in the dyadic model.

    which = T4_2: mean of M^r against the delta^(1-r)-normalized constant
    times (mean of M)^r.  which = T1_1: the same with the raw weight on the
    left and the unnormalized constant.  delta is the exact dyadic A_infty
    constant; the only inexact step is a non-integer r-th power."""
    if r is None:
        raise DomainError("verify_dyadic_rhi needs the exponent r")
    r = as_fraction(r)
    which = TheoremId(which)
    if which not in (TheoremId.T4_2, TheoremId.T1_1):
        raise DomainError(f"which must be t4.2 or t1.1, got {which.value}")
    n, L = dw.dimension, dw.depth
    ints, den = _int_cells(dw.cells)
    sums = _int_level_sums(ints, n, L)
    delta = _delta_exact(ints, sums, n, L)
    const = sharp_constant(r, delta, which, n=n)
    if which is TheoremId.T4_2:
        vals, vden = _chainmax_ints(sums, n, L), den << (n * L)
    else:
        vals, vden = ints, den
    lhs = _pow_ints(vals, vden, r)
    mean = Fraction(sum(vals), vden * len(vals))
    if r.denominator == 1 and const.is_exact:
        rhs = Real.of(const.exact * mean ** int(r))
    else:
        rhs = Real(const.value * _ld_fraction(mean) ** float(r), None)
    params = {"r": r, "delta": delta, "n": n, "which": which.value}
    return make_verdict(
        which.value,
        params,
        lhs,
        rhs,
        True,
        tol=tol,
        delta_source="exact dyadic FW",
    )


# ---------------------------------------------------------------------------
# JSON weight files


def parse_dyadic_weight(data: Union[str, bytes, dict]) -> DyadicWeight:
    """Parse {"kind":"dyadic","dim":n,"depth":L,"cube":{"lo":[...],"side":s},
    "cells":[...]} with rationals as 'p/q' strings."""
    if not isinstance(data, dict):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}") from None
    if not isinstance(data, dict) or data.get("kind") != "dyadic":
        kind = data.get("kind") if isinstance(data, dict) else None
        raise ParseError(f"expected weight kind 'dyadic', got {kind!r}")
    try:
        n = int(data["dim"])
        depth = int(data["depth"])
        cube = Cube.of([as_fraction(a) for a in data["cube"]["lo"]], data["cube"]["side"])
        cells = tuple(as_fraction(c) for c in data["cells"])
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed dyadic weight: missing {exc}") from None
    if cube.dimension != n:
        raise ParseError(f"dim says {n} but cube has {cube.dimension} axes")
    try:
        return DyadicWeight(cube, depth, cells)
    except DomainError as exc:
        raise ParseError(str(exc)) from None


def dyadic_weight_to_json(dw: DyadicWeight) -> dict:
    return {
        "kind": "dyadic",
        "dim": dw.dimension,
        "depth": dw.depth,
        "cube": {
            "lo": [format_rational(a) for a in dw.cube.lo],
            "side": format_rational(dw.cube.side),
        },
        "cells": [format_rational(c) for c in dw.cells],
    }
