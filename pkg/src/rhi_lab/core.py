"""Exact scalar arithmetic, interval geometry, and the weight data model.

Everything downstream (maximal operators, weight constants, inequality
verdicts) is built on the types in this module.  Rationals are
``fractions.Fraction`` (arbitrary precision, lowest terms); the inexact path
goes through ``numpy.longdouble`` (64-bit significand on x86-64) and is always
marked as approximate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Any, Iterable, Iterator, Optional, Sequence, Union

import numpy as np

__all__ = [
    "ParseError",
    "DomainError",
    "RangeError",
    "InternalConsistencyError",
    "tolerance",
    "set_tolerance",
    "Real",
    "Interval",
    "StepWeight",
    "Cube",
    "Verdict",
    "make_verdict",
    "ConstantKind",
    "ConstantReport",
    "average",
    "power_average",
    "restrict",
    "as_fraction",
    "parse_rational",
    "format_rational",
    "parse_step_weight",
    "step_weight_to_json",
    "canonical_json",
]


class ParseError(ValueError):
    """Malformed input text or JSON."""


class DomainError(ValueError):
    """Arguments outside an operation's domain (bad interval, tau, depth...)."""


class RangeError(ValueError):
    """Exponent r outside the admissible range of a theorem."""


class InternalConsistencyError(RuntimeError):
    """An invariant the engine itself guarantees was violated; always a bug."""


# ---------------------------------------------------------------------------
# tolerance policy: one global knob, relative, default 1e-9


_TOLERANCE = 1e-9


def tolerance() -> float:
    return _TOLERANCE


def set_tolerance(tol: float) -> None:
    global _TOLERANCE
    if not (0 <= tol < 1):
        raise DomainError(f"relative tolerance must be in [0, 1), got {tol}")
    _TOLERANCE = float(tol)


# ---------------------------------------------------------------------------
# rationals

RationalLike = Union[int, Fraction, str]


def as_fraction(x: Any) -> Fraction:
    """Coerce ints, Fractions and rational strings to Fraction.

    Floats are rejected on purpose: every exact quantity in the engine must
    arrive as a rational, and silent binary conversion is how subtle
    non-exactness sneaks in.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return parse_rational(x)
    if isinstance(x, float):
        raise ParseError(f"expected a rational (int, Fraction or 'p/q' string), got float {x!r}")
    raise ParseError(f"expected a rational, got {type(x).__name__}: {x!r}")


def parse_rational(s: str) -> Fraction:
    """Parse 'p/q' or integer strings ('3', '-1/2')."""
    if not isinstance(s, str):
        raise ParseError(f"expected a rational string, got {type(s).__name__}")
    t = s.strip()
    try:
        if "/" in t:
            num, den = t.split("/")
            return Fraction(int(num), int(den))
        return Fraction(int(t))
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"not a rational 'p/q' or integer string: {s!r}") from exc


def format_rational(q: Fraction) -> str:
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


# ---------------------------------------------------------------------------
# Real: longdouble value, optionally exact-promoted from a rational

_LD = np.longdouble


def _ld_int(n: int) -> np.longdouble:
    if -(1 << 62) < n < (1 << 62):
        return _LD(n)
    neg = n < 0
    m = -n if neg else n
    shift = m.bit_length() - 64
    top = m >> shift
    if (m - (top << shift)) * 2 >= (1 << shift):
        top += 1
    out = np.ldexp(_LD(top), shift)
    return -out if neg else out


def _ld_fraction(q: Fraction) -> np.longdouble:
    n, d = q.numerator, q.denominator
    if d == 1:
        return _ld_int(n)
    if -(1 << 62) < n < (1 << 62) and d < (1 << 62):
        return _LD(n) / _LD(d)
    # scale so the integer quotient carries ~80 significant bits
    s = 80 - (n.bit_length() - d.bit_length())
    if s >= 0:
        m = (abs(n) << s) // d
    else:
        m = abs(n) // (d << -s)
    val = np.ldexp(_ld_int(m), -s)
    return -val if n < 0 else val


def _to_ld(x: Any) -> np.longdouble:
    if isinstance(x, Fraction):
        return _ld_fraction(x)
    if isinstance(x, Real):
        return x.value
    return _LD(x)


@dataclass(frozen=True)
class Real:
    """A floating value (numpy.longdouble) that remembers whether it is the
    exact promotion of a rational."""

    value: Any
    exact: Optional[Fraction] = None

    @staticmethod
    def of(x: Any) -> "Real":
        if isinstance(x, Real):
            return x
        if isinstance(x, (int, Fraction)):
            q = Fraction(x)
            return Real(_ld_fraction(q), q)
        return Real(_LD(x), None)

    @staticmethod
    def approx(x: Any) -> "Real":
        return Real(_LD(x), None)

    @property
    def is_exact(self) -> bool:
        return self.exact is not None

    def drop_exact(self) -> "Real":
        return Real(self.value, None)

    def __float__(self) -> float:
        return float(self.value)

    def _binary(self, other: Any, frac_op, ld_op) -> "Real":
        o = Real.of(other)
        if self.exact is not None and o.exact is not None:
            try:
                q = frac_op(self.exact, o.exact)
                return Real(_ld_fraction(q), q)
            except ZeroDivisionError:
                raise DomainError("division by an exact zero") from None
        return Real(ld_op(self.value, o.value), None)

    def __add__(self, other):
        return self._binary(other, lambda a, b: a + b, lambda a, b: a + b)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, lambda a, b: a - b, lambda a, b: a - b)

    def __rsub__(self, other):
        return Real.of(other).__sub__(self)

    def __mul__(self, other):
        return self._binary(other, lambda a, b: a * b, lambda a, b: a * b)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binary(other, lambda a, b: a / b, lambda a, b: a / b)

    def __rtruediv__(self, other):
        return Real.of(other).__truediv__(self)

    def __neg__(self):
        return Real(-self.value, None if self.exact is None else -self.exact)

    def __pow__(self, other):
        o = Real.of(other)
        if (
            self.exact is not None
            and o.exact is not None
            and o.exact.denominator == 1
            and self.exact != 0
        ):
            q = self.exact ** o.exact.numerator
            return Real(_ld_fraction(q), q)
        return Real(np.power(self.value, o.value), None)

    def _cmp_key(self, other):
        o = Real.of(other)
        if self.exact is not None and o.exact is not None:
            return self.exact, o.exact
        return self.value, o.value

    def __le__(self, other):
        a, b = self._cmp_key(other)
        return a <= b

    def __lt__(self, other):
        a, b = self._cmp_key(other)
        return a < b

    def __ge__(self, other):
        a, b = self._cmp_key(other)
        return a >= b

    def __gt__(self, other):
        a, b = self._cmp_key(other)
        return a > b

    def __repr__(self):
        if self.exact is not None:
            return f"Real({format_rational(self.exact)})"
        return f"Real(~{format_real(self)})"


def format_real(r: Real) -> str:
    """Full-precision string: 'p/q' when exact, shortest-unique decimal else."""
    if r.exact is not None:
        return format_rational(r.exact)
    v = r.value
    if np.isinf(v):
        return "inf" if v > 0 else "-inf"
    if np.isnan(v):
        return "nan"
    return np.format_float_positional(v, unique=True, trim="0")


REAL_INF = Real(_LD(np.inf), None)


# ---------------------------------------------------------------------------
# geometry


@dataclass(frozen=True, order=True)
class Interval:
    """Open bounded interval (lo, hi), lo < hi, rational endpoints."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        object.__setattr__(self, "lo", as_fraction(self.lo))
        object.__setattr__(self, "hi", as_fraction(self.hi))
        if not self.lo < self.hi:
            raise DomainError(f"interval needs lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def length(self) -> Fraction:
        return self.hi - self.lo

    def contains_point(self, x: Fraction, closed: bool = False) -> bool:
        if closed:
            return self.lo <= x <= self.hi
        return self.lo < x < self.hi

    def contains(self, other: "Interval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def intersect(self, other: "Interval") -> Optional["Interval"]:
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        if lo < hi:
            return Interval(lo, hi)
        return None

    def midpoint(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def __str__(self):
        return f"({format_rational(self.lo)}, {format_rational(self.hi)})"


@dataclass(frozen=True)
class Cube:
    """Axis-parallel cube: per-axis intervals of equal length."""

    intervals: tuple

    def __post_init__(self):
        ivs = tuple(self.intervals)
        if not ivs:
            raise DomainError("cube needs dimension >= 1")
        side = ivs[0].length
        for iv in ivs[1:]:
            if iv.length != side:
                raise DomainError("cube sides must be equal across axes")
        object.__setattr__(self, "intervals", ivs)

    @staticmethod
    def of(lo: Sequence, side) -> "Cube":
        s = as_fraction(side)
        return Cube(tuple(Interval(as_fraction(a), as_fraction(a) + s) for a in lo))

    @property
    def dimension(self) -> int:
        return len(self.intervals)

    @property
    def side(self) -> Fraction:
        return self.intervals[0].length

    @property
    def lo(self) -> tuple:
        return tuple(iv.lo for iv in self.intervals)

    @property
    def volume(self) -> Fraction:
        return self.side ** self.dimension

    def __str__(self):
        los = ",".join(format_rational(a) for a in self.lo)
        return f"Cube(lo=[{los}], side={format_rational(self.side)})"


# ---------------------------------------------------------------------------
# step weights


@dataclass(frozen=True)
class StepWeight:
    """Positive piecewise-constant weight: value ``values[k]`` on the open
    piece (breakpoints[k], breakpoints[k+1]).  Values at the breakpoints
    themselves are never read (a.e. semantics)."""

    breakpoints: tuple
    values: tuple

    def __post_init__(self):
        bps = tuple(as_fraction(b) for b in self.breakpoints)
        vals = tuple(as_fraction(v) for v in self.values)
        if len(bps) < 2 or len(vals) != len(bps) - 1:
            raise DomainError(
                f"need m+1 breakpoints for m >= 1 values, got {len(bps)} and {len(vals)}"
            )
        for i in range(len(bps) - 1):
            if not bps[i] < bps[i + 1]:
                raise DomainError(
                    f"breakpoints must be strictly increasing: "
                    f"{format_rational(bps[i + 1])} after {format_rational(bps[i])} at index {i + 1}"
                )
        for i, v in enumerate(vals):
            if not v > 0:
                raise DomainError(f"weight values must be positive, got {format_rational(v)} at index {i}")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "values", vals)

    @property
    def npieces(self) -> int:
        return len(self.values)

    @property
    def support(self) -> Interval:
        return Interval(self.breakpoints[0], self.breakpoints[-1])

    @cached_property
    def prefix_mass(self) -> tuple:
        """W_0 = 0, W_j = integral of w over (x_0, x_j)."""
        acc = Fraction(0)
        out = [acc]
        for k in range(self.npieces):
            acc += self.values[k] * (self.breakpoints[k + 1] - self.breakpoints[k])
            out.append(acc)
        return tuple(out)

    @property
    def total_mass(self) -> Fraction:
        return self.prefix_mass[-1]

    def piece_index(self, x: Fraction) -> int:
        """Index k with x in [x_k, x_{k+1}); clamps to the last piece at x_m."""
        if not (self.breakpoints[0] <= x <= self.breakpoints[-1]):
            raise DomainError(f"{format_rational(x)} outside support {self.support}")
        import bisect

        k = bisect.bisect_right(self.breakpoints, x) - 1
        return min(k, self.npieces - 1)

    def cummass(self, x: Fraction) -> Fraction:
        """Integral of w over (-inf, x); constant outside the support."""
        if x <= self.breakpoints[0]:
            return Fraction(0)
        if x >= self.breakpoints[-1]:
            return self.total_mass
        k = self.piece_index(x)
        return self.prefix_mass[k] + self.values[k] * (x - self.breakpoints[k])

    def mass(self, J: Interval) -> Fraction:
        return self.cummass(J.hi) - self.cummass(J.lo)

    def pieces(self) -> Iterator[tuple]:
        for k in range(self.npieces):
            yield Interval(self.breakpoints[k], self.breakpoints[k + 1]), self.values[k]

    def value_at(self, x: Fraction) -> Fraction:
        """Value on the piece containing x; right-continuous at breakpoints."""
        k = self.piece_index(as_fraction(x))
        return self.values[k]

    def scale(self, c: Fraction) -> "StepWeight":
        c = as_fraction(c)
        return StepWeight(self.breakpoints, tuple(v * c for v in self.values))


def average(w: StepWeight, J: Interval) -> Fraction:
    """Mean of w over J (exact).  J must sit inside the support."""
    if not w.support.contains(J):
        raise DomainError(f"interval {J} outside the weight support {w.support}")
    return w.mass(J) / J.length


def power_average(w: StepWeight, J: Interval, r: Any) -> Real:
    """Mean of w**r over J; exact for integer r, longdouble otherwise.

    Negative exponents are allowed (dual weights w**(-1/(p-1)))."""
    if not w.support.contains(J):
        raise DomainError(f"interval {J} outside the weight support {w.support}")
    r_frac: Optional[Fraction] = None
    if isinstance(r, (int, Fraction)):
        r_frac = Fraction(r)
    elif isinstance(r, Real) and r.is_exact:
        r_frac = r.exact
    elif isinstance(r, str):
        r_frac = parse_rational(r)
    wr = restrict(w, J)
    if r_frac is not None and r_frac.denominator == 1:
        n = r_frac.numerator
        total = Fraction(0)
        for piece, v in wr.pieces():
            total += piece.length * v ** n
        q = total / J.length
        return Real(_ld_fraction(q), q)
    rv = _to_ld(r_frac) if r_frac is not None else _to_ld(r)
    total_ld = _LD(0)
    for piece, v in wr.pieces():
        total_ld += _ld_fraction(piece.length) * np.power(_ld_fraction(v), rv)
    return Real(total_ld / _ld_fraction(J.length), None)


def restrict(w: StepWeight, J: Interval) -> StepWeight:
    """The weight w restricted to J; support becomes exactly J."""
    if not w.support.contains(J):
        raise DomainError(f"interval {J} outside the weight support {w.support}")
    bps = [J.lo]
    vals = []
    for k in range(w.npieces):
        a, b = w.breakpoints[k], w.breakpoints[k + 1]
        lo, hi = max(a, J.lo), min(b, J.hi)
        if lo < hi:
            bps.append(hi)
            vals.append(w.values[k])
    return StepWeight(tuple(bps), tuple(vals))


# ---------------------------------------------------------------------------
# verdicts and constant reports


@dataclass(frozen=True)
class Verdict:
    theorem: str
    params: dict
    lhs: Real
    rhs: Real
    ratio: Real
    holds: bool
    exact: bool
    witness: Any = None
    delta_source: Optional[str] = None

    def to_json_dict(self) -> dict:
        return {
            "theorem": self.theorem,
            "params": {k: _format_scalar(v) for k, v in self.params.items()},
            "lhs": format_real(self.lhs),
            "rhs": format_real(self.rhs),
            "ratio": format_real(self.ratio),
            "holds": self.holds,
            "exact": self.exact,
            "deltaSource": self.delta_source,
            "witness": _format_scalar(self.witness),
        }


def make_verdict(
    theorem: str,
    params: dict,
    lhs: Real,
    rhs: Real,
    exact: bool,
    tol: Optional[float] = None,
    witness: Any = None,
    delta_source: Optional[str] = None,
) -> Verdict:
    """Build a Verdict with the comparison contract applied.

    exact=True compares the stored rationals with no slack; the inexact path
    uses lhs <= rhs * (1 + tol)."""
    exact = bool(exact and lhs.is_exact and rhs.is_exact)
    if exact:
        holds = lhs.exact <= rhs.exact
        if rhs.exact != 0:
            q = lhs.exact / rhs.exact
            ratio = Real(_ld_fraction(q), q)
        else:
            ratio = Real(_LD(1 if lhs.exact == 0 else np.inf), None)
    else:
        t = tolerance() if tol is None else float(tol)
        lv, rv = lhs.value, rhs.value
        holds = bool(lv <= rv * (1 + _LD(t)))
        ratio = Real(lv / rv, None) if rv != 0 else Real(_LD(1 if lv == 0 else np.inf), None)
    return Verdict(theorem, params, lhs, rhs, ratio, holds, exact, witness, delta_source)


class ConstantKind(str, Enum):
    A1 = "A1"
    A1PLUS = "A1plus"
    AP = "Ap"
    FUJII_WILSON = "FujiiWilson"
    FUJII_WILSON_PLUS = "FujiiWilsonPlus"
    KHRUSHCHEV = "Khrushchev"
    GUROV_RESHETNYAK = "GurovReshetnyak"
    DYADIC_FUJII_WILSON = "DyadicFujiiWilson"
    MU_STRONG_FUJII_WILSON = "MuStrongFujiiWilson"


@dataclass(frozen=True)
class ConstantReport:
    kind: ConstantKind
    value: Real
    is_lower_bound: bool
    refinement_depth: int
    witness: Any = None

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "value": format_real(self.value),
            "exact": self.value.is_exact,
            "isLowerBound": self.is_lower_bound,
            "refinementDepth": self.refinement_depth,
            "witness": _format_scalar(self.witness),
        }


def _format_scalar(v: Any) -> Any:
    if v is None or isinstance(v, (bool, str, int)):
        return v
    if isinstance(v, Fraction):
        return format_rational(v)
    if isinstance(v, Real):
        return format_real(v)
    if isinstance(v, Interval):
        return {"lo": format_rational(v.lo), "hi": format_rational(v.hi)}
    if isinstance(v, Cube):
        return {"lo": [format_rational(a) for a in v.lo], "side": format_rational(v.side)}
    if isinstance(v, float):
        return v
    if isinstance(v, (list, tuple)):
        return [_format_scalar(x) for x in v]
    if isinstance(v, dict):
        return {k: _format_scalar(x) for k, x in v.items()}
    return str(v)


# ---------------------------------------------------------------------------
# JSON weight files


def parse_step_weight(data: Union[str, dict]) -> StepWeight:
    """Parse {"kind":"step","breakpoints":[...],"values":[...]} (rationals as
    'p/q' or integer strings)."""
    obj = _load_json(data)
    if obj.get("kind") != "step":
        raise ParseError(f"expected weight kind 'step', got {obj.get('kind')!r}")
    for key in ("breakpoints", "values"):
        if key not in obj or not isinstance(obj[key], list):
            raise ParseError(f"step weight needs a '{key}' list")
    try:
        bps = tuple(as_fraction(b) for b in obj["breakpoints"])
        vals = tuple(as_fraction(v) for v in obj["values"])
    except ParseError as exc:
        raise ParseError(f"bad rational in step weight: {exc}") from None
    try:
        return StepWeight(bps, vals)
    except DomainError as exc:
        raise ParseError(str(exc)) from None


def step_weight_to_json(w: StepWeight) -> dict:
    return {
        "kind": "step",
        "breakpoints": [format_rational(b) for b in w.breakpoints],
        "values": [format_rational(v) for v in w.values],
    }


def canonical_json(obj: dict) -> str:
    """The canonical serialization: fixed key order as produced by the
    *_to_json builders, single-space separators, trailing newline."""
    return json.dumps(obj, separators=(", ", ": ")) + "\n"


def _load_json(data: Union[str, bytes, dict]) -> dict:
    if isinstance(data, dict):
        return data
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise ParseError("expected a JSON object at top level")
    return obj
