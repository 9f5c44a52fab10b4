"""Best approximations, finite approximations, extensions, splitting and limits.

Everything is depth-bounded: ``best_left(system, c, depth)`` is ``L(c)``
intersected with ``{1..depth}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from . import limits
from .errors import (
    DepthExhausted,
    EmptyGap,
    InvalidChain,
    InvalidInput,
    ParseError,
    SearchCapExceeded,
)
from .numeric import Bracket, LinearForm, compare, count_below, rational_between
from .systems import ApproximationSystem, ParamReal, as_param, compare_param


@dataclass(frozen=True)
class FiniteApproximation:
    """A pair ``(L, R)`` of index sets with its bound ``d``."""

    L: tuple[int, ...]
    R: tuple[int, ...]
    d: int

    def __post_init__(self):
        object.__setattr__(self, "L", tuple(sorted(int(x) for x in self.L)))
        object.__setattr__(self, "R", tuple(sorted(int(x) for x in self.R)))
        object.__setattr__(self, "d", int(self.d))

    def extends(self, other: "FiniteApproximation") -> bool:
        return (self.d >= other.d and set(other.L) <= set(self.L)
                and set(other.R) <= set(self.R))

    def to_json(self) -> dict:
        return {"L": list(self.L), "R": list(self.R), "d": self.d}

    @classmethod
    def from_json(cls, obj) -> "FiniteApproximation":
        try:
            return cls(tuple(obj["L"]), tuple(obj["R"]), obj["d"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed finite approximation: {obj!r}") from exc


ApproximationChain = list  # list[FiniteApproximation], strictly increasing in d


def chain_to_json(chain: Sequence[FiniteApproximation]) -> list:
    return [entry.to_json() for entry in chain]


def chain_from_json(obj) -> list[FiniteApproximation]:
    if not isinstance(obj, list):
        raise ParseError("chain must be a JSON array")
    return [FiniteApproximation.from_json(x) for x in obj]


def _check_depth(depth: int) -> None:
    if depth > limits.current().depth_cap:
        raise DepthExhausted(f"depth {depth} exceeds the depth cap")


def best_left(system: ApproximationSystem, c: ParamReal, depth: int) -> list[int]:
    """Indices ``<= depth`` that are best approximations of ``c`` from the left.

    One pass: an index qualifies exactly when its value is below ``c`` and
    beats every earlier value below ``c``.
    """
    _check_depth(depth)
    c = as_param(system.basis, c)
    out: list[int] = []
    best = None
    for e in range(1, depth + 1):
        fe = system.f(e)
        if best is not None and compare(fe, best) < 0:
            continue
        if compare_param(fe, c) < 0:
            out.append(e)
            best = fe
    return out


def best_right(system: ApproximationSystem, c: ParamReal, depth: int) -> list[int]:
    """Mirror of :func:`best_left`: running minima above ``c``."""
    _check_depth(depth)
    c = as_param(system.basis, c)
    out: list[int] = []
    best = None
    for e in range(1, depth + 1):
        fe = system.f(e)
        if best is not None and compare(fe, best) > 0:
            continue
        if compare_param(fe, c) > 0:
            out.append(e)
            best = fe
    return out


def best_approximations(system, c, depth) -> tuple[list[int], list[int]]:
    """``(best_left, best_right)`` in one pass."""
    _check_depth(depth)
    c = as_param(system.basis, c)
    left: list[int] = []
    right: list[int] = []
    lo = hi = None
    for e in range(1, depth + 1):
        fe = system.f(e)
        if lo is not None and compare(fe, lo) < 0:
            continue
        if hi is not None and compare(fe, hi) > 0:
            continue
        s = compare_param(fe, c)
        if s < 0:
            left.append(e)
            lo = fe
        elif s > 0:
            right.append(e)
            hi = fe
    return left, right


def is_finite_approximation(system: ApproximationSystem, L: Iterable[int], R: Iterable[int], d: int) -> bool:
    L, R = sorted(L), sorted(R)
    if d < 1 or any(not 1 <= x <= d for x in L + R):
        return False
    fL = [system.f(x) for x in L]
    fR = [system.f(x) for x in R]
    # (2) increasing along L, decreasing along R
    if any(compare(x, y) >= 0 for x, y in zip(fL, fL[1:])):
        return False
    if any(compare(x, y) <= 0 for x, y in zip(fR, fR[1:])):
        return False
    # (1) every left value below every right value
    if fL and fR and compare(fL[-1], fR[-1]) >= 0:
        return False
    # (3) each e <= d has a witness among indices <= e
    Lset, Rset = set(L), set(R)
    top_left = bottom_right = None
    for e in range(1, d + 1):
        fe = system.f(e)
        if e in Lset:
            top_left = fe
        if e in Rset:
            bottom_right = fe
        if top_left is not None and compare(top_left, fe) >= 0:
            continue
        if bottom_right is not None and compare(bottom_right, fe) <= 0:
            continue
        return False
    return True


def is_valid(system, approx: FiniteApproximation) -> bool:
    return is_finite_approximation(system, approx.L, approx.R, approx.d)


def gap(system, L: Sequence[int], R: Sequence[int]) -> tuple[LinearForm | None, LinearForm | None]:
    """``(max f(L), min f(R))``; ``None`` for an empty side."""
    lo = hi = None
    for x in L:
        fx = system.f(x)
        if lo is None or compare(fx, lo) > 0:
            lo = fx
    for x in R:
        fx = system.f(x)
        if hi is None or compare(fx, hi) < 0:
            hi = fx
    return lo, hi


def interior_rational(system, lo: LinearForm, hi: LinearForm, depth: int) -> Fraction:
    """Rational in ``(lo, hi)`` that differs from every ``f(e)``, ``e <= depth``."""
    x = rational_between(lo, hi)
    tries = 0
    while True:
        hit = any(compare(system.f(e), x) == 0 for e in range(1, depth + 1)
                  if system.f(e).is_rational)
        if not hit:
            return x
        tries += 1
        x = rational_between(lo, system.basis.rational(x)) if tries % 2 else rational_between(
            system.basis.rational(x), hi)


def recoverability_check(system: ApproximationSystem, L: Iterable[int], R: Iterable[int], d: int) -> bool:
    """Does some ``c`` strictly between ``max f(L)`` and ``min f(R)`` recover ``(L, R)``?"""
    L, R = sorted(L), sorted(R)
    if not L or not R:
        raise InvalidInput("recoverability needs non-empty L and R")
    lo, hi = gap(system, L, R)
    if compare(lo, hi) >= 0:
        raise EmptyGap("max f(L) >= min f(R)")
    c = interior_rational(system, lo, hi, d)
    left, right = best_approximations(system, c, d)
    return left == L and right == R


def right_extension(system: ApproximationSystem, approx: FiniteApproximation, d2: int) -> FiniteApproximation:
    """The unique extension up to ``d2`` that adds no left points."""
    if d2 < approx.d:
        raise InvalidInput("right extension needs d2 >= d")
    if not is_valid(system, approx):
        raise InvalidInput(f"not a finite approximation: {approx}")
    return _right_extend(system, approx, d2)


def _right_extend(system, approx: FiniteApproximation, d2: int) -> FiniteApproximation:
    _check_depth(d2)
    lo, hi = gap(system, approx.L, approx.R)
    R = list(approx.R)
    for e in range(approx.d + 1, d2 + 1):
        fe = system.f(e)
        if lo is not None and compare(fe, lo) <= 0:
            continue
        if hi is not None and compare(fe, hi) >= 0:
            continue
        R.append(e)
        hi = fe
    return FiniteApproximation(approx.L, tuple(R), d2)


class _GapIndex:
    """Adjacent gaps of ``f(1..d1)``, for marking which gaps received a new value."""

    def __init__(self, system, d1: int):
        order = system.sorted_indices(d1)
        self.values = [system.f(i) for i in order]
        self.approxes = [v.approx for v in self.values]
        self.open = set(range(len(self.values) - 1))

    def mark(self, x: LinearForm) -> None:
        j = count_below(self.values, self.approxes, x)
        # x lies strictly inside gap j-1 unless it equals values[j]
        if 0 < j < len(self.values) and compare(self.values[j], x) != 0:
            self.open.discard(j - 1)


def splits_between(system: ApproximationSystem, d1: int, d2: int) -> bool:
    """Does every gap between adjacent values of ``f(1..d1)`` get a value from ``(d1, d2]``?"""
    if not d1 < d2:
        raise InvalidInput("splitting needs d1 < d2")
    gaps = _GapIndex(system, d1)
    for e in range(d1 + 1, d2 + 1):
        if not gaps.open:
            break
        gaps.mark(system.f(e))
    return not gaps.open


def find_split(system: ApproximationSystem, d1: int, also=None) -> int:
    """Smallest ``d2 > d1`` such that ``f`` splits between ``d1`` and ``d2``.

    ``also`` is an optional predicate on indices; when given, the result is
    additionally at least the first index ``> d1`` satisfying it.
    """
    if d1 < 1:
        raise InvalidInput("d1 must be a positive index")
    gaps = _GapIndex(system, d1)
    need_also = also is not None
    cap = limits.current().search_cap
    e = d1
    while gaps.open or need_also or e == d1:
        e += 1
        if e - d1 > cap:
            raise SearchCapExceeded(f"no split after {d1} within {cap} steps")
        fe = system.f(e)
        if gaps.open:
            gaps.mark(fe)
        if need_also and also(e):
            need_also = False
    return e


def successor(system: ApproximationSystem, c1: ParamReal, e: int, depth: int, times: int = 1) -> int:
    """``times``-fold successor of ``e`` in ``L(c1)``; ``times=0`` is the identity."""
    left = best_left(system, c1, depth)
    return successor_in(left, e, times)


def successor_in(left: Sequence[int], e: int, times: int = 1) -> int:
    try:
        i = left.index(e)
    except ValueError:
        raise InvalidInput(f"{e} is not a best left approximation within depth") from None
    if times < 0:
        raise InvalidInput("iterate count must be non-negative")
    if i + times >= len(left):
        raise DepthExhausted(f"successor of {e} lies beyond the depth bound")
    return left[i + times]


def limit_interval(system: ApproximationSystem, chain: Sequence[FiniteApproximation]) -> Bracket:
    """``(max f(L_last), min f(R_last))`` for a valid chain of extensions."""
    if not chain:
        raise InvalidChain("empty chain")
    for prev, nxt in zip(chain, chain[1:]):
        if nxt.d <= prev.d:
            raise InvalidChain("chain bounds must strictly increase")
        if not (set(prev.L) <= set(nxt.L) and set(prev.R) <= set(nxt.R)):
            raise InvalidChain("chain entry does not extend its predecessor")
    last = chain[-1]
    if not last.L or not last.R:
        raise InvalidChain("limit needs non-empty L and R")
    lo, hi = gap(system, last.L, last.R)
    if compare(lo, hi) >= 0:
        raise InvalidChain("chain bracket is empty")
    return Bracket(lo, hi)
