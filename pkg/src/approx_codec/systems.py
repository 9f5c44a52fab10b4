"""Concrete approximation systems ``(U, D, f, g)``.

``D`` is always indexed by the positive integers; ``f(n)`` is an exact
:class:`~approx_codec.numeric.LinearForm` inside ``U``.  Each system decides
``g(c, a, b, d)`` by picking the candidate point nearest to ``c`` among ``d``
system-specific candidate points in ``(a, b)``.

* :class:`KroneckerSystem` -- ``f(n) = n mod beta`` over the basis ``{1, alpha, beta}``.
* :class:`SineSystem` -- ``f(n) = sin(n)`` over ``{1, sin(1), sin(2), ...}``.
* :class:`FieldSystem` -- rational ``f`` with the affine candidate map ``a + f(e)(b - a)``.
"""

from __future__ import annotations

import math
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

from . import limits
from .errors import (
    DepthExhausted,
    EmptyWitness,
    InvalidInput,
    ParseError,
    PrecisionCapExceeded,
    SearchCapExceeded,
)
from .numeric import (
    Bracket,
    IrrationalBasis,
    LinearForm,
    RationalInterval,
    SqrtSymbol,
    compare,
    count_below,
    floor_multiple,
    parse_rational,
    rational_between,
    rational_to_json,
    refine,
    sort_forms,
    symbol_from_key,
)

ParamReal = Union[LinearForm, Bracket, RationalInterval, Fraction, int]


def as_param(basis: IrrationalBasis, c: ParamReal) -> LinearForm | Bracket:
    """Normalise a parameter to an exact point or an open bracket."""
    if isinstance(c, (LinearForm, Bracket)):
        return c
    if isinstance(c, RationalInterval):
        if c.lo == c.hi:
            return basis.rational(c.lo)
        return Bracket.from_rational(basis, c)
    if isinstance(c, (int, Fraction)):
        return basis.rational(c)
    raise TypeError(f"not a parameter value: {c!r}")


def compare_param(x: LinearForm, c: LinearForm | Bracket) -> int:
    """Order of ``x`` relative to every point of ``c``.

    Brackets are open: ``x`` at or below ``lo`` is below all of them.  An
    ``x`` strictly inside cannot be ordered and raises.
    """
    if isinstance(c, LinearForm):
        return compare(x, c)
    if compare(x, c.lo) <= 0:
        return -1
    if compare(x, c.hi) >= 0:
        return 1
    raise PrecisionCapExceeded(f"{x} lies inside the parameter bracket; comparison unresolved")


@dataclass(frozen=True)
class SystemDescriptor:
    kind: str
    params: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"kind": self.kind, **self.params}

    @classmethod
    def from_json(cls, obj) -> "SystemDescriptor":
        if not isinstance(obj, dict) or "kind" not in obj:
            raise ParseError(f"malformed system descriptor: {obj!r}")
        params = {k: v for k, v in obj.items() if k != "kind"}
        return cls(str(obj["kind"]), params)

    def build(self) -> "ApproximationSystem":
        return system_from_json(self.to_json())


class ApproximationSystem(ABC):
    """Interval ``U``, domain ``D = {1, 2, ...}``, ``f: D -> U`` and ``g``."""

    kind: str
    basis: IrrationalBasis
    injective = True

    def __init__(self):
        self._f_cache: dict[int, LinearForm] = {}
        self._sorted_lock = threading.Lock()
        self._sorted: tuple[int, list[int]] = (0, [])

    @property
    @abstractmethod
    def U(self) -> tuple[LinearForm, LinearForm]:
        ...

    @abstractmethod
    def _f(self, n: int) -> LinearForm:
        ...

    @abstractmethod
    def candidates(self, a: LinearForm, b: LinearForm, d: int) -> list[LinearForm]:
        """Points ``p_1..p_d`` in ``(a, b)``; ``g`` returns the index of the nearest."""

    @abstractmethod
    def descriptor(self) -> SystemDescriptor:
        ...

    def value_of(self, n: int) -> LinearForm:
        """The real number that is the ``n``-th element of ``D``."""
        return self.basis.rational(n)

    def f(self, n: int) -> LinearForm:
        # plain dict writes are atomic; racing writers store equal values
        v = self._f_cache.get(n)
        if v is None:
            if n < 1:
                raise InvalidInput(f"D is indexed from 1, got {n}")
            if n > limits.current().depth_cap:
                raise DepthExhausted(f"index {n} exceeds the depth cap")
            v = self._f(n)
            self._f_cache[n] = v
        return v

    def f_values(self, d: int) -> list[LinearForm]:
        return [self.f(n) for n in range(1, d + 1)]

    def sorted_indices(self, d: int) -> list[int]:
        """Indices ``1..d`` in increasing order of ``f``."""
        size, order = self._sorted
        if size == d:
            return list(order)
        vals = self.f_values(d)
        order = [i + 1 for i in sort_forms(vals)]
        with self._sorted_lock:
            self._sorted = (d, order)
        return list(order)

    def point(self, x) -> LinearForm:
        return x if isinstance(x, LinearForm) else self.basis.rational(x)

    def g(self, c: ParamReal, a, b, d: int) -> int:
        a, b = self.point(a), self.point(b)
        if d < 1:
            raise InvalidInput("d must be a positive index")
        if compare(b, a) <= 0 or d == 1:
            return 1
        return nearest_index(self.candidates(a, b, d), as_param(self.basis, c)) + 1

    def to_json(self) -> dict:
        return self.descriptor().to_json()

    def __repr__(self):
        return f"{type(self).__name__}({self.descriptor().to_json()})"

    def __reduce__(self):
        return (system_from_json, (self.to_json(),))


def nearest_index(points: list[LinearForm], c: LinearForm | Bracket) -> int:
    """0-based index of the point nearest ``c``; exact ties go to the smaller index.

    For a bracket ``c`` the answer must hold for every point of the bracket,
    otherwise the comparison is reported as unresolved.
    """
    order = sort_forms(points)
    spts = [points[i] for i in order]
    approxes = [p.approx for p in spts]
    probe = c if isinstance(c, LinearForm) else c.lo.basis.rational(rational_between(c.lo, c.hi))
    j = count_below(spts, approxes, probe)
    # the nearest point is spts[j-1] or spts[j]; runs of equal points are handled by index
    cands = []
    if j > 0:
        cands.append(j - 1)
    if j < len(spts):
        cands.append(j)
    if len(cands) == 2:
        lo_p, hi_p = spts[cands[0]], spts[cands[1]]
        s = compare(probe * 2, lo_p + hi_p)
        if s < 0:
            pos = cands[0]
        elif s > 0:
            pos = cands[1]
        else:
            pos = min(cands, key=lambda k: order[k])
    else:
        pos = cands[0]
    # equal points sharing the value: smallest original index wins
    value = spts[pos]
    best = order[pos]
    k = pos - 1
    while k >= 0 and spts[k] == value:
        best = min(best, order[k])
        k -= 1
    k = pos + 1
    while k < len(spts) and spts[k] == value:
        best = min(best, order[k])
        k += 1
    if isinstance(c, Bracket):
        _check_cell(spts, pos, c)
    return best


def _check_cell(spts: list[LinearForm], pos: int, c: Bracket) -> None:
    value = spts[pos]
    left = pos - 1
    while left >= 0 and spts[left] == value:
        left -= 1
    right = pos + 1
    while right < len(spts) and spts[right] == value:
        right += 1
    if left >= 0 and compare(c.lo * 2, spts[left] + value) < 0:
        raise PrecisionCapExceeded("parameter bracket straddles a decision boundary of g")
    if right < len(spts) and compare(c.hi * 2, spts[right] + value) > 0:
        raise PrecisionCapExceeded("parameter bracket straddles a decision boundary of g")


class _WindowSearchMixin:
    """``h1``/``h2`` for systems whose witnesses come from a second sequence.

    ``h1(u, d, e)`` is the least ``n`` whose probe value ``probe(n)`` lies in
    ``(f(e), f(e) + u)`` with no ``f(y)``, ``y <= d``, in ``(f(e), probe(n)]``.
    """

    def probe(self, n: int) -> LinearForm:
        raise NotImplementedError

    def _window_top(self, u: LinearForm, d: int, e: int) -> LinearForm:
        fe = self.f(e)
        top = fe + u
        for y in range(1, d + 1):
            fy = self.f(y)
            if compare(fy, fe) > 0 and compare(fy, top) < 0:
                top = fy
        return top

    def h1(self, u, d: int, e: int) -> int:
        u = self.point(u)
        if compare(u, 0) <= 0:
            raise InvalidInput("h1 needs u > 0")
        if not 1 <= e <= d:
            raise InvalidInput("h1 needs 1 <= e <= d")
        fe = self.f(e)
        top = self._window_top(u, d, e)
        cap = limits.current().search_cap
        for n in range(1, cap + 1):
            x = self.probe(n)
            if compare(x, fe) > 0 and compare(x, top) < 0:
                return n
        raise SearchCapExceeded(f"h1({u}, {d}, {e}) not found within {cap} steps")

    def h2(self, u, d: int, e: int) -> LinearForm:
        return self.probe(self.h1(u, d, e)) - self.f(e)

    def h1_table(self, u, d: int) -> list[int]:
        """``[h1(u, d, e) for e in 1..d]`` from a single pass over the probe sequence."""
        u = self.point(u)
        if compare(u, 0) <= 0:
            raise InvalidInput("h1 needs u > 0")
        key = (u, d)
        cached = self._h1_cache.get(key)
        if cached is not None:
            return list(cached)
        order = self.sorted_indices(d)
        svals = [self.f(i) for i in order]
        approxes = [v.approx for v in svals]
        tops = []
        for j, v in enumerate(svals):
            top = v + u
            if j + 1 < len(svals) and compare(svals[j + 1], top) < 0:
                top = svals[j + 1]
            tops.append(top)
        found: list[int | None] = [None] * d
        missing = d
        cap = limits.current().search_cap
        n = 0
        while missing:
            n += 1
            if n > cap:
                raise SearchCapExceeded(f"h1 table for d={d} incomplete after {cap} steps")
            x = self.probe(n)
            j = count_below(svals, approxes, x) - 1
            if j < 0 or found[j] is not None:
                continue
            if compare(x, tops[j]) < 0:
                found[j] = n
                missing -= 1
        table = [0] * d
        for j, e in enumerate(order):
            table[e - 1] = found[j]
        with self._h1_lock:
            self._h1_cache[key] = tuple(table)
            if len(self._h1_cache) > 64:
                self._h1_cache.pop(next(iter(self._h1_cache)))
        return table

    def h2_table(self, u, d: int) -> list[LinearForm]:
        return [self.probe(n) - self.f(e) for e, n in enumerate(self.h1_table(u, d), start=1)]

    def candidates(self, a, b, d):
        return [a + h for h in self.h2_table(b - a, d)]


class KroneckerSystem(_WindowSearchMixin, ApproximationSystem):
    """``f(n) = n - floor_beta(n)`` on ``(0, beta)``; witnesses from ``n*alpha``."""

    kind = "kronecker"

    def __init__(self, alpha="sqrt:2", beta="sqrt:3"):
        super().__init__()
        self._h1_cache: dict = {}
        self._h1_lock = threading.Lock()
        a_sym, b_sym = symbol_from_key(alpha), symbol_from_key(beta)
        self.basis = IrrationalBasis(["1", a_sym, b_sym])
        self.alpha = self.basis.element(1)
        self.beta = self.basis.element(2)
        if not (compare(self.alpha, 1) > 0 and compare(self.beta, self.alpha) > 0):
            raise InvalidInput("the Kronecker system needs 1 < alpha < beta")
        self._fa_cache: dict[int, LinearForm] = {}
        # with square-root symbols, k*beta < x reduces to an integer test on squares
        self._sq = None
        if isinstance(a_sym, SqrtSymbol) and isinstance(b_sym, SqrtSymbol):
            self._sq = (a_sym.radicand, b_sym.radicand)

    @property
    def U(self):
        return self.basis.rational(0), self.beta

    def _multiples_below(self, n: int, of_alpha: bool) -> int:
        """Largest ``k >= 0`` with ``k*beta < n`` (or ``< n*alpha``), square-root case."""
        ra, rb = self._sq
        lhs = Fraction(n * n) * (ra if of_alpha else 1) / rb  # k**2 < lhs
        return math.isqrt((lhs.numerator - 1) // lhs.denominator) if lhs.denominator == 1 \
            else math.isqrt(lhs.numerator // lhs.denominator)

    def _f(self, n):
        if self._sq is not None:
            k = self._multiples_below(n, False)
            return LinearForm._raw(self.basis, [(0, n), (2, -k)] if k else [(0, n)])
        x = self.basis.rational(n)
        return x - floor_multiple(x, self.beta)[1]

    def f_alpha(self, n: int) -> LinearForm:
        """``n*alpha`` reduced below beta."""
        v = self._fa_cache.get(n)
        if v is None:
            if n < 1:
                raise InvalidInput("f_alpha is defined on positive multiples of alpha")
            if self._sq is not None:
                k = self._multiples_below(n, True)
                v = LinearForm._raw(self.basis, [(1, n), (2, -k)] if k else [(1, n)])
            else:
                x = self.alpha * n
                v = x - floor_multiple(x, self.beta)[1]
            self._fa_cache[n] = v
        return v

    probe = f_alpha

    def descriptor(self):
        def desc(key):
            kind, _, arg = key.partition(":")
            if kind == "sqrt":
                return {"kind": "sqrt", "radicand": arg}
            return {"kind": kind, "multiple": arg}
        return SystemDescriptor("kronecker", {"alpha": desc(self.basis.symbol(1).key),
                                              "beta": desc(self.basis.symbol(2).key)})


class SineSystem(_WindowSearchMixin, ApproximationSystem):
    """``f(n) = sin(n)`` on ``(-1, 1)``; witnesses come from the same sequence."""

    kind = "sine"

    def __init__(self, max_index_hint: int = 1000):
        super().__init__()
        self._h1_cache: dict = {}
        self._h1_lock = threading.Lock()
        self.basis = IrrationalBasis.sine()
        self.max_index_hint = int(max_index_hint)

    @property
    def U(self):
        return self.basis.rational(-1), self.basis.rational(1)

    def _f(self, n):
        return self.basis.element(n)

    def probe(self, n):
        return self.f(n)

    def descriptor(self):
        return SystemDescriptor("sine", {"max_index_hint": self.max_index_hint})


def van_der_corput(n: int) -> Fraction:
    """Base-2 radical inverse of ``n >= 1``: dense, injective, in ``(0, 1)``."""
    out, denom = 0, 1
    while n:
        out = 2 * out + (n & 1)
        denom *= 2
        n >>= 1
    return Fraction(out, denom)


FORMULAS = {"van_der_corput": van_der_corput}


class FieldSystem(ApproximationSystem):
    """Rational ``f`` on ``U = (0, 1)`` with candidates ``a + f(e)(b - a)``."""

    kind = "field"

    def __init__(self, f_table=None, formula: str | None = None):
        super().__init__()
        if (f_table is None) == (formula is None):
            raise InvalidInput("field system needs exactly one of f_table or formula")
        self.basis = IrrationalBasis(["1"])
        self.formula = formula
        if formula is not None:
            if formula not in FORMULAS:
                raise InvalidInput(f"unknown f formula {formula!r}")
            self.table = None
        else:
            table = tuple(Fraction(v) for v in f_table)
            if not all(0 < v < 1 for v in table):
                raise InvalidInput("field f-values must lie in (0, 1)")
            self.table = table
            self.injective = len(set(table)) == len(table)

    @property
    def U(self):
        return self.basis.rational(0), self.basis.rational(1)

    def _f(self, n):
        if self.table is not None:
            if n > len(self.table):
                raise DepthExhausted(f"field f-table has only {len(self.table)} entries")
            return self.basis.rational(self.table[n - 1])
        return self.basis.rational(FORMULAS[self.formula](n))

    def h(self, a, b, e: int) -> LinearForm:
        a, b = self.point(a), self.point(b)
        if compare(a, b) >= 0:
            return a
        if not (a.is_rational and b.is_rational):
            raise InvalidInput("field h needs rational endpoints")
        return a + self.f(e).rational_value() * (b - a).rational_value()

    def candidates(self, a, b, d):
        return [self.h(a, b, e) for e in range(1, d + 1)]

    def descriptor(self):
        if self.table is not None:
            return SystemDescriptor("field", {"f_table": [rational_to_json(v) for v in self.table]})
        return SystemDescriptor("field", {"formula": self.formula})


class DedupedSystem(ApproximationSystem):
    """Re-indexes ``D`` to the first occurrence of each ``f`` value."""

    def __init__(self, base: ApproximationSystem):
        super().__init__()
        self.base = base
        self.kind = base.kind
        self.basis = base.basis
        self._orig: list[int] = []
        self._seen: set = set()
        self._next = 1
        self._lock = threading.Lock()

    @property
    def U(self):
        return self.base.U

    def original_index(self, k: int) -> int:
        with self._lock:
            cap = limits.current().search_cap
            steps = 0
            while len(self._orig) < k:
                v = self.base.f(self._next)
                if v not in self._seen:
                    self._seen.add(v)
                    self._orig.append(self._next)
                self._next += 1
                steps += 1
                if steps > cap:
                    raise SearchCapExceeded("deduplication scan exceeded the search cap")
            return self._orig[k - 1]

    def _f(self, n):
        return self.base.f(self.original_index(n))

    def candidates(self, a, b, d):
        if isinstance(self.base, FieldSystem):
            return [a if compare(a, b) >= 0 else a + self.f(e).rational_value() * (b - a).rational_value()
                    for e in range(1, d + 1)]
        raise NotImplementedError("candidates for a deduplicated non-field system")

    def descriptor(self):
        return self.base.descriptor()


def dedupe_domain(system: ApproximationSystem) -> ApproximationSystem:
    """System with ``D`` restricted to indices whose f-value is new; injective ``f``."""
    if system.injective:
        return system
    if isinstance(system, FieldSystem) and system.table is not None:
        seen, table = set(), []
        for v in system.table:
            if v not in seen:
                seen.add(v)
                table.append(v)
        return FieldSystem(f_table=table)
    return DedupedSystem(system)


def verify_condition_ii(system: ApproximationSystem, a, b, d: int, e: int) -> RationalInterval:
    """Open rational interval inside ``(a, b)`` on which ``g(., a, b, d) == e``.

    It is the ball around the ``e``-th candidate whose radius is half the
    distance to the nearest other candidate, clipped to ``(a, b)`` and shrunk
    to rational endpoints.
    """
    a, b = system.point(a), system.point(b)
    if compare(a, b) >= 0:
        raise InvalidInput("condition (ii) needs a < b")
    if not 1 <= e <= d:
        raise InvalidInput("condition (ii) needs 1 <= e <= d")
    if d == 1:
        lo_f, hi_f = a, b
    else:
        pts = system.candidates(a, b, d)
        center = pts[e - 1]
        order = sort_forms(pts)
        pos = order.index(e - 1)
        gaps = []
        if pos > 0:
            gaps.append(center - pts[order[pos - 1]])
        if pos + 1 < len(order):
            gaps.append(pts[order[pos + 1]] - center)
        radius = gaps[0]
        if len(gaps) == 2 and compare(gaps[1], radius) < 0:
            radius = gaps[1]
        if compare(radius, 0) <= 0:
            raise EmptyWitness(f"candidate {e} coincides with another for d={d}")
        radius = radius / 2
        lo_f = center - radius
        hi_f = center + radius
        if compare(lo_f, a) < 0:
            lo_f = a
        if compare(hi_f, b) > 0:
            hi_f = b
    if compare(lo_f, hi_f) >= 0:
        raise EmptyWitness("condition (ii) interval is empty")
    p = 16
    cap = limits.current().precision_cap
    while True:
        lo = refine(lo_f, p).hi
        hi = refine(hi_f, p).lo
        if lo < hi:
            return RationalInterval(lo, hi)
        if p >= cap:
            raise EmptyWitness("condition (ii) interval has no rational interior at the precision cap")
        p *= 2


def system_from_json(obj) -> ApproximationSystem:
    desc = obj if isinstance(obj, dict) else obj.to_json()
    kind = desc.get("kind")
    try:
        if kind == "kronecker":
            return KroneckerSystem(_symbol_desc(desc.get("alpha", "sqrt:2")),
                                   _symbol_desc(desc.get("beta", "sqrt:3")))
        if kind == "sine":
            return SineSystem(int(desc.get("max_index_hint", 1000)))
        if kind == "field":
            if "formula" in desc:
                return FieldSystem(formula=desc["formula"])
            return FieldSystem(f_table=[parse_rational(v) for v in desc["f_table"]])
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed system descriptor: {desc!r}") from exc
    except ValueError as exc:
        if isinstance(exc, (ParseError, InvalidInput)):
            raise
        raise ParseError(str(exc)) from exc
    raise ParseError(f"unknown system kind {kind!r}")


def _symbol_desc(desc) -> str:
    if isinstance(desc, str):
        return desc
    kind = desc.get("kind")
    if kind == "sqrt":
        return f"sqrt:{parse_rational(str(desc['radicand']))}"
    if kind == "pi":
        return f"pi:{parse_rational(str(desc.get('multiple', 1)))}"
    raise ParseError(f"unsupported Kronecker constant {desc!r}")


def default_system() -> KroneckerSystem:
    return KroneckerSystem("sqrt:2", "sqrt:3")
