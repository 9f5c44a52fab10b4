"""Exact scalars over the rational span of a fixed irrational basis.

A :class:`LinearForm` is ``q0*1 + q1*x1 + ... + qk*xk`` with rational
coefficients and basis elements ``x1..xk`` that are linearly independent over
the rationals together with 1.  Independence turns the zero test into a
coefficient comparison; every strict comparison is then decided by refining
dyadic enclosures of the basis elements until the sign is certain.
"""

from __future__ import annotations

import bisect
import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from functools import cmp_to_key
from numbers import Rational
from typing import Callable, Iterable, Sequence

import gmpy2

from . import limits
from .errors import BasisMismatch, ParseError, PrecisionCapExceeded

__all__ = [
    "Symbol",
    "IrrationalBasis",
    "LinearForm",
    "RationalInterval",
    "Bracket",
    "refine",
    "sign",
    "compare",
    "floor_multiple",
    "rational_between",
    "sort_forms",
    "count_below",
    "register_stream",
]

_START_BITS = 16
_FLOAT_EPS = 2.0**-50


def _q(x) -> int | Fraction:
    """Normalise a rational to ``int`` when integral (cheaper arithmetic)."""
    if isinstance(x, int):
        return x
    if isinstance(x, Fraction):
        return x.numerator if x.denominator == 1 else x
    if isinstance(x, Rational):
        return _q(Fraction(x.numerator, x.denominator))
    if isinstance(x, str):
        return _q(parse_rational(x))
    raise TypeError(f"expected an exact rational, got {type(x).__name__}")


def parse_rational(text) -> Fraction:
    """Parse ``"p/q"``, ``"p"`` or a ``[p, q]`` pair; floats are refused."""
    try:
        if isinstance(text, (list, tuple)):
            p, q = text
            return Fraction(int(p), int(q))
        if isinstance(text, int):
            return Fraction(text)
        if isinstance(text, str):
            s = text.strip()
            if "/" in s:
                p, q = s.split("/", 1)
                return Fraction(int(p), int(q))
            return Fraction(int(s))
    except (ValueError, ZeroDivisionError, TypeError) as exc:
        raise ParseError(f"not an exact rational: {text!r}") from exc
    raise ParseError(f"not an exact rational: {text!r}")


def rational_to_json(x) -> list[str]:
    x = Fraction(x)
    return [str(x.numerator), str(x.denominator)]


# ---------------------------------------------------------------------------
# basis symbols


class Symbol:
    """One basis element with a cached dyadic floor ``floor(x * 2**q)``."""

    key: str
    independence_guaranteed = True

    def __init__(self):
        self._lock = threading.Lock()
        self._cache = (-1, 0)  # (bits, floor) swapped atomically
        self._float: float | None = None

    def __reduce__(self):
        return (symbol_from_key, (self.key,))

    def __repr__(self):
        return f"Symbol({self.key!r})"

    def scaled_floor(self, q: int) -> int:
        """``floor(x * 2**q)``; nested in q because it is a floor on a dyadic grid."""
        bits, value = self._cache
        if q <= bits:
            return value >> (bits - q)
        target = max(q, 64, 2 * bits)
        value = self._compute_floor(target)
        with self._lock:
            if target > self._cache[0]:
                self._cache = (target, value)
        return value >> (target - q)

    def _compute_floor(self, q: int) -> int:
        raise NotImplementedError

    @property
    def approx(self) -> float:
        if self._float is None:
            self._float = float(Fraction(self.scaled_floor(64), 1 << 64))
        return self._float


class UnitSymbol(Symbol):
    key = "1"

    def _compute_floor(self, q):
        return 1 << q


class SqrtSymbol(Symbol):
    def __init__(self, radicand):
        super().__init__()
        r = Fraction(radicand)
        if r <= 0:
            raise ValueError("square root radicand must be positive")
        num, den = r.numerator, r.denominator
        if math.isqrt(num) ** 2 == num and math.isqrt(den) ** 2 == den:
            raise ValueError(f"sqrt({r}) is rational")
        self.radicand = r
        self.key = f"sqrt:{r}"

    def square_free_class(self) -> int:
        n = self.radicand.numerator * self.radicand.denominator
        out, p = 1, 2
        while p * p <= n:
            while n % (p * p) == 0:
                n //= p * p
            if n % p == 0:
                out *= p
                n //= p
            p += 1
        return out * n

    def _compute_floor(self, q):
        num, den = self.radicand.numerator, self.radicand.denominator
        return math.isqrt((num * den) << (2 * q)) // den


def _directed(fn, prec):
    lo = fn(gmpy2.context(precision=prec, round=gmpy2.RoundDown))
    hi = fn(gmpy2.context(precision=prec, round=gmpy2.RoundUp))
    return lo.as_integer_ratio(), hi.as_integer_ratio()


def _floor_from_directed(fn, q: int) -> int:
    prec = q + 32
    cap = limits.current().precision_cap + 64
    while True:
        (ln, ld), (hn, hd) = _directed(fn, prec)
        lo, hi = (ln << q) // ld, (hn << q) // hd
        if lo == hi:
            return lo
        if prec > cap:
            raise PrecisionCapExceeded(f"could not isolate floor at {q} bits")
        prec *= 2


class SinSymbol(Symbol):
    def __init__(self, k: int):
        super().__init__()
        if int(k) != k or k < 1:
            raise ValueError("sine symbols take a positive integer argument")
        self.k = int(k)
        self.key = f"sin:{self.k}"

    def _compute_floor(self, q):
        k = gmpy2.mpz(self.k)
        return _floor_from_directed(lambda ctx: ctx.sin(k), q)


class PiSymbol(Symbol):
    def __init__(self, multiple=1):
        super().__init__()
        r = Fraction(multiple)
        if r <= 0:
            raise ValueError("pi multiple must be positive")
        self.multiple = r
        self.key = f"pi:{r}"

    def _compute_floor(self, q):
        r = self.multiple
        prec = q + 32 + r.numerator.bit_length()
        cap = limits.current().precision_cap + 64
        while True:
            (ln, ld), (hn, hd) = _directed(lambda ctx: ctx.const_pi(), prec)
            lo = (ln * r.numerator << q) // (ld * r.denominator)
            hi = (hn * r.numerator << q) // (hd * r.denominator)
            if lo == hi:
                return lo
            if prec > cap:
                raise PrecisionCapExceeded("could not isolate floor of pi multiple")
            prec *= 2


class StreamSymbol(Symbol):
    """User-supplied constant given by ``enclose(p) -> (lo, hi)`` of width <= 2**-p."""

    independence_guaranteed = False

    def __init__(self, name: str, enclose: Callable[[int], tuple]):
        super().__init__()
        self.name = name
        self.key = f"stream:{name}"
        self._enclose = enclose

    def _compute_floor(self, q):
        p = q + 8
        cap = limits.current().precision_cap + 64
        while True:
            lo, hi = (Fraction(v) for v in self._enclose(p))
            a, b = math.floor(lo * (1 << q)), math.floor(hi * (1 << q))
            if a == b:
                return a
            if p > cap:
                raise PrecisionCapExceeded(f"stream {self.name!r} does not separate from the 2**-{q} grid")
            p *= 2


_REGISTRY: dict[str, Symbol] = {}
_REGISTRY_LOCK = threading.Lock()


def register_stream(name: str, enclose: Callable[[int], tuple]) -> StreamSymbol:
    sym = StreamSymbol(name, enclose)
    with _REGISTRY_LOCK:
        _REGISTRY[sym.key] = sym
    return sym


def symbol_from_key(key) -> Symbol:
    """Shared symbol instance for a descriptor such as ``"sqrt:2"`` or ``"sin:3"``."""
    if isinstance(key, Symbol):
        return key
    if isinstance(key, dict):
        key = _descriptor_key(key)
    key = str(key)
    with _REGISTRY_LOCK:
        sym = _REGISTRY.get(key)
    if sym is not None:
        return sym
    kind, _, arg = key.partition(":")
    if key == "1":
        sym = UnitSymbol()
    elif kind == "sqrt":
        sym = SqrtSymbol(parse_rational(arg))
    elif kind == "sin":
        sym = SinSymbol(int(arg))
    elif kind == "pi":
        sym = PiSymbol(parse_rational(arg) if arg else 1)
    elif kind == "stream":
        raise ParseError(f"stream symbol {arg!r} is not registered")
    else:
        raise ParseError(f"unknown basis symbol {key!r}")
    with _REGISTRY_LOCK:
        return _REGISTRY.setdefault(sym.key, sym)


def _descriptor_key(desc: dict) -> str:
    kind = desc.get("kind")
    if kind == "sqrt":
        return f"sqrt:{parse_rational(str(desc['radicand']))}"
    if kind == "sin":
        return f"sin:{int(desc['arg'])}"
    if kind == "pi":
        return f"pi:{parse_rational(str(desc.get('multiple', 1)))}"
    if kind == "stream":
        return f"stream:{desc['name']}"
    raise ParseError(f"unknown symbol descriptor {desc!r}")


# ---------------------------------------------------------------------------
# basis


class IrrationalBasis:
    """Ordered basis whose position 0 is the rational unit.

    ``sine()`` builds the open-ended family ``1, sin(1), sin(2), ...`` whose
    symbol ``i`` is ``sin(i)``; it is grown lazily as indices appear.
    """

    def __init__(self, symbols: Sequence = ("1",), *, asserted_independent: bool = False,
                 sine_family: bool = False):
        syms = tuple(symbol_from_key(s) for s in symbols)
        if sine_family:
            syms = (symbol_from_key("1"),)
        if not syms or syms[0].key != "1":
            raise ValueError("basis position 0 must be the unit")
        keys = [s.key for s in syms]
        if len(set(keys)) != len(keys):
            raise ValueError("basis symbols must be distinct")
        self._symbols = syms
        self.sine_family = sine_family
        self.asserted_independent = asserted_independent
        guaranteed = self._independence_by_construction()
        if guaranteed and asserted_independent:
            raise ValueError("asserted independence given for a basis that is independent by construction")
        if not guaranteed and not asserted_independent:
            raise ValueError("basis independence is not guaranteed; pass asserted_independent=True")
        self._key = ("sine",) if sine_family else tuple(keys)

    @classmethod
    def sine(cls) -> "IrrationalBasis":
        return cls(sine_family=True)

    def _independence_by_construction(self) -> bool:
        syms = self._symbols[1:]
        if any(not s.independence_guaranteed for s in syms):
            return False
        classes = [s.square_free_class() for s in syms if isinstance(s, SqrtSymbol)]
        if len(set(classes)) != len(classes):
            return False
        n_pi = sum(isinstance(s, PiSymbol) for s in syms)
        has_sin = self.sine_family or any(isinstance(s, SinSymbol) for s in syms)
        return n_pi <= 1 and not (n_pi and has_sin)

    def symbol(self, i: int) -> Symbol:
        if i < len(self._symbols):
            return self._symbols[i]
        if self.sine_family:
            return symbol_from_key(f"sin:{i}")
        raise IndexError(f"basis has {len(self._symbols)} symbols")

    def __len__(self):
        return len(self._symbols)

    @property
    def finite(self) -> bool:
        return not self.sine_family

    def __eq__(self, other):
        return isinstance(other, IrrationalBasis) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __repr__(self):
        if self.sine_family:
            return "IrrationalBasis.sine()"
        return f"IrrationalBasis({[s.key for s in self._symbols]!r})"

    # construction helpers
    def rational(self, value) -> "LinearForm":
        return LinearForm(self, (value,))

    def element(self, i: int, coeff=1) -> "LinearForm":
        self.symbol(i)
        return LinearForm.from_terms(self, [(i, coeff)])

    def form(self, coeffs: Iterable) -> "LinearForm":
        return LinearForm(self, tuple(coeffs))

    def to_json(self, length: int | None = None) -> list[str]:
        if self.sine_family:
            n = max(length or 1, 2)
            return ["1"] + [f"sin:{i}" for i in range(1, n)]
        return [s.key for s in self._symbols]

    @classmethod
    def from_json(cls, keys: Sequence[str], asserted_independent: bool = False) -> "IrrationalBasis":
        keys = [str(k) for k in keys]
        if len(keys) >= 2 and keys[0] == "1" and keys[1:] == [f"sin:{i}" for i in range(1, len(keys))]:
            return cls.sine()
        try:
            return cls(keys, asserted_independent=asserted_independent)
        except ValueError as exc:
            raise ParseError(str(exc)) from exc


# ---------------------------------------------------------------------------
# linear forms


class LinearForm:
    """Immutable ``sum(c_i * basis.symbol(i))`` with exact rational coefficients.

    Stored sparsely as ``terms``, the sorted ``(i, c_i)`` pairs with ``c_i != 0``;
    ``coeffs`` gives the dense vector.
    """

    __slots__ = ("basis", "terms", "_approx", "_err", "_hash")

    def __init__(self, basis: IrrationalBasis, coeffs: Sequence = ()):
        terms = []
        for i, c in enumerate(coeffs):
            c = _q(c)
            if c != 0:
                terms.append((i, c))
        if basis.finite and terms and terms[-1][0] >= len(basis):
            raise ValueError("more coefficients than basis symbols")
        self.basis = basis
        self.terms = tuple(terms)
        self._approx = None
        self._hash = None

    @classmethod
    def _raw(cls, basis, terms) -> "LinearForm":
        """Trusted constructor: sorted ``(i, c)`` pairs, normalised and non-zero."""
        self = object.__new__(cls)
        self.basis = basis
        self.terms = tuple(terms)
        self._approx = None
        self._hash = None
        return self

    @classmethod
    def from_terms(cls, basis: IrrationalBasis, terms) -> "LinearForm":
        acc: dict[int, object] = {}
        for i, c in terms:
            if i < 0:
                raise ValueError("basis positions are non-negative")
            acc[int(i)] = acc.get(int(i), 0) + _q(c)
        out = sorted((i, _q(c)) for i, c in acc.items() if c != 0)
        if basis.finite and out and out[-1][0] >= len(basis):
            raise ValueError("more coefficients than basis symbols")
        return cls._raw(basis, out)

    @property
    def coeffs(self) -> tuple:
        if not self.terms:
            return ()
        out = [0] * (self.terms[-1][0] + 1)
        for i, c in self.terms:
            out[i] = c
        return tuple(out)

    def _coerce(self, other) -> "LinearForm":
        if isinstance(other, LinearForm):
            if other.basis is not self.basis and other.basis != self.basis:
                raise BasisMismatch(f"{self.basis!r} vs {other.basis!r}")
            return other
        if isinstance(other, (int, Fraction, Rational)):
            return LinearForm(self.basis, (other,))
        return NotImplemented

    def _combine(self, other, k) -> "LinearForm":
        """``self + k*other`` for ``k`` in ``{1, -1}``."""
        acc = dict(self.terms)
        for i, c in other.terms:
            acc[i] = acc.get(i, 0) + k * c
        return LinearForm._raw(self.basis, sorted((i, _q(c)) for i, c in acc.items() if c != 0))

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self._combine(other, 1)

    __radd__ = __add__

    def __neg__(self):
        return LinearForm._raw(self.basis, [(i, -c) for i, c in self.terms])

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self._combine(other, -1)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, k):
        if not isinstance(k, (int, Fraction, Rational)):
            return NotImplemented
        k = _q(k)
        if k == 0:
            return LinearForm._raw(self.basis, ())
        return LinearForm._raw(self.basis, [(i, _q(c * k)) for i, c in self.terms])

    __rmul__ = __mul__

    def __truediv__(self, k):
        if not isinstance(k, (int, Fraction, Rational)):
            return NotImplemented
        return self * (1 / Fraction(k))

    def __eq__(self, other):
        if isinstance(other, LinearForm):
            return self.basis == other.basis and self.terms == other.terms
        if isinstance(other, (int, Fraction)):
            return self.terms == LinearForm(self.basis, (other,)).terms
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.basis, self.terms))
        return self._hash

    def __repr__(self):
        return f"LinearForm({self})"

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for i, c in self.terms:
            sym = "" if i == 0 else f"*{self.basis.symbol(i).key}"
            parts.append(f"{c}{sym}")
        return " + ".join(parts).replace("+ -", "- ")

    @property
    def is_rational(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and self.terms[0][0] == 0)

    def rational_value(self) -> Fraction:
        if not self.is_rational:
            raise ValueError("form has irrational part")
        return Fraction(self.terms[0][1]) if self.terms else Fraction(0)

    def coefficient(self, i: int):
        for j, c in self.terms:
            if j == i:
                return c
        return 0

    @property
    def approx(self) -> float:
        """Float estimate; not used for decisions without an error bound."""
        if self._approx is None:
            self._approx, self._err = _float_with_bound(self)
        return self._approx

    @property
    def approx_error(self) -> float:
        """Rigorous bound on ``|approx - value|``."""
        if self._approx is None:
            self._approx, self._err = _float_with_bound(self)
        return self._err

    def __float__(self):
        return self.approx

    def to_json(self) -> dict:
        n = self.terms[-1][0] + 1 if self.terms else 1
        keys = self.basis.to_json(n)
        dense = dict(self.terms)
        coeffs = [rational_to_json(dense.get(i, 0)) for i in range(len(keys))]
        return {"basis": keys, "coeffs": coeffs}

    @classmethod
    def from_json(cls, obj, basis: IrrationalBasis | None = None) -> "LinearForm":
        try:
            parsed = IrrationalBasis.from_json(obj["basis"])
            coeffs = [parse_rational(c) for c in obj["coeffs"]]
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed linear form: {obj!r}") from exc
        if len(coeffs) != len(obj["basis"]):
            raise ParseError("coefficient count does not match basis length")
        if basis is not None and parsed != basis:
            if len(parsed) == 1 and basis.finite is parsed.finite:
                parsed = basis  # a rational written over the bare unit basis
            else:
                raise BasisMismatch(f"form basis {obj['basis']} does not match {basis!r}")
        return cls(parsed, coeffs)


def _float_with_bound(form: LinearForm) -> tuple[float, float]:
    """Float value of ``form`` and a rigorous bound on its absolute error."""
    total = 0.0
    mag = 0.0
    try:
        for i, c in form.terms:
            t = float(c) if i == 0 else float(c) * form.basis.symbol(i).approx
            total += t
            mag += abs(t)
    except OverflowError:
        return math.nan, math.inf
    if not math.isfinite(total) or not math.isfinite(mag):
        return math.nan, math.inf
    return total, (len(form.terms) + 3) * mag * _FLOAT_EPS + 1e-290


def _integer_view(form: LinearForm) -> tuple[int, list[tuple[int, int]]]:
    """Common denominator and the integer numerators ``(i, n_i)``."""
    den = 1
    for _, c in form.terms:
        if isinstance(c, Fraction):
            den = den * c.denominator // math.gcd(den, c.denominator)
    return den, [(i, int(c * den)) for i, c in form.terms]


def _enclose_scaled(form: LinearForm, nums: list[tuple[int, int]], q: int) -> tuple[int, int]:
    """Integers ``lo <= den * value * 2**q <= hi``."""
    lo = hi = 0
    for i, n in nums:
        if i == 0:
            lo += n << q
            hi += n << q
            continue
        m = form.basis.symbol(i).scaled_floor(q)
        if n > 0:
            lo += n * m
            hi += n * (m + 1)
        else:
            lo += n * (m + 1)
            hi += n * m
    return lo, hi


def sign(form: LinearForm) -> int:
    """Exact sign of a linear form.

    Zero exactly when every coefficient is zero; otherwise enclosures are
    refined (16, 32, 64, ... bits) until they exclude zero.
    """
    if form.is_rational:
        if not form.terms:
            return 0
        return 1 if form.terms[0][1] > 0 else -1
    value, err = _float_with_bound(form)
    if value > err:
        return 1
    if value < -err:
        return -1
    _, nums = _integer_view(form)
    cap = limits.current().precision_cap
    q = _START_BITS
    while True:
        lo, hi = _enclose_scaled(form, nums, q)
        if lo > 0:
            return 1
        if hi < 0:
            return -1
        if q >= cap:
            raise PrecisionCapExceeded(f"sign of {form} unresolved at {q} bits")
        q = min(2 * q, cap)


def compare(f1: LinearForm, f2) -> int:
    """-1, 0 or 1 as ``f1`` is less than, equal to or greater than ``f2``."""
    if type(f2) is LinearForm:
        if f2.basis is not f1.basis and f2.basis != f1.basis:
            raise BasisMismatch(f"{f1.basis!r} vs {f2.basis!r}")
        # float filter: decide when the enclosures of both values are disjoint
        x = f1._approx
        if x is None:
            x = f1.approx
        y = f2._approx
        if y is None:
            y = f2.approx
        diff = x - y
        err = (f1._err + f2._err) * 1.0000001 + (abs(x) + abs(y)) * 2.0**-52 + 1e-300
        if diff > err:
            return 1
        if diff < -err:
            return -1
        if f1.terms == f2.terms:
            return 0
    return sign(f1 - f2)


def refine(form: LinearForm, p: int) -> "RationalInterval":
    """Dyadic enclosure ``[k/2**p, (k+1)/2**p]`` of the form's value.

    Rational forms come back as a point.  Because ``k = floor(value * 2**p)``
    the enclosures are nested in ``p``.
    """
    if p < 0:
        raise ValueError("precision must be non-negative")
    if form.is_rational:
        v = form.rational_value()
        return RationalInterval(v, v)
    den, nums = _integer_view(form)
    cap = limits.current().precision_cap
    extra = 8 + sum(abs(n) for i, n in nums if i).bit_length()
    q = p + extra
    while True:
        lo, hi = _enclose_scaled(form, nums, q)
        scale = den << (q - p)
        k = lo // scale
        if hi // scale == k:
            return RationalInterval(Fraction(k, 1 << p), Fraction(k + 1, 1 << p))
        if q - p > cap:
            raise PrecisionCapExceeded(f"refinement of {form} to 2**-{p} failed")
        q = p + 2 * (q - p)


def floor_multiple(a: LinearForm, step: LinearForm) -> tuple[int, LinearForm]:
    """Largest ``k >= 1`` with ``k*step < a`` (and ``k*step``), else ``(0, 0)``.

    Decided by a bracketing binary search on k using exact sign tests; the
    float estimate only seeds the bracket.
    """
    if sign(step) <= 0:
        raise ValueError("step must be positive")
    zero = step * 0
    if compare(step, a) >= 0:
        return 0, zero

    def below(k):  # k*step < a
        return sign(a - step * k) > 0

    guess = a.approx / step.approx if step.approx > 0 else math.nan
    if math.isfinite(guess) and guess < 2**62:
        g = max(1, int(guess))
        if below(g) and not below(g + 1):
            return g, step * g
        lo = g - 1 if g > 1 and below(g - 1) else 1
        hi = g + 2
    else:
        lo, hi = 1, 2
    while below(hi):
        lo, hi = hi, 2 * hi
    if not below(lo):
        lo = 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if below(mid):
            lo = mid
        else:
            hi = mid
    return lo, step * lo


def rational_between(x, y) -> Fraction:
    """A rational strictly between ``x < y`` (forms or rationals)."""
    x_rat = not isinstance(x, LinearForm) or x.is_rational
    y_rat = not isinstance(y, LinearForm) or y.is_rational
    if x_rat and y_rat:
        fx = x.rational_value() if isinstance(x, LinearForm) else Fraction(x)
        fy = y.rational_value() if isinstance(y, LinearForm) else Fraction(y)
        if fx >= fy:
            raise ValueError("empty interval")
        return (fx + fy) / 2
    p = _START_BITS
    cap = limits.current().precision_cap
    while True:
        hi_x = refine(x, p).hi if isinstance(x, LinearForm) else Fraction(x)
        lo_y = refine(y, p).lo if isinstance(y, LinearForm) else Fraction(y)
        if hi_x < lo_y:
            return (hi_x + lo_y) / 2
        if p >= cap:
            raise PrecisionCapExceeded("interval endpoints do not separate")
        p *= 2


def sort_forms(forms: Sequence[LinearForm]) -> list[int]:
    """Indices of ``forms`` in ascending value order (stable for equal values).

    Floats give a candidate order which is then certified pairwise; any
    disagreement falls back to a fully exact sort.
    """
    order = sorted(range(len(forms)), key=lambda i: forms[i].approx)
    for a, b in zip(order, order[1:]):
        c = compare(forms[a], forms[b])
        if c > 0 or (c == 0 and a > b):
            return sorted(range(len(forms)), key=cmp_to_key(
                lambda i, j: compare(forms[i], forms[j]) or (i > j) - (i < j)))
    return order


def count_below(sorted_forms: Sequence[LinearForm], approxes: Sequence[float], x: LinearForm) -> int:
    """Number of entries of an ascending list strictly less than ``x``."""
    j = bisect.bisect_left(approxes, x.approx)
    while j > 0 and compare(sorted_forms[j - 1], x) >= 0:
        j -= 1
    while j < len(sorted_forms) and compare(sorted_forms[j], x) < 0:
        j += 1
    return j


# ---------------------------------------------------------------------------
# intervals


@dataclass(frozen=True)
class RationalInterval:
    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        object.__setattr__(self, "lo", Fraction(self.lo))
        object.__setattr__(self, "hi", Fraction(self.hi))
        if self.lo > self.hi:
            raise ValueError("interval lower end exceeds upper end")

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def midpoint(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def contains(self, x) -> bool:
        return self.lo <= x <= self.hi

    def __contains__(self, x):
        return self.contains(x)

    def issubset(self, other: "RationalInterval") -> bool:
        return other.lo <= self.lo and self.hi <= other.hi

    def to_json(self) -> dict:
        return {"lo": rational_to_json(self.lo), "hi": rational_to_json(self.hi)}

    @classmethod
    def from_json(cls, obj) -> "RationalInterval":
        try:
            return cls(parse_rational(obj["lo"]), parse_rational(obj["hi"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed rational interval: {obj!r}") from exc


@dataclass(frozen=True)
class Bracket:
    """Open interval with exact linear-form endpoints."""

    lo: LinearForm
    hi: LinearForm

    def __post_init__(self):
        if compare(self.lo, self.hi) >= 0:
            raise ValueError("bracket must have lo < hi")

    @classmethod
    def from_rational(cls, basis: IrrationalBasis, interval: RationalInterval) -> "Bracket":
        return cls(basis.rational(interval.lo), basis.rational(interval.hi))

    @property
    def width(self) -> LinearForm:
        return self.hi - self.lo

    def contains(self, x: LinearForm) -> bool:
        return compare(self.lo, x) < 0 < compare(self.hi, x)

    def issubset(self, other: "Bracket") -> bool:
        return compare(other.lo, self.lo) <= 0 and compare(self.hi, other.hi) <= 0

    def rational_inside(self) -> Fraction:
        return rational_between(self.lo, self.hi)

    def to_json(self) -> dict:
        return {"lo": self.lo.to_json(), "hi": self.hi.to_json()}

    @classmethod
    def from_json(cls, obj, basis: IrrationalBasis | None = None) -> "Bracket":
        try:
            return cls(LinearForm.from_json(obj["lo"], basis), LinearForm.from_json(obj["hi"], basis))
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed bracket: {obj!r}") from exc
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(str(exc)) from exc
