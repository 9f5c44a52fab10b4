"""Encode a finite relation ``A`` into three reals and decode it back.

The encoder builds three chains of finite approximations ``(L_{i,n}, R_{i,n})``
up to a strictly increasing sequence of bounds ``d_0 < d_1 < ...``:

* chain 1 has left set ``{d_0, ..., d_n}``, so the successor function on
  ``L(c_1)`` walks the bounds;
* chain 2 gains a left point in ``[d_{n-1}, d_n]`` exactly when step ``n``
  starts a new tuple;
* chain 3 is steered into an interval on which ``g`` returns the wanted
  tuple entry.

Decoding reads the tuples back from ``L(c_1)``, ``L(c_2)`` and the left/right
best approximations of ``c_3``.
"""

from __future__ import annotations

import bisect
import logging
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from . import limits
from .engine import (
    FiniteApproximation,
    _right_extend,
    best_approximations,
    best_left,
    chain_from_json,
    chain_to_json,
    find_split,
    gap,
    is_valid,
    limit_interval,
)
from .errors import (
    CodecError,
    DepthExhausted,
    DuplicateTuple,
    InvalidInput,
    InvariantViolation,
    ParseError,
    SearchCapExceeded,
)
from .numeric import Bracket, LinearForm, compare, rational_between, refine
from .systems import (
    ApproximationSystem,
    SystemDescriptor,
    as_param,
    system_from_json,
    verify_condition_ii,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TupleSet:
    m: int
    tuples: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise InvalidInput("arity m must be a positive integer")
        rows = []
        seen = set()
        for row in self.tuples:
            row = tuple(int(x) for x in row)
            if len(row) != self.m:
                raise InvalidInput(f"tuple {row} does not have arity {self.m}")
            if any(x < 1 for x in row):
                raise InvalidInput(f"tuple {row} has an entry below 1")
            if row in seen:
                raise DuplicateTuple(f"duplicate tuple {list(row)}")
            seen.add(row)
            rows.append(row)
        object.__setattr__(self, "tuples", tuple(rows))

    def __len__(self):
        return len(self.tuples)

    def to_json(self) -> dict:
        return {"m": str(self.m), "tuples": [[str(x) for x in row] for row in self.tuples]}

    @classmethod
    def from_json(cls, obj) -> "TupleSet":
        try:
            m = int(obj["m"])
            rows = [tuple(int(x) for x in row) for row in obj["tuples"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed tuple set: {exc}") from exc
        return cls(m, tuple(rows))


@dataclass(frozen=True)
class EncodedParameter:
    system: SystemDescriptor
    m: int
    n_tuples: int
    final_depth: int
    chains: tuple[tuple[FiniteApproximation, ...], ...]
    brackets: tuple[Bracket, Bracket, Bracket]

    @property
    def depths(self) -> list[int]:
        return [entry.d for entry in self.chains[0]]

    def to_json(self) -> dict:
        return {
            "system": self.system.to_json(),
            "m": str(self.m),
            "n_tuples": str(self.n_tuples),
            "final_depth": str(self.final_depth),
            "chains": [chain_to_json(ch) for ch in self.chains],
            "brackets": [b.to_json() for b in self.brackets],
        }

    @classmethod
    def from_json(cls, obj) -> "EncodedParameter":
        try:
            desc = SystemDescriptor.from_json(obj["system"])
            system = desc.build()
            chains = tuple(tuple(chain_from_json(ch)) for ch in obj["chains"])
            brackets = tuple(Bracket.from_json(b, system.basis) for b in obj["brackets"])
            param = cls(desc, int(obj["m"]), int(obj["n_tuples"]), int(obj["final_depth"]),
                        chains, brackets)
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed encoded parameter: {exc}") from exc
        except ValueError as exc:
            if isinstance(exc, CodecError):
                raise
            raise ParseError(f"malformed encoded parameter: {exc}") from exc
        if len(param.chains) != 3 or len(param.brackets) != 3:
            raise ParseError("encoded parameter needs three chains and three brackets")
        if any(not ch or ch[-1].d != param.final_depth for ch in param.chains):
            raise ParseError("chains must end at final_depth")
        return param


def _require(cond: bool, what: str) -> None:
    if not cond:
        raise InvariantViolation(what)


class _Collision(Exception):
    """A value ``f(e)`` landed exactly on the chosen rational point."""


class _Tracker:
    """Running best left/right approximations of a fixed point ``c``."""

    def __init__(self, system, c: LinearForm, L=(), R=(), d=0):
        self.system = system
        self.c = c
        self.L = list(L)
        self.R = list(R)
        self.d = d
        self.lo, self.hi = gap(system, self.L, self.R)

    def advance(self, e: int) -> None:
        fe = self.system.f(e)
        self.d = e
        if self.lo is not None and compare(fe, self.lo) < 0:
            return
        if self.hi is not None and compare(fe, self.hi) > 0:
            return
        s = compare(fe, self.c)
        if s == 0:
            raise _Collision(e)
        if s < 0:
            self.L.append(e)
            self.lo = fe
        else:
            self.R.append(e)
            self.hi = fe

    def snapshot(self) -> FiniteApproximation:
        return FiniteApproximation(tuple(self.L), tuple(self.R), self.d)


def _scan_first(system, start: int, pred, what: str) -> int:
    cap = limits.current().search_cap
    for e in range(start, start + cap):
        if pred(e):
            return e
    raise SearchCapExceeded(f"{what}: nothing found within {cap} steps of {start}")


def _interior_points(b1: Fraction, b2: Fraction):
    """Rational points of ``(b1, b2)``: the midpoint first, then other dyadic splits."""
    yield (b1 + b2) / 2
    k = 2
    while True:
        for j in range(1, 2**k, 2):
            yield b1 + (b2 - b1) * Fraction(j, 2**k)
        k += 1


class Encoder:
    """One run of the inductive construction; see :func:`encode`."""

    def __init__(self, system: ApproximationSystem, A: TupleSet, check: bool = True):
        if not A.tuples:
            raise InvalidInput("cannot encode an empty tuple set")
        self.system = system
        self.A = A
        self.check = check
        self.m = A.m
        self.N = len(A.tuples)
        self.chains: list[list[FiniteApproximation]] = [[], [], []]
        self.depths: list[int] = []

    # -- step 0 -------------------------------------------------------------
    def base(self) -> None:
        sysm = self.system
        top = max(max(row) for row in self.A.tuples)
        low = sysm.f(1)
        for e in range(2, top + 1):
            if compare(sysm.f(e), low) < 0:
                low = sysm.f(e)
        d0 = _scan_first(sysm, top + 1, lambda e: compare(sysm.f(e), low) < 0, "d_0")
        second = None
        for e in range(1, d0):
            if second is None or compare(sysm.f(e), second) < 0:
                second = sysm.f(e)
        a = rational_between(sysm.f(d0), second)
        L1, R1 = best_approximations(sysm, a, d0)
        _require(L1 == [d0], "chain 1 starts with L = {d_0}")
        ch1 = FiniteApproximation(tuple(L1), tuple(R1), d0)
        ch2 = _right_extend(sysm, FiniteApproximation((), (), 0), d0)
        # chain 3: L = {first index below the middle of U}, R by right extension
        u_lo, u_hi = sysm.U
        middle = (u_lo + u_hi) / 2
        k = next((e for e in range(1, d0 + 1) if compare(sysm.f(e), middle) < 0), d0)
        before = _right_extend(sysm, FiniteApproximation((), (), 0), k - 1)
        ch3 = _right_extend(sysm, FiniteApproximation((k,), before.R, k), d0)
        if not ch3.R:
            # k = 1 holds the largest value; put c just below it instead
            second = None
            for e in range(2, d0 + 1):
                if second is None or compare(sysm.f(e), second) > 0:
                    second = sysm.f(e)
            c_star = rational_between(second, sysm.f(1))
            L3, R3 = best_approximations(sysm, c_star, d0)
            ch3 = FiniteApproximation(tuple(L3), tuple(R3), d0)
        _require(bool(ch3.L) and bool(ch3.R), "chain 3 starts with both sides non-empty")
        self.depths.append(d0)
        for i, ch in enumerate((ch1, ch2, ch3)):
            self.chains[i].append(ch)
        self._verify_step(0)

    # -- step n -------------------------------------------------------------
    def step(self, n: int) -> None:
        sysm = self.system
        s, t = divmod(n - 1, self.m)
        t += 1
        target = self.A.tuples[s][t - 1]
        d_prev = self.depths[-1]
        ch1, ch2, ch3 = (ch[-1] for ch in self.chains)

        lo2, hi2 = gap(sysm, ch2.L, ch2.R)

        def in_gap2(e):
            fe = sysm.f(e)
            return ((lo2 is None or compare(fe, lo2) > 0)
                    and (hi2 is None or compare(fe, hi2) < 0))

        d = find_split(sysm, d_prev, also=in_gap2 if t == 1 else None)

        a3, b3_top = gap(sysm, ch3.L, ch3.R)
        window = verify_condition_ii(sysm, a3, b3_top, d_prev, target)
        b1, b2 = window.lo, window.hi
        f_b1, f_b2 = sysm.point(b1), sysm.point(b2)

        for b3 in _interior_points(b1, b2):
            try:
                tracker = _Tracker(sysm, sysm.point(b3), ch3.L, ch3.R, ch3.d)
                cap = limits.current().search_cap
                e = ch3.d
                while True:
                    e += 1
                    if e - ch3.d > cap:
                        raise SearchCapExceeded(f"d' not found within {cap} steps")
                    tracker.advance(e)
                    if (e > d and tracker.L and tracker.R
                            and compare(tracker.lo, f_b1) > 0 and compare(tracker.hi, f_b2) < 0):
                        break
                d_dash = e
                R1 = _right_extend(sysm, ch1, d_dash)
                lo1, hi1 = gap(sysm, R1.L, R1.R)
                d_n = _scan_first(
                    sysm, d_dash + 1,
                    lambda x: compare(sysm.f(x), lo1) > 0 and compare(sysm.f(x), hi1) < 0, "d_n")
                for x in range(d_dash + 1, d_n + 1):
                    tracker.advance(x)
                break
            except _Collision:
                log.debug("b3=%s collides with an f-value; trying another point", b3)
        new1 = FiniteApproximation(R1.L + (d_n,), R1.R, d_n)
        if t != 1:
            new2 = _right_extend(sysm, ch2, d_n)
        else:
            e2 = _scan_first(sysm, d_prev + 1, in_gap2, "chain-2 left point")
            _require(e2 < d_n, "chain-2 left point precedes d_n")
            new2 = _right_extend(sysm, FiniteApproximation(ch2.L + (e2,), ch2.R, e2), d_n)
        new3 = tracker.snapshot()
        self.depths.append(d_n)
        for i, ch in enumerate((new1, new2, new3)):
            self.chains[i].append(ch)
        self._verify_step(n, target=target, window=(a3, b3_top, d_prev))

    # -- invariants ---------------------------------------------------------
    def _verify_step(self, n: int, target=None, window=None) -> None:
        d_n = self.depths[n]
        ch1, ch2, ch3 = (ch[n] for ch in self.chains)
        _require(all(ch.d == d_n for ch in (ch1, ch2, ch3)), "chain bounds equal d_n")
        _require(list(ch1.L) == self.depths[: n + 1], f"step {n}: chain-1 left set is the depth list")
        upto = min(n, self.N - 1)
        _require(all(d_n >= x for row in self.A.tuples[: upto + 1] for x in row), f"step {n}: depth bounds the tuple entries read so far")
        if n >= 1:
            _require(d_n > self.depths[n - 1], "bounds strictly increase")
            for i in range(3):
                _require(self.chains[i][n].extends(self.chains[i][n - 1]), f"chain {i + 1} extends at step {n}")
            t = (n - 1) % self.m + 1
            d_prev = self.depths[n - 1]
            hit = any(d_prev <= x <= d_n for x in ch2.L)
            _require(hit == (t == 1), f"step {n}: chain 2 gains a left point exactly when a tuple starts")
            a3, b3, dp = window
            lo, hi = gap(self.system, ch3.L, ch3.R)
            got = self.system.g(Bracket(lo, hi), a3, b3, dp)
            _require(got == target, f"step {n}: g on the chain-3 bracket is {got}, want {target}")
        if self.check:
            for i, ch in enumerate((ch1, ch2, ch3)):
                _require(is_valid(self.system, ch), f"chain {i + 1} entry {n} is a finite approximation")

    def run(self) -> EncodedParameter:
        self.base()
        for n in range(1, self.m * self.N + 1):
            self.step(n)
            log.debug("step %d: d_n=%d", n, self.depths[-1])
        brackets = tuple(limit_interval(self.system, ch) for ch in self.chains)
        return EncodedParameter(
            system=self.system.descriptor(),
            m=self.m,
            n_tuples=self.N,
            final_depth=self.depths[-1],
            chains=tuple(tuple(ch) for ch in self.chains),
            brackets=brackets,
        )


def encode(system: ApproximationSystem, A: TupleSet, check: bool = True) -> EncodedParameter:
    """Run the ``m*N``-step construction and return the three chains with their brackets."""
    return Encoder(system, A, check=check).run()


def condition_iv_witness(system: ApproximationSystem, chain3_prev: FiniteApproximation, d_prev: int,
                         target: int) -> tuple[LinearForm, LinearForm]:
    """Interval ``(b1, b2)`` inside the chain-3 bracket on which ``g`` is ``target``."""
    if not d_prev >= target:
        raise InvalidInput("the target must not exceed d_prev")
    a, b = gap(system, chain3_prev.L, chain3_prev.R)
    if a is None or b is None:
        raise InvalidInput("chain-3 entry needs non-empty sides")
    w = verify_condition_ii(system, a, b, d_prev, target)
    return system.point(w.lo), system.point(w.hi)


# ---------------------------------------------------------------------------
# decoding


def _prefix_last(idx: Sequence[int], bound: int):
    k = bisect.bisect_right(idx, bound)
    return idx[k - 1] if k else None


def decode(system: ApproximationSystem, param, m: int, count: int, depth: int | None = None,
           via_chains: bool = True) -> TupleSet:
    """Read ``count`` tuples of arity ``m`` out of the parameter.

    ``param`` is an :class:`EncodedParameter` or a triple of parameter values
    (exact forms, rationals or brackets).  With an encoded parameter the
    left/right sets come from the stored chains unless ``via_chains`` is off,
    in which case they are recomputed from the brackets up to ``depth``.
    """
    if count < 0:
        raise InvalidInput("count must be non-negative")
    if isinstance(param, EncodedParameter):
        if depth is None:
            depth = param.final_depth
        c3 = param.brackets[2]
        if via_chains and depth == param.final_depth:
            L1 = list(param.chains[0][-1].L)
            L2 = list(param.chains[1][-1].L)
            L3 = list(param.chains[2][-1].L)
            R3 = list(param.chains[2][-1].R)
        else:
            L1 = best_left(system, param.brackets[0], depth)
            L2 = best_left(system, param.brackets[1], depth)
            L3, R3 = best_approximations(system, c3, depth)
    else:
        if depth is None:
            raise InvalidInput("decoding raw parameters needs a depth")
        c1, c2, c3 = (as_param(system.basis, c) for c in param)
        L1 = best_left(system, c1, depth)
        L2 = best_left(system, c2, depth)
        L3, R3 = best_approximations(system, c3, depth)
    u_lo, u_hi = system.U
    rows: list[tuple[int, ...]] = []
    seen = set()
    for k, e in enumerate(L1):
        if len(rows) >= count:
            break
        if k + 1 >= len(L1):
            break  # successor of e is beyond depth; membership undecidable
        nxt = L1[k + 1]
        j = bisect.bisect_left(L2, e)
        if not (j < len(L2) and L2[j] <= nxt):
            continue
        if k + m - 1 >= len(L1):
            raise DepthExhausted(f"tuple starting at {e} needs {m - 1} successors within depth")
        row = []
        for i in range(1, m + 1):
            di = L1[k + i - 1]
            left = _prefix_last(L3, di)
            right = _prefix_last(R3, di)
            a = system.f(left) if left is not None else u_lo
            b = system.f(right) if right is not None else u_hi
            row.append(system.g(c3, a, b, di))
        row = tuple(row)
        if row not in seen:
            seen.add(row)
            rows.append(row)
    return TupleSet(m, tuple(rows))


def x_c(system: ApproximationSystem, param: EncodedParameter, via_chains: bool = True) -> list[int]:
    """Tuple start markers: ``e`` in ``L(c_1)`` with a point of ``L(c_2)`` in ``[e, succ(e)]``."""
    if via_chains:
        L1 = list(param.chains[0][-1].L)
        L2 = list(param.chains[1][-1].L)
    else:
        L1 = best_left(system, param.brackets[0], param.final_depth)
        L2 = best_left(system, param.brackets[1], param.final_depth)
    out = []
    for k in range(len(L1) - 1):
        j = bisect.bisect_left(L2, L1[k])
        if j < len(L2) and L2[j] <= L1[k + 1]:
            out.append(L1[k])
    return out


def points_inside(bracket: Bracket, k: int, rng: random.Random) -> list[Fraction]:
    """``k`` random rationals strictly inside an open bracket."""
    p = 16
    cap = limits.current().precision_cap
    while True:
        lo = refine(bracket.lo, p).hi
        hi = refine(bracket.hi, p).lo
        if lo < hi:
            break
        if p >= cap:
            raise DepthExhausted("bracket too narrow for the precision cap")
        p *= 2
    out = []
    for _ in range(k):
        t = Fraction(rng.randrange(1, 2**20), 2**20)
        out.append(lo + (hi - lo) * t)
    return out


# ---------------------------------------------------------------------------
# covering open sets


def cover_open_set(system: ApproximationSystem, boxes, margin, depth: int) -> list[tuple[int, ...]]:
    """Index boxes ``(s_1..s_m, r_1..r_m)`` with f-boxes inside ``W`` covering ``W`` shrunk by ``margin``.

    ``boxes`` is a list of boxes, each a sequence of ``(lo, hi)`` rational
    pairs, one per coordinate.
    """
    margin = Fraction(margin)
    if margin <= 0:
        raise InvalidInput("margin must be positive")
    if not boxes:
        return []
    u_lo, u_hi = system.U
    order = system.sorted_indices(depth)
    svals = [system.f(i) for i in order]
    out: list[tuple[int, ...]] = []
    for box in boxes:
        per_axis = []
        for lo, hi in box:
            lo, hi = Fraction(lo), Fraction(hi)
            if compare(system.point(lo), u_lo) < 0 or compare(system.point(hi), u_hi) > 0:
                raise InvalidInput("W must lie inside U^m")
            if hi - lo <= 2 * margin:
                per_axis = None
                break
            per_axis.append(_cover_interval(system, order, svals, lo, hi, margin))
        if per_axis is None:
            continue
        for combo in _product(per_axis):
            s = tuple(pair[0] for pair in combo)
            r = tuple(pair[1] for pair in combo)
            out.append(s + r)
    return out


def _product(lists):
    if not lists:
        yield ()
        return
    for head in lists[0]:
        for rest in _product(lists[1:]):
            yield (head,) + rest


def _cover_interval(system, order, svals, lo: Fraction, hi: Fraction, margin: Fraction):
    """Pairs ``(s, r)`` with ``(f(s), f(r))`` inside ``(lo, hi)`` covering ``[lo+margin, hi-margin]``."""
    P = system.point
    inner_lo, inner_hi = lo + margin, hi - margin
    pts = [(i, v) for i, v in zip(order, svals)
           if compare(v, P(lo)) > 0 and compare(v, P(hi)) < 0]
    first = [k for k, (_, v) in enumerate(pts) if compare(v, P(inner_lo)) < 0]
    last = [k for k, (_, v) in enumerate(pts) if compare(v, P(inner_hi)) > 0]
    if not first or not last:
        raise DepthExhausted("f(D) within depth is too sparse to realise the margin")
    chosen = pts[first[-1]: last[0] + 1]
    if len(chosen) == 2:
        return [(chosen[0][0], chosen[1][0])]
    # consecutive open intervals (p_k, p_{k+2}) overlap and cover every p_{k+1}
    return [(chosen[k][0], chosen[k + 2][0]) for k in range(len(chosen) - 2)]


# ---------------------------------------------------------------------------
# round trips


@dataclass(frozen=True)
class RoundtripLimits:
    m_values: tuple[int, ...] = (1, 2, 3)
    max_tuples: int = 6
    max_index: int = 20

    def to_json(self) -> dict:
        return {"m_values": list(self.m_values), "max_tuples": self.max_tuples,
                "max_index": self.max_index}


def random_tuple_set(rng: random.Random, lim: RoundtripLimits) -> TupleSet:
    m = rng.choice(lim.m_values)
    n = rng.randint(1, min(lim.max_tuples, lim.max_index**m))
    rows: list[tuple[int, ...]] = []
    seen = set()
    while len(rows) < n:
        row = tuple(rng.randint(1, lim.max_index) for _ in range(m))
        if row not in seen:
            seen.add(row)
            rows.append(row)
    return TupleSet(m, tuple(rows))


def run_trial(system: ApproximationSystem, A: TupleSet, bracket_points: int = 0,
              rng: random.Random | None = None) -> dict:
    """Encode, decode and compare one tuple set; errors are captured, not raised."""
    entry: dict = {"m": A.m, "tuples": [list(r) for r in A.tuples]}
    start = time.perf_counter()
    try:
        param = encode(system, A)
        back = decode(system, param, A.m, len(A))
        ok = back.tuples == A.tuples
        entry.update(
            final_depth=param.final_depth,
            depths=param.depths,
            bracket_widths=[f"{b.width.approx:.6e}" for b in param.brackets],
        )
        if ok and bracket_points:
            rng = rng or random.Random(0)
            pts = [points_inside(b, bracket_points, rng) for b in param.brackets]
            for k in range(bracket_points):
                raw = (pts[0][k], pts[1][k], pts[2][k])
                again = decode(system, raw, A.m, len(A), depth=param.final_depth)
                if again.tuples != A.tuples:
                    ok = False
                    entry["error"] = "bracket_point_mismatch"
                    break
        entry["ok"] = ok
        if not ok and "error" not in entry:
            entry["error"] = "roundtrip_mismatch"
            entry["decoded"] = [list(r) for r in back.tuples]
    except CodecError as exc:
        entry.update(ok=False, error=exc.code, message=str(exc))
    entry["_seconds"] = time.perf_counter() - start
    return entry


def _trial_worker(args):
    desc, rows, m, cap_kwargs, bracket_points, seed = args
    with limits.using(**cap_kwargs):
        system = system_from_json(desc)
        return run_trial(system, TupleSet(m, rows), bracket_points, random.Random(seed))


def roundtrip(system: ApproximationSystem, trials: int, seed: int,
              lim: RoundtripLimits = RoundtripLimits(), bracket_points: int = 0,
              workers: int = 1, timing: bool = False) -> dict:
    """Seeded encode/decode trials.  The report is deterministic unless ``timing`` is set."""
    rng = random.Random(seed)
    sets = [random_tuple_set(rng, lim) for _ in range(trials)]
    seeds = [rng.getrandbits(64) for _ in range(trials)]
    cur = limits.current()
    caps = {"precision_cap": cur.precision_cap, "search_cap": cur.search_cap, "depth_cap": cur.depth_cap}
    jobs = [(system.to_json(), A.tuples, A.m, caps, bracket_points, s) for A, s in zip(sets, seeds)]
    if workers > 1 and trials > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_trial_worker, jobs))
    else:
        results = [run_trial(system, A, bracket_points, random.Random(s)) for A, s in zip(sets, seeds)]
    entries = []
    total = 0.0
    for i, res in enumerate(results):
        secs = res.pop("_seconds")
        total += secs
        if timing:
            res["seconds"] = round(secs, 3)
        entries.append({"index": i, **res})
    ok = sum(1 for e in entries if e["ok"])
    report = {
        "system": system.to_json(),
        "seed": str(seed),
        "limits": lim.to_json(),
        "trials": entries,
        "summary": {"trials": trials, "successes": ok, "failures": trials - ok},
    }
    if timing:
        report["summary"]["seconds"] = round(total, 3)
    return report
