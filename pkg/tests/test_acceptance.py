"""Acceptance criteria, one test and one printed PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines are printed
even when output capture is on.
"""

import random
import time
from fractions import Fraction
from itertools import combinations

import pytest

from approx_codec import limits
from approx_codec.codec import RoundtripLimits, TupleSet, decode, encode, points_inside, roundtrip
from approx_codec.engine import (
    FiniteApproximation,
    best_approximations,
    best_left,
    best_right,
    gap,
    is_finite_approximation,
    recoverability_check,
    right_extension,
)
from approx_codec.errors import CodecError, EmptyGap
from approx_codec.numeric import Bracket
from approx_codec.systems import FieldSystem, KroneckerSystem, SineSystem, van_der_corput, verify_condition_ii

import oracles


@pytest.fixture
def verdict(capsys):
    def report(number, ok, text):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'}  criterion {number}: {text}")
        assert ok, f"criterion {number}: {text}"
    return report


def test_criterion_1_kronecker_roundtrip(verdict):
    start = time.perf_counter()
    rep = roundtrip(KroneckerSystem(), 200, seed=20240601, lim=RoundtripLimits((1, 2, 3), 6, 20))
    elapsed = time.perf_counter() - start
    s = rep["summary"]
    errors = {}
    for t in rep["trials"]:
        if not t["ok"]:
            errors[t["error"]] = errors.get(t["error"], 0) + 1
    verdict(1, s["successes"] == 200 and elapsed < 600,
            f"KRON(sqrt2,sqrt3) round trip {s['successes']}/200 exact in {elapsed:.0f}s "
            f"(need 200/200 under 600s); failures by code: {errors}")


def test_criterion_2_definition_one_oracle(verdict):
    system = KroneckerSystem()
    F = oracles.Values(system)
    rng = random.Random(2)
    bad = 0
    for _ in range(500):
        c = Fraction(rng.randint(1, 10**6), rng.randint(1, 10**6)) % 2
        depth = rng.randint(1, 200)
        if best_left(system, c, depth) != oracles.best_left(F, c, depth):
            bad += 1
        elif best_right(system, c, depth) != oracles.best_right(F, c, depth):
            bad += 1
    verdict(2, bad == 0, f"single-pass best_left/best_right vs the literal quadratic definition: {bad} disagreements in 500")


def _candidate(rng, system, d):
    while True:
        c = Fraction(rng.randint(1, 1730), 1000)
        L, R = best_approximations(system, c, d)
        if L and R:
            break
    L, R = set(L), set(R)
    kind = rng.choice(["valid", "add", "swap", "move", "drop"])
    pool = range(1, d + 1)
    if kind == "add":
        rng.choice([L, R]).add(rng.choice(pool))
    elif kind == "swap":
        a, b = rng.choice(sorted(L)), rng.choice(sorted(R))
        L, R = (L - {a}) | {b}, (R - {b}) | {a}
    elif kind == "move":
        side = rng.choice([L, R])
        x = rng.choice(sorted(side))
        side.discard(x)
        side.add(rng.choice(pool))
    elif kind == "drop":
        side = L if len(L) > 1 else R
        if len(side) > 1:
            side.discard(rng.choice(sorted(side)))
    if not L or not R:
        return _candidate(rng, system, d)
    return sorted(L), sorted(R)


def test_criterion_3_recoverability_equivalence(verdict):
    system = KroneckerSystem()
    F = oracles.Values(system)
    rng = random.Random(3)
    bad = valid = 0
    for _ in range(500):
        d = rng.randint(2, 30)  # at d = 1 one side is always empty
        L, R = _candidate(rng, system, d)
        fa = is_finite_approximation(system, L, R, d)
        try:
            rec = recoverability_check(system, L, R, d)
        except EmptyGap:
            rec = False
        valid += fa
        if fa != rec or fa != oracles.is_finite_approximation(F, L, R, d):
            bad += 1
    verdict(3, bad == 0, f"is_finite_approximation <=> recoverability_check: {bad} disagreements in 500 "
                         f"({valid} valid, {500 - valid} invalid)")


def test_criterion_4_right_extension_uniqueness(verdict):
    system = KroneckerSystem()
    F = oracles.Values(system)
    rng = random.Random(4)
    bad = 0
    for _ in range(100):
        d2 = rng.randint(2, 12)
        d = rng.randint(1, d2 - 1)
        while True:
            c = Fraction(rng.randint(1, 1730), 1000)
            if c != 1:
                break
        L, R = best_approximations(system, c, d)
        ext = oracles.l_preserving_extensions(F, L, R, d, d2)
        got = right_extension(system, FiniteApproximation(tuple(L), tuple(R), d), d2)
        if ext != [got.R] or got.L != tuple(L):
            bad += 1
    verdict(4, bad == 0, f"exhaustive L-preserving extensions, d2 <= 12: {bad} of 100 not unique/equal")


def _pairs(rng, lo, hi, k):
    out = []
    while len(out) < k:
        a = Fraction(rng.randint(1, 999), 1000) * (hi - lo) + lo
        b = Fraction(rng.randint(1, 999), 1000) * (hi - lo) + lo
        if a < b:
            out.append((a, b))
    return out


def test_criterion_5_condition_ii(verdict):
    rng = random.Random(5)
    systems = {
        "kronecker": (KroneckerSystem(), Fraction(0), Fraction(173, 100)),
        "sine": (SineSystem(), Fraction(-1), Fraction(1)),
        "field": (FieldSystem(formula="van_der_corput"), Fraction(0), Fraction(1)),
    }
    bad = total = 0
    for name, (system, lo, hi) in systems.items():
        for a, b in _pairs(rng, lo, hi, 20):
            for d in range(1, 21):
                for e in range(1, d + 1):
                    total += 1
                    try:
                        w = verify_condition_ii(system, a, b, d, e)
                        ok = a <= w.lo < w.hi <= b and system.g(w.midpoint, a, b, d) == e
                    except CodecError:
                        ok = False
                    bad += not ok
    verdict(5, bad == 0, f"condition (ii) intervals non-empty with g(midpoint) = e: {bad} failures in {total}")


def test_criterion_6_h2_injectivity(verdict):
    system = KroneckerSystem()
    start = time.perf_counter()
    bad = 0
    for u in (Fraction(1, 2), Fraction(1, 7), Fraction(1, 50), Fraction(3, 1000), Fraction(1, 2000)):
        hs = system.h2_table(u, 100)
        for x, y in combinations(hs, 2):
            bad += x.terms == y.terms
    elapsed = time.perf_counter() - start
    verdict(6, bad == 0 and elapsed < 60,
            f"h2 over d=100, 5 values of u: {bad} equal coefficient vectors among 5 x 4950 pairs, {elapsed:.1f}s")


def test_criterion_7_three_distance(verdict):
    system = KroneckerSystem()
    counts = {}
    for n in (100, 1000, 10000):
        vals = [system.f(i) for i in system.sorted_indices(n)]
        counts[n] = len({y - x for x, y in zip(vals, vals[1:])})
    verdict(7, all(c <= 3 for c in counts.values()), f"distinct exact gap lengths of sorted f(1..N): {counts}")


def test_criterion_8_sine_roundtrip(verdict):
    with limits.using(precision_cap=1 << 12):
        rep = roundtrip(SineSystem(), 25, seed=8, lim=RoundtripLimits((1, 2), 3, 8))
    s = rep["summary"]
    errors = {}
    for t in rep["trials"]:
        if not t["ok"]:
            errors[t["error"]] = errors.get(t["error"], 0) + 1
    verdict(8, s["successes"] == 25,
            f"sine round trip (m<=2, N<=3, indices<=8, 2^12-bit cap) {s['successes']}/25; failures: {errors}")


def test_criterion_9_field_system(verdict):
    formula = FieldSystem(formula="van_der_corput")
    rng = random.Random(9)
    bad_h = 0
    for _ in range(50):
        a = Fraction(rng.randint(-1000, 1000), rng.randint(1, 100))
        b = a + Fraction(rng.randint(1, 1000), rng.randint(1, 100))
        hs = [formula.h(a, b, e).rational_value() for e in range(1, 101)]
        bad_h += not all(a < h < b for h in hs) or len(set(hs)) != 100
    table = FieldSystem(f_table=[van_der_corput(n) for n in range(1, 65)])
    rep = roundtrip(table, 25, seed=9, lim=RoundtripLimits((1, 2), 3, 8))
    s = rep["summary"]
    errors = {}
    for t in rep["trials"]:
        if not t["ok"]:
            errors[t["error"]] = errors.get(t["error"], 0) + 1
    verdict(9, bad_h == 0 and s["successes"] == 25,
            f"field_h containment/injectivity failures {bad_h}/50; 64-entry table round trip "
            f"{s['successes']}/25; failures: {errors}")


def test_criterion_10_nested_limits(verdict):
    runs = [
        (KroneckerSystem(), TupleSet(1, ((3,), (5,)))),
        (KroneckerSystem(), TupleSet(2, ((2, 1),))),
        (KroneckerSystem(), TupleSet(1, ((11,),))),
        (FieldSystem(formula="van_der_corput"), TupleSet(1, ((3,), (2,)))),
        (FieldSystem(formula="van_der_corput"), TupleSet(2, ((6, 1),))),
        (SineSystem(), TupleSet(1, ((4,),))),
    ]
    rng = random.Random(10)
    bad_nest = bad_point = 0
    for system, A in runs:
        param = encode(system, A)
        for chain in param.chains:
            brackets = [Bracket(*gap(system, e.L, e.R)) for e in chain if e.L and e.R]
            bad_nest += sum(not inner.issubset(outer) for outer, inner in zip(brackets, brackets[1:]))
        pts = [points_inside(b, 3, rng) for b in param.brackets]
        for k in range(3):
            c = tuple(p[k] for p in pts)
            bad_point += decode(system, c, A.m, len(A), depth=param.final_depth) != A
    verdict(10, bad_nest == 0 and bad_point == 0,
            f"{len(runs)} encoder runs: {bad_nest} non-nested bracket steps, "
            f"{bad_point} of {3 * len(runs)} bracket-point decodes differ")
