import json
import random
from fractions import Fraction

import pytest

from approx_codec import limits
from approx_codec.codec import (
    Encoder,
    EncodedParameter,
    RoundtripLimits,
    TupleSet,
    condition_iv_witness,
    cover_open_set,
    decode,
    encode,
    points_inside,
    roundtrip,
    x_c,
)
from approx_codec.engine import FiniteApproximation, best_left, gap, is_valid
from approx_codec.errors import (
    DepthExhausted,
    DuplicateTuple,
    InvalidInput,
    InvariantViolation,
    ParseError,
    SearchCapExceeded,
)
from approx_codec.numeric import Bracket, compare
from approx_codec.systems import FieldSystem, KroneckerSystem, SineSystem

KRON = KroneckerSystem()
FIELD = FieldSystem(formula="van_der_corput")


@pytest.fixture(scope="module")
def two_step():
    """m*N = 2 on the Kronecker system; shared because it scans ~2.6e5 indices."""
    A = TupleSet(1, ((3,), (5,)))
    return A, encode(KRON, A)


def test_tuple_set_validation_and_json():
    A = TupleSet(2, ((1, 2), (3, 4)))
    assert TupleSet.from_json(json.loads(json.dumps(A.to_json()))) == A
    assert A.to_json() == {"m": "2", "tuples": [["1", "2"], ["3", "4"]]}
    with pytest.raises(DuplicateTuple):
        TupleSet(1, ((1,), (1,)))
    with pytest.raises(InvalidInput):
        TupleSet(2, ((1,),))
    with pytest.raises(InvalidInput):
        TupleSet(1, ((0,),))
    with pytest.raises(ParseError):
        TupleSet.from_json({"m": "1"})
    with pytest.raises(InvalidInput):
        encode(KRON, TupleSet(1, ()))


@pytest.mark.parametrize("rows", [((1,),), ((3,),), ((20,),), ((7,),)])
def test_single_tuple_round_trip(rows):
    A = TupleSet(1, rows)
    param = encode(KRON, A)
    assert decode(KRON, param, 1, 1) == A
    assert list(param.chains[0][-1].L) == param.depths


def test_two_step_round_trip_and_invariants(two_step):
    A, param = two_step
    assert decode(KRON, param, A.m, len(A)) == A
    depths = param.depths
    assert depths == sorted(set(depths))
    for n, entry in enumerate(param.chains[0]):
        # chain-1 left set is exactly d_0..d_n
        assert list(entry.L) == depths[: n + 1]
    for n in range(1, len(depths)):
        # chain 2 gains a left point in [d_{n-1}, d_n] iff n = 1 mod m
        new = set(param.chains[1][n].L) - set(param.chains[1][n - 1].L)
        assert bool(new) == ((n - 1) % A.m == 0)
        assert all(depths[n - 1] <= x <= depths[n] for x in new)
        # d_n bounds the tuple entries seen so far
        assert depths[n] >= max(max(r) for r in A.tuples)
    for chain in param.chains:
        for prev, nxt in zip(chain, chain[1:]):
            assert nxt.extends(prev)
        assert all(is_valid(KRON, entry) for entry in chain)


def test_condition_iv_holds_for_each_step(two_step):
    A, param = two_step
    ch3 = param.chains[2]
    final = param.brackets[2]
    for n in range(1, len(param.depths)):
        lo, hi = gap(KRON, ch3[n - 1].L, ch3[n - 1].R)
        target = A.tuples[(n - 1) // A.m][(n - 1) % A.m]
        assert KRON.g(final, lo, hi, param.depths[n - 1]) == target


def test_brackets_are_nested_across_steps(two_step):
    _, param = two_step
    for chain in param.chains:
        brackets = [Bracket(*gap(KRON, e.L, e.R)) for e in chain if e.L and e.R]
        for outer, inner in zip(brackets, brackets[1:]):
            assert inner.issubset(outer)


def test_x_c_marks_tuple_starts(two_step):
    A, param = two_step
    expected = [param.depths[A.m * s] for s in range(len(A))]
    assert x_c(KRON, param) == expected
    assert x_c(KRON, param, via_chains=False) == expected


def test_decode_prefix_and_empty(two_step):
    A, param = two_step
    assert decode(KRON, param, 1, 1) == TupleSet(1, A.tuples[:1])
    assert decode(KRON, param, 1, 0) == TupleSet(1, ())
    # c2 below every f-value: X_c is empty
    c1 = param.brackets[0]
    assert decode(KRON, (c1, Fraction(0), param.brackets[2]), 1, 5, depth=100) == TupleSet(1, ())


def test_decode_from_raw_brackets_and_points(two_step):
    A, param = two_step
    raw = tuple(param.brackets)
    assert decode(KRON, raw, A.m, len(A), depth=param.final_depth) == A
    assert decode(KRON, param, A.m, len(A), via_chains=False) == A
    rng = random.Random(1)
    pts = [points_inside(b, 2, rng) for b in param.brackets]
    for k in range(2):
        c = tuple(p[k] for p in pts)
        assert decode(KRON, c, A.m, len(A), depth=param.final_depth) == A


def test_encoded_parameter_json_round_trip(two_step):
    A, param = two_step
    text = json.dumps(param.to_json())
    again = EncodedParameter.from_json(json.loads(text))
    assert again == param
    obj = json.loads(text)
    assert obj["m"] == "1" and obj["final_depth"] == str(param.final_depth)
    obj["chains"][0][-1]["d"] = "oops"
    with pytest.raises(ParseError):
        EncodedParameter.from_json(obj)
    with pytest.raises(ParseError):
        EncodedParameter.from_json({"system": {"kind": "kronecker"}})


def test_arity_two_round_trip_on_field_system():
    A = TupleSet(2, ((3, 2),))
    param = encode(FIELD, A)
    assert decode(FIELD, param, 2, 1) == A
    A = TupleSet(1, ((3,), (2,)))
    param = encode(FIELD, A)
    assert decode(FIELD, param, 1, 2) == A


def test_sine_single_tuple_round_trip():
    sine = SineSystem()
    A = TupleSet(1, ((3,),))
    param = encode(sine, A)
    assert decode(sine, param, 1, 1) == A


def test_finite_field_table_runs_out_of_depth():
    table = FieldSystem(f_table=[Fraction(k, 65) for k in range(1, 65)])
    with pytest.raises(DepthExhausted):
        encode(table, TupleSet(1, ((3,), (5,))))


def test_search_cap_stops_the_encoder():
    with limits.using(search_cap=50):
        with pytest.raises(SearchCapExceeded):
            encode(KRON, TupleSet(1, ((3,), (5,))))


def test_encoder_invariant_checks_fire():
    enc = Encoder(KRON, TupleSet(1, ((2,),)))
    enc.base()
    enc.chains[0][0] = FiniteApproximation((1,), enc.chains[0][0].R, enc.chains[0][0].d)
    with pytest.raises(InvariantViolation):
        enc._verify_step(0)


def test_condition_iv_witness():
    L, R = [2], [1, 4]
    prev = FiniteApproximation(tuple(L), tuple(R), 7)
    lo_f, hi_f = gap(KRON, L, R)
    for target in (1, 4, 7):
        b1, b2 = condition_iv_witness(KRON, prev, 7, target)
        assert compare(lo_f, b1) <= 0 and compare(b1, b2) < 0 and compare(b2, hi_f) <= 0
        mid = (b1 + b2) / 2
        assert KRON.g(mid, lo_f, hi_f, 7) == target
    with pytest.raises(InvalidInput):
        condition_iv_witness(KRON, prev, 7, 9)


def test_cover_open_set():
    assert cover_open_set(KRON, [], Fraction(1, 10), 50) == []
    box = [(Fraction(1, 4), Fraction(1))]
    margin = Fraction(1, 20)
    out = cover_open_set(KRON, [box], margin, 200)
    assert out
    P = KRON.point
    pieces = []
    for s, r in out:
        lo, hi = KRON.f(s), KRON.f(r)
        assert compare(P(box[0][0]), lo) < 0 and compare(hi, P(box[0][1])) < 0
        pieces.append((lo, hi))
    # the open pieces cover [1/4 + margin, 1 - margin]: sort and chain them
    pieces.sort(key=lambda p: p[0].approx)
    reach = P(box[0][0] + margin)
    assert compare(pieces[0][0], reach) < 0
    for lo, hi in pieces:
        assert compare(lo, reach) < 0  # no uncovered gap (points are covered by the next open piece)
        if compare(hi, reach) > 0:
            reach = hi
    assert compare(reach, P(box[0][1] - margin)) > 0
    with pytest.raises(DepthExhausted):
        cover_open_set(KRON, [box], Fraction(1, 10**6), 30)
    with pytest.raises(InvalidInput):
        cover_open_set(KRON, [[(Fraction(-1), Fraction(1))]], margin, 30)


def test_cover_two_dimensional():
    box = [(Fraction(1, 4), Fraction(1)), (Fraction(1, 2), Fraction(3, 2))]
    out = cover_open_set(KRON, [box], Fraction(1, 8), 100)
    assert out and all(len(t) == 4 for t in out)


def test_roundtrip_report():
    empty = roundtrip(KRON, 0, 5)
    assert empty["trials"] == [] and empty["summary"]["trials"] == 0
    lim = RoundtripLimits(m_values=(1,), max_tuples=1, max_index=6)
    r1 = roundtrip(KRON, 4, 123, lim, bracket_points=1)
    r2 = roundtrip(KRON, 4, 123, lim, bracket_points=1)
    assert json.dumps(r1) == json.dumps(r2)
    assert r1["summary"]["successes"] == 4
    timed = roundtrip(KRON, 1, 123, lim, timing=True)
    assert "seconds" in timed["trials"][0]


def test_roundtrip_aggregates_errors():
    lim = RoundtripLimits(m_values=(1,), max_tuples=3, max_index=6)
    with limits.using(search_cap=200):
        rep = roundtrip(KRON, 3, 1, lim)
    assert rep["summary"]["trials"] == 3
    bad = [t for t in rep["trials"] if not t["ok"]]
    assert bad and all(t["error"] == "search_cap_exceeded" for t in bad)
