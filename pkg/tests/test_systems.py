import pickle
import random
from fractions import Fraction

import mpmath
import pytest

from approx_codec import limits
from approx_codec.errors import InvalidInput, PrecisionCapExceeded, SearchCapExceeded
from approx_codec.numeric import Bracket, compare
from approx_codec.systems import (
    FieldSystem,
    KroneckerSystem,
    SineSystem,
    dedupe_domain,
    system_from_json,
    van_der_corput,
    verify_condition_ii,
)



@pytest.fixture(autouse=True, scope="module")
def _precision():
    with mpmath.workdps(60):
        yield

KRON = KroneckerSystem()
SINE = SineSystem()
FIELD = FieldSystem(formula="van_der_corput")
B = KRON.basis


def val(form):
    out = mpmath.mpf(0)
    for i, c in enumerate(form.coeffs):
        c = Fraction(c)
        key = form.basis.symbol(i).key
        v = 1 if key == "1" else (mpmath.sqrt(int(key[5:])) if key.startswith("sqrt:") else mpmath.sin(int(key[4:])))
        out += mpmath.mpf(c.numerator) / c.denominator * v
    return out


def test_kronecker_f_examples():
    assert KRON.f(1) == B.rational(1)
    assert KRON.f(2) == B.form((2, 0, -1))
    assert KRON.f(7) == B.form((7, 0, -4))
    assert KRON.f_alpha(1) == B.element(1)
    assert KRON.f_alpha(2) == B.form((0, 2, -1))
    assert KRON.f_alpha(3) == B.form((0, 3, -2))


def test_kronecker_f_matches_fmod_oracle():
    beta = mpmath.sqrt(3)
    for n in range(1, 400):
        assert abs(val(KRON.f(n)) - mpmath.fmod(n, beta)) < mpmath.mpf(10) ** -40
        assert abs(val(KRON.f_alpha(n)) - mpmath.fmod(n * mpmath.sqrt(2), beta)) < mpmath.mpf(10) ** -40


def test_kronecker_needs_ordered_constants():
    with pytest.raises(InvalidInput):
        KroneckerSystem("sqrt:3", "sqrt:2")


def test_h1_h2_example():
    assert KRON.h1(Fraction(1, 5), 1, 1) == 2
    assert KRON.h2(Fraction(1, 5), 1, 1) == B.form((-1, 2, -1))


def h1_oracle(system, u, d, e):
    """Literal definition: least n with f(e) < probe(n) < f(e)+u and no f(y), y <= d, in (f(e), probe(n)]."""
    fe = val(system.f(e))
    fs = [val(system.f(y)) for y in range(1, d + 1)]
    n = 0
    while True:
        n += 1
        x = _probe_value(system, n)
        if not fe < x < fe + u:
            continue
        if any(fe < fy <= x for fy in fs):
            continue
        return n


_PROBES: dict = {}


def _probe_value(system, n):
    key = (system.kind, n)
    if key not in _PROBES:
        _PROBES[key] = val(system.probe(n))
    return _PROBES[key]


@pytest.mark.parametrize("system", [KRON, SINE], ids=["kronecker", "sine"])
def test_h1_table_matches_single_scan_oracle(system):
    rng = random.Random(7)
    for _ in range(6):
        d = rng.randint(1, 25)
        u = Fraction(rng.randint(1, 40), rng.randint(41, 400))
        table = system.h1_table(u, d)
        for e in range(1, d + 1):
            assert table[e - 1] == h1_oracle(system, mpmath.mpf(u.numerator) / u.denominator, d, e)
            assert table[e - 1] == system.h1(u, d, e)


def test_h1_search_cap():
    with limits.using(search_cap=3):
        with pytest.raises(SearchCapExceeded):
            KRON.h1(Fraction(1, 10**6), 1, 1)


@pytest.mark.parametrize("system", [KRON, SINE], ids=["kronecker", "sine"])
def test_h2_values_are_injective_and_in_window(system):
    u = Fraction(1, 3)
    d = 30
    hs = system.h2_table(u, d)
    assert len(set(hs)) == d
    for h in hs:
        assert compare(h, system.basis.rational(0)) > 0
        assert compare(h, system.basis.rational(u)) < 0


def test_g_conventions():
    c = B.rational(Fraction(1, 2))
    assert KRON.g(c, 5, 3, 7) == 1
    assert KRON.g(c, Fraction(1, 4), 1, 1) == 1
    assert SINE.g(SINE.basis.rational(0), 1, 0, 4) == 1
    assert FIELD.g(FIELD.basis.rational(0), 5, 3, 4) == 1
    assert FIELD.g(FIELD.basis.rational(0), 0, 1, 1) == 1


@pytest.mark.parametrize("system", [KRON, SINE, FIELD], ids=["kronecker", "sine", "field"])
def test_g_recovers_candidate_index(system):
    rng = random.Random(3)
    for _ in range(5):
        a = Fraction(rng.randint(-20, 10), 40)
        b = a + Fraction(rng.randint(1, 20), 40)
        if system is FIELD:
            a, b = abs(a) / 2, abs(a) / 2 + (b - a) / 2
        d = rng.randint(2, 15)
        pts = system.candidates(system.point(a), system.point(b), d)
        for e0 in range(1, d + 1):
            assert system.g(pts[e0 - 1], a, b, d) == e0


def test_g_matches_distance_oracle():
    rng = random.Random(11)
    a, b, d = Fraction(1, 10), Fraction(9, 10), 12
    pts = KRON.candidates(B.rational(a), B.rational(b), d)
    vals = [val(p) for p in pts]
    for _ in range(60):
        c = Fraction(rng.randint(0, 1000), 1000)
        dist = [abs(v - mpmath.mpf(c.numerator) / c.denominator) for v in vals]
        assert KRON.g(c, a, b, d) == dist.index(min(dist)) + 1


def test_g_on_brackets_refuses_straddling():
    a, b, d = Fraction(1, 10), Fraction(9, 10), 12
    pts = KRON.candidates(B.rational(a), B.rational(b), d)
    order = sorted(range(d), key=lambda i: val(pts[i]))
    lo, hi = pts[order[3]], pts[order[4]]
    with pytest.raises(PrecisionCapExceeded):
        KRON.g(Bracket(lo, hi), a, b, d)
    mid = (lo + hi) / 2
    assert KRON.g(Bracket(lo - (hi - lo) / 8, mid), a, b, d) == order[3] + 1


def test_sine_basics():
    assert SINE.f(1) == SINE.basis.element(1)
    assert SINE.f(1).coeffs == (0, 1)
    lo, hi = SINE.U
    assert compare(lo, SINE.f(11)) < 0 < compare(hi, SINE.f(11))


def test_field_h():
    for e in range(1, 20):
        assert FIELD.h(0, 1, e) == FIELD.f(e)
        assert FIELD.h(5, 3, e) == FIELD.basis.rational(5)


def test_field_h_image_and_injectivity():
    rng = random.Random(5)
    for _ in range(10):
        a = Fraction(rng.randint(-50, 50), rng.randint(1, 20))
        b = a + Fraction(rng.randint(1, 50), rng.randint(1, 20))
        hs = [FIELD.h(a, b, e).rational_value() for e in range(1, 101)]
        assert all(a < h < b for h in hs)
        assert len(set(hs)) == 100


def test_field_table_and_depth():
    fs = FieldSystem(f_table=[Fraction(1, 2), Fraction(1, 4)])
    assert fs.f(2) == fs.basis.rational(Fraction(1, 4))
    with pytest.raises(Exception):
        fs.f(3)
    with pytest.raises(InvalidInput):
        FieldSystem(f_table=[Fraction(3, 2)])
    assert van_der_corput(1) == Fraction(1, 2)
    assert van_der_corput(6) == Fraction(3, 8)


def test_dedupe_domain():
    fs = FieldSystem(f_table=[Fraction(3, 10), Fraction(3, 10), Fraction(7, 10)])
    dd = dedupe_domain(fs)
    assert [dd.f(i).rational_value() for i in (1, 2)] == [Fraction(3, 10), Fraction(7, 10)]
    assert dedupe_domain(KRON) is KRON
    vals = [KRON.f(n) for n in range(1, 101)]
    assert len(set(vals)) == 100


@pytest.mark.parametrize("system", [KRON, SINE, FIELD], ids=["kronecker", "sine", "field"])
def test_condition_ii_witness(system):
    a, b = Fraction(1, 5), Fraction(3, 5)
    w = verify_condition_ii(system, a, b, 1, 1)
    assert a <= w.lo < w.hi <= b
    for d in (3, 9):
        for e in range(1, d + 1):
            w = verify_condition_ii(system, a, b, d, e)
            assert a <= w.lo < w.hi <= b
            assert system.g(w.midpoint, a, b, d) == e
            assert system.g(Bracket.from_rational(system.basis, w), a, b, d) == e
    with pytest.raises(InvalidInput):
        verify_condition_ii(system, b, a, 3, 1)


@pytest.mark.parametrize("system", [KRON, SINE, FIELD, FieldSystem(f_table=["1/3", "2/3"])],
                         ids=["kronecker", "sine", "field", "table"])
def test_system_json_and_pickle_round_trip(system):
    again = system_from_json(system.to_json())
    assert again.to_json() == system.to_json()
    assert again.f(2) == system.f(2)
    clone = pickle.loads(pickle.dumps(system))
    assert clone.f(2) == system.f(2)
