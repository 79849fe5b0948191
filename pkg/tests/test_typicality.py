import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisycomp.errors import NoisyCompError
from noisycomp.model import BINARY, alphabet, identity_function, make_pmf, uniform_pmf
from noisycomp.typicality import (CondTypicalSpec, TypicalSpec, aep_bounds, cond_typical_count,
                                  cond_typical_count_indices, cond_typical_set, default_delta,
                                  is_cond_typical, is_typical, iter_cond_typical_indices,
                                  typical_count, typical_indices, typical_mass, typical_mass_mc,
                                  typical_set)

from instances import A4, AND


def brute_typical(probs, n, delta):
    """Every length-n index tuple passing the weak typicality test, by direct loops."""
    h = -sum(p * math.log(p) for p in probs if p > 0)
    out = []
    for seq in itertools.product(range(len(probs)), repeat=n):
        if any(probs[s] == 0 for s in seq):
            continue
        lp = sum(math.log(probs[s]) for s in seq)
        if abs(-lp / n - h) <= delta + 1e-12:
            out.append(seq)
    return out


SKEW = make_pmf(BINARY, [0.25, 0.75])


def test_is_typical_examples():
    u = TypicalSpec(uniform_pmf(BINARY), 5, 0.01)
    for seq in itertools.product("01", repeat=5):
        assert is_typical(seq, u)
    point = TypicalSpec(make_pmf(BINARY, [1.0, 0.0]), 3, 0.1)
    assert is_typical(("0", "0", "0"), point)
    assert not is_typical(("0", "1", "0"), point)
    spec = TypicalSpec(SKEW, 4, 0.15)
    typ = [s for s in itertools.product("01", repeat=4) if is_typical(s, spec)]
    assert typ == [("0", "1", "1", "1"), ("1", "0", "1", "1"), ("1", "1", "0", "1"), ("1", "1", "1", "0")]


def test_is_typical_errors():
    spec = TypicalSpec(SKEW, 2, 0.1)
    with pytest.raises(NoisyCompError) as e:
        is_typical(("0", "2"), spec)
    assert e.value.code == "UNKNOWN_SYMBOL"
    with pytest.raises(NoisyCompError):
        TypicalSpec(SKEW, 0, 0.1)
    with pytest.raises(NoisyCompError):
        TypicalSpec(SKEW, 3, 0.0)


def test_typical_set_examples():
    assert len(typical_set(TypicalSpec(uniform_pmf(BINARY), 3, 0.1))) == 8
    s = typical_set(TypicalSpec(SKEW, 4, 0.15))
    assert len(s) == 4 and typical_count(TypicalSpec(SKEW, 4, 0.15)) == 4
    assert typical_set(TypicalSpec(make_pmf(BINARY, [0.0, 1.0]), 5, 0.1)) == [("1",) * 5]


def test_typical_set_too_large():
    with pytest.raises(NoisyCompError) as e:
        typical_set(TypicalSpec(uniform_pmf(BINARY), 30, 0.1), guard=1 << 20)
    assert e.value.code == "TOO_LARGE"


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 6), min_size=2, max_size=3), st.integers(1, 7),
       st.sampled_from([0.02, 0.1, 0.3, 0.7]))
def test_typical_indices_match_brute_force(weights, n, delta):
    if sum(weights) == 0:
        weights = [1] * len(weights)
    probs = np.array(weights, dtype=float) / sum(weights)
    got = typical_indices(probs, n, delta)
    want = brute_typical(list(probs), n, delta)
    assert [tuple(r) for r in got] == want


@pytest.mark.parametrize("probs", [[0.25, 0.75], [0.1, 0.9], [0.2, 0.3, 0.5], [0.1, 0.2, 0.3, 0.4]])
@pytest.mark.parametrize("delta", [0.02, 0.1, 0.25])
def test_count_below_upper_bound(probs, delta):
    pmf = make_pmf(alphabet(*[str(i) for i in range(len(probs))]), probs)
    for n in range(1, 17):
        spec = TypicalSpec(pmf, n, delta)
        assert typical_count(spec) <= aep_bounds(spec).card_upper


def test_aep_examples():
    spec = TypicalSpec(uniform_pmf(BINARY), 10, 0.1)
    b = aep_bounds(spec)
    assert b.card_upper == pytest.approx(math.exp(10 * (math.log(2) + 0.1)))
    assert b.card_upper == pytest.approx(1024 * math.e) and round(b.card_upper) == 2784
    assert typical_count(spec) == 1024 <= b.card_upper
    assert aep_bounds(TypicalSpec(SKEW, 6, 50.0)).card_upper >= 2 ** 6
    point = TypicalSpec(make_pmf(BINARY, [1.0, 0.0]), 5, 0.01)
    assert typical_count(point) == 1 <= aep_bounds(point).card_upper


def test_typical_mass_matches_enumeration():
    spec = TypicalSpec(SKEW, 9, 0.1)
    exact = sum(math.prod([0.25, 0.75][s] for s in seq) for seq in brute_typical([0.25, 0.75], 9, 0.1))
    assert typical_mass(spec) == pytest.approx(exact, abs=1e-12)


@pytest.mark.parametrize("probs", [[0.25, 0.75], [0.1, 0.9]])
def test_mc_mass_nondecreasing_in_n(probs):
    pmf = make_pmf(BINARY, probs)
    est = [typical_mass_mc(TypicalSpec(pmf, n, 0.1), 100_000, seed=n) for n in (8, 16, 32, 64)]
    for (p0, s0), (p1, s1) in zip(est, est[1:]):
        assert p1 >= p0 - 3 * math.hypot(s0, s1)


def test_default_delta():
    assert default_delta(SKEW) == pytest.approx(0.1 * 0.562335144618808)


def test_cond_typical_examples():
    ident = identity_function(BINARY)
    spec = CondTypicalSpec(make_pmf(BINARY, [0.3, 0.7]), ident, ("1", "0", "1"), 0.0)
    assert cond_typical_set(spec, 3) == [("1", "0", "1")]

    spec = CondTypicalSpec(uniform_pmf(A4), AND, ("0",) * 3, 0.0)
    members = cond_typical_set(spec, 3)
    assert len(members) == 27
    assert members == sorted(members, key=lambda s: [A4.index(x) for x in s])

    # conditional (1/6, 2/6, 3/6) on the zero class; pairs checked by hand-rolled loops
    spec = CondTypicalSpec(make_pmf(A4, [0.1, 0.2, 0.3, 0.4]), AND, ("0", "0"), 0.2)
    assert cond_typical_set(spec, 2) == [("01", "01"), ("01", "10"), ("10", "01")]
    assert cond_typical_count(spec) == 3
    assert is_cond_typical(("01", "10"), spec)
    assert not is_cond_typical(("00", "00"), spec)
    assert not is_cond_typical(("11", "01"), spec)


def test_cond_typical_empty_preimage():
    spec = CondTypicalSpec(make_pmf(A4, [0.3, 0.3, 0.4, 0.0]), AND, ("0", "1"), 0.5)
    with pytest.raises(NoisyCompError) as e:
        cond_typical_set(spec, 2)
    assert e.value.code == "EMPTY_PREIMAGE"


def test_cond_length_mismatch():
    spec = CondTypicalSpec(uniform_pmf(A4), AND, ("0", "1"), 0.5)
    with pytest.raises(NoisyCompError) as e:
        cond_typical_set(spec, 3)
    assert e.value.code == "LENGTH_MISMATCH"


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(1, 9), min_size=4, max_size=4), st.lists(st.integers(0, 1), min_size=1, max_size=6),
       st.sampled_from([0.0, 0.05, 0.2, 0.6]))
def test_cond_typical_subset_count_and_order(weights, y, delta):
    probs = np.array(weights, dtype=float) / sum(weights)
    src = make_pmf(A4, probs)
    yidx = np.array(y)
    rows = list(iter_cond_typical_indices(src, AND, yidx, delta))
    assert len(rows) == cond_typical_count_indices(src, AND, yidx, delta)
    assert [tuple(r) for r in rows] == sorted(tuple(r) for r in rows)
    for r in rows:
        assert np.array_equal(AND.table[r], yidx)
    # brute force over the whole preimage
    cond = {a: probs[a] / sum(probs[b] for b in AND.preimages[AND.table[a]]) for a in range(4)}
    h = {b: -sum(cond[a] * math.log(cond[a]) for a in pre) for b, pre in AND.preimages.items()}
    center = sum(h[b] for b in y) / len(y)
    want = [seq for seq in itertools.product(*[AND.preimages[b] for b in y])
            if abs(-sum(math.log(cond[a]) for a in seq) / len(y) - center) <= delta + 1e-12]
    assert [tuple(int(v) for v in r) for r in rows] == want
