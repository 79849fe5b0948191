import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisycomp.capacity import (CapacityOptions, blahut_arimoto, capacity_grid_oracle,
                                capacity_iid, lattice_counts, project_simplex, rate_gradient)
from noisycomp.errors import NoisyCompError
from noisycomp.infomeasures import rate_from_probs, typical_input_rate
from noisycomp.model import (BINARY, NoisyComputationInstance, alphabet, bsc, fn_as_channel,
                             identity_function, make_channel, make_det_function, make_pmf,
                             uniform_noise_channel)

from instances import A4, AND, oracle_rate, random_instance

BSC01 = math.log(2) - (0.1 * math.log(10) + 0.9 * math.log(10 / 9))


def test_capacity_examples():
    res = capacity_iid(identity_function(BINARY), bsc(0.1))
    assert res.value == pytest.approx(BSC01, abs=1e-9)
    assert np.allclose(res.argmax.probs, [0.5, 0.5], atol=1e-4)
    assert res.label == "i.i.d. lower bound"

    res = capacity_iid(AND, fn_as_channel(identity_function(A4)))
    assert res.value == pytest.approx(math.log(4), abs=1e-9)

    res = capacity_iid(AND, uniform_noise_channel(A4, BINARY))
    assert res.value == pytest.approx(math.log(3), abs=1e-6)
    assert res.argmax.probs[3] < 1e-4
    assert np.allclose(res.argmax.probs[:3], 1 / 3, atol=1e-3)


def test_grid_oracle_examples():
    ident = identity_function(BINARY)
    assert capacity_grid_oracle(ident, bsc(0.5), 0.05) == pytest.approx(0.0, abs=1e-15)
    assert abs(capacity_grid_oracle(ident, bsc(0.1), 0.01) - BSC01) <= 5e-4
    const = make_det_function(A4, BINARY, ["0"] * 4)
    assert capacity_grid_oracle(const, uniform_noise_channel(A4, BINARY), 0.05) == pytest.approx(math.log(4))


def test_grid_oracle_guards():
    A6 = alphabet(*"abcdef")
    f = identity_function(A6)
    with pytest.raises(NoisyCompError) as e:
        capacity_grid_oracle(f, fn_as_channel(f), 0.05)
    assert e.value.code == "ALPHABET_TOO_LARGE"
    with pytest.raises(NoisyCompError) as e:
        capacity_grid_oracle(AND, fn_as_channel(AND), 0.03)
    assert e.value.code == "BAD_RESOLUTION"


def test_lattice_counts():
    pts = lattice_counts(3, 4)
    assert pts.shape == (15, 3)
    assert np.all(pts.sum(axis=1) == 4)
    assert len({tuple(r) for r in pts}) == 15


def test_blahut_arimoto_examples():
    assert blahut_arimoto(bsc(0.1)) == pytest.approx(BSC01, abs=1e-10)
    assert blahut_arimoto(bsc(0.5)) == pytest.approx(0.0, abs=1e-12)
    A3 = alphabet("a", "b", "c")
    assert blahut_arimoto(make_channel(A3, A3, np.eye(3))) == pytest.approx(math.log(3), abs=1e-10)


@settings(max_examples=40)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=6))
def test_project_simplex(v):
    p = project_simplex(np.array(v))
    assert np.all(p >= 0)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)


def test_supremum_property():
    F = fn_as_channel(AND).compose(bsc(0.05))
    cap = capacity_iid(AND, F).value
    rng = np.random.default_rng(11)
    for _ in range(50):
        p = make_pmf(A4, rng.dirichlet(np.ones(4) * 0.7))
        assert cap >= typical_input_rate(NoisyComputationInstance(p, AND, F)).b - 1e-9


def test_result_invariants():
    F = fn_as_channel(AND).compose(bsc(0.1))
    res = capacity_iid(AND, F)
    assert res.value >= oracle_rate(NoisyComputationInstance(res.argmax, AND, F)) - 1e-9
    assert 0 <= res.value <= math.log(4)
    assert res.trace[-1][1] <= res.value + 1e-9


def test_relabeling_invariance():
    F = fn_as_channel(AND).compose(bsc(0.1))
    base = capacity_iid(AND, F).value
    perm = [2, 0, 3, 1]
    A = alphabet(*[A4.symbols[i] for i in perm])
    g = make_det_function(A, BINARY, {s: AND(s) for s in A})
    Fp = make_channel(A, alphabet("1", "0"), F.matrix[perm][:, ::-1])
    assert capacity_iid(g, Fp).value == pytest.approx(base, abs=1e-7)


def test_deterministic_given_seed():
    F = fn_as_channel(AND).compose(bsc(0.2))
    a = capacity_iid(AND, F, CapacityOptions(restarts=6, seed=3))
    b = capacity_iid(AND, F, restarts=6, seed=3)
    assert a.value == b.value and np.array_equal(a.argmax.probs, b.argmax.probs)


def test_alphabet_mismatch():
    with pytest.raises(NoisyCompError) as e:
        capacity_iid(AND, bsc(0.1))
    assert e.value.code == "ALPHABET_MISMATCH"


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_rate_gradient_matches_central_differences(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 4, 3, 3)
    p = rng.dirichlet(np.ones(4)) * 0.9 + 0.025
    ind, W = inst.f.indicator(), inst.F.matrix
    h = 1e-6
    fd = [(rate_from_probs(p + h * e, ind, W) - rate_from_probs(p - h * e, ind, W)) / (2 * h)
          for e in np.eye(4)]
    assert np.allclose(rate_gradient(p, ind, W), fd, atol=1e-6)


def test_boundary_optimum_matches_blahut_arimoto():
    # optimum puts no mass on the third input
    A3 = alphabet("a", "b", "c")
    B = alphabet("u", "v", "w")
    f = make_det_function(A3, B, ["u", "v", "w"])
    F = make_channel(A3, BINARY, [[0.9, 0.1], [0.1, 0.9], [0.5, 0.5]])
    res = capacity_iid(f, F)
    assert res.value == pytest.approx(blahut_arimoto(F), abs=1e-10)
    assert res.argmax.probs[2] < 1e-6
