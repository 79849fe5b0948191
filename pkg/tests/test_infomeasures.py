import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisycomp.errors import NoisyCompError
from noisycomp.infomeasures import (cascade_channel, conditional_entropy, entropy, h2, joint_xz,
                                    joint_yz, joint_yz_block, make_joint, mutual_information,
                                    pushforward, reverse_posterior, typical_input_rate)
from noisycomp.model import (BINARY, NoisyComputationInstance, alphabet, bsc, fn_as_channel,
                             identity_function, make_det_function, make_pmf,
                             uniform_noise_channel, uniform_pmf)

from instances import A4, AND, H, and_bsc, identity_bsc, oracle_rate, random_instance


def test_entropy_examples():
    assert entropy(uniform_pmf(BINARY)) == pytest.approx(math.log(2), abs=1e-15)
    assert entropy(make_pmf(BINARY, [1.0, 0.0])) == 0.0
    assert entropy([0.25, 0.75]) == pytest.approx(0.562335144618808, abs=1e-12)


def test_joint_yz_examples():
    inst = identity_bsc(0.1)
    J = joint_yz(inst.source, inst.f, inst.F)
    assert np.allclose(J.probs, [[0.45, 0.05], [0.05, 0.45]], atol=1e-15)
    assert np.allclose(J.probs.sum(axis=1), pushforward(inst.source, inst.f).probs)

    J = joint_yz(uniform_pmf(A4), AND, fn_as_channel(AND))
    assert np.allclose(J.probs, [[0.75, 0.0], [0.0, 0.25]])

    J = joint_yz(uniform_pmf(A4), AND, uniform_noise_channel(A4, alphabet("a", "b", "c")))
    assert np.allclose(J.probs, np.outer(J.probs.sum(axis=1), J.probs.sum(axis=0)))
    assert mutual_information(J) == pytest.approx(0.0, abs=1e-15)


def test_joint_yz_alphabet_mismatch():
    with pytest.raises(NoisyCompError) as e:
        joint_yz(uniform_pmf(BINARY), AND, fn_as_channel(AND))
    assert e.value.code == "ALPHABET_MISMATCH"


def test_conditional_entropy_and_mi_examples():
    indep = make_joint(BINARY, BINARY, [[0.25, 0.25], [0.25, 0.25]])
    assert conditional_entropy(indep) == pytest.approx(math.log(2))
    assert mutual_information(indep) == pytest.approx(0.0, abs=1e-15)
    corr = make_joint(BINARY, BINARY, [[0.5, 0.0], [0.0, 0.5]])
    assert conditional_entropy(corr) == pytest.approx(0.0, abs=1e-15)
    assert mutual_information(corr) == pytest.approx(math.log(2))
    inst = identity_bsc(0.1)
    closed = math.log(2) - (0.1 * math.log(10) + 0.9 * math.log(10 / 9))
    assert mutual_information(joint_yz(inst.source, inst.f, inst.F)) == pytest.approx(closed, abs=1e-12)


def test_typical_input_rate_examples():
    ident = identity_function(BINARY)
    rep = typical_input_rate(NoisyComputationInstance(uniform_pmf(BINARY), ident, bsc(0.0)))
    assert rep.b == pytest.approx(math.log(2), abs=1e-15)

    rep = typical_input_rate(NoisyComputationInstance(uniform_pmf(A4), AND,
                                                      uniform_noise_channel(A4, BINARY)))
    assert rep.b == pytest.approx(0.75 * math.log(3), abs=1e-12)
    assert 0.75 * math.log(3) == pytest.approx(0.823959, abs=1e-6)

    rep = typical_input_rate(and_bsc(0.1))
    # H(X) - H(Y|Z) with H(Y|Z) = H(Y) + h2(0.1) - h2(0.3)
    closed = math.log(4) - (H([0.75, 0.25]) + H([0.1, 0.9]) - H([0.3, 0.7]))
    assert rep.b == pytest.approx(closed, abs=1e-12)
    assert rep.b == pytest.approx(1.109741, abs=1e-6)


def test_rate_report_fields_agree():
    rep = typical_input_rate(and_bsc(0.05))
    assert rep.b == pytest.approx(rep.h_x - rep.h_y_given_z, abs=1e-12)
    assert rep.b == pytest.approx(rep.h_x_given_y + rep.i_yz, abs=1e-10)
    assert rep.b == rep.b_alt or abs(rep.b - rep.b_alt) <= 1e-10


def test_reverse_posterior_examples():
    inst = identity_bsc(0.1)
    R = reverse_posterior(inst.source, inst.F)
    assert np.allclose(R.matrix, bsc(0.1).matrix, atol=1e-15)

    R = reverse_posterior(make_pmf(BINARY, [0.25, 0.75]), bsc(0.1))
    assert R.matrix[0, 0] == pytest.approx(0.75, abs=1e-15)
    assert np.allclose(np.nansum(R.matrix, axis=1), 1.0)

    R = reverse_posterior(make_pmf(A4, [0, 0, 1, 0]), fn_as_channel(AND))
    assert list(R.defined) == [True, False]
    assert R.undefined_outputs == ("1",)
    assert np.array_equal(R.matrix[0], [0, 0, 1, 0])
    assert np.all(np.isnan(R.matrix[1]))


def test_cascade_factorizes_over_blocks():
    # P(z^n | y^n) from the full block joint equals the product of single-letter cascades
    rng = np.random.default_rng(3)
    for trial in range(4):
        inst = random_instance(rng, 3, 2, 2)
        W, defined = cascade_channel(inst.source, inst.f, inst.F)
        for n in (1, 2, 3):
            J = joint_yz_block(inst.source, inst.f, inst.F, n)
            py = J.sum(axis=1)
            nb, nc = W.shape
            for yc in range(nb ** n):
                if py[yc] == 0:
                    continue
                ys = np.unravel_index(yc, (nb,) * n)
                for zc in range(nc ** n):
                    zs = np.unravel_index(zc, (nc,) * n)
                    prod = np.prod([W[y, z] for y, z in zip(ys, zs)])
                    assert J[yc, zc] / py[yc] == pytest.approx(prod, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 4), st.integers(1, 4), st.booleans())
def test_rate_properties_on_random_instances(seed, na, nb, nc, zeros):
    inst = random_instance(np.random.default_rng(seed), na, nb, nc, zeros)
    rep = typical_input_rate(inst)
    assert abs(rep.b - oracle_rate(inst)) <= 1e-10
    assert abs((rep.h_x - rep.h_y_given_z) - (rep.h_x_given_y + rep.i_yz)) <= 1e-10
    assert rep.b <= rep.h_x + 1e-12
    assert 0 <= rep.h_x <= math.log(na) + 1e-12
    assert rep.i_yz >= -1e-12
    # data processing along X -> f(X) with Z = F(X)
    assert rep.i_yz <= mutual_information(joint_xz(inst.source, inst.F)) + 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_bijective_f_gives_mutual_information(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 3, 3, 3)
    perm = rng.permutation(3)
    B = alphabet("u", "v", "w")
    f = make_det_function(inst.source.alphabet, B, [B.symbols[p] for p in perm])
    inst = NoisyComputationInstance(inst.source, f, inst.F)
    assert typical_input_rate(inst).b == pytest.approx(
        mutual_information(joint_xz(inst.source, inst.F)), abs=1e-10)


def test_noiseless_injective_device_gives_source_entropy():
    rng = np.random.default_rng(5)
    p = make_pmf(A4, rng.dirichlet(np.ones(4)))
    rep = typical_input_rate(NoisyComputationInstance(p, AND, fn_as_channel(identity_function(A4))))
    assert rep.b == pytest.approx(entropy(p), abs=1e-12)


def test_h2():
    assert h2(0.5) == pytest.approx(math.log(2))
    assert h2(0.0) == 0.0 and h2(1.0) == 0.0
