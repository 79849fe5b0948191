"""Entropies, joint/cascade distributions and the typical input rate, in nats.

Single-letter reduction
-----------------------
With an i.i.d. source, a per-symbol ``f`` and a memoryless ``F`` the pairs
``(X_j, Z_j)`` are independent across positions, and conditioning on
``Y^n = f^n(X^n)`` keeps them independent, each ``X_j`` only depending on
``Y_j``. Hence

    P(z^n | y^n) = prod_j sum_{x in f^-1(y_j)} P(x | y_j) F(z_j | x),

so the cascade ``f^-1 F`` is itself a memoryless channel whose letter is
:func:`cascade_channel`, and every per-block quantity is ``n`` times its
single-letter value. :func:`joint_yz_block` computes the block joint the
long way so tests can check this.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NoisyCompError
from .model import Alphabet, Pmf, PROB_TOL, all_sequences, seq_code


def _xlogx(p):
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    pos = p > 0
    out[pos] = p[pos] * np.log(p[pos])
    return out


def entropy(p):
    """Shannon entropy in nats with 0 ln 0 = 0. Accepts a Pmf or any array of masses."""
    probs = p.probs if isinstance(p, Pmf) else np.asarray(p, dtype=float)
    return float(-_xlogx(probs).sum())


def h2(p):
    """Binary entropy in nats."""
    return entropy([p, 1.0 - p])


@dataclass(frozen=True, eq=False)
class JointPmf:
    row_alphabet: Alphabet
    col_alphabet: Alphabet
    probs: np.ndarray  # probs[r, c]

    def __post_init__(self):
        p = self.probs
        if p.shape != (len(self.row_alphabet), len(self.col_alphabet)):
            raise NoisyCompError("LENGTH_MISMATCH", f"joint shape {p.shape}")
        if np.any(p < 0):
            raise NoisyCompError("NEGATIVE_PROB", "joint has a negative entry")
        if abs(p.sum() - 1.0) > PROB_TOL:
            raise NoisyCompError("BAD_SUM", f"joint sums to {p.sum()!r}")

    @property
    def row_marginal(self):
        return self.probs.sum(axis=1)

    @property
    def col_marginal(self):
        return self.probs.sum(axis=0)


def make_joint(row_alphabet, col_alphabet, probs):
    a = np.array(probs, dtype=float)
    a.setflags(write=False)
    return JointPmf(row_alphabet, col_alphabet, a)


def _check_compatible(P_X, f, F):
    if f.domain != P_X.alphabet or F.input != P_X.alphabet:
        raise NoisyCompError("ALPHABET_MISMATCH", "source, f and F must share the input alphabet")


def joint_xz(P_X, F):
    """The hookup P_X F over A x C."""
    if F.input != P_X.alphabet:
        raise NoisyCompError("ALPHABET_MISMATCH", "source and F must share the input alphabet")
    return make_joint(P_X.alphabet, F.output, P_X.probs[:, None] * F.matrix)


def joint_yz(P_X, f, F):
    """P(y, z) = sum over x in f^-1(y) of P_X(x) F(z|x)."""
    _check_compatible(P_X, f, F)
    return make_joint(f.codomain, F.output, f.indicator().T @ (P_X.probs[:, None] * F.matrix))


def pushforward(P_X, f):
    """Distribution of f(X)."""
    if f.domain != P_X.alphabet:
        raise NoisyCompError("ALPHABET_MISMATCH", "f.domain must be the source alphabet")
    return Pmf(f.codomain, P_X.probs @ f.indicator())


def joint_entropy(J):
    return entropy(J.probs.ravel())


def conditional_entropy(J):
    """H(row | col) = H(J) - H(col marginal)."""
    return max(joint_entropy(J) - entropy(J.col_marginal), 0.0)


def mutual_information(J):
    """I(row; col) = H(row) + H(col) - H(J)."""
    return max(entropy(J.row_marginal) + entropy(J.col_marginal) - joint_entropy(J), 0.0)


# Direct single-sum forms, used as the independent path in RateReport.

def _cond_entropy_direct(J):
    p, pc = J.probs, J.col_marginal
    pos = p > 0
    return float(-(p[pos] * np.log(p[pos] / np.broadcast_to(pc, p.shape)[pos])).sum()) + 0.0


def _mutual_info_direct(J):
    p = J.probs
    outer = np.outer(J.row_marginal, J.col_marginal)
    pos = p > 0
    return float((p[pos] * np.log(p[pos] / outer[pos])).sum())


def conditional_entropy_given_function(P_X, f):
    """H(X | f(X)) = -sum_x P(x) ln(P(x) / P(f(x)))."""
    py = pushforward(P_X, f).probs
    p = P_X.probs
    pos = p > 0
    return float(-(p[pos] * np.log(p[pos] / py[f.table][pos])).sum()) + 0.0


@dataclass(frozen=True)
class RateReport:
    h_x: float
    h_y: float
    h_x_given_y: float
    h_y_given_z: float
    i_yz: float
    b: float
    b_alt: float  # H(X|Y) + I(Y;Z), the second route

    def as_dict(self):
        return dict(self.__dict__)


def typical_input_rate(inst):
    """Typical input rate of ``inst`` (nats per symbol).

    ``b`` is H(X) - H(f(X)|F(X)); ``b_alt`` recomputes it as
    H(X|f(X)) + I(f(X); F(X)) through separate sums.
    """
    P_X, f, F = inst.source, inst.f, inst.F
    _check_compatible(P_X, f, F)
    J = joint_yz(P_X, f, F)
    h_x = entropy(P_X)
    h_y_given_z = _cond_entropy_direct(J)
    h_x_given_y = conditional_entropy_given_function(P_X, f)
    i_yz = _mutual_info_direct(J)
    return RateReport(
        h_x=h_x,
        h_y=entropy(J.row_marginal),
        h_x_given_y=h_x_given_y,
        h_y_given_z=h_y_given_z,
        i_yz=i_yz,
        b=h_x - h_y_given_z,
        b_alt=h_x_given_y + i_yz,
    )


def rate_from_probs(p, f_indicator, F_matrix):
    """B = H(X) - H(f(X)|F(X)) for a raw probability vector; the optimizer's objective."""
    J = f_indicator.T @ (p[:, None] * F_matrix)
    return float(-_xlogx(p).sum() + _xlogx(J).sum() - _xlogx(J.sum(axis=0)).sum())


@dataclass(frozen=True, eq=False)
class ReverseChannel:
    """Posterior P(x|z). Rows of zero-probability outputs are NaN and ``defined`` is False."""
    input: Alphabet   # indexes rows (the noisy output alphabet C)
    output: Alphabet  # the source alphabet A
    matrix: np.ndarray
    defined: np.ndarray

    @property
    def undefined_outputs(self):
        return tuple(s for s, d in zip(self.input.symbols, self.defined) if not d)


def reverse_posterior(P_X, F):
    """Bayes posterior channel F^-1 from C back to A."""
    J = joint_xz(P_X, F).probs  # [x, z]
    pz = J.sum(axis=0)
    defined = pz > 0
    m = np.full((len(F.output), len(P_X.alphabet)), np.nan)
    m[defined] = (J[:, defined] / pz[defined]).T
    m.setflags(write=False)
    defined.setflags(write=False)
    return ReverseChannel(F.output, P_X.alphabet, m, defined)


def cascade_channel(P_X, f, F):
    """Letter of the cascade f^-1 F: matrix[y, z] = P(z|y), and which y rows are defined.

    Rows for y with zero source mass are left as NaN.
    """
    J = joint_yz(P_X, f, F).probs
    py = J.sum(axis=1)
    defined = py > 0
    m = np.full(J.shape, np.nan)
    m[defined] = J[defined] / py[defined, None]
    return m, defined


def joint_yz_block(P_X, f, F, n):
    """Exact joint of (f^n(X^n), F^n(X^n)) by summing over all of A^n.

    Rows/columns are lexicographic ranks of y^n / z^n. Only for tiny n.
    """
    _check_compatible(P_X, f, F)
    na, nb, nc = len(P_X.alphabet), len(f.codomain), len(F.output)
    xs = all_sequences(na, n)
    zs = all_sequences(nc, n)
    px = np.prod(P_X.probs[xs], axis=1)
    ycode = seq_code(f.table[xs], nb)
    out = np.zeros((nb ** n, nc ** n))
    for x, p, yc in zip(xs, px, ycode):
        if p == 0:
            continue
        out[yc] += p * np.prod(F.matrix[x[None, :], zs], axis=1)
    return out
