"""Reliable computation of g on an outer source through a noisy device.

A block of ``k`` outer symbols ``x'^k`` is encoded into ``x^n`` (``U``), the
device turns it into ``z^n``, the decision region containing ``z^n`` names a
codeword ``y_i`` and ``V`` maps that codeword back to a value of ``g^k``.

Encoding works on typical ``x'^k`` only. They are grouped by ``g^k(x'^k)``,
each group is sent to its own code entry, and the members are placed
injectively on conditionally typical sequences of that entry's input class, so
``f^n(U(a)) = f^n(U(b))`` exactly when ``g^k(a) = g^k(b)``.
"""

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .capacity import capacity_iid
from .coding import block_likelihood, build_feinstein_code, exact_max_error, row_classes
from .errors import NoisyCompError
from .infomeasures import conditional_entropy_given_function, entropy, h2, typical_input_rate
from .model import ENUMERATION_GUARD, all_sequences, sample_indices, seq_code
from .typicality import cond_typical_count_indices, iter_cond_typical_indices, typical_indices, typical_mask

Z95 = 1.959963984540054
GAMMA_EPS = 1e-12


def encoding_gamma(outer_source, g, inner_source, f):
    """H(X'|g(X')) / H(X|f(X)); DEGENERATE_GAMMA when f is injective on the support."""
    h_in = conditional_entropy_given_function(inner_source, f)
    if h_in <= GAMMA_EPS:
        raise NoisyCompError("DEGENERATE_GAMMA",
                             "H(X|f(X)) = 0: f loses nothing, use plain Feinstein coding instead")
    return conditional_entropy_given_function(outer_source, g) / h_in


class BlockLengths(NamedTuple):
    k: int
    n: int
    gamma: float
    flag: str = ""  # "OUTER_INJECTIVE" when gamma = 0


def choose_block_lengths(outer, inner, delta2, k_max=64):
    """Smallest k <= k_max with an integer n in (gamma k, (gamma + delta2/H(X|f)) k).

    ``outer`` and ``inner`` are (Pmf, DetFunction) pairs.
    """
    if not delta2 > 0:
        raise NoisyCompError("BAD_DELTA", f"delta2 {delta2!r} must be > 0")
    gamma = encoding_gamma(outer[0], outer[1], inner[0], inner[1])
    slope = gamma + delta2 / conditional_entropy_given_function(inner[0], inner[1])
    for k in range(1, k_max + 1):
        n = math.floor(k * gamma + 1e-9) + 1
        if n < k * slope - 1e-9:
            return BlockLengths(k, n, gamma, "OUTER_INJECTIVE" if gamma <= GAMMA_EPS else "")
    raise NoisyCompError("NO_PAIR", f"no (k, n) with k <= {k_max} for gamma={gamma:.6g}")


@dataclass(frozen=True, eq=False)
class ReliablePipeline:
    outer_source: object
    g: object
    inst: object
    k: int
    n: int
    code: object
    delta: float
    delta_cond: float
    gamma: float
    messages: np.ndarray = field(repr=False)     # typical x'^k rows, lexicographic
    encoded: np.ndarray = field(repr=False)      # U(messages[t]) rows over A
    message_group: np.ndarray = field(repr=False)
    group_values: np.ndarray = field(repr=False)  # g^k value rows, one per group
    group_entry: np.ndarray = field(repr=False)   # code entry assigned to each group
    group_nu2: np.ndarray = field(repr=False)
    message_probs: np.ndarray = field(repr=False)

    @property
    def rate(self):
        """k H(X') / n in nats per device use."""
        return self.k * entropy(self.outer_source) / self.n

    @property
    def diagnostics(self):
        sizes = np.bincount(self.message_group, minlength=len(self.group_entry))
        return {"nu1_max": int(sizes.max()), "nu2_min": int(self.group_nu2.min()),
                "nu3": int(len(self.group_entry)), "M": int(self.code.size)}

    @property
    def encoder(self):
        """U as a dict from x'^k label tuples to x^n label tuples."""
        a_out, a_in = self.outer_source.alphabet, self.inst.source.alphabet
        return {a_out.decode(m): a_in.decode(x) for m, x in zip(self.messages, self.encoded)}

    @property
    def decoder_v(self):
        """V as a dict from codeword label tuples to g^k label tuples."""
        cw = self.code.codeword_indices()
        return {self.code.codeword_alphabet.decode(cw[e]): self.g.codomain.decode(v)
                for e, v in zip(self.group_entry, self.group_values)}

    def message_index(self, rows):
        """Positions of x'^k rows in ``messages``, -1 for atypical ones."""
        rows = np.atleast_2d(rows)
        size = len(self.outer_source.alphabet)
        keys = seq_code(self.messages, size)
        q = seq_code(rows, size)
        pos = np.searchsorted(keys, q)
        pos = np.minimum(pos, keys.size - 1)
        return np.where(keys[pos] == q, pos, -1)

    def entry_owner(self):
        return self.code.owner_table()


def _group_order(values_code, masses):
    # decreasing probability, ties broken by lexicographic g^k value
    key = np.round(masses / masses.max(), 12)
    return np.lexsort((values_code, -key))


def build_pipeline(outer_source, g, inst, n, k, code, delta, delta_cond=None, guard=ENUMERATION_GUARD):
    """Assemble encoder U and decoder V around ``code``.

    ``delta`` sets typicality of the outer k-sequences, ``delta_cond``
    (default ``delta``) the conditional typicality of the encoder's outputs.
    """
    f = inst.f
    if g.domain != outer_source.alphabet:
        raise NoisyCompError("ALPHABET_MISMATCH", "g.domain must be the outer source alphabet")
    if code.n != n or code.codeword_alphabet != f.codomain:
        raise NoisyCompError("CODE_MISMATCH", "code was not built for this instance and n")
    if delta_cond is None:
        delta_cond = delta
    gamma = encoding_gamma(outer_source, g, inst.source, f)
    if gamma <= GAMMA_EPS:
        raise NoisyCompError("OUTER_INJECTIVE",
                             "H(X'|g(X')) = 0: g is injective, nothing for the encoder to absorb")
    if n < gamma * k - 1e-9:
        raise NoisyCompError("RATE_ABOVE_ENCODER_LIMIT",
                             f"n={n} < gamma*k={gamma * k:.6g}, so R exceeds H(X')/gamma")

    probs = outer_source.probs
    msgs = typical_indices(probs, k, delta, guard)
    if msgs.shape[0] == 0:
        raise NoisyCompError("EMPTY_TYPICAL_SET", f"no typical {k}-sequences at delta={delta}")
    logs = np.where(probs > 0, np.log(np.where(probs > 0, probs, 1.0)), 0.0)
    mprob = np.exp(np.stack([(msgs == a).sum(axis=1) for a in range(len(probs))], axis=1) @ logs)
    nb2 = len(g.codomain)
    gvals = g.table[msgs]
    gcode = seq_code(gvals, nb2)
    uniq, first, inverse = np.unique(gcode, return_index=True, return_inverse=True)
    masses = np.bincount(inverse, weights=mprob)
    order = _group_order(uniq, masses)
    nu3 = order.size
    if nu3 > code.size:
        raise NoisyCompError("TOO_FEW_CODEWORDS", f"{nu3} groups but only M={code.size} codewords")
    rank = np.empty(nu3, dtype=np.int64)
    rank[order] = np.arange(nu3)
    msg_group = rank[inverse.ravel()]
    group_values = gvals[first[order]]
    group_entry = np.arange(nu3, dtype=np.int64)  # entries in construction order

    cw = code.codeword_indices()
    encoded = np.empty((msgs.shape[0], n), dtype=np.int64)
    nu2 = np.empty(nu3, dtype=np.int64)
    members_of = np.split(np.argsort(msg_group, kind="stable"),
                          np.cumsum(np.bincount(msg_group, minlength=nu3))[:-1])
    counts = {}  # the conditionally typical count depends on y only through its symbol counts
    for grp in range(nu3):
        members = members_of[grp]  # lexicographic already
        y = cw[group_entry[grp]]
        key = np.bincount(y, minlength=len(f.codomain)).tobytes()
        if key not in counts:
            counts[key] = cond_typical_count_indices(inst.source, f, y, delta_cond)
        nu2[grp] = counts[key]
        if members.size > nu2[grp]:
            raise NoisyCompError("GROUP_OVERFLOW",
                                 f"group {grp} has {members.size} members but its class has only "
                                 f"{nu2[grp]} conditionally typical sequences")
        it = iter_cond_typical_indices(inst.source, f, y, delta_cond)
        for m in members:
            encoded[m] = next(it)

    return ReliablePipeline(
        outer_source=outer_source, g=g, inst=inst, k=k, n=n, code=code, delta=float(delta),
        delta_cond=float(delta_cond), gamma=gamma, messages=msgs, encoded=encoded,
        message_group=msg_group, group_values=group_values, group_entry=group_entry,
        group_nu2=nu2, message_probs=mprob,
    )


class RunOutcome(NamedTuple):
    decoded_z: tuple  # None on decoding failure or rejection
    truth_z: tuple
    correct: bool
    status: str       # "ok", "error", "decode_failure" or "REJECTED_ATYPICAL"


def _decode_entries(p, zrows):
    """Code entry whose region holds each z^n, -1 if none."""
    owner = p.entry_owner()
    return owner[seq_code(zrows, len(p.inst.F.output))]


def _entry_to_group(p):
    out = np.full(p.code.size, -1, dtype=np.int64)
    out[p.group_entry] = np.arange(len(p.group_entry))
    return out


def run_once(p, x_prime_seq, seed):
    """Encode, run the device once, decode. Failures are reported in the outcome."""
    a_out = p.outer_source.alphabet
    xi = a_out.encode(x_prime_seq)
    truth = p.g.codomain.decode(p.g.table[xi])
    m = int(p.message_index(xi[None, :])[0])
    if m < 0:
        return RunOutcome(None, truth, False, "REJECTED_ATYPICAL")
    rng = np.random.default_rng(seed)
    z = sample_indices(p.inst.F.matrix, p.encoded[m], rng)
    e = int(_decode_entries(p, z[None, :])[0])
    if e < 0:
        return RunOutcome(None, truth, False, "decode_failure")
    grp = _entry_to_group(p)[e]
    if grp < 0:
        return RunOutcome(None, truth, False, "decode_failure")
    decoded = p.g.codomain.decode(p.group_values[grp])
    ok = decoded == truth
    return RunOutcome(decoded, truth, ok, "ok" if ok else "error")


@dataclass(frozen=True)
class ErrorEstimate:
    avg_error: float
    max_message_error: float
    trials: int
    rejected_atypical: int
    seed: int
    ci_halfwidth: float
    exact_avg_error: float = None
    max_error_exact: bool = False
    max_error_se: float = 0.0  # standard error of max_message_error, 0 when exact
    mc_max_group_error: float = None

    def as_dict(self):
        return dict(self.__dict__)


def wilson_halfwidth(errors, total, z=Z95):
    if total == 0:
        return 1.0
    p = errors / total
    denom = 1 + z * z / total
    return z * math.sqrt(p * (1 - p) / total + z * z / (4 * total * total)) / denom


SIM_CHUNK = 1 << 14


def _simulate_chunk(p, seed, chunk, size, ctx):
    owner, e2g, h_out, logs = ctx
    rng = np.random.default_rng([seed, chunk])
    P = p.outer_source.probs[None, :]
    draws = sample_indices(P, np.zeros((size, p.k), dtype=np.int64), rng)
    ok = typical_mask(draws, p.outer_source.probs, h_out, p.delta)
    msg = p.message_index(draws[ok])
    if np.any(msg < 0):  # typicality mask and message table must agree
        raise AssertionError("typical draw missing from the message table")
    z = sample_indices(p.inst.F.matrix, p.encoded[msg], rng)
    ent = owner[seq_code(z, len(p.inst.F.output))]
    dec_group = np.where(ent >= 0, e2g[np.maximum(ent, 0)], -1)
    truth_group = p.message_group[msg]
    return truth_group, dec_group, int((~ok).sum())


def simulate_pairs(p, trials, seed, workers=1):
    """Run ``trials`` source draws; returns (true group, decoded group or -1, rejected count).

    Draws come in fixed-size chunks seeded by (seed, chunk index), so the
    result does not depend on ``workers``.
    """
    if trials < 1:
        raise NoisyCompError("BAD_TRIALS", f"trials={trials} < 1")
    ctx = (p.entry_owner(), _entry_to_group(p), entropy(p.outer_source), None)
    sizes = [min(SIM_CHUNK, trials - s) for s in range(0, trials, SIM_CHUNK)]
    jobs = [(c, s) for c, s in enumerate(sizes)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda j: _simulate_chunk(p, seed, j[0], j[1], ctx), jobs))
    else:
        parts = [_simulate_chunk(p, seed, c, s, ctx) for c, s in jobs]
    truth = np.concatenate([t for t, _, _ in parts])
    dec = np.concatenate([d for _, d, _ in parts])
    return truth, dec, sum(r for _, _, r in parts)


def exact_message_errors(p, guard=ENUMERATION_GUARD):
    """P(decoded value != g^k(x')) for every encoded message, summed exactly over z^n."""
    F = p.inst.F
    nc = len(F.output)
    if nc ** p.n > guard:
        raise NoisyCompError("TOO_LARGE", f"|C|^n = {nc}^{p.n} exceeds the enumeration guard")
    Z = all_sequences(nc, p.n)
    rc = row_classes(F)
    out = np.empty(p.messages.shape[0])
    for grp, e in enumerate(p.group_entry):
        members = np.flatnonzero(p.message_group == grp)
        region = Z[p.code.region_codes(int(e))]
        rows = rc[p.encoded[members]]
        uniq, inv = np.unique(rows, axis=0, return_inverse=True)
        errs = np.array([1.0 - block_likelihood(F.matrix, r, region).sum() for r in uniq])
        out[members] = np.maximum(errs[inv.ravel()], 0.0)
    return out


def simulate(p, trials, seed, workers=1, guard=ENUMERATION_GUARD):
    """Monte Carlo average error with a Wilson interval, plus the maximal per-message error.

    The maximal error is exact whenever |C|^n fits the guard; otherwise it is
    the largest empirical per-group error.
    """
    truth, dec, rejected = simulate_pairs(p, trials, seed, workers)
    accepted = truth.size
    if accepted == 0:
        raise NoisyCompError("NO_ACCEPTED_TRIALS", f"all {trials} draws were atypical")
    wrong = dec != truth
    errors = int(wrong.sum())
    avg = errors / accepted
    ci = wilson_halfwidth(errors, accepted)
    ng = len(p.group_entry)
    per_n = np.bincount(truth, minlength=ng)
    per_e = np.bincount(truth, weights=wrong, minlength=ng)
    seen = per_n > 0
    rates = per_e[seen] / per_n[seen]
    gi = int(np.argmax(rates))
    mc_max = float(rates[gi])
    mc_se = math.sqrt(mc_max * (1 - mc_max) / per_n[seen][gi])
    if len(p.inst.F.output) ** p.n <= guard:
        errs = exact_message_errors(p, guard)
        w = p.message_probs / p.message_probs.sum()
        return ErrorEstimate(avg, float(errs.max()), trials, rejected, seed, ci,
                             exact_avg_error=float(w @ errs), max_error_exact=True,
                             max_error_se=0.0, mc_max_group_error=mc_max)
    return ErrorEstimate(avg, mc_max, trials, rejected, seed, ci, max_error_se=mc_se,
                         mc_max_group_error=mc_max)


def empirical_mutual_information(a, b):
    """Plug-in I(a; b) in nats from paired integer samples."""
    a = np.asarray(a)
    b = np.asarray(b)
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    J = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(J, (ai.ravel(), bi.ravel()), 1.0)
    J /= J.sum()
    return max(entropy(J.sum(axis=1)) + entropy(J.sum(axis=0)) - entropy(J.ravel()), 0.0)


def converse_bound(h_xprime, h_xprime_given_g, gamma, i_f_F, k, out_alphabet_size):
    """Smallest Pe with H(X') - H(X'|g) - gamma I <= h2(Pe)/k + Pe ln|B'|.

    Returns 0 when the left side is <= 0 and 1 when no Pe in [0, 1] works.
    """
    if k < 1:
        raise NoisyCompError("BAD_K", f"k={k} < 1")
    lhs = h_xprime - h_xprime_given_g - gamma * i_f_F
    if lhs <= 0:
        return 0.0
    ln_b = math.log(out_alphabet_size)

    def rhs(pe):
        return h2(pe) / k + pe * ln_b

    # rhs increases up to its peak at |B'|^k / (1 + |B'|^k)
    peak = 1.0 / (1.0 + out_alphabet_size ** (-k))
    if rhs(peak) < lhs:
        return 1.0
    lo, hi = 0.0, peak
    while hi - lo > 1e-9:
        mid = 0.5 * (lo + hi)
        if rhs(mid) >= lhs:
            hi = mid
        else:
            lo = mid
    return hi


# ---- rate / error sweep ----------------------------------------------------

SWEEP_COLUMNS = ("k", "n", "R_nats", "capacity_estimate", "avg_error", "max_error",
                 "converse_lower_bound", "trials", "seed", "status")
DEFAULT_EPS_GRID = tuple(float(e) for e in np.round(np.geomspace(1e-4, 0.99, 60), 6))


@dataclass(frozen=True)
class SweepConfig:
    """Everything a sweep needs; rows follow ``schedule`` order.

    ``epsilons`` are the code error targets tried per row; the feasible code
    with the smallest exact max error wins (ties go to the smaller epsilon).
    ``exact_max_n`` caps the n at which the per-message error is summed
    exactly; above it the per-group Monte Carlo maximum is reported.
    ``device_info`` is the per-use information term of the converse; by
    default I(f(X); F(X)) under the instance's source. Passing the Shannon
    capacity of F instead gives a bound that holds for any encoder.
    """
    outer_source: object
    g: object
    inst: object
    schedule: tuple            # (k, n) pairs
    trials: int = 100_000
    seed: int = 0
    delta: float = 0.1         # outer typicality
    delta_cond: float = 1.2    # conditional typicality, shared by code check and encoder
    delta_y: float = None      # restrict codewords to typical y^n when set
    epsilons: tuple = DEFAULT_EPS_GRID
    exact_max_n: int = None
    capacity_estimate: float = None
    device_info: float = None
    workers: int = 1
    guard: int = ENUMERATION_GUARD


def outer_group_count(outer_source, g, k, delta, guard=ENUMERATION_GUARD):
    """Number of distinct g^k values over the typical outer k-sequences."""
    msgs = typical_indices(outer_source.probs, k, delta, guard)
    return int(np.unique(seq_code(g.table[msgs], len(g.codomain))).size)


def _best_code(cfg, n, groups):
    h_cond = conditional_entropy_given_function(cfg.inst.source, cfg.inst.f)
    rate_r = h_cond + math.log(groups + 0.5) / n  # asks for exactly `groups` codewords
    best = None
    for eps in cfg.epsilons:
        code = build_feinstein_code(cfg.inst, n, eps, rate_r, delta=cfg.delta_cond,
                                    delta_y=cfg.delta_y, guard=cfg.guard, max_codewords=groups)
        if code.size < groups:
            continue
        err = exact_max_error(code, cfg.inst, delta=cfg.delta_cond, guard=cfg.guard)
        if best is None or err < best[0]:
            best = (err, code)
    if best is None:
        raise NoisyCompError("TOO_FEW_CODEWORDS",
                             f"no epsilon in the grid gives {groups} codewords at n={n}")
    return best[1]


def sweep_row(cfg, k, n, capacity, device_info):
    """One schedule entry as a dict of the sweep columns plus diagnostics."""
    h_out = entropy(cfg.outer_source)
    h_out_g = conditional_entropy_given_function(cfg.outer_source, cfg.g)
    row = {"k": k, "n": n, "R_nats": k * h_out / n, "capacity_estimate": capacity,
           "avg_error": None, "max_error": None,
           "converse_lower_bound": converse_bound(h_out, h_out_g, n / k, device_info, k,
                                                  len(cfg.g.codomain)),
           "trials": cfg.trials, "seed": cfg.seed, "status": "ok"}
    try:
        groups = outer_group_count(cfg.outer_source, cfg.g, k, cfg.delta, cfg.guard)
        code = _best_code(cfg, n, groups)
        p = build_pipeline(cfg.outer_source, cfg.g, cfg.inst, n, k, code, cfg.delta,
                           delta_cond=cfg.delta_cond, guard=cfg.guard)
        exact_ok = cfg.exact_max_n is None or n <= cfg.exact_max_n
        est = simulate(p, cfg.trials, cfg.seed, cfg.workers, cfg.guard if exact_ok else 0)
    except NoisyCompError as exc:
        row["status"] = exc.code
        return row
    row.update(avg_error=est.avg_error, max_error=est.max_message_error)
    row["extra"] = {"epsilon": code.epsilon, **p.diagnostics, "ci_halfwidth": est.ci_halfwidth,
                    "max_error_exact": est.max_error_exact, "max_error_se": est.max_error_se,
                    "rejected_atypical": est.rejected_atypical,
                    "mc_max_group_error": est.mc_max_group_error,
                    "exact_avg_error": est.exact_avg_error}
    return row


def rate_error_sweep(cfg):
    """Build code and pipeline for every (k, n) in the schedule and simulate.

    A failing row keeps its status code and empty error fields; the sweep
    carries on with the next row.
    """
    capacity = cfg.capacity_estimate
    if capacity is None:
        capacity = capacity_iid(cfg.inst.f, cfg.inst.F).value
    device_info = cfg.device_info
    if device_info is None:
        device_info = typical_input_rate(cfg.inst).i_yz
    return [sweep_row(cfg, int(k), int(n), capacity, device_info) for k, n in cfg.schedule]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def sweep_csv(rows):
    """CSV text of the sweep rows with LF line endings."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in SWEEP_COLUMNS])
    return buf.getvalue()


def sweep_json(rows):
    return json.dumps(rows, indent=2, sort_keys=True) + "\n"
