"""Feinstein codes for a noisy computation: greedy construction and exact checks.

A code is a list of codewords ``y_i`` over B^n, each standing for the input
class ``A_i = (f^n)^-1(y_i)``, with pairwise disjoint decision regions
``Gamma_i`` in C^n. It is an ``[M, n, eps]`` code when every checked
``x^n`` in ``A_i`` lands in ``Gamma_i`` with probability at least ``1 - eps``.

Construction scans typical ``y^n`` lexicographically. A candidate's region is
grown from the still-unclaimed ``z^n`` in decreasing order of cascade
likelihood ``P(z^n|y^n)`` until every checked input of its class has mass
``>= 1 - eps`` inside it; if the unclaimed mass cannot get there the candidate
is skipped for good.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NoisyCompError
from .infomeasures import cascade_channel, conditional_entropy_given_function, pushforward
from .model import ENUMERATION_GUARD, Alphabet, all_sequences, join_seq, seq_code, split_seq
from .typicality import cond_typical_count_indices, iter_cond_typical_indices, typical_indices

log = logging.getLogger(__name__)

ACCEPT_MARGIN = 1e-12
ROW_SEQ_LIMIT = 1 << 16  # distinct device-row sequences examined per class


@dataclass(frozen=True, eq=False)
class CodeEntry:
    codeword: tuple      # labels over B
    region: tuple        # label tuples over C, lexicographic
    input_class: tuple = None  # per position, the preimage labels of the codeword symbol


@dataclass(frozen=True, eq=False)
class FeinsteinCode:
    n: int
    epsilon: float
    codeword_alphabet: Alphabet
    output_alphabet: Alphabet
    entries: tuple
    requested: int = 0
    exhausted: bool = False
    _codeword_idx: np.ndarray = field(default=None, repr=False)
    _region_codes: tuple = field(default=None, repr=False)

    def __post_init__(self):
        if self._codeword_idx is None:
            cw = np.array([self.codeword_alphabet.encode(e.codeword) for e in self.entries],
                          dtype=np.int64).reshape(len(self.entries), self.n)
            object.__setattr__(self, "_codeword_idx", cw)
        if self._region_codes is None:
            nc = len(self.output_alphabet)
            codes = tuple(np.sort(seq_code(np.array([self.output_alphabet.encode(z) for z in e.region],
                                                     dtype=np.int64).reshape(-1, self.n), nc))
                          for e in self.entries)
            object.__setattr__(self, "_region_codes", codes)

    @property
    def size(self):
        return len(self.entries)

    def codeword_indices(self):
        return self._codeword_idx

    def region_codes(self, i):
        """Lexicographic ranks of the z^n in region i (sorted)."""
        return self._region_codes[i]

    def owner_table(self):
        """Array over all z^n ranks: index of the region containing it, or -1."""
        owner = np.full(len(self.output_alphabet) ** self.n, -1, dtype=np.int64)
        for i, codes in enumerate(self._region_codes):
            owner[codes] = i
        return owner


def lemma_code_size(rate_r, n, h_x_given_fx):
    """floor(e^{n (R - H(X|f(X)))}), never negative."""
    expo = n * (rate_r - h_x_given_fx)
    if expo > 700:
        raise NoisyCompError("TOO_LARGE", f"code size e^{expo:.1f} is not representable")
    # guard against e^0 evaluating a hair under 1 after rounding in the caller's rate
    return max(int(math.floor(math.exp(expo) + 1e-12)), 0)


def row_classes(F):
    """Map each input position to the smallest position with an identical channel row."""
    cls = np.arange(F.matrix.shape[0])
    for a in range(F.matrix.shape[0]):
        for b in range(a):
            if np.array_equal(F.matrix[a], F.matrix[b]):
                cls[a] = cls[b]
                break
    return cls


def single_row_letters(inst):
    """Row class selected by each letter y, if every positive-mass preimage of y shares one row.

    Returns None when some letter mixes device rows (the device is then not a
    function of f(x) alone on the source support).
    """
    rc = row_classes(inst.F)
    probs = inst.source.probs
    out = np.full(len(inst.f.codomain), -1, dtype=np.int64)
    for b, pre in inst.f.preimages.items():
        cls = {int(rc[a]) for a in pre if probs[a] > 0}
        if len(cls) > 1:
            return None
        if cls:
            out[b] = cls.pop()
    return out


def class_row_sequences(inst, yidx, delta, strict=False, guard=ENUMERATION_GUARD):
    """Distinct device-row sequences over the checked inputs of (f^n)^-1(y^n).

    The exact error of x^n only depends on which row of F each x_j selects, so
    this is all :func:`exact_max_error` has to look at. Returns an (r, n) array,
    possibly empty when nothing in the class is conditionally typical.
    """
    f = inst.f
    rc = row_classes(inst.F)
    n = len(yidx)
    if strict:
        opts = [sorted({int(rc[a]) for a in f.preimages.get(int(b), ())}) for b in yidx]
        if any(not o for o in opts):
            raise NoisyCompError("EMPTY_PREIMAGE", "codeword symbol outside the image of f")
        total = math.prod(len(o) for o in opts)
        if total > ROW_SEQ_LIMIT:
            raise NoisyCompError("TOO_LARGE", f"{total} row sequences in one input class")
        if total == 1:
            return np.array([[o[0] for o in opts]], dtype=np.int64)
        return np.array(list(itertools.product(*opts)), dtype=np.int64).reshape(-1, n)

    probs = inst.source.probs
    py = pushforward(inst.source, f).probs
    per_pos = []
    for b in yidx:
        pre = [a for a in f.preimages.get(int(b), ()) if probs[a] > 0 and py[int(b)] > 0]
        per_pos.append({int(rc[a]) for a in pre})
    if all(len(s) == 1 for s in per_pos):
        if cond_typical_count_indices(inst.source, f, yidx, delta) == 0:
            return np.zeros((0, n), dtype=np.int64)
        return np.array([[next(iter(s)) for s in per_pos]], dtype=np.int64)
    size = math.prod(len(f.preimages.get(int(b), ())) for b in yidx)
    if size > guard:
        raise NoisyCompError("TOO_LARGE", f"input class of size {size} exceeds the enumeration guard")
    seen = {}
    for x in iter_cond_typical_indices(inst.source, f, yidx, delta):
        r = rc[x]
        seen.setdefault(r.tobytes(), r)
        if len(seen) > ROW_SEQ_LIMIT:
            raise NoisyCompError("TOO_LARGE", "too many distinct row sequences in one input class")
    if not seen:
        return np.zeros((0, n), dtype=np.int64)
    return np.array(sorted(seen.values(), key=lambda r: tuple(r)), dtype=np.int64)


def _logs(m):
    with np.errstate(divide="ignore"):
        return np.log(m)


def block_likelihood(W, seq, Z):
    """prod_j W[seq_j, z_j] for every row z of Z, by direct products."""
    out = np.ones(Z.shape[0])
    for j, s in enumerate(seq):
        out *= W[s][Z[:, j]]
    return out


# Per-letter log-likelihoods are rounded to a 2^-20 grid so block sums are exact:
# mathematically tied z^n tie exactly and ties fall back to lexicographic rank.
KEY_SCALE = 2.0 ** 20


class _PrefixSums:
    """Block log-likelihood keys for a lexicographic stream of codewords.

    Consecutive candidates share long prefixes, so partial sums over the
    common prefix are reused.
    """

    def __init__(self, letter_keys, Z):
        self.cols = [letter_keys[:, Z[:, j]] for j in range(Z.shape[1])]  # [b, z] per position
        self.n = Z.shape[1]
        self.sums = [np.zeros(Z.shape[0])] + [None] * self.n
        self.prev = None

    def __call__(self, y):
        d = 0
        if self.prev is not None:
            while d < self.n and self.prev[d] == y[d]:
                d += 1
        for j in range(d, self.n):
            self.sums[j + 1] = self.sums[j] + self.cols[j][y[j]]
        self.prev = y.copy()
        return self.sums[self.n]


def _unclaimed_bound(Wmax, claimed, n, nc):
    """sum over unclaimed z^n of prod_j Wmax[y_j, z_j], for every y^n (by lexicographic rank)."""
    T = (~claimed).astype(float).reshape((nc,) * n)
    for j in range(n):
        T = np.moveaxis(np.tensordot(T, Wmax.T, axes=([j], [0])), -1, j)
    return T.ravel()


def _grow_region(keys, claimed, rows, W, Z, need, start):
    """Smallest prefix of the unclaimed z^n, in decreasing key order, giving every row mass >= need.

    Returns the sorted region ranks or None. Only the top ``t`` keys are
    ordered, doubling ``t`` until the cut is found.
    """
    avail = np.flatnonzero(~claimed & np.isfinite(keys))
    if avail.size == 0:
        return None
    neg = -keys[avail]
    t = min(max(start, 16), avail.size)
    while True:
        if t < avail.size:
            part = np.argpartition(neg, t - 1)[:t]
            # keep everything tied with the t-th key so the prefix is exact
            part = np.flatnonzero(neg <= neg[part].max())
        else:
            part = np.arange(avail.size)
        top = avail[part]
        order = top[np.lexsort((top, -keys[top]))]
        cut = 0
        short = False
        for r in rows:
            cum = np.cumsum(block_likelihood(W, r, Z[order]))
            i = int(np.searchsorted(cum, need))
            if i >= order.size:
                short = True
                break
            cut = max(cut, i)
        if not short:
            return np.sort(order[:cut + 1])
        if part.size == avail.size:
            return None
        t = min(4 * t, avail.size)


def build_feinstein_code(inst, n, epsilon, rate_r, delta=None, delta_y=None, strict=False,
                         guard=ENUMERATION_GUARD, max_codewords=None):
    """Greedy [M, n, epsilon] code, M = lemma_code_size(rate_r, n, H(X|f(X))).

    ``delta`` selects the conditionally typical inputs whose error is checked
    (``strict=True`` checks every input of each class). With ``delta_y`` set,
    only y^n typical for f(X) are candidates; by default every y^n of positive
    probability is. Stops at M codewords (or ``max_codewords`` if smaller) or
    when the candidates run out, in which case ``exhausted`` is set.
    """
    if not 0 < epsilon < 1:
        raise NoisyCompError("BAD_EPSILON", f"epsilon {epsilon!r} not in (0, 1)")
    f, F = inst.f, inst.F
    h_cond = conditional_entropy_given_function(inst.source, f)
    target = lemma_code_size(rate_r, n, h_cond)
    if target < 1:
        raise NoisyCompError("RATE_TOO_HIGH",
                             f"rate {rate_r:.6g} <= H(X|f(X)) = {h_cond:.6g} asks for no codewords")
    if max_codewords is not None:
        target = min(target, max_codewords)
    nb, nc = len(f.codomain), len(F.output)
    if n * nb ** n > guard or nc ** n > guard:
        raise NoisyCompError("TOO_LARGE", f"n={n} exceeds the enumeration guard")
    if delta is None:
        delta = max(0.1 * h_cond, 1e-6)
    py = pushforward(inst.source, f)
    if delta_y is None:
        cands = all_sequences(nb, n)
        cands = cands[np.all(py.probs[cands] > 0, axis=1)]
    else:
        cands = typical_indices(py.probs, n, delta_y, guard)

    W_cascade, _ = cascade_channel(inst.source, f, F)
    letter_keys = np.round(_logs(np.nan_to_num(W_cascade, nan=0.0)) * KEY_SCALE) / KEY_SCALE
    W = F.matrix
    Z = all_sequences(nc, n)
    claimed = np.zeros(Z.shape[0], dtype=bool)
    need = 1.0 - epsilon + ACCEPT_MARGIN
    keys_for = _PrefixSums(letter_keys, Z)

    # per-letter pointwise max over the preimage bounds every checked row from above;
    # the bound only shrinks as regions are claimed, so a stale copy stays valid
    Wmax = np.zeros((nb, nc))
    for b, pre in f.preimages.items():
        Wmax[b] = W[list(pre)].max(axis=0)
    bound = _unclaimed_bound(Wmax, claimed, n, nc)
    ranks = seq_code(cands, nb)
    single = None if strict else single_row_letters(inst)
    nonempty = {}
    empty = np.zeros((0, n), dtype=np.int64)

    def rows_for(y):
        if single is None:
            return class_row_sequences(inst, y, delta, strict, guard)
        # one device row per letter: the class is checked iff it has a typical member,
        # which depends on y only through its symbol counts
        key = np.bincount(y, minlength=nb).tobytes()
        if key not in nonempty:
            nonempty[key] = cond_typical_count_indices(inst.source, f, y, delta) > 0
        return single[y][None, :] if nonempty[key] else empty

    entries, cw_rows, regions = [], [], []
    last_size = 16
    # a candidate below the bound cannot reach 1 - eps; checked in bulk first
    for i in np.flatnonzero(bound[ranks] >= need - 1e-9):
        y, rank = cands[i], ranks[i]
        if bound[rank] < need - 1e-9:
            continue
        rows = rows_for(y)
        if rows.shape[0] == 0:
            continue
        region = _grow_region(keys_for(y), claimed, rows, W, Z, need, 2 * last_size)
        if region is None:
            bound = _unclaimed_bound(Wmax, claimed, n, nc)
            if not bound.max() >= need - 1e-9:
                break
            continue
        last_size = region.size
        claimed[region] = True
        cw_rows.append(y)
        regions.append(region)
        if len(regions) == target:
            break

    entries = [CodeEntry(codeword=f.codomain.decode(y),
                         region=tuple(F.output.decode(Z[c]) for c in region),
                         input_class=tuple(f.domain.decode(f.preimages[int(b)]) for b in y))
               for y, region in zip(cw_rows, regions)]
    exhausted = len(entries) < target
    if exhausted:
        log.info("EXHAUSTED: found %d of %d codewords (n=%d, eps=%g)",
                 len(entries), target, n, epsilon)
    return FeinsteinCode(
        n=n, epsilon=float(epsilon), codeword_alphabet=f.codomain, output_alphabet=F.output,
        entries=tuple(entries), requested=target, exhausted=exhausted,
        _codeword_idx=np.array(cw_rows, dtype=np.int64).reshape(len(entries), n),
        _region_codes=tuple(regions),
    )


def entry_errors(code, inst, delta=None, strict=False, guard=ENUMERATION_GUARD):
    """Worst-case error of each entry over its checked inputs (NaN if none is checked)."""
    nc = len(code.output_alphabet)
    if nc ** code.n > guard:
        raise NoisyCompError("TOO_LARGE", f"|C|^n = {nc}^{code.n} exceeds the enumeration guard")
    if delta is None:
        delta = max(0.1 * conditional_entropy_given_function(inst.source, inst.f), 1e-6)
    W = inst.F.matrix
    Z = all_sequences(nc, code.n)
    out = np.full(code.size, np.nan)
    for i, y in enumerate(code.codeword_indices()):
        rows = class_row_sequences(inst, y, delta, strict, guard)
        region = Z[code.region_codes(i)]
        worst = -np.inf
        for r in rows:
            worst = max(worst, 1.0 - float(block_likelihood(W, r, region).sum()))
        if rows.shape[0]:
            out[i] = max(worst, 0.0)
    return out


def exact_max_error(code, inst, delta=None, strict=False, guard=ENUMERATION_GUARD):
    """max_i max_{checked x^n in A_i} P(Gamma_i^c | x^n), by exact summation."""
    errs = entry_errors(code, inst, delta, strict, guard)
    errs = errs[~np.isnan(errs)]
    return float(errs.max()) if errs.size else 0.0


def regions_disjoint(code):
    seen = set()
    for i in range(code.size):
        codes = set(code.region_codes(i).tolist())
        if seen & codes:
            return False
        seen |= codes
    return True


# ---- text format ---------------------------------------------------------

FORMAT_TAG = "feinstein-code 1"


def _check_labels(alph):
    for s in alph.symbols:
        if not s or "." in s or any(ch.isspace() for ch in s):
            raise NoisyCompError("SERIALIZATION_ERROR",
                                 f"label {s!r} cannot be written ('.' or whitespace)")


def dumps(code):
    """Serialize to the line format; floats use repr so the round trip is exact."""
    _check_labels(code.codeword_alphabet)
    _check_labels(code.output_alphabet)
    lines = [
        FORMAT_TAG,
        f"n {code.n}",
        f"epsilon {code.epsilon!r}",
        f"codeword-alphabet {join_seq(code.codeword_alphabet.symbols)}",
        f"output-alphabet {join_seq(code.output_alphabet.symbols)}",
        f"entries {code.size}",
    ]
    for e in code.entries:
        lines.append(f"codeword {join_seq(e.codeword)}")
        lines.append(f"region-size {len(e.region)}")
        lines.extend(join_seq(z) for z in e.region)
    return "\n".join(lines) + "\n"


def loads(text):
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    pos = 0

    def take(key):
        nonlocal pos
        if pos >= len(lines):
            raise NoisyCompError("PARSE_ERROR", f"unexpected end of file, wanted {key!r}")
        line = lines[pos]
        pos += 1
        if key is None:
            return line
        head, _, rest = line.partition(" ")
        if head != key:
            raise NoisyCompError("PARSE_ERROR", f"line {pos}: expected {key!r}, got {line!r}")
        return rest

    if take(None) != FORMAT_TAG:
        raise NoisyCompError("PARSE_ERROR", "line 1: not a feinstein-code file")
    try:
        n = int(take("n"))
        eps = float(take("epsilon"))
        ba = Alphabet(split_seq(take("codeword-alphabet")))
        ca = Alphabet(split_seq(take("output-alphabet")))
        m = int(take("entries"))
        entries = []
        for _ in range(m):
            cw = split_seq(take("codeword"))
            size = int(take("region-size"))
            region = tuple(split_seq(take(None)) for _ in range(size))
            if len(cw) != n or any(len(z) != n for z in region):
                raise NoisyCompError("PARSE_ERROR", f"line {pos}: sequence length differs from n={n}")
            entries.append(CodeEntry(codeword=cw, region=region))
    except ValueError as exc:
        if isinstance(exc, NoisyCompError):
            raise
        raise NoisyCompError("PARSE_ERROR", f"line {pos}: {exc}") from None
    if pos != len(lines):
        raise NoisyCompError("PARSE_ERROR", f"line {pos + 1}: trailing content")
    return FeinsteinCode(n=n, epsilon=eps, codeword_alphabet=ba, output_alphabet=ca,
                         entries=tuple(entries), requested=m)


def with_input_classes(code, f):
    """Copy of ``code`` with each entry's input class filled in from ``f``."""
    entries = tuple(CodeEntry(e.codeword, e.region,
                              tuple(f.domain.decode(f.preimages[f.codomain.index(b)])
                                    for b in e.codeword))
                    for e in code.entries)
    return FeinsteinCode(code.n, code.epsilon, code.codeword_alphabet, code.output_alphabet,
                         entries, code.requested, code.exhausted,
                         code._codeword_idx, code._region_codes)
