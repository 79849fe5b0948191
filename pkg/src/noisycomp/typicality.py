"""Weakly typical and conditionally typical sequences.

A sequence is typical for a pmf when ``|-(1/n) ln p(x^n) - H| <= delta``.
Given ``y^n``, an ``x^n`` in the preimage ``(f^n)^-1(y^n)`` is conditionally
typical when ``|-(1/n) ln P(x^n|y^n) - (1/n) sum_j H(X|Y=y_j)| <= delta``;
centring on the entropy of the actual ``y^n`` is what makes a uniform
conditional typical for every ``delta >= 0``.

Log-probabilities are always computed from symbol counts (``counts @ log p``)
so that counting by types and filtering enumerated sequences agree bit for
bit.
"""

from dataclasses import dataclass
from math import factorial, exp

import numpy as np

from .errors import NoisyCompError
from .infomeasures import entropy, pushforward
from .model import ENUMERATION_GUARD, Pmf

SLACK = 1e-12  # absorbs summation-order noise at the delta boundary


def default_delta(pmf):
    return max(0.1 * entropy(pmf), 1e-6)


@dataclass(frozen=True, eq=False)
class TypicalSpec:
    pmf: Pmf
    n: int
    delta: float

    def __post_init__(self):
        if self.n < 1:
            raise NoisyCompError("BAD_N", f"block length {self.n} < 1")
        if not self.delta > 0:
            raise NoisyCompError("BAD_DELTA", f"delta {self.delta!r} must be > 0")

    @property
    def entropy(self):
        return entropy(self.pmf)


@dataclass(frozen=True, eq=False)
class CondTypicalSpec:
    source: Pmf
    f: object  # DetFunction
    yseq: tuple
    delta: float

    def __post_init__(self):
        if self.delta < 0:
            raise NoisyCompError("BAD_DELTA", f"delta {self.delta!r} must be >= 0")


def _logs(probs):
    out = np.zeros(len(probs))
    pos = probs > 0
    out[pos] = np.log(probs[pos])
    return out


def _compositions(total, parts):
    """All nonnegative integer vectors of length ``parts`` summing to ``total``."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _multinomial(counts):
    out = factorial(sum(counts))
    for c in counts:
        out //= factorial(c)
    return out


def _counts(rows, size):
    """Symbol counts along the last axis, as floats."""
    rows = np.asarray(rows, dtype=np.int64)
    flat = rows.reshape(-1, rows.shape[-1]) if rows.ndim else rows.reshape(1, 1)
    offs = np.arange(flat.shape[0], dtype=np.int64)[:, None] * size
    out = np.bincount((flat + offs).ravel(), minlength=flat.shape[0] * size)
    return out.reshape(rows.shape[:-1] + (size,)).astype(float)


# ---- unconditional -------------------------------------------------------

def _within(logp, n, center, delta):
    return np.abs(-logp / n - center) <= delta + SLACK


def is_typical_indices(idx, probs, n, h, delta):
    idx = np.asarray(idx)
    if np.any(probs[idx] == 0):
        return False
    logp = _counts(idx, len(probs)) @ _logs(probs)
    return bool(_within(logp, n, h, delta))


def is_typical(xseq, spec):
    """Weak typicality of a label sequence of length ``spec.n``."""
    idx = spec.pmf.alphabet.encode(xseq)
    if idx.size != spec.n:
        raise NoisyCompError("LENGTH_MISMATCH", f"sequence length {idx.size} != n={spec.n}")
    return is_typical_indices(idx, spec.pmf.probs, spec.n, spec.entropy, spec.delta)


def typical_mask(rows, probs, h, delta):
    """Vectorised typicality for a 2-D array of index rows."""
    rows = np.asarray(rows)
    n = rows.shape[1]
    counts = _counts(rows, len(probs))
    support = probs > 0
    ok = (counts[:, ~support].sum(axis=1) == 0)
    logp = counts @ _logs(probs)
    return ok & _within(logp, n, h, delta)


def _typical_types(probs, n, h, delta):
    support = np.flatnonzero(probs > 0)
    logs = _logs(probs)
    for comp in _compositions(n, len(support)):
        counts = np.zeros(len(probs))
        counts[support] = comp
        if _within(counts @ logs, n, h, delta):
            yield counts, comp


def typical_count(spec):
    """Exact size of the typical set, counted by types (no enumeration)."""
    return sum(_multinomial(comp) for _, comp in
               _typical_types(spec.pmf.probs, spec.n, spec.entropy, spec.delta))


def typical_mass(spec):
    """Exact probability of the typical set."""
    probs = spec.pmf.probs
    logs = _logs(probs)
    return float(sum(_multinomial(comp) * exp(counts @ logs) for counts, comp in
                     _typical_types(probs, spec.n, spec.entropy, spec.delta)))


def iter_sequence_blocks(radices, chunk=1 << 16, first=None):
    """Mixed-radix enumeration in lexicographic order, yielded as digit blocks.

    With ``first`` set, blocks start at that size and grow 4x up to ``chunk``,
    which keeps short lazy scans cheap.
    """
    radices = np.asarray(radices, dtype=np.int64)
    total = int(np.prod(radices)) if radices.size else 1
    weights = np.ones(radices.size, dtype=np.int64)
    for j in range(radices.size - 2, -1, -1):
        weights[j] = weights[j + 1] * radices[j + 1]
    start = 0
    size = chunk if first is None else min(first, chunk)
    while start < total:
        codes = np.arange(start, min(start + size, total), dtype=np.int64)
        yield (codes[:, None] // weights) % radices
        start += size
        size = min(4 * size, chunk)


def _sequences_of_types(types, n):
    """Every sequence whose symbol counts are one of ``types`` (rows), lexicographic."""
    size = types.shape[1]
    prefix = np.zeros((types.shape[0], 0), dtype=np.int64)
    rem = types.astype(np.int64)
    for _ in range(n):
        parts_p, parts_r = [], []
        for a in range(size):
            sel = rem[:, a] > 0
            r = rem[sel].copy()
            r[:, a] -= 1
            parts_p.append(np.column_stack([prefix[sel], np.full(int(sel.sum()), a, dtype=np.int64)]))
            parts_r.append(r)
        prefix, rem = np.concatenate(parts_p), np.concatenate(parts_r)
    return prefix[np.lexsort(prefix.T[::-1])] if prefix.size else prefix


def typical_indices(probs, n, delta, guard=ENUMERATION_GUARD):
    """All typical sequences as index rows, lexicographic.

    Built type by type, so only the typical set itself has to fit the guard.
    """
    probs = np.asarray(probs, dtype=float)
    h = entropy(probs)
    types = list(_typical_types(probs, n, h, delta))
    total = sum(_multinomial(comp) for _, comp in types)
    if total > guard:
        raise NoisyCompError("TOO_LARGE", f"{total} typical sequences of length {n} exceed the enumeration guard {guard}")
    if not types:
        return np.zeros((0, n), dtype=np.int64)
    return _sequences_of_types(np.array([c for c, _ in types]), n)


def typical_set(spec, guard=ENUMERATION_GUARD):
    """Lexicographically ordered list of typical label sequences."""
    rows = typical_indices(spec.pmf.probs, spec.n, spec.delta, guard)
    return [spec.pmf.alphabet.decode(r) for r in rows]


@dataclass(frozen=True)
class AepBounds:
    card_upper: float
    card_lower: float
    note: str = "card_lower holds only for n large enough that the typical set has mass >= 1 - 2*epsilon"


def aep_bounds(spec, epsilon=0.05):
    """Cardinality bounds e^{n(H+delta)} and (1-2 epsilon) e^{n(H-delta)}."""
    h, n, d = spec.entropy, spec.n, spec.delta
    return AepBounds(card_upper=exp(n * (h + d)), card_lower=(1 - 2 * epsilon) * exp(n * (h - d)))


def typical_mass_mc(spec, samples, seed):
    """Monte Carlo estimate of the typical set's probability and its standard error."""
    rng = np.random.default_rng(seed)
    probs = spec.pmf.probs
    hits = 0
    done = 0
    while done < samples:
        m = min(1 << 15, samples - done)
        rows = rng.choice(len(probs), size=(m, spec.n), p=probs)
        hits += int(typical_mask(rows, probs, spec.entropy, spec.delta).sum())
        done += m
    p = hits / samples
    return p, (p * (1 - p) / samples) ** 0.5


# ---- conditional ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class _CondModel:
    options: list        # per position: sorted domain indices with positive conditional mass
    cond_logs: np.ndarray  # ln P(x | f(x)), 0 where undefined
    center: float        # (1/n) sum_j H(X | Y = y_j)
    n: int
    size: int


def _cond_model(source, f, yidx):
    probs = source.probs
    py = pushforward(source, f).probs
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(py[f.table] > 0, probs / py[f.table], 0.0)
    h_given = {}
    options = []
    for b in yidx:
        b = int(b)
        pre = f.preimages.get(b, ())
        opts = tuple(a for a in pre if cond[a] > 0)
        if not opts:
            raise NoisyCompError("EMPTY_PREIMAGE",
                                 f"{f.codomain.symbols[b]!r} has no preimage of positive probability")
        if b not in h_given:
            h_given[b] = entropy(cond[list(opts)])
        options.append(opts)
    n = len(yidx)
    center = sum(h_given[int(b)] for b in yidx) / n if n else 0.0
    return _CondModel(options, _logs(cond), center, n, len(probs))


def _cond_model_from_spec(spec, n=None):
    yidx = spec.f.codomain.encode(spec.yseq)
    if n is not None and n != yidx.size:
        raise NoisyCompError("LENGTH_MISMATCH", f"len(yseq)={yidx.size} != n={n}")
    return _cond_model(spec.source, spec.f, yidx)


def _cond_ok(model, counts, delta):
    return _within(counts @ model.cond_logs, model.n, model.center, delta)


def cond_typical_count_indices(source, f, yidx, delta):
    """Exact number of conditionally typical x^n given y^n, by joint types."""
    # the count depends on y^n only through its symbol counts
    ycounts = np.bincount(np.asarray(yidx, dtype=np.int64), minlength=len(f.codomain))
    key = (source.probs.tobytes(), f.table.tobytes(), ycounts.tobytes(), float(delta))
    if key not in _COND_COUNTS:
        if len(_COND_COUNTS) >= COND_CACHE_SIZE:
            _COND_COUNTS.clear()
        _COND_COUNTS[key] = _cond_count(source, f, np.repeat(np.arange(ycounts.size), ycounts), delta)
    return _COND_COUNTS[key]


COND_CACHE_SIZE = 1 << 14
_COND_COUNTS = {}


def _cond_count(source, f, yidx, delta):
    m = _cond_model(source, f, yidx)
    # positions sharing a y value share an option set; count them per option set
    groups = {}
    for opts in m.options:
        groups[opts] = groups.get(opts, 0) + 1
    per_group = [[(opts, comp) for comp in _compositions(cnt, len(opts))]
                 for opts, cnt in groups.items()]
    total = 0

    def walk(i, counts, ways):
        nonlocal total
        if i == len(per_group):
            if _cond_ok(m, counts, delta):
                total += ways
            return
        for opts, comp in per_group[i]:
            c = counts.copy()
            c[list(opts)] += comp
            walk(i + 1, c, ways * _multinomial(comp))

    walk(0, np.zeros(m.size), 1)
    return total


def iter_cond_typical_indices(source, f, yidx, delta, chunk=1 << 16):
    """Lazily yield conditionally typical x^n index rows in lexicographic order."""
    m = _cond_model(source, f, yidx)
    opts = [np.array(o, dtype=np.int64) for o in m.options]
    radices = [len(o) for o in opts]
    for digits in iter_sequence_blocks(radices, chunk, first=64):
        rows = np.empty_like(digits)
        for j, o in enumerate(opts):
            rows[:, j] = o[digits[:, j]]
        keep = _cond_ok(m, _counts(rows, m.size), delta)
        for r in rows[keep]:
            yield r


def is_cond_typical(xseq, spec):
    m = _cond_model_from_spec(spec)
    xidx = spec.source.alphabet.encode(xseq)
    if xidx.size != m.n:
        raise NoisyCompError("LENGTH_MISMATCH", "x and y sequences differ in length")
    for j, x in enumerate(xidx):
        if int(x) not in m.options[j]:
            return False
    return bool(_cond_ok(m, _counts(xidx, m.size), spec.delta))


def cond_typical_set(spec, n, guard=ENUMERATION_GUARD):
    """All conditionally typical x^n with f^n(x^n) = y^n, lexicographic, as label tuples."""
    m = _cond_model_from_spec(spec, n)
    size = int(np.prod([len(o) for o in m.options])) if m.options else 1
    if size > guard:
        raise NoisyCompError("TOO_LARGE", f"preimage of size {size} exceeds the enumeration guard")
    yidx = spec.f.codomain.encode(spec.yseq)
    return [spec.source.alphabet.decode(r)
            for r in iter_cond_typical_indices(spec.source, spec.f, yidx, spec.delta)]


def cond_typical_count(spec):
    yidx = spec.f.codomain.encode(spec.yseq)
    return cond_typical_count_indices(spec.source, spec.f, yidx, spec.delta)
