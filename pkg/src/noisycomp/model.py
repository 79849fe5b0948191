"""Finite alphabets, distributions, deterministic functions and memoryless channels.

Every object here is immutable. Symbols are opaque text labels; all numerics
index by the position of a label in its :class:`Alphabet`. Block objects are
the memoryless (product) extensions: ``f^n`` acts symbol by symbol and
``F^n(z^n|x^n) = prod_j F(z_j|x_j)``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import NoisyCompError

PROB_TOL = 1e-9

# upper limit on |alphabet|^n for anything that enumerates whole blocks
ENUMERATION_GUARD = 2 ** 24


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Alphabet:
    symbols: tuple

    def __post_init__(self):
        syms = tuple(str(s) for s in self.symbols)
        if not syms:
            raise NoisyCompError("EMPTY_ALPHABET", "an alphabet needs at least one symbol")
        if len(set(syms)) != len(syms):
            raise NoisyCompError("DUPLICATE_SYMBOL", f"labels must be distinct: {syms}")
        object.__setattr__(self, "symbols", syms)
        object.__setattr__(self, "_pos", {s: i for i, s in enumerate(syms)})

    def __len__(self):
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    def index(self, symbol):
        try:
            return self._pos[str(symbol)]
        except KeyError:
            raise NoisyCompError("UNKNOWN_SYMBOL", f"{symbol!r} not in {self.symbols}") from None

    def encode(self, seq):
        """Labels -> int array of positions."""
        return np.array([self.index(s) for s in seq], dtype=np.int64)

    def decode(self, idx):
        return tuple(self.symbols[int(i)] for i in idx)


def alphabet(*symbols):
    """``alphabet("0", "1")`` or ``alphabet(["0", "1"])``."""
    if len(symbols) == 1 and not isinstance(symbols[0], str):
        symbols = tuple(symbols[0])
    return Alphabet(tuple(symbols))


@dataclass(frozen=True, eq=False)
class Pmf:
    alphabet: Alphabet
    probs: np.ndarray

    def __len__(self):
        return len(self.alphabet)

    def __getitem__(self, symbol):
        return float(self.probs[self.alphabet.index(symbol)])


def _check_probs(probs, what):
    if np.any(~np.isfinite(probs)):
        raise NoisyCompError("NEGATIVE_PROB", f"{what}: non-finite entry")
    if np.any(probs < 0):
        raise NoisyCompError("NEGATIVE_PROB", f"{what}: entry below zero")


def make_pmf(alph, probs):
    """Validated distribution; malformed input is rejected, never renormalized."""
    if not isinstance(alph, Alphabet):
        alph = alphabet(alph)
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size != len(alph):
        raise NoisyCompError("LENGTH_MISMATCH", f"{p.size} probabilities for {len(alph)} symbols")
    _check_probs(p, "pmf")
    if abs(p.sum() - 1.0) > PROB_TOL:
        raise NoisyCompError("BAD_SUM", f"probabilities sum to {p.sum()!r}")
    return Pmf(alph, _frozen(p))


def uniform_pmf(alph):
    return make_pmf(alph, np.full(len(alph), 1.0 / len(alph)))


@dataclass(frozen=True, eq=False)
class DetFunction:
    domain: Alphabet
    codomain: Alphabet
    table: np.ndarray  # table[i] = codomain position of f(domain[i])
    preimages: dict = field(compare=False, repr=False)  # codomain pos -> tuple of domain pos

    def __call__(self, symbol):
        return self.codomain.symbols[self.table[self.domain.index(symbol)]]

    @property
    def image(self):
        return tuple(sorted(self.preimages))

    def partition(self):
        """Preimage classes keyed by output label."""
        return {self.codomain.symbols[b]: self.domain.decode(cls)
                for b, cls in self.preimages.items()}

    def is_injective(self):
        return all(len(c) == 1 for c in self.preimages.values())

    def indicator(self):
        """|A| x |B| 0/1 matrix of the map."""
        m = np.zeros((len(self.domain), len(self.codomain)))
        m[np.arange(len(self.domain)), self.table] = 1.0
        return m


def make_det_function(domain, codomain, table):
    """``table`` maps every domain label to a codomain label (dict or sequence)."""
    if isinstance(table, dict):
        table = {str(k): v for k, v in table.items()}
        missing = [a for a in domain if a not in table]
        if missing:
            raise NoisyCompError("PARTIAL_TABLE", f"no image for {missing}")
        extra = set(table) - set(domain.symbols)
        if extra:
            raise NoisyCompError("UNKNOWN_SYMBOL", f"table keys {sorted(extra)} not in domain")
        images = [table[a] for a in domain]
    else:
        images = list(table)
        if len(images) != len(domain):
            raise NoisyCompError("PARTIAL_TABLE", f"{len(images)} images for {len(domain)} inputs")
    idx = np.array([codomain.index(b) for b in images], dtype=np.int64)
    idx.setflags(write=False)
    pre = {}
    for a, b in enumerate(idx):
        pre.setdefault(int(b), []).append(a)
    pre = {b: tuple(v) for b, v in sorted(pre.items())}
    return DetFunction(domain, codomain, idx, pre)


def identity_function(alph):
    return make_det_function(alph, alph, list(alph.symbols))


@dataclass(frozen=True, eq=False)
class DMChannel:
    input: Alphabet
    output: Alphabet
    matrix: np.ndarray  # matrix[x, z] = F(z|x)

    def row(self, symbol):
        return self.matrix[self.input.index(symbol)]

    def compose(self, other):
        """This channel followed by ``other``."""
        if other.input != self.output:
            raise NoisyCompError("ALPHABET_MISMATCH", "output of first channel must feed the second")
        return make_channel(self.input, other.output, self.matrix @ other.matrix)


def make_channel(inp, out, matrix):
    m = np.asarray(matrix, dtype=float)
    if m.shape != (len(inp), len(out)):
        raise NoisyCompError("LENGTH_MISMATCH", f"matrix shape {m.shape} != ({len(inp)}, {len(out)})")
    _check_probs(m, "channel")
    sums = m.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > PROB_TOL)
    if bad.size:
        r = int(bad[0])
        raise NoisyCompError("BAD_ROW_SUM", f"row {r} ({inp.symbols[r]!r}) sums to {sums[r]!r}")
    return DMChannel(inp, out, _frozen(m))


BINARY = Alphabet(("0", "1"))


def bsc(p, inp=BINARY, out=BINARY):
    """Binary symmetric channel with crossover probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise NoisyCompError("BAD_P", f"crossover {p!r} outside [0, 1]")
    return make_channel(inp, out, [[1.0 - p, p], [p, 1.0 - p]])


def fn_as_channel(f):
    """The deterministic channel x -> f(x)."""
    return make_channel(f.domain, f.codomain, f.indicator())


def uniform_noise_channel(inp, out):
    """Output independent of input, uniform over ``out``."""
    return make_channel(inp, out, np.full((len(inp), len(out)), 1.0 / len(out)))


@dataclass(frozen=True, eq=False)
class NoisyComputationInstance:
    """Source X over A, perfect function f: A -> B, noisy device F: A -> C."""
    source: Pmf
    f: DetFunction
    F: DMChannel

    def __post_init__(self):
        a = self.source.alphabet
        if self.f.domain != a or self.F.input != a:
            raise NoisyCompError("ALPHABET_MISMATCH",
                                 "source, f.domain and F.input must share one alphabet")


def apply_block(f, xseq):
    """Per-symbol application of ``f`` to a sequence of labels."""
    idx = f.domain.encode(xseq)
    return f.codomain.decode(f.table[idx]) if idx.size else ()


def sample_indices(matrix, xidx, rng):
    """Draw one output position per input position (inverse-CDF, one uniform each)."""
    xidx = np.asarray(xidx, dtype=np.int64)
    cdf = np.cumsum(matrix, axis=1)
    u = rng.random(xidx.shape)
    rows = cdf[xidx]
    out = (rows <= u[..., None]).sum(axis=-1)
    return np.minimum(out, matrix.shape[1] - 1)


def sample_block(F, xseq, rng_seed):
    """Memoryless channel output for ``xseq``; a pure function of (F, xseq, seed)."""
    idx = F.input.encode(xseq)
    rng = np.random.default_rng(rng_seed)
    return F.output.decode(sample_indices(F.matrix, idx, rng))


# ---- block index helpers -------------------------------------------------

def all_sequences(size, n):
    """Every length-n sequence over ``range(size)`` as rows, in lexicographic order."""
    total = size ** n
    if total > ENUMERATION_GUARD:
        raise NoisyCompError("TOO_LARGE", f"{size}^{n} sequences exceed the enumeration guard")
    if n == 0:
        return np.zeros((1, 0), dtype=np.int64)
    codes = np.arange(total, dtype=np.int64)
    powers = size ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return (codes[:, None] // powers) % size


def seq_code(rows, size):
    """Inverse of :func:`all_sequences`: lexicographic rank of each row."""
    rows = np.asarray(rows, dtype=np.int64)
    n = rows.shape[-1]
    powers = size ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return rows @ powers


def join_seq(labels, sep="."):
    return sep.join(labels)


def split_seq(text, sep="."):
    return tuple(text.split(sep)) if text else ()
