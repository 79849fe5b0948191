"""Typical input capacity over i.i.d. sources, with brute-force and Blahut-Arimoto checks.

B(P_X) = H(X) - H(f(X)|F(X)) need not be concave in P_X (the cascade f^-1 F
moves with P_X), so :func:`capacity_iid` runs projected gradient ascent from
many starts and keeps the best. Because only i.i.d. sources are searched the
result is a lower bound on the capacity over all AMS ergodic sources.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import NoisyCompError
from .infomeasures import rate_from_probs
from .model import make_pmf

CLIP = 1e-12
LABEL = "i.i.d. lower bound"


@dataclass(frozen=True, eq=False)
class CapacityResult:
    value: float
    argmax: object  # Pmf
    restarts_used: int
    converged: bool
    trace: list = field(repr=False)
    label: str = LABEL


@dataclass(frozen=True)
class CapacityOptions:
    restarts: int = 32
    max_iters: int = 10_000
    tol: float = 1e-10
    seed: int = 0


def project_simplex(v):
    """Euclidean projection onto the probability simplex (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / ks > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def _check(f, F):
    if f.domain != F.input:
        raise NoisyCompError("ALPHABET_MISMATCH", "f.domain must equal F.input")


def _starts(size, restarts, rng):
    uniform = np.full(size, 1.0 / size)
    starts = [uniform]
    for i in range(size):
        if len(starts) >= restarts:
            break
        starts.append(0.8 * np.eye(size)[i] + 0.2 * uniform)
    while len(starts) < restarts:
        starts.append(rng.dirichlet(np.ones(size)))
    return starts[:restarts]


def rate_gradient(p, ind, W):
    """Gradient of B at ``p`` (entries clipped at CLIP, as in the objective).

    dB/dp_x = sum_c W[x,c] ln(J[f(x),c] / q_c) - ln p_x - 1; finite at the boundary
    whenever x is the only mass-carrying preimage of f(x).
    """
    p = np.maximum(p, CLIP)
    J = ind.T @ (p[:, None] * W)   # P(f(X) = b, Z = c)
    q = J.sum(axis=0)
    Jx = J[ind.argmax(axis=1)]     # row f(x) for every x
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(W > 0, W * np.log(Jx / q), 0.0)
    return t.sum(axis=1) - np.log(p) - 1.0


def _ascend(p, objective, gradient, opts):
    value = objective(p)
    trace = [(0, value)]
    step = 1.0
    for it in range(1, opts.max_iters + 1):
        grad = gradient(p)
        grad -= grad.mean()
        # stationary on the simplex: the projected unit step barely moves
        if np.abs(project_simplex(p + grad) - p).max() < opts.tol:
            return p, value, True, trace
        improved = False
        t = step
        for _ in range(60):
            cand = project_simplex(p + t * grad)
            cv = objective(cand)
            if cv > value:
                improved = True
                break
            t *= 0.5
        if not improved:
            return p, value, True, trace
        p, value = cand, cv
        trace.append((it, value))
        step = 2 * t
    return p, value, False, trace


def capacity_iid(f, F, opts=None, **kw):
    """Best B(P_X) over the simplex found by multistart projected ascent.

    ``opts`` is a :class:`CapacityOptions`; keyword arguments override its fields.
    """
    _check(f, F)
    opts = opts or CapacityOptions()
    if kw:
        opts = CapacityOptions(**{**opts.__dict__, **kw})
    ind, W = f.indicator(), F.matrix

    def objective(p):
        return rate_from_probs(np.maximum(p, CLIP), ind, W)

    rng = np.random.default_rng(opts.seed)
    best = None
    for i, start in enumerate(_starts(len(f.domain), opts.restarts, rng)):
        p, _, conv, trace = _ascend(start, objective, lambda q: rate_gradient(q, ind, W), opts)
        exact = rate_from_probs(p, ind, W)  # unclipped
        if best is None or exact > best[0]:
            best = (exact, p, conv, trace)
    value, p, conv, trace = best
    return CapacityResult(value=value, argmax=make_pmf(f.domain, p),
                          restarts_used=opts.restarts, converged=conv, trace=trace)


def lattice_counts(size, m):
    """All nonnegative integer rows of length ``size`` summing to ``m``."""
    if size == 1:
        return np.array([[m]], dtype=np.int64)
    blocks = []
    for first in range(m, -1, -1):
        rest = lattice_counts(size - 1, m - first)
        blocks.append(np.column_stack([np.full(rest.shape[0], first), rest]))
    return np.concatenate(blocks)


def _rates_batch(P, ind, W):
    def xlogx(a):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(a > 0, a * np.log(np.where(a > 0, a, 1.0)), 0.0)
    J = np.einsum("nx,xb,xc->nbc", P, ind, W)
    return (-xlogx(P).sum(axis=1) + xlogx(J).sum(axis=(1, 2))
            - xlogx(J.sum(axis=1)).sum(axis=1))


def capacity_grid_oracle(f, F, resolution):
    """Max of B over the simplex lattice with spacing ``resolution``."""
    _check(f, F)
    size = len(f.domain)
    if size > 5:
        raise NoisyCompError("ALPHABET_TOO_LARGE", f"|A|={size} > 5")
    if resolution not in (0.01, 0.02, 0.05):
        raise NoisyCompError("BAD_RESOLUTION", f"resolution {resolution!r} not in {{0.01, 0.02, 0.05}}")
    m = round(1 / resolution)
    ind, W = f.indicator(), F.matrix
    best = -np.inf
    # split on the first coordinate to bound memory
    for first in range(m + 1):
        rest = lattice_counts(size - 1, m - first) if size > 1 else np.zeros((1, 0), dtype=np.int64)
        if size == 1 and first != m:
            continue
        P = np.column_stack([np.full(rest.shape[0], first), rest]) / m
        best = max(best, float(_rates_batch(P, ind, W).max()))
    return best


def blahut_arimoto(F, tol=1e-12, max_iters=200_000):
    """Shannon capacity of ``F`` in nats.

    Iterates until the gap between the mutual information lower bound and the
    max-divergence upper bound is below ``tol``.
    """
    W = F.matrix
    nx = W.shape[0]
    r = np.full(nx, 1.0 / nx)
    logW = np.where(W > 0, np.log(np.where(W > 0, W, 1.0)), 0.0)
    for _ in range(max_iters):
        q = r @ W
        logq = np.where(q > 0, np.log(np.where(q > 0, q, 1.0)), 0.0)
        d = (W * (logW - logq)).sum(axis=1)  # D(W(.|x) || q)
        lower = float(r @ d)
        upper = float(d.max())
        if upper - lower < tol:
            return max(lower, 0.0)
        r = r * np.exp(d)
        r /= r.sum()
    raise NoisyCompError("NO_CONVERGENCE", f"gap {upper - lower:.3e} after {max_iters} iterations")
