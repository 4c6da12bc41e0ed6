"""Sampling approximations of directional limiting objects.

The oracle follows the definition of the directional limiting normal cone
literally: it walks along sequences ``x + t_k (u + d_k w)`` with ``t_k`` and
``d_k`` shrinking, evaluates the exact Fréchet cone at every point that lies in
the set and keeps the cones that are stable over the tail of a sequence.
Only which cells get visited is approximate; every cone is exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product

from .cones import UnionSet, _conic, _tangent_pieces, frechet_normal_cone
from .geometry import ConeUnion, add, is_zero, scale, vec, zeros

DEFAULT_STEPS = tuple(Fraction(1, 2**k) for k in range(3, 17))
DEFAULT_DELTAS = (Fraction(0),) + tuple(Fraction(1, 2**k) for k in range(2, 11))


@dataclass(frozen=True)
class SampleSchedule:
    """Step sizes, offset scales and offset directions for the sampler.

    ``mode`` is ``"white"`` (offsets are representatives of the arrangement
    cells next to the direction) or ``"black"`` (a fixed integer lattice).
    Explicit ``offsets`` override both.  Term ``k`` of a sequence uses step
    ``steps[k]`` and the ``k``-th nonzero offset scale (the last one once they
    run out), so steps and offsets shrink together; the zero offset gives the
    pure ray ``x + t u``.
    """

    steps: tuple = DEFAULT_STEPS
    deltas: tuple = DEFAULT_DELTAS
    mode: str = "white"
    offsets: tuple | None = None
    lattice_radius: int = 1
    tail: int = 3
    cap: int = 50000

    def __post_init__(self):
        if any(Fraction(t) <= 0 for t in self.steps):
            raise ValueError("steps must be positive")
        if any(b >= a for a, b in zip(self.steps, self.steps[1:])):
            raise ValueError("steps must be strictly decreasing")
        if any(Fraction(d) < 0 for d in self.deltas):
            raise ValueError("offset scales must be nonnegative")
        if self.mode not in ("white", "black"):
            raise ValueError("mode must be 'white' or 'black'")

    def delta(self, k: int) -> Fraction:
        nz = [Fraction(d) for d in self.deltas if d != 0]
        if not nz:
            return Fraction(0)
        return nz[min(k, len(nz) - 1)]


def lattice(n: int, radius: int = 1) -> list:
    pts = [tuple(Fraction(c) for c in p) for p in product(range(-radius, radius + 1), repeat=n)]
    return [p for p in pts if not is_zero(p)]


def _normalize(w):
    m = max(abs(x) for x in w)
    return tuple(Fraction(x) / m for x in w) if m else tuple(w)


def _white_offsets(D: UnionSet, x, u) -> list:
    K = _conic(D.dim, _tangent_pieces(D, x))
    return [_normalize(c.witness) for c in K.cells_at(u) if not is_zero(c.witness)]


def _offsets(D, x, u, s: SampleSchedule) -> list:
    if s.offsets is not None:
        return [vec(w) for w in s.offsets]
    if s.mode == "white":
        try:
            return _white_offsets(D, x, u)
        except Exception:
            return lattice(D.dim, s.lattice_radius)
    return lattice(D.dim, s.lattice_radius)


@lru_cache(maxsize=20000)
def _frechet_at(D: UnionSet, z: tuple):
    return frechet_normal_cone(D, z)


def _sequences(D, x, u, s: SampleSchedule):
    """Yield lists of ``(point, cone or None)`` per offset sequence."""
    x, u = vec(x), vec(u)
    offs = [zeros(D.dim)] + _offsets(D, x, u, s)
    count = 0
    for w in offs:
        seq = []
        for k, t in enumerate(s.steps):
            d = s.delta(k) if not is_zero(w) else Fraction(0)
            z = add(x, scale(add(u, scale(w, d)), Fraction(t)))
            count += 1
            if count > s.cap:
                return
            seq.append((z, _frechet_at(D, z) if D.contains(z) else None))
        yield seq


def sample_dir_frechet(D: UnionSet, x, u, s: SampleSchedule | None = None) -> list:
    """``(point, Fréchet cone)`` for every sampled point that lies in ``D``."""
    s = s or SampleSchedule()
    out = []
    for seq in _sequences(D, x, u, s):
        out += [(z, c) for z, c in seq if c is not None]
    return out


def _tail_cones(seqs, tail: int) -> list:
    cones = []
    for seq in seqs:
        last = [c for _, c in seq[-tail:]]
        if last and all(c is not None for c in last) and all(c == last[-1] for c in last):
            cones.append(last[-1])
    return cones


def approx_dir_limiting(D: UnionSet, x, u, s: SampleSchedule | None = None) -> ConeUnion:
    """Union of the tail-stable sampled Fréchet cones."""
    s = s or SampleSchedule()
    return ConeUnion(D.dim, _tail_cones(_sequences(D, x, u, s), s.tail))


def approx_vertical(D: UnionSet, z, h, direction: int, s: SampleSchedule | None = None) -> ConeUnion:
    """Sampled cone of an epigraph-like set for directions ``(h, +-inf)``.

    Points are ``z + t_k ((h, nu_k) + d_k w)`` with ``|nu_k| = 2^floor(j/2)``
    for ``t_k = 2^-j``, so ``nu_k`` diverges while ``t_k nu_k`` tends to 0.
    White-box offsets come from the cells of the tangent cone of the localized
    set at the vertical unit vector, next to ``(h, 0)``.
    """
    s = s or SampleSchedule()
    z, h = vec(z), vec(h)
    n1 = D.dim
    e = zeros(n1 - 1) + (Fraction(direction),)
    hz = tuple(h) + (Fraction(0),)
    offs = None
    if s.offsets is not None:
        offs = [vec(w) for w in s.offsets]
    elif s.mode == "white":
        K = _conic(n1, _tangent_pieces(D, z))
        inner = [P for P in K.pieces if P.contains(e)]
        if inner:
            K2 = UnionSet(n1, inner)
            offs = _white_offsets(K2, e, hz)
        else:
            offs = []
    if offs is None:
        offs = lattice(n1, s.lattice_radius)
    seqs = []
    for w in [zeros(n1)] + offs:
        seq = []
        for k, t in enumerate(s.steps):
            t = Fraction(t)
            j = round(math.log2(t.denominator)) if t.numerator == 1 else k + 3
            nu = Fraction(2 ** (j // 2)) * direction
            d = s.delta(k) if not is_zero(w) else Fraction(0)
            dirv = add(tuple(h) + (nu,), scale(w, d))
            p = add(z, scale(dirv, t))
            seq.append((p, _frechet_at(D, p) if D.contains(p) else None))
        seqs.append(seq)
    return ConeUnion(n1, _tail_cones(seqs, s.tail))


# ---------------------------------------------------------------------------
# Gamma classification


@dataclass
class GammaResult:
    """Finite-prefix candidates for the limit sets of ``a_k / t_k`` and ``a_k / |a_k|``."""

    gamma: list = field(default_factory=list)
    gamma_inf: list = field(default_factory=list)
    caveat: str = "classification from a finite prefix; limits are not decidable from finitely many terms"


GROWTH_THRESHOLD = 1000


def _clusters(values, close) -> list:
    reps: list = []
    for v in values:
        if not any(close(v, r) for r in reps):
            reps.append(v)
    return reps


def gamma_classify(a, t) -> GammaResult:
    """Candidates for the cluster sets of ``a_k / t_k`` and of ``a_k / |a_k|``.

    ``a_k / t_k`` is considered divergent when its max-norm exceeds
    ``GROWTH_THRESHOLD`` and keeps growing over the second half of the
    prefix; then the normalized directions are clustered (as floats, since
    unit vectors are irrational in general).  Otherwise the ratios in the
    second half are clustered exactly.
    """
    if len(a) != len(t):
        raise ValueError("sequences a and t must have the same length")
    if len(a) < 3:
        raise ValueError("need at least three terms")
    a = [vec(x) for x in a]
    t = [Fraction(x) for x in t]
    if any(x <= 0 for x in t) or any(y >= x for x, y in zip(t, t[1:])):
        raise ValueError("t must be positive and strictly decreasing")
    half = len(a) // 2
    ratios = [tuple(x / tk for x in ak) for ak, tk in zip(a, t)]
    growth = [max((abs(x) for x in r), default=Fraction(0)) for r in ratios]
    tail = list(range(half, len(a)))
    diverging = growth[-1] > GROWTH_THRESHOLD and all(growth[i] < growth[i + 1] for i in tail[:-1])
    if diverging:
        dirs = []
        for i in tail:
            nrm = math.sqrt(sum(float(x) ** 2 for x in a[i]))
            dirs.append(tuple(round(float(x) / nrm, 12) for x in a[i]))
        reps = _clusters(dirs, lambda p, q: max(abs(x - y) for x, y in zip(p, q)) < 1e-6)
        return GammaResult([], reps)

    def close(p, q):
        return max((abs(x - y) for x, y in zip(p, q)), default=0) <= Fraction(1, 10**6) * (1 + max(abs(x) for x in q))

    reps = _clusters([ratios[i] for i in tail], close)
    return GammaResult(reps, [])
