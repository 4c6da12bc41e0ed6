"""Exact rational polyhedral primitives.

Everything here works over :class:`fractions.Fraction`.  Vectors are tuples,
matrices are tuples of row tuples.  The main objects are

* :class:`HPoly`  -- ``{x : A_i x <= b_i, A_j x = b_j}``; a cone when ``b = 0``,
* :class:`VCone`  -- a polyhedral cone given by extreme rays and a lineality
  basis, always kept in canonical form,
* :class:`ConeUnion` -- a finite union of ``VCone`` pieces.

Conversions between H- and V-form use the double description method with the
combinatorial adjacency test.  Feasibility and redundancy questions go to a
small dense simplex with Bland's rule, so every answer is exact.
"""
from __future__ import annotations

from fractions import Fraction
from itertools import combinations
from math import gcd

from .errors import DimensionError, EmptySet, PointNotInSet

ZERO = Fraction(0)
ONE = Fraction(1)


# ---------------------------------------------------------------------------
# scalars, vectors, matrices


def rat(x) -> Fraction:
    """Parse an exact rational: int, Fraction or a string such as ``"-3/4"``."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"expected an exact rational, got {type(x).__name__}: {x!r}")


def vec(xs) -> tuple:
    return tuple(rat(x) for x in xs)


def mat(rows) -> tuple:
    rows = tuple(vec(r) for r in rows)
    if rows and len({len(r) for r in rows}) != 1:
        raise DimensionError("ragged matrix")
    return rows


def zeros(n: int) -> tuple:
    return (ZERO,) * n


def unit(n: int, i: int, s=1) -> tuple:
    return tuple(Fraction(s) if j == i else ZERO for j in range(n))


def dot(a, b):
    s = 0
    for x, y in zip(a, b):
        if x and y:
            s += x * y
    return s


def add(a, b) -> tuple:
    return tuple(x + y for x, y in zip(a, b))


def sub(a, b) -> tuple:
    return tuple(x - y for x, y in zip(a, b))


def scale(a, t) -> tuple:
    return tuple(t * x for x in a)


def neg(a) -> tuple:
    return tuple(-x for x in a)


def matvec(M, x) -> tuple:
    return tuple(dot(r, x) for r in M)


def transpose(M, ncols: int | None = None) -> tuple:
    if not M:
        return tuple(() for _ in range(ncols or 0))
    return tuple(zip(*M))


def matmul(A, B) -> tuple:
    Bt = transpose(B)
    return tuple(tuple(dot(r, c) for c in Bt) for r in A)


def is_zero(v) -> bool:
    return all(x == 0 for x in v)


def sign(x) -> int:
    return (x > 0) - (x < 0)


def primitive(v) -> tuple:
    """Scale ``v`` by a positive factor to a coprime integer vector."""
    v = [Fraction(x) for x in v]
    den = 1
    for x in v:
        den = den * x.denominator // gcd(den, x.denominator)
    ints = [int(x * den) for x in v]
    g = 0
    for i in ints:
        g = gcd(g, abs(i))
    if g == 0:
        return tuple(ints)
    return tuple(i // g for i in ints)


def rref(rows, n: int):
    """Reduced row echelon form; returns ``(nonzero_rows, pivot_columns)``."""
    M = [[Fraction(x) for x in r] for r in rows]
    pivots: list[int] = []
    r = 0
    for c in range(n):
        if r == len(M):
            break
        p = next((i for i in range(r, len(M)) if M[i][c] != 0), None)
        if p is None:
            continue
        M[r], M[p] = M[p], M[r]
        pv = M[r][c]
        if pv != 1:
            M[r] = [x / pv for x in M[r]]
        for i in range(len(M)):
            if i != r and M[i][c] != 0:
                f = M[i][c]
                M[i] = [a - f * b for a, b in zip(M[i], M[r])]
        pivots.append(c)
        r += 1
    return [tuple(row) for row in M[:r]], pivots


def rank(rows, n: int) -> int:
    return len(rref(rows, n)[1])


def nullspace(rows, n: int) -> list:
    """Basis of ``{x : R x = 0}``."""
    R, piv = rref(rows, n)
    free = [c for c in range(n) if c not in piv]
    basis = []
    for f in free:
        x = [ZERO] * n
        x[f] = ONE
        for row, p in zip(R, piv):
            x[p] = -row[f]
        basis.append(tuple(x))
    return basis


def solve_linear(A, b, n: int):
    """One solution of ``A x = b`` or ``None`` if inconsistent."""
    aug = [tuple(r) + (bi,) for r, bi in zip(A, b)]
    R, piv = rref(aug, n + 1)
    if n in piv:
        return None
    x = [ZERO] * n
    for row, p in zip(R, piv):
        x[p] = row[n]
    return tuple(x)


# ---------------------------------------------------------------------------
# linear programming


def _pivot(T, basis, r, c):
    pv = T[r][c]
    row = T[r]
    if pv != 1:
        row = [x / pv for x in row]
        T[r] = row
    for i in range(len(T)):
        if i != r:
            f = T[i][c]
            if f:
                Ti = T[i]
                T[i] = [a - f * b if b else a for a, b in zip(Ti, row)]
    basis[r] = c


def _simplex(T, basis, allowed) -> bool:
    """Minimize the last tableau row in place; ``False`` if unbounded."""
    obj = T[-1]
    m = len(T) - 1
    while True:
        obj = T[-1]
        c = next((j for j in allowed if obj[j] < 0), None)
        if c is None:
            return True
        best = None
        for i in range(m):
            a = T[i][c]
            if a > 0:
                ratio = T[i][-1] / a
                if best is None or ratio < best[0] or (ratio == best[0] and basis[i] < basis[best[1]]):
                    best = (ratio, i)
        if best is None:
            return False
        _pivot(T, basis, best[1], c)


def lp_maximize(c, A_ub, b_ub, A_eq=(), b_eq=(), n: int | None = None):
    """Maximize ``c.x`` subject to ``A_ub x <= b_ub`` and ``A_eq x = b_eq``.

    Variables are free.  Returns ``(status, x, value)`` where status is one of
    ``"optimal"``, ``"infeasible"``, ``"unbounded"``.
    """
    if n is None:
        n = len(c)
    m1, m2 = len(A_ub), len(A_eq)
    m = m1 + m2
    nv = 2 * n + m1  # x+, x-, slacks
    rows = []
    basis = []
    art_rows = []
    for i in range(m):
        if i < m1:
            a, rhs = A_ub[i], b_ub[i]
        else:
            a, rhs = A_eq[i - m1], b_eq[i - m1]
        row = [Fraction(x) for x in a] + [-Fraction(x) for x in a] + [ZERO] * m1
        if i < m1:
            row[2 * n + i] = ONE
        rhs = Fraction(rhs)
        if rhs < 0:
            row = [-x for x in row]
            rhs = -rhs
        rows.append((row, rhs, i < m1 and row[2 * n + i] == 1))
    n_art = sum(1 for _, _, ok in rows if not ok)
    N = nv + n_art
    T = []
    k = 0
    for i, (row, rhs, ok) in enumerate(rows):
        full = row + [ZERO] * n_art + [rhs]
        if ok:
            basis.append(2 * n + i)
        else:
            full[nv + k] = ONE
            basis.append(nv + k)
            art_rows.append(i)
            k += 1
        T.append(full)
    if n_art:
        obj = [ZERO] * (N + 1)
        for i in art_rows:
            obj = [o - t for o, t in zip(obj, T[i])]
        for j in range(nv, N):
            obj[j] = ZERO
        T.append(obj)
        _simplex(T, basis, range(N))
        if T[-1][-1] != 0:
            return "infeasible", None, None
        T.pop()
        # drive artificials out of the basis
        i = 0
        while i < len(T):
            if basis[i] >= nv:
                c_in = next((j for j in range(nv) if T[i][j] != 0), None)
                if c_in is None:
                    T.pop(i)
                    basis.pop(i)
                    continue
                _pivot(T, basis, i, c_in)
            i += 1
        T = [r[:nv] + [r[-1]] for r in T]
    cost = [-Fraction(x) for x in c] + [Fraction(x) for x in c] + [ZERO] * m1
    obj = cost + [ZERO]
    for i, bv in enumerate(basis):
        cb = cost[bv]
        if cb:
            obj = [o - cb * t for o, t in zip(obj, T[i])]
    T.append(obj)
    if not _simplex(T, basis, range(nv)):
        return "unbounded", None, None
    xs = [ZERO] * nv
    for i, bv in enumerate(basis):
        xs[bv] = T[i][-1]
    x = tuple(xs[j] - xs[n + j] for j in range(n))
    return "optimal", x, dot(c, x)


# ---------------------------------------------------------------------------
# H-polyhedra


class HPoly:
    """``{x : A_i x <= b_i (i not in eq), A_i x = b_i (i in eq)}`` in ``R^dim``."""

    __slots__ = ("dim", "A", "b", "eq", "_key")

    def __init__(self, A, b, eq_rows=(), dim: int | None = None):
        self.A = mat(A)
        self.b = vec(b)
        if dim is None:
            if not self.A:
                raise DimensionError("dimension required for a polyhedron without rows")
            dim = len(self.A[0])
        self.dim = dim
        if len(self.A) != len(self.b):
            raise DimensionError("row count of A and b differ")
        if any(len(r) != dim for r in self.A):
            raise DimensionError("row length differs from ambient dimension")
        self.eq = frozenset(eq_rows)
        if any(i < 0 or i >= len(self.A) for i in self.eq):
            raise DimensionError("equality row index out of range")
        self._key = None

    # construction helpers
    @classmethod
    def from_rows(cls, dim: int, ineqs=(), eqs=()):
        """Build from ``[(a, b), ...]`` lists of inequality and equality rows."""
        A = [a for a, _ in ineqs] + [a for a, _ in eqs]
        b = [bb for _, bb in ineqs] + [bb for _, bb in eqs]
        eq = range(len(ineqs), len(ineqs) + len(eqs))
        return cls(A, b, eq, dim)

    @classmethod
    def space(cls, dim: int):
        return cls((), (), (), dim)

    @classmethod
    def point(cls, x):
        x = vec(x)
        n = len(x)
        return cls.from_rows(n, eqs=[(unit(n, i), x[i]) for i in range(n)])

    @classmethod
    def box(cls, lo, hi):
        lo, hi = vec(lo), vec(hi)
        n = len(lo)
        rows = [(unit(n, i), hi[i]) for i in range(n)] + [(unit(n, i, -1), -lo[i]) for i in range(n)]
        return cls.from_rows(n, rows)

    def ineqs(self) -> list:
        return [(self.A[i], self.b[i]) for i in range(len(self.A)) if i not in self.eq]

    def eqs(self) -> list:
        return [(self.A[i], self.b[i]) for i in range(len(self.A)) if i in self.eq]

    @property
    def is_cone(self) -> bool:
        return all(x == 0 for x in self.b)

    def key(self):
        if self._key is None:
            rows = []
            for i, (a, bb) in enumerate(zip(self.A, self.b)):
                rows.append((i in self.eq, a, bb))
            self._key = (self.dim, tuple(sorted(set(rows))))
        return self._key

    def __eq__(self, other):
        return isinstance(other, HPoly) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"HPoly(dim={self.dim}, ineqs={len(self.ineqs())}, eqs={len(self.eq)})"

    def contains(self, x) -> bool:
        for i, (a, bb) in enumerate(zip(self.A, self.b)):
            v = dot(a, x)
            if i in self.eq:
                if v != bb:
                    return False
            elif v > bb:
                return False
        return True

    def active(self, x) -> list:
        """Indices of inequality rows tight at ``x``."""
        return [i for i, (a, bb) in enumerate(zip(self.A, self.b)) if i not in self.eq and dot(a, x) == bb]

    def intersect(self, *others) -> "HPoly":
        ineqs, eqs = self.ineqs(), self.eqs()
        for o in others:
            if o.dim != self.dim:
                raise DimensionError("intersecting polyhedra of different dimension")
            ineqs += o.ineqs()
            eqs += o.eqs()
        return HPoly.from_rows(self.dim, ineqs, eqs)

    def lift(self, dim: int, offset: int) -> "HPoly":
        """Embed into ``R^dim`` acting on coordinates ``offset .. offset+self.dim-1``."""
        def pad(a):
            return zeros(offset) + tuple(a) + zeros(dim - offset - self.dim)

        return HPoly.from_rows(dim, [(pad(a), bb) for a, bb in self.ineqs()], [(pad(a), bb) for a, bb in self.eqs()])

    def map_rows(self, M, c=None, dim: int | None = None) -> "HPoly":
        """Pre-image ``{z : M z + c in self}``."""
        k = dim if dim is not None else (len(M[0]) if M else 0)
        c = c if c is not None else zeros(self.dim)
        Mt = transpose(M) if M else ()

        def conv(a, bb):
            row = tuple(dot(a, col) for col in Mt) if Mt else zeros(k)
            return row, bb - dot(a, c)

        return HPoly.from_rows(k, [conv(a, bb) for a, bb in self.ineqs()], [conv(a, bb) for a, bb in self.eqs()])

    def fix(self, values: dict) -> "HPoly":
        """Substitute fixed coordinate values; the result lives in the remaining coordinates."""
        keep = [j for j in range(self.dim) if j not in values]

        def conv(a, bb):
            return tuple(a[j] for j in keep), bb - sum((a[j] * rat(v) for j, v in values.items()), ZERO)

        return HPoly.from_rows(len(keep), [conv(a, bb) for a, bb in self.ineqs()], [conv(a, bb) for a, bb in self.eqs()])

    def is_empty(self) -> bool:
        return feasible(self) is None

    def tidy(self) -> "HPoly":
        """Normalize rows, drop trivial and duplicate rows; fixed ordering."""
        ineqs, eqs = set(), set()
        for a, bb in self.ineqs():
            if is_zero(a):
                if bb < 0:
                    return HPoly.from_rows(self.dim, [(zeros(self.dim), -1)])
                continue
            p = primitive(tuple(a) + (bb,))
            ineqs.add(p)
        for a, bb in self.eqs():
            if is_zero(a):
                if bb != 0:
                    return HPoly.from_rows(self.dim, [(zeros(self.dim), -1)])
                continue
            p = primitive(tuple(a) + (bb,))
            first = next(x for x in p if x != 0)
            if first < 0:
                p = tuple(-x for x in p)
            eqs.add(p)
        n = self.dim
        return HPoly.from_rows(
            n,
            [(r[:n], r[n]) for r in sorted(ineqs)],
            [(r[:n], r[n]) for r in sorted(eqs)],
        )


def hcone(dim: int, ineqs=(), eqs=()) -> HPoly:
    """Homogeneous polyhedron ``{x : a.x <= 0 (a in ineqs), e.x = 0 (e in eqs)}``."""
    return HPoly.from_rows(dim, [(a, 0) for a in ineqs], [(e, 0) for e in eqs])


def feasible(P: HPoly, strict_rows=()):
    """A point of ``P`` satisfying the listed inequality rows strictly, or ``None``."""
    strict = set(strict_rows)
    if strict & P.eq:
        raise ValueError("equality rows cannot be strict")
    n = P.dim
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for i, (a, bb) in enumerate(zip(P.A, P.b)):
        if i in P.eq:
            A_eq.append(tuple(a) + (ZERO,))
            b_eq.append(bb)
        else:
            A_ub.append(tuple(a) + ((ONE,) if i in strict else (ZERO,)))
            b_ub.append(bb)
    if not strict:
        if not A_ub and not A_eq:
            return zeros(n)
        status, x, _ = lp_maximize(zeros(n + 1), A_ub, b_ub, A_eq, b_eq, n + 1)
        return None if status == "infeasible" else x[:n]
    A_ub.append(zeros(n) + (ONE,))
    b_ub.append(ONE)
    status, x, val = lp_maximize(zeros(n) + (ONE,), A_ub, b_ub, A_eq, b_eq, n + 1)
    if status != "optimal" or val <= 0:
        return None
    return x[:n]


def lp_max_over(P: HPoly, c):
    """``(status, x, value)`` for maximizing ``c.x`` over ``P``."""
    A_ub = [a for a, _ in P.ineqs()]
    b_ub = [bb for _, bb in P.ineqs()]
    A_eq = [a for a, _ in P.eqs()]
    b_eq = [bb for _, bb in P.eqs()]
    return lp_maximize(c, A_ub, b_ub, A_eq, b_eq, P.dim)


def remove_redundant(P: HPoly) -> HPoly:
    """Drop inequality rows implied by the others (exact LP test)."""
    P = P.tidy()
    ineqs = P.ineqs()
    eqs = P.eqs()
    if feasible(P) is None:
        return HPoly.from_rows(P.dim, [(zeros(P.dim), -1)])
    keep = list(ineqs)
    i = 0
    while i < len(keep):
        a, bb = keep[i]
        others = keep[:i] + keep[i + 1:]
        Q = HPoly.from_rows(P.dim, others, eqs)
        status, _, val = lp_max_over(Q, a)
        if status == "optimal" and val <= bb:
            keep.pop(i)
        else:
            i += 1
    return HPoly.from_rows(P.dim, keep, eqs)


def fourier_motzkin(P: HPoly, eliminate) -> HPoly:
    """Project ``P`` onto the coordinates not listed in ``eliminate``."""
    elim = sorted(set(eliminate))
    n = P.dim
    ineqs = [(list(a), bb) for a, bb in P.ineqs()]
    eqs = [(list(a), bb) for a, bb in P.eqs()]
    for k in elim:
        piv = next((e for e in eqs if e[0][k] != 0), None)
        if piv is not None:
            eqs.remove(piv)
            pa, pb = piv
            c = pa[k]

            def subst(row, pa=pa, pb=pb, c=c):
                a, bb = row
                f = a[k] / c
                if not f:
                    return row
                return [x - f * y for x, y in zip(a, pa)], bb - f * pb

            ineqs = [subst(r) for r in ineqs]
            eqs = [subst(r) for r in eqs]
            continue
        pos = [r for r in ineqs if r[0][k] > 0]
        negs = [r for r in ineqs if r[0][k] < 0]
        new = [r for r in ineqs if r[0][k] == 0]
        for pa, pb in pos:
            for na, nb in negs:
                s, t = pa[k], -na[k]
                new.append(([t * x + s * y for x, y in zip(pa, na)], t * pb + s * nb))
        Q = remove_redundant(HPoly.from_rows(n, [(tuple(a), bb) for a, bb in new], [(tuple(a), bb) for a, bb in eqs]))
        ineqs = [(list(a), bb) for a, bb in Q.ineqs()]
        eqs = [(list(a), bb) for a, bb in Q.eqs()]
    keep = [j for j in range(n) if j not in elim]
    out = HPoly.from_rows(
        len(keep),
        [(tuple(a[j] for j in keep), bb) for a, bb in ineqs],
        [(tuple(a[j] for j in keep), bb) for a, bb in eqs],
    )
    return remove_redundant(out)


def tangent_cone_poly(P: HPoly, x) -> HPoly:
    """``T_P(x)`` as a homogeneous polyhedron: active inequality rows plus all equalities."""
    x = vec(x)
    if not P.contains(x):
        raise PointNotInSet(f"{_fmt(x)} is not in the polyhedron")
    return hcone(P.dim, [P.A[i] for i in P.active(x)], [a for a, _ in P.eqs()])


def convex_normal_cone_poly(P: HPoly, x) -> "VCone":
    """Normal cone of convex analysis at ``x`` in ``P``."""
    x = vec(x)
    if not P.contains(x):
        raise PointNotInSet(f"{_fmt(x)} is not in the polyhedron")
    return generated_cone(P.dim, [P.A[i] for i in P.active(x)], [a for a, _ in P.eqs()])


def project_onto_poly(P: HPoly, x):
    """Exact Euclidean projection of ``x`` onto ``P`` by active-set enumeration."""
    x = vec(x)
    if feasible(P) is None:
        raise EmptySet("cannot project onto an empty polyhedron")
    if P.contains(x):
        return x
    n = P.dim
    eq_rows = [a for a, _ in P.eqs()]
    eq_b = [bb for _, bb in P.eqs()]
    # keep an independent subset of the equality rows
    basis_rows, basis_b = [], []
    for a, bb in zip(eq_rows, eq_b):
        if rank(basis_rows + [a], n) > len(basis_rows):
            basis_rows.append(a)
            basis_b.append(bb)
    ineq = P.ineqs()
    for k in range(0, n - len(basis_rows) + 1):
        for S in combinations(range(len(ineq)), k):
            rows = basis_rows + [ineq[i][0] for i in S]
            rhs = basis_b + [ineq[i][1] for i in S]
            if rank(rows, n) < len(rows):
                continue
            # y = x - R^T mu with R y = rhs  =>  (R R^T) mu = R x - rhs
            G = [[dot(r, s) for s in rows] for r in rows]
            g = [dot(r, x) - c for r, c in zip(rows, rhs)]
            mu = solve_linear(G, g, len(rows)) if rows else ()
            if mu is None:
                continue
            y = x
            for r, m in zip(rows, mu):
                y = sub(y, scale(r, m))
            if any(m < 0 for m in mu[len(basis_rows):]):
                continue
            if P.contains(y):
                return y
    raise AssertionError("projection active-set search failed")  # unreachable for nonempty P


# ---------------------------------------------------------------------------
# V-cones and double description


class VCone:
    """Polyhedral cone ``cone(rays) + span(lineality)`` in canonical form.

    Instances are produced by :func:`dd_v_from_h` or :func:`generated_cone`;
    the constructor trusts its input to be canonical.
    """

    __slots__ = ("dim", "rays", "lineality", "_h")

    def __init__(self, dim: int, rays=(), lineality=()):
        self.dim = dim
        self.rays = tuple(tuple(r) for r in rays)
        self.lineality = tuple(tuple(r) for r in lineality)
        self._h = None

    def key(self):
        return (self.lineality, self.rays)

    def __eq__(self, other):
        return isinstance(other, VCone) and self.dim == other.dim and self.key() == other.key()

    def __hash__(self):
        return hash((self.dim, self.key()))

    def __lt__(self, other):
        return self.key() < other.key()

    def __repr__(self):
        return f"VCone(rays={[list(r) for r in self.rays]}, lineality={[list(r) for r in self.lineality]})"

    @property
    def is_zero(self) -> bool:
        return not self.rays and not self.lineality

    @property
    def hform(self) -> HPoly:
        """Inequality description ``{x : g.x <= 0, l.x = 0}`` from the polar generators."""
        if self._h is None:
            p = polar(self)
            self._h = hcone(self.dim, p.rays, p.lineality)
        return self._h

    def generators(self) -> list:
        return list(self.rays) + list(self.lineality) + [neg(l) for l in self.lineality]

    def contains(self, x) -> bool:
        return self.hform.contains(x)

    def issubset(self, other: "VCone") -> bool:
        return all(other.contains(g) for g in self.generators())

    def to_json(self):
        return {"rays": [list(map(int, r)) for r in self.rays], "lineality": [list(map(int, r)) for r in self.lineality]}


def _canonical(dim: int, rays, lin) -> VCone:
    R, piv = rref(lin, dim) if lin else ([], [])
    lin_c = [primitive(r) for r in R]
    out = set()
    for r in rays:
        r = tuple(Fraction(x) for x in r)
        for row, p in zip(R, piv):
            if r[p] != 0:
                r = sub(r, scale(row, r[p]))
        if not is_zero(r):
            out.add(primitive(r))
    return VCone(dim, sorted(out), lin_c)


def dd_v_from_h(P: HPoly) -> VCone:
    """Generators of the cone ``P`` (which must have ``b = 0``)."""
    if not P.is_cone:
        raise ValueError("double description expects a homogeneous system")
    n = P.dim
    lin = [unit(n, i) for i in range(n)]
    rays: list[tuple] = []
    processed: list[tuple] = []
    order = [(a, True) for a, _ in P.eqs()] + [(a, False) for a, _ in P.ineqs()]
    for a, is_eq in order:
        if is_zero(a):
            continue
        k = next((i for i, l in enumerate(lin) if dot(a, l) != 0), None)
        if k is not None:
            l = lin.pop(k)
            al = dot(a, l)
            if not is_eq and al > 0:
                l, al = neg(l), -al
            lin = [sub(v, scale(l, dot(a, v) / al)) if dot(a, v) else v for v in lin]
            rays = [primitive(sub(r, scale(l, dot(a, r) / al))) if dot(a, r) else r for r in rays]
            if not is_eq:
                rays.append(primitive(l))
        else:
            vals = [dot(a, r) for r in rays]
            pos = [i for i, v in enumerate(vals) if v > 0]
            negs = [i for i, v in enumerate(vals) if v < 0]
            new = [rays[i] for i, v in enumerate(vals) if v == 0 or (v < 0 and not is_eq)]
            if pos and negs:
                zsets = [frozenset(j for j, row in enumerate(processed) if dot(row, r) == 0) for r in rays]
                need = n - len(lin) - 2
                for p in pos:
                    for q in negs:
                        Z = zsets[p] & zsets[q]
                        if len(Z) < need:
                            continue
                        if any(o != p and o != q and Z <= zsets[o] for o in range(len(rays))):
                            continue
                        new.append(primitive(sub(scale(rays[q], vals[p]), scale(rays[p], vals[q]))))
            rays = new
        processed.append(a)
    return _canonical(n, rays, lin)


def polar(C: VCone) -> VCone:
    """``{y : y.x <= 0 for all x in C}``."""
    return dd_v_from_h(hcone(C.dim, C.rays, C.lineality))


def dd_h_from_v(C: VCone) -> HPoly:
    return C.hform


def generated_cone(dim: int, rays=(), lineality=()) -> VCone:
    """Canonical V-form of ``cone(rays) + span(lineality)`` for arbitrary generators."""
    rays = [vec(r) for r in rays if not is_zero(vec(r))]
    lineality = [vec(l) for l in lineality if not is_zero(vec(l))]
    if not rays:
        return _canonical(dim, [], lineality)
    P = dd_v_from_h(hcone(dim, rays, lineality))
    return dd_v_from_h(hcone(dim, P.rays, P.lineality))


def zero_cone(dim: int) -> VCone:
    return VCone(dim)


def full_cone(dim: int) -> VCone:
    return _canonical(dim, [], [unit(dim, i) for i in range(dim)])


def intersect_cones(dim: int, cones) -> VCone:
    ineqs, eqs = [], []
    for C in cones:
        h = C.hform
        ineqs += [a for a, _ in h.ineqs()]
        eqs += [a for a, _ in h.eqs()]
    return dd_v_from_h(hcone(dim, ineqs, eqs))


def sum_cones(dim: int, cones) -> VCone:
    rays, lin = [], []
    for C in cones:
        rays += C.rays
        lin += C.lineality
    return generated_cone(dim, rays, lin)


def image_cone(C: VCone, M, dim_out: int) -> VCone:
    """Linear image ``M C``."""
    return generated_cone(dim_out, [matvec(M, r) for r in C.rays], [matvec(M, l) for l in C.lineality])


def product_cone(cones) -> VCone:
    dims = [C.dim for C in cones]
    total = sum(dims)
    rays, lin = [], []
    off = 0
    for C, d in zip(cones, dims):
        rays += [zeros(off) + tuple(r) + zeros(total - off - d) for r in C.rays]
        lin += [zeros(off) + tuple(r) + zeros(total - off - d) for r in C.lineality]
        off += d
    return _canonical(total, rays, lin)


def hpoly_cone(P: HPoly) -> VCone:
    return dd_v_from_h(P)


# ---------------------------------------------------------------------------
# unions and exact containment


def escape_point(P: HPoly, Qs):
    """A point of ``P`` lying outside every polyhedron in ``Qs``, or ``None``.

    Exact: each ``Q`` must be violated by one of its rows, so the search
    branches over one strict violation per ``Q`` with LP pruning.
    """
    Qs = [Q for Q in Qs if Q.dim == P.dim]
    w0 = feasible(P)
    if w0 is None:
        return None
    base_ineqs, base_eqs = P.ineqs(), P.eqs()

    def violations(Q):
        out = [(neg(a), -bb) for a, bb in Q.ineqs()]
        for a, bb in Q.eqs():
            out.append((neg(a), -bb))
            out.append((tuple(a), bb))
        return out

    # a strict violation a.x > b is stored as (-a).x < -b
    def rec(j, extra, w):
        if j == len(Qs):
            return w
        Q = Qs[j]
        opts = violations(Q)
        if not opts:
            return None
        first = [o for o in opts if dot(o[0], w) < o[1]]
        rest = [o for o in opts if not dot(o[0], w) < o[1]]
        for o in first:
            r = rec(j + 1, extra + [o], w)
            if r is not None:
                return r
        for o in rest:
            ex = extra + [o]
            R = HPoly.from_rows(P.dim, base_ineqs + ex, base_eqs)
            strict = range(len(base_ineqs), len(base_ineqs) + len(ex))
            w2 = feasible(R, strict)
            if w2 is None:
                continue
            r = rec(j + 1, ex, w2)
            if r is not None:
                return r
        return None

    # prefer a relative-interior start so cheap branches succeed more often
    return rec(0, [], w0)


class ConeUnion:
    """Finite union of polyhedral cones; the empty list is the empty set."""

    __slots__ = ("dim", "pieces")

    def __init__(self, dim: int, pieces=(), simplify: bool = True):
        self.dim = dim
        ps = sorted(set(pieces))
        for p in ps:
            if p.dim != dim:
                raise DimensionError("cone piece of wrong dimension")
        if simplify and len(ps) > 1:
            keep = []
            for i, p in enumerate(ps):
                dominated = False
                for j, q in enumerate(ps):
                    if i == j:
                        continue
                    if p.issubset(q) and (not q.issubset(p) or j < i):
                        dominated = True
                        break
                if not dominated:
                    keep.append(p)
            ps = keep
        self.pieces = tuple(ps)

    def key(self):
        return tuple(p.key() for p in self.pieces)

    def __eq__(self, other):
        return isinstance(other, ConeUnion) and self.dim == other.dim and self.key() == other.key()

    def __hash__(self):
        return hash((self.dim, self.key()))

    def __iter__(self):
        return iter(self.pieces)

    def __len__(self):
        return len(self.pieces)

    def __repr__(self):
        return f"ConeUnion({list(self.pieces)})"

    @property
    def is_empty(self) -> bool:
        return not self.pieces

    def contains(self, x) -> bool:
        return any(p.contains(x) for p in self.pieces)

    def escape(self, other: "ConeUnion"):
        """A point of ``self`` not in ``other``, or ``None`` when ``self`` is a subset."""
        hs = [q.hform for q in other.pieces]
        for p in self.pieces:
            if any(p.issubset(q) for q in other.pieces):
                continue
            w = escape_point(p.hform, hs)
            if w is not None:
                return w
        return None

    def issubset(self, other: "ConeUnion") -> bool:
        return self.escape(other) is None

    def same_set(self, other: "ConeUnion") -> bool:
        return self.issubset(other) and other.issubset(self)

    def union(self, *others) -> "ConeUnion":
        ps = list(self.pieces)
        for o in others:
            ps += list(o.pieces)
        return ConeUnion(self.dim, ps)

    def to_json(self):
        return {"pieces": [p.to_json() for p in self.pieces]}


def cone_union(dim: int, pieces) -> ConeUnion:
    return ConeUnion(dim, pieces)


def minkowski_union(dim: int, unions) -> ConeUnion:
    """``U_1 + ... + U_k`` distributed over the pieces."""
    acc = [zero_cone(dim)]
    for U in unions:
        acc = [sum_cones(dim, [a, p]) for a in acc for p in U.pieces]
    return ConeUnion(dim, acc)


def intersect_unions(dim: int, unions) -> ConeUnion:
    acc = [full_cone(dim)]
    for U in unions:
        acc = [intersect_cones(dim, [a, p]) for a in acc for p in U.pieces]
    return ConeUnion(dim, acc)


def product_union(unions) -> ConeUnion:
    acc = [[]]
    for U in unions:
        acc = [a + [p] for a in acc for p in U.pieces]
    dim = sum(U.dim for U in unions)
    return ConeUnion(dim, [product_cone(a) for a in acc])


def image_union(U: ConeUnion, M, dim_out: int) -> ConeUnion:
    return ConeUnion(dim_out, [image_cone(p, M, dim_out) for p in U.pieces])


# ---------------------------------------------------------------------------
# polyhedra in generator form (homogenization)


def poly_vrep(P: HPoly):
    """``(vertices, rays, lineality)`` of ``P`` or ``None`` if empty.

    Vertices are minimal points modulo lineality.
    """
    n = P.dim
    ineqs = [tuple(a) + (-bb,) for a, bb in P.ineqs()] + [zeros(n) + (-ONE,)]
    eqs = [tuple(a) + (-bb,) for a, bb in P.eqs()]
    C = dd_v_from_h(hcone(n + 1, ineqs, eqs))
    verts = [tuple(Fraction(x) / r[n] for x in r[:n]) for r in C.rays if r[n] > 0]
    if not verts:
        return None
    rays = [tuple(Fraction(x) for x in r[:n]) for r in C.rays if r[n] == 0]
    lin = [tuple(Fraction(x) for x in l[:n]) for l in C.lineality]
    return sorted(verts), rays, lin


def poly_from_vrep(dim: int, vertices, rays=(), lineality=()) -> HPoly:
    """H-form of ``conv(vertices) + cone(rays) + span(lineality)``."""
    if not vertices:
        return HPoly.from_rows(dim, [(zeros(dim), -1)])
    gens = [tuple(v) + (ONE,) for v in vertices] + [tuple(r) + (ZERO,) for r in rays]
    lins = [tuple(l) + (ZERO,) for l in lineality]
    C = generated_cone(dim + 1, gens, lins)
    h = C.hform
    ineqs = [(a[:dim], -a[dim]) for a, _ in h.ineqs() if not is_zero(a[:dim])]
    eqs = [(a[:dim], -a[dim]) for a, _ in h.eqs() if not is_zero(a[:dim])]
    return HPoly.from_rows(dim, ineqs, eqs).tidy()


def poly_hull(dim: int, polys) -> HPoly | None:
    """Closed convex hull of a union of polyhedra (``None`` if all are empty)."""
    V, R, L = [], [], []
    for P in polys:
        vr = poly_vrep(P)
        if vr is None:
            continue
        V += vr[0]
        R += vr[1]
        L += vr[2]
    if not V:
        return None
    return poly_from_vrep(dim, V, R, L)


def poly_sum(dim: int, polys) -> HPoly | None:
    """Minkowski sum of polyhedra (``None`` if any is empty)."""
    V, R, L = [zeros(dim)], [], []
    for P in polys:
        vr = poly_vrep(P)
        if vr is None:
            return None
        V = [add(v, w) for v in V for w in vr[0]]
        R += vr[1]
        L += vr[2]
    return poly_from_vrep(dim, V, R, L)


def poly_image(P: HPoly, M, c=None, dim_out: int | None = None) -> HPoly | None:
    """Affine image ``{M x + c : x in P}`` (``None`` if ``P`` is empty)."""
    m = dim_out if dim_out is not None else len(M)
    c = c if c is not None else zeros(m)
    vr = poly_vrep(P)
    if vr is None:
        return None
    V = [add(matvec(M, v), c) for v in vr[0]]
    return poly_from_vrep(m, V, [matvec(M, r) for r in vr[1]], [matvec(M, l) for l in vr[2]])


def recession_cone(P: HPoly) -> VCone:
    return dd_v_from_h(hcone(P.dim, [a for a, _ in P.ineqs()], [a for a, _ in P.eqs()]))


def is_bounded(P: HPoly) -> bool:
    return feasible(P) is None or recession_cone(P).is_zero


def _fmt(x) -> str:
    return "(" + ", ".join(str(v) for v in x) + ")"
