"""Tangent and normal cones of finite unions of convex polyhedra.

Directional limiting normal cones are computed in three exact steps:

1. conic localization: near ``x`` the union ``D`` coincides with
   ``x + K`` where ``K`` is the union of the pieces' tangent cones;
2. homogeneity: Fréchet cones of ``K`` are constant along open rays, so
   ``N_D(x; u)`` is the ordinary limiting normal cone of ``K`` at ``u``;
3. stratification: the Fréchet cone of ``K`` is constant on each sign cell of
   the arrangement formed by all rows of ``K``'s pieces, hence ``N_K(u)`` is
   the union of the Fréchet cones of the cells inside ``K`` whose closure
   contains ``u``.

Only hyperplanes through ``u`` can change sign next to ``u``, so the cell
enumeration is localized to those.
"""
from __future__ import annotations

import os
from functools import lru_cache

from .errors import DimensionError, PointNotInSet, ResourceLimit
from .geometry import (
    ConeUnion,
    HPoly,
    VCone,
    dd_v_from_h,
    dot,
    feasible,
    hcone,
    is_zero,
    primitive,
    product_union,
    sign,
    vec,
    zeros,
)

DEFAULT_MAX_CELLS = 20000
DEFAULT_MAX_HYPERPLANES = 18
CELL_LIMIT_ENV = "DIRCALC_MAX_CELLS"


def max_cells() -> int:
    env = os.environ.get(CELL_LIMIT_ENV)
    return int(env) if env else DEFAULT_MAX_CELLS


class UnionSet:
    """Finite union of convex polyhedra in ``R^dim``; no pieces means the empty set."""

    __slots__ = ("dim", "pieces")

    def __init__(self, dim: int, pieces=()):
        self.dim = dim
        self.pieces = tuple(pieces)
        for P in self.pieces:
            if P.dim != dim:
                raise DimensionError(f"piece of dimension {P.dim} in a union of dimension {dim}")

    @classmethod
    def of(cls, *pieces: HPoly) -> "UnionSet":
        return cls(pieces[0].dim, pieces)

    def key(self):
        return (self.dim, tuple(P.key() for P in self.pieces))

    def __eq__(self, other):
        return isinstance(other, UnionSet) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"UnionSet(dim={self.dim}, pieces={len(self.pieces)})"

    def contains(self, x) -> bool:
        return any(P.contains(x) for P in self.pieces)

    def containing(self, x) -> list:
        return [P for P in self.pieces if P.contains(x)]

    def nonempty_pieces(self) -> "UnionSet":
        return UnionSet(self.dim, [P for P in self.pieces if feasible(P) is not None])

    @property
    def is_empty(self) -> bool:
        return all(feasible(P) is None for P in self.pieces)

    def union(self, *others) -> "UnionSet":
        ps = list(self.pieces)
        for o in others:
            ps += list(o.pieces)
        return UnionSet(self.dim, ps)

    def intersect(self, other: "UnionSet") -> "UnionSet":
        return UnionSet(self.dim, [P.intersect(Q) for P in self.pieces for Q in other.pieces]).nonempty_pieces()

    def lift(self, dim: int, offset: int) -> "UnionSet":
        return UnionSet(dim, [P.lift(dim, offset) for P in self.pieces])

    def preimage(self, M, c=None, dim: int | None = None) -> "UnionSet":
        k = dim if dim is not None else len(M[0])
        return UnionSet(k, [P.map_rows(M, c, k) for P in self.pieces])

    def fix(self, values: dict) -> "UnionSet":
        return UnionSet(self.dim - len(values), [P.fix(values) for P in self.pieces]).nonempty_pieces()

    def escape(self, other: "UnionSet"):
        """A point of ``self`` outside ``other`` or ``None`` if ``self`` is a subset."""
        from .geometry import escape_point

        for P in self.pieces:
            w = escape_point(P, other.pieces)
            if w is not None:
                return w
        return None

    def issubset(self, other: "UnionSet") -> bool:
        return self.escape(other) is None

    def same_set(self, other: "UnionSet") -> bool:
        return self.issubset(other) and other.issubset(self)

    def to_json(self):
        out = []
        for P in self.pieces:
            out.append({
                "A": [[str(x) for x in row] for row in P.A],
                "b": [str(x) for x in P.b],
                "eq_rows": sorted(P.eq),
            })
        return {"dim": self.dim, "pieces": out}


def product_set(sets) -> UnionSet:
    """Cartesian product of union sets, distributed over pieces."""
    dims = [S.dim for S in sets]
    total = sum(dims)
    acc = [HPoly.space(total)]
    off = 0
    for S, d in zip(sets, dims):
        acc = [P.intersect(Q.lift(total, off)) for P in acc for Q in S.pieces]
        off += d
    return UnionSet(total, acc)


# ---------------------------------------------------------------------------
# sign cells


class SignCell:
    """A realizable sign pattern with a witness point."""

    __slots__ = ("signs", "witness", "pieces", "frechet")

    def __init__(self, signs, witness, pieces=(), frechet=None):
        self.signs = signs
        self.witness = witness
        self.pieces = pieces
        self.frechet = frechet

    def __repr__(self):
        return f"SignCell({self.signs})"


def _canon_form(a, b):
    """Normalize the affine form ``a.z - b``; returns ``(key, multiplier)``."""
    p = primitive(tuple(a) + (b,))
    first = next(x for x in p if x != 0)
    if first < 0:
        return tuple(-x for x in p), -1
    return p, 1


def sign_cells(dim: int, forms, base: HPoly | None = None, limit: int | None = None):
    """All realizable sign vectors of the affine forms ``a.z - b`` on ``base``.

    ``forms`` is a list of ``(a, b)``.  Returns a list of ``(signs, witness)``
    with signs in ``{-1, 0, 1}``.  Parallel forms are merged before the
    search; the depth-first search prunes infeasible prefixes by exact LP and
    reuses the parent witness whenever it already satisfies a branch.
    """
    limit = limit if limit is not None else max_cells()
    base = base if base is not None else HPoly.space(dim)
    uniq: list[tuple] = []
    index = {}
    mapping = []
    for a, b in forms:
        a = vec(a)
        if is_zero(a):
            mapping.append((None, sign(-b)))
            continue
        key, m = _canon_form(a, b)
        if key not in index:
            index[key] = len(uniq)
            uniq.append(key)
        mapping.append((index[key], m))
    if len(uniq) > DEFAULT_MAX_HYPERPLANES:
        raise ResourceLimit(f"{len(uniq)} distinct hyperplanes exceed the limit {DEFAULT_MAX_HYPERPLANES}")
    w0 = feasible(base)
    if w0 is None:
        return []
    base_ineqs, base_eqs = base.ineqs(), base.eqs()
    out = []

    def rec(i, ineqs, strict, eqs, signs, w):
        if i == len(uniq):
            out.append((tuple(signs), w))
            if len(out) > limit:
                raise ResourceLimit(f"more than {limit} sign cells (set {CELL_LIMIT_ENV} to raise the limit)")
            return
        key = uniq[i]
        a, b = key[:dim], key[dim]
        sw = sign(dot(a, w) - b)
        for s in (sw,) + tuple(t for t in (0, 1, -1) if t != sw):
            if s == 0:
                ni, ns, ne = ineqs, strict, eqs + [(a, b)]
            elif s > 0:
                ni, ns, ne = ineqs + [(tuple(-x for x in a), -b)], strict + [len(ineqs)], eqs
            else:
                ni, ns, ne = ineqs + [(a, b)], strict + [len(ineqs)], eqs
            if s == sw:
                w2 = w
            else:
                R = HPoly.from_rows(dim, base_ineqs + ni, base_eqs + ne)
                w2 = feasible(R, [len(base_ineqs) + j for j in ns])
                if w2 is None:
                    continue
            rec(i + 1, ni, ns, ne, signs + [s], w2)

    # start from a relative-interior point of the base so the cheap branch is informative
    strict_base = [j for j in range(len(base_ineqs))]
    w_int = feasible(HPoly.from_rows(dim, base_ineqs, base_eqs), strict_base) if base_ineqs else w0
    rec(0, [], [], [], [], w_int if w_int is not None else w0)
    result = []
    for signs, w in out:
        full = tuple(fixed if idx is None else m * signs[idx] for idx, fixed in mapping)
        result.append((full, w))
    return result


# ---------------------------------------------------------------------------
# conic structure of a union of polyhedral cones


class _Conic:
    """Arrangement data of ``K = union of homogeneous pieces``."""

    def __init__(self, dim: int, pieces):
        self.dim = dim
        self.pieces = tuple(pieces)
        forms: list[tuple] = []
        index = {}
        self.rows = []
        for P in self.pieces:
            rows = []
            for i, a in enumerate(P.A):
                if is_zero(a):
                    continue
                key, m = _canon_form(a, 0)
                key = key[:dim]
                if key not in index:
                    index[key] = len(forms)
                    forms.append(key)
                rows.append((index[key], m, i in P.eq))
            self.rows.append(rows)
        self.forms = forms
        self._cells = {}
        self._frechet = {}

    def pattern(self, u) -> tuple:
        return tuple(sign(dot(a, u)) for a in self.forms)

    def containing(self, sigma) -> list:
        out = []
        for k, rows in enumerate(self.rows):
            ok = True
            for f, m, is_eq in rows:
                s = m * sigma[f]
                if (is_eq and s != 0) or s > 0:
                    ok = False
                    break
            if ok:
                out.append(k)
        return out

    def frechet(self, sigma) -> VCone | None:
        ks = self.containing(sigma)
        if not ks:
            return None
        key = tuple((k, tuple(i for i, (f, m, e) in enumerate(self.rows[k]) if sigma[f] == 0)) for k in ks)
        got = self._frechet.get(key)
        if got is None:
            rays, lin = [], []
            for k, active in key:
                rows = self.rows[k]
                ineq = [_scaled(self.forms[rows[i][0]], rows[i][1]) for i in active if not rows[i][2]]
                eq = [self.forms[rows[i][0]] for i in active if rows[i][2]]
                T = dd_v_from_h(hcone(self.dim, ineq, eq))
                rays += T.rays
                lin += T.lineality
            got = dd_v_from_h(hcone(self.dim, rays, lin))
            self._frechet[key] = got
        return got

    def cells_at(self, u) -> list:
        """Sign cells whose closure contains ``u`` (all cells when ``u = 0``)."""
        pat = self.pattern(u)
        got = self._cells.get(pat)
        if got is not None:
            return got
        through = [i for i, s in enumerate(pat) if s == 0]
        sub = [(self.forms[i], 0) for i in through]
        cells = []
        for signs, w in sign_cells(self.dim, sub):
            sigma = list(pat)
            for i, s in zip(through, signs):
                sigma[i] = s
            sigma = tuple(sigma)
            cells.append(SignCell(sigma, w, tuple(self.containing(sigma))))
        self._cells[pat] = cells
        return cells

    def normal_at(self, u) -> ConeUnion:
        out = []
        for c in self.cells_at(u):
            if c.pieces:
                if c.frechet is None:
                    c.frechet = self.frechet(c.signs)
                out.append(c.frechet)
        return ConeUnion(self.dim, out)

    def contains(self, u) -> bool:
        return any(P.contains(u) for P in self.pieces)


def _scaled(a, m):
    return tuple(m * x for x in a)


@lru_cache(maxsize=4096)
def _conic(dim: int, pieces: tuple) -> _Conic:
    return _Conic(dim, pieces)


def _tangent_pieces(D: UnionSet, x) -> tuple:
    from .geometry import tangent_cone_poly

    x = vec(x)
    if len(x) != D.dim:
        raise DimensionError(f"point of dimension {len(x)} for a set in R^{D.dim}")
    pieces = []
    for P in D.pieces:
        if P.contains(x):
            pieces.append(tangent_cone_poly(P, x).tidy())
    if not pieces:
        raise PointNotInSet(f"point {tuple(str(v) for v in x)} is not in the set")
    return tuple(sorted(set(pieces), key=lambda P: P.key()))


def conic_localization(D: UnionSet, x) -> _Conic:
    return _conic(D.dim, _tangent_pieces(D, x))


# ---------------------------------------------------------------------------
# public operations


def tangent_cone(D: UnionSet, x) -> ConeUnion:
    """``T_D(x)`` as a union of canonical V-cones."""
    return ConeUnion(D.dim, [dd_v_from_h(P) for P in _tangent_pieces(D, x)])


def frechet_normal_cone(D: UnionSet, x) -> VCone:
    """Polar of the tangent cone, i.e. the intersection of the pieces' normal cones."""
    K = conic_localization(D, x)
    rays, lin = [], []
    for P in K.pieces:
        T = dd_v_from_h(P)
        rays += T.rays
        lin += T.lineality
    return dd_v_from_h(hcone(D.dim, rays, lin))


def dir_limiting_normal_cone(D: UnionSet, x, u) -> ConeUnion:
    """Exact directional limiting normal cone ``N_D(x; u)``."""
    u = vec(u)
    K = conic_localization(D, x)
    if len(u) != D.dim:
        raise DimensionError("direction of wrong dimension")
    if not K.contains(u):
        return ConeUnion(D.dim, [])
    return K.normal_at(u)


def limiting_normal_cone(D: UnionSet, x) -> ConeUnion:
    return dir_limiting_normal_cone(D, x, zeros(D.dim))


def enumerate_direction_strata(D: UnionSet, x) -> list:
    """Representatives ``(u, signs)`` of the cells of the tangent cone's arrangement.

    The first entry is always the zero direction.  Every other entry is a
    nonzero primitive integer vector, one per cell of the tangent cone that
    contains nonzero directions (including the lineality cell when the
    arrangement has a nontrivial lineality space).
    """
    K = conic_localization(D, x)
    zero = zeros(D.dim)
    out = []
    for c in K.cells_at(zero):
        if not c.pieces:
            continue
        w = c.witness
        if is_zero(w):
            w = _nonzero_in_cell(K, c.signs)
            if w is None:
                continue
        out.append((primitive(w), c.signs))
    out.sort(key=lambda t: t[1])
    return [(zero, K.pattern(zero))] + out


def _nonzero_in_cell(K: _Conic, signs):
    P, strict = cell_poly(K.dim, [(a, 0) for a in K.forms], signs)
    for j in range(K.dim):
        for s in (1, -1):
            row = tuple(-s if k == j else 0 for k in range(K.dim))
            w = feasible(HPoly.from_rows(K.dim, P.ineqs() + [(row, 0)], P.eqs()), list(strict) + [len(P.ineqs())])
            if w is not None:
                return w
    return None


def product_bound(Ds, xs, hs) -> ConeUnion:
    """Cartesian product of the componentwise directional cones."""
    if not (len(Ds) == len(xs) == len(hs)):
        raise DimensionError("product bound needs one point and direction per factor")
    parts = [dir_limiting_normal_cone(D, x, h) for D, x, h in zip(Ds, xs, hs)]
    return product_union(parts)


# ---------------------------------------------------------------------------
# stratified slices


def cell_poly(dim: int, forms, signs, base: HPoly | None = None):
    """``(HPoly, strict_rows)`` describing one sign cell of affine forms."""
    base = base if base is not None else HPoly.space(dim)
    ineqs, eqs = list(base.ineqs()), list(base.eqs())
    strict = []
    for (a, b), s in zip(forms, signs):
        a = vec(a)
        if s == 0:
            eqs.append((a, b))
        else:
            strict.append(len(ineqs))
            ineqs.append(((tuple(-x for x in a), -b) if s > 0 else (a, b)))
    return HPoly.from_rows(dim, ineqs, eqs), strict


def slice_representatives(dim: int, forms, fixed: dict, nonzero=None, eqs=(), base: HPoly | None = None) -> list:
    """One point per sign cell of ``forms`` inside the slice ``z_i = fixed[i]``.

    ``eqs`` adds further affine equations ``(a, b)`` to the slice and
    ``base`` restricts it to a polyhedron.
    ``nonzero`` optionally lists coordinates that must not all vanish; cells
    contained in ``{z_j = 0 for j in nonzero}`` are dropped and zero witnesses
    of other cells are replaced by in-cell points with a nonzero block.
    """
    n = dim
    rows = [(tuple(1 if j == i else 0 for j in range(n)), v) for i, v in fixed.items()]
    slab = HPoly.from_rows(n, eqs=rows + [(vec(a), b) for a, b in eqs])
    base = slab if base is None else slab.intersect(base)
    forms = [(vec(a), b) for a, b in forms]
    out = []
    seen = set()
    for signs, w in sign_cells(n, forms, base):
        if nonzero and all(w[j] == 0 for j in nonzero):
            P, strict = cell_poly(n, forms, signs, base)
            w = None
            for j in nonzero:
                for s in (1, -1):
                    row = tuple(-s if k == j else 0 for k in range(n))
                    Q = HPoly.from_rows(n, P.ineqs() + [(row, 0)], P.eqs())
                    w = feasible(Q, list(strict) + [len(P.ineqs())])
                    if w is not None:
                        break
                if w is not None:
                    break
            if w is None:
                continue
        if w not in seen:
            seen.add(w)
            out.append(w)
    return out


def localization_forms(K: _Conic, dim: int, offset: int) -> list:
    """Rows of a conic localization embedded in a larger space, as homogeneous forms."""
    return [(zeros(offset) + tuple(f) + zeros(dim - offset - K.dim), 0) for f in K.forms]
