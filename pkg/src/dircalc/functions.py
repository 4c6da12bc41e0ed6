"""Directional subdifferentials of piecewise affine functions.

Every subdifferential is read off the epigraph: ``xi`` is a directional
subgradient for ``(h, nu)`` iff ``(xi, -1)`` lies in the epigraph's
directional normal cone at ``(x, f(x))`` in direction ``(h, nu)``, and a
singular one iff ``(xi, 0)`` does.  Results are unions of polyhedra.

Graphical derivatives of PWA functions are finite sets: near ``x`` the graph
is the graph of the active pieces, so ``Df(x)(h)`` collects ``min a_i.h`` over
the active pieces containing the sign cells next to ``h``.  All unions over
``nu`` below are therefore finite.
"""
from __future__ import annotations

from fractions import Fraction
from itertools import combinations, product

from .cones import (
    UnionSet,
    _conic,
    conic_localization,
    dir_limiting_normal_cone,
    localization_forms,
    product_set,
    sign_cells,
    slice_representatives,
)
from .errors import DimensionError, DomainError, UnboundedBelow
from .geometry import (
    ConeUnion,
    HPoly,
    add,
    dd_v_from_h,
    dot,
    fourier_motzkin,
    hcone,
    matvec,
    poly_hull,
    poly_sum,
    poly_vrep,
    rat,
    recession_cone,
    remove_redundant,
    tangent_cone_poly,
    transpose,
    unit,
    vec,
    zeros,
)
from .rules import (
    ASSERTED,
    CHECKED,
    INNER_CERTS,
    PWAMap,
    QCStatus,
    Verdict,
    _nontrivial_sum_zero,
    first_generator,
    finish,
    _value_directions,
    kernel_multipliers,
)


class PWAFunc:
    """Piecewise affine extended-real function ``x -> a_i.x + c_i`` on ``dom_i``.

    With ``lsc=False`` the pieces must agree on overlaps.  With ``lsc=True``
    they may disagree and the value is the minimum over the pieces containing
    the point, which is the lower semicontinuous function whose epigraph is
    the union of the piece epigraphs (used for jump discontinuities).
    """

    def __init__(self, n: int, pieces, lsc: bool = False, validate: bool = True):
        self.n = n
        self.lsc = lsc
        ps = []
        for dom, a, c in pieces:
            a, c = vec(a), rat(c)
            if dom.dim != n or len(a) != n:
                raise DimensionError("piece shape does not match the function's dimension")
            ps.append((dom, a, c))
        self.pieces = tuple(ps)
        if validate and not lsc:
            self._validate()

    @classmethod
    def affine(cls, a, c=0, domain: HPoly | None = None):
        a = vec(a)
        return cls(len(a), [(domain or HPoly.space(len(a)), a, c)])

    @classmethod
    def max_affine(cls, rows, domain: HPoly | None = None):
        """``max_k (a_k.x + c_k)``, split into the regions where each term wins."""
        rows = [(vec(a), rat(c)) for a, c in rows]
        n = len(rows[0][0])
        dom = domain or HPoly.space(n)
        pieces = []
        for k, (a, c) in enumerate(rows):
            ineqs = [(tuple(x - y for x, y in zip(b, a)), c - d) for j, (b, d) in enumerate(rows) if j != k]
            P = dom.intersect(HPoly.from_rows(n, ineqs))
            if not P.is_empty():
                pieces.append((P, a, c))
        return cls(n, pieces)

    def _validate(self):
        for i, j in combinations(range(len(self.pieces)), 2):
            Di, ai, ci = self.pieces[i]
            Dj, aj, cj = self.pieces[j]
            vr = poly_vrep(Di.intersect(Dj))
            if vr is None:
                continue
            V, R, L = vr
            if any(dot(ai, v) + ci != dot(aj, v) + cj for v in V) or any(dot(ai, r) != dot(aj, r) for r in list(R) + list(L)):
                raise DomainError(f"pieces {i} and {j} disagree on their overlap")

    def key(self):
        return (self.n, self.lsc, tuple((d.key(), a, c) for d, a, c in self.pieces))

    def __hash__(self):
        return hash(self.key())

    def __eq__(self, other):
        return isinstance(other, PWAFunc) and self.key() == other.key()

    def __repr__(self):
        return f"PWAFunc(n={self.n}, pieces={len(self.pieces)}, lsc={self.lsc})"

    def in_domain(self, x) -> bool:
        return any(d.contains(vec(x)) for d, _, _ in self.pieces)

    def value(self, x) -> Fraction:
        x = vec(x)
        vals = [dot(a, x) + c for d, a, c in self.pieces if d.contains(x)]
        if not vals:
            raise DomainError(f"point {tuple(map(str, x))} is outside the domain")
        return min(vals)

    __call__ = value

    def domain(self) -> UnionSet:
        return UnionSet(self.n, [d for d, _, _ in self.pieces])

    def epi(self) -> UnionSet:
        n = self.n
        out = []
        for dom, a, c in self.pieces:
            L = dom.lift(n + 1, 0)
            out.append(HPoly.from_rows(n + 1, L.ineqs() + [(tuple(a) + (-1,), -c)], L.eqs()))
        return UnionSet(n + 1, out)

    def graph(self) -> UnionSet:
        """Union of the piece graphs (the graph itself when pieces agree on overlaps)."""
        n = self.n
        out = []
        for dom, a, c in self.pieces:
            L = dom.lift(n + 1, 0)
            out.append(HPoly.from_rows(n + 1, L.ineqs(), L.eqs() + [(tuple(a) + (-1,), -c)]))
        return UnionSet(n + 1, out)

    def active(self, x) -> list:
        """Pieces containing ``x`` whose value there is ``f(x)``."""
        x = vec(x)
        fx = self.value(x)
        return [(d, a, c) for d, a, c in self.pieces if d.contains(x) and dot(a, x) + c == fx]

    def jumps(self, x) -> list:
        x = vec(x)
        fx = self.value(x)
        return [(d, a, c) for d, a, c in self.pieces if d.contains(x) and dot(a, x) + c != fx]

    def base_point(self, x) -> tuple:
        x = vec(x)
        return x + (self.value(x),)

    def compose(self, phi: PWAMap) -> "PWAFunc":
        """``self o phi`` over the common refinement of the domains."""
        if phi.m != self.n:
            raise DimensionError("composition dimension mismatch")
        pieces = []
        for d1, A, c1 in phi.pieces:
            At = transpose(A, phi.n)
            for d2, a, c in self.pieces:
                dom = d1.intersect(d2.map_rows(A, c1, phi.n))
                if dom.is_empty():
                    continue
                pieces.append((dom, matvec(At, a), dot(a, c1) + c))
        return PWAFunc(phi.n, pieces, self.lsc, validate=False)

    def restrict(self, values: dict) -> "PWAFunc":
        """Fix the coordinates in ``values``; the result acts on the others."""
        keep = [j for j in range(self.n) if j not in values]
        pieces = []
        for d, a, c in self.pieces:
            dom = d.fix(values)
            if dom.is_empty():
                continue
            shift = sum((a[j] * rat(v) for j, v in values.items()), Fraction(0))
            pieces.append((dom, tuple(a[j] for j in keep), c + shift))
        return PWAFunc(len(keep), pieces, self.lsc, validate=False)

    def calm_in_direction(self, x, h) -> bool:
        """Calmness at ``x`` in direction ``h`` (relative to the domain).

        Slopes of finitely many affine pieces are bounded, so calmness can
        only fail through a jump: a piece that contains ``x`` with a larger
        value there reaches ``x`` from directions near ``h`` outside every
        active piece.  Decided on the arrangement of the tangent cones.
        """
        x, h = vec(x), vec(h)
        act = [tangent_cone_poly(d, x).tidy() for d, _, _ in self.active(x)]
        jmp = [tangent_cone_poly(d, x).tidy() for d, _, _ in self.jumps(x)]
        if not jmp:
            return True
        K = _conic(self.n, tuple(act + jmp))
        na = len(act)
        for cell in K.cells_at(h):
            ks = K.containing(cell.signs)
            if any(k >= na for k in ks) and not any(k < na for k in ks):
                return False
        return True

    def to_json(self):
        return {
            "kind": "pwa_function",
            "n": self.n,
            "lsc": self.lsc,
            "pieces": [
                {
                    "domain": {"A": [[str(x) for x in r] for r in d.A], "b": [str(x) for x in d.b], "eq_rows": sorted(d.eq)},
                    "a": [str(x) for x in a],
                    "c": str(c),
                }
                for d, a, c in self.pieces
            ],
        }


# ---------------------------------------------------------------------------
# constructions


def separable_sum(fs) -> PWAFunc:
    """``f(x_1, ..., x_l) = f_1(x_1) + ... + f_l(x_l)``."""
    dims = [f.n for f in fs]
    total = sum(dims)
    offs = [sum(dims[:i]) for i in range(len(fs))]
    pieces = []
    for combo in product(*[f.pieces for f in fs]):
        dom = HPoly.space(total)
        a, c = (), Fraction(0)
        for (d, ai, ci), off in zip(combo, offs):
            dom = dom.intersect(d.lift(total, off))
            a += tuple(ai)
            c += ci
        pieces.append((dom, a, c))
    return PWAFunc(total, pieces, any(f.lsc for f in fs), validate=False)


def pointwise_sum(fs) -> PWAFunc:
    n = fs[0].n
    pieces = []
    for combo in product(*[f.pieces for f in fs]):
        dom = HPoly.space(n).intersect(*[d for d, _, _ in combo])
        if dom.is_empty():
            continue
        a = zeros(n)
        c = Fraction(0)
        for _, ai, ci in combo:
            a = add(a, ai)
            c += ci
        pieces.append((dom, a, c))
    return PWAFunc(n, pieces, any(f.lsc for f in fs), validate=False)


def pointwise_max(fs) -> PWAFunc:
    """Maximum of functions that agree on overlaps (continuous on their domains)."""
    if any(f.lsc for f in fs):
        raise DomainError("pointwise maximum needs functions without jumps")
    n = fs[0].n
    pieces = []
    for combo in product(*[f.pieces for f in fs]):
        dom = HPoly.space(n).intersect(*[d for d, _, _ in combo])
        for k, (_, a, c) in enumerate(combo):
            rows = [(tuple(y - x for x, y in zip(a, b)), c - d) for j, (_, b, d) in enumerate(combo) if j != k]
            P = dom.intersect(HPoly.from_rows(n, rows))
            if not P.is_empty():
                pieces.append((P, a, c))
    return PWAFunc(n, pieces, validate=False)


def pointwise_min(fs) -> PWAFunc:
    """Minimum as the lsc function whose epigraph is the union of epigraphs."""
    return PWAFunc(fs[0].n, [p for f in fs for p in f.pieces], lsc=True, validate=False)


def infimal_projection(f: PWAFunc, n: int) -> PWAFunc:
    """``y -> inf_x f(x, y)`` for ``f`` on ``R^n x R^l``.

    The epigraph of the infimal projection is the projection of the
    epigraph, computed piecewise by Fourier-Motzkin elimination of ``x``.
    Raises :class:`UnboundedBelow` if some piece is unbounded below.
    """
    l = f.n - n
    pieces = []
    for P in f.epi().pieces:
        if P.is_empty():
            continue
        if recession_cone(P).contains(zeros(f.n) + (-1,)) or _descends(P, n):
            raise UnboundedBelow("the infimum over x is -inf on part of the domain")
        Q = remove_redundant(fourier_motzkin(P, range(n)))
        dom_ineqs, dom_eqs, lower = [], [], []
        for a, b in Q.ineqs():
            ay, aa = a[:l], a[l]
            if aa == 0:
                dom_ineqs.append((ay, b))
            elif aa < 0:
                lower.append((tuple(x / -aa for x in ay), -b / -aa))
            else:
                raise UnboundedBelow("projected epigraph is not upward closed")
        for a, b in Q.eqs():
            if a[l] != 0:
                raise UnboundedBelow("projected epigraph is not upward closed")
            dom_eqs.append((a[:l], b))
        dom = HPoly.from_rows(l, dom_ineqs, dom_eqs)
        for k, (g, d) in enumerate(lower):
            rows = [(tuple(y - x for x, y in zip(g, g2)), d - d2) for j, (g2, d2) in enumerate(lower) if j != k]
            R = dom.intersect(HPoly.from_rows(l, rows))
            if not R.is_empty():
                pieces.append((R, g, d))
        if not lower:
            raise UnboundedBelow("the infimum over x is -inf on part of the domain")
    return PWAFunc(l, pieces, lsc=True, validate=False)


def _descends(P: HPoly, n: int) -> bool:
    """Whether ``P`` has a recession direction with zero ``y``-part and negative value part."""
    R = recession_cone(P)
    dim = P.dim
    rows = [(unit(dim, j), 0) for j in range(n, dim - 1)]
    ineqs = [(a, 0) for a, _ in R.hform.ineqs()] + [(unit(dim, dim - 1), 0)]
    eqs = [(a, 0) for a, _ in R.hform.eqs()] + rows
    C = dd_v_from_h(HPoly.from_rows(dim, ineqs, eqs))
    return any(r[dim - 1] < 0 for r in C.rays)


# ---------------------------------------------------------------------------
# subdifferentials


def _slice(N: ConeUnion, last) -> UnionSet:
    d = N.dim
    pieces = []
    for C in N.pieces:
        P = C.hform.fix({d - 1: last}).tidy()
        if not P.is_empty():
            pieces.append(P)
    return UnionSet(d - 1, _dedupe(pieces))


def _dedupe(pieces) -> list:
    seen, out = set(), []
    for P in pieces:
        k = P.key()
        if k not in seen:
            seen.add(k)
            out.append(P)
    return sorted(out, key=lambda P: P.key())


def union_sets(dim: int, sets) -> UnionSet:
    return UnionSet(dim, _dedupe([P for S in sets for P in S.pieces]))


def _check_point(f: PWAFunc, x):
    x = vec(x)
    if len(x) != f.n:
        raise DimensionError("point of wrong dimension")
    if not f.in_domain(x):
        raise DomainError(f"point {tuple(map(str, x))} is outside the domain")
    return x


def epi_normal_cone(f: PWAFunc, x, h, nu) -> ConeUnion:
    x = _check_point(f, x)
    return dir_limiting_normal_cone(f.epi(), f.base_point(x), tuple(vec(h)) + (rat(nu),))


def dir_subdif(f: PWAFunc, x, h, nu) -> UnionSet:
    """``{xi : (xi, -1) in N_epi((x, f(x)); (h, nu))}``."""
    return _slice(epi_normal_cone(f, x, h, nu), -1)


def singular_dir_subdif(f: PWAFunc, x, h, nu) -> UnionSet:
    """``{xi : (xi, 0) in N_epi((x, f(x)); (h, nu))}``."""
    return _slice(epi_normal_cone(f, x, h, nu), 0)


def singular_cone(f: PWAFunc, x, h, nu) -> ConeUnion:
    """The singular subdifferential as a union of convex cones."""
    S = singular_dir_subdif(f, x, h, nu)
    return ConeUnion(f.n, [dd_v_from_h(P) for P in S.pieces])


def graph_deriv_values(f: PWAFunc, x, h) -> list:
    """``Df(x)(h)`` as a sorted list of values."""
    x, h = _check_point(f, x), vec(h)
    act = f.active(x)
    tans = [tangent_cone_poly(d, x).tidy() for d, _, _ in act]
    K = _conic(f.n, tuple(tans))
    vals = set()
    for cell in K.cells_at(h):
        ks = K.containing(cell.signs)
        if ks:
            vals.add(min(dot(act[k][1], h) for k in ks))
    return sorted(vals)


def graph_deriv_scalar(f: PWAFunc, x, h) -> UnionSet:
    """``Df(x)(h)`` as a union of points in ``R^1``."""
    return UnionSet(1, [HPoly.point((v,)) for v in graph_deriv_values(f, x, h)])


def vertical_normal_cone(f: PWAFunc, x, h, direction: int) -> ConeUnion:
    """Epigraph normals along ``(h, +inf)`` (``direction=1``) or ``(h, -inf)``.

    Such sequences approach the epigraph's base point along the vertical
    unit vector ``e`` of the tangent cone ``K`` while drifting towards
    ``(h, 0)``, so the cone is ``N_K(e; (h, 0))``, empty when ``e`` is not in
    ``K``.
    """
    x, h = _check_point(f, x), vec(h)
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    K = conic_localization(f.epi(), f.base_point(x))
    e = zeros(f.n) + (Fraction(direction),)
    if not K.contains(e):
        return ConeUnion(f.n + 1, [])
    return dir_limiting_normal_cone(UnionSet(f.n + 1, K.pieces), e, tuple(h) + (Fraction(0),))


def analytic_dir_subdif(f: PWAFunc, x, h) -> UnionSet:
    """Union of ``dir_subdif`` over ``nu in Df(x)(h)`` and the vertical slices."""
    x, h = _check_point(f, x), vec(h)
    parts = [dir_subdif(f, x, h, nu) for nu in graph_deriv_values(f, x, h)]
    for s in (1, -1):
        parts.append(_slice(vertical_normal_cone(f, x, h, s), -1))
    return union_sets(f.n, parts)


# ---------------------------------------------------------------------------
# rules


def _splittings(value_lists, total) -> list:
    return [c for c in product(*value_lists) if sum(c, Fraction(0)) == total]


def _calm_qc(flags) -> QCStatus:
    bad = [i for i, ok in enumerate(flags) if not ok]
    return QCStatus("all-but-one-calm", len(bad) <= 1, tuple(bad) if bad else None, CHECKED)


def separable_bound(fs, xs, hs, nu, singular: bool = False) -> Verdict:
    """Estimate for ``f(x_1, ..., x_l) = sum f_i(x_i)`` over splittings of ``nu``."""
    if not (len(fs) == len(xs) == len(hs)):
        raise DimensionError("one point and direction per component")
    nu = rat(nu)
    xs = [_check_point(f, x) for f, x in zip(fs, xs)]
    hs = [vec(h) for h in hs]
    sub = singular_dir_subdif if singular else dir_subdif
    total = sum(f.n for f in fs)
    parts = []
    for split in _splittings([graph_deriv_values(f, x, h) for f, x, h in zip(fs, xs, hs)], nu):
        parts.append(product_set([sub(f, x, h, v) for f, x, h, v in zip(fs, xs, hs, split)]))
    bound = union_sets(total, parts)
    g = separable_sum(fs)
    xx = tuple(c for x in xs for c in x)
    hh = tuple(c for h in hs for c in h)
    exact = sub(g, xx, hh, nu)
    qc = _calm_qc([f.calm_in_direction(x, h) for f, x, h in zip(fs, xs, hs)])
    return finish(bound, exact, [qc])


def coderivative_of_sets(G: ConeUnion, S: UnionSet, n: int, m: int) -> UnionSet:
    """``{xi : (xi, -y) in G for some y in S}`` for polyhedra ``S`` in ``R^m``."""
    out = []
    for g in G.pieces:
        gh = g.hform
        g_ineq = [(tuple(a[:n]) + tuple(-x for x in a[n:]), 0) for a, _ in gh.ineqs()]
        g_eq = [(tuple(a[:n]) + tuple(-x for x in a[n:]), 0) for a, _ in gh.eqs()]
        for P in S.pieces:
            L = P.lift(n + m, n)
            Z = HPoly.from_rows(n + m, g_ineq + L.ineqs(), g_eq + L.eqs())
            if Z.is_empty():
                continue
            out.append(remove_redundant(fourier_motzkin(Z, range(n, n + m))).tidy())
    return UnionSet(n, _dedupe(out))


def chain_bound(g: PWAFunc, phi: PWAMap, x, h, nu, calm: bool | None = None) -> Verdict:
    """Estimate for ``g o phi`` at ``x`` in direction ``(h, nu)``.

    ``calm=False`` adds the branch over ``v in D phi(x)(0)``, ``v != 0``,
    with ``0 in Dg(phi(x))(v)``.
    """
    x, h, nu = vec(x), vec(h), rat(nu)
    if not phi.in_domain(x):
        raise DomainError("point outside the domain of the inner map")
    y = phi(x)
    if not g.in_domain(y):
        raise DomainError("phi(x) is outside the domain of g")
    n, m = phi.n, phi.m
    gph = phi.graph()
    calm_ok = True if calm is None else bool(calm)
    calm_qc = QCStatus("calm", calm_ok, None, CHECKED if calm is None else ASSERTED)
    parts = []
    witness = None
    for v in _value_directions(phi, None, x, h):
        if nu not in graph_deriv_values(g, y, v):
            continue
        G = dir_limiting_normal_cone(gph, x + y, tuple(h) + tuple(v))
        parts.append(coderivative_of_sets(G, dir_subdif(g, y, v, nu), n, m))
        for C in kernel_multipliers(G, singular_cone(g, y, v, nu), n, m):
            w = first_generator(C)
            if w is not None and witness is None:
                witness = w
    if not calm_ok:
        for v in _value_directions(phi, None, x, zeros(n), nonzero_v=True):
            if 0 not in graph_deriv_values(g, y, v):
                continue
            G = dir_limiting_normal_cone(gph, x + y, zeros(n) + tuple(v))
            parts.append(coderivative_of_sets(G, dir_subdif(g, y, v, 0), n, m))
    bound = union_sets(n, parts)
    exact = dir_subdif(g.compose(phi), x, h, nu)
    qc = QCStatus("chain-QC", witness is None, witness)
    return finish(bound, exact, [qc, calm_qc])


def partial_bound(f: PWAFunc, n: int, x, y, h, nu) -> Verdict:
    """Estimate for the partial subdifferential in the first ``n`` variables."""
    x, y, h, nu = vec(x), vec(y), vec(h), rat(nu)
    z = x + y
    _check_point(f, z)
    l = f.n - n
    d = tuple(h) + zeros(l)
    full = dir_subdif(f, z, d, nu)
    pieces = []
    for P in full.pieces:
        pieces.append(remove_redundant(fourier_motzkin(P, range(n, f.n))).tidy())
    bound = UnionSet(n, _dedupe(pieces))
    fx = f.restrict({n + i: y[i] for i in range(l)})
    exact = dir_subdif(fx, x, h, nu)
    witness = None
    for C in singular_cone(f, z, d, nu).pieces:
        K = dd_v_from_h(hcone(f.n, [a for a, _ in C.hform.ineqs()], [a for a, _ in C.hform.eqs()] + [unit(f.n, i) for i in range(n)]))
        w = first_generator(K)
        if w is not None:
            witness = w
            break
    qc = QCStatus("partial-QC", witness is None, witness)
    return finish(bound, exact, [qc])


def sum_bound(fs, x, h, nu) -> Verdict:
    """Estimate for ``f_1 + ... + f_l`` via splittings ``nu_1 + ... + nu_l = nu``."""
    x, h, nu = vec(x), vec(h), rat(nu)
    for f in fs:
        _check_point(f, x)
    n = fs[0].n
    parts = []
    witness = None
    for split in _splittings([graph_deriv_values(f, x, h) for f in fs], nu):
        subs = [dir_subdif(f, x, h, v) for f, v in zip(fs, split)]
        if any(not S.pieces for S in subs):
            continue
        for combo in product(*[S.pieces for S in subs]):
            P = poly_sum(n, combo)
            if P is not None:
                parts.append(UnionSet(n, [P]))
        if witness is None:
            sing = [singular_cone(f, x, h, v) for f, v in zip(fs, split)]
            if not any(s.is_empty for s in sing):
                witness = _nontrivial_sum_zero(n, sing)
    bound = union_sets(n, parts)
    exact = dir_subdif(pointwise_sum(fs), x, h, nu)
    qcs = [QCStatus("SumCQ", witness is None, witness), _calm_qc([f.calm_in_direction(x, h) for f in fs])]
    return finish(bound, exact, qcs)


def _index_sets(fs, x, h, nu, fx):
    I = [i for i, f in enumerate(fs) if f.in_domain(x) and f.value(x) == fx and nu in graph_deriv_values(f, x, h)]
    subs = {i: dir_subdif(fs[i], x, h, nu) for i in I}
    I0 = [i for i in I if subs[i].pieces]
    return I, I0, subs


def max_bound(fs, x, h, nu) -> Verdict:
    """Estimate for ``max f_i`` (closed convex hulls of the active subdifferentials)."""
    x, h, nu = vec(x), vec(h), rat(nu)
    F = pointwise_max(fs)
    _check_point(F, x)
    n = F.n
    fx = F.value(x)
    I, I0, subs = _index_sets(fs, x, h, nu, fx)
    sing = {i: singular_dir_subdif(fs[i], x, h, nu) for i in I}
    parts = []
    for r in range(1, len(I0) + 1):
        for J in combinations(I0, r):
            hull = poly_hull(n, [P for i in J for P in subs[i].pieces])
            rest = [i for i in I if i not in J]
            if any(not sing[i].pieces for i in rest):
                continue
            for combo in product(*[sing[i].pieces for i in rest]):
                P = poly_sum(n, [hull, *combo])
                if P is not None:
                    parts.append(UnionSet(n, [P]))
    bound = union_sets(n, parts)
    exact = dir_subdif(F, x, h, nu)
    cones = [singular_cone(fs[i], x, h, nu) for i in I]
    w = _nontrivial_sum_zero(n, cones) if cones and not any(c.is_empty for c in cones) else None
    notes = [f"I = {[i + 1 for i in I]}", f"I0 = {[i + 1 for i in I0]}"]
    return finish(bound, exact, [QCStatus("SumCQ", w is None, w)], notes)


def min_bound(fs, x, h, nu) -> Verdict:
    """Estimate for ``min f_i``: union over ``I0`` of the subdifferentials."""
    x, h, nu = vec(x), vec(h), rat(nu)
    F = pointwise_min(fs)
    _check_point(F, x)
    fx = F.value(x)
    I, I0, subs = _index_sets(fs, x, h, nu, fx)
    bound = union_sets(F.n, [subs[i] for i in I0])
    exact = dir_subdif(F, x, h, nu)
    return finish(bound, exact, [], [f"I0 = {[i + 1 for i in I0]}"])


# ---------------------------------------------------------------------------
# value functions


def solution_set(f: PWAFunc, n: int, y) -> tuple:
    """``(argmin_x f(x, y), inf_x f(x, y))`` with the argmin as a union of polyhedra."""
    y = vec(y)
    theta = infimal_projection(f, n)
    val = theta.value(y)
    l = f.n - n
    fixed = {n + i: y[i] for i in range(l)}
    fixed[f.n] = val
    S = f.epi().fix(fixed)
    return S, val


def _argmin_points(f: PWAFunc, n: int, S: UnionSet, y, val) -> list:
    fixed = {n + i: y[i] for i in range(f.n - n)}
    fixed[f.n] = val
    forms = []
    for P in f.epi().pieces:
        Q = P.fix(fixed)
        forms += list(zip(Q.A, Q.b))
    out = []
    for P in S.pieces:
        for _, w in sign_cells(n, forms, P):
            if w not in out:
                out.append(w)
    return out


def level_bounded(f: PWAFunc, n: int) -> bool:
    """Whether ``{x : f(x, y) <= c}`` is bounded for all ``y`` and ``c``."""
    for P in f.epi().pieces:
        if P.is_empty():
            continue
        R = recession_cone(P)
        dim = P.dim
        C = dd_v_from_h(hcone(dim, [a for a, _ in R.hform.ineqs()] + [unit(dim, dim - 1)], [a for a, _ in R.hform.eqs()] + [unit(dim, j) for j in range(n, dim - 1)]))
        if not C.is_zero:
            return False
    return True


def _epi_direction_reps(f: PWAFunc, z, fixed: dict, nonzero=None) -> list:
    """Directions ``(d, mu)`` of the epigraph, one per cell of the relevant arrangement.

    The cells refine the epigraph's localization, the active domain tangents,
    the regions where each active slope is minimal and the level sets
    ``a_i.d = mu``, so both ``N_epi`` and membership ``mu in Df(d)`` are
    constant on each cell.
    """
    N = f.n + 1
    K = conic_localization(f.epi(), z)
    forms = localization_forms(K, N, 0)
    x = z[:-1]
    act = f.active(x)
    for d, _, _ in act:
        T = tangent_cone_poly(d, x)
        forms += [(tuple(a) + (0,), 0) for a in T.A]
    slopes = sorted({a for _, a, _ in act})
    for a, b in combinations(slopes, 2):
        forms.append((tuple(p - q for p, q in zip(a, b)) + (0,), 0))
    for a in slopes:
        forms.append((tuple(a) + (-1,), 0))
    return slice_representatives(N, forms, fixed, nonzero)


def value_function_bound(f: PWAFunc, n: int, y, v, mu, inner_cert: str = "semicompact", xbar=None) -> Verdict:
    """Estimate of ``d theta(y; (v, mu))`` for ``theta(y) = inf_x f(x, y)``."""
    if inner_cert not in INNER_CERTS:
        raise ValueError(f"inner_cert must be one of {INNER_CERTS}")
    y, v, mu = vec(y), vec(v), rat(mu)
    l = f.n - n
    theta = infimal_projection(f, n)
    if not theta.in_domain(y):
        raise DomainError("value function is +inf at y")
    S, val = solution_set(f, n, y)
    qc = [QCStatus(f"inner-{inner_cert}", True, None, ASSERTED)]
    if inner_cert == "semicompact":
        qc.append(QCStatus("level-bounded", level_bounded(f, n), None, CHECKED))
        xbars = _argmin_points(f, n, S, y, val)
    else:
        if xbar is None:
            raise ValueError("pointed certificates need the reference point xbar")
        xbar = vec(xbar)
        if not S.contains(xbar):
            raise DomainError("xbar is not a minimizer for y")
        xbars = [xbar]
    parts = []
    for xb in xbars:
        z = xb + y + (val,)
        fixed = {n + i: v[i] for i in range(l)}
        fixed[f.n] = mu
        branches = [(fixed, None)]
        if inner_cert != "calm":
            zero = {n + i: 0 for i in range(l)}
            zero[f.n] = 0
            branches.append((zero, list(range(n))))
        for fx, nz in branches:
            for d in _epi_direction_reps(f, z, fx, nz):
                if d[f.n] in graph_deriv_values(f, xb + y, d[:f.n]):
                    parts.append(dir_subdif(f, xb + y, d[:f.n], d[f.n]))
    B = union_sets(f.n, parts)
    bound = B.fix({i: 0 for i in range(n)})
    bound = UnionSet(l, _dedupe([P.tidy() for P in bound.pieces]))
    exact = dir_subdif(theta, y, v, mu)
    return finish(bound, exact, qc)
