"""Directional coderivatives of polyhedral multifunctions.

A multifunction is stored through its graph, a finite union of polyhedra.
Coderivatives are read off the graph's directional normal cone with the usual
sign flip: ``xi in D*M((x,y);(u,v))(eta)`` iff ``(xi, -eta)`` is a normal.
The chain and sum rules return cone estimates of the graph normal cone of the
composite map, so inclusion certificates compare cones directly.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

from .cones import (
    UnionSet,
    conic_localization,
    dir_limiting_normal_cone,
    localization_forms,
    sign_cells,
    slice_representatives,
)
from .errors import DimensionError, DomainError, PointNotInGraph
from .functions import PWAFunc, dir_subdif
from .geometry import (
    ConeUnion,
    HPoly,
    dd_v_from_h,
    dot,
    fourier_motzkin,
    hcone,
    image_cone,
    matvec,
    remove_redundant,
    sub,
    transpose,
    unit,
    vec,
    zeros,
)
from .rules import (
    ASSERTED,
    CHECKED,
    PWAMap,
    QCStatus,
    Verdict,
    _nontrivial_sum_zero,
    _value_directions,
    finish,
    first_generator,
)


class PolyMap:
    """Multifunction ``R^n => R^m`` with a polyhedral graph in ``R^(n+m)``."""

    def __init__(self, n: int, m: int, graph: UnionSet, pwa: PWAMap | None = None):
        if graph.dim != n + m:
            raise DimensionError("graph dimension must be n + m")
        self.n, self.m = n, m
        self.graph = graph
        self.pwa = pwa

    @classmethod
    def from_pwa(cls, phi: PWAMap) -> "PolyMap":
        return cls(phi.n, phi.m, phi.graph(), phi)

    @classmethod
    def constant(cls, n: int, values: UnionSet) -> "PolyMap":
        return cls(n, values.dim, values.lift(n + values.dim, n))

    def contains(self, x, y) -> bool:
        return self.graph.contains(vec(x) + vec(y))

    def values(self, x) -> UnionSet:
        x = vec(x)
        return self.graph.fix({i: x[i] for i in range(self.n)})

    def key(self):
        return (self.n, self.m, self.graph.key())

    def __eq__(self, other):
        return isinstance(other, PolyMap) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def to_json(self):
        return {"kind": "polymap", "n": self.n, "m": self.m, "graph": self.graph.to_json()}


def compose(S1: PolyMap, S2: PolyMap) -> PolyMap:
    """``S2 o S1`` with graph ``{(x, u) : exists w, (x, w) in gph S1, (w, u) in gph S2}``."""
    if S1.m != S2.n:
        raise DimensionError("composition dimension mismatch")
    n, m, s = S1.n, S1.m, S2.m
    dim = n + m + s
    out = []
    for P in S1.graph.pieces:
        for Q in S2.graph.pieces:
            Z = P.lift(dim, 0).intersect(Q.lift(dim, n))
            if Z.is_empty():
                continue
            out.append(remove_redundant(fourier_motzkin(Z, range(n, n + m))).tidy())
    return PolyMap(n, s, UnionSet(n + s, out))


def map_sum(Ss) -> PolyMap:
    """``S_1 + ... + S_p`` with graph ``{(x, sum w_i) : w_i in S_i(x)}``."""
    n, m = Ss[0].n, Ss[0].m
    p = len(Ss)
    dim = n + p * m + m
    out = []
    sum_rows = []
    for k in range(m):
        row = [0] * dim
        for i in range(p):
            row[n + i * m + k] = 1
        row[n + p * m + k] = -1
        sum_rows.append((tuple(row), 0))
    for combo in product(*[S.graph.pieces for S in Ss]):
        Z = HPoly.from_rows(dim, eqs=sum_rows)
        for i, P in enumerate(combo):
            M = tuple(unit(dim, j) for j in range(n)) + tuple(unit(dim, n + i * m + k) for k in range(m))
            Z = Z.intersect(P.map_rows(M, None, dim))
        if Z.is_empty():
            continue
        out.append(remove_redundant(fourier_motzkin(Z, range(n, n + p * m))).tidy())
    return PolyMap(n, m, UnionSet(n + m, out))


@dataclass
class CoderivResult:
    """Directional graph normal cone with the coderivative query view."""

    cone: ConeUnion
    n: int
    m: int

    def __call__(self, eta) -> UnionSet:
        """``{xi : (xi, -eta) in cone}``."""
        eta = vec(eta)
        pieces = []
        for C in self.cone.pieces:
            P = C.hform.fix({self.n + i: -eta[i] for i in range(self.m)}).tidy()
            if not P.is_empty():
                pieces.append(P)
        return UnionSet(self.n, sorted(set(pieces), key=lambda P: P.key()))

    query = __call__

    def to_json(self):
        return self.cone.to_json()


def _graph_point(M: PolyMap, x, y) -> tuple:
    z = vec(x) + vec(y)
    if len(z) != M.n + M.m:
        raise DimensionError("point of wrong dimension")
    if not M.graph.contains(z):
        raise PointNotInGraph("point is not in the graph")
    return z


def graphical_derivative(M: PolyMap, x, y, u) -> UnionSet:
    """``DM(x, y)(u) = {v : (u, v) in T_gph(x, y)}``."""
    z = _graph_point(M, x, y)
    u = vec(u)
    K = conic_localization(M.graph, z)
    return UnionSet(M.n + M.m, K.pieces).fix({i: u[i] for i in range(M.n)})


def dir_coderivative(M: PolyMap, x, y, u, v) -> CoderivResult:
    z = _graph_point(M, x, y)
    return CoderivResult(dir_limiting_normal_cone(M.graph, z, vec(u) + vec(v)), M.n, M.m)


# ---------------------------------------------------------------------------
# helpers shared by the chain and sum rules


def _points_in(S: UnionSet, forms) -> list:
    out = []
    for P in S.pieces:
        for _, w in sign_cells(S.dim, forms, P):
            if w not in out:
                out.append(w)
    return out


def _fixed_forms(M: PolyMap, fixed: dict, dim: int, offset: int) -> list:
    """Rows of the graph pieces with some coordinates fixed, lifted to ``R^dim``."""
    out = []
    for P in M.graph.pieces:
        Q = P.fix(fixed)
        for a, b in zip(Q.A, Q.b):
            out.append((zeros(offset) + tuple(a) + zeros(dim - offset - len(a)), b))
    return out


def _mixed_cone(parts, dim: int, out_map, out_dim: int) -> list:
    """Image under ``out_map`` of cones given as per-block H-rows on ``R^dim``."""
    ineq, eq = [], []
    for rows_i, rows_e in parts:
        ineq += rows_i
        eq += rows_e
    C = dd_v_from_h(hcone(dim, ineq, eq))
    return image_cone(C, out_map, out_dim)


def _rows(C, dim: int, place) -> tuple:
    """H-rows of cone ``C`` acting on ``place(z)`` expressed on ``R^dim``."""
    h = C.hform
    return [place(a) for a, _ in h.ineqs()], [place(a) for a, _ in h.eqs()]


def _xi_bounded(C_pieces, dim: int, free) -> bool:
    """Recession cones of the pieces have no direction supported on ``free`` only."""
    fixed = [j for j in range(dim) if j not in free]
    for P in C_pieces:
        if P.is_empty():
            continue
        K = dd_v_from_h(hcone(dim, [a for a, _ in P.ineqs()], [a for a, _ in P.eqs()] + [unit(dim, j) for j in fixed]))
        if not K.is_zero:
            return False
    return True


def _bounded_qc(ok: bool, asserted: bool | None) -> QCStatus:
    if ok:
        return QCStatus("Xi-bounded", True, None, CHECKED)
    if asserted:
        return QCStatus("Xi-bounded", True, None, ASSERTED)
    return QCStatus("Xi-bounded", False, None, CHECKED)


# ---------------------------------------------------------------------------
# chain rule


def chain_bound_coder(S1: PolyMap, S2: PolyMap, x, u, h, l, inner_calm: bool = False, xi_bounded: bool | None = None) -> Verdict:
    """Cone estimate of ``N_gph(S2 o S1)((x, u); (h, l))``.

    The coderivative estimate is read from the returned cone with
    :class:`CoderivResult`.  ``inner_calm=True`` drops the branch over unit
    ``k`` with ``(0, k)`` and ``(k, 0)`` tangent.
    """
    x, u, h, l = vec(x), vec(u), vec(h), vec(l)
    n, m, s = S1.n, S1.m, S2.m
    if S2.n != m:
        raise DimensionError("composition dimension mismatch")
    S = compose(S1, S2)
    if not S.graph.contains(x + u):
        raise PointNotInGraph("(x, u) is not in the graph of the composition")
    dim3 = n + m + s
    C_pieces = [P.lift(dim3, 0).intersect(Q.lift(dim3, n)) for P in S1.graph.pieces for Q in S2.graph.pieces]
    Xi = UnionSet(dim3, C_pieces).fix({**{i: x[i] for i in range(n)}, **{n + m + j: u[j] for j in range(s)}})
    forms = _fixed_forms(S1, {i: x[i] for i in range(n)}, m, 0) + _fixed_forms(S2, {m + j: u[j] for j in range(s)}, m, 0)
    wts = _points_in(Xi, forms)
    parts = []
    w_i = w_ii = None
    out_map = tuple(unit(n + m + s, i) for i in range(n)) + tuple(unit(n + m + s, n + m + j) for j in range(s))
    for w in wts:
        K1 = conic_localization(S1.graph, x + w)
        K2 = conic_localization(S2.graph, w + u)
        fk = localization_forms(K1, dim3, 0) + localization_forms(K2, dim3, n)
        branches = [({**{i: h[i] for i in range(n)}, **{n + m + j: l[j] for j in range(s)}}, None)]
        if not inner_calm:
            branches.append(({**{i: 0 for i in range(n)}, **{n + m + j: 0 for j in range(s)}}, list(range(n, n + m))))
        for bi, (fixed, nz) in enumerate(branches):
            for z in slice_representatives(dim3, fk, fixed, nz):
                d1, d2 = z[: n + m], z[n:]
                if not (K1.contains(d1) and K2.contains(d2)):
                    continue
                N1 = dir_limiting_normal_cone(S1.graph, x + w, d1)
                N2 = dir_limiting_normal_cone(S2.graph, w + u, d2)
                for A in N1.pieces:
                    for B in N2.pieces:
                        # variables (y1, c, y2): (y1, -c) in A, (c, y2) in B
                        ra = _rows(A, dim3, lambda a: tuple(a[:n]) + tuple(-t for t in a[n:]) + zeros(s))
                        rb = _rows(B, dim3, lambda a: zeros(n) + tuple(a))
                        parts.append(_mixed_cone([ra, rb], dim3, out_map, n + s))
                        # (0, lam) in A and (lam, 0) in B with lam != 0 violates (i)/(ii)
                        qa = _rows(A, m, lambda a: tuple(a[n:]))
                        qb = _rows(B, m, lambda a: tuple(a[:m]))
                        lam = first_generator(dd_v_from_h(hcone(m, qa[0] + qb[0], qa[1] + qb[1])))
                        if lam is not None:
                            if bi == 0 and w_i is None:
                                w_i = lam
                            if bi == 1 and w_ii is None:
                                w_ii = lam
    bound = ConeUnion(n + s, parts)
    exact = dir_limiting_normal_cone(S.graph, x + u, h + l)
    qc = [
        QCStatus("chain-QC-i", w_i is None, w_i),
        QCStatus("chain-QC-ii", w_ii is None, w_ii) if not inner_calm else QCStatus("Xi-inner-calm", True, None, ASSERTED),
        _bounded_qc(_xi_bounded(C_pieces, dim3, range(n, n + m)), xi_bounded),
    ]
    notes = [f"{len(wts)} representative(s) of the intermediate set"]
    return finish(bound, exact, qc, notes)


# ---------------------------------------------------------------------------
# sum rule


def sum_bound_coder(Ss, x, u, h, l, inner_calm: bool = False, xi_bounded: bool | None = None) -> Verdict:
    """Cone estimate of ``N_gph(S_1 + ... + S_p)((x, u); (h, l))``.

    For two summands with a single-valued PWA first summand the reduced
    estimate with ``k = S_1'(x; h)`` is returned as ``refined_bound``.
    """
    x, u, h, l = vec(x), vec(u), vec(h), vec(l)
    p = len(Ss)
    n, m = Ss[0].n, Ss[0].m
    if any(S.n != n or S.m != m for S in Ss):
        raise DimensionError("summands must share dimensions")
    S = map_sum(Ss)
    if not S.graph.contains(x + u):
        raise PointNotInGraph("(x, u) is not in the graph of the sum")
    # intermediate set of (w_1, ..., w_p)
    dimw = p * m
    xi_pieces = []
    for combo in product(*[Sm.values(x).pieces for Sm in Ss]):
        Z = HPoly.from_rows(dimw, eqs=[(tuple(1 if j % m == k else 0 for j in range(dimw)), u[k]) for k in range(m)])
        for i, P in enumerate(combo):
            Z = Z.intersect(P.lift(dimw, i * m))
        if not Z.is_empty():
            xi_pieces.append(Z)
    Xi = UnionSet(dimw, xi_pieces)
    forms = []
    for i, Sm in enumerate(Ss):
        forms += _fixed_forms(Sm, {j: x[j] for j in range(n)}, dimw, i * m)
    wts = _points_in(Xi, forms)
    # direction space (h, k_1, ..., k_p)
    dimk = n + dimw
    out_dim = n + m
    parts = []
    w_i = w_ii = None
    for w in wts:
        ws = [w[i * m:(i + 1) * m] for i in range(p)]
        Ks = [conic_localization(Sm.graph, x + wi) for Sm, wi in zip(Ss, ws)]
        fk = []
        for i, K in enumerate(Ks):
            emb = tuple(unit(dimk, j) for j in range(n)) + tuple(unit(dimk, n + i * m + k) for k in range(m))
            for a in K.forms:
                fk.append((matvec(transpose(emb, dimk), a), 0))
        branches = [({j: h[j] for j in range(n)}, l, None)]
        if not inner_calm:
            branches.append(({j: 0 for j in range(n)}, zeros(m), list(range(n, dimk))))
        for bi, (fixed, total, nz) in enumerate(branches):
            eqs = [(zeros(n) + tuple(1 if j % m == k else 0 for j in range(dimw)), total[k]) for k in range(m)]
            for z in slice_representatives(dimk, fk, fixed, nz, eqs):
                hh = z[:n]
                ks = [z[n + i * m:n + (i + 1) * m] for i in range(p)]
                if not all(K.contains(hh + k) for K, k in zip(Ks, ks)):
                    continue
                Ns = [dir_limiting_normal_cone(Sm.graph, x + wi, hh + k) for Sm, wi, k in zip(Ss, ws, ks)]
                if any(N.is_empty for N in Ns):
                    continue
                # variables (xi_1, ..., xi_p, y): (xi_i, y) in N_i, output (sum xi_i, y)
                dimv = p * n + m
                out_map = tuple(tuple(1 if (j < p * n and j % n == r) else 0 for j in range(dimv)) for r in range(n)) + tuple(unit(dimv, p * n + k) for k in range(m))
                for combo in product(*[N.pieces for N in Ns]):
                    rows = []
                    for i, C in enumerate(combo):
                        rows.append(_rows(C, dimv, lambda a, i=i: zeros(i * n) + tuple(a[:n]) + zeros((p - i - 1) * n) + tuple(a[n:])))
                    parts.append(_mixed_cone(rows, dimv, out_map, out_dim))
                if (bi == 0 and w_i is None) or (bi == 1 and w_ii is None):
                    slices = [ConeUnion(n, [dd_v_from_h(C.hform.fix({n + k: 0 for k in range(m)})) for C in N.pieces]) for N in Ns]
                    wit = _nontrivial_sum_zero(n, slices)
                    if wit is not None:
                        if bi == 0:
                            w_i = wit
                        else:
                            w_ii = wit
    bound = ConeUnion(out_dim, parts)
    exact = dir_limiting_normal_cone(S.graph, x + u, h + l)
    dimc = n + dimw
    C_pieces = []
    for combo in product(*[Sm.graph.pieces for Sm in Ss]):
        Z = HPoly.space(dimc)
        for i, P in enumerate(combo):
            M = tuple(unit(dimc, j) for j in range(n)) + tuple(unit(dimc, n + i * m + k) for k in range(m))
            Z = Z.intersect(P.map_rows(M, None, dimc))
        C_pieces.append(Z)
    # boundedness of Xi: fix x and the sum of the w_i
    sum_pieces = []
    for Z in C_pieces:
        rows = [(tuple(1 if (j >= n and (j - n) % m == k) else 0 for j in range(dimc)), 0) for k in range(m)]
        sum_pieces.append(HPoly.from_rows(dimc, Z.ineqs(), Z.eqs() + [(a, 0) for a, _ in rows]))
    qc = [
        QCStatus("sum-QC-i", w_i is None, w_i),
        QCStatus("sum-QC-ii", w_ii is None, w_ii) if not inner_calm else QCStatus("Xi-inner-calm", True, None, ASSERTED),
        _bounded_qc(_xi_bounded(sum_pieces, dimc, range(n, dimc)), xi_bounded),
    ]
    refined = None
    notes = [f"{len(wts)} representative(s) of the intermediate set"]
    if p == 2 and Ss[0].pwa is not None:
        refined = _reduced_two_sum(Ss[0].pwa, Ss[1], x, u, h, l)
        notes.append("reduced estimate for a single-valued first summand")
    return finish(bound, exact, qc, notes, refined)


def _reduced_two_sum(phi: PWAMap, S2: PolyMap, x, u, h, l) -> ConeUnion:
    n, m = phi.n, phi.m
    y1 = phi(x)
    ks = _value_directions(phi, None, x, h)
    parts = []
    for k in ks:
        N1 = dir_limiting_normal_cone(phi.graph(), x + y1, h + k)
        w2 = sub(u, y1)
        if not S2.graph.contains(x + w2):
            continue
        N2 = dir_limiting_normal_cone(S2.graph, x + w2, h + sub(l, k))
        dimv = 2 * n + m
        out_map = tuple(tuple(1 if (j < 2 * n and j % n == r) else 0 for j in range(dimv)) for r in range(n)) + tuple(unit(dimv, 2 * n + q) for q in range(m))
        for A in N1.pieces:
            for B in N2.pieces:
                ra = _rows(A, dimv, lambda a: tuple(a[:n]) + zeros(n) + tuple(a[n:]))
                rb = _rows(B, dimv, lambda a: zeros(n) + tuple(a[:n]) + tuple(a[n:]))
                parts.append(_mixed_cone([ra, rb], dimv, out_map, n + m))
    return ConeUnion(n + m, parts)


# ---------------------------------------------------------------------------
# scalarization


def scalarize(phi: PWAMap, ystar) -> PWAFunc:
    """``x -> <y*, phi(x)>`` as a PWA function."""
    ystar = vec(ystar)
    pieces = [(d, matvec(transpose(A, phi.n), ystar), dot(ystar, c)) for d, A, c in phi.pieces]
    return PWAFunc(phi.n, pieces, validate=False)


def directionally_lipschitz(phi: PWAMap, x, u) -> bool:
    """Whether the domain covers a directional neighborhood of ``u`` at ``x``."""
    K = conic_localization(phi.domain(), x)
    return all(K.containing(c.signs) for c in K.cells_at(vec(u)))


def scalarization_check(phi: PWAMap, x, u, v, ystar) -> Verdict:
    """Both sides of ``D*phi(x;(u,v))(y*) = d<y*,phi>(x;(u,<y*,v>))``.

    ``exact`` holds the coderivative side and ``bound`` the subdifferential
    side; the ``equal`` condition records exact set equality.
    """
    x, u, v, ystar = vec(x), vec(u), vec(v), vec(ystar)
    if not phi.in_domain(x):
        raise DomainError("point outside the domain of the map")
    y = phi(x)
    lhs = CoderivResult(dir_limiting_normal_cone(phi.graph(), x + y, u + v), phi.n, phi.m)(ystar)
    rhs = dir_subdif(scalarize(phi, ystar), x, u, dot(ystar, v))
    lip = directionally_lipschitz(phi, x, u)
    equal = lhs.same_set(rhs)
    qc = [
        QCStatus("directionally-Lipschitz", lip, None, CHECKED),
        QCStatus("equal", equal, lhs.escape(rhs) or rhs.escape(lhs)),
    ]
    return finish(rhs, lhs, qc)
