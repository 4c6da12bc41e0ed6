"""Calculus rules for directional limiting normal cones.

Each rule returns a :class:`Verdict` holding the rule's upper estimate, the
exact cone of the resulting set whenever the polyhedral class is closed under
the operation, an exact inclusion certificate, and the qualification
conditions together with who vouched for them.

Unions over directions (``v`` in a graphical derivative, ``h`` in a tangent
cone) are infinite, but the estimated objects only depend on the sign cell
of the direction in the arrangement of the relevant tangent cones, so one
representative per cell is enough.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .cones import (
    UnionSet,
    _Conic,
    conic_localization,
    dir_limiting_normal_cone,
    enumerate_direction_strata,
    frechet_normal_cone,
    localization_forms,
    sign_cells,
    slice_representatives,
)
from .errors import DimensionError, DomainError, PointNotInImage, PointNotInSet
from .geometry import (
    ConeUnion,
    HPoly,
    VCone,
    add,
    dd_v_from_h,
    fourier_motzkin,
    hcone,
    image_cone,
    intersect_unions,
    is_bounded,
    is_zero,
    mat,
    matvec,
    minkowski_union,
    neg,
    poly_vrep,
    vec,
    zeros,
)

CHECKED = "checked"
ASSERTED = "asserted-by-caller"


@dataclass
class QCStatus:
    name: str
    holds: bool | None
    witness: tuple | None = None
    provenance: str = CHECKED

    def to_json(self):
        return {
            "name": self.name,
            "holds": self.holds,
            "witness": None if self.witness is None else [str(x) for x in self.witness],
            "provenance": self.provenance,
        }


@dataclass
class Verdict:
    """Outcome of a rule evaluation.

    ``inclusion`` is ``"yes"``, ``"no"`` (then ``witness`` is a point of the
    exact object outside the bound) or ``"not-computable"``.
    """

    bound: object
    exact: object = None
    inclusion: str = "not-computable"
    witness: tuple | None = None
    qc: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    refined_bound: object = None

    @property
    def qc_holds(self) -> bool:
        return all(q.holds for q in self.qc)

    def failed(self) -> list:
        return [q for q in self.qc if q.holds is False]


def certify(exact, bound):
    """``("yes", None)`` or ``("no", witness)`` for ``exact`` inside ``bound``."""
    w = exact.escape(bound)
    return ("yes", None) if w is None else ("no", w)


def finish(bound, exact, qc=(), notes=(), refined=None) -> Verdict:
    if exact is None:
        return Verdict(bound, None, "not-computable", None, list(qc), list(notes), refined)
    inc, w = certify(exact, bound)
    return Verdict(bound, exact, inc, w, list(qc), list(notes), refined)


def first_generator(C: VCone):
    if C.rays:
        return C.rays[0]
    if C.lineality:
        return C.lineality[0]
    return None


# ---------------------------------------------------------------------------
# piecewise affine maps


class PWAMap:
    """Continuous piecewise affine map ``R^n -> R^m`` on a union of polyhedra.

    ``pieces`` are ``(domain, A, c)``; on overlapping domains the affine
    pieces must agree, which is checked exactly at construction.
    """

    def __init__(self, n: int, m: int, pieces, validate: bool = True):
        self.n, self.m = n, m
        ps = []
        for dom, A, c in pieces:
            A, c = mat(A), vec(c)
            if dom.dim != n or len(A) != m or any(len(r) != n for r in A) or len(c) != m:
                raise DimensionError("piece shape does not match the map's dimensions")
            ps.append((dom, A, c))
        self.pieces = tuple(ps)
        if validate:
            self._validate()

    @classmethod
    def affine(cls, A, c=None, domain: HPoly | None = None):
        A = mat(A)
        m, n = len(A), len(A[0])
        return cls(n, m, [(domain or HPoly.space(n), A, c if c is not None else zeros(m))])

    def _validate(self):
        for i in range(len(self.pieces)):
            for j in range(i + 1, len(self.pieces)):
                Di, Ai, ci = self.pieces[i]
                Dj, Aj, cj = self.pieces[j]
                vr = poly_vrep(Di.intersect(Dj))
                if vr is None:
                    continue
                V, R, L = vr
                for v in V:
                    if add(matvec(Ai, v), ci) != add(matvec(Aj, v), cj):
                        raise DomainError(f"pieces {i} and {j} disagree on their overlap")
                for r in list(R) + list(L):
                    if matvec(Ai, r) != matvec(Aj, r):
                        raise DomainError(f"pieces {i} and {j} disagree on their overlap")

    def key(self):
        return (self.n, self.m, tuple((d.key(), A, c) for d, A, c in self.pieces))

    def __hash__(self):
        return hash(self.key())

    def __eq__(self, other):
        return isinstance(other, PWAMap) and self.key() == other.key()

    def __call__(self, x):
        x = vec(x)
        for dom, A, c in self.pieces:
            if dom.contains(x):
                return add(matvec(A, x), c)
        raise DomainError(f"point {tuple(map(str, x))} is outside the domain of the map")

    def in_domain(self, x) -> bool:
        return any(d.contains(vec(x)) for d, _, _ in self.pieces)

    def domain(self) -> UnionSet:
        return UnionSet(self.n, [d for d, _, _ in self.pieces])

    def graph(self) -> UnionSet:
        n, m = self.n, self.m
        out = []
        for dom, A, c in self.pieces:
            G = dom.lift(n + m, 0)
            eqs = [(tuple(-x for x in A[i]) + tuple(1 if j == i else 0 for j in range(m)), c[i]) for i in range(m)]
            out.append(HPoly.from_rows(n + m, G.ineqs(), G.eqs() + eqs))
        return UnionSet(n + m, out)

    def preimage(self, Q: UnionSet) -> UnionSet:
        """``{x : phi(x) in Q}`` as a union of polyhedra."""
        out = []
        for dom, A, c in self.pieces:
            for P in Q.pieces:
                out.append(dom.intersect(P.map_rows(A, c, self.n)))
        return UnionSet(self.n, out).nonempty_pieces()

    def image(self, C: UnionSet) -> UnionSet:
        """``phi(C)`` by Fourier-Motzkin elimination of the source variables."""
        out = []
        G = self.graph()
        for P in G.pieces:
            for Cp in C.pieces:
                Z = P.intersect(Cp.lift(self.n + self.m, 0))
                if Z.is_empty():
                    continue
                out.append(fourier_motzkin(Z, range(self.n)))
        return UnionSet(self.m, out)

    def compose(self, inner: "PWAMap") -> "PWAMap":
        """``self o inner`` over the common refinement of the domains."""
        if inner.m != self.n:
            raise DimensionError("composition dimension mismatch")
        pieces = []
        for d1, A1, c1 in inner.pieces:
            for d2, A2, c2 in self.pieces:
                dom = d1.intersect(d2.map_rows(A1, c1, inner.n))
                if dom.is_empty():
                    continue
                A = tuple(tuple(sum((A2[i][k] * A1[k][j] for k in range(self.n)), Fraction(0)) for j in range(inner.n)) for i in range(self.m))
                c = add(matvec(A2, c1), c2)
                pieces.append((dom, A, c))
        return PWAMap(inner.n, self.m, pieces, validate=False)

    def to_json(self):
        return {
            "kind": "pwa_map",
            "n": self.n,
            "m": self.m,
            "pieces": [
                {
                    "domain": {"A": [[str(x) for x in r] for r in d.A], "b": [str(x) for x in d.b], "eq_rows": sorted(d.eq)},
                    "A": [[str(x) for x in r] for r in A],
                    "c": [str(x) for x in c],
                }
                for d, A, c in self.pieces
            ],
        }


# ---------------------------------------------------------------------------
# coderivative helpers on graph normal cones


def coderivative_image(G: ConeUnion, P: ConeUnion, n: int, m: int) -> ConeUnion:
    """``{xi : (xi, -lam) in G for some lam in P}`` (a union of convex cones)."""
    out = []
    for g in G.pieces:
        gh = g.hform
        g_ineq = [tuple(a[:n]) + neg(a[n:]) for a, _ in gh.ineqs()]
        g_eq = [tuple(a[:n]) + neg(a[n:]) for a, _ in gh.eqs()]
        for p in P.pieces:
            ph = p.hform
            ineq = g_ineq + [zeros(n) + tuple(a) for a, _ in ph.ineqs()]
            eq = g_eq + [zeros(n) + tuple(a) for a, _ in ph.eqs()]
            C = dd_v_from_h(hcone(n + m, ineq, eq))
            out.append(image_cone(C, _proj(n + m, 0, n), n))
    return ConeUnion(n, out)


def image_multipliers(G: ConeUnion, P: ConeUnion, n: int, m: int) -> ConeUnion:
    """``{y* : (-xi, y*) in G for some xi in P}``, i.e. ``-D*(-y*)`` meets ``P``.

    The signs matter once the coderivative is not odd: for ``|x|`` on ``R``
    the image ``[0, inf)`` has normals ``y* <= 0``, while ``{y* : D*(y*)
    meets N_C}`` would give ``y* >= 0``.
    """
    out = []
    for g in G.pieces:
        gh = g.hform
        g_ineq = [neg(a[:n]) + tuple(a[n:]) for a, _ in gh.ineqs()]
        g_eq = [neg(a[:n]) + tuple(a[n:]) for a, _ in gh.eqs()]
        for p in P.pieces:
            ph = p.hform
            ineq = g_ineq + [tuple(a) + zeros(m) for a, _ in ph.ineqs()]
            eq = g_eq + [tuple(a) + zeros(m) for a, _ in ph.eqs()]
            C = dd_v_from_h(hcone(n + m, ineq, eq))
            out.append(image_cone(C, _proj(n + m, n, m), m))
    return ConeUnion(m, out)


def kernel_multipliers(G: ConeUnion, P: ConeUnion, n: int, m: int) -> list:
    """Cones ``{lam in P : (0, -lam) in G}``, i.e. ``0 in D*(lam)``."""
    out = []
    for g in G.pieces:
        gh = g.hform
        for p in P.pieces:
            ph = p.hform
            ineq = [neg(a[n:]) for a, _ in gh.ineqs()] + [tuple(a) for a, _ in ph.ineqs()]
            eq = [neg(a[n:]) for a, _ in gh.eqs()] + [tuple(a) for a, _ in ph.eqs()]
            out.append(dd_v_from_h(hcone(m, ineq, eq)))
    return out


def _proj(total: int, start: int, k: int):
    return tuple(tuple(1 if j == start + i else 0 for j in range(total)) for i in range(k))


def graph_point(phi: PWAMap, x):
    x = vec(x)
    if not phi.in_domain(x):
        raise DomainError(f"point {tuple(map(str, x))} is outside the domain of the map")
    return x + phi(x)


def _direction_reps(K: _Conic, extra, dim: int, fixed: dict, nonzero=None) -> list:
    forms = localization_forms(K, dim, 0) + list(extra)
    return slice_representatives(dim, forms, fixed, nonzero)


def graph_localization(phi: PWAMap, x) -> _Conic:
    return conic_localization(phi.graph(), graph_point(phi, x))


def graph_derivative_values(phi: PWAMap, x, h) -> UnionSet:
    """``D phi(x)(h)`` as a union of polyhedra in ``R^m``."""
    K = graph_localization(phi, x)
    h = vec(h)
    vals = {i: h[i] for i in range(phi.n)}
    return UnionSet(phi.n + phi.m, K.pieces).fix(vals)


def _value_directions(phi: PWAMap, Q: UnionSet | None, x, h, nonzero_v: bool = False) -> list:
    """Directions ``v`` with ``(h, v)`` tangent to the graph (and ``v`` tangent to ``Q``)."""
    n, m = phi.n, phi.m
    K = graph_localization(phi, x)
    extra = []
    KQ = None
    if Q is not None:
        KQ = conic_localization(Q, phi(x))
        extra = localization_forms(KQ, n + m, n)
    h = vec(h)
    reps = _direction_reps(K, extra, n + m, {i: h[i] for i in range(n)}, list(range(n, n + m)) if nonzero_v else None)
    out = []
    for z in reps:
        v = z[n:]
        if K.contains(z) and (KQ is None or KQ.contains(v)):
            out.append(v)
    return out


# ---------------------------------------------------------------------------
# rules


def qc_foscms(phi: PWAMap, Omega: UnionSet, x, u) -> Verdict:
    """First-order sufficient condition for metric subregularity in direction ``u``.

    Holds iff no ``lam != 0`` with ``0 in D*phi(x;(u,w))(lam)`` and
    ``lam in N_Omega(phi(x); w)`` for some ``w in D phi(x)(u)``.
    """
    x = vec(x)
    y = phi(x)
    if not Omega.contains(y):
        raise PointNotInSet("phi(x) is not in Omega")
    n, m = phi.n, phi.m
    gph = phi.graph()
    bad = []
    witness = None
    for w in _value_directions(phi, Omega, x, u):
        G = dir_limiting_normal_cone(gph, x + y, tuple(vec(u)) + tuple(w))
        N = dir_limiting_normal_cone(Omega, y, w)
        for C in kernel_multipliers(G, N, n, m):
            bad.append(C)
            g = first_generator(C)
            if g is not None and witness is None:
                witness = g
    qc = QCStatus("FOSCMS", witness is None, witness)
    return Verdict(ConeUnion(m, bad), None, "not-computable", None, [qc], [])


def _calm_status(calm) -> tuple:
    if calm is None:
        return True, QCStatus("calm", True, None, CHECKED)
    return bool(calm), QCStatus("calm", bool(calm), None, ASSERTED)


def _preimage_part(phi: PWAMap, Q: UnionSet, x, h, calm: bool) -> ConeUnion:
    n, m = phi.n, phi.m
    x = vec(x)
    y = phi(x)
    gph = phi.graph()
    parts = []
    for v in _value_directions(phi, Q, x, h):
        G = dir_limiting_normal_cone(gph, x + y, tuple(vec(h)) + tuple(v))
        N = dir_limiting_normal_cone(Q, y, v)
        parts.append(coderivative_image(G, N, n, m))
    if not calm:
        for v in _value_directions(phi, Q, x, zeros(n), nonzero_v=True):
            G = dir_limiting_normal_cone(gph, x + y, zeros(n) + tuple(v))
            N = dir_limiting_normal_cone(Q, y, v)
            parts.append(coderivative_image(G, N, n, m))
    return ConeUnion(n, []).union(*parts)


def preimage_bound(phi: PWAMap, Q: UnionSet, x, h, calm: bool | None = None) -> Verdict:
    """Estimate of ``N_C(x; h)`` for ``C = phi^{-1}(Q)``.

    ``calm=None`` lets the engine decide: validated PWA maps are continuous
    and piecewise affine, hence calm, so only the calm branch is formed.
    ``calm=False`` adds the branch over ``v in D phi(x)(0)``, ``v != 0``.
    """
    x = vec(x)
    if not Q.contains(phi(x)):
        raise PointNotInSet("phi(x) is not in Q")
    is_calm, calm_qc = _calm_status(calm)
    bound = _preimage_part(phi, Q, x, h, is_calm)
    C = phi.preimage(Q)
    exact = dir_limiting_normal_cone(C, x, h)
    fos = qc_foscms(phi, Q, x, h).qc[0]
    return finish(bound, exact, [fos, calm_qc])


def _nontrivial_sum_zero(dim: int, unions) -> tuple | None:
    """Nonzero ``(lam_1, ..., lam_l)`` with ``lam_i`` in ``unions[i]`` summing to zero."""
    l = len(unions)
    total = dim * l
    combos = [[]]
    for U in unions:
        combos = [c + [p] for c in combos for p in U.pieces]
    for combo in combos:
        ineq, eq = [], []
        for i, p in enumerate(combo):
            ph = p.hform
            ineq += [zeros(i * dim) + tuple(a) + zeros(total - (i + 1) * dim) for a, _ in ph.ineqs()]
            eq += [zeros(i * dim) + tuple(a) + zeros(total - (i + 1) * dim) for a, _ in ph.eqs()]
        for k in range(dim):
            eq.append(tuple(1 if j % dim == k else 0 for j in range(total)))
        C = dd_v_from_h(hcone(total, ineq, eq))
        g = first_generator(C)
        if g is not None:
            return g
    return None


def intersection_bound(Cs, x, h) -> Verdict:
    """``N_C(x;h)`` inside ``sum_i N_{C_i}(x;h)`` for ``C`` the intersection, under capCQ."""
    x = vec(x)
    if not Cs:
        raise ValueError("need at least one set")
    dim = Cs[0].dim
    for C in Cs:
        if not C.contains(x):
            raise PointNotInSet("point is not in every set")
    parts = [dir_limiting_normal_cone(C, x, h) for C in Cs]
    if any(p.is_empty for p in parts):
        bound = ConeUnion(dim, [])
    else:
        bound = minkowski_union(dim, parts)
    w = None if any(p.is_empty for p in parts) else _nontrivial_sum_zero(dim, parts)
    qc = QCStatus("capCQ", w is None, w)
    inter = Cs[0]
    for C in Cs[1:]:
        inter = inter.intersect(C)
    exact = dir_limiting_normal_cone(inter, x, h)
    return finish(bound, exact, [qc])


def constraint_bound(P: UnionSet, phi: PWAMap, Q: UnionSet, x, h, calm: bool | None = None) -> Verdict:
    """Estimate for ``C = {x in P : phi(x) in Q}``."""
    x = vec(x)
    if not P.contains(x):
        raise PointNotInSet("point is not in P")
    y = phi(x)
    if not Q.contains(y):
        raise PointNotInSet("phi(x) is not in Q")
    n, m = phi.n, phi.m
    is_calm, calm_qc = _calm_status(calm)
    pre = _preimage_part(phi, Q, x, h, is_calm)
    NP = dir_limiting_normal_cone(P, x, h)
    bound = minkowski_union(n, [pre, NP]) if not (pre.is_empty or NP.is_empty) else ConeUnion(n, [])
    # lam1 in -D*phi(x;(h,v))(lam2) and N_P(x;h), lam2 in N_Q(phi(x); v)  =>  both zero
    gph = phi.graph()
    witness = None
    for v in _value_directions(phi, Q, x, h):
        G = dir_limiting_normal_cone(gph, x + y, tuple(vec(h)) + tuple(v))
        NQ = dir_limiting_normal_cone(Q, y, v)
        for g in G.pieces:
            for p1 in NP.pieces:
                for p2 in NQ.pieces:
                    gh = g.hform
                    ineq = [neg(a) for a, _ in gh.ineqs()]
                    eq = [tuple(a) for a, _ in gh.eqs()]
                    ineq += [tuple(a) + zeros(m) for a, _ in p1.hform.ineqs()]
                    eq += [tuple(a) + zeros(m) for a, _ in p1.hform.eqs()]
                    ineq += [zeros(n) + tuple(a) for a, _ in p2.hform.ineqs()]
                    eq += [zeros(n) + tuple(a) for a, _ in p2.hform.eqs()]
                    gen = first_generator(dd_v_from_h(hcone(n + m, ineq, eq)))
                    if gen is not None and witness is None:
                        witness = gen
    qc = QCStatus("constraint-QC", witness is None, witness)
    C = P.intersect(phi.preimage(Q))
    exact = dir_limiting_normal_cone(C, x, h)
    return finish(bound, exact, [qc, calm_qc])


INNER_CERTS = ("semicompact", "semicontinuous", "calm")


def solution_set(phi: PWAMap, C: UnionSet, y) -> UnionSet:
    """``{x in C : phi(x) = y}``."""
    y = vec(y)
    return phi.preimage(UnionSet(phi.m, [HPoly.point(y)])).intersect(C)


def _stratum_points(S: UnionSet, hyper) -> list:
    """One point per cell of the affine arrangement ``hyper`` inside each piece of ``S``."""
    out = []
    for P in S.pieces:
        for _, w in sign_cells(S.dim, hyper, P):
            if w not in out:
                out.append(w)
    return out


def image_bound(phi: PWAMap, C: UnionSet, y, v, inner_cert: str = "semicompact", xbar=None) -> Verdict:
    """Estimate of ``N_Q(y; v)`` for the image ``Q = phi(C)``."""
    if inner_cert not in INNER_CERTS:
        raise ValueError(f"inner_cert must be one of {INNER_CERTS}")
    y, v = vec(y), vec(v)
    n, m = phi.n, phi.m
    Psi = solution_set(phi, C, y)
    if Psi.is_empty:
        raise PointNotInImage("y is not in phi(C)")
    qc = [QCStatus(f"inner-{inner_cert}", True, None, ASSERTED)]
    notes = []
    if inner_cert == "semicompact":
        box = []
        for dom, A, c in phi.pieces:
            for P in C.pieces:
                rows = [(A[i], y[i] - c[i] + 1) for i in range(m)] + [(neg(A[i]), -(y[i] - c[i] - 1)) for i in range(m)]
                box.append(dom.intersect(P, HPoly.from_rows(n, rows)))
        bounded = all(is_bounded(B) for B in box if not B.is_empty())
        qc.append(QCStatus("bounded-solution-map", bounded, None, CHECKED))
        hyper = []
        for dom, _, _ in phi.pieces:
            hyper += list(zip(dom.A, dom.b))
        for P in C.pieces:
            hyper += list(zip(P.A, P.b))
        xbars = _stratum_points(Psi, hyper)
    else:
        if xbar is None:
            raise ValueError("pointed certificates need the reference point xbar")
        xbar = vec(xbar)
        if not Psi.contains(xbar):
            raise PointNotInImage("xbar is not in the solution set of y")
        xbars = [xbar]
    gph = phi.graph()
    parts = []
    for xb in xbars:
        K = conic_localization(gph, xb + y)
        KC = conic_localization(C, xb)
        extra = localization_forms(KC, n + m, 0)
        fixed = {n + i: v[i] for i in range(m)}
        for z in _direction_reps(K, extra, n + m, fixed):
            h = z[:n]
            if K.contains(z) and KC.contains(h):
                G = dir_limiting_normal_cone(gph, xb + y, z)
                NC = dir_limiting_normal_cone(C, xb, h)
                parts.append(image_multipliers(G, NC, n, m))
        if inner_cert != "calm":
            fixed0 = {n + i: 0 for i in range(m)}
            for z in _direction_reps(K, extra, n + m, fixed0, list(range(n))):
                h = z[:n]
                if K.contains(z) and KC.contains(h):
                    G = dir_limiting_normal_cone(gph, xb + y, z)
                    NC = dir_limiting_normal_cone(C, xb, h)
                    parts.append(image_multipliers(G, NC, n, m))
    bound = ConeUnion(m, []).union(*parts)
    Q = phi.image(C)
    exact = dir_limiting_normal_cone(Q, y, v)
    return finish(bound, exact, qc, notes)


def union_bound(Cs, x, h) -> Verdict:
    """``N_C(x;h)`` inside the union of ``N_{C_i}(x;h)`` over ``i`` in ``I(x,h)``.

    ``refined_bound`` is the sharper estimate combining the intersection of
    the Fréchet cones with directional cones over the nonzero tangent
    directions; for ``h != 0`` it coincides with ``bound``.
    """
    x, h = vec(x), vec(h)
    if not Cs:
        raise ValueError("need at least one set")
    dim = Cs[0].dim
    I = [i for i, C in enumerate(Cs) if C.contains(x) and not dir_limiting_normal_cone(C, x, h).is_empty]
    if not any(C.contains(x) for C in Cs):
        raise PointNotInSet("point is not in the union")
    # h in T_{C_i}(x) iff the directional cone is nonempty (it contains 0 then)
    bound = ConeUnion(dim, []).union(*[dir_limiting_normal_cone(Cs[i], x, h) for i in I])
    U = UnionSet(dim, [P for C in Cs for P in C.pieces])
    exact = dir_limiting_normal_cone(U, x, h)
    notes = [f"I(x,h) = {[i + 1 for i in I]}"]
    if is_zero(h):
        inside = [C for C in Cs if C.contains(x)]
        fr = intersect_unions(dim, [ConeUnion(dim, [frechet_normal_cone(C, x)]) for C in inside])
        parts = [fr]
        for u, _ in enumerate_direction_strata(U, x):
            if is_zero(u):
                continue
            for C in inside:
                parts.append(dir_limiting_normal_cone(C, x, u))
        refined = ConeUnion(dim, []).union(*parts)
    else:
        refined = bound
    return finish(bound, exact, [], notes, refined)
