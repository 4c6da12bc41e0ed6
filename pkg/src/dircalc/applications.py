"""Stability checks built on the directional calculus.

The checks cover directional metric (sub)regularity of ``F(x) = Omega - phi(x)``,
subtransversality of set systems, the Aubin property of solution maps of
``M(p, x) = 0`` and sharper limiting-normal estimates.  Every condition is
first order at the reference point, so smooth nonlinear data enters through
:class:`FirstOrderData`: the value and the directional derivative map at the
point.  Its affine surrogate ``x -> value + phi'(point; x - point)`` has the
same directional normal cones as the original map whenever the remainder is
continuously differentiable with zero derivative at the point.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

from .cones import (
    UnionSet,
    conic_localization,
    dir_limiting_normal_cone,
    frechet_normal_cone,
    limiting_normal_cone,
    slice_representatives,
)
from .errors import DimensionError, DomainError, PointNotInGraph, PointNotInSet
from .functions import PWAFunc, dir_subdif
from .geometry import (
    ConeUnion,
    HPoly,
    add,
    dd_v_from_h,
    dot,
    feasible,
    fourier_motzkin,
    hcone,
    is_zero,
    neg,
    poly_hull,
    poly_image,
    poly_sum,
    poly_vrep,
    primitive,
    rat,
    tangent_cone_poly,
    unit,
    vec,
    zeros,
)
from .multimaps import CoderivResult
from .rules import (
    ASSERTED,
    CHECKED,
    PWAMap,
    QCStatus,
    Verdict,
    _nontrivial_sum_zero,
    _preimage_part,
    certify,
    coderivative_image,
    first_generator,
    finish,
    graph_localization,
    image_bound,
    solution_set,
    kernel_multipliers,
    preimage_bound,
    union_bound,
)

PASSED = "sufficient-condition-passed"
FAILED = "condition-failed-with-witness"
NOT_APPLICABLE = "not-applicable"


@dataclass(frozen=True)
class FirstOrderData:
    """Value and directional derivative of a map at a reference point.

    ``deriv`` is the positively homogeneous map ``u -> phi'(point; u)`` given
    as a PWA map on polyhedral cones.  ``provenance`` is ``"checked"`` when
    the data was read off a PWA map and ``"asserted-by-caller"`` when the
    caller vouches for the smoothness of the remainder.
    """

    point: tuple
    value: tuple
    deriv: PWAMap
    provenance: str = ASSERTED

    def __post_init__(self):
        object.__setattr__(self, "point", vec(self.point))
        object.__setattr__(self, "value", vec(self.value))
        if self.deriv.n != len(self.point) or self.deriv.m != len(self.value):
            raise DimensionError("derivative map does not match point and value")
        for dom, _, c in self.deriv.pieces:
            if any(c) or any(dom.b):
                raise ValueError("derivative map must be positively homogeneous")

    @classmethod
    def linear(cls, point, value, jacobian) -> "FirstOrderData":
        return cls(point, value, PWAMap.affine(jacobian))

    @classmethod
    def from_pwa(cls, phi: PWAMap, x) -> "FirstOrderData":
        x = vec(x)
        y = phi(x)
        pieces = [(tangent_cone_poly(dom, x), A, zeros(phi.m)) for dom, A, _ in phi.pieces if dom.contains(x)]
        return cls(x, y, PWAMap(phi.n, phi.m, pieces, validate=False), CHECKED)

    @property
    def n(self) -> int:
        return self.deriv.n

    @property
    def m(self) -> int:
        return self.deriv.m

    def direction_value(self, u) -> tuple:
        return self.deriv(vec(u))

    def surrogate(self) -> PWAMap:
        """``x -> value + deriv(x - point)``."""
        n = self.n
        eye = tuple(unit(n, i) for i in range(n))
        pieces = []
        for dom, A, _ in self.deriv.pieces:
            shifted = dom.map_rows(eye, neg(self.point), n)
            pieces.append((shifted, A, add(self.value, neg(tuple(dot(r, self.point) for r in A)))))
        return PWAMap(n, self.m, pieces, validate=False)

    def component(self, i: int) -> PWAFunc:
        """Scalar surrogate of component ``i``."""
        return PWAFunc(self.n, [(d, A[i], c[i]) for d, A, c in self.surrogate().pieces], validate=False)


@dataclass
class StabilityVerdict:
    """Outcome of a sufficient-condition check."""

    property: str
    status: str
    witnesses: dict = field(default_factory=dict)
    provenance: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    coderivative: CoderivResult | None = None
    detail: Verdict | None = None

    @property
    def holds(self) -> bool:
        return self.status == PASSED

    def to_json(self):
        return {
            "property": self.property,
            "status": self.status,
            "witnesses": _encode(self.witnesses),
            "provenance": [q.to_json() for q in self.provenance],
            "notes": list(self.notes),
        }


def _encode(v):
    if v is None or isinstance(v, (bool, str)):
        return v
    if isinstance(v, dict):
        return {k: _encode(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_encode(x) for x in v]
    if hasattr(v, "to_json"):
        return v.to_json()
    return str(v)


def _as_map(phi, x) -> tuple:
    """``(PWA map, provenance)`` for a PWA map or first-order data at ``x``."""
    if isinstance(phi, FirstOrderData):
        if phi.point != vec(x):
            raise DomainError("first-order data is attached to another point")
        return phi.surrogate(), phi.provenance
    if not phi.in_domain(x):
        raise DomainError("point outside the domain of the map")
    return phi, CHECKED


def _direction_forms(psi: PWAMap, x, Q: UnionSet | None = None) -> list:
    """Forms on the source space whose cells fix the first-order data at ``x``.

    Graph forms (and forms of ``Q`` at ``psi(x)``) are pulled back along every
    affine piece active at ``x``.
    """
    n, m = psi.n, psi.m
    K = graph_localization(psi, x)
    KQ = conic_localization(Q, psi(x)) if Q is not None else None
    out = []
    for dom, A, _ in psi.pieces:
        if not dom.contains(x):
            continue

        def pull(f):
            return tuple(f[j] + sum(f[n + k] * A[k][j] for k in range(m)) for j in range(n))

        out += [pull(f) for f in K.forms]
        if KQ is not None:
            out += [pull(zeros(n) + tuple(f)) for f in KQ.forms]
    return [(f, 0) for f in out if not is_zero(f)]


def _nonzero_directions(n: int, forms) -> list:
    return [primitive(u) for u in slice_representatives(n, forms, {}, list(range(n)))]


# ---------------------------------------------------------------------------
# feasibility maps


def _regularity_multipliers(psi: PWAMap, Omega: UnionSet, x, u, v) -> tuple:
    """Violations of the multiplier implication and the coderivative estimate."""
    n, m = psi.n, psi.m
    y = psi(x)
    gph = psi.graph()
    K = graph_localization(psi, x)
    KQ = conic_localization(Omega, y)
    forms = [(f, 0) for f in K.forms] + [(zeros(n) + tuple(f), -dot(f, v)) for f in KQ.forms]
    violations = []
    parts = []
    for z in slice_representatives(n + m, forms, {i: u[i] for i in range(n)}):
        w = z[n:]
        if not K.contains(z) or not KQ.contains(add(w, v)):
            continue
        G = dir_limiting_normal_cone(gph, x + y, z)
        N = dir_limiting_normal_cone(Omega, y, add(w, v))
        for C in kernel_multipliers(G, N, n, m):
            g = first_generator(C)
            if g is not None:
                violations.append((w, g))
        for A in G.pieces:
            for B in N.pieces:
                ineq = [tuple(a[:n]) + neg(a[n:]) for a, _ in A.hform.ineqs()] + [zeros(n) + tuple(b) for b, _ in B.hform.ineqs()]
                eq = [tuple(a[:n]) + neg(a[n:]) for a, _ in A.hform.eqs()] + [zeros(n) + tuple(b) for b, _ in B.hform.eqs()]
                parts.append(dd_v_from_h(hcone(n + m, ineq, eq)))
    return violations, ConeUnion(n + m, parts)


def feasibility_graph(psi: PWAMap, Omega: UnionSet) -> UnionSet:
    """Graph of ``F(x) = Omega - psi(x)``: ``{(x, z) : psi(x) + z in Omega}``."""
    n, m = psi.n, psi.m
    out = []
    for dom, A, c in psi.pieces:
        M = tuple(tuple(A[i]) + unit(m, i) for i in range(m))
        for Q in Omega.pieces:
            out.append(dom.lift(n + m, 0).intersect(Q.map_rows(M, c, n + m)))
    return UnionSet(n + m, out).nonempty_pieces()


def check_dir_subregularity(phi, Omega: UnionSet, x, u, v=None) -> StabilityVerdict:
    """Directional metric subregularity (``v=None``) or regularity of ``Omega - phi``.

    The implication ``0 in D*phi(x;(u,w))(lam), lam in N_Omega(phi(x); v+w)
    => lam = 0`` is tested over every ``w`` in ``D phi(x)(u)`` with ``w + v``
    tangent to ``Omega``.  For the regular variant the returned
    ``coderivative`` is the estimate of ``D*F((x,0);(u,v))`` from the same
    data, and ``detail`` compares it with the exact one.
    """
    psi, prov = _as_map(phi, x)
    x, u = vec(x), vec(u)
    y = psi(x)
    if not Omega.contains(y):
        raise PointNotInSet("phi(x) is not in Omega")
    regular = v is not None
    v = vec(v) if regular else zeros(psi.m)
    violations, cone = _regularity_multipliers(psi, Omega, x, u, v)
    name = "directional metric regularity" if regular else "directional metric subregularity"
    prov_qc = [QCStatus("calm", True, None, prov)]
    verdict = StabilityVerdict(name, PASSED, {}, prov_qc)
    if violations:
        w, lam = violations[0]
        verdict.status = FAILED
        verdict.witnesses = {"w": w, "lambda": lam}
    if regular:
        exact = dir_limiting_normal_cone(feasibility_graph(psi, Omega), x + zeros(psi.m), u + v)
        verdict.coderivative = CoderivResult(cone, psi.n, psi.m)
        verdict.detail = finish(cone, exact)
    return verdict


def _subregular_everywhere(psi: PWAMap, Q: UnionSet, x) -> tuple | None:
    """First violating ``(u, w, lam)`` of directional subregularity over all directions."""
    for u in _nonzero_directions(psi.n, _direction_forms(psi, x, Q)):
        viol, _ = _regularity_multipliers(psi, Q, x, u, zeros(psi.m))
        if viol:
            return (u,) + viol[0]
    return None


# ---------------------------------------------------------------------------
# subtransversality


def check_subtransversality(Cs, x, subregular: bool | None = None) -> StabilityVerdict:
    """Sufficient condition for subtransversality of ``C_1, ..., C_l`` at ``x``.

    ``Cs`` holds sets, or pairs ``(Q_i, phi_i)`` describing ``C_i`` as the
    pre-image of ``Q_i``.  The condition fails when some nonzero ``u``
    tangent to every set carries normals ``v_i`` in ``N_{C_i}(x; u)`` (in the
    pre-image form, in ``D*phi_i(x; u) N_{Q_i}(phi_i(x); phi_i'(x; u))``) that
    are not all zero and sum to zero.  ``witnesses["directions"]`` lists the
    admissible direction representatives.
    """
    x = vec(x)
    if not Cs:
        raise ValueError("need at least one set")
    if isinstance(Cs[0], tuple):
        return _subtransversality_preimage(Cs, x, subregular)
    n = len(x)
    for C in Cs:
        if not C.contains(x):
            raise PointNotInSet("point is not in every set")
    Ks = [conic_localization(C, x) for C in Cs]
    forms = [(f, 0) for K in Ks for f in K.forms]
    admissible, witness = [], None
    for u in _nonzero_directions(n, forms):
        if not all(K.contains(u) for K in Ks):
            continue
        admissible.append(u)
        if witness is None:
            vs = _nontrivial_sum_zero(n, [dir_limiting_normal_cone(C, x, u) for C in Cs])
            if vs is not None:
                witness = (u, tuple(vs[i * n:(i + 1) * n] for i in range(len(Cs))))
    return _transversality_verdict(admissible, witness, [])


def _transversality_verdict(admissible, witness, prov) -> StabilityVerdict:
    out = StabilityVerdict("subtransversality", PASSED, {"directions": admissible}, prov)
    if witness is not None:
        out.status = FAILED
        out.witnesses["u"], out.witnesses["v"] = witness
    return out


def _subtransversality_preimage(pairs, x, subregular) -> StabilityVerdict:
    n = len(x)
    data = []
    forms = []
    prov = []
    for i, (Q, phi) in enumerate(pairs):
        psi, p = _as_map(phi, x)
        if psi.n != n:
            raise DimensionError("maps must share the source dimension")
        if not Q.contains(psi(x)):
            raise PointNotInSet(f"phi_{i + 1}(x) is not in Q_{i + 1}")
        data.append((Q, psi, FirstOrderData.from_pwa(psi, x)))
        forms += _direction_forms(psi, x, Q)
        if p != CHECKED:
            prov.append(QCStatus(f"first-order data {i + 1}", True, None, p))
    admissible, witness = [], None
    for u in _nonzero_directions(n, forms):
        ws = [d.direction_value(u) for _, _, d in data]
        if not all(conic_localization(Q, psi(x)).contains(w) for (Q, psi, _), w in zip(data, ws)):
            continue
        admissible.append(u)
        if witness is None:
            sets = []
            for (Q, psi, _), w in zip(data, ws):
                y = psi(x)
                G = dir_limiting_normal_cone(psi.graph(), x + y, u + w)
                sets.append(coderivative_image(G, dir_limiting_normal_cone(Q, y, w), n, psi.m))
            vs = _nontrivial_sum_zero(n, sets)
            if vs is not None:
                witness = (u, tuple(vs[i * n:(i + 1) * n] for i in range(len(data))))
    notes = []
    if subregular:
        prov.append(QCStatus("subregular", True, None, ASSERTED))
    else:
        for i, (Q, psi, _) in enumerate(data):
            bad = _subregular_everywhere(psi, Q, x)
            prov.append(QCStatus(f"subregular-{i + 1}", bad is None, bad))
    out = _transversality_verdict(admissible, witness, prov)
    if out.status == PASSED and not all(q.holds for q in prov):
        out.status = NOT_APPLICABLE
        notes.append("metric subregularity of some Q_i - phi_i could not be verified")
    out.notes += notes
    return out


# ---------------------------------------------------------------------------
# Aubin property


def aubin_witness_search(graph: UnionSet, p, x) -> StabilityVerdict:
    """Nonzero elements of ``D*S(p, x)(0)`` for ``S`` with the given graph.

    A nonzero element violates the coderivative criterion, so the Aubin
    property fails; otherwise it holds.  ``witnesses["cone"]`` is the whole
    set ``D*S(p, x)(0)`` as a union of cones.
    """
    p, x = vec(p), vec(x)
    l = len(p)
    z = p + x
    if len(z) != graph.dim:
        raise DimensionError("point of wrong dimension")
    if not graph.contains(z):
        raise PointNotInGraph("point is not in the graph")
    N = limiting_normal_cone(graph, z)
    cones = [dd_v_from_h(C.hform.fix({l + j: 0 for j in range(len(x))})) for C in N.pieces]
    cone = ConeUnion(l, cones)
    witness = None
    for C in cone.pieces:
        g = first_generator(C)
        if g is not None:
            witness = g
            break
    out = StabilityVerdict("Aubin property", PASSED, {"cone": cone})
    if witness is not None:
        out.status = FAILED
        out.witnesses["element"] = witness
    return out


def _zero_set_covers(deriv: PWAMap, l: int):
    """``None`` if every ``v`` admits ``u`` with ``deriv(v, u) = 0``, else an uncovered ``v``."""
    proj = []
    for dom, A, c in deriv.pieces:
        Z = HPoly.from_rows(deriv.n, dom.ineqs(), dom.eqs() + [(A[i], -c[i]) for i in range(deriv.m)])
        if not Z.is_empty():
            proj.append(fourier_motzkin(Z, range(l, deriv.n)))
    return UnionSet(l, [HPoly.space(l)]).escape(UnionSet(l, proj))


def check_aubin_implicit(data, p, x, subregular: bool | None = None) -> StabilityVerdict:
    """Aubin property of ``S(p) = {x : M(p, x) = 0}`` around ``(p, x)``.

    ``data`` is :class:`FirstOrderData` of ``M`` at ``(p, x)`` or the
    :class:`NCPData` of a complementarity system.  Condition (i) asks that
    ``M'((p,x);(v,.)) = 0`` is solvable for every ``v``.  Then it suffices
    that no nonzero direction ``(v, u)`` with ``M' = 0`` admits ``y* != 0``
    with ``(q*, 0)`` in the directional subdifferential of ``<y*, M>``; if
    such ``y*`` exist, ``q* = 0`` for all of them together with metric
    subregularity of ``M`` is enough.
    """
    p, x = vec(p), vec(x)
    l = len(p)
    if data.point != p + x:
        raise DomainError("data is attached to another point")
    if any(data.value):
        raise DomainError("M does not vanish at the reference point")
    prov = [QCStatus("first-order data", True, None, data.provenance)]
    gap = _zero_set_covers(data.deriv, l)
    if gap is not None:
        return StabilityVerdict("Aubin property", FAILED, {"v": gap}, prov, ["M'(.;(v, u)) = 0 has no solution u"])
    prov.append(QCStatus("solvable", True, None, CHECKED))
    dirs = data.kernel_directions(l) if isinstance(data, NCPData) else _kernel_directions(data, l)
    strong = weak = None
    for w in dirs:
        if strong is None:
            strong = _multiplier_search(data, w, l, "y")
            if strong is not None:
                strong = (w,) + strong
        if weak is None:
            weak = _multiplier_search(data, w, l, "q")
            if weak is not None:
                weak = (w,) + weak
    prov.append(QCStatus("no-multiplier", strong is None, strong))
    out = StabilityVerdict("Aubin property", PASSED, {"directions": dirs}, prov)
    if strong is None:
        return out
    prov.append(QCStatus("q-vanishes", weak is None, weak))
    if weak is not None:
        out.status = FAILED
        out.witnesses.update({"direction": weak[0], "q": weak[1], "y": weak[2]})
        return out
    if subregular:
        prov.append(QCStatus("subregular", True, None, ASSERTED))
        return out
    bad = _subregular_everywhere(data.surrogate(), UnionSet(data.m, [HPoly.point(zeros(data.m))]), data.point)
    prov.append(QCStatus("subregular", bad is None, bad))
    if bad is not None:
        out.status = NOT_APPLICABLE
        out.notes.append("metric subregularity of M could not be verified")
    return out


def _kernel_directions(data: FirstOrderData, l: int) -> list:
    psi = data.surrogate()
    K = graph_localization(psi, data.point)
    dim = psi.n + psi.m
    reps = slice_representatives(dim, [(f, 0) for f in K.forms], {psi.n + k: 0 for k in range(psi.m)}, list(range(psi.n)))
    return [primitive(z[:psi.n]) for z in reps if K.contains(z)]


def _multiplier_search(data, w, l: int, target: str):
    """``(q*, y*)`` with ``(q*, 0)`` in the subdifferential of ``<y*, M>`` along ``w``.

    ``target="y"`` asks for ``y* != 0`` and ``target="q"`` for ``q* != 0``.
    """
    if isinstance(data, NCPData):
        return data.multiplier_search(w, target)
    psi = data.surrogate()
    n, m = psi.n, psi.m
    z = data.point + data.value
    N = dir_limiting_normal_cone(psi.graph(), z, tuple(w) + zeros(m))
    for C in N.pieces:
        S = dd_v_from_h(C.hform.fix({j: 0 for j in range(l, n)}))
        for g in list(S.rays) + list(S.lineality):
            q, eta = g[:l], g[l:]
            if (target == "y" and not is_zero(eta)) or (target == "q" and not is_zero(q)):
                return q, neg(eta)
    return None


# ---------------------------------------------------------------------------
# complementarity systems


def _scale_set(S: UnionSet, a) -> UnionSet:
    a = rat(a)
    eye = tuple(unit(S.dim, i, a) for i in range(S.dim))
    return UnionSet(S.dim, [Q for Q in (poly_image(P, eye, None, S.dim) for P in S.pieces) if Q is not None])


@dataclass
class NCPData:
    """First-order data of ``M(p, x) = min(G(p, x), H(p, x))`` at a solution.

    ``I_G``, ``I_H`` and ``I_0`` partition the components by which of ``G``
    and ``H`` vanish; ``deriv`` is ``M'((p, x); .)`` as a PWA map.
    """

    G: FirstOrderData
    H: FirstOrderData
    l: int
    I_G: tuple
    I_H: tuple
    I_0: tuple
    deriv: PWAMap

    @property
    def point(self) -> tuple:
        return self.G.point

    @property
    def value(self) -> tuple:
        return tuple(min(g, h) for g, h in zip(self.G.value, self.H.value))

    @property
    def m(self) -> int:
        return self.G.m

    @property
    def provenance(self) -> str:
        return CHECKED if self.G.provenance == self.H.provenance == CHECKED else ASSERTED

    def surrogate(self) -> PWAMap:
        z = self.point
        eye = tuple(unit(len(z), i) for i in range(len(z)))
        return PWAMap(len(z), self.m, [(d.map_rows(eye, neg(z), len(z)), A, zeros(self.m)) for d, A, _ in self.deriv.pieces], validate=False)

    def index_sets(self, w) -> dict:
        """Direction-dependent split of ``I_0`` into ``I_0G``, ``I_0H`` and the rest."""
        g, h = self.G.direction_value(w), self.H.direction_value(w)
        return {
            "I_G": self.I_G,
            "I_H": self.I_H,
            "I_0G": tuple(i for i in self.I_0 if g[i] < h[i]),
            "I_0H": tuple(i for i in self.I_0 if h[i] < g[i]),
            "I_00": tuple(i for i in self.I_0 if g[i] == h[i]),
        }

    def _subdif(self, D: FirstOrderData, i: int, w, sign: int) -> UnionSet:
        f = D.component(i)
        if sign < 0:
            f = PWAFunc(f.n, [(d, neg(a), -c) for d, a, c in f.pieces], validate=False)
        return dir_subdif(f, self.point, w, sign * D.direction_value(w)[i])

    def term(self, i: int, w, sign: int) -> UnionSet:
        """Unscaled term of component ``i`` for multipliers of the given sign."""
        dim = len(self.point)
        if sign == 0:
            return UnionSet(dim, [HPoly.point(zeros(dim))])
        sets = self.index_sets(w)
        if i in sets["I_G"] + sets["I_0G"]:
            return self._subdif(self.G, i, w, sign)
        if i in sets["I_H"] + sets["I_0H"]:
            return self._subdif(self.H, i, w, sign)
        both = self._subdif(self.G, i, w, sign).union(self._subdif(self.H, i, w, sign))
        if sign > 0:
            return both
        hull = poly_hull(dim, both.pieces)
        return UnionSet(dim, [hull] if hull is not None else [])

    def bound(self, w, ystar) -> UnionSet:
        """Estimate of the directional subdifferential of ``<y*, M>`` along ``(w, 0)``."""
        ystar = vec(ystar)
        dim = len(self.point)
        terms = []
        for i, a in enumerate(ystar):
            s = (a > 0) - (a < 0)
            terms.append(_scale_set(self.term(i, vec(w), s), abs(a)) if s else self.term(i, w, 0))
        out = []
        for combo in product(*[T.pieces for T in terms]):
            P = poly_sum(dim, combo)
            if P is not None:
                out.append(P)
        return UnionSet(dim, out)

    def kernel_directions(self, l: int) -> list:
        return _kernel_directions(FirstOrderData(self.point, self.value, self.deriv, self.provenance), l)

    def multiplier_search(self, w, target: str):
        """Exact search over sign patterns of ``y*`` and pieces of the terms.

        By homogeneity ``y*_i = s_i t_i`` with ``t_i >= 1`` on the support.
        """
        dim = len(self.point)
        l, m = self.l, self.m
        w = vec(w)
        for signs in product((-1, 0, 1), repeat=m):
            if not any(signs):
                continue
            supp = [i for i in range(m) if signs[i]]
            terms = [self.term(i, w, signs[i]) for i in supp]
            for combo in product(*[T.pieces for T in terms]):
                found = _homogenized_search(combo, dim, l, target)
                if found is not None:
                    q, ts = found
                    y = [rat(0)] * m
                    for i, t in zip(supp, ts):
                        y[i] = signs[i] * t
                    return q, tuple(y)
        return None


def _homogenized_search(polys, dim: int, l: int, target: str):
    """Points ``z_i`` in ``t_i P_i`` (``t_i >= 1``) whose sum vanishes beyond ``l``."""
    k = len(polys)
    nv = k * (dim + 1)
    base_ineq, base_eq = [], []
    for i, P in enumerate(polys):
        off = i * (dim + 1)

        def row(a, bb, off=off):
            r = [rat(0)] * nv
            for j, x in enumerate(a):
                r[off + j] = x
            r[off + dim] = -bb
            return tuple(r)

        base_ineq += [(row(a, bb), 0) for a, bb in P.ineqs()]
        base_eq += [(row(a, bb), 0) for a, bb in P.eqs()]
        base_ineq.append((tuple(-1 if j == off + dim else 0 for j in range(nv)), -1))
    for j in range(l, dim):
        base_eq.append((tuple(1 if (c % (dim + 1)) == j else 0 for c in range(nv)), 0))
    if target == "y":
        extras = [[]]
    else:
        extras = []
        for j in range(l):
            for s in (1, -1):
                extras.append([(tuple(-s if (c % (dim + 1)) == j else 0 for c in range(nv)), -1)])
    for extra in extras:
        sol = feasible(HPoly.from_rows(nv, base_ineq + extra, base_eq))
        if sol is not None:
            q = tuple(sum(sol[i * (dim + 1) + j] for i in range(k)) for j in range(l))
            ts = tuple(sol[i * (dim + 1) + dim] for i in range(k))
            return q, ts
    return None


def ncp_first_order(G_data: FirstOrderData, H_data: FirstOrderData, p, x) -> NCPData:
    """Index sets and the directional derivative of ``min(G, H)`` at ``(p, x)``."""
    p, x = vec(p), vec(x)
    z = p + x
    if G_data.m != H_data.m or G_data.n != H_data.n or G_data.n != len(z):
        raise DimensionError("G and H must map R^(l+n) to the same space")
    if G_data.point != z or H_data.point != z:
        raise DomainError("first-order data is attached to another point")
    g, h = G_data.value, H_data.value
    if any(min(a, b) != 0 for a, b in zip(g, h)):
        raise DomainError("min(G, H) does not vanish at the reference point")
    m, dim = G_data.m, len(z)
    I_G = tuple(i for i in range(m) if g[i] == 0 and h[i] > 0)
    I_H = tuple(i for i in range(m) if g[i] > 0 and h[i] == 0)
    I_0 = tuple(i for i in range(m) if g[i] == 0 and h[i] == 0)
    pieces = []
    for (dg, Ag, _), (dh, Ah, _) in product(G_data.deriv.pieces, H_data.deriv.pieces):
        dom = dg.intersect(dh)
        if dom.is_empty():
            continue
        for choice in product((0, 1), repeat=len(I_0)):
            rows = []
            pick = {}
            for i, c in zip(I_0, choice):
                diff = tuple(a - b for a, b in zip(Ag[i], Ah[i]))
                rows.append((diff if c == 0 else neg(diff), 0))
                pick[i] = c
            D = dom.intersect(HPoly.from_rows(dim, rows))
            if D.is_empty():
                continue
            A = tuple(Ag[i] if (i in I_G or pick.get(i) == 0) else Ah[i] for i in range(m))
            pieces.append((D.tidy(), A, zeros(m)))
    deriv = PWAMap(dim, m, pieces)
    return NCPData(G_data, H_data, len(p), I_G, I_H, I_0, deriv)


# ---------------------------------------------------------------------------
# sharper limiting estimates


def _single_point(S: UnionSet):
    pts = set()
    for P in S.pieces:
        vr = poly_vrep(P)
        if vr is None:
            continue
        V, R, L = vr
        if R or L:
            return None
        pts.update(V)
    return pts.pop() if len(pts) == 1 else None


def refined_limiting_bound(kind: str, *args, **kwargs) -> Verdict:
    """Classical limiting estimate together with its directional refinement.

    ``kind`` is ``"union"`` (sets ``Cs``, point ``x``), ``"preimage"``
    (``phi``, ``Q``, ``x``) or ``"image"`` (``phi``, ``C``, ``y`` and optional
    ``xbar``).  ``bound`` holds the classical estimate, ``refined_bound`` the
    directional one; the conditions record ``refined in classical`` and
    ``exact in refined``.
    """
    if kind == "union":
        Cs, x = args
        v = union_bound(Cs, x, zeros(len(vec(x))))
        classical, refined, exact = v.bound, v.refined_bound, v.exact
    elif kind == "preimage":
        phi, Q, x = args
        x = vec(x)
        classical = preimage_bound(phi, Q, x, zeros(phi.n)).bound
        C = phi.preimage(Q)
        parts = [ConeUnion(phi.n, [frechet_normal_cone(C, x)])]
        KC = conic_localization(C, x)
        forms = _direction_forms(phi, x, Q) + [(f, 0) for f in KC.forms]
        for h in _nonzero_directions(phi.n, forms):
            if KC.contains(h):
                parts.append(_preimage_part(phi, Q, x, h, True))
        refined = ConeUnion(phi.n, []).union(*parts)
        exact = limiting_normal_cone(C, x)
    elif kind == "image":
        phi, C, y = args
        xbar = kwargs.get("xbar")
        if xbar is None:
            xbar = _single_point(solution_set(phi, C, y))
            if xbar is None:
                raise ValueError("the image kind needs xbar unless the solution set is a single point")
        v = image_bound(phi, C, y, zeros(phi.m), inner_cert="semicontinuous", xbar=xbar)
        classical = refined = v.bound
        exact = v.exact
    else:
        raise ValueError("kind must be 'union', 'preimage' or 'image'")
    inner, w1 = certify(refined, classical)
    outer, w2 = certify(exact, refined)
    qc = [QCStatus("refined-within-classical", inner == "yes", w1), QCStatus("exact-within-refined", outer == "yes", w2)]
    out = finish(classical, exact, qc, [], refined)
    out.notes.append("classical equals refined" if classical.same_set(refined) else "refined is strictly smaller")
    return out
