import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dircalc import (
    ConeUnion,
    PWAMap,
    UnionSet,
    constraint_bound,
    dir_limiting_normal_cone,
    image_bound,
    intersection_bound,
    preimage_bound,
    qc_foscms,
    union_bound,
)
from dircalc.errors import DimensionError, DomainError, PointNotInImage, PointNotInSet
from dircalc.geometry import generated_cone, image_union, transpose

from instances import (
    ABS_MAP,
    MPCC,
    MPCC_1,
    MPCC_2,
    R2_PLUS,
    R_MINUS,
    R_PLUS,
    halfspace,
    poly,
    random_direction,
    random_pwa_map,
    random_union,
    single,
)

DIAG = PWAMap.affine(((1,), (1,)))
ANTI = PWAMap.affine(((1,), (-1,)))
SUM = PWAMap.affine(((1, 1),))


def cu(dim, *pieces):
    return ConeUnion(dim, [generated_cone(dim, r, l) for r, l in pieces])


def qc(verdict, name):
    return next(q for q in verdict.qc if q.name == name)


class TestFOSCMS:
    def test_diagonal_holds(self):
        assert qc_foscms(DIAG, R2_PLUS, (0,), (1,)).qc_holds

    def test_antidiagonal_fails_with_witness(self):
        q = qc(qc_foscms(ANTI, R2_PLUS, (0,), (0,)), "FOSCMS")
        assert not q.holds and q.witness == (-1, -1)

    def test_full_space(self):
        full = single(poly(2))
        assert qc_foscms(ANTI, full, (0,), (0,)).qc_holds

    def test_outside_domain(self):
        phi = PWAMap.affine(((1,),), domain=poly(1, [((1,), 0)]))
        with pytest.raises(DomainError):
            qc_foscms(phi, R_PLUS, (1,), (0,))


class TestPreimage:
    def test_zero_direction(self):
        v = preimage_bound(DIAG, R2_PLUS, (0,), (0,))
        assert v.bound.same_set(cu(1, ([(-1,)], []))) and v.bound.same_set(v.exact)

    def test_tangent_direction(self):
        v = preimage_bound(DIAG, R2_PLUS, (0,), (1,))
        assert v.bound == cu(1, ([], [])) == v.exact

    def test_non_tangent_direction(self):
        v = preimage_bound(DIAG, R2_PLUS, (0,), (-1,))
        assert v.exact.is_empty and v.inclusion == "yes"


class TestIntersection:
    H1, H2 = halfspace((-1, 0)), halfspace((0, -1))

    def test_directional(self):
        v = intersection_bound([self.H1, self.H2], (0, 0), (1, 0))
        assert v.bound.same_set(cu(2, ([(0, -1)], []))) and v.bound.same_set(v.exact)

    def test_zero_direction(self):
        v = intersection_bound([self.H1, self.H2], (0, 0), (0, 0))
        assert v.bound.same_set(cu(2, ([(-1, 0), (0, -1)], []))) and v.qc_holds

    def test_opposing_halfspaces(self):
        v = intersection_bound([halfspace((1, 0)), self.H1], (0, 0), (0, 0))
        q = qc(v, "capCQ")
        assert not q.holds and q.witness == (1, 0, -1, 0)
        assert v.inclusion == "yes"


class TestConstraint:
    def test_complementary_halflines(self):
        v = constraint_bound(R_PLUS, PWAMap.affine(((1,),)), R_MINUS, (0,), (0,))
        assert v.bound.same_set(cu(1, ([], [(1,)]))) and v.bound.same_set(v.exact)

    def test_reduces_to_preimage(self):
        v = constraint_bound(single(poly(2)), PWAMap.affine(((1, 0), (0, 1))), MPCC, (0, 0), (1, 0))
        assert v.bound.same_set(cu(2, ([], [(0, 1)])))

    def test_line_with_halfline_constraint(self):
        P = single(poly(2, eqs=[((0, 1), 0)]))
        v = constraint_bound(P, PWAMap.affine(((1, 0),)), R_PLUS, (0, 0), (1, 0))
        assert v.bound.same_set(cu(2, ([], [(0, 1)]))) and v.bound.same_set(v.exact)


class TestImage:
    @pytest.mark.parametrize("cert", ["calm", "semicompact", "semicontinuous"])
    def test_sum_tangent(self, cert):
        v = image_bound(SUM, R2_PLUS, (0,), (1,), cert, xbar=(0, 0))
        assert v.bound == cu(1, ([], [])) == v.exact

    def test_sum_zero_direction(self):
        v = image_bound(SUM, R2_PLUS, (0,), (0,), "calm", xbar=(0, 0))
        assert v.bound.same_set(cu(1, ([(-1,)], []))) and v.bound.same_set(v.exact)

    def test_identity(self):
        ident = PWAMap.affine(((1, 0), (0, 1)))
        v = image_bound(ident, MPCC, (0, 0), (0, 0), "calm", xbar=(0, 0))
        assert v.bound.same_set(v.exact)

    @pytest.mark.parametrize("cert", ["calm", "semicontinuous"])
    def test_abs_image_has_nonpositive_normals(self, cert):
        line = UnionSet(1, R_PLUS.pieces + R_MINUS.pieces)
        v = image_bound(ABS_MAP, line, (0,), (0,), cert, xbar=(0,))
        assert v.exact.same_set(cu(1, ([(-1,)], [])))
        assert v.bound.same_set(v.exact)

    def test_point_not_in_image(self):
        with pytest.raises(PointNotInImage):
            image_bound(SUM, R2_PLUS, (-1,), (0,), "semicompact")

    def test_certificate_provenance(self):
        v = image_bound(SUM, R2_PLUS, (0,), (0,), "semicompact")
        assert {q.name: q.provenance for q in v.qc} == {
            "inner-semicompact": "asserted-by-caller",
            "bounded-solution-map": "checked",
        }


class TestUnion:
    PARTS = [single(MPCC_1), single(MPCC_2)]

    def test_directional(self):
        v = union_bound(self.PARTS, (0, 0), (1, 0))
        assert v.notes == ["I(x,h) = [1]"]
        assert v.bound.same_set(cu(2, ([], [(0, 1)])))

    def test_refinement_is_exact_and_strict(self):
        v = union_bound(self.PARTS, (0, 0), (0, 0))
        assert v.bound.same_set(cu(2, ([(-1, 0)], [(0, 1)]), ([(0, -1)], [(1, 0)])))
        assert v.refined_bound.same_set(v.exact)
        assert v.exact.issubset(v.bound) and not v.bound.issubset(v.exact)

    def test_single_piece(self):
        v = union_bound([R2_PLUS], (0, 0), (0, 0))
        assert v.bound.same_set(v.exact)

    def test_point_outside(self):
        with pytest.raises(PointNotInSet):
            union_bound(self.PARTS, (1, 1), (0, 0))


seeds = st.integers(0, 10**6)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_preimage_inclusion(seed):
    rng = random.Random(seed)
    n, m = rng.randint(1, 2), rng.randint(1, 2)
    v = preimage_bound(random_pwa_map(rng, n, m), random_union(rng, m), (0,) * n, random_direction(rng, n))
    if v.qc_holds:
        assert v.inclusion == "yes"


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_union_refinement_between_exact_and_classical(seed):
    rng = random.Random(seed)
    n = rng.randint(1, 3)
    Cs = [random_union(rng, n, pieces=1) for _ in range(rng.randint(1, 3))]
    Cs = [C for C in Cs if C.pieces]
    x = (0,) * n
    if not any(C.contains(x) for C in Cs):
        return
    v = union_bound(Cs, x, (0,) * n)
    assert v.exact.issubset(v.refined_bound) and v.refined_bound.issubset(v.bound)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_affine_preimage_matches_transpose_formula(seed):
    rng = random.Random(seed)
    n, m = rng.randint(1, 2), rng.randint(1, 3)
    A = tuple(tuple(rng.randint(-2, 2) for _ in range(n)) for _ in range(m))
    Q = random_union(rng, m, pieces=1)
    if not Q.contains((0,) * m):
        return
    h = random_direction(rng, n)
    Ah = tuple(sum(a * b for a, b in zip(row, h)) for row in A)
    v = preimage_bound(PWAMap.affine(A), Q, (0,) * n, h)
    expected = image_union(dir_limiting_normal_cone(Q, (0,) * m, Ah), transpose(A, n), n)
    assert v.bound.same_set(expected)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_image_and_preimage_agree_under_invertible_maps(seed):
    rng = random.Random(seed)
    A = rng.choice([((1, 1), (0, 1)), ((2, 1), (1, 1)), ((0, 1), (-1, 0)), ((1, 0), (1, -1))])
    inv = {((1, 1), (0, 1)): ((1, -1), (0, 1)), ((2, 1), (1, 1)): ((1, -1), (-1, 2)),
           ((0, 1), (-1, 0)): ((0, -1), (1, 0)), ((1, 0), (1, -1)): ((1, 0), (1, -1))}[A]
    C = random_union(rng, 2)
    h = random_direction(rng, 2)
    Ah = tuple(sum(a * b for a, b in zip(row, h)) for row in A)
    img = image_bound(PWAMap.affine(A), C, (0, 0), Ah, "calm", xbar=(0, 0)).exact
    back = image_union(img, transpose(A, 2), 2)
    assert back.same_set(dir_limiting_normal_cone(C, (0, 0), h))
    pre = preimage_bound(PWAMap.affine(inv), C, (0, 0), Ah).exact
    assert pre.same_set(img)


def test_union_set_rejects_dimension_mismatch():
    with pytest.raises(DimensionError):
        UnionSet(2, [poly(3)])
