from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dircalc import ConeUnion, HPoly, VCone
from dircalc.errors import EmptySet, PointNotInSet
from dircalc.geometry import (
    convex_normal_cone_poly,
    dd_h_from_v,
    dd_v_from_h,
    feasible,
    fourier_motzkin,
    generated_cone,
    hcone,
    polar,
    primitive,
    project_onto_poly,
    rat,
    tangent_cone_poly,
)

from instances import poly


def cone(dim, rays=(), lineality=()):
    return generated_cone(dim, rays, lineality)


def same(c1: VCone, c2: VCone) -> bool:
    return c1.issubset(c2) and c2.issubset(c1)


class TestRationals:
    def test_parse_forms(self):
        assert rat("3/6") == Fraction(1, 2)
        assert rat(2) == Fraction(2)
        assert rat(Fraction(-4, 8)).denominator == 2

    def test_primitive_vector(self):
        assert primitive((Fraction(1, 2), Fraction(-3, 4))) == (2, -3)
        assert primitive((0, 6, -4)) == (0, 3, -2)


class TestDoubleDescription:
    def test_octant(self):
        c = dd_v_from_h(hcone(2, [(1, 0), (0, 1)]))
        assert sorted(c.rays) == [(-1, 0), (0, -1)]
        assert c.lineality == ()

    def test_line(self):
        c = dd_v_from_h(hcone(2, eqs=[(1, 0)]))
        assert c.rays == ()
        assert c.lineality == ((0, 1),)

    def test_wedge(self):
        c = dd_v_from_h(hcone(2, [(1, 1), (1, -1)]))
        assert sorted(c.rays) == [(-1, -1), (-1, 1)]
        assert c.lineality == ()

    def test_no_rows_is_full_space(self):
        c = dd_v_from_h(hcone(2))
        assert c.contains((5, -7))
        assert len(c.lineality) == 2

    def test_round_trip(self):
        c = cone(3, [(1, 0, 0), (1, 1, 0), (0, 1, 1)])
        assert same(dd_v_from_h(dd_h_from_v(c)), c)


class TestPolar:
    def test_orthant_flips_sign(self):
        assert same(polar(cone(2, [(1, 0), (0, 1)])), cone(2, [(-1, 0), (0, -1)]))

    def test_full_space_goes_to_origin(self):
        assert polar(cone(2, lineality=[(1, 0), (0, 1)])).is_zero

    def test_ray_goes_to_halfplane(self):
        p = polar(cone(2, [(1, 1)]))
        assert same(p, cone(2, [(-1, -1)], [(1, -1)]))


class TestTangentAndNormal:
    def test_orthant_at_origin(self):
        P = poly(2, [((-1, 0), 0), ((0, -1), 0)])
        T = tangent_cone_poly(P, (0, 0))
        assert T.contains((1, 2)) and not T.contains((-1, 0))
        assert same(convex_normal_cone_poly(P, (0, 0)), cone(2, [(-1, 0), (0, -1)]))

    def test_orthant_on_edge(self):
        P = poly(2, [((-1, 0), 0), ((0, -1), 0)])
        T = tangent_cone_poly(P, (1, 0))
        assert T.contains((-5, 1)) and not T.contains((0, -1))
        assert same(convex_normal_cone_poly(P, (1, 0)), cone(2, [(0, -1)]))

    def test_simplex_vertex(self):
        P = poly(2, [((1, 1), 1), ((-1, 0), 0), ((0, -1), 0)])
        T = tangent_cone_poly(P, (1, 0))
        assert T.contains((-1, 1)) and T.contains((-1, 0))
        assert not T.contains((1, 0)) and not T.contains((0, -1))

    def test_equality_row_gives_lineality(self):
        P = poly(2, eqs=[((1, 0), 0)])
        assert same(convex_normal_cone_poly(P, (0, 0)), cone(2, lineality=[(1, 0)]))

    def test_outside_point_rejected(self):
        with pytest.raises(PointNotInSet):
            tangent_cone_poly(poly(1, [((1,), 0)]), (1,))


class TestProjection:
    def test_onto_orthant(self):
        P = poly(2, [((-1, 0), 0), ((0, -1), 0)])
        assert project_onto_poly(P, (-1, 2)) == (0, 2)

    def test_along_normal(self):
        assert project_onto_poly(poly(2, [((1, 1), 0)]), (1, 1)) == (0, 0)

    def test_onto_segment(self):
        P = poly(2, [((-1, 0), 0), ((0, -1), 0)], [((1, 1), 1)])
        assert project_onto_poly(P, (1, 1)) == (Fraction(1, 2), Fraction(1, 2))

    def test_empty(self):
        with pytest.raises(EmptySet):
            project_onto_poly(poly(1, [((1,), -1), ((-1,), -1)]), (0,))


class TestFeasibility:
    def test_strict_in_degenerate_slab(self):
        assert feasible(poly(1, [((1,), 0), ((-1,), 0)]), strict_rows=[0]) is None

    def test_strict_halfline(self):
        w = feasible(poly(1, [((1,), 1)]), strict_rows=[0])
        assert w is not None and w[0] < 1

    def test_strict_witness_verifies(self):
        P = poly(2, [((1, 1), 0), ((-1, 0), 0)])
        w = feasible(P, strict_rows=[0])
        assert w[0] + w[1] < 0 and w[0] >= 0

    def test_projection_by_elimination(self):
        P = poly(3, [((1, 1, 1), 1), ((-1, 0, 0), 0), ((0, -1, 0), 0), ((0, 0, -1), 0)])
        Q = fourier_motzkin(P, [2])
        assert Q.contains((Fraction(1, 2), Fraction(1, 2), 0))
        assert not Q.contains((1, 1, 0))


class TestConeUnion:
    def test_absorbs_contained_pieces(self):
        U = ConeUnion(2, [cone(2, [(1, 0)]), cone(2, [(1, 0), (0, 1)])])
        assert len(U) == 1

    def test_escape_finds_point(self):
        big = ConeUnion(2, [cone(2, [(1, 0), (0, 1)])])
        small = ConeUnion(2, [cone(2, [(1, 0)])])
        w = big.escape(small)
        assert w is not None and big.contains(w) and not small.contains(w)
        assert small.escape(big) is None

    def test_nonconvex_union_is_not_a_superset_of_its_hull(self):
        U = ConeUnion(2, [cone(2, [(1, 0)]), cone(2, [(0, 1)])])
        hull = ConeUnion(2, [cone(2, [(1, 0), (0, 1)])])
        assert U.issubset(hull) and not hull.issubset(U)


small_ints = st.integers(-3, 3)
vectors = st.tuples(small_ints, small_ints, small_ints).filter(any)


@settings(max_examples=60, deadline=None)
@given(st.lists(vectors, min_size=0, max_size=4), st.lists(vectors, min_size=0, max_size=1))
def test_polar_is_an_involution(rays, lin):
    c = cone(3, rays, lin)
    assert same(polar(polar(c)), c)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(vectors, st.booleans()), min_size=0, max_size=5))
def test_dd_round_trip(rows):
    H = hcone(3, [a for a, eq in rows if not eq], [a for a, eq in rows if eq])
    V = dd_v_from_h(H)
    assert all(H.contains(g) for g in V.rays + V.lineality)
    assert all(H.contains(tuple(-x for x in g)) for g in V.lineality)
    H2 = dd_h_from_v(V)
    assert same(dd_v_from_h(H2), V)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(vectors, st.integers(0, 2)), min_size=1, max_size=4), vectors)
def test_normal_cone_is_polar_of_tangent_cone(rows, x):
    P = poly(3, rows)
    if not P.contains((0, 0, 0)):
        return
    pt = (0, 0, 0)
    assert same(convex_normal_cone_poly(P, pt), polar(dd_v_from_h(tangent_cone_poly(P, pt))))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.tuples(small_ints, small_ints).filter(any), st.integers(-2, 2)), min_size=1, max_size=4),
       st.tuples(small_ints, small_ints))
def test_projection_residual_is_normal(rows, x):
    P = poly(2, rows)
    if P.is_empty():
        return
    p = project_onto_poly(P, x)
    assert P.contains(p)
    assert (p == tuple(map(Fraction, x))) == P.contains(x)
    residual = tuple(Fraction(a) - b for a, b in zip(x, p))
    assert convex_normal_cone_poly(P, p).contains(residual)


def test_canonical_output_is_stable():
    c1 = cone(2, [(2, 4), (3, 0)])
    c2 = cone(2, [(3, 0), (1, 2), (Fraction(1, 2), 1)])
    assert c1 == c2 and c1.to_json() == c2.to_json()
    assert isinstance(HPoly.space(2).contains((0, 0)), bool)
