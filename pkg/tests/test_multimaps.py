import random
from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dircalc import (
    CoderivResult,
    PolyMap,
    PWAMap,
    UnionSet,
    chain_bound_coder,
    dir_coderivative,
    graphical_derivative,
    limiting_normal_cone,
    scalarization_check,
    sum_bound_coder,
)
from dircalc.errors import PointNotInGraph
from dircalc.multimaps import compose, map_sum

from instances import ABS_MAP, CPLM, poly, random_direction, random_pwa_map, random_union

NORMAL_MAP = PolyMap(1, 1, CPLM)
IDENTITY = PolyMap.from_pwa(PWAMap.affine(((1,),)))


def pts(*values) -> UnionSet:
    return UnionSet(1, [poly(1, eqs=[((1,), Fraction(v))]) for v in values])


def halfline(sign) -> UnionSet:
    return UnionSet(1, [poly(1, [((sign,), 0)])])


class TestGraphicalDerivative:
    def test_positive_direction(self):
        assert graphical_derivative(NORMAL_MAP, (0,), (0,), (1,)).same_set(pts(0))

    def test_zero_direction(self):
        assert graphical_derivative(NORMAL_MAP, (0,), (0,), (0,)).same_set(halfline(1))

    def test_negative_direction(self):
        assert graphical_derivative(NORMAL_MAP, (0,), (0,), (-1,)).is_empty

    def test_point_off_graph(self):
        with pytest.raises(PointNotInGraph):
            graphical_derivative(NORMAL_MAP, (1,), (1,), (0,))


class TestCoderivative:
    def test_along_positive_axis(self):
        D = dir_coderivative(NORMAL_MAP, (0,), (0,), (1,), (0,))
        for eta in (-2, 0, 3):
            assert D((eta,)).same_set(pts(0))

    def test_zero_direction_is_full_cone(self):
        D = dir_coderivative(NORMAL_MAP, (0,), (0,), (0,), (0,))
        assert D.cone.same_set(limiting_normal_cone(CPLM, (0, 0)))

    def test_affine_graph(self):
        M = PolyMap.from_pwa(PWAMap.affine(((2, -1),)))
        D = dir_coderivative(M, (0, 0), (0,), (1, 1), (1,))
        assert D((3,)).same_set(UnionSet(2, [poly(2, eqs=[((1, 0), 6), ((0, 1), -3)])]))
        assert dir_coderivative(M, (0, 0), (0,), (1, 1), (2,)).cone.is_empty


class TestChainRule:
    def test_normal_map_of_abs(self):
        v = chain_bound_coder(PolyMap.from_pwa(ABS_MAP), NORMAL_MAP, (0,), (0,), (1,), (0,))
        assert v.qc_holds and v.inclusion == "yes"
        assert CoderivResult(v.bound, 1, 1)((1,)).same_set(pts(0))
        assert CoderivResult(v.exact, 1, 1)((1,)).same_set(pts(0))

    def test_inner_identity(self):
        v = chain_bound_coder(IDENTITY, NORMAL_MAP, (0,), (0,), (0,), (0,))
        assert v.bound.same_set(dir_coderivative(NORMAL_MAP, (0,), (0,), (0,), (0,)).cone)

    def test_outer_identity(self):
        S1 = PolyMap.from_pwa(ABS_MAP)
        v = chain_bound_coder(S1, IDENTITY, (0,), (0,), (1,), (1,))
        assert v.bound.same_set(dir_coderivative(S1, (0,), (0,), (1,), (1,)).cone)


class TestSumRule:
    def test_identity_plus_normal_map(self):
        v = sum_bound_coder([IDENTITY, NORMAL_MAP], (0,), (0,), (1,), (1,))
        assert v.qc_holds and v.inclusion == "yes"
        for eta in (-1, 2):
            assert CoderivResult(v.bound, 1, 1)((eta,)).same_set(pts(eta))
            assert CoderivResult(v.exact, 1, 1)((eta,)).same_set(pts(eta))

    def test_plus_zero_map(self):
        zero = PolyMap.constant(1, pts(0))
        S1 = PolyMap.from_pwa(ABS_MAP)
        v = sum_bound_coder([S1, zero], (0,), (0,), (1,), (1,))
        assert v.bound.same_set(dir_coderivative(S1, (0,), (0,), (1,), (1,)).cone)

    def test_graph_of_sum(self):
        S = map_sum([IDENTITY, NORMAL_MAP])
        assert S.contains((1,), (1,)) and S.contains((0,), (-5,)) and not S.contains((-1,), (0,))


def test_composition_graph():
    S = compose(PolyMap.from_pwa(ABS_MAP), NORMAL_MAP)
    assert S.contains((3,), (0,)) and S.contains((0,), (-2,)) and not S.contains((1,), (-1,))


class TestScalarization:
    def test_abs_negative_multiplier(self):
        v = scalarization_check(ABS_MAP, (0,), (1,), (1,), (-1,))
        assert v.bound.same_set(pts(-1)) and v.exact.same_set(pts(-1))

    def test_affine(self):
        phi = PWAMap.affine(((1, 2), (0, -1)))
        v = scalarization_check(phi, (0, 0), (1, 1), (3, -1), (2, 5))
        expected = UnionSet(2, [poly(2, eqs=[((1, 0), 2), ((0, 1), -1)])])
        assert v.bound.same_set(expected) and v.exact.same_set(expected)

    def test_zero_multiplier(self):
        v = scalarization_check(ABS_MAP, (0,), (1,), (1,), (0,))
        assert v.bound.same_set(pts(0)) and v.exact.same_set(pts(0))


seeds = st.integers(0, 10**6)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_scalarization_on_random_maps(seed):
    rng = random.Random(seed)
    n, m = rng.randint(1, 2), rng.randint(1, 2)
    phi = random_pwa_map(rng, n, m)
    u = random_direction(rng, n)
    v = phi(u)
    ystar = tuple(rng.randint(-2, 2) for _ in range(m))
    verdict = scalarization_check(phi, (0,) * n, u, v, ystar)
    assert verdict.bound.same_set(verdict.exact)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_affine_coderivative(seed):
    rng = random.Random(seed)
    n, m = rng.randint(1, 2), rng.randint(1, 2)
    A = tuple(tuple(rng.randint(-2, 2) for _ in range(n)) for _ in range(m))
    M = PolyMap.from_pwa(PWAMap.affine(A))
    u = random_direction(rng, n)
    v = random_direction(rng, m)
    D = dir_coderivative(M, (0,) * n, (0,) * m, u, v)
    Au = tuple(sum(a * b for a, b in zip(row, u)) for row in A)
    if v != Au:
        assert D.cone.is_empty
        return
    for eta in product(range(-1, 2), repeat=m):
        At = tuple(sum(A[i][j] * eta[i] for i in range(m)) for j in range(n))
        got = D(eta)
        assert got.contains(At) and len(got.pieces) == 1 and not got.pieces[0].ineqs()


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_zero_direction_is_plain_coderivative(seed):
    rng = random.Random(seed)
    G = random_union(rng, 2)
    M = PolyMap(1, 1, G)
    assert dir_coderivative(M, (0,), (0,), (0,), (0,)).cone.same_set(limiting_normal_cone(G, (0, 0)))


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_chain_and_sum_inclusions(seed):
    rng = random.Random(seed)
    S1 = PolyMap.from_pwa(random_pwa_map(rng, 1, 1))
    S2 = PolyMap(1, 1, random_union(rng, 2))
    h, l = random_direction(rng, 1), random_direction(rng, 1)
    v = chain_bound_coder(S1, S2, (0,), (0,), h, l)
    if v.qc_holds:
        assert v.inclusion == "yes"
    v = sum_bound_coder([S1, S2], (0,), (0,), h, l)
    if v.qc_holds:
        assert v.inclusion == "yes"
