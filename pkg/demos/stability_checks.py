"""Subtransversality, Aubin property and an NCP with a nonsmooth constraint.

Run: python3 demos/stability_checks.py
"""
from fractions import Fraction

from dircalc import (
    FirstOrderData,
    HPoly,
    PWAMap,
    UnionSet,
    aubin_witness_search,
    check_aubin_implicit,
    check_subtransversality,
    ncp_first_order,
)

from _show import vector


def poly(dim, ineqs=(), eqs=()):
    return HPoly.from_rows(dim, ineqs, eqs)


R2_MINUS = UnionSet(2, [poly(2, [((1, 0), 0), ((0, 1), 0)])])
# graph of the normal cone map of R+
COMPLEMENTARITY = UnionSet(2, [poly(2, [((-1, 0), 0)], [((0, 1), 0)]), poly(2, [((0, 1), 0)], [((1, 0), 0)])])

# x1 >= |x2| as phi_1(x) in R2-, and (x2, -x1) in the complementarity graph
phi_1 = FirstOrderData.linear((0, 0), (0, 0), ((-1, 1), (-1, -1)))
phi_2 = PWAMap.affine(((0, 1), (-1, 0)))
v = check_subtransversality([(R2_MINUS, phi_1), (COMPLEMENTARITY, phi_2)], (0, 0))
print("subtransversality:", v.status)
print("  critical directions:", [vector(u) for u in v.witnesses["directions"]])

# perturbing both constraints by p in R^2 loses the Aubin property at the origin
C1 = poly(2, [((-1, 1), 0), ((-1, -1), 0)])
shift_1 = ((1, 0, 0, 0, 1, 0), (0, 1, 0, 0, 0, 1))
shift_2 = ((0, 0, 1, 0, 1, 0), (0, 0, 0, 1, 0, 1))
graph = UnionSet(6, [C1.map_rows(shift_1, None, 6).intersect(P.map_rows(shift_2, None, 6))
                     for P in COMPLEMENTARITY.pieces])
a = aubin_witness_search(graph, (0, 0, 0, 0), (0, 0))
print("Aubin property of the perturbed map:", a.status)
print("  witness (p*, x*):", vector(a.witnesses["element"]))

# NCP  0 <= G(p, x) _|_ H(p, x) >= 0  with G = x and H = |p| - x
G = FirstOrderData.linear((0, 0), (0,), ((0, 1),))
H = FirstOrderData((0, 0), (0,), PWAMap(2, 1, [
    (poly(2, [((-1, 0), 0)]), ((1, -1),), (0,)),
    (poly(2, [((1, 0), 0)]), ((-1, -1),), (0,)),
]))
nd = ncp_first_order(G, H, (0,), (0,))
for p, x in [(1, 0), (-1, 0), (0, 1), (2, 1), (1, 2)]:
    print(f"  derivative of min(G, H) along (p, x) = ({p}, {x}):", vector(nd.deriv((p, x))))
verdict = check_aubin_implicit(nd, (0,), (0,))
print("Aubin property of the NCP solution map:", verdict.status)
print("  coderivative bound at w = 0, y* = -1 contains (1/2, 0):", nd.bound((0, 0), (-1,)).contains((Fraction(1, 2), 0)))
