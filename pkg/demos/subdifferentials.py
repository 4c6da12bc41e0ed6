"""Directional subdifferentials of piecewise affine functions and the image of |x|.

Run: python3 demos/subdifferentials.py
"""
from dircalc import (
    HPoly,
    PWAFunc,
    PWAMap,
    UnionSet,
    analytic_dir_subdif,
    dir_subdif,
    graph_deriv_values,
    image_bound,
    singular_dir_subdif,
    sum_bound,
)
from dircalc.geometry import lp_max_over

from _show import union


def half(a):
    return HPoly.from_rows(1, [(a, 0)])


def show_set(s) -> str:
    # one-dimensional polyhedra: print their extent
    if s.is_empty:
        return "empty"
    pieces = []
    for P in s.pieces:
        low, high = lp_max_over(P, (-1,)), lp_max_over(P, (1,))
        lo = str(-low[2]) if low[0] == "optimal" else "-inf"
        hi = str(high[2]) if high[0] == "optimal" else "inf"
        pieces.append(f"[{lo}, {hi}]")
    return " u ".join(pieces)


ABS = PWAFunc.max_affine([((1,), 0), ((-1,), 0)])
for h in (-1, 0, 1):
    for nu in graph_deriv_values(ABS, (0,), (h,)):
        print(f"|x| at 0, direction ({h}, {nu}):", show_set(dir_subdif(ABS, (0,), (h,), nu)))

# lsc jump: 0 for x <= 0 and 1 + x for x > 0
JUMP = PWAFunc(1, [(half((1,)), (0,), 0), (half((-1,)), (1,), 1)], lsc=True)
for h in (-1, 0, 1):
    print(f"jump at 0, direction {h}: analytic", show_set(analytic_dir_subdif(JUMP, (0,), (h,))))

# two walls x <= 0 and x >= 0 as indicator-like functions: the sum rule qualification fails
left = PWAFunc(1, [(half((1,)), (0,), 0)])
right = PWAFunc(1, [(half((-1,)), (0,), 0)])
v = sum_bound([left, right], (0,), (0,), 0)
q = next(q for q in v.qc if q.name == "SumCQ")
print("sum of walls: qualification holds:", q.holds, "witness:", q.witness)
print("  singular part of the left wall:", show_set(singular_dir_subdif(left, (0,), (0,), 0)))

# the image of R under |x| is [0, inf); its normals at 0 point down
ABS_MAP = PWAMap(1, 1, [(half((-1,)), ((1,),), (0,)), (half((1,)), ((-1,),), (0,))])
line = UnionSet(1, [half((1,)), half((-1,))])
v = image_bound(ABS_MAP, line, (0,), (0,), "semicontinuous", xbar=(0,))
print("image of |x|: bound", union(v.bound), " exact", union(v.exact))
