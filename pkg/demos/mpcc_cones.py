"""Normal cones of the complementarity set {x >= 0, y >= 0, xy = 0} at the origin.

Run: python3 demos/mpcc_cones.py
"""
from dircalc import (
    HPoly,
    UnionSet,
    dir_limiting_normal_cone,
    enumerate_direction_strata,
    frechet_normal_cone,
    limiting_normal_cone,
    tangent_cone,
    union_bound,
)

from _show import cone, union, vector

# the two branches R+ x {0} and {0} x R+
x_axis = HPoly.from_rows(2, [((-1, 0), 0)], [((0, 1), 0)])
y_axis = HPoly.from_rows(2, [((0, -1), 0)], [((1, 0), 0)])
C = UnionSet(2, [x_axis, y_axis])
origin = (0, 0)

print("tangent cone        ", union(tangent_cone(C, origin)))
print("regular normal cone ", cone(frechet_normal_cone(C, origin)))
print("limiting normal cone", union(limiting_normal_cone(C, origin)))

# directional cones only see the branch the direction runs along
for h in [(1, 0), (0, 1), (1, 1)]:
    print(f"direction {vector(h)}:", union(dir_limiting_normal_cone(C, origin, h)))

# one representative per sign cell of the tangent cone; the limiting cone is
# the regular cone plus the directional cones along these representatives
print("direction representatives:", [vector(u) for u, _ in enumerate_direction_strata(C, origin)])

# the union rule over-estimates at h = 0; the refined bound drops the excess
v = union_bound([UnionSet(2, [x_axis]), UnionSet(2, [y_axis])], origin, origin)
print("union rule bound  ", union(v.bound))
print("refined bound     ", union(v.refined_bound))
print("exact             ", union(v.exact))
