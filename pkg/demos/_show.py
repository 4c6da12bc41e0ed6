"""Plain-text rendering of cones shared by the demos."""


def vector(v) -> str:
    return "(" + ", ".join(str(x) for x in v) + ")"


def cone(c) -> str:
    if c.is_zero:
        return "{0}"
    parts = []
    if c.rays:
        parts.append("rays " + " ".join(vector(r) for r in c.rays))
    if c.lineality:
        parts.append("lines " + " ".join(vector(l) for l in c.lineality))
    return "cone[" + "; ".join(parts) + "]"


def union(u) -> str:
    if u.is_empty:
        return "empty"
    return " u ".join(cone(c) for c in u.pieces)
