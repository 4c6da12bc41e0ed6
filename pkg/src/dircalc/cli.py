"""Batch front end: ``dircalc run --task FILE``.

A task file is a JSON document with ``"kind": "task"``, an ``operation``
name, named ``inputs`` (inline objects or ``{"file": path}`` references
relative to the task file) and the point and direction arguments the
operation needs.  Numbers are integers or strings ``"p/q"``.  Reports are
canonical JSON: sorted keys, string rationals, primitive integer cone
generators in a fixed order.

Exit status: 0 success, 2 a qualification or sufficient condition failed,
3 invalid input, 4 resource limit.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import applications as apps
from . import cones, functions, multimaps, oracle, rules
from .errors import ResourceLimit
from .geometry import ConeUnion, HPoly, VCone, generated_cone

EXIT_OK, EXIT_CONDITION, EXIT_INPUT, EXIT_LIMIT = 0, 2, 3, 4


class InputError(Exception):
    """Malformed task input; ``path`` locates the offending field."""

    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


# ---------------------------------------------------------------------------
# parsing


def parse_rational(v, path: str) -> Fraction:
    if isinstance(v, bool):
        raise InputError(path, "expected a rational")
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, str):
        try:
            return Fraction(v.strip())
        except (ValueError, ZeroDivisionError):
            raise InputError(path, f"malformed rational {v!r}") from None
    raise InputError(path, "expected an integer or a string 'p/q'")


def parse_vector(v, path: str, dim: int | None = None) -> tuple:
    if not isinstance(v, list):
        raise InputError(path, "expected a list")
    out = tuple(parse_rational(x, f"{path}[{i}]") for i, x in enumerate(v))
    if dim is not None and len(out) != dim:
        raise InputError(path, f"expected length {dim}, got {len(out)}")
    return out


def parse_matrix(v, path: str, cols: int | None = None) -> tuple:
    if not isinstance(v, list):
        raise InputError(path, "expected a list of rows")
    return tuple(parse_vector(r, f"{path}[{i}]", cols) for i, r in enumerate(v))


def _field(obj: dict, key: str, path: str):
    if not isinstance(obj, dict):
        raise InputError(path, "expected an object")
    if key not in obj:
        raise InputError(f"{path}.{key}", "missing field")
    return obj[key]


def _int(v, path: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int) or v < 0:
        raise InputError(path, "expected a nonnegative integer")
    return v


def parse_poly(obj, dim: int, path: str) -> HPoly:
    A = parse_matrix(_field(obj, "A", path), f"{path}.A", dim)
    b = parse_vector(_field(obj, "b", path), f"{path}.b", len(A))
    eq = obj.get("eq_rows", [])
    if not isinstance(eq, list) or any(isinstance(i, bool) or not isinstance(i, int) or not 0 <= i < len(A) for i in eq):
        raise InputError(f"{path}.eq_rows", "expected row indices")
    return HPoly(A, b, eq, dim)


def parse_set(obj, path: str) -> cones.UnionSet:
    dim = _int(_field(obj, "dim", path), f"{path}.dim")
    pieces = _field(obj, "pieces", path)
    if not isinstance(pieces, list):
        raise InputError(f"{path}.pieces", "expected a list")
    return cones.UnionSet(dim, [parse_poly(p, dim, f"{path}.pieces[{i}]") for i, p in enumerate(pieces)])


def parse_cone(obj, dim: int, path: str) -> VCone:
    rays = parse_matrix(obj.get("rays", []), f"{path}.rays", dim)
    lin = parse_matrix(obj.get("lineality", []), f"{path}.lineality", dim)
    return generated_cone(dim, rays, lin)


def parse_cone_union(obj, path: str) -> ConeUnion:
    dim = _int(_field(obj, "dim", path), f"{path}.dim")
    pieces = _field(obj, "pieces", path)
    if not isinstance(pieces, list):
        raise InputError(f"{path}.pieces", "expected a list")
    return ConeUnion(dim, [parse_cone(p, dim, f"{path}.pieces[{i}]") for i, p in enumerate(pieces)])


def parse_pwa_map(obj, path: str) -> rules.PWAMap:
    n = _int(_field(obj, "n", path), f"{path}.n")
    m = _int(_field(obj, "m", path), f"{path}.m")
    pieces = []
    for i, p in enumerate(_field(obj, "pieces", path)):
        pp = f"{path}.pieces[{i}]"
        dom = parse_poly(p["domain"], n, f"{pp}.domain") if "domain" in p else HPoly.space(n)
        A = parse_matrix(_field(p, "A", pp), f"{pp}.A", n)
        if len(A) != m:
            raise InputError(f"{pp}.A", f"expected {m} rows")
        c = parse_vector(p.get("c", [0] * m), f"{pp}.c", m)
        pieces.append((dom, A, c))
    return rules.PWAMap(n, m, pieces)


def parse_pwa_function(obj, path: str) -> functions.PWAFunc:
    n = _int(_field(obj, "n", path), f"{path}.n")
    pieces = []
    for i, p in enumerate(_field(obj, "pieces", path)):
        pp = f"{path}.pieces[{i}]"
        dom = parse_poly(p["domain"], n, f"{pp}.domain") if "domain" in p else HPoly.space(n)
        a = parse_vector(_field(p, "a", pp), f"{pp}.a", n)
        c = parse_rational(p.get("c", 0), f"{pp}.c")
        pieces.append((dom, a, c))
    return functions.PWAFunc(n, pieces, lsc=bool(obj.get("lsc", False)))


def parse_polymap(obj, path: str) -> multimaps.PolyMap:
    n = _int(_field(obj, "n", path), f"{path}.n")
    m = _int(_field(obj, "m", path), f"{path}.m")
    return multimaps.PolyMap(n, m, parse_set(_field(obj, "graph", path), f"{path}.graph"))


def parse_first_order(obj, path: str) -> apps.FirstOrderData:
    return apps.FirstOrderData(
        parse_vector(_field(obj, "point", path), f"{path}.point"),
        parse_vector(_field(obj, "value", path), f"{path}.value"),
        parse_pwa_map(_field(obj, "deriv", path), f"{path}.deriv"),
        obj.get("provenance", rules.ASSERTED),
    )


PARSERS = {
    "set": parse_set,
    "cone_union": parse_cone_union,
    "pwa_map": parse_pwa_map,
    "pwa_function": parse_pwa_function,
    "polymap": parse_polymap,
    "first_order_data": parse_first_order,
}


def parse_object(obj, path: str, base: Path):
    """Parse an inline object, a ``{"file": ...}`` reference or a list of them."""
    if isinstance(obj, list):
        return [parse_object(o, f"{path}[{i}]", base) for i, o in enumerate(obj)]
    if isinstance(obj, dict) and set(obj) == {"file"}:
        target = base / obj["file"]
        return parse_object(load_json(target), path, target.parent)
    kind = _field(obj, "kind", path)
    if kind not in PARSERS:
        raise InputError(f"{path}.kind", f"unknown kind {kind!r}")
    return PARSERS[kind](obj, path)


def load_json(path: Path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(str(path), f"cannot read file ({e.strerror})") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(str(path), f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from None


# ---------------------------------------------------------------------------
# encoding


def encode(v):
    """Canonical JSON-ready form of library results."""
    if v is None or isinstance(v, (bool, int, str)):
        return v
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, ConeUnion):
        return {"dim": v.dim, "pieces": [p.to_json() for p in v.pieces]}
    if isinstance(v, multimaps.CoderivResult):
        return encode(v.cone)
    if isinstance(v, rules.Verdict):
        return {
            "bound": encode(v.bound),
            "exact": encode(v.exact),
            "refined_bound": encode(v.refined_bound),
            "inclusion": v.inclusion,
            "witness": encode(v.witness),
            "qc": [q.to_json() for q in v.qc],
            "notes": list(v.notes),
        }
    if isinstance(v, apps.StabilityVerdict):
        out = v.to_json()
        if v.coderivative is not None:
            out["coderivative"] = encode(v.coderivative)
        if v.detail is not None:
            out["detail"] = encode(v.detail)
        return out
    if isinstance(v, dict):
        return {str(k): encode(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [encode(x) for x in v]
    if hasattr(v, "to_json"):
        return v.to_json()
    raise TypeError(f"cannot encode {type(v).__name__}")


def dumps(report) -> str:
    return json.dumps(report, sort_keys=True, indent=2, ensure_ascii=True) + "\n"


# ---------------------------------------------------------------------------
# operations


def _vec(task, key, path="task"):
    return parse_vector(_field(task, key, path), f"{path}.{key}")


def _rat(task, key, path="task"):
    return parse_rational(_field(task, key, path), f"{path}.{key}")


def _op_cone(fn, with_direction):
    def run(task, inp):
        S = inp["set"]
        x = _vec(task, "point")
        if with_direction:
            return fn(S, x, _vec(task, "direction"))
        return fn(S, x)

    return run


def _op_union(task, inp):
    return rules.union_bound(inp["sets"], _vec(task, "point"), _vec(task, "direction"))


def _op_intersection(task, inp):
    return rules.intersection_bound(inp["sets"], _vec(task, "point"), _vec(task, "direction"))


def _op_preimage(task, inp):
    return rules.preimage_bound(inp["map"], inp["set"], _vec(task, "point"), _vec(task, "direction"))


def _op_image(task, inp):
    cert = task.get("certificates", {}).get("inner", "semicompact")
    xbar = _vec(task, "xbar") if "xbar" in task else None
    return rules.image_bound(inp["map"], inp["set"], _vec(task, "point"), _vec(task, "direction"), cert, xbar)


def _op_dir_subdif(task, inp):
    return functions.dir_subdif(inp["function"], _vec(task, "point"), _vec(task, "direction"), _rat(task, "nu"))


def _op_analytic(task, inp):
    return functions.analytic_dir_subdif(inp["function"], _vec(task, "point"), _vec(task, "direction"))


def _as_polymap(M):
    return multimaps.PolyMap.from_pwa(M) if isinstance(M, rules.PWAMap) else M


def _op_coderivative(task, inp):
    M = _as_polymap(inp["map"])
    res = multimaps.dir_coderivative(M, _vec(task, "point"), _vec(task, "value"), _vec(task, "direction"), _vec(task, "value_direction"))
    out = {"cone": res.cone}
    if "eta" in task:
        out["query"] = res(_vec(task, "eta"))
    return out


def _op_scalarization(task, inp):
    return multimaps.scalarization_check(inp["map"], _vec(task, "point"), _vec(task, "direction"), _vec(task, "value_direction"), _vec(task, "ystar"))


def _op_subregularity(task, inp):
    v = _vec(task, "value_direction") if "value_direction" in task else None
    return apps.check_dir_subregularity(inp["map"], inp["set"], _vec(task, "point"), _vec(task, "direction"), v)


def _op_subtransversality(task, inp):
    if "maps" in inp:
        return apps.check_subtransversality(list(zip(inp["sets"], inp["maps"])), _vec(task, "point"))
    return apps.check_subtransversality(inp["sets"], _vec(task, "point"))


def _op_aubin(task, inp):
    return apps.aubin_witness_search(inp["graph"], _vec(task, "parameter"), _vec(task, "point"))


OPERATIONS = {
    "tangent_cone": (_op_cone(cones.tangent_cone, False), ("set",)),
    "frechet_normal_cone": (_op_cone(lambda S, x: ConeUnion(S.dim, [cones.frechet_normal_cone(S, x)]), False), ("set",)),
    "limiting_normal_cone": (_op_cone(cones.limiting_normal_cone, False), ("set",)),
    "dir_limiting_normal_cone": (_op_cone(cones.dir_limiting_normal_cone, True), ("set",)),
    "union_bound": (_op_union, ("sets",)),
    "intersection_bound": (_op_intersection, ("sets",)),
    "preimage_bound": (_op_preimage, ("map", "set")),
    "image_bound": (_op_image, ("map", "set")),
    "dir_subdif": (_op_dir_subdif, ("function",)),
    "analytic_dir_subdif": (_op_analytic, ("function",)),
    "dir_coderivative": (_op_coderivative, ("map",)),
    "scalarization_check": (_op_scalarization, ("map",)),
    "check_dir_subregularity": (_op_subregularity, ("map", "set")),
    "check_subtransversality": (_op_subtransversality, ("sets",)),
    "aubin_witness_search": (_op_aubin, ("graph",)),
}


def condition_failed(result) -> bool:
    if isinstance(result, rules.Verdict):
        return not result.qc_holds
    if isinstance(result, apps.StabilityVerdict):
        return not result.holds
    return False


def parse_schedule(obj, path: str) -> oracle.SampleSchedule:
    kw = {}
    for key in ("steps", "deltas"):
        if key in obj:
            kw[key] = parse_vector(obj[key], f"{path}.{key}")
    if "offsets" in obj:
        kw["offsets"] = parse_matrix(obj["offsets"], f"{path}.offsets")
    for key in ("lattice_radius", "tail", "cap"):
        if key in obj:
            kw[key] = _int(obj[key], f"{path}.{key}")
    if "mode" in obj:
        kw["mode"] = obj["mode"]
    try:
        return oracle.SampleSchedule(**kw)
    except ValueError as e:
        raise InputError(path, str(e)) from None


def oracle_section(task, inp, result, schedule) -> dict:
    """Sampled cone next to the exact one for the normal-cone operations."""
    op = task["operation"]
    if op not in ("limiting_normal_cone", "dir_limiting_normal_cone"):
        return {"available": False}
    S = inp["set"]
    x = _vec(task, "point")
    u = _vec(task, "direction") if op == "dir_limiting_normal_cone" else tuple(Fraction(0) for _ in x)
    approx = oracle.approx_dir_limiting(S, x, u, schedule)
    return {
        "available": True,
        "approx": encode(approx),
        "sound": approx.issubset(result),
        "complete": result.issubset(approx),
    }


def run_task(task_path: Path, use_oracle: bool = False, schedule=None) -> tuple:
    """``(report, exit status)`` for one task file."""
    task = load_json(task_path)
    if _field(task, "kind", "task") != "task":
        raise InputError("task.kind", "expected 'task'")
    op = _field(task, "operation", "task")
    if op not in OPERATIONS:
        raise InputError("task.operation", f"unknown operation {op!r}")
    fn, needed = OPERATIONS[op]
    raw = _field(task, "inputs", "task")
    inp = {k: parse_object(v, f"task.inputs.{k}", task_path.parent) for k, v in raw.items()}
    for k in needed:
        if k not in inp:
            raise InputError(f"task.inputs.{k}", "missing input")
    result = fn(task, inp)
    report = {"operation": op, "result": encode(result)}
    if use_oracle:
        report["oracle"] = oracle_section(task, inp, result, schedule)
    return report, EXIT_CONDITION if condition_failed(result) else EXIT_OK


def render_text(report) -> str:
    """Short pieces summary of a report."""
    lines = [f"operation: {report['operation']}"]

    def walk(obj, prefix):
        if isinstance(obj, dict):
            if "pieces" in obj and isinstance(obj["pieces"], list):
                lines.append(f"{prefix}: {len(obj['pieces'])} piece(s)")
                for p in obj["pieces"]:
                    if "rays" in p:
                        lines.append(f"{prefix}   rays={p['rays']} lineality={p['lineality']}")
                return
            for k in sorted(obj):
                walk(obj[k], f"{prefix}.{k}" if prefix else k)
        elif isinstance(obj, list) and obj and all(isinstance(x, dict) for x in obj):
            for i, x in enumerate(obj):
                walk(x, f"{prefix}[{i}]")
        else:
            lines.append(f"{prefix}: {obj}")

    walk(report["result"], "result")
    if "oracle" in report:
        walk(report["oracle"], "oracle")
    return "\n".join(lines) + "\n"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dircalc", description="Exact directional normal cones and calculus rules.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a task file")
    run.add_argument("--task", required=True, type=Path)
    run.add_argument("--out", type=Path)
    run.add_argument("--oracle", action="store_true", help="add a sampling cross-check")
    run.add_argument("--schedule", type=Path, help="JSON sampling schedule for --oracle")
    run.add_argument("--max-cells", type=int, help=f"cell limit (also via {cones.CELL_LIMIT_ENV})")
    run.add_argument("--format", choices=("json", "text"), default="json")
    args = parser.parse_args(argv)

    if args.max_cells is not None:
        os.environ[cones.CELL_LIMIT_ENV] = str(args.max_cells)
    try:
        schedule = parse_schedule(load_json(args.schedule), "schedule") if args.schedule else None
        report, status = run_task(args.task, args.oracle, schedule)
    except ResourceLimit as e:
        print(f"resource limit: {e}", file=sys.stderr)
        return EXIT_LIMIT
    except InputError as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, KeyError, TypeError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    text = dumps(report) if args.format == "json" else render_text(report)
    if args.out:
        # bytes, so line endings do not depend on the platform
        args.out.write_bytes(text.encode("utf-8"))
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
