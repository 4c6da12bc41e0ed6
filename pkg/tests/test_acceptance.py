"""Acceptance suite: one PASS/FAIL line per criterion, with its time budget."""
import random
import subprocess
import sys
import time
from fractions import Fraction
from itertools import product
from pathlib import Path

import pytest

from dircalc import (
    ConeUnion,
    FirstOrderData,
    PolyMap,
    PWAFunc,
    PWAMap,
    SampleSchedule,
    UnionSet,
    analytic_dir_subdif,
    approx_dir_limiting,
    approx_vertical,
    aubin_witness_search,
    chain_bound,
    chain_bound_coder,
    check_aubin_implicit,
    check_dir_subregularity,
    check_subtransversality,
    constraint_bound,
    dir_limiting_normal_cone,
    enumerate_direction_strata,
    frechet_normal_cone,
    graph_deriv_values,
    image_bound,
    intersection_bound,
    limiting_normal_cone,
    max_bound,
    min_bound,
    ncp_first_order,
    preimage_bound,
    qc_foscms,
    scalarization_check,
    singular_dir_subdif,
    sum_bound,
    sum_bound_coder,
    union_bound,
    value_function_bound,
)
from dircalc.functions import (
    _slice,
    epi_normal_cone,
    infimal_projection,
    pointwise_max,
    pointwise_min,
    pointwise_sum,
    vertical_normal_cone,
)
from dircalc.geometry import generated_cone

from instances import (
    ABS,
    ABS_MAP,
    CPLM,
    FIXTURE_SETS,
    MPCC,
    MPCC_1,
    MPCC_2,
    NEG_ABS,
    R2_MINUS,
    R2_PLUS,
    halfspace,
    poly,
    random_direction,
    random_min_func,
    random_pwa_func,
    random_pwa_map,
    random_union,
    single,
)

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, elapsed, budget=None):
        within = budget is None or elapsed < budget
        verdict = "PASS" if ok and within else "FAIL"
        limit = f" (budget {budget:g} s)" if budget is not None else ""
        with capsys.disabled():
            print(f"\n{verdict} criterion {number}: {title} in {elapsed:.2f} s{limit}")
        assert ok, f"criterion {number} failed"
        assert within, f"criterion {number} exceeded its {budget} s budget"

    return emit


def cu(dim, *pieces):
    return ConeUnion(dim, [generated_cone(dim, r, l) for r, l in pieces])


# 1 -------------------------------------------------------------------------


def test_mpcc_fixture(report):
    t0 = time.perf_counter()
    x = (0, 0)
    neg = ([(-1, 0), (0, -1)], [])
    checks = [
        limiting_normal_cone(MPCC, x).same_set(cu(2, neg, ([], [(0, 1)]), ([], [(1, 0)]))),
        frechet_normal_cone(MPCC, x) == generated_cone(2, *neg),
        dir_limiting_normal_cone(MPCC, x, (1, 0)).same_set(cu(2, ([], [(0, 1)]))),
        dir_limiting_normal_cone(MPCC, x, (0, 1)).same_set(cu(2, ([], [(1, 0)]))),
    ]
    v = union_bound([single(MPCC_1), single(MPCC_2)], x, x)
    checks += [
        v.exact.issubset(v.bound) and not v.bound.issubset(v.exact),
        v.refined_bound.same_set(v.exact),
    ]
    report(1, "MPCC cones and union refinement", all(checks), time.perf_counter() - t0, 1)


# 2 -------------------------------------------------------------------------


def perturbation_graph() -> UnionSet:
    C1 = poly(2, [((-1, 1), 0), ((-1, -1), 0)])
    shift_1 = ((1, 0, 0, 0, 1, 0), (0, 1, 0, 0, 0, 1))
    shift_2 = ((0, 0, 1, 0, 1, 0), (0, 0, 0, 1, 0, 1))
    return UnionSet(6, [C1.map_rows(shift_1, None, 6).intersect(P.map_rows(shift_2, None, 6)) for P in CPLM.pieces])


def test_subtransversality_fixture(report):
    t0 = time.perf_counter()
    phi_1 = FirstOrderData.linear((0, 0), (0, 0), ((-1, 1), (-1, -1)))
    phi_2 = PWAMap.affine(((0, 1), (-1, 0)))
    v = check_subtransversality([(R2_MINUS, phi_1), (CPLM, phi_2)], (0, 0))
    w = phi_1.direction_value((1, 0))
    N = dir_limiting_normal_cone(R2_MINUS, (0, 0), w)
    pulled = {tuple(sum(g[i] * phi_1.deriv.pieces[0][1][i][j] for i in range(2)) for j in range(2))
              for c in N.pieces for g in c.rays + c.lineality}
    a = aubin_witness_search(perturbation_graph(), (0, 0, 0, 0), (0, 0))
    element = a.witnesses.get("element")
    checks = [
        v.status == "sufficient-condition-passed",
        v.witnesses["directions"] == [(1, 0)],
        w == (-1, -1) and not N.is_empty and pulled <= {(0, 0)},
        a.status == "condition-failed-with-witness",
        element == (-1, 0, 1, 0) and a.witnesses["cone"].contains(element),
    ]
    report(2, "subtransversality passes, Aubin criterion finds (-1,0)/(1,0)", all(checks), time.perf_counter() - t0, 5)


# 3 -------------------------------------------------------------------------


def test_ncp_fixture(report):
    t0 = time.perf_counter()
    G = FirstOrderData.linear((0, 0), (0,), ((0, 1),))
    H = FirstOrderData((0, 0), (0,), PWAMap(2, 1, [
        (poly(2, [((-1, 0), 0)]), ((1, -1),), (0,)),
        (poly(2, [((1, 0), 0)]), ((-1, -1),), (0,)),
    ]))
    nd = ncp_first_order(G, H, (0,), (0,))
    # exact piece check: on each piece the linear part is one branch of min{u, |v| - u}
    branches = {((0, 1),), ((1, -1),), ((-1, -1),)}
    pieces_ok = all(A in branches for _, A, _ in nd.deriv.pieces)
    values_ok = all(nd.deriv((v, u)) == (min(u, abs(v) - u),)
                    for v in range(-4, 5) for u in range(-4, 5))
    values_ok = values_ok and all(nd.deriv((Fraction(v, 3), Fraction(u, 2))) == (min(Fraction(u, 2), abs(Fraction(v, 3)) - Fraction(u, 2)),)
                                  for v in range(-4, 5) for u in range(-4, 5))
    verdict = check_aubin_implicit(nd, (0,), (0,))
    witness_ok = nd.bound((0, 0), (-1,)).contains((Fraction(1, 2), 0))
    checks = [pieces_ok, values_ok, verdict.status == "sufficient-condition-passed", witness_ok]
    report(3, "NCP direction map, Aubin check and the (1/2,-1) witness", all(checks), time.perf_counter() - t0, 5)


# 4 -------------------------------------------------------------------------


def decomposition_holds(D, x) -> bool:
    parts = ConeUnion(D.dim, [frechet_normal_cone(D, x)])
    for u, _ in enumerate_direction_strata(D, x)[1:]:
        parts = parts.union(dir_limiting_normal_cone(D, x, u))
    return limiting_normal_cone(D, x).same_set(parts)


def test_decomposition(report):
    t0 = time.perf_counter()
    rng = random.Random(20241)
    failures = [name for name, D in FIXTURE_SETS.items() if not decomposition_holds(D, (0,) * D.dim)]
    for k in range(200):
        D = random_union(rng)
        if not decomposition_holds(D, (0,) * D.dim):
            failures.append(k)
    report(4, f"decomposition on {len(FIXTURE_SETS)} fixtures and 200 random unions (failures: {failures})",
           not failures, time.perf_counter() - t0, 60)


# 5 -------------------------------------------------------------------------


SPARSE = SampleSchedule(steps=tuple(Fraction(1, 2**k) for k in range(3, 7)), mode="black")


def test_oracle_agreement(report):
    t0 = time.perf_counter()
    rng = random.Random(20242)
    cases = [(D, u) for D in FIXTURE_SETS.values() for u, _ in enumerate_direction_strata(D, (0,) * D.dim)]
    for _ in range(100):
        D = random_union(rng)
        cases.append((D, random_direction(rng, D.dim)))
    incomplete, unsound = 0, 0
    for D, u in cases:
        x = (0,) * D.dim
        exact = dir_limiting_normal_cone(D, x, u)
        approx = approx_dir_limiting(D, x, u)
        if not approx.issubset(exact) or not approx_dir_limiting(D, x, u, SPARSE).issubset(exact):
            unsound += 1
        elif not exact.issubset(approx):
            incomplete += 1
    report(5, f"oracle agreement on {len(cases)} instances (incomplete {incomplete}, unsound {unsound})",
           incomplete == 0 and unsound == 0, time.perf_counter() - t0, 120)


# 6 -------------------------------------------------------------------------


def _preimage(rng):
    n, m = rng.randint(1, 2), rng.randint(1, 2)
    return [preimage_bound(random_pwa_map(rng, n, m), random_union(rng, m), (0,) * n, random_direction(rng, n))]


def _intersection(rng):
    n = rng.randint(1, 3)
    Cs = [random_union(rng, n, pieces=rng.randint(1, 2)) for _ in range(rng.randint(2, 3))]
    return [intersection_bound(Cs, (0,) * n, random_direction(rng, n))]


def _constraint(rng):
    n, m = rng.randint(1, 2), rng.randint(1, 2)
    P, Q = random_union(rng, n), random_union(rng, m)
    return [constraint_bound(P, random_pwa_map(rng, n, m), Q, (0,) * n, random_direction(rng, n))]


def _image(rng):
    n, m = rng.randint(1, 2), rng.randint(1, 2)
    phi, C = random_pwa_map(rng, n, m), random_union(rng, n)
    v = random_direction(rng, m)
    cert = rng.choice(["calm", "semicontinuous", "semicompact"])
    xbar = None if cert == "semicompact" else (0,) * n
    return [image_bound(phi, C, (0,) * m, v, cert, xbar=xbar)]


def _union(rng):
    n = rng.randint(1, 3)
    Cs = [random_union(rng, n, pieces=1) for _ in range(rng.randint(1, 3))]
    return [union_bound(Cs, (0,) * n, random_direction(rng, n))]


def _values(f, n, h):
    return graph_deriv_values(f, (0,) * n, h)


def _chain(rng):
    n, m = rng.randint(1, 2), rng.randint(1, 2)
    g, phi = random_pwa_func(rng, m), random_pwa_map(rng, n, m)
    h = random_direction(rng, n)
    return [chain_bound(g, phi, (0,) * n, h, nu) for nu in _values(g.compose(phi), n, h)]


def _lipschitz(rng, n):
    return random_pwa_func(rng, n) if rng.random() < 0.5 else random_min_func(rng, n)


def _sum(rng):
    n = rng.randint(1, 2)
    fs = [_lipschitz(rng, n) for _ in range(rng.randint(2, 3))]
    h = random_direction(rng, n)
    return [sum_bound(fs, (0,) * n, h, nu) for nu in _values(pointwise_sum(fs), n, h)]


def _max(rng):
    # the max rule takes functions without jumps, so min-forms (stored lsc) are excluded
    n = rng.randint(1, 2)
    fs = [random_pwa_func(rng, n) for _ in range(rng.randint(2, 3))]
    h = random_direction(rng, n)
    return [max_bound(fs, (0,) * n, h, nu) for nu in _values(pointwise_max(fs), n, h)]


def _min(rng):
    n = rng.randint(1, 2)
    fs = [_lipschitz(rng, n) for _ in range(rng.randint(2, 3))]
    h = random_direction(rng, n)
    return [min_bound(fs, (0,) * n, h, nu) for nu in _values(pointwise_min(fs), n, h)]


def _value_function(rng):
    # coercive in x: the rows (1, s) and (-1, t) bound f below by |x| - c|y|
    rows = {(1, rng.randint(-1, 1)), (-1, rng.randint(-1, 1))}
    rows |= {(rng.randint(-2, 2), rng.randint(-2, 2)) for _ in range(rng.randint(0, 2))}
    f = PWAFunc.max_affine([(a, 0) for a in sorted(rows)])
    v = random_direction(rng, 1)
    theta = infimal_projection(f, 1)
    return [value_function_bound(f, 1, (0,), v, mu) for mu in graph_deriv_values(theta, (0,), v)]


def _coder_chain(rng):
    S1 = PolyMap.from_pwa(random_pwa_map(rng, 1, 1))
    S2 = PolyMap(1, 1, random_union(rng, 2))
    return [chain_bound_coder(S1, S2, (0,), (0,), random_direction(rng, 1), random_direction(rng, 1))]


def _coder_sum(rng):
    S1 = PolyMap.from_pwa(random_pwa_map(rng, 1, 1))
    S2 = PolyMap(1, 1, random_union(rng, 2))
    return [sum_bound_coder([S1, S2], (0,), (0,), random_direction(rng, 1), random_direction(rng, 1))]


RULES = {
    "preimage": _preimage,
    "intersection": _intersection,
    "constraint": _constraint,
    "image": _image,
    "union": _union,
    "chain": _chain,
    "sum": _sum,
    "max": _max,
    "min": _min,
    "value-function": _value_function,
    "coderivative-chain": _coder_chain,
    "coderivative-sum": _coder_sum,
}


def failure_witnesses_verify() -> list:
    """Hand-built instances whose conditions fail; returns the names whose witness does not re-verify."""
    bad = []
    x = (0, 0)
    left, right = halfspace((1, 0)), halfspace((-1, 0))
    v = intersection_bound([left, right], x, x)
    q = next(q for q in v.qc if q.name == "capCQ")
    lam = q.witness
    if q.holds or not (dir_limiting_normal_cone(left, x, x).contains(lam[:2])
                       and dir_limiting_normal_cone(right, x, x).contains(lam[2:])
                       and all(a + b == 0 for a, b in zip(lam[:2], lam[2:])) and any(lam)):
        bad.append("capCQ")
    anti = PWAMap.affine(((1,), (-1,)))
    s = check_dir_subregularity(anti, R2_PLUS, (0,), (0,))
    lam = s.witnesses.get("lambda")
    if s.status != "condition-failed-with-witness" or not (
        dir_limiting_normal_cone(R2_PLUS, x, s.witnesses["w"]).contains(lam) and lam[0] - lam[1] == 0 and any(lam)
    ):
        bad.append("FOSCMS")
    if qc_foscms(anti, R2_PLUS, (0,), (0,)).qc_holds:
        bad.append("FOSCMS-rule")
    wall_left = PWAFunc(1, [(poly(1, [((1,), 0)]), (0,), 0)])
    wall_right = PWAFunc(1, [(poly(1, [((-1,), 0)]), (0,), 0)])
    v = sum_bound([wall_left, wall_right], (0,), (0,), 0)
    q = next(q for q in v.qc if q.name == "SumCQ")
    lam = q.witness
    if q.holds or not (singular_dir_subdif(wall_left, (0,), (0,), 0).contains(lam[:1])
                       and singular_dir_subdif(wall_right, (0,), (0,), 0).contains(lam[1:])
                       and lam[0] + lam[1] == 0 and lam[0] != 0):
        bad.append("SumCQ")
    t = check_subtransversality([left, right], x)
    if t.status != "condition-failed-with-witness":
        bad.append("subtransversality")
    else:
        u, vs = t.witnesses["u"], t.witnesses["v"]
        ok = any(u) and any(any(w) for w in vs) and all(sum(c) == 0 for c in zip(*vs))
        ok = ok and all(dir_limiting_normal_cone(C, x, u).contains(w) for C, w in zip((left, right), vs))
        if not ok:
            bad.append("subtransversality")
    return bad


def test_rule_inclusions(report):
    t0 = time.perf_counter()
    rng = random.Random(20243)
    counts, violations = {}, []
    for name, gen in RULES.items():
        passing, attempts = 0, 0
        while passing < 50 and attempts < 2000:
            attempts += 1
            for verdict in gen(rng):
                if not verdict.qc_holds:
                    continue
                passing += 1
                if verdict.inclusion != "yes" or not verdict.exact.issubset(verdict.bound):
                    violations.append((name, attempts))
        counts[name] = passing
    short = {k: c for k, c in counts.items() if c < 50}
    bad_witnesses = failure_witnesses_verify()
    ok = not violations and not short and not bad_witnesses
    title = f"rule inclusions over {sum(counts.values())} QC-passing instances"
    if not ok:
        title += f" (violations {violations}, short {short}, witnesses {bad_witnesses})"
    report(6, title, ok, time.perf_counter() - t0, 600)


# 7 -------------------------------------------------------------------------

GRID_1 = [Fraction(k, 2) for k in range(-4, 5)]
GRID_2 = list(product((Fraction(-1), Fraction(0), Fraction(1, 2)), repeat=2))


def test_scalarization(report):
    t0 = time.perf_counter()
    rng = random.Random(20244)
    maps = [(ABS_MAP, 1), (PWAMap(1, 1, [(p, (tuple(-a for a in A[0]),), c) for p, A, c in ABS_MAP.pieces]), 1)]
    while len(maps) < 22:
        n = rng.randint(1, 2)
        maps.append((random_pwa_map(rng, n, rng.randint(1, 2)), n))
    checked, mismatches = 0, []
    for k, (phi, n) in enumerate(maps):
        grid = GRID_1 if phi.m == 1 else GRID_2
        for u in [random_direction(rng, n) for _ in range(2)] + [(1,) * n]:
            v = phi(u)
            for y in grid:
                ystar = (y,) if phi.m == 1 else y
                verdict = scalarization_check(phi, (0,) * n, u, v, ystar)
                checked += 1
                if not verdict.bound.same_set(verdict.exact):
                    mismatches.append((k, u, ystar))
    report(7, f"scalarization equality on {len(maps)} maps, {checked} checks (mismatches {mismatches})",
           not mismatches, time.perf_counter() - t0)


# 8 -------------------------------------------------------------------------


def _oracle_analytic(f, h):
    """Analytic subdifferential assembled from sampled epigraph cones only."""
    z = f.base_point((0,))
    epi = f.epi()
    parts = [_slice(approx_dir_limiting(epi, z, (h, nu)), -1) for nu in graph_deriv_values(f, (0,), (h,))]
    parts += [_slice(approx_vertical(epi, z, (h,), s), -1) for s in (1, -1)]
    out = UnionSet(1, [])
    return out.union(*parts)


JUMPS = {
    "up-right": PWAFunc(1, [(poly(1, [((1,), 0)]), (0,), 0), (poly(1, [((-1,), 0)]), (1,), 1)], lsc=True),
    "up-left": PWAFunc(1, [(poly(1, [((-1,), 0)]), (0,), 0), (poly(1, [((1,), 0)]), (-1,), 1)], lsc=True),
    "down-right": PWAFunc(1, [(poly(1, [((1,), 0)]), (0,), 0), (poly(1, [((-1,), 0)]), (1,), -1)], lsc=True),
}


def test_vertical_directions(report):
    t0 = time.perf_counter()
    mismatches = []
    for name, f in JUMPS.items():
        z = f.base_point((0,))
        for h in (-1, 0, 1):
            for s in (1, -1):
                if not vertical_normal_cone(f, (0,), (h,), s).same_set(approx_vertical(f.epi(), z, (h,), s)):
                    mismatches.append((name, h, s))
            for nu in graph_deriv_values(f, (0,), (h,)):
                if not epi_normal_cone(f, (0,), (h,), nu).same_set(approx_dir_limiting(f.epi(), z, (h, nu))):
                    mismatches.append((name, h, "nu", nu))
            if not analytic_dir_subdif(f, (0,), (h,)).same_set(_oracle_analytic(f, h)):
                mismatches.append((name, h, "analytic"))
    zero = UnionSet(1, [poly(1, eqs=[((1,), 0)])])
    lipschitz = {"abs": ABS, "neg-abs": NEG_ABS, "line": PWAFunc.affine((2,))}
    for name, f in lipschitz.items():
        for h in (-1, 0, 1):
            if any(not _slice(vertical_normal_cone(f, (0,), (h,), s), -1).is_empty for s in (1, -1)):
                mismatches.append((name, h, "vertical"))
            for nu in graph_deriv_values(f, (0,), (h,)):
                if not singular_dir_subdif(f, (0,), (h,), nu).issubset(zero):
                    mismatches.append((name, h, "singular"))
    report(8, f"vertical machinery on {len(JUMPS)} jump and {len(lipschitz)} Lipschitz fixtures (mismatches {mismatches})",
           not mismatches, time.perf_counter() - t0)


# 9 -------------------------------------------------------------------------


def test_cli_determinism(report, tmp_path):
    t0 = time.perf_counter()
    tasks = sorted((FIXTURES / "tasks").glob("*.json"))
    differing = []
    for task in tasks:
        outs = []
        for k in range(2):
            out = tmp_path / f"{task.stem}.{k}.json"
            subprocess.run([sys.executable, "-m", "dircalc", "run", "--task", str(task), "--out", str(out)], check=False)
            outs.append(out.read_bytes())
        golden = (FIXTURES / "golden" / task.name).read_bytes()
        if not (outs[0] == outs[1] == golden):
            differing.append(task.stem)
    report(9, f"byte-identical CLI reports for {len(tasks)} tasks over two runs and the golden files (differing {differing})",
           not differing, time.perf_counter() - t0)
