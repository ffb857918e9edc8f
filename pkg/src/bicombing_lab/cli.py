"""Command-line front end.

Every subcommand reads one JSON document (``--input`` or stdin) and writes
``{"result", "certificate", "diagnostics"}`` as JSON.  Exit codes: 0 success,
1 verification failed, 2 schema error, 3 domain error, 4 budget or
convergence error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from .barycenter import (
    BarycenterConfig,
    BarycenterStats,
    bar_measure,
    bar_n,
    bar_star,
    lemma23_gap,
)
from .errors import BicombingError, BudgetError, DomainError, SchemaError
from .integrate import (
    BoxDomain,
    GridMap,
    convolve,
    partition_for_mesh,
    riemann_integral,
    uniform_partition,
)
from .reversibilize import (
    assignment_from_name,
    bicombing_from_midpoint,
    midpoint_check,
    symmetric_midpoint,
)
from .spaces import MetricTree, NormedSpace, conical_check, geodesic_eval, space_from_json
from .transport import FiniteMeasure, dual_certificate_gap, wasserstein

EXIT_OK, EXIT_FAILED, EXIT_SCHEMA, EXIT_DOMAIN, EXIT_BUDGET = 0, 1, 2, 3, 4


def _require(doc, key):
    if not isinstance(doc, dict) or key not in doc:
        raise SchemaError(f"input is missing '{key}'")
    return doc[key]


def _space(doc, key="space"):
    return space_from_json(_require(doc, key))


def _points(space, items):
    if not isinstance(items, list) or not items:
        raise SchemaError("'points' must be a non-empty list")
    return [space.point_from_json(p) for p in items]


def _config(args, doc):
    kwargs = {}
    if args.k_max is not None:
        kwargs["k_max"] = args.k_max
    if "config" in doc:
        cfg = doc["config"]
        for name in ("tolerance", "max_rounds", "k_max", "linear_fast_path"):
            if name in cfg:
                kwargs[name] = cfg[name]
    return BarycenterConfig(**kwargs)


def _tolerance(args, doc, default):
    if args.tolerance is not None:
        return args.tolerance
    return float(doc.get("tolerance", default))


def _measure(space, doc):
    weights = doc.get("weights")
    points = _points(space, _require(doc, "points"))
    if weights is None:
        weights = [1.0 / len(points)] * len(points)
    return FiniteMeasure(space, tuple(points), tuple(float(w) for w in weights))


# subcommands ----------------------------------------------------------------


def cmd_bary(args, doc):
    space = _space(doc)
    pts = _points(space, _require(doc, "points"))
    config = _config(args, doc)
    if args.tolerance is not None:
        config = BarycenterConfig(args.tolerance, config.max_rounds, config.k_max,
                                  config.linear_fast_path)
    stats = BarycenterStats()
    point = bar_n(space, pts, config, stats)
    cert = {"k": 1, "D": space.diameter(pts), "bound": None,
            "rounds_per_level": stats.to_dict()["rounds_per_level"]}
    return space.point_to_json(point), cert, stats.to_dict()


def cmd_bary_star(args, doc):
    space = _space(doc)
    pts = _points(space, _require(doc, "points"))
    config = _config(args, doc)
    target = _tolerance(args, doc, 0.5)
    point, cert = bar_star(space, pts, target, config, k=doc.get("k"))
    return space.point_to_json(point), cert.to_dict(), {"n": len(pts)}


def cmd_bary_measure(args, doc):
    space = _space(doc)
    measure = _measure(space, doc)
    config = _config(args, doc)
    target = args.tolerance if args.tolerance is not None else doc.get("tolerance")
    point, cert = bar_measure(measure, config, target_tolerance=target, k=doc.get("k"),
                              denominator_cap=int(doc.get("denominator_cap", 64)))
    return space.point_to_json(point), cert.to_dict(), {"support_size": len(measure)}


def cmd_lemma23(args, doc):
    space = _space(doc)
    pts = _points(space, _require(doc, "points"))
    x = space.point_from_json(_require(doc, "x"))
    k = int(_require(doc, "k"))
    lhs, rhs = lemma23_gap(space, x, pts, k, _config(args, doc))
    holds = lhs <= rhs + 1e-8
    return {"lhs": lhs, "rhs": rhs, "holds": holds}, None, {"n": len(pts), "k": k}


def cmd_wasserstein(args, doc):
    base = doc.get("space")
    mu_doc, nu_doc = _require(doc, "mu"), _require(doc, "nu")
    spaces = []
    for m in (mu_doc, nu_doc):
        desc = m.get("space", base) if isinstance(m, dict) else None
        if desc is None:
            raise SchemaError("measure has no space")
        spaces.append(space_from_json(desc))
    if spaces[0] != spaces[1]:
        raise DomainError("measures live in different spaces")
    mu = FiniteMeasure.from_json(spaces[0], mu_doc)
    nu = FiniteMeasure.from_json(spaces[1], nu_doc)
    res = wasserstein(mu, nu)
    infeasible, gap = dual_certificate_gap(mu, nu, res)
    result = {"distance": res.distance, "plan": res.plan.matrix.tolist(),
              "dual_potentials": {"u": res.potentials[0], "v": res.potentials[1]}}
    cert = {"exact": res.exact is not None,
            "exact_value": None if res.exact is None else str(res.exact),
            "dual_infeasibility": infeasible, "duality_gap": gap,
            "plan_residual": res.plan.residual()}
    return result, cert, {"support_sizes": [len(mu), len(nu)]}


def cmd_reversibilize(args, doc):
    space = _space(doc)
    assignment = assignment_from_name(space, doc.get("assignment", "linear"))
    x = space.point_from_json(_require(doc, "x"))
    y = space.point_from_json(_require(doc, "y"))
    tol = _tolerance(args, doc, 1e-9)
    fwd = symmetric_midpoint(assignment, x, y, tol, trace=True)
    back = symmetric_midpoint(assignment, y, x, tol, trace=True)
    result = {"midpoint": space.point_to_json(fwd.point)}
    diagnostics = {"forward": fwd.to_dict(space), "symmetry_gap": space.distance(fwd.point, back.point)}
    if "t" in doc:
        depth = int(doc.get("depth", 20))
        bic = bicombing_from_midpoint(assignment, depth)
        result["geodesic_point"] = space.point_to_json(geodesic_eval(bic, x, y, float(doc["t"])))
        diagnostics["dyadic_depth"] = depth
    return result, None, diagnostics


def cmd_verify_midpoint(args, doc):
    space = _space(doc)
    assignment = assignment_from_name(space, doc.get("assignment", "linear"))
    report = midpoint_check(assignment, args.samples, _tolerance(args, doc, 1e-9), args.seed)
    return report.to_dict(), None, {"assignment": assignment.name}


def cmd_verify_bicombing(args, doc):
    space = _space(doc)
    desc = doc.get("bicombing", "canonical")
    tol = _tolerance(args, doc, 1e-9)
    if desc == "canonical":
        bic = space.bicombing()
    elif isinstance(desc, dict) and "dyadic" in desc:
        d = desc["dyadic"]
        depth = int(d.get("depth", 20))
        bic = bicombing_from_midpoint(assignment_from_name(space, d.get("assignment", "linear")),
                                      depth)
        if args.tolerance is None and "tolerance" not in doc:
            tol = 2.0**-depth + 1e-9
    else:
        raise SchemaError("bicombing must be 'canonical' or {'dyadic': {...}}")
    report = conical_check(bic, args.samples, tol, args.seed)
    return report.to_dict(), None, {"bicombing": bic.name}


def _builtin_map(name, target, domain_dim):
    if name == "identity":
        if not isinstance(target, NormedSpace) or target.dim != domain_dim:
            raise DomainError("identity map needs a normed target of the domain's dimension")
        return lambda t: np.asarray(t, dtype=float)
    if name == "abs":
        if not isinstance(target, NormedSpace) or target.dim != domain_dim:
            raise DomainError("abs map needs a normed target of the domain's dimension")
        return lambda t: np.abs(np.asarray(t, dtype=float))
    if isinstance(name, str) and name.startswith("constant:"):
        try:
            raw = json.loads(name[len("constant:"):])
        except json.JSONDecodeError as exc:
            raise SchemaError("constant map needs a JSON point after 'constant:'") from exc
        p = target.point_from_json(raw) if isinstance(raw, dict) else target.point(raw)
        return lambda t: p
    raise SchemaError("unknown map", map=name)


def _domain(doc):
    d = _require(doc, "domain")
    norm = space_from_json({"kind": "normed", "dim": len(d["lo"]), "norm": d["norm"]}) \
        if "norm" in d else None
    return BoxDomain(tuple(d["lo"]), tuple(d["hi"]), norm)


def cmd_integrate(args, doc):
    target = _space(doc, "target")
    domain = _domain(doc)
    desc = _require(doc, "map")
    if isinstance(desc, dict) and "grid" in desc:
        grid = GridMap.from_json(desc["grid"], target, domain.norm)
        f = lambda t: _grid_value(grid, t)  # noqa: E731
    else:
        f = _builtin_map(desc, target, domain.dim)
    tags = doc.get("tags", "center")
    if args.mesh is not None:
        partition = partition_for_mesh(domain, args.mesh, tags, args.seed)
    else:
        partition = uniform_partition(domain, doc.get("cells", 8), tags, args.seed)
    point, cert = riemann_integral(f, partition, target, _config(args, doc),
                                   k=doc.get("k"), target_tolerance=doc.get("tolerance"))
    return target.point_to_json(point), cert.to_dict(), {"cells": len(partition),
                                                         "mesh": partition.mesh}


def _grid_value(grid, t):
    from .integrate import cube_extend

    return cube_extend(grid, t)


def cmd_convolve(args, doc):
    target = _space(doc, "target")
    desc = _require(doc, "map")
    norm_desc = doc.get("domain_norm")
    if isinstance(desc, dict) and "values" in desc:
        dim = len(desc["origin"])
        norm = space_from_json({"kind": "normed", "dim": dim, "norm": norm_desc}) if norm_desc else None
        grid = GridMap.from_json(desc, target, norm)
    else:
        g = _require(doc, "grid")
        dim = len(g["origin"])
        norm = space_from_json({"kind": "normed", "dim": dim, "norm": norm_desc}) if norm_desc else None
        f = _builtin_map(desc, target, dim)
        grid = GridMap.from_function(f, g["origin"], float(g["spacing"]), g["shape"], target, norm)
    x = np.asarray(_require(doc, "x"), dtype=float)
    radius = float(_require(doc, "radius"))
    mesh = args.mesh if args.mesh is not None else float(doc.get("mesh", 2.0**-4))
    point, cert = convolve(grid, x, radius, mesh, _config(args, doc))
    diagnostics = {"grid_lipschitz": grid.lipschitz}
    return target.point_to_json(point), cert.to_dict(), diagnostics


def reproduce_example():
    """bar_3 and bar_6 on the tripod with legs 2, 1, 1."""
    K = MetricTree.tripod()
    x, y, z, m = (K.vertex(v) for v in "xyzm")
    t0 = time.perf_counter()
    b3 = bar_n(K, [x, y, z])
    b6 = bar_n(K, [x, x, y, y, z, z])
    elapsed = time.perf_counter() - t0
    d3, d6 = K.distance(b3, m), K.distance(b6, m)
    on_leg = all(K.on_geodesic(m, x, b) for b in (b3, b6))
    return {
        "bar3_distance_from_m": d3,
        "bar6_distance_from_m": d6,
        "bar3": K.point_to_json(b3),
        "bar6": K.point_to_json(b6),
        "on_leg_toward_x": on_leg,
        "errors": {"bar3": abs(d3 - 1 / 3), "bar6": abs(d6 - 13 / 45)},
        "seconds": elapsed,
    }


def cmd_reproduce_example(args, doc):
    out = reproduce_example()
    passed = out["on_leg_toward_x"] and max(out["errors"].values()) <= 1e-6
    return out, {"passed": passed, "tolerance": 1e-6}, {}


COMMANDS = {
    "bary": cmd_bary,
    "bary-star": cmd_bary_star,
    "bary-measure": cmd_bary_measure,
    "lemma23": cmd_lemma23,
    "wasserstein": cmd_wasserstein,
    "reversibilize": cmd_reversibilize,
    "verify-midpoint": cmd_verify_midpoint,
    "verify-bicombing": cmd_verify_bicombing,
    "integrate": cmd_integrate,
    "convolve": cmd_convolve,
    "reproduce-example": cmd_reproduce_example,
}

VERIFICATION = {"verify-midpoint", "verify-bicombing", "reproduce-example"}


def _positive(kind):
    def parse(text):
        value = kind(text)
        if value <= 0:
            raise argparse.ArgumentTypeError("must be positive")
        return value

    return parse


def build_parser():
    parser = argparse.ArgumentParser(prog="bicombing-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--input", help="JSON input file (default: stdin)")
        p.add_argument("--output", help="write JSON here instead of stdout")
        p.add_argument("--tolerance", type=_positive(float))
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--k-max", dest="k_max", type=_positive(int))
        p.add_argument("--mesh", type=_positive(float))
        p.add_argument("--samples", type=_positive(int), default=1000)
    return parser


def _read(args):
    if args.command == "reproduce-example" and args.input is None:
        return {}
    try:
        if args.input:
            with open(args.input, encoding="utf-8") as fh:
                return json.load(fh)
        return json.load(sys.stdin)
    except json.JSONDecodeError as exc:
        raise SchemaError("input is not valid JSON", detail=str(exc)) from exc
    except OSError as exc:
        raise SchemaError("cannot read input", detail=str(exc)) from exc


def _emit(args, payload):
    text = json.dumps(payload, indent=2, allow_nan=False, default=_default)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def exit_code(exc: BicombingError) -> int:
    if isinstance(exc, SchemaError):
        return EXIT_SCHEMA
    if isinstance(exc, DomainError):
        return EXIT_DOMAIN
    if isinstance(exc, BudgetError):
        return EXIT_BUDGET
    return EXIT_BUDGET  # convergence


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        doc = _read(args)
        try:
            result, cert, diagnostics = COMMANDS[args.command](args, doc)
        except (KeyError, TypeError, IndexError) as exc:
            raise SchemaError("input does not match the schema", detail=repr(exc)) from exc
    except BicombingError as exc:
        _emit(args, {"error": exc.to_dict()})
        return exit_code(exc)
    payload = {"result": result, "diagnostics": diagnostics}
    if cert is not None:
        payload["certificate"] = cert
    _emit(args, payload)
    if args.command in VERIFICATION:
        passed = result.get("passed") if "passed" in result else cert.get("passed")
        return EXIT_OK if passed else EXIT_FAILED
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
