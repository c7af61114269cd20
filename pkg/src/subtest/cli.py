"""Command line entry point ``subtest``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io as io_text
import json
import logging
import sys
from pathlib import Path

from . import generators, harness, io, oracles, witness
from .core import NIL, CountVector, RngSeed, draw_indices, to_number
from .errors import SkippedWithReason, SubtestError
from .graphs import Graph, triangle
from .testers import LabeledSample, make_tester

log = logging.getLogger("subtest")

EXIT_OK, EXIT_ERROR, EXIT_FAILED = 0, 1, 2


def _emit(obj, out) -> None:
    text = obj if isinstance(obj, str) else io.dumps(obj)
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _read_json(path):
    return json.loads(Path(path).read_text())


def _parse_family(spec: str) -> tuple:
    """``triangle``, ``square``, ``clique``, ``bipartite:k`` or ``tree:H.json``."""
    name, _, arg = spec.partition(":")
    params = {}
    if name == "bipartite":
        params["k"] = int(arg or 3)
    elif name == "tree":
        if not arg:
            raise SystemExit("tree family needs a pattern file: tree:H.json")
        data = _read_json(arg)
        edges = data["edges"] if isinstance(data, dict) else data
        params["H"] = Graph.from_edges([tuple(e) for e in edges])
    elif name not in ("triangle", "square", "clique"):
        raise SystemExit(f"unknown family {spec!r}")
    return name, params


# ---------------------------------------------------------------- commands

def cmd_generate(args) -> int:
    family, params = _parse_family(args.family)
    seed = RngSeed(args.seed, 0)
    if args.side == "pair":
        yes = generators.family_instance(family, args.n, "yes", seed, **params)
        no = generators.family_instance(family, args.n, "no", seed, **params)
        if args.output in (None, "-"):
            _emit({"yes": io.instance_to_json(yes), "no": io.instance_to_json(no)}, None)
        else:
            out = Path(args.output)
            stem = out.with_suffix("") if out.suffix == ".json" else out
            io.save_instance(f"{stem}.yes.json", yes)
            io.save_instance(f"{stem}.no.json", no)
        return EXIT_OK
    inst = generators.family_instance(family, args.n, args.side, seed, **params)
    _emit(io.instance_to_json(inst), args.output)
    return EXIT_OK


def cmd_test(args) -> int:
    inst = io.load_instance(args.instance)
    if args.property:
        inst = dataclasses.replace(inst, property=_property_arg(args.property))
    seed = RngSeed(args.seed, 0)
    if args.json:
        support, labels = inst.labeled_support()
        idx = draw_indices(inst.mu, args.m, seed)
        samples = [LabeledSample(support[i], labels[i]) if i >= 0 else LabeledSample(NIL, 0) for i in idx]
        verdict = make_tester(inst.property)(samples)
        witness_list = None
        if verdict.witness is not None:
            witness_list = sorted([list(s.edge), s.label] for s in verdict.witness)
        _emit({"decision": verdict.decision, "m": args.m, "witness": witness_list,
               "nil_samples": int((idx < 0).sum())}, args.output)
        return EXIT_OK
    est = harness.estimate_rejection(inst, None, args.m, args.trials, seed)
    buf = io_text.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("property", "m", "trials", "accepts", "rejections", "rejection_rate", "std_error"))
    writer.writerow((inst.property.name, args.m, est.trials, est.trials - est.rejections, est.rejections,
                     repr(round(est.rate, 12)), repr(round(est.std_error, 12))))
    _emit(buf.getvalue(), args.output)
    return EXIT_OK


def _property_arg(value: str):
    """A property name, or ``hom:H.json`` / ``free:H.json`` naming a pattern file."""
    kind, _, path = value.partition(":")
    if kind in ("hom", "free") and path.endswith(".json"):
        data = _read_json(path)
        edges = data["edges"] if isinstance(data, dict) else data
        return io.property_from_json({"kind": kind, "H": edges})
    return io.parse_property(value)


def cmd_witness(args) -> int:
    inst = io.load_instance(args.instance)
    eps = to_number(args.eps) if args.eps else inst.certified_distance
    q = witness.square_witness(inst.mu, eps)
    p_prime = witness.descendant(q)
    label = witness.classify(p_prime, eps)
    _emit({
        "epsilon": eps,
        "matching": {"weights": [[sorted(z), w] for z, w in q.weights.items()], "total": q.total(),
                     "conditions": q.conditions(inst.mu.weights)},
        "descendant": {"weights": [[list(e), w] for e, w in p_prime.items()], "total": p_prime.total()},
        "case": label.label,
        "slacks": list(label.slacks),
        "budgets": {"dilute": witness.dilute_budget(inst.n, eps),
                    "concentrated": witness.concentrated_budget(q)},
    }, args.output)
    return EXIT_OK


def _limits(args):
    return oracles.UNLIMITED if getattr(args, "unlimited", False) else oracles.DEFAULT_LIMITS


def cmd_oracle(args) -> int:
    kind = args.oracle
    if kind == "distance":
        inst = io.load_instance(args.instance)
        d = oracles.exact_distance(inst.edges, inst.mu, inst.property, inst.n, limits=_limits(args))
        _emit({"distance": d, "certified_distance": inst.certified_distance,
               "holds": inst.certified_distance is None or d >= inst.certified_distance}, args.output)
    elif kind == "violations":
        inst = io.load_instance(args.instance)
        hg = oracles.enumerate_violations(inst.edges, inst.property, inst.n,
                                          domain=inst.mu.support(), limits=_limits(args))
        _emit({"count": len(hg), "hyperedges": [sorted(map(list, h)) for h in hg.hyperedges]},
              args.output)
    elif kind == "tv":
        family, params = _parse_family(args.family)
        if family == "bipartite":
            fy = generators.bipartite_family(args.n, params["k"], "yes")
            fn = generators.bipartite_family(args.n, params["k"], "no")
        elif family == "triangle":
            E = triangle().edges
            fy = generators.selector_family(E, "triangle", "yes", 3)
            fn = generators.selector_family(E, "triangle", "no", 3)
        else:
            raise SystemExit("tv supports the bipartite:k and single-triangle families")
        res = oracles.exact_tv_sample_distributions(fy, fn, args.m, seed=RngSeed(args.seed, 0))
        _emit({"tv": res.value, "mode": res.mode, "std_error": res.std_error, "m": args.m}, args.output)
    elif kind == "dominate":
        data = _read_json(args.input)

        def dist(entries):
            return {CountVector({int(k): int(v) for k, v in vec.items()}): to_number(w)
                    for vec, w in entries}

        mu, nu = dist(data["mu"]), dist(data["nu"])
        try:
            cert = oracles.check_domination(mu, nu, to_number(data["lambda1"]), to_number(data["lambda2"]))
        except oracles.Infeasible as exc:
            _emit({"feasible": False, "optimum": exc.optimum}, args.output)
            return EXIT_FAILED
        _emit({"feasible": True, "lambda1": cert.lambda1, "lambda2": cert.lambda2,
               "coupling": [[dict(w.counts), dict(z.counts), r] for (w, z), r in cert.coupling.items()]},
              args.output)
    elif kind == "verify":
        data = _read_json(args.input)
        if args.what == "3ap":
            ok = oracles.verify_3ap_free(data)
        elif args.what == "sidon":
            A = generators.SidonSet(tuple(data["group"]), tuple(tuple(a) for a in data["elements"]),
                                    int(data.get("fold", 3)))
            ok = oracles.verify_kfold_sidon(A)
        else:
            H = Graph.from_edges([tuple(e) for e in data["H"]])
            ok = oracles.verify_exactly_one_copy([tuple(e) for e in data["edges"]], H)
        _emit({"verified": ok}, args.output)
        return EXIT_OK if ok else EXIT_FAILED
    return EXIT_OK


def cmd_experiment(args) -> int:
    plan = harness.ExperimentPlan.from_json(_read_json(args.plan))
    rows = harness.run_plan(plan)
    _emit(harness.rows_to_csv(rows), args.output)
    return EXIT_FAILED if any(r["kind"] == "unresolved" for r in rows) else EXIT_OK


def cmd_lemma(args) -> int:
    ids = sorted(harness.LEMMA_CHECKS) if args.id == "all" else [args.id]
    params = _read_json(args.params) if args.params else None
    report, failed = [], False
    for i, lid in enumerate(ids):
        try:
            r = harness.lemma_check(lid, params if len(ids) == 1 else None, args.trials,
                                    RngSeed(args.seed, 0).spawn(i))
        except SkippedWithReason as exc:
            report.append({"lemma": lid, "status": "skipped", "reason": exc.reason})
            failed = True
            continue
        failed |= not r.passed
        report.append({"lemma": lid, "status": "pass" if r.passed else "fail", "frequency": r.frequency,
                       "bound": r.bound, "std_error": r.std_error, "m": r.m, "trials": r.trials,
                       "params": r.params, "detail": r.detail})
    _emit(report if len(ids) > 1 else report[0], args.output)
    return EXIT_FAILED if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="subtest", description="Edge-distribution property testing lab")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a hard instance as JSON")
    g.add_argument("--family", required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--side", choices=("yes", "no", "pair"), default="no")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("test", help="run the canonical tester on sampled labels")
    t.add_argument("--instance", required=True)
    t.add_argument("--m", type=int, required=True)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--trials", type=int, default=1)
    t.add_argument("--property", help="override the instance property (bip, clique, hom:H.json, ...)")
    t.add_argument("--json", action="store_true", help="print one verdict with its witness")
    t.add_argument("-o", "--output")
    t.set_defaults(func=cmd_test)

    w = sub.add_parser("witness", help="square witness, descendant and case split")
    w.add_argument("--instance", required=True)
    w.add_argument("--eps")
    w.add_argument("-o", "--output")
    w.set_defaults(func=cmd_witness)

    o = sub.add_parser("oracle", help="exact brute-force oracles")
    osub = o.add_subparsers(dest="oracle", required=True)
    for name in ("distance", "violations"):
        q = osub.add_parser(name)
        q.add_argument("--instance", required=True)
        q.add_argument("--unlimited", action="store_true", help="lift the vertex-count caps")
        q.add_argument("-o", "--output")
    q = osub.add_parser("tv")
    q.add_argument("--family", required=True)
    q.add_argument("--n", type=int, default=1)
    q.add_argument("--m", type=int, required=True)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("-o", "--output")
    q = osub.add_parser("dominate")
    q.add_argument("--input", required=True)
    q.add_argument("-o", "--output")
    q = osub.add_parser("verify")
    q.add_argument("what", choices=("3ap", "sidon", "one-copy"))
    q.add_argument("--input", required=True)
    q.add_argument("-o", "--output")
    o.set_defaults(func=cmd_oracle)

    e = sub.add_parser("experiment", help="run a plan and write a CSV report")
    e.add_argument("--plan", required=True)
    e.add_argument("-o", "--output")
    e.set_defaults(func=cmd_experiment)

    lm = sub.add_parser("lemma", help="run an empirical lemma check")
    lm.add_argument("--id", required=True, help="lemma id or 'all'")
    lm.add_argument("--params")
    lm.add_argument("--trials", type=int)
    lm.add_argument("--seed", type=int, default=0)
    lm.add_argument("-o", "--output")
    lm.set_defaults(func=cmd_lemma)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SubtestError as exc:
        log.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
