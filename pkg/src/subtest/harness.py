"""Monte Carlo experiments: rejection rates, sample-complexity thresholds,
log-log scaling fits, empirical lemma checks and CSV reports."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .core import (EdgeDistribution, MassFunction, RngSeed, as_seed, ceil_snap, degree_mass,
                   draw_indices, epsilon_prune, marginal, process_J, process_P, process_S,
                   process_W, to_number)
from .errors import NotFarEnough, SkippedWithReason, Unresolved
from .generators import TestInstance, bipartite_hardness_pair, family_instance
from .graphs import complete, find_copy, square
from .oracles import exact_distance, min_weight_cover
from .testers import LabeledSample, make_tester, hom_sample_budget, hom_tester
from .witness import concentrated_budget, dilute_budget, hop_tables, square_witness

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
CSV_COLUMNS = ("kind", "family", "n", "side", "m", "trials", "rejections", "rejection_rate",
               "std_error", "slope", "ci_low", "ci_high")


# ---------------------------------------------------------------- rejection rates

@dataclass(frozen=True)
class RejectionEstimate:
    rate: float
    std_error: float
    rejections: int
    trials: int

    def __iter__(self):
        # unpacks as (rate, std_error)
        yield self.rate
        yield self.std_error


def binomial_std_error(rate: float, trials: int) -> float:
    return math.sqrt(rate * (1 - rate) / trials) if trials else 0.0


def estimate_rejection(instance: TestInstance, tester: Callable | None, m: int, trials: int,
                       seed) -> RejectionEstimate:
    """Fraction of trials whose m labeled samples make the tester reject.

    Trial t draws from ``seed.spawn(t)``.  Every tester here depends only on
    the set of distinct labeled samples, so each trial passes the distinct
    sampled support points (nil dropped) instead of the raw sequence.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    seed = as_seed(seed)
    tester = tester or make_tester(instance.property)
    support, labels = instance.labeled_support()
    points = [LabeledSample(e, lab) for e, lab in zip(support, labels)]
    rejections = 0
    for t in range(trials):
        if m == 0:
            continue
        idx = draw_indices(instance.mu, m, seed.spawn(t))
        seen = np.unique(idx[idx >= 0])
        verdict = tester([points[i] for i in seen])
        rejections += bool(verdict.rejected if hasattr(verdict, "rejected") else verdict)
    rate = rejections / trials
    return RejectionEstimate(rate, binomial_std_error(rate, trials), rejections, trials)


# ---------------------------------------------------------------- thresholds

@dataclass(frozen=True)
class ThresholdResult:
    m_star: int
    estimate: RejectionEstimate
    visited: tuple


def _crosses(est: RejectionEstimate, target: float) -> bool:
    return est.rate >= target + 2 * est.std_error


def threshold_search(family, n: int, tester: Callable | None = None, target: float = 2 / 3,
                     trials: int = 500, seed=0, m_cap: int = 2 ** 18,
                     params: Mapping | None = None) -> ThresholdResult:
    """Smallest m whose rejection rate clears ``target + 2 * std_error``.

    ``family`` is a family name or a callable ``(n, seed) -> TestInstance``
    producing no-instances.  The schedule doubles from m = 1 until a crossing
    and then bisects the bracket; m is evaluated on stream ``seed.spawn(1).spawn(m)``.
    """
    seed = as_seed(seed)
    params = dict(params or {})
    if callable(family):
        instance = family(n, seed.spawn(0))
    else:
        instance = family_instance(family, n, "no", seed.spawn(0), **params)
    cache: dict = {}
    visited = []

    def evaluate(m):
        if m not in cache:
            cache[m] = estimate_rejection(instance, tester, m, trials, seed.spawn(1).spawn(m))
            visited.append(m)
        return cache[m]

    lo, hi = 0, 1
    while not _crosses(evaluate(hi), target):
        if hi >= m_cap:
            raise Unresolved(m_cap)
        lo, hi = hi, min(2 * hi, m_cap)
    # invariant: lo fails (or is 0), hi crosses
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _crosses(evaluate(mid), target):
            hi = mid
        else:
            lo = mid
    return ThresholdResult(hi, cache[hi], tuple(visited))


# ---------------------------------------------------------------- scaling fits

@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    ci_low: float
    ci_high: float
    points: tuple


def _ls_slope(x: np.ndarray, y: np.ndarray) -> tuple:
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


def scaling_fit(rows: Iterable, bootstrap: int = 2000, seed=0, level: float = 0.95) -> FitResult:
    """Least-squares slope of ``log m_star`` on ``log n`` with a bootstrap interval.

    ``rows`` holds ``(n, m_star)`` pairs or mappings with ``n`` and ``m_star``
    (or ``m``).  Rows whose m_star is None are excluded with a warning.
    Resamples with fewer than two distinct n are redrawn.
    """
    pts = []
    for r in rows:
        if isinstance(r, Mapping):
            n, m = r["n"], r.get("m_star", r.get("m"))
        else:
            n, m = r
        if m is None or m == "":
            warnings.warn(f"unresolved cell at n={n} excluded from the fit", stacklevel=2)
            continue
        pts.append((float(n), float(m)))
    if len({p[0] for p in pts}) < 3:
        raise ValueError("a scaling fit needs at least three resolved grid points")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    slope, intercept = _ls_slope(x, y)
    gen = as_seed(seed).generator()
    boots = []
    while len(boots) < bootstrap:
        idx = gen.integers(0, len(pts), size=len(pts))
        if len(set(x[idx])) < 2:
            continue
        boots.append(_ls_slope(x[idx], y[idx])[0])
    alpha = (1 - level) / 2
    lo, hi = np.quantile(boots, [alpha, 1 - alpha])
    return FitResult(slope, intercept, float(lo), float(hi), tuple(pts))


# ---------------------------------------------------------------- lemma checks

@dataclass(frozen=True)
class LemmaResult:
    lemma_id: str
    passed: bool
    frequency: float
    bound: float
    std_error: float
    trials: int
    m: int
    params: Mapping
    detail: Mapping = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.lemma_id}: frequency={self.frequency:.4f} bound={self.bound:.4f} "
                f"3sigma={3 * self.std_error:.4f} m={self.m} trials={self.trials}")


def _birthday_result(lemma_id, hits, trials, bound, m, params, detail=None) -> LemmaResult:
    freq = hits / trials
    sigma = binomial_std_error(bound, trials)
    return LemmaResult(lemma_id, freq >= bound - 3 * sigma, freq, bound, sigma, trials, m,
                       dict(params), detail or {})


def _domination_result(lemma_id, lhs_sizes, rhs_sizes, delta, m, params, detail=None) -> LemmaResult:
    """Compare ``Pr[|w| < j]`` on both sides for every threshold j.

    ``lhs`` is the dominated process and ``rhs`` the dominating one.  Each
    ``{w : |supp w| < j}`` is downward closed, so a (1 - delta, 1) domination
    forces ``Pr_rhs <= Pr_lhs + delta``.
    """
    lhs = np.asarray(lhs_sizes)
    rhs = np.asarray(rhs_sizes)
    trials = len(lhs)
    worst = (-math.inf, 0.0, 0.0, 0)
    for j in range(0, int(max(lhs.max(initial=0), rhs.max(initial=0))) + 2):
        p, q = float(np.mean(lhs < j)), float(np.mean(rhs < j))
        sigma = math.sqrt(p * (1 - p) / trials + q * (1 - q) / len(rhs))
        gap = q - p - delta - 3 * sigma
        if gap > worst[0]:
            worst = (gap, q - p, sigma, j)
    gap, diff, sigma, j = worst
    info = {"worst_threshold": j, "mean_lhs_size": float(lhs.mean()), "mean_rhs_size": float(rhs.mean())}
    info.update(detail or {})
    return LemmaResult(lemma_id, gap <= 0, diff, delta, sigma, trials, m, dict(params), info)


def _skip(lemma_id, reason):
    raise SkippedWithReason(lemma_id, reason)


def _grid_mass(params) -> MassFunction:
    n, r = int(params["n"]), int(params["r"])
    if params.get("p", "uniform") == "uniform":
        w = Fraction(1, n * r)
        weights = {(a, b): w for a in range(1, n + 1) for b in range(1, r + 1)}
    else:
        weights = {(a + 1, b + 1): to_number(v) for a, row in enumerate(params["p"])
                   for b, v in enumerate(row)}
    return MassFunction(weights, kind="grid")


def check_birthday_minus_max(params, trials, seed) -> LemmaResult:
    lid = "birthday_minus_max"
    p = _grid_mass(params)
    eps, delta = float(params["epsilon"]), float(params["delta"])
    n = int(params["n"])
    rows: dict = {}
    for (a, b), w in p.items():
        rows.setdefault(a, []).append(w)
    excess = sum(float(sum(ws) - max(ws)) for ws in rows.values())
    if excess < eps:
        _skip(lid, f"row mass beyond the row maximum is {excess:.4g} < epsilon = {eps}")
    m = 64 * ceil_snap(math.log(2 / delta) * math.sqrt(n) / eps)
    first = np.array([a for a, _ in p.support()])
    hits = 0
    for t in range(trials):
        idx = draw_indices(p, m, seed.spawn(t))
        seen = np.unique(idx[idx >= 0])
        rows_seen = first[seen]
        hits += len(rows_seen) > len(np.unique(rows_seen))
    return _birthday_result(lid, hits, trials, 1 - delta, m, params, {"excess_mass": excess})


def check_classical_birthday(params, trials, seed) -> LemmaResult:
    lid = "classical_birthday"
    k = int(params["k"])
    q = [to_number(v) for v in params["q"]]
    total = sum(q)
    if total > Fraction(1, k) + Fraction(1, 10 ** 12) or sum(v ** k for v in q) == 0:
        _skip(lid, f"row masses sum to {total}, need at most 1/k with some positive row")
    rest = Fraction(1, k) - Fraction(total) if isinstance(total, (int, Fraction)) else 1 / k - total
    n = len(q)
    weights = {(i + 1, j): v for i, v in enumerate(q) for j in range(1, k + 1)}
    if rest > 0:
        weights.update({(n + 1, j): rest for j in range(1, k + 1)})
    qt = MassFunction(weights, kind="grid")
    m = max(int(params.get("m", 0)), ceil_snap(18 * k * float(sum(v ** k for v in q)) ** (-1 / k)))
    row = np.array([i for i, _ in qt.support()])
    hits = 0
    for t in range(trials):
        idx = draw_indices(qt, m, seed.spawn(t))
        rows_seen = row[np.unique(idx[idx >= 0])]
        rows_seen = rows_seen[rows_seen <= n]
        hits += bool(np.any(np.bincount(rows_seen, minlength=n + 1) == k))
    return _birthday_result(lid, hits, trials, 0.8, m, params)


def check_hypergraph_birthday(params, trials, seed) -> LemmaResult:
    lid = "hypergraph_birthday"
    V = int(params["vertices"])
    edges = [frozenset(e) for e in params["hyperedges"]]
    k = len(edges[0])
    if params.get("p", "uniform") == "uniform":
        p = MassFunction({v: Fraction(1, V) for v in range(1, V + 1)}, kind="vertex")
    else:
        p = MassFunction({i + 1: to_number(w) for i, w in enumerate(params["p"])}, kind="vertex")
    eps = to_number(params["epsilon"])
    cover_mass, _ = min_weight_cover(edges, {v: p.weights.get(v, 0) for v in range(1, V + 1)})
    if cover_mass < eps:
        _skip(lid, f"a vertex cover has mass {cover_mass} < epsilon = {eps}")
    m = ceil_snap(18 * k * k * V ** ((k - 1) / k) / float(eps))
    support = p.support()
    members = [np.array([support.index(v) for v in sorted(e)]) for e in edges]
    hits = 0
    for t in range(trials):
        idx = draw_indices(p, m, seed.spawn(t))
        seen = np.zeros(len(support), dtype=bool)
        seen[idx[idx >= 0]] = True
        hits += any(seen[e].all() for e in members)
    return _birthday_result(lid, hits, trials, 0.8, m, params, {"min_cover_mass": str(cover_mass)})


def _uniform_edges(params) -> EdgeDistribution:
    n = int(params["n"])
    edges = params.get("edges", "complete")
    if edges == "complete":
        edges = complete(n).edges
    return EdgeDistribution.uniform(n, [tuple(e) for e in edges])


def _square_hits(p: EdgeDistribution, m: int, trials: int, seed: RngSeed) -> int:
    support = p.support()
    hits = 0
    for t in range(trials):
        idx = draw_indices(p, m, seed.spawn(t))
        seen = [support[i] for i in np.unique(idx[idx >= 0])]
        hits += find_copy(square(), seen) is not None
    return hits


def check_dilute_case(params, trials, seed) -> LemmaResult:
    lid = "dilute_case"
    p = _uniform_edges(params)
    eps = to_number(params["epsilon"])
    hopd = hop_tables(p).hopd_total()
    if hopd < eps:
        _skip(lid, f"HopD total {hopd} < epsilon = {eps}")
    m = dilute_budget(p.n, eps)
    hits = _square_hits(p, m, trials, seed)
    return _birthday_result(lid, hits, trials, 2 / 3, m, params, {"hopd_total": str(hopd)})


def check_concentrated_case_prelim(params, trials, seed) -> LemmaResult:
    lid = "concentrated_case_prelim"
    copies = int(params["squares"])
    edges = []
    for i in range(copies):
        a, b, c, d = (4 * i + j for j in (1, 2, 3, 4))
        edges += [(a, b), (b, c), (c, d), (a, d)]
    p = EdgeDistribution.uniform(4 * copies, edges)
    eps = to_number(params["epsilon"])
    try:
        q = square_witness(p, eps)
    except NotFarEnough as exc:
        _skip(lid, f"no epsilon-square-witness: {exc}")
    m = concentrated_budget(q)
    hits = _square_hits(p, m, trials, seed)
    return _birthday_result(lid, hits, trials, 0.8, m, params, {"witness_mass": str(q.total())})


def _vertex_function(params, n) -> MassFunction:
    f = params.get("f", "uniform")
    if f == "uniform":
        return MassFunction({a: Fraction(1, n) for a in range(1, n + 1)}, domain=range(1, n + 1),
                            kind="vertex")
    return MassFunction({a + 1: to_number(w) for a, w in enumerate(f)}, domain=range(1, n + 1),
                        kind="vertex")


def check_tree_bipartite_birthday_paradox(params, trials, seed) -> LemmaResult:
    """Both parts of the two-batch domination, compared on the down-sets ``|w| < j``."""
    from .core import BirthdayParams
    lid = "tree_bipartite_birthday_paradox"
    n = int(params["n"])
    bp = BirthdayParams(float(params["epsilon"]), float(params["delta"]), float(params["C"]),
                        float(params["beta"]), float(params["gamma"]))
    bad = bp.tree_bipartite_ok()
    if bad:
        _skip(lid, "; ".join(bad))
    m1, m2, m3 = bp.sample_sizes(n)
    eps = to_number(params["epsilon"])
    # part (1): f on [n]
    g = epsilon_prune(_vertex_function(params, n), eps, n)
    lhs1, rhs1 = [], []
    for t in range(trials):
        s = seed.spawn(t)
        lhs1.append(len(process_S(g, m3, s.spawn(0), indicator=True).support()))
        w = process_P(lambda r: process_S(g, m1, r, indicator=True),
                      lambda r: process_S(g, m2, r, indicator=True), s.spawn(1))
        rhs1.append(len(w.support()))
    part1 = _domination_result(lid, lhs1, rhs1, bp.delta, m3, params)
    # part (2): f uniform on [n]^2
    pairs = {(a, b): Fraction(1, n * n) for a in range(1, n + 1) for b in range(1, n + 1)}
    g2 = epsilon_prune(MassFunction(pairs, axes=("a", "b"), kind="tuple"), eps, n * n)
    pi1 = MassFunction({k[0]: w for k, w in marginal(g2, ["a"]).items()}, domain=range(1, n + 1),
                       kind="vertex")
    pi2 = MassFunction({k[0]: w for k, w in marginal(g2, ["b"]).items()}, domain=range(1, n + 1),
                       kind="vertex")
    lhs2, rhs2 = [], []
    for t in range(trials):
        s = seed.spawn(trials + t)
        lhs2.append(len(process_S(pi2, m3, s.spawn(0), indicator=True).support()))
        w = process_J(lambda r: process_S(pi1, m1, r, indicator=True),
                      lambda r: process_S(g2, m2, r, indicator=True), s.spawn(1))
        rhs2.append(len(w.support()))
    part2 = _domination_result(lid, lhs2, rhs2, bp.delta, m3, params)
    worse = part1 if part1.frequency - 3 * part1.std_error >= part2.frequency - 3 * part2.std_error else part2
    detail = {"part1_gap": part1.frequency, "part2_gap": part2.frequency, "m1": m1, "m2": m2, "m3": m3}
    return LemmaResult(lid, part1.passed and part2.passed, worse.frequency, bp.delta, worse.std_error,
                       trials, m3, dict(params), detail)


def check_sample_number_control(params, trials, seed) -> LemmaResult:
    lid = "sample_number_control"
    n = int(params["n"])
    gamma, eps, delta, C = (float(params[k]) for k in ("gamma", "epsilon", "delta", "C"))
    if C < 1:
        _skip(lid, "C must be at least 1")
    f = _vertex_function(params, n)
    small = [a for a, w in f.items() if w < eps / n]
    if small:
        _skip(lid, f"atom {small[0]} is positive but below epsilon / n")
    m = ceil_snap(C * n ** (1 - gamma))
    caps = np.array([2 * n / (gamma * eps) * float(w) for w in f.weights.values()])
    hits = 0
    for t in range(trials):
        idx = draw_indices(f, m, seed.spawn(t))
        counts = np.bincount(idx[idx >= 0], minlength=len(caps))
        hits += bool(np.all(counts <= caps))
    return _birthday_result(lid, hits, trials, 1 - delta, m, params)


def check_hom_union_bound(params, trials, seed) -> LemmaResult:
    """Every assignment map is hit by a sampled violating edge in the stated m."""
    lid = "hom_union_bound"
    n, k = int(params["n"]), int(params["k"])
    eps = to_number(params["epsilon"])
    _, no = bipartite_hardness_pair(n, k, seed.spawn(0))
    dist = exact_distance(no.edges, no.mu, no.property, no.n)
    if dist < eps:
        _skip(lid, f"instance distance {dist} < epsilon = {eps}")
    colors = len(no.property.H.vertices)
    m = max(int(params.get("m", 0)), hom_sample_budget(no.n, colors, eps))
    est = estimate_rejection(no, lambda s: hom_tester(no.property.H, s), m, trials, seed.spawn(1))
    return _birthday_result(lid, est.rejections, trials, 2 / 3, m, params, {"distance": str(dist)})


def check_dilute_domination(params, trials, seed) -> LemmaResult:
    lid = "dilute_domination"
    p = _uniform_edges(params)
    n = p.n
    eps, delta = float(params["epsilon"]), float(params["delta"])
    B = params.get("B", "all")
    B = list(range(1, n + 1)) if B == "all" else [int(b) for b in B]
    deg = degree_mass(p)
    low = [b for b in B if float(deg[b] if b in deg.weights else 0) < eps / (2 * n)]
    if low:
        _skip(lid, f"vertex {low[0]} has degree mass below epsilon / (2n)")
    m = ceil_snap(6 * n * math.log(2 * n / delta) / eps)
    walk = hop_tables(p, B).walk
    lhs, rhs = [], []
    for t in range(trials):
        s = seed.spawn(t)
        lhs.append(len(process_S(walk, m, s.spawn(0)).support()))
        rhs.append(len(process_W(p, 5 * m, s.spawn(1)).support()))
    return _domination_result(lid, lhs, rhs, delta, m, params)


LEMMA_CHECKS: dict = {
    "birthday_minus_max": check_birthday_minus_max,
    "classical_birthday": check_classical_birthday,
    "hypergraph_birthday": check_hypergraph_birthday,
    "dilute_case": check_dilute_case,
    "concentrated_case_prelim": check_concentrated_case_prelim,
    "tree_bipartite_birthday_paradox": check_tree_bipartite_birthday_paradox,
    "sample_number_control": check_sample_number_control,
    "hom_union_bound": check_hom_union_bound,
    "dilute_domination": check_dilute_domination,
}


def default_lemma_params(lemma_id: str) -> dict:
    """Parameters shipped in ``subtest/data/lemmas/<lemma_id>.json``."""
    ref = resources.files("subtest").joinpath("data").joinpath("lemmas").joinpath(f"{lemma_id}.json")
    return json.loads(ref.read_text())


def lemma_check(lemma_id: str, params: Mapping | None = None, trials: int | None = None,
                seed=0) -> LemmaResult:
    """Run one registered lemma experiment; raises SkippedWithReason on bad hypotheses."""
    if lemma_id not in LEMMA_CHECKS:
        raise KeyError(f"unknown lemma {lemma_id!r}; known: {sorted(LEMMA_CHECKS)}")
    merged = default_lemma_params(lemma_id)
    merged.update(params or {})
    trials = int(trials or merged.pop("trials", 1000))
    merged.pop("trials", None)
    return LEMMA_CHECKS[lemma_id](merged, trials, as_seed(seed))


def run_lemma_suite(trials: int | None = None, seed=0) -> tuple:
    """All registered checks at their default parameters: (results, skipped)."""
    results, skipped = [], []
    for i, lid in enumerate(sorted(LEMMA_CHECKS)):
        try:
            results.append(lemma_check(lid, trials=trials, seed=as_seed(seed).spawn(i)))
        except SkippedWithReason as exc:
            skipped.append(exc)
    return results, skipped


# ---------------------------------------------------------------- plans and reports

@dataclass(frozen=True)
class ExperimentPlan:
    """Family, n grid, sides, seeds, m schedule and trials for a batch of cells.

    ``m_schedule`` is a list of m values, ``"search"`` for threshold search
    on the no side, or ``"budget"`` for the tester's stated sample budget.
    """

    family: str
    n_values: tuple
    sides: tuple = ("no",)
    seeds: tuple = (0,)
    m_schedule: object = "search"
    trials: int = 500
    target: float = 2 / 3
    params: Mapping = field(default_factory=dict)
    master_seed: int = 0
    fit: bool = True
    m_cap: int = 2 ** 18

    def __post_init__(self):
        if self.trials < 30:
            raise ValueError("plans need at least 30 trials per cell")

    @classmethod
    def from_json(cls, data: Mapping) -> "ExperimentPlan":
        data = dict(data)
        data["n_values"] = tuple(data.pop("n", data.pop("n_values", ())))
        for key in ("sides", "seeds"):
            if key in data:
                data[key] = tuple(data[key])
        if isinstance(data.get("m_schedule"), list):
            data["m_schedule"] = tuple(data["m_schedule"])
        return cls(**data)


def _cell_seed(plan: ExperimentPlan, n: int, side: str, seed: int) -> RngSeed:
    side_idx = {"yes": 0, "no": 1}[side]
    return RngSeed(plan.master_seed, 0).spawn(n).spawn(side_idx).spawn(seed)


def _budget_m(inst: TestInstance, eps) -> int:
    from .testers import subgraph_sample_budget
    prop = inst.property
    if prop.kind == "hom":
        return hom_sample_budget(inst.n, len(prop.H.vertices), eps)
    if prop.kind == "free":
        return subgraph_sample_budget(prop.H, inst.n, eps)
    raise ValueError("no stated budget for this property")


def _run_cell(plan: ExperimentPlan, n: int, side: str, seed: int) -> list:
    cseed = _cell_seed(plan, n, side, seed)
    base = {"family": plan.family, "n": n, "side": side}
    if plan.m_schedule == "search":
        try:
            res = threshold_search(plan.family, n, None, plan.target, plan.trials, cseed,
                                   plan.m_cap, plan.params)
        except Unresolved as exc:
            return [{**base, "kind": "unresolved", "m": exc.m_cap, "trials": plan.trials}]
        est = res.estimate
        return [{**base, "kind": "threshold", "m": res.m_star, "trials": est.trials,
                 "rejections": est.rejections, "rejection_rate": est.rate, "std_error": est.std_error}]
    inst = family_instance(plan.family, n, side, cseed.spawn(0), **plan.params)
    if plan.m_schedule == "budget":
        eps = inst.certified_distance or Fraction(1, 3)
        schedule = [_budget_m(inst, eps)]
    else:
        schedule = list(plan.m_schedule)
    rows = []
    for m in schedule:
        est = estimate_rejection(inst, None, int(m), plan.trials, cseed.spawn(1).spawn(int(m)))
        rows.append({**base, "kind": "cell", "m": int(m), "trials": est.trials,
                     "rejections": est.rejections, "rejection_rate": est.rate,
                     "std_error": est.std_error})
    return rows


def _run_cell_args(args):
    return _run_cell(*args)


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("SUBTEST_THREADS", "1")))
    except ValueError:
        return 1


def run_plan(plan: ExperimentPlan) -> list:
    """Rows for every (n, side, seed) cell, in grid order, plus an optional fit row."""
    cells = [(plan, n, side, seed) for n in plan.n_values for side in plan.sides for seed in plan.seeds]
    workers = min(thread_count(), len(cells)) or 1
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_cell_args, cells))
    else:
        chunks = [_run_cell(*c) for c in cells]
    rows = [r for chunk in chunks for r in chunk]
    thresholds = [r for r in rows if r["kind"] == "threshold"]
    if plan.fit and plan.m_schedule == "search" and len({r["n"] for r in thresholds}) >= 3:
        fit = scaling_fit([(r["n"], r["m"]) for r in thresholds], seed=plan.master_seed)
        rows.append({"kind": "fit", "family": plan.family, "slope": fit.slope,
                     "ci_low": fit.ci_low, "ci_high": fit.ci_high})
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(round(v, 12))
    return str(v)


def rows_to_csv(rows: Sequence[Mapping]) -> str:
    """CSV text: a ``schema=1`` line, the fixed header, then one line per row."""
    buf = io.StringIO()
    buf.write(f"schema={SCHEMA_VERSION}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow([_fmt(r.get(c)) for c in CSV_COLUMNS])
    return buf.getvalue()
