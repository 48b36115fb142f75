"""Full analysis pipeline and its JSON report."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

from . import oracle
from .cascade import NotASinglePath, cascade_report, find_irreducible
from .decomposition import (
    DEFAULT_STATE_CAP,
    ConservationMixing,
    NoCompatiblePartition,
    StateSpaceTooLarge,
    find_decomposed_state_space,
)
from .io import NetworkFile
from .linalg import semipositive_left_nullspace, rank
from .model import AssumptionViolated, conservation_data, validate_support_rule
from .reduction import IncompatibleMap, reduce_network
from .stationary import NotFound, NotMassAction, Rejected, check_complex_balanced, product_form_pi, solve_complex_balance

SCHEMA_VERSION = 1

ERROR_CODES = {
    AssumptionViolated: "support-rule",
    ConservationMixing: "conservation-mixing",
    StateSpaceTooLarge: "state-space-too-large",
    NoCompatiblePartition: "no-compatible-partition",
    IncompatibleMap: "incompatible-map",
}


@dataclass
class PipelineOptions:
    max_bounded_states: int = DEFAULT_STATE_CAP
    coeff_cap: int = 64
    stationary: str | None = None  # "from-file" or "solve"
    oracle_box: tuple[int, ...] | None = None
    verify: bool = False
    drain_fallback: bool = True
    support_samples: int = 200


def _q(v) -> Any:
    """JSON-friendly number: ints stay ints, other rationals become strings."""
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    if isinstance(v, Fraction):
        return v.numerator if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if isinstance(v, float):
        return v
    return int(v)


def _state_set_json(cert) -> dict:
    s = cert.state_set
    return {
        "bounded_species": list(s.bounded_names),
        "bounded_states": [list(y) for y in s.bounded_states],
        "open_species": list(s.open_names),
        "zero_species": list(s.zero_names),
        "restricted_species": list(s.restricted_names),
        "description": s.describe(),
    }


def run_pipeline(nf: NetworkFile, options: PipelineOptions | None = None) -> dict:
    """decompose → reduce → cascade certification → optional stationary/oracle.

    Returns the report and never raises for analysis failures; those are
    recorded under ``error`` with a stable code.
    """
    options = options or PipelineOptions()
    net = nf.network
    report: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "network": {
            "path": nf.path,
            "species": list(net.species),
            "reactions": net.K,
            "initial_state": list(nf.x0),
        },
    }
    support = validate_support_rule(net, sample_budget=options.support_samples, strict=False)
    report["support_rule"] = {"ok": support.ok, "checked": support.checked,
                              "violations": [str(v) for v in support.violations[:5]]}
    cd = conservation_data(net, nf.x0)
    semipos = semipositive_left_nullspace(net.stoichiometry.tolist())
    report["conservation"] = {
        "relations": cd.n,
        "gamma": [[int(v) for v in cd.gamma[:, j]] for j in range(cd.n)],
        "c": [int(v) for v in cd.c],
        "semipositive_minimal": [list(map(int, v)) for v in semipos],
        "semipositive_rank": rank(semipos) if semipos else 0,
    }
    try:
        dss = find_decomposed_state_space(net, nf.x0, cap=options.max_bounded_states)
        reduced = reduce_network(dss)
    except tuple(ERROR_CODES) as exc:
        report["error"] = {"code": ERROR_CODES[type(exc)], "message": str(exc)}
        report["verdict"] = "Error"
        return report
    cls = dss.classification
    names = dss.permuted.species
    d_b, d_f, d_r = dss.dims
    report["classification"] = {
        "bounded": [net.species[i] for i in cls.bounded],
        "free": [net.species[i] for i in cls.free],
        "restricted": [net.species[i] for i in cls.restricted],
        "bounds": {net.species[i]: _q(b) for i, b in enumerate(cls.bounds)},
        "sigma": list(dss.sigma.one_based()),
        "dims": [d_b, d_f, d_r],
    }
    report["decomposed"] = {
        "order": list(names),
        "bounded_state_count": len(dss.bounded_space),
        "bounded_states": [list(y) for y in dss.bounded_space.states[:500]],
        "bounded_states_truncated": len(dss.bounded_space) > 500,
        "map": dss.map.to_text(reduced.free_names, reduced.restricted_names),
        "compatible": dss.map.compatible,
    }
    res = find_irreducible(reduced, dss.bounded_space.states, options.coeff_cap, options.drain_fallback)
    free_names = reduced.free_names
    bct = res.bct
    report["bct"] = {
        "nodes": [
            {
                "C": [list(res.fc.states[i]) for i in sorted(C)],
                "A": [free_names[j] for j in sorted(A)],
                "level": bct.level[(C, A)],
            }
            for C, A in bct.nodes
        ],
        "edges": [list(e) for e in bct.edges],
        "leaves": len(bct.leaves),
        "minimal_leaves": len(bct.minimal_leaves),
    }
    try:
        cr = cascade_report(res.fc, bct)
        report["cascade"] = {
            "birth_increments": cr.birth_increments,
            "death_increments": cr.death_increments,
            "births_equal_deaths": cr.births_equal_deaths,
        }
    except NotASinglePath:
        report["cascade"] = None
    report["leaves"] = [
        {
            "C": [list(c) for c in lf.C],
            "A": list(lf.A),
            "minimal": lf.minimal,
            "death_exhaustive": lf.death_exhaustive,
            "degradability": {
                n: {"verdict": v.verdict, "method": v.method,
                    "coefficients": list(v.coefficients) if v.coefficients else None,
                    "reactions": [k + 1 for k in v.reactions]}
                for n, v in sorted(lf.degradability.items())
            },
            "certified": lf.certified,
        }
        for lf in res.leaves
    ]
    certs = []
    for c in res.certificates:
        full_sigma = c.sigma3.compose(dss.sigma)  # σ3 acts on σ-ordered positions
        certs.append({
            "C": [list(y) for y in c.C],
            "A": list(c.A),
            "sigma3": list(c.sigma3.one_based()),
            "sigma_total": list(full_sigma.one_based()),
            "unique_in_slab": c.unique_in_slab,
            "complete": c.complete,
            "state_set": _state_set_json(c),
        })
    report["certificates"] = certs
    report["verdict"] = res.verdict
    report["obstructions"] = list(res.obstructions)

    if options.stationary:
        report["stationary"] = _stationary_section(nf, res, options.stationary)
    if options.verify or options.oracle_box is not None:
        box = options.oracle_box or oracle.default_box(net, nf.x0)
        if len(box) == 1:
            box = tuple(box) * net.d
        report["oracle"] = _oracle_section(nf, dss, res, box)
    return report


def _stationary_section(nf: NetworkFile, res, mode: str) -> dict:
    net = nf.network
    out: dict[str, Any] = {"mode": mode}
    try:
        if mode == "from-file":
            if not nf.balanced_r:
                return {**out, "status": "no balanced_r in file"}
            r = [nf.balanced_r.get(n, Fraction(1)) for n in net.species]
            chk = check_complex_balanced(net, r)
        else:
            chk = solve_complex_balance(net)
    except NotFound as exc:
        return {**out, "status": "NotFound", "message": str(exc)}
    except NotMassAction as exc:
        return {**out, "status": "not mass action", "message": str(exc)}
    if isinstance(chk, Rejected):
        return {**out, "status": "Rejected", "complex": list(chk.complex), "defect": chk.defect}
    out["status"] = "ComplexBalanced"
    out["r"] = {n: _q(v) for n, v in zip(net.species, chk.r)}
    out["residual"] = chk.residual
    dists = []
    for c in res.certificates:
        if c.state_set.restricted_names:
            dists.append({"A": list(c.A), "status": "restricted species present"})
            continue
        pi = product_form_pi({n: float(v) for n, v in zip(net.species, chk.r)}, c.state_set)
        dists.append({"A": list(c.A), "C_size": len(c.C), "log_normalizer": pi.log_Znorm, "split": pi.split})
    out["distributions"] = dists
    return out


def _oracle_section(nf: NetworkFile, dss, res, box) -> dict:
    net = nf.network
    verdicts = []
    for c in res.certificates:
        v = oracle.verify_certificate(c.state_set, net, box, c.unique_in_slab, dss)
        verdicts.append({"A": list(c.A), "status": v.status, "detail": v.detail})
    out: dict[str, Any] = {"box": list(box), "certificates": verdicts}
    try:
        graph = oracle.build_graph(net, dss.consdata, box, cap=200_000)
        cls = oracle.scc_classes(graph)
        out["graph_states"] = len(graph.states)
        out["classes"] = [
            {"status": cls.status(i), "size": len(c), "sample": [list(graph.states[j]) for j in sorted(c)[:5]]}
            for i, c in enumerate(cls.classes)
            if cls.no_in_box_exit[i]
        ]
    except oracle.GraphTooLarge as exc:
        out["graph"] = f"skipped: {exc}"
    return out


def to_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=False, ensure_ascii=False) + "\n"
