"""Acceptance suite: one PASS/FAIL line per criterion with its timing.

Run with ``pytest tests/test_acceptance.py -s`` or directly with
``python3 tests/test_acceptance.py``.  Every criterion recomputes its
inputs from scratch so the timings are honest.
"""

from __future__ import annotations

import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

import property_suites as ps  # noqa: E402
from crnspace import oracle, stationary as st, simulation as sim  # noqa: E402
from crnspace.cascade import find_irreducible  # noqa: E402
from crnspace.decomposition import find_decomposed_state_space  # noqa: E402
from crnspace.io import load_corpus  # noqa: E402
from crnspace.model import conservation_data  # noqa: E402
from crnspace.reduction import reduce_network  # noqa: E402
from crnspace.report import run_pipeline  # noqa: E402

GENE_EB = [[0, 1], [1, 0]]
# per network: set of (C, open species, zero species)
GENE_CLASSES = {
    "gene0": {(((0, 1), (1, 0)), ("M", "P"), ())},
    "gene1": {(((1, 0),), (), ("M", "P"))},
    "gene2": {(((0, 1), (1, 0)), ("M", "P"), ())},
    "gene3": {(((0, 1), (1, 0)), (), ("M", "P"))},
    "gene4": {(((0, 1), (1, 0)), ("M",), ("P",))},
    "gene5": {(((0, 1),), ("M",), ("P",)), (((1, 0),), ("M",), ("P",))},
}


def _emit(number: int, ok: bool, elapsed: float, limit: float, detail: str) -> None:
    status = "PASS" if ok and elapsed < limit else "FAIL"
    line = f"criterion {number}: {status}  ({elapsed:.2f} s, limit {limit:g} s)  {detail}"
    capture = _CAPSYS.get("c")
    if capture is not None:
        with capture.disabled():
            print(line)
    else:
        print(line)
    assert ok, detail
    assert elapsed < limit, f"took {elapsed:.2f} s"


_CAPSYS: dict = {}


@pytest.fixture(autouse=True)
def _show(capsys):
    _CAPSYS["c"] = capsys
    yield
    _CAPSYS.pop("c", None)


def _classes(report: dict) -> set:
    out = set()
    for c in report["certificates"]:
        ss = c["state_set"]
        C = tuple(sorted(tuple(y) for y in ss["bounded_states"]))
        out.add((C, tuple(ss["open_species"]), tuple(ss["zero_species"])))
    return out


def test_criterion_1_gene_networks():
    problems, worst = [], 0.0
    for name, expected in GENE_CLASSES.items():
        t0 = time.perf_counter()
        rep = run_pipeline(load_corpus(name))
        worst = max(worst, time.perf_counter() - t0)
        cls = rep["classification"]
        if cls["bounded"] != ["G_off", "G_on"] or cls["free"] != ["M", "P"] or cls["restricted"]:
            problems.append(f"{name}: classification {cls}")
        if sorted(rep["decomposed"]["bounded_states"]) != GENE_EB:
            problems.append(f"{name}: E_b {rep['decomposed']['bounded_states']}")
        if _classes(rep) != expected:
            problems.append(f"{name}: classes {_classes(rep)}")
        if rep["verdict"] != "Complete":
            problems.append(f"{name}: verdict {rep['verdict']}")
    _emit(1, not problems, worst, 1.0, "; ".join(problems) or "6 networks match, slowest shown")


def test_criterion_2_circadian_clocks():
    problems, worst = [], 0.0
    t0 = time.perf_counter()
    rep = run_pipeline(load_corpus("vilar"))
    worst = max(worst, time.perf_counter() - t0)
    if rep["classification"]["dims"] != [4, 5, 0]:
        problems.append(f"vilar dims {rep['classification']['dims']}")
    certs = rep["certificates"]
    eb = sorted(map(tuple, rep["decomposed"]["bounded_states"]))
    if len(certs) != 1 or sorted(map(tuple, certs[0]["C"])) != eb or len(certs[0]["A"]) != 5:
        problems.append("vilar: class is not the whole decomposed space")
    if rep["verdict"] != "Complete":
        problems.append("vilar verdict " + rep["verdict"])
    t0 = time.perf_counter()
    rep = run_pipeline(load_corpus("leloup"))
    worst = max(worst, time.perf_counter() - t0)
    if rep["conservation"]["relations"] != 0:
        problems.append("leloup has conservation relations")
    certs = rep["certificates"]
    if len(certs) != 1 or len(certs[0]["A"]) != 16 or certs[0]["state_set"]["zero_species"]:
        problems.append("leloup: class is not N0^16")
    if rep["verdict"] != "Complete":
        problems.append("leloup verdict " + rep["verdict"])
    _emit(2, not problems, worst, 10.0, "; ".join(problems) or "vilar (4,5,0) and leloup N0^16, Complete")


def test_criterion_3_heat_shock():
    t0 = time.perf_counter()
    rep = run_pipeline(load_corpus("heatshock"))
    elapsed = time.perf_counter() - t0
    problems = []
    cons = rep["conservation"]
    if cons["relations"] != 5 or cons["semipositive_rank"] != 5:
        problems.append(f"relations {cons['relations']}, semi-positive rank {cons['semipositive_rank']}")
    if len(rep["classification"]["bounded"]) != 12:
        problems.append(f"{len(rep['classification']['bounded'])} bounded species")
    certs = rep["certificates"]
    if len(certs) != 1:
        problems.append(f"{len(certs)} certificates")
    else:
        species = rep["network"]["species"]
        order = [species[i - 1] for i in certs[0]["sigma_total"]]
        last_two = order[-2:]
        if set(last_two) != set(certs[0]["state_set"]["zero_species"]) or set(last_two) != {"Punf", "PunfDnaK"}:
            problems.append(f"final coordinates {last_two} vs zero {certs[0]['state_set']['zero_species']}")
    if rep["verdict"] != "Complete":
        problems.append("verdict " + rep["verdict"])
    _emit(3, not problems, elapsed, 60.0, "; ".join(problems) or "5 relations, 12 bounded, Punf and PunfDnaK last and zero")


def test_criterion_4_two_s():
    t0 = time.perf_counter()
    nf = load_corpus("twoS")
    rep = run_pipeline(nf)
    graph = oracle.build_graph(nf.network, conservation_data(nf.network, nf.x0), (40,))
    cls = oracle.scc_classes(graph)
    found = sorted(sorted(s[0] for s in c) for c in cls.candidate_state_sets(graph))
    elapsed = time.perf_counter() - t0
    problems = []
    if rep["certificates"]:
        problems.append("a certificate was emitted")
    if not any("singular degradability No" in o for o in rep["obstructions"]):
        problems.append("no degradability obstruction")
    if found != [list(range(0, 41, 2)), list(range(1, 40, 2))]:
        problems.append(f"oracle classes {found}")
    _emit(4, not problems, elapsed, 1.0, "; ".join(problems) or "no certificate; oracle finds the even and odd classes")


def _toxin_fast_classification(y: int, x1: int = 2):
    nf = load_corpus("toxin_fast")
    dss = find_decomposed_state_space(nf.network, (x1, max(y, 0), max(-y, 0)))
    red = reduce_network(dss)
    return nf, dss, red, find_irreducible(red, dss.bounded_space.states)


def test_criterion_5_toxin():
    t0 = time.perf_counter()
    problems = []
    # (a) free/restricted flip with the sign of y
    for y in range(-4, 5):
        _, dss, red, _ = _toxin_fast_classification(y)
        want = (("T",), ("A",), (1, 2, 3)) if y <= 0 else (("A",), ("T",), (1, 3, 2))
        got = (red.free_names, red.restricted_names, dss.sigma.one_based())
        if got != want:
            problems.append(f"(a) y={y}: {got}")
    # (b) closed form against general kinetics, residual and tail
    worst_err = worst_res = worst_tail = 0.0
    for x1 in (1, 2, 5):
        for y in (-4, -1, 0, 1, 3):
            nf, dss, red, res = _toxin_fast_classification(y, x1)
            ss = res.certificates[0].state_set
            free = ss.open_names[0]
            other = ({"T", "A"} - {free}).pop()
            d = st.toxin_qsa_distribution(x1, y, 100.0, 10.0, tail_tol=1e-14)
            gk = st.general_kinetics_pi({"M": 1.0, free: 100.0 * x1 / 10.0}, {free: st.toxin_kappa(y)}, ss)
            for z, p in zip(d.values, d.probs):
                worst_err = max(worst_err, abs(gk.prob_counts({"M": x1, free: int(z), other: int(z) + abs(y)}) - p))
            states = [(x1, int(z) + max(y, 0), int(z) + max(-y, 0)) for z in d.values]
            pmap = dict(zip(states, d.probs))
            box = (x1, len(d.values) + abs(y) + 1, len(d.values) + abs(y) + 1)
            worst_res = max(worst_res, st.stationarity_residual(lambda s: pmap.get(s, 0.0), nf.network, box, states))
            worst_tail = max(worst_tail, d.tail_bound)
    if worst_err > 1e-10 or worst_res > 1e-8 or worst_tail >= 1e-10:
        problems.append(f"(b) error {worst_err:.2e}, residual {worst_res:.2e}, tail {worst_tail:.2e}")
    # (c) ssSSA against exact SSA
    nf = load_corpus("toxin")
    part = sim.fast_slow_partition(nf.network, nf.fast, nf.slow)
    provider = sim.ToxinFastProvider(nf.network, part)
    slow = sim.sssa_simulate(nf.network, part, provider, nf.x0, 100.0, seed=7, n_traj=2000)
    exact = sim.ssa_ensemble(nf.network, nf.x0, 100.0, seed=11, n_traj=2000)
    p_index = nf.network.species.index("P")
    slow_p = [j for j in range(part.L.shape[0]) if part.L[j, p_index] and (part.L[j] != 0).sum() == 1][0]
    est = slow.mean(slow_p)
    lo, hi = exact.confidence_interval(p_index)
    ratio = exact.events.mean() / slow.events.mean()
    if not lo <= est <= hi:
        problems.append(f"(c) ssSSA mean {est:.3f} outside exact CI ({lo:.3f}, {hi:.3f})")
    if ratio < 5:
        problems.append(f"(c) event ratio {ratio:.1f}")
    elapsed = time.perf_counter() - t0
    detail = (f"err {worst_err:.1e}, residual {worst_res:.1e}, tail {worst_tail:.1e}; "
              f"E[X4(100)] ssSSA {est:.3f}, exact CI ({lo:.3f}, {hi:.3f}); {ratio:.1f}x fewer events")
    _emit(5, not problems, elapsed, 300.0, "; ".join(problems + [detail]))


def test_criterion_6_product_form():
    t0 = time.perf_counter()
    problems, rows = [], []
    for name in ("birth_death", "conversion_cycle", "isomer_switch"):
        nf = load_corpus(name)
        net = nf.network
        r = [nf.balanced_r[n] for n in net.species]
        if not isinstance(st.check_complex_balanced(net, r), st.ComplexBalancedPoint):
            problems.append(f"{name}: r rejected")
            continue
        dss = find_decomposed_state_space(net, nf.x0)
        red = reduce_network(dss)
        [cert] = find_irreducible(red, dss.bounded_space.states).certificates
        pi = st.product_form_pi({n: float(v) for n, v in zip(net.species, r)}, cert.state_set)
        states = list(cert.state_set.states_in_box(net.species, 40))
        total = sum(pi.prob(net.species, x) for x in states)
        res = st.stationarity_residual(lambda x: pi.prob(net.species, x), net, [40] * net.d, states)
        rows.append(f"{name} sum-1 {total - 1:.1e} residual {res:.1e}")
        if abs(total - 1) > 1e-9 or res > 1e-8:
            problems.append(rows[-1])
    _emit(6, not problems, time.perf_counter() - t0, 30.0, "; ".join(problems) or "; ".join(rows))


def test_criterion_7_property_suites():
    t0 = time.perf_counter()
    suites = {
        "conservation": ps.conservation_suite,
        "support": lambda: ps.support_suite(1000),
        "closures": lambda: ps.closure_suite(100, 50),
        "duality": lambda: ps.duality_suite(1000),
        "additive": lambda: ps.additive_suite(100),
        "certificates": ps.certificate_suite,
    }
    failures = {}
    for label, fn in suites.items():
        bad = fn()
        if bad:
            failures[label] = bad[:3]
    detail = "; ".join(f"{k}: {v}" for k, v in failures.items()) or "all six suites clean"
    _emit(7, not failures, time.perf_counter() - t0, 300.0, detail)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
