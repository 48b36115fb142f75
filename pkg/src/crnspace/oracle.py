"""Brute-force checks on truncated lattices.

Two tools live here: explicit transition graphs on a box (for small
networks), and budgeted best-first path searches that never leave the
box (for certificate checks on larger networks).
"""

from __future__ import annotations

import heapq
import itertools
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .decomposition import DecomposedStateSpace, StateSpaceTooLarge, enumerate_bounded_space
from .model import ConservationData, ReactionNetwork
from .reduction import StateSet


class GraphTooLarge(ValueError):
    pass


def default_box(network: ReactionNetwork, x0: Sequence[int]) -> tuple[int, ...]:
    """max(x0_i, 8) + 2 * (largest stoichiometric magnitude), per coordinate."""
    zmax = int(np.abs(network.stoichiometry).max()) if network.K else 0
    return tuple(max(int(v), 8) + 2 * zmax for v in x0)


@dataclass(eq=False)
class TruncatedGraph:
    network: ReactionNetwork
    box: tuple[int, ...]
    states: list[tuple[int, ...]]
    index: dict[tuple[int, ...], int]
    edges: list[tuple[int, int, int]]  # (source, target, reaction)
    boundary: np.ndarray  # state has an admissible move leaving the box

    def adjacency(self) -> np.ndarray:
        N = len(self.states)
        A = np.zeros((N, N), dtype=bool)
        for s, t, _ in self.edges:
            A[s, t] = True
        return A

    def export_edges(self) -> str:
        """Edge list: header lines with ``#``, then ``source target reaction`` (1-based reaction)."""
        lines = [f"# species {' '.join(self.network.species)}", f"# box {' '.join(map(str, self.box))}"]
        for i, s in enumerate(self.states):
            flag = " boundary" if self.boundary[i] else ""
            lines.append(f"# state {i} {' '.join(map(str, s))}{flag}")
        lines.extend(f"{s} {t} {k + 1}" for s, t, k in self.edges)
        return "\n".join(lines) + "\n"


def _in_box(y: Sequence[int], box: Sequence[int]) -> bool:
    return all(0 <= v <= b for v, b in zip(y, box))


def build_graph(
    network: ReactionNetwork,
    consdata: ConservationData | None,
    box: Sequence[int],
    cap: int = 200_000,
) -> TruncatedGraph:
    """All states of the box on the conservation level set, with one-reaction edges."""
    box = tuple(int(b) for b in box)
    if consdata is not None and consdata.n:
        constraints = [(tuple(int(v) for v in consdata.gamma[:, j]), int(consdata.c[j])) for j in range(consdata.n)]
    else:
        constraints = []
    try:
        states = enumerate_bounded_space(box, constraints, cap)
    except Exception as exc:
        raise GraphTooLarge(str(exc)) from None
    index = {s: i for i, s in enumerate(states)}
    V = network.reactants.T
    Z = network.stoichiometry.T
    edges = []
    boundary = np.zeros(len(states), dtype=bool)
    for i, s in enumerate(states):
        x = np.array(s)
        for k in range(network.K):
            if (x < V[k]).any():
                continue
            y = tuple((x + Z[k]).tolist())
            j = index.get(y)
            if j is None:
                boundary[i] = True
            else:
                edges.append((i, j, k))
    return TruncatedGraph(network, box, states, index, edges, boundary)


@dataclass(eq=False)
class OracleClasses:
    """SCCs of a truncated graph.

    ``closed_in_box``: no edge and no out-of-box move leaves the class.
    ``no_in_box_exit``: no edge leaves it, but some member may have an
    admissible move out of the box (status "boundary-open").  Such a class
    is never claimed closed; it is what a closed class of the untruncated
    chain looks like when it is unbounded.
    """

    classes: list[list[int]]
    closed_in_box: list[bool]
    no_in_box_exit: list[bool]

    def status(self, i: int) -> str:
        if self.closed_in_box[i]:
            return "closed"
        return "boundary-open" if self.no_in_box_exit[i] else "transient"

    def closed_state_sets(self, graph: TruncatedGraph) -> list[list[tuple[int, ...]]]:
        return [[graph.states[i] for i in c] for c, cl in zip(self.classes, self.closed_in_box) if cl]

    def candidate_state_sets(self, graph: TruncatedGraph) -> list[list[tuple[int, ...]]]:
        """Closed and boundary-open classes."""
        return [[graph.states[i] for i in c] for c, ok in zip(self.classes, self.no_in_box_exit) if ok]


def scc_classes(graph: TruncatedGraph) -> OracleClasses:
    N = len(graph.states)
    if N == 0:
        return OracleClasses([], [], [])
    A = csr_matrix(graph.adjacency())
    _, labels = connected_components(A, directed=True, connection="strong")
    order: dict[int, int] = {}
    for lab in labels:
        order.setdefault(int(lab), len(order))
    classes: list[list[int]] = [[] for _ in order]
    for i, lab in enumerate(labels):
        classes[order[int(lab)]].append(i)
    cls_of = [order[int(l)] for l in labels]
    no_exit = [True] * len(classes)
    for s, t, _ in graph.edges:
        if cls_of[s] != cls_of[t]:
            no_exit[cls_of[s]] = False
    closed = list(no_exit)
    for i in np.flatnonzero(graph.boundary):
        closed[cls_of[i]] = False
    return OracleClasses(classes, closed, no_exit)


def witness_path(x: Sequence[int], y: Sequence[int], graph: TruncatedGraph) -> list[int] | None:
    """Shortest admissible reaction sequence from x to y inside the box (BFS)."""
    s, t = graph.index[tuple(x)], graph.index[tuple(y)]
    adj: dict[int, list[tuple[int, int]]] = {}
    for a, b, k in graph.edges:
        adj.setdefault(a, []).append((b, k))
    parent: dict[int, tuple[int, int] | None] = {s: None}
    queue = deque([s])
    while queue:
        u = queue.popleft()
        if u == t:
            seq = []
            while parent[u] is not None:
                u, k = parent[u]
                seq.append(k)
            return list(reversed(seq))
        for v, k in adj.get(u, ()):
            if v not in parent:
                parent[v] = (u, k)
                queue.append(v)
    return None


def replay(network: ReactionNetwork, x: Sequence[int], seq: Iterable[int]) -> tuple[int, ...] | None:
    """Fire ``seq`` from ``x``; None if some reaction is not admissible."""
    cur = np.array(x, dtype=np.int64)
    for k in seq:
        if (cur < network.reactants[:, k]).any():
            return None
        cur = cur + network.stoichiometry[:, k]
    return tuple(cur.tolist())


# -- budgeted search ---------------------------------------------------------------

def search_path(
    network: ReactionNetwork,
    start: Sequence[int],
    goal: Callable[[tuple[int, ...]], bool],
    heuristic: Callable[[tuple[int, ...]], float],
    box: Sequence[int],
    budget: int = 20_000,
) -> tuple[str, list[int] | None]:
    """Best-first search for an in-box admissible path to a goal state.

    Returns ("found", seq), ("none", None) when the reachable in-box set
    was exhausted, or ("budget", None).
    """
    V = [tuple(int(v) for v in network.reactants[:, k]) for k in range(network.K)]
    Z = [tuple(int(v) for v in network.stoichiometry[:, k]) for k in range(network.K)]
    start = tuple(int(v) for v in start)
    parent: dict[tuple[int, ...], tuple[tuple[int, ...], int] | None] = {start: None}
    counter = itertools.count()
    heap = [(heuristic(start), 0, next(counter), start)]
    expanded = 0
    while heap:
        _, depth, _, s = heapq.heappop(heap)
        if goal(s):
            seq = []
            while parent[s] is not None:
                s, k = parent[s]
                seq.append(k)
            return "found", list(reversed(seq))
        expanded += 1
        if expanded > budget:
            return "budget", None
        for k in range(network.K):
            if any(a < b for a, b in zip(s, V[k])):
                continue
            t = tuple(a + b for a, b in zip(s, Z[k]))
            if t in parent or not _in_box(t, box):
                continue
            parent[t] = (s, k)
            heapq.heappush(heap, (heuristic(t), depth + 1, next(counter), t))
    return "none", None


def _search_with_retry(network, start, goal, heuristic, box, budget):
    status, seq = search_path(network, start, goal, heuristic, box, budget)
    if status == "budget":
        status, seq = search_path(network, start, goal, heuristic, box, 5 * budget)
    return status, seq


@dataclass
class Verification:
    status: str  # Consistent, Violation, Inconclusive
    detail: str = ""
    witness: tuple | None = None
    checked_states: int = 0


def _sample(items: list, m: int, rng: np.random.Generator) -> list:
    if len(items) <= m:
        return items
    idx = rng.choice(len(items), size=m, replace=False)
    return [items[i] for i in sorted(idx)]


def verify_certificate(
    cert: StateSet,
    network: ReactionNetwork,
    box: Sequence[int],
    unique_in_slab: bool = False,
    dss: DecomposedStateSpace | None = None,
    samples: int = 40,
    budget: int = 20_000,
    seed: int = 0,
) -> Verification:
    """Empirical check of a certified class inside ``box``.

    (a) sampled interior members reach and are reached from a reference
    member, (b) no admissible reaction leaves the set, (c) when the class
    is claimed unique in its slab, sampled slab states reach it.
    """
    rng = np.random.default_rng(seed)
    box = tuple(int(b) for b in box)
    species = network.species
    V = network.reactants.T
    Z = network.stoichiometry.T
    free_box = min((box[species.index(n)] for n in cert.open_names), default=0)
    members = []
    for x in cert.states_in_box(species, free_box):
        if _in_box(x, box):
            members.append(x)
        if len(members) >= 50_000:
            break
    if not members:
        return Verification("Inconclusive", "no certificate state inside the box")

    def interior(x) -> bool:
        arr = np.array(x)
        for k in range(network.K):
            if (arr >= V[k]).all() and not _in_box(arr + Z[k], box):
                return False
        return True

    sample = _sample(members, samples, rng)
    # (b) closure
    for x in sample:
        arr = np.array(x)
        for k in range(network.K):
            if (arr >= V[k]).all():
                y = tuple((arr + Z[k]).tolist())
                if not cert.contains(species, y):
                    return Verification("Violation", f"reaction {k + 1} leaves the set", (x, k, y), len(sample))
    # (a) communication through a reference member
    ref = min(members, key=lambda s: (sum(s), s))
    inside = [x for x in sample if interior(x)]
    ref_arr = np.array(ref)
    inconclusive = []
    for x in inside:
        x_arr = np.array(x)
        for a, b_arr, b in ((x, ref_arr, ref), (ref, x_arr, x)):
            status, _ = _search_with_retry(
                network, a, lambda s, b=b: s == b, lambda s, b_arr=b_arr: float(np.abs(np.array(s) - b_arr).sum()),
                box, budget,
            )
            if status == "none":
                return Verification("Violation", f"{b} is not reachable from {a} inside the box", (a, b), len(inside))
            if status == "budget":
                inconclusive.append((a, b))
    # (c) slab states reach the class
    if unique_in_slab and dss is not None:
        slab = list(_slab_samples(dss, cert, box, samples, rng))
        zero_idx = [species.index(n) for n in cert.zero_names]
        for x in slab:
            if not interior(x):
                continue
            status, _ = _search_with_retry(
                network, x, lambda s: cert.contains(species, s),
                lambda s: float(sum(s[i] for i in zero_idx)), box, budget,
            )
            if status == "none":
                return Verification("Violation", f"slab state {x} cannot reach the class inside the box", (x,))
            if status == "budget":
                inconclusive.append((x, None))
    if inconclusive:
        return Verification("Inconclusive", f"{len(inconclusive)} searches hit the budget", tuple(inconclusive[:3]))
    return Verification("Consistent", "", None, len(sample))


def _slab_samples(dss: DecomposedStateSpace, cert: StateSet, box: Sequence[int], m: int, rng: np.random.Generator):
    """Random states of C × graph(φ) inside the box, in original species order.

    C is the certificate's closed bounded class, so the slab is the part of
    the decomposed space lying over it.
    """
    d_b, d_f, d_r = dss.dims
    sigma = dss.sigma
    order = list(sigma.image)
    free_limits = [box[order[d_b + j]] for j in range(d_f)]
    produced = 0
    attempts = 0
    names = dss.permuted.species
    pos = [cert.bounded_names.index(names[i]) for i in range(d_b)]
    states = [tuple(c[p] for p in pos) for c in cert.bounded_states]
    while produced < m and attempts < 50 * m:
        attempts += 1
        y = states[int(rng.integers(len(states)))]
        xf = [int(rng.integers(0, lim + 1)) for lim in free_limits]
        xr = dss.map(xf) if d_r else ()
        if any(v.denominator != 1 or v < 0 for v in xr):
            continue
        xs = list(y) + xf + [int(v) for v in xr]
        x = [0] * len(xs)
        for pos, sp in enumerate(order):
            x[sp] = xs[pos]
        if _in_box(x, box):
            produced += 1
            yield tuple(x)


def fit_box(
    network: ReactionNetwork,
    consdata: ConservationData,
    box: Sequence[int],
    cap: int = 20_000,
    floor: Sequence[int] | None = None,
) -> tuple[int, ...]:
    """Halve the largest coordinates of ``box`` until the graph has at most ``cap`` states.

    Coordinates never drop below ``floor`` (typically x0, so the initial
    conservation level stays inside the box).
    """
    box = list(box)
    floor = [0] * len(box) if floor is None else [min(int(f), b) for f, b in zip(floor, box)]
    constraints = [(tuple(int(v) for v in consdata.gamma[:, j]), int(consdata.c[j])) for j in range(consdata.n)]
    while True:
        try:
            enumerate_bounded_space(box, constraints, cap)
            return tuple(box)
        except StateSpaceTooLarge:
            slack = [b - f for b, f in zip(box, floor)]
            i = int(np.argmax([b if s > 0 else -1 for b, s in zip(box, slack)]))
            if slack[i] <= 0:
                raise GraphTooLarge("cannot shrink the box any further") from None
            box[i] = max(floor[i], box[i] // 2)
