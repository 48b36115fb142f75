"""Birth/death cascade trees and certification of irreducible state spaces.

All computations run on a reduced network (bounded species first, then
free species, no restricted species) together with its bounded state
set ``E_b``.  Free species are referred to by their 0-based position in
the free block.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Sequence


from . import linalg
from .finite_comm import FiniteComm
from .model import Permutation, ReactionNetwork, inverse_network
from .reduction import ReducedNetwork, StateSet, lift_irreducible

Node = tuple  # (frozenset of state indices C, frozenset of free indices A)


class NotASinglePath(ValueError):
    """Cascade levels are only defined when the tree is a single path."""


class NotALeaf(ValueError):
    pass


@dataclass(eq=False)
class Bct:
    nodes: list[Node]
    edges: list[tuple[int, int]]
    level: dict[Node, int]
    births: dict[Node, frozenset[int]]
    leaves: list[Node]
    minimal_leaves: list[Node]

    def children(self, i: int) -> list[int]:
        return [b for a, b in self.edges if a == i]

    def is_single_path(self) -> bool:
        roots = [n for n in self.nodes if self.level[n] == 0]
        if len(roots) != 1:
            return False
        return all(len(self.children(i)) <= 1 for i in range(len(self.nodes))) and len(self.leaves) == 1


def birth_operator(fc: FiniteComm, C: frozenset[int], A: frozenset[int]) -> frozenset[int]:
    """Free species outside A produced by some reaction available on (C, A)."""
    out: set[int] = set()
    for k in fc.available_on_class(C, A):
        out.update(fc.rho_f_support[k])
    return frozenset(out - A)


def construct_bct(fc: FiniteComm) -> Bct:
    """Generation-by-generation construction with global node deduplication."""
    nodes: list[Node] = []
    index: dict[Node, int] = {}
    level: dict[Node, int] = {}
    edges: list[tuple[int, int]] = []
    births: dict[Node, frozenset[int]] = {}

    def add(node: Node, lvl: int) -> int:
        if node not in index:
            index[node] = len(nodes)
            nodes.append(node)
            level[node] = lvl
        return index[node]

    frontier = [add((C, frozenset()), 0) for C in fc.classes(frozenset()).closed_classes()]
    gen = 0
    while frontier:
        nxt: list[int] = []
        for i in frontier:
            C, A = nodes[i]
            B = birth_operator(fc, C, A)
            births[nodes[i]] = B
            if not B:
                continue
            A2 = A | B
            for C2 in fc.psi(C, A, A2):
                child = (C2, A2)
                is_new = child not in index
                j = add(child, gen + 1)
                if (i, j) not in edges:
                    edges.append((i, j))
                if is_new:
                    nxt.append(j)
        frontier = nxt
        gen += 1
    leaves = [n for n in nodes if not births[n]]
    return Bct(nodes, edges, level, births, leaves, minimal_leaves(leaves))


def minimal_leaves(leaves: Sequence[Node]) -> list[Node]:
    out = []
    for C, A in leaves:
        smaller = any(
            (C2, A2) != (C, A) and C2 <= C and A2 <= A for C2, A2 in leaves
        )
        if not smaller:
            out.append((C, A))
    return out


# -- death cascades ----------------------------------------------------------------

@dataclass(eq=False)
class RestrictedNetwork:
    network: ReactionNetwork | None  # None when no species or no reactions remain
    states: list[tuple[int, ...]]
    d_b: int
    free_map: list[int]  # restricted free index -> original free index
    reactions: list[int]


def restrict_network(fc: FiniteComm, leaf: Node, bct: Bct | None = None) -> RestrictedNetwork:
    C, A = leaf
    if bct is not None and bct.births.get(leaf):
        raise NotALeaf("node has a nonempty birth set")
    free = sorted(A)
    species = list(range(fc.d_b)) + [fc.d_b + j for j in free]
    reactions = fc.available_on_class(C, A)
    states = [fc.states[i] for i in sorted(C)]
    net = fc.network.subnetwork(species, reactions) if species and reactions else None
    return RestrictedNetwork(net, states, fc.d_b, free, reactions)


def death_cascade_tree(fc: FiniteComm, leaf: Node) -> tuple[Bct | None, RestrictedNetwork]:
    """BCT of the inverted restricted network (the DCT)."""
    rn = restrict_network(fc, leaf)
    if rn.network is None:
        return None, rn
    inv = inverse_network(rn.network)
    return construct_bct(FiniteComm(inv, rn.d_b, rn.states)), rn


def death_exhaustive(fc: FiniteComm, leaf: Node) -> bool:
    C, A = leaf
    if not A:
        return True
    dct, rn = death_cascade_tree(fc, leaf)
    if dct is None:
        return False
    full = frozenset(range(len(A)))
    return any(A2 == full for _, A2 in dct.leaves)


# -- singular degradability --------------------------------------------------------

@dataclass(frozen=True)
class Degradability:
    species: int
    verdict: str  # Yes, No, Undecided
    coefficients: tuple[int, ...] | None
    reactions: tuple[int, ...]
    method: str
    reason: str = ""


def degradation_reactions(fc: FiniteComm, A: frozenset[int]) -> list[int]:
    """Reactions with no bounded reactant or product whose free products lie in A."""
    V, O = fc.network.reactants, fc.network.products
    d_b = fc.d_b
    out = []
    for k in range(fc.network.K):
        if V[:d_b, k].any() or O[:d_b, k].any():
            continue
        if fc.rho_f_support[k] <= A:
            out.append(k)
    return out


def _drain_witness(
    fc: FiniteComm, i: int, A: frozenset[int], cap: int, max_states: int = 50_000
) -> tuple[str, tuple[int, ...] | None]:
    """Search for a firing sequence taking e_i (outside A) to zero outside A.

    Species in A are treated as abundant and bounded species are never
    touched, so the sequence is admissible from any state of the slab
    once the A species have been raised by births.
    """
    V, O = fc.network.reactants, fc.network.products
    d_b = fc.d_b
    W = [j for j in range(fc.d_f) if j not in A]
    pos = {j: t for t, j in enumerate(W)}
    ks = [k for k in range(fc.network.K) if not V[:d_b, k].any() and not O[:d_b, k].any()]
    nu = {k: tuple(int(V[d_b + j, k]) for j in W) for k in ks}
    zeta = {k: tuple(int(O[d_b + j, k] - V[d_b + j, k]) for j in W) for k in ks}
    start = tuple(int(t == pos[i]) for t in range(len(W)))
    goal = tuple(0 for _ in W)
    parent: dict[tuple[int, ...], tuple[tuple[int, ...], int] | None] = {start: None}
    queue = deque([start])
    exhausted = True
    while queue:
        s = queue.popleft()
        if s == goal:
            seq = []
            while parent[s] is not None:
                s, k = parent[s]
                seq.append(k)
            return "Yes", tuple(reversed(seq))
        for k in ks:
            if any(a < b for a, b in zip(s, nu[k])):
                continue
            t = tuple(a + b for a, b in zip(s, zeta[k]))
            if t in parent:
                continue
            if sum(t) > cap:
                exhausted = False
                continue
            if len(parent) >= max_states:
                exhausted = False
                break
            parent[t] = (s, k)
            queue.append(t)
    return ("No" if exhausted else "Undecided"), None


def singularly_degradable_set(
    fc: FiniteComm,
    A: frozenset[int],
    coeff_cap: int = 64,
    species: Sequence[int] | None = None,
    drain_fallback: bool = True,
) -> dict[int, Degradability]:
    """Per-species verdicts for -e_i in the N0-cone of the free stoichiometry on K̃_p(A).

    For species outside A that fail the cone test, a drain-witness search
    (reactions may pass through other species outside A) is tried when
    ``drain_fallback`` is set.
    """
    ks = degradation_reactions(fc, A)
    S = fc.network.stoichiometry[fc.d_b:, :]
    Shat = S[:, ks].tolist() if ks else [[] for _ in range(fc.d_f)]
    out: dict[int, Degradability] = {}
    targets = range(fc.d_f) if species is None else species
    for i in targets:
        target = [-int(j == i) for j in range(fc.d_f)]
        if ks:
            cm = linalg.nonneg_int_combination(Shat, target, coeff_cap)
        else:
            cm = linalg.ConeMembership("No", reason="no admissible degradation reactions")
        verdict = Degradability(i, cm.verdict, cm.coefficients, tuple(ks), "cone", cm.reason)
        if verdict.verdict != "Yes" and drain_fallback and i not in A:
            status, seq = _drain_witness(fc, i, A, coeff_cap)
            if status == "Yes":
                counts = tuple(seq.count(k) for k in range(fc.network.K))
                verdict = Degradability(i, "Yes", counts, tuple(sorted(set(seq))), "drain", "")
            elif verdict.verdict == "No" and status == "Undecided":
                verdict = Degradability(i, "Undecided", None, tuple(ks), "drain", "drain search limit reached")
        out[i] = verdict
    return out


# -- certification -------------------------------------------------------------------

def sigma3(A: frozenset[int], d_b: int, d_f: int, d_r: int = 0) -> Permutation:
    """Identity on bounded and restricted blocks; free species in A first."""
    free = [d_b + j for j in range(d_f) if j in A] + [d_b + j for j in range(d_f) if j not in A]
    return Permutation(tuple(range(d_b)) + tuple(free) + tuple(range(d_b + d_f, d_b + d_f + d_r)))


@dataclass(eq=False)
class IrreducibleCertificate:
    C: tuple[tuple[int, ...], ...]
    A: tuple[str, ...]
    sigma3: Permutation
    state_set: StateSet
    unique_in_slab: bool
    complete: bool = False


@dataclass(eq=False)
class LeafReport:
    C: tuple[tuple[int, ...], ...]
    A: tuple[str, ...]
    minimal: bool
    death_exhaustive: bool | None
    degradability: dict[str, Degradability]
    certified: bool


@dataclass(eq=False)
class IrreducibleResult:
    certificates: list[IrreducibleCertificate]
    verdict: str  # Complete or Partial
    obstructions: list[str]
    bct: Bct
    leaves: list[LeafReport]
    fc: FiniteComm


def find_irreducible(
    reduced: ReducedNetwork,
    states: Sequence[Sequence[int]],
    coeff_cap: int = 64,
    drain_fallback: bool = True,
) -> IrreducibleResult:
    net = reduced.base
    d_b = reduced.d_b
    fc = FiniteComm(net, d_b, states)
    bct = construct_bct(fc)
    names = net.species
    free_names = names[d_b:]
    d_r = len(reduced.restricted_names)
    certs: list[IrreducibleCertificate] = []
    obstructions: list[str] = []
    reports: list[LeafReport] = []
    minimal = set(bct.minimal_leaves)
    for leaf in bct.leaves:
        C, A = leaf
        C_states = tuple(fc.states[i] for i in sorted(C))
        A_names = tuple(free_names[j] for j in sorted(A))
        label = f"leaf C={list(C_states)} A={{{', '.join(A_names)}}}"
        if leaf not in minimal:
            obstructions.append(f"{label}: not a minimal leaf")
            reports.append(LeafReport(C_states, A_names, False, None, {}, False))
            continue
        exhaustive = death_exhaustive(fc, leaf)
        deg = singularly_degradable_set(fc, A, coeff_cap, drain_fallback=drain_fallback)
        deg_named = {free_names[j]: v for j, v in deg.items()}
        in_A_ok = all(deg[j].verdict == "Yes" for j in A)
        all_ok = all(v.verdict == "Yes" for v in deg.values())
        certified = exhaustive and in_A_ok
        if not exhaustive:
            obstructions.append(f"{label}: not death-exhaustive")
        for j, v in deg.items():
            if v.verdict != "Yes":
                where = "in A" if j in A else "outside A"
                obstructions.append(f"{label}: species {free_names[j]} ({where}) singular degradability {v.verdict}")
        reports.append(LeafReport(C_states, A_names, True, exhaustive, deg_named, certified))
        if certified:
            zero = tuple(free_names[j] for j in range(fc.d_f) if j not in A)
            sset = lift_irreducible(StateSet(names[:d_b], C_states, A_names, zero), reduced)
            certs.append(
                IrreducibleCertificate(C_states, A_names, sigma3(A, d_b, fc.d_f, d_r), sset, all_ok)
            )
    complete = (
        len(bct.minimal_leaves) == len(bct.leaves)
        and len(certs) == len(bct.leaves)
        and all(c.unique_in_slab for c in certs)
    )
    for c in certs:
        c.complete = complete
    return IrreducibleResult(certs, "Complete" if complete else "Partial", obstructions, bct, reports, fc)


# -- cascade levels -------------------------------------------------------------------

@dataclass
class CascadeReport:
    birth_levels: list[list[str]]  # cumulative G_1 ⊂ G_2 ⊂ ...
    birth_increments: list[list[str]]
    death_levels: list[list[str]]
    death_increments: list[list[str]]
    births_equal_deaths: bool


def _path_levels(bct: Bct, names: Sequence[str]) -> tuple[list[list[str]], list[list[str]]]:
    if not bct.is_single_path():
        raise NotASinglePath("the tree has more than one root, branch or leaf")
    path = sorted(bct.nodes, key=lambda n: bct.level[n])
    cumulative, increments = [], []
    prev: frozenset[int] = frozenset()
    for _, A in path[1:]:
        cumulative.append([names[j] for j in sorted(A)])
        increments.append([names[j] for j in sorted(A - prev)])
        prev = A
    return cumulative, increments


def cascade_report(fc: FiniteComm, bct: Bct) -> CascadeReport:
    free_names = fc.network.species[fc.d_b:]
    births, b_inc = _path_levels(bct, free_names)
    leaf = bct.leaves[0]
    dct, rn = death_cascade_tree(fc, leaf)
    if dct is None:
        deaths, d_inc = [], []
    else:
        sub_names = [free_names[j] for j in rn.free_map]
        deaths, d_inc = _path_levels(dct, sub_names)
    B = set(births[-1]) if births else set()
    X = set(deaths[-1]) if deaths else set()
    return CascadeReport(births, b_inc, deaths, d_inc, B == X)
