"""Communication structure of the bounded state space for a free-species subset A.

A network in σ order has ``d_b`` bounded species followed by free
species.  For a subset ``A`` of free indices (0-based within the free
block) only reactions whose free reactants all lie in ``A`` may fire;
those reactions induce a digraph on the bounded states ``E_b``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .model import ReactionNetwork


class NotASubset(ValueError):
    """Ψ needs A1 ⊆ A2."""


@dataclass(frozen=True, eq=False)
class CommClasses:
    A: frozenset[int]
    class_of: tuple[int, ...]
    classes: tuple[frozenset[int], ...]
    closed: tuple[bool, ...]
    R: np.ndarray  # n_c x n_c transition counts between classes

    @property
    def n_c(self) -> int:
        return len(self.classes)

    def closed_classes(self) -> list[frozenset[int]]:
        return [c for c, cl in zip(self.classes, self.closed) if cl]


# -- reachability helpers --------------------------------------------------------

def transitive_closure(Z: np.ndarray) -> np.ndarray:
    """Positivity pattern of (I + Z)^(N-1) by Warshall's algorithm."""
    N = Z.shape[0]
    R = np.asarray(Z, dtype=bool) | np.eye(N, dtype=bool)
    for k in range(N):
        R |= R[:, k:k + 1] & R[k:k + 1, :]
    return R


def bfs_closure(Z: np.ndarray) -> np.ndarray:
    N = Z.shape[0]
    adj = [np.flatnonzero(Z[i]) for i in range(N)]
    R = np.zeros((N, N), dtype=bool)
    for s in range(N):
        seen = R[s]
        seen[s] = True
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    queue.append(v)
    return R


def power_closure(Z: np.ndarray) -> np.ndarray:
    """Literal (I + Z)^(N-1) > 0 via repeated boolean squaring."""
    N = Z.shape[0]
    M = (np.asarray(Z, dtype=bool) | np.eye(N, dtype=bool)).astype(np.int64)
    steps = 1
    while steps < max(N - 1, 1):
        M = ((M @ M) > 0).astype(np.int64)
        steps *= 2
    return M > 0


def communication_classes(Z: np.ndarray, A: Iterable[int] = ()) -> CommClasses:
    """Classes of mutually reachable states, numbered by smallest member."""
    Z = np.asarray(Z, dtype=bool)
    N = Z.shape[0]
    if N == 0:
        return CommClasses(frozenset(A), (), (), (), np.zeros((0, 0), dtype=np.int64))
    _, labels = connected_components(csr_matrix(Z), directed=True, connection="strong")
    first: dict[int, int] = {}
    for i, lab in enumerate(labels):
        first.setdefault(int(lab), len(first))
    class_of = tuple(first[int(lab)] for lab in labels)
    members: list[list[int]] = [[] for _ in first]
    for i, c in enumerate(class_of):
        members[c].append(i)
    classes = tuple(frozenset(m) for m in members)
    return class_reachability(CommClasses(frozenset(A), class_of, classes, (), np.zeros(0)), Z)


def class_reachability(cc: CommClasses, Z: np.ndarray) -> CommClasses:
    """R = U Z Uᵀ and closed flags (no positive off-diagonal entry)."""
    n_c = len(cc.classes)
    N = len(cc.class_of)
    U = np.zeros((n_c, N), dtype=np.int64)
    for i, c in enumerate(cc.class_of):
        U[c, i] = 1
    R = U @ np.asarray(Z, dtype=np.int64) @ U.T
    off = R.copy()
    np.fill_diagonal(off, 0)
    closed = tuple(bool(not off[i].any()) for i in range(n_c))
    return CommClasses(cc.A, cc.class_of, cc.classes, closed, R)


# -- network-level context ---------------------------------------------------------

class FiniteComm:
    """Caches Z(A) and C(A) for a network in σ order over a bounded state set."""

    def __init__(self, network: ReactionNetwork, d_b: int, states: Sequence[Sequence[int]]):
        self.network = network
        self.d_b = d_b
        self.d_f = network.d - d_b
        self.states = [tuple(int(v) for v in s) for s in states]
        self.lookup = {s: i for i, s in enumerate(self.states)}
        V, O = network.reactants, network.products
        self.nu_b = V[:d_b, :].T.copy()
        self.zeta_b = (O[:d_b, :] - V[:d_b, :]).T.copy()
        self.nu_f_support = [frozenset(np.flatnonzero(V[d_b:, k]).tolist()) for k in range(network.K)]
        self.rho_f_support = [frozenset(np.flatnonzero(O[d_b:, k]).tolist()) for k in range(network.K)]
        self._cache: dict[frozenset[int], CommClasses] = {}
        self._zcache: dict[frozenset[int], np.ndarray] = {}
        self._y = np.array(self.states, dtype=np.int64).reshape(len(self.states), d_b)

    @property
    def free_all(self) -> frozenset[int]:
        return frozenset(range(self.d_f))

    def available_reactions(self, y_index: int, A: Iterable[int]) -> list[int]:
        A = frozenset(A)
        y = self._y[y_index]
        return [
            k
            for k in range(self.network.K)
            if self.nu_f_support[k] <= A and bool((y >= self.nu_b[k]).all())
        ]

    def available_on_class(self, C: Iterable[int], A: Iterable[int]) -> list[int]:
        A = frozenset(A)
        out: set[int] = set()
        for i in C:
            out.update(self.available_reactions(i, A))
        return sorted(out)

    def zero_pattern(self, A: Iterable[int]) -> np.ndarray:
        A = frozenset(A)
        if A in self._zcache:
            return self._zcache[A]
        N = len(self.states)
        Z = np.zeros((N, N), dtype=bool)
        ks = [k for k in range(self.network.K) if self.nu_f_support[k] <= A]
        for k in ks:
            ok = (self._y >= self.nu_b[k]).all(axis=1) if N else np.zeros(0, bool)
            for i in np.flatnonzero(ok):
                j = self.lookup.get(tuple((self._y[i] + self.zeta_b[k]).tolist()))
                if j is not None:
                    Z[i, j] = True
        self._zcache[A] = Z
        return Z

    def classes(self, A: Iterable[int]) -> CommClasses:
        A = frozenset(A)
        if A not in self._cache:
            self._cache[A] = communication_classes(self.zero_pattern(A), A)
        return self._cache[A]

    def psi(self, C1: frozenset[int], A1: Iterable[int], A2: Iterable[int]) -> list[frozenset[int]]:
        """Closed classes of C(A2) that C1 (a class of C(A1)) ends up in."""
        A1, A2 = frozenset(A1), frozenset(A2)
        if not A1 <= A2:
            raise NotASubset(f"{sorted(A1)} is not contained in {sorted(A2)}")
        cc = self.classes(A2)
        owner = {cc.class_of[i] for i in C1}
        if len(owner) != 1:
            raise ValueError("C1 is not contained in a single class of the larger set")
        o = owner.pop()
        if cc.closed[o]:
            return [cc.classes[o]]
        adj = cc.R > 0
        seen = {o}
        queue = deque([o])
        while queue:
            u = queue.popleft()
            for v in np.flatnonzero(adj[u]):
                v = int(v)
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return [cc.classes[c] for c in sorted(seen) if cc.closed[c]]
