"""Decomposed state space: bounded species, free/restricted split and affine map.

The reachable set of a network started at ``x0`` is written, after a
species permutation σ, as ``E_b × graph(φ)`` where ``E_b`` is a finite set
of bounded-species states and ``φ`` maps free counts to restricted counts.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import linalg
from .model import (
    ConservationData,
    Permutation,
    ReactionNetwork,
    conservation_data,
    permute_network,
)

INF = math.inf
DEFAULT_STATE_CAP = 200_000


class ConservationMixing(ValueError):
    """Conservation relations mix bounded and unbounded species."""


class NoCompatiblePartition(ValueError):
    """Every free/restricted index set gives an incompatible affine map."""


class StateSpaceTooLarge(ValueError):
    def __init__(self, estimate: int, cap: int):
        super().__init__(f"bounded state space has at least {estimate} states (cap {cap})")
        self.estimate = estimate
        self.cap = cap


@dataclass(frozen=True)
class SpeciesClassification:
    bounds: tuple  # b_i per original species: Fraction or math.inf
    bounded: tuple[int, ...]
    free: tuple[int, ...]
    restricted: tuple[int, ...]
    sigma: Permutation

    @property
    def d_b(self) -> int:
        return len(self.bounded)

    @property
    def d_f(self) -> int:
        return len(self.free)

    @property
    def d_r(self) -> int:
        return len(self.restricted)

    @property
    def d_u(self) -> int:
        return self.d_f + self.d_r


@dataclass(frozen=True, eq=False)
class BoundedStateSpace:
    states: tuple[tuple[int, ...], ...]
    constraints: tuple[tuple[tuple[int, ...], int], ...]
    limits: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.states)

    def index(self, y: Sequence[int]) -> int:
        return self._lookup()[tuple(int(v) for v in y)]

    def _lookup(self) -> dict:
        cache = self.__dict__.get("_cache")
        if cache is None:
            cache = {s: i for i, s in enumerate(self.states)}
            object.__setattr__(self, "_cache", cache)
        return cache

    def __contains__(self, y) -> bool:
        return tuple(int(v) for v in y) in self._lookup()


@dataclass(frozen=True, eq=False)
class AffineConstruction:
    delta_basis: tuple[tuple[int, ...], ...]
    index_set: tuple[int, ...]  # positions within the unbounded block
    A_I: tuple[tuple[int, ...], ...]
    Delta1: tuple[tuple[int, ...], ...]
    Delta2: tuple[tuple[int, ...], ...]
    M: tuple[tuple[Fraction, ...], ...]
    c_hat: tuple[Fraction, ...]


@dataclass(frozen=True, eq=False)
class AffineMap:
    """φ(x_f) = F0 + F1 x_f (restricted counts from free counts)."""

    F0: tuple[Fraction, ...]
    F1: tuple[tuple[Fraction, ...], ...]
    compatible: bool

    @property
    def d_r(self) -> int:
        return len(self.F0)

    def __call__(self, x_f: Sequence[int]) -> tuple[Fraction, ...]:
        return tuple(
            self.F0[r] + sum((self.F1[r][j] * int(x_f[j]) for j in range(len(x_f))), Fraction(0))
            for r in range(self.d_r)
        )

    def to_text(self, free_names: Sequence[str], restricted_names: Sequence[str]) -> list[str]:
        lines = []
        for r, name in enumerate(restricted_names):
            terms = []
            for j, f in enumerate(free_names):
                coef = self.F1[r][j]
                if coef:
                    terms.append(f"{'' if coef == 1 else ('-' if coef == -1 else str(coef) + '*')}{f}")
            if self.F0[r] or not terms:
                terms.append(str(self.F0[r]))
            lines.append(f"{name} = " + " + ".join(terms).replace("+ -", "- "))
        return lines


@dataclass(frozen=True, eq=False)
class DecomposedStateSpace:
    network: ReactionNetwork  # original species order
    x0: tuple[int, ...]
    classification: SpeciesClassification
    bounded_space: BoundedStateSpace
    map: AffineMap
    construction: AffineConstruction | None
    permuted: ReactionNetwork
    consdata: ConservationData

    @property
    def sigma(self) -> Permutation:
        return self.classification.sigma

    @property
    def dims(self) -> tuple[int, int, int]:
        c = self.classification
        return c.d_b, c.d_f, c.d_r

    def contains(self, x: Sequence[int]) -> bool:
        """Whether an original-order state lies in E_b × graph(φ)."""
        xs = self.sigma.apply(np.asarray(x, dtype=np.int64))
        d_b, d_f, d_r = self.dims
        if tuple(int(v) for v in xs[:d_b]) not in self.bounded_space:
            return False
        return tuple(Fraction(int(v)) for v in xs[d_b + d_f:]) == self.map(xs[d_b:d_b + d_f])


# -- species bounds --------------------------------------------------------------

def bound_species(network: ReactionNetwork, consdata: ConservationData) -> list:
    """b_i = min <c, α> s.t. Γα >= 0, (Γα)_i = 1; infinite when infeasible."""
    d, n = consdata.gamma.shape
    gamma = consdata.gamma.tolist()
    c = [int(v) for v in consdata.c]
    bounds: list = []
    for i in range(d):
        if n == 0:
            bounds.append(INF)
            continue
        out = linalg.lp_min(c, ([gamma[i]], [1]), (gamma, [0] * d))
        if out.status == "Infeasible":
            bounds.append(INF)
        elif out.status == "Unbounded":
            # cannot happen for c = Γᵀ x0 with x0 >= 0; treat defensively
            bounds.append(INF)
        else:
            bounds.append(out.value)
    return bounds


def enumerate_bounded_space(
    limits: Sequence[int],
    constraints: Sequence[tuple[Sequence[int], int]],
    cap: int = DEFAULT_STATE_CAP,
) -> list[tuple[int, ...]]:
    """All integer points of ``prod [0, limits_l]`` meeting every ``<g, y> = h``.

    Partial assignments are pruned with the interval of values the
    remaining coordinates can still contribute, so the cost scales with
    the number of feasible states rather than the rectangle volume.
    Output is lexicographically sorted.
    """
    m = len(limits)
    cons = [([int(v) for v in g], int(h)) for g, h in constraints]
    # suffix ranges: contribution of coordinates l..m-1 lies in [lo, hi]
    suffix = []
    for g, _ in cons:
        lo = [0] * (m + 1)
        hi = [0] * (m + 1)
        for l in range(m - 1, -1, -1):
            term = g[l] * limits[l]
            lo[l] = lo[l + 1] + min(0, term)
            hi[l] = hi[l + 1] + max(0, term)
        suffix.append((lo, hi))
    out: list[tuple[int, ...]] = []
    partial = [0] * len(cons)
    y = [0] * m

    def rec(l: int) -> None:
        if l == m:
            if all(p == h for p, (_, h) in zip(partial, cons)):
                out.append(tuple(y))
                if len(out) > cap:
                    raise StateSpaceTooLarge(len(out), cap)
            return
        # values of y_l compatible with every constraint, by interval arithmetic
        v_lo, v_hi = 0, limits[l]
        for j, (g, h) in enumerate(cons):
            if g[l] == 0:
                continue
            lo, hi = suffix[j]
            a = h - partial[j] - hi[l + 1]  # g_l * v must lie in [a, b]
            b = h - partial[j] - lo[l + 1]
            if g[l] > 0:
                v_lo = max(v_lo, -((-a) // g[l]))
                v_hi = min(v_hi, b // g[l])
            else:
                v_lo = max(v_lo, -(b // -g[l]))
                v_hi = min(v_hi, (-a) // -g[l])
        for v in range(v_lo, v_hi + 1):
            ok = True
            for j, (g, h) in enumerate(cons):
                s = partial[j] + g[l] * v
                lo, hi = suffix[j]
                if not (s + lo[l + 1] <= h <= s + hi[l + 1]):
                    ok = False
                    break
            if not ok:
                continue
            for j, (g, _) in enumerate(cons):
                partial[j] += g[l] * v
            y[l] = v
            rec(l + 1)
            for j, (g, _) in enumerate(cons):
                partial[j] -= g[l] * v
        y[l] = 0

    rec(0)
    return out


# -- affine map --------------------------------------------------------------------

def _affine_for_index_set(
    delta: list[list[int]],
    I: tuple[int, ...],
    J: tuple[int, ...],
    gamma_sigma: list[list[int]],
    c: list[int],
    d_b: int,
    V_f: np.ndarray,
    V_r: np.ndarray,
) -> tuple[AffineConstruction, AffineMap] | None:
    d_u = len(I) + len(J)
    d_r = len(J)
    A_I = [[int(r == i) for i in I] + [delta[j][r] for j in range(d_r)] for r in range(d_u)]
    if linalg.rank(A_I) < d_u:
        return None
    Delta1 = [[delta[j][i] for j in range(d_r)] for i in I]  # d_f x d_r
    Delta2 = [[delta[j][r] for j in range(d_r)] for r in J]  # d_r x d_r
    # δ̂_j in σ₂ coordinates: zero bounded block, then free I, then restricted J
    delta_hat = [[0] * d_b + [delta[j][i] for i in I] + [delta[j][r] for r in J] for j in range(d_r)]
    M_cols = [linalg.linear_solve(gamma_sigma, dh) for dh in delta_hat]
    M = [[M_cols[j][a] for j in range(d_r)] for a in range(len(gamma_sigma[0]))]
    c_hat = [sum((Fraction(c[a]) * M_cols[j][a] for a in range(len(c))), Fraction(0)) for j in range(d_r)]
    D2T_inv = linalg.inverse(linalg.transpose(Delta2))
    F0 = linalg.matvec(D2T_inv, c_hat)
    D1T = linalg.transpose(Delta1)  # d_r x d_f
    F1 = [[-v for v in row] for row in linalg.matmul(D2T_inv, D1T)] if Delta1 else [[] for _ in range(d_r)]
    F0 = [Fraction(v) for v in F0]
    F1 = [[Fraction(v) for v in row] for row in F1]
    compatible = all(v.denominator == 1 and v >= 0 for v in F0) and all(
        v.denominator == 1 and v >= 0 for row in F1 for v in row
    )
    if compatible and V_r.size:
        lhs = np.array([[int(F0[r]) for _ in range(V_r.shape[1])] for r in range(d_r)], dtype=np.int64)
        if len(I):
            lhs = lhs + np.array([[int(v) for v in row] for row in F1], dtype=np.int64) @ V_f
        compatible = bool((lhs >= V_r).all())
    construction = AffineConstruction(
        tuple(tuple(v) for v in delta),
        tuple(I),
        tuple(tuple(r) for r in A_I),
        tuple(tuple(r) for r in Delta1),
        tuple(tuple(r) for r in Delta2),
        tuple(tuple(r) for r in M),
        tuple(c_hat),
    )
    return construction, AffineMap(tuple(F0), tuple(tuple(r) for r in F1), compatible)


def find_decomposed_state_space(
    network: ReactionNetwork,
    x0: Sequence[int],
    cap: int = DEFAULT_STATE_CAP,
    require_compatible: bool = False,
) -> DecomposedStateSpace:
    """Classify species and build ``E_b × graph(φ)`` for the network at ``x0``.

    Raises :class:`ConservationMixing` when restricted species exist but
    conservation laws couple bounded and unbounded species.  When no
    index set gives a compatible map, the first (lexicographic) candidate
    is returned with ``map.compatible = False`` unless
    ``require_compatible`` is set, in which case
    :class:`NoCompatiblePartition` is raised.
    """
    x0 = tuple(int(v) for v in x0)
    cons = conservation_data(network, x0)
    bounds = bound_species(network, cons)
    d = network.d
    bounded = [i for i in range(d) if bounds[i] != INF]
    unbounded = [i for i in range(d) if bounds[i] == INF]
    S = network.stoichiometry
    S_b = S[bounded, :].tolist()
    S_u = S[unbounded, :].tolist()
    d_f = linalg.rank(S_u) if unbounded else 0
    d_r = len(unbounded) - d_f
    rank_b = linalg.rank(S_b) if bounded else 0
    if d_r > 0 and linalg.rank(S.tolist()) != rank_b + d_f:
        raise ConservationMixing(
            "conservation relations couple bounded and unbounded species; no decomposition of the required form"
        )

    # bounded block
    limits = [math.floor(bounds[i]) for i in bounded]
    gamma_hat = linalg.left_nullspace_basis(S_b, len(bounded)) if bounded else []
    constraints = [(tuple(g), sum(g[l] * x0[bounded[l]] for l in range(len(bounded)))) for g in gamma_hat]
    states = enumerate_bounded_space(limits, constraints, cap)
    space = BoundedStateSpace(tuple(states), tuple(constraints), tuple(limits))

    construction = None
    if d_r == 0:
        free, restricted = unbounded, []
        amap = AffineMap((), (), True)
    else:
        delta = linalg.left_nullspace_basis(S_u, len(unbounded))
        V = network.reactants
        chosen = None
        first = None
        for I in itertools.combinations(range(len(unbounded)), d_f):
            J = tuple(r for r in range(len(unbounded)) if r not in I)
            order = bounded + [unbounded[i] for i in I] + [unbounded[r] for r in J]
            gamma_sigma = cons.gamma[order, :].tolist()
            got = _affine_for_index_set(
                delta, I, J, gamma_sigma, [int(v) for v in cons.c], len(bounded),
                V[[unbounded[i] for i in I], :], V[[unbounded[r] for r in J], :],
            )
            if got is None:
                continue
            if first is None:
                first = (I, J, got)
            if got[1].compatible:
                chosen = (I, J, got)
                break
        if chosen is None:
            if require_compatible or first is None:
                raise NoCompatiblePartition("no index set yields a compatible affine map")
            chosen = first
        I, J, (construction, amap) = chosen
        free = [unbounded[i] for i in I]
        restricted = [unbounded[r] for r in J]
    sigma = Permutation(tuple(bounded + list(free) + list(restricted)))
    classification = SpeciesClassification(tuple(bounds), tuple(bounded), tuple(free), tuple(restricted), sigma)
    return DecomposedStateSpace(
        network, x0, classification, space, amap, construction, permute_network(network, sigma), cons
    )
