"""Reaction-network data model, propensities, conservation data and permutations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence, Union

import numpy as np

from . import linalg
from .expr import (
    Const,
    Expr,
    ExpressionDomainError,
    compile_numpy,
    falling_factorial_term,
)


class AssumptionViolated(ValueError):
    """A propensity is not positive exactly on ``x >= nu_k``."""

    def __init__(self, k: int, x: Sequence[int], detail: str = ""):
        super().__init__(f"reaction {k + 1} violates the support rule at x={list(x)} {detail}".strip())
        self.k = k
        self.x = tuple(x)


@dataclass(frozen=True)
class MassAction:
    rate: Fraction

    def __post_init__(self):
        object.__setattr__(self, "rate", Fraction(self.rate))
        if self.rate <= 0:
            raise ValueError("mass-action rate must be positive")

    def to_text(self) -> str:
        r = self.rate
        return f"mass_action({r.numerator if r.denominator == 1 else f'{r.numerator}/{r.denominator}'})"


@dataclass(frozen=True)
class GuardedExpression:
    expr: Expr

    def to_text(self) -> str:
        return f"expr({self.expr.to_text()})"


Propensity = Union[MassAction, GuardedExpression]


def _readonly(a) -> np.ndarray:
    arr = np.array(a, dtype=np.int64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1) if arr.size else arr.reshape(0, 0)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ReactionNetwork:
    """Species names, reactant matrix V, product matrix O and propensities.

    Propensity expressions refer to species by name, so reordering species
    keeps every propensity meaning the same thing.
    """

    species: tuple[str, ...]
    reactants: np.ndarray
    products: np.ndarray
    propensities: tuple[Propensity, ...]
    reaction_labels: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "species", tuple(self.species))
        object.__setattr__(self, "reactants", _readonly(self.reactants))
        object.__setattr__(self, "products", _readonly(self.products))
        object.__setattr__(self, "propensities", tuple(self.propensities))
        d, K = len(self.species), len(self.propensities)
        if d < 1 or K < 1:
            raise ValueError("a network needs at least one species and one reaction")
        if len(set(self.species)) != d:
            raise ValueError("species names must be distinct")
        if self.reactants.shape != (d, K) or self.products.shape != (d, K):
            raise ValueError("reactant/product matrices must be d x K")
        if (self.reactants < 0).any() or (self.products < 0).any():
            raise ValueError("stoichiometric coefficients must be nonnegative")
        if not self.reaction_labels:
            object.__setattr__(self, "reaction_labels", tuple(f"R{k + 1}" for k in range(K)))
        known = set(self.species)
        for k, p in enumerate(self.propensities):
            if isinstance(p, GuardedExpression):
                unknown = p.expr.species() - known
                if unknown:
                    raise ValueError(f"reaction {k + 1} refers to unknown species {sorted(unknown)}")

    @property
    def d(self) -> int:
        return len(self.species)

    @property
    def K(self) -> int:
        return len(self.propensities)

    @property
    def stoichiometry(self) -> np.ndarray:
        return self.products - self.reactants

    def index(self, name: str) -> int:
        return self.species.index(name)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ReactionNetwork):
            return NotImplemented
        return (
            self.species == other.species
            and np.array_equal(self.reactants, other.reactants)
            and np.array_equal(self.products, other.products)
            and self.propensities == other.propensities
        )

    def __hash__(self):
        return hash((self.species, self.reactants.tobytes(), self.products.tobytes()))

    def subnetwork(self, species: Sequence[int], reactions: Sequence[int]) -> "ReactionNetwork":
        """Restrict to the given species rows and reaction columns (all mass-action 1)."""
        species, reactions = list(species), list(reactions)
        return ReactionNetwork(
            tuple(self.species[i] for i in species),
            self.reactants[np.ix_(species, reactions)],
            self.products[np.ix_(species, reactions)],
            tuple(MassAction(Fraction(1)) for _ in reactions),
            tuple(self.reaction_labels[k] for k in reactions),
        )


# -- propensities -----------------------------------------------------------------

def mass_action_expr(network: ReactionNetwork, k: int, rate: Fraction) -> Expr:
    """The mass-action formula of reaction ``k`` as an expression tree."""
    node: Expr = Const(Fraction(rate))
    for i, name in enumerate(network.species):
        order = int(network.reactants[i, k])
        if order:
            node = node * falling_factorial_term(name, order)
    return node


def propensity_expr(network: ReactionNetwork, k: int) -> Expr:
    p = network.propensities[k]
    if isinstance(p, MassAction):
        return mass_action_expr(network, k, p.rate)
    return p.expr


def propensity_eval(network: ReactionNetwork, k: int, x: Sequence[int]) -> Fraction:
    """Exact value of λ_k(x); zero outside ``x >= nu_k``."""
    nu = network.reactants[:, k]
    if any(int(x[i]) < int(nu[i]) for i in range(network.d)):
        return Fraction(0)
    p = network.propensities[k]
    if isinstance(p, MassAction):
        value = p.rate
        for i in range(network.d):
            n = int(nu[i])
            if n:
                value *= math.comb(int(x[i]), n)
        return value
    counts = {name: int(x[i]) for i, name in enumerate(network.species)}
    return p.expr.evaluate(counts)


def compile_propensities(network: ReactionNetwork) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized float propensities: ``X`` of shape (N, d) to (N, K)."""
    V = network.reactants.astype(float)
    index = {name: i for i, name in enumerate(network.species)}
    parts = []
    for k, p in enumerate(network.propensities):
        if isinstance(p, MassAction):
            nu = network.reactants[:, k]
            terms = [(i, int(nu[i])) for i in range(network.d) if nu[i]]
            rate = float(p.rate)

            def f(X, terms=terms, rate=rate):
                out = np.full(X.shape[0], rate)
                for i, n in terms:
                    xi = X[:, i]
                    val = np.ones_like(xi)
                    for j in range(n):
                        val = val * (xi - j)
                    out = out * val / math.factorial(n)
                return out

            parts.append((f, False))
        else:
            parts.append((compile_numpy(p.expr, index), True))

    def evaluate(X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        guard = (X[:, :, None] >= V[None, :, :]).all(axis=1)
        out = np.zeros((X.shape[0], len(parts)))
        with np.errstate(divide="ignore", invalid="ignore"):
            for k, (f, guarded) in enumerate(parts):
                val = np.broadcast_to(f(X), (X.shape[0],))
                out[:, k] = np.where(guard[:, k], val, 0.0)
        return np.maximum(out, 0.0)

    return evaluate


@dataclass
class SupportReport:
    ok: bool
    checked: int
    violations: list[tuple[int, tuple[int, ...], str]] = field(default_factory=list)

    def raise_if_violated(self) -> None:
        if self.violations:
            k, x, detail = self.violations[0]
            raise AssumptionViolated(k, x, detail)


def validate_support_rule(
    network: ReactionNetwork,
    sample_budget: int = 200,
    box: int = 8,
    seed: int = 0,
    strict: bool = True,
) -> SupportReport:
    """Sample states ``x >= nu_k`` and check λ_k(x) is positive and finite.

    States below ``nu_k`` are zero by construction of the guard.  The
    sample always includes ``nu_k`` itself and its unit neighbours, then
    random states in ``nu_k + [0, box]^d``.
    """
    rng = np.random.default_rng(seed)
    violations = []
    checked = 0
    for k in range(network.K):
        nu = network.reactants[:, k].astype(int)
        states = [nu.copy()]
        for i in range(network.d):
            e = nu.copy()
            e[i] += 1
            states.append(e)
        while len(states) < sample_budget:
            states.append(nu + rng.integers(0, box + 1, size=network.d))
        for x in states[:max(sample_budget, 1)]:
            checked += 1
            try:
                value = propensity_eval(network, k, x)
            except ExpressionDomainError as exc:
                violations.append((k, tuple(int(v) for v in x), str(exc)))
                break
            except ZeroDivisionError as exc:
                violations.append((k, tuple(int(v) for v in x), str(exc)))
                break
            if value <= 0:
                violations.append((k, tuple(int(v) for v in x), f"propensity {value} is not positive"))
                break
    report = SupportReport(not violations, checked, violations)
    if strict:
        report.raise_if_violated()
    return report


# -- conservation data -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ConservationData:
    """Primitive basis Γ (d x n) of the left nullspace of S and c = Γᵀ x0."""

    gamma: np.ndarray
    c: np.ndarray
    x0: np.ndarray

    @property
    def n(self) -> int:
        return self.gamma.shape[1]


def conservation_data(network: ReactionNetwork, x0: Sequence[int]) -> ConservationData:
    if len(x0) != network.d:
        raise ValueError(f"initial state has length {len(x0)}, expected {network.d}")
    S = network.stoichiometry.tolist()
    basis = linalg.left_nullspace_basis(S, network.d)
    gamma = np.array(basis, dtype=np.int64).T.reshape(network.d, len(basis))
    x0 = np.array(x0, dtype=np.int64)
    if (x0 < 0).any():
        raise ValueError("initial state must be nonnegative")
    c = gamma.T @ x0
    return ConservationData(gamma, c, x0)


# -- permutations ------------------------------------------------------------------

@dataclass(frozen=True)
class Permutation:
    """``image[i]`` is σ(i), 0-based: component i of the permuted state is species σ(i)."""

    image: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "image", tuple(int(v) for v in self.image))
        if sorted(self.image) != list(range(len(self.image))):
            raise ValueError(f"{self.image} is not a permutation")

    @classmethod
    def identity(cls, d: int) -> "Permutation":
        return cls(tuple(range(d)))

    @classmethod
    def from_one_based(cls, image: Sequence[int]) -> "Permutation":
        return cls(tuple(v - 1 for v in image))

    def one_based(self) -> tuple[int, ...]:
        return tuple(v + 1 for v in self.image)

    def inverse(self) -> "Permutation":
        inv = [0] * len(self.image)
        for i, s in enumerate(self.image):
            inv[s] = i
        return Permutation(tuple(inv))

    def compose(self, other: "Permutation") -> "Permutation":
        """Apply ``other`` first then ``self``: P_self P_other."""
        return Permutation(tuple(other.image[s] for s in self.image))

    def matrix(self) -> np.ndarray:
        d = len(self.image)
        P = np.zeros((d, d), dtype=np.int64)
        for i, s in enumerate(self.image):
            P[i, s] = 1
        return P

    def apply(self, x):
        """P_σ x."""
        x = np.asarray(x)
        return x[list(self.image), ...]

    def unapply(self, y):
        """P_σᵀ y."""
        return self.inverse().apply(y)


def permute_network(network: ReactionNetwork, sigma: Permutation) -> ReactionNetwork:
    if len(sigma.image) != network.d:
        raise ValueError("permutation size does not match the number of species")
    order = list(sigma.image)
    return ReactionNetwork(
        tuple(network.species[i] for i in order),
        network.reactants[order, :],
        network.products[order, :],
        network.propensities,
        network.reaction_labels,
    )


def inverse_network(network: ReactionNetwork) -> ReactionNetwork:
    """Flip every reaction; all rates become mass-action 1."""
    return ReactionNetwork(
        network.species,
        network.products,
        network.reactants,
        tuple(MassAction(Fraction(1)) for _ in range(network.K)),
        network.reaction_labels,
    )
