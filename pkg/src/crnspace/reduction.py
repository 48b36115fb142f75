"""Elimination of restricted species and lifting of state sets back."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping, Sequence


from .decomposition import AffineMap, DecomposedStateSpace
from .expr import affine_expr
from .model import GuardedExpression, MassAction, ReactionNetwork, mass_action_expr


class IncompatibleMap(ValueError):
    """The affine map does not satisfy the compatibility requirement."""


@dataclass(frozen=True, eq=False)
class ReducedNetwork:
    base: ReactionNetwork  # bounded then free species, in σ order
    link: AffineMap
    d_b: int
    free_names: tuple[str, ...]
    restricted_names: tuple[str, ...]

    @property
    def d_f(self) -> int:
        return self.base.d - self.d_b


def reduce_network(dss: DecomposedStateSpace) -> ReducedNetwork:
    """Drop restricted rows and substitute φ(x_f) into every propensity."""
    amap = dss.map
    if not amap.compatible:
        raise IncompatibleMap("affine map is not compatible with the network")
    net = dss.permuted
    d_b, d_f, d_r = dss.dims
    keep = d_b + d_f
    names = net.species
    free_names = names[d_b:keep]
    restricted_names = names[keep:]
    if d_r == 0:
        return ReducedNetwork(net, amap, d_b, free_names, ())
    phi = {
        restricted_names[r]: affine_expr(amap.F0[r], {free_names[j]: amap.F1[r][j] for j in range(d_f)})
        for r in range(d_r)
    }
    restricted = set(restricted_names)
    props = []
    for k, p in enumerate(net.propensities):
        if isinstance(p, MassAction):
            if any(net.reactants[keep + r, k] for r in range(d_r)):
                props.append(GuardedExpression(mass_action_expr(net, k, p.rate).substitute(phi)))
            else:
                props.append(p)
        elif p.expr.species() & restricted:
            props.append(GuardedExpression(p.expr.substitute(phi)))
        else:
            props.append(p)
    base = ReactionNetwork(
        names[:keep], net.reactants[:keep, :], net.products[:keep, :], tuple(props), net.reaction_labels
    )
    return ReducedNetwork(base, amap, d_b, free_names, restricted_names)


@dataclass(frozen=True, eq=False)
class StateSet:
    """``C × N0^A × {0}`` on bounded and free species, with restricted counts given by φ.

    Species are referred to by name so the description is independent
    of species order.
    """

    bounded_names: tuple[str, ...]
    bounded_states: tuple[tuple[int, ...], ...]
    open_names: tuple[str, ...]  # free species ranging over N0
    zero_names: tuple[str, ...]  # free species fixed at zero
    restricted_names: tuple[str, ...] = ()
    link: AffineMap | None = None
    free_order: tuple[str, ...] = ()  # argument order of ``link``

    def restricted_values(self, counts: Mapping[str, int]) -> tuple[Fraction, ...]:
        if not self.restricted_names:
            return ()
        return self.link([counts[n] for n in self.free_order])

    def contains_counts(self, counts: Mapping[str, int]) -> bool:
        if tuple(counts[n] for n in self.bounded_names) not in set(self.bounded_states):
            return False
        if any(counts[n] != 0 for n in self.zero_names):
            return False
        if any(counts[n] < 0 for n in self.open_names):
            return False
        phi = self.restricted_values(counts)
        return all(Fraction(counts[n]) == v for n, v in zip(self.restricted_names, phi))

    def contains(self, species: Sequence[str], x: Sequence[int]) -> bool:
        return self.contains_counts({n: int(v) for n, v in zip(species, x)})

    def states_in_box(self, species: Sequence[str], box: int) -> Iterator[tuple[int, ...]]:
        """States with every open free count in [0, box], in ``species`` order."""
        import itertools

        for y in self.bounded_states:
            for z in itertools.product(range(box + 1), repeat=len(self.open_names)):
                counts = dict(zip(self.bounded_names, y))
                counts.update(zip(self.open_names, z))
                counts.update({n: 0 for n in self.zero_names})
                phi = self.restricted_values(counts)
                if any(v.denominator != 1 or v < 0 for v in phi):
                    continue
                counts.update({n: int(v) for n, v in zip(self.restricted_names, phi)})
                yield tuple(counts[n] for n in species)

    def describe(self) -> str:
        parts = [f"{self.bounded_names}∈{list(self.bounded_states)}" if self.bounded_names else ""]
        if self.open_names:
            parts.append(f"{', '.join(self.open_names)} ∈ N0")
        if self.zero_names:
            parts.append(f"{', '.join(self.zero_names)} = 0")
        if self.restricted_names:
            parts.append("restricted by φ")
        return "; ".join(p for p in parts if p)


def lift_irreducible(cert: StateSet, reduced: ReducedNetwork) -> StateSet:
    """Attach the graph of φ to a reduced-network state set."""
    if not reduced.restricted_names:
        return cert
    return StateSet(
        cert.bounded_names,
        cert.bounded_states,
        cert.open_names,
        cert.zero_names,
        reduced.restricted_names,
        reduced.link,
        reduced.free_names,
    )


def lift_to_original(cert: StateSet, sigma) -> StateSet:
    """Name-based sets are already order free; kept for symmetry with the σ coordinates."""
    return cert


def augment_state(reduced: ReducedNetwork, x: Sequence[int]) -> tuple[int, ...]:
    """Full σ-order state (x_b, x_f, φ(x_f)) from a reduced state."""
    x = [int(v) for v in x]
    phi = reduced.link(x[reduced.d_b:]) if reduced.restricted_names else ()
    return tuple(x) + tuple(int(v) for v in phi)
