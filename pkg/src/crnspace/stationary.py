"""Complex balance and product-form stationary distributions.

Stochastic mass-action propensities here are ``θ Π C(x_i, ν_i)``; the
matching deterministic rate constant is ``θ / Π ν_i!`` and that is the
constant used in the complex-balance equations.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .model import MassAction, ReactionNetwork, propensity_eval
from .reduction import StateSet


class NotMassAction(ValueError):
    pass


class NotFound(RuntimeError):
    """The solver did not find a complex-balanced point (not a proof that none exists)."""


class DivergentNormalizer(ArithmeticError):
    pass


Complex = tuple[int, ...]


def complexes(network: ReactionNetwork) -> list[Complex]:
    """Distinct reactant and product columns, sorted."""
    seen = set()
    for k in range(network.K):
        seen.add(tuple(int(v) for v in network.reactants[:, k]))
        seen.add(tuple(int(v) for v in network.products[:, k]))
    return sorted(seen)


def deterministic_rates(network: ReactionNetwork) -> list[Fraction]:
    out = []
    for k, p in enumerate(network.propensities):
        if not isinstance(p, MassAction):
            raise NotMassAction(f"reaction {k + 1} is not mass action")
        denom = 1
        for v in network.reactants[:, k]:
            denom *= math.factorial(int(v))
        out.append(p.rate / denom)
    return out


@dataclass
class ComplexBalancedPoint:
    r: tuple
    residual: float


@dataclass
class Rejected:
    complex: Complex
    defect: float


def _monomial(r: Sequence, nu: Sequence[int]):
    out = 1
    for ri, e in zip(r, nu):
        if e:
            out = out * ri ** int(e)
    return out


def balance_defects(network: ReactionNetwork, r: Sequence) -> dict[Complex, object]:
    """Inflow minus outflow for every complex at concentration ``r``."""
    kappa = deterministic_rates(network)
    defects: dict[Complex, object] = {z: 0 for z in complexes(network)}
    for k in range(network.K):
        nu = tuple(int(v) for v in network.reactants[:, k])
        rho = tuple(int(v) for v in network.products[:, k])
        flux = kappa[k] * _monomial(r, nu)
        defects[nu] = defects[nu] - flux
        defects[rho] = defects[rho] + flux
    return defects


def check_complex_balanced(network: ReactionNetwork, r: Sequence, tol: float = 1e-10) -> ComplexBalancedPoint | Rejected:
    if any(v <= 0 for v in r):
        raise ValueError("r must be strictly positive")
    defects = balance_defects(network, r)
    if not defects:
        return ComplexBalancedPoint(tuple(r), 0.0)
    worst = max(defects, key=lambda z: abs(defects[z]))
    residual = float(abs(defects[worst]))
    if residual <= tol:
        return ComplexBalancedPoint(tuple(r), residual)
    return Rejected(worst, residual)


def solve_complex_balance(network: ReactionNetwork, max_iter: int = 200, tol: float = 1e-10) -> ComplexBalancedPoint:
    """Damped Gauss-Newton on the balance residual in log-concentration space."""
    kappa = np.array([float(q) for q in deterministic_rates(network)])
    zs = complexes(network)
    zi = {z: i for i, z in enumerate(zs)}
    V = network.reactants.astype(float)
    src = np.array([zi[tuple(int(v) for v in network.reactants[:, k])] for k in range(network.K)], dtype=int)
    dst = np.array([zi[tuple(int(v) for v in network.products[:, k])] for k in range(network.K)], dtype=int)
    B = np.zeros((len(zs), network.K))  # complex incidence: +1 at product, -1 at reactant
    B[dst, np.arange(network.K)] += 1.0
    B[src, np.arange(network.K)] -= 1.0

    def residual(u):
        flux = kappa * np.exp(V.T @ u)
        return B @ flux, flux

    u = np.zeros(network.d)
    F, flux = residual(u)
    for _ in range(max_iter):
        norm = np.abs(F).max() if F.size else 0.0
        if norm < tol * 1e-2:
            break
        J = B @ (flux[:, None] * V.T)
        step, *_ = np.linalg.lstsq(J, -F, rcond=None)
        t = 1.0
        while t > 1e-8:
            F_new, flux_new = residual(u + t * step)
            if np.abs(F_new).max() < norm:
                break
            t /= 2
        else:
            break
        u = u + t * step
        F, flux = F_new, flux_new
    r = tuple(float(v) for v in np.exp(u))
    res = check_complex_balanced(network, r, tol)
    if isinstance(res, Rejected):
        raise NotFound(f"no complex-balanced point found (worst defect {res.defect:.3g} at {res.complex})")
    return res


# -- product-form distributions ------------------------------------------------------

def _log_series_sum(log_ratio: Callable[[int], float], tail_tol: float, max_terms: int) -> tuple[float, int]:
    """log Σ_{j≥0} t_j with t_0 = 1 and log(t_j / t_{j-1}) = log_ratio(j).

    Stops once the ratio is below 1 and a geometric bound on the
    remaining tail is below ``tail_tol`` relative to the partial sum.
    The bound assumes the ratio is non-increasing from that point on.
    """
    log_t = 0.0
    terms = [0.0]
    for j in range(1, max_terms + 1):
        lr = log_ratio(j)
        log_t += lr
        terms.append(log_t)
        if lr < 0:
            q = math.exp(lr)
            m = max(terms)
            partial = m + math.log(sum(math.exp(v - m) for v in terms))
            tail = log_t + math.log(q / (1 - q)) if q < 1 else math.inf
            if tail - partial < math.log(tail_tol):
                return partial, j
    raise DivergentNormalizer(f"series did not converge within {max_terms} terms")


@dataclass(eq=False)
class ProductFormDistribution:
    r: dict[str, float]
    support: StateSet
    Znorm: float
    split: bool
    log_Znorm: float = 0.0
    kappa: dict[str, Callable[[int], float]] = field(default_factory=dict)
    truncation: dict[str, int] = field(default_factory=dict)
    unsupported_queries: int = 0

    def _log_weight(self, counts: Mapping[str, int]) -> float:
        total = 0.0
        for name, x in counts.items():
            if x == 0 or name not in self.r:
                continue
            total += x * math.log(self.r[name])
            kap = self.kappa.get(name)
            if kap is None:
                total -= math.lgamma(x + 1)
            else:
                total -= sum(math.log(kap(j)) for j in range(1, x + 1))
        return total

    def prob_counts(self, counts: Mapping[str, int]) -> float:
        if not self.support.contains_counts(counts):
            self.unsupported_queries += 1
            return 0.0
        names = set(self.support.bounded_names) | set(self.support.open_names)
        return math.exp(self._log_weight({n: v for n, v in counts.items() if n in names}) - self.log_Znorm)

    def prob(self, species: Sequence[str], x: Sequence[int]) -> float:
        return self.prob_counts({n: int(v) for n, v in zip(species, x)})

    def __call__(self, species: Sequence[str], x: Sequence[int]) -> float:
        return self.prob(species, x)

    def marginal(self, name: str, n_max: int) -> np.ndarray:
        """Marginal law of an open species on 0..n_max (exact by the factorization)."""
        if name not in self.support.open_names:
            raise KeyError(f"{name} is not an open coordinate of the support")
        own = [self._log_weight({name: j}) for j in range(n_max + 1)]
        z = self.log_factor(name)
        return np.exp(np.array(own) - z)

    def log_factor(self, name: str) -> float:
        return self._factors[name]

    _factors: dict[str, float] = field(default_factory=dict)


def _bounded_log_sum(r: Mapping[str, float], support: StateSet) -> float:
    logs = []
    for y in support.bounded_states:
        v = 0.0
        for name, c in zip(support.bounded_names, y):
            if c:
                v += c * math.log(r[name]) - math.lgamma(c + 1)
        logs.append(v)
    if not logs:
        return 0.0
    m = max(logs)
    return m + math.log(sum(math.exp(v - m) for v in logs))


def _named_r(r, species: Sequence[str] | None) -> dict[str, float]:
    if isinstance(r, Mapping):
        return {n: float(v) for n, v in r.items()}
    if species is None:
        raise ValueError("species names are required when r is a sequence")
    return {n: float(v) for n, v in zip(species, r)}


def product_form_pi(r, support: StateSet, species: Sequence[str] | None = None) -> ProductFormDistribution:
    """π(x) ∝ Π r_i^{x_i} / x_i! on ``C × N0^A × {0}``.

    ``r`` refers to the reduced network (bounded and free species);
    restricted counts of the support follow φ and carry no weight.

    The normalizer is exp(Σ_{i∈A} r_i) times the finite sum over C.
    """
    rn = _named_r(r, species)
    factors = {name: rn[name] for name in support.open_names}
    log_z = sum(factors.values()) + _bounded_log_sum(rn, support)
    dist = ProductFormDistribution(rn, support, math.exp(log_z), True, log_z)
    dist._factors = factors
    return dist


def general_kinetics_pi(
    r,
    kappa: Mapping[str, Callable[[int], float]],
    support: StateSet,
    species: Sequence[str] | None = None,
    tail_tol: float = 1e-15,
    max_terms: int = 100_000,
) -> ProductFormDistribution:
    """π(x) ∝ Π r_i^{x_i} / Π_{j=1}^{x_i} κ_i(j).

    Species without a κ entry use κ(j) = j.  Open coordinates are
    normalized by series summation with a ratio-test tail bound; bounded
    coordinates by the finite sum over C.
    """
    rn = _named_r(r, species)
    factors: dict[str, float] = {}
    truncation: dict[str, int] = {}
    for name in support.open_names:
        kap = kappa.get(name)
        if kap is None:
            factors[name] = rn[name]
            continue
        lr = math.log(rn[name])
        factors[name], truncation[name] = _log_series_sum(lambda j: lr - math.log(kap(j)), tail_tol, max_terms)
    logs = []
    for y in support.bounded_states:
        v = 0.0
        for name, c in zip(support.bounded_names, y):
            if c:
                kap = kappa.get(name)
                v += c * math.log(rn[name])
                v -= math.lgamma(c + 1) if kap is None else sum(math.log(kap(j)) for j in range(1, c + 1))
        logs.append(v)
    m = max(logs) if logs else 0.0
    log_b = m + math.log(sum(math.exp(v - m) for v in logs)) if logs else 0.0
    log_z = sum(factors.values()) + log_b
    dist = ProductFormDistribution(rn, support, math.exp(log_z), False, log_z, dict(kappa), truncation)
    dist._factors = factors
    return dist


# -- toxin-antitoxin fast subnetwork ------------------------------------------------

@dataclass
class FiniteDistribution:
    values: np.ndarray  # z = 0..n-1
    probs: np.ndarray
    tail_bound: float

    def mean(self) -> float:
        return float(self.values @ self.probs)

    def expect(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(f(self.values) @ self.probs)


def toxin_qsa_distribution(x1: int, y: int, theta1: float, theta2: float, tail_tol: float = 1e-12) -> FiniteDistribution:
    """Stationary law of min(x_T, x_A) for the fast translation/annihilation pair.

    π(z) ∝ ρ^z |y|! / (z! (z+|y|)!) with ρ = θ1 x1 / θ2, and a point mass
    at 0 when x1 = 0.
    """
    if theta1 <= 0 or theta2 <= 0 or tail_tol <= 0:
        raise ValueError("theta1, theta2 and tail_tol must be positive")
    if x1 == 0:
        return FiniteDistribution(np.array([0]), np.array([1.0]), 0.0)
    a = abs(int(y))
    rho = theta1 * x1 / theta2
    logs = [0.0]
    z = 0
    while True:
        z += 1
        ratio = rho / (z * (z + a))
        logs.append(logs[-1] + math.log(ratio))
        if ratio < 0.5:
            m = max(logs)
            total = sum(math.exp(v - m) for v in logs)
            q = rho / ((z + 1) * (z + 1 + a))
            tail = math.exp(logs[-1] - m) * q / (1 - q) / total
            if tail < tail_tol:
                break
    w = np.exp(np.array(logs) - max(logs))
    return FiniteDistribution(np.arange(len(logs)), w / w.sum(), tail)


def toxin_kappa(y: int) -> Callable[[int], float]:
    """Association rate encoding of the fast pair: κ(j) = j (j + |y|)."""
    a = abs(int(y))
    return lambda j: float(j * (j + a))


# -- generator residual -----------------------------------------------------------

def stationarity_residual(
    pi: Callable[[tuple[int, ...]], float],
    network: ReactionNetwork,
    box: Sequence[int],
    states: Iterable[Sequence[int]] | None = None,
) -> float:
    """max |(πQ)(x)| over states whose in- and out-neighbourhoods lie in the box."""
    box = tuple(int(b) for b in box)
    if states is None:
        states = itertools.product(*(range(b + 1) for b in box))
    Z = [tuple(int(v) for v in network.stoichiometry[:, k]) for k in range(network.K)]
    V = [tuple(int(v) for v in network.reactants[:, k]) for k in range(network.K)]

    def inside(z):
        return all(0 <= a <= b for a, b in zip(z, box))

    def rate(k, x):
        if any(a < b for a, b in zip(x, V[k])):
            return 0.0
        return float(propensity_eval(network, k, x))

    worst = 0.0
    for x in states:
        x = tuple(int(v) for v in x)
        interior = True
        out_rate = 0.0
        inflow = 0.0
        for k in range(network.K):
            lam = rate(k, x)
            if lam > 0:
                if not inside(tuple(a + b for a, b in zip(x, Z[k]))):
                    interior = False
                    break
                out_rate += lam
            pre = tuple(a - b for a, b in zip(x, Z[k]))
            if any(v < 0 for v in pre):
                continue
            lam_pre = rate(k, pre)
            if lam_pre > 0:
                if not inside(pre):
                    interior = False
                    break
                inflow += pi(pre) * lam_pre
        if not interior:
            continue
        worst = max(worst, abs(inflow - pi(x) * out_rate))
    return worst
