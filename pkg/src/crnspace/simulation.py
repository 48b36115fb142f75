"""Gillespie simulation, empirical checks and slow-scale (QSA) simulation.

Randomness comes from a counter-based generator: the uniforms used at
step ``n`` of trajectory ``i`` are a hash of ``(seed, i, n, lane)``.  A
trajectory therefore does not depend on how many others are simulated
alongside it or on how the ensemble is split across threads.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .cascade import find_irreducible
from .decomposition import DecomposedStateSpace, find_decomposed_state_space
from .linalg import left_nullspace_basis
from .model import AssumptionViolated, MassAction, ReactionNetwork, compile_propensities
from .reduction import reduce_network
from .stationary import toxin_qsa_distribution

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * _M1
    z = z ^ (z >> np.uint64(27))
    z = z * _M2
    return z ^ (z >> np.uint64(31))


def counter_uniforms(seed: int, traj: np.ndarray, step: np.ndarray, lane: int) -> np.ndarray:
    """Uniforms in (0, 1) keyed by (seed, trajectory, step, lane)."""
    with np.errstate(over="ignore"):
        key = _mix(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + _GOLDEN)
        z = _mix(key ^ (np.asarray(traj, dtype=np.uint64) * _GOLDEN))
        z = _mix(z + np.asarray(step, dtype=np.uint64) * np.uint64(4) + np.uint64(lane))
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray  # jump times, starting with 0
    states: np.ndarray  # (n_jumps + 1, d)
    reactions: np.ndarray  # fired reaction per jump (0-based)
    seed: int
    t_final: float
    index: int = 0
    species: tuple[str, ...] = ()

    @property
    def events(self) -> int:
        return len(self.reactions)

    def state_at(self, t: float) -> np.ndarray:
        j = int(np.searchsorted(self.times, t, side="right")) - 1
        return self.states[max(j, 0)]

    def to_lines(self) -> str:
        """``# species ...`` header then one ``time count count ...`` record per state."""
        out = [f"# seed {self.seed} trajectory {self.index} t_final {self.t_final!r}"]
        out.append("# time " + " ".join(self.species))
        for t, x in zip(self.times, self.states):
            out.append(f"{float(t)!r} " + " ".join(str(int(v)) for v in x))
        return "\n".join(out) + "\n"


def _select(props: np.ndarray, a0: np.ndarray, u: np.ndarray) -> np.ndarray:
    cum = np.cumsum(props, axis=1)
    k = (cum < (u * a0)[:, None]).sum(axis=1)
    return np.minimum(k, props.shape[1] - 1)


def _jump_loop(
    rates: Callable[[np.ndarray], np.ndarray],
    stoich: np.ndarray,
    reactants: np.ndarray | None,
    X0: np.ndarray,
    idx: np.ndarray,
    t_final: float,
    seed: int,
    record: bool,
):
    """Direct-method loop over a batch of trajectories with global indices ``idx``."""
    N = len(idx)
    X = X0.copy()
    t = np.zeros(N)
    steps = np.zeros(N, dtype=np.int64)
    active = np.ones(N, dtype=bool)
    paths = [([0.0], [X[i].copy()], []) for i in range(N)] if record else None
    while active.any():
        act = np.flatnonzero(active)
        props = rates(X[act])
        a0 = props.sum(axis=1)
        dead = a0 <= 0
        u1 = counter_uniforms(seed, idx[act], steps[act], 0)
        u2 = counter_uniforms(seed, idx[act], steps[act], 1)
        with np.errstate(divide="ignore"):
            tau = np.where(dead, np.inf, -np.log(u1) / np.where(dead, 1.0, a0))
        t_new = t[act] + tau
        done = t_new > t_final
        fire = act[~done]
        if fire.size:
            sel = ~done
            k = _select(props[sel], a0[sel], u2[sel])
            if reactants is not None:
                bad = (X[fire] < reactants[k]).any(axis=1)
                if bad.any():
                    j = int(np.flatnonzero(bad)[0])
                    raise AssumptionViolated(int(k[j]), tuple(X[fire[j]]), "fired with a reactant missing")
            X[fire] += stoich[k]
            t[fire] = t_new[sel]
            steps[fire] += 1
            if record:
                for j, i in enumerate(fire):
                    paths[i][0].append(float(t[i]))
                    paths[i][1].append(X[i].copy())
                    paths[i][2].append(int(k[j]))
        active[act[done]] = False
    return X, steps, paths


def _chunks(n: int, threads: int) -> list[np.ndarray]:
    threads = max(1, min(threads, n))
    return [c for c in np.array_split(np.arange(n), threads) if c.size]


def ssa_simulate(
    network: ReactionNetwork,
    x0: Sequence[int],
    t_final: float,
    seed: int,
    index: int = 0,
) -> Trajectory:
    """One exact trajectory (Gillespie direct method), stream ``index`` of ``seed``."""
    rates = compile_propensities(network)
    X0 = np.array([x0], dtype=np.int64)
    _, _, paths = _jump_loop(
        rates, network.stoichiometry.T.astype(np.int64), network.reactants.T.astype(np.int64),
        X0, np.array([index]), t_final, seed, True,
    )
    times, states, ks = paths[0]
    return Trajectory(np.array(times), np.array(states), np.array(ks, dtype=np.int64), seed, t_final, index, network.species)


@dataclass
class EnsembleResult:
    final: np.ndarray  # (N, d) states at t_final
    events: np.ndarray  # jumps per trajectory
    seed: int
    t_final: float

    def mean(self, i: int) -> float:
        return float(self.final[:, i].mean())

    def confidence_interval(self, i: int, z: float = 1.96) -> tuple[float, float]:
        v = self.final[:, i].astype(float)
        half = z * v.std(ddof=1) / math.sqrt(len(v))
        return float(v.mean() - half), float(v.mean() + half)


def ssa_ensemble(
    network: ReactionNetwork,
    x0: Sequence[int],
    t_final: float,
    seed: int,
    n_traj: int,
    threads: int = 1,
) -> EnsembleResult:
    """States at ``t_final`` of trajectories 0..n_traj-1, advanced together."""
    rates = compile_propensities(network)
    Z = network.stoichiometry.T.astype(np.int64)
    V = network.reactants.T.astype(np.int64)
    X0 = np.tile(np.array(x0, dtype=np.int64), (n_traj, 1))

    def run(chunk):
        X, steps, _ = _jump_loop(rates, Z, V, X0[chunk], chunk, t_final, seed, False)
        return chunk, X, steps

    final = np.empty_like(X0)
    events = np.empty(n_traj, dtype=np.int64)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        for chunk, X, steps in pool.map(run, _chunks(n_traj, threads)):
            final[chunk] = X
            events[chunk] = steps
    return EnsembleResult(final, events, seed, t_final)


# -- empirical checks ---------------------------------------------------------------

def empirical_support_check(
    trajectories: Sequence[Trajectory] | np.ndarray, decomposed: DecomposedStateSpace
) -> list[tuple[int, ...]]:
    """Visited states that do not split as (x_b in E_b, x_f, φ(x_f))."""
    bad: list[tuple[int, ...]] = []
    seen = set()
    if isinstance(trajectories, np.ndarray):
        rows = [trajectories]
    else:
        rows = [tr.states for tr in trajectories]
    for states in rows:
        for x in states:
            key = tuple(int(v) for v in x)
            if key in seen:
                continue
            seen.add(key)
            if not decomposed.contains(key):
                bad.append(key)
    return bad


def time_average_distribution(trajectory: Trajectory, burn_in: float = 0.0) -> dict[tuple[int, ...], float]:
    """Fraction of time in each state over [burn_in, t_final]."""
    if trajectory.t_final <= burn_in:
        raise ValueError("t_final must exceed burn_in")
    ends = np.append(trajectory.times[1:], trajectory.t_final)
    starts = np.maximum(trajectory.times, burn_in)
    dur = np.clip(ends - starts, 0.0, None)
    occ: dict[tuple[int, ...], float] = {}
    for x, w in zip(trajectory.states, dur):
        if w > 0:
            key = tuple(int(v) for v in x)
            occ[key] = occ.get(key, 0.0) + float(w)
    total = trajectory.t_final - burn_in
    return {k: v / total for k, v in sorted(occ.items())}


def histogram_json(dist: Mapping[tuple[int, ...], float], species: Sequence[str]) -> str:
    entries = [{"state": list(k), "probability": p} for k, p in sorted(dist.items())]
    return json.dumps({"species": list(species), "histogram": entries}, indent=2, sort_keys=True)


# -- slow-scale simulation ------------------------------------------------------------

class CertificationUnavailable(RuntimeError):
    def __init__(self, slow_state, detail: str = ""):
        super().__init__(f"fast subnetwork not certified at slow state {tuple(slow_state)}: {detail}")
        self.slow_state = tuple(slow_state)


class ProviderTailUnbounded(RuntimeError):
    pass


@dataclass(eq=False)
class FastSlowPartition:
    fast: tuple[int, ...]
    slow: tuple[int, ...]
    L: np.ndarray  # (m, d) slow-variable functionals, L @ ζ_k = 0 for fast k

    def __post_init__(self):
        self.L = np.asarray(self.L, dtype=np.int64)

    def slow_state(self, x: Sequence[int]) -> tuple[int, ...]:
        return tuple(int(v) for v in self.L @ np.asarray(x, dtype=np.int64))


def fast_slow_partition(network: ReactionNetwork, fast: Sequence[int], slow: Sequence[int] | None = None) -> FastSlowPartition:
    fast = tuple(sorted(fast))
    if slow is None:
        slow = tuple(k for k in range(network.K) if k not in fast)
    S = network.stoichiometry
    Sf = [[int(S[i, k]) for k in fast] for i in range(network.d)]
    L = np.array(left_nullspace_basis(Sf, network.d), dtype=np.int64).reshape(-1, network.d)
    if fast and (L @ S[:, list(fast)]).any():
        raise AssertionError("slow variables are not invariant under the fast reactions")
    return FastSlowPartition(fast, tuple(slow), L)


@dataclass(eq=False)
class FastConditional:
    states: np.ndarray  # (M, d) full states consistent with the slow state
    probs: np.ndarray
    tail_bound: float = 0.0


def qsa_slow_propensities(
    slow_state: Sequence[int],
    partition: FastSlowPartition,
    fast_stationary: Callable[[tuple[int, ...]], FastConditional],
    rates: Callable[[np.ndarray], np.ndarray],
    tail_tol: float = 1e-8,
) -> np.ndarray:
    """λ̂_k = Σ_z λ_k(x(z)) π_fast(z) for every slow reaction k."""
    cond = fast_stationary(tuple(int(v) for v in slow_state))
    if cond.tail_bound > tail_tol:
        raise ProviderTailUnbounded(f"tail bound {cond.tail_bound:.3g} exceeds {tail_tol:.3g}")
    lam = rates(cond.states.astype(float))[:, list(partition.slow)]
    return cond.probs @ lam


class ToxinFastProvider:
    """Fast law for the translation/annihilation pair of the toxin model.

    For each slow state the fast subnetwork is decomposed and certified
    again, so the choice of free and restricted species follows the sign
    of y = x_T - x_A; the law of the free count is the closed form.
    """

    def __init__(self, network: ReactionNetwork, partition: FastSlowPartition, tail_tol: float = 1e-12):
        self.network = network
        self.partition = partition
        self.tail_tol = tail_tol
        fast = list(partition.fast)
        sub_species = sorted({i for k in fast for i in range(network.d)
                              if network.reactants[i, k] or network.products[i, k]})
        self.sub_species = sub_species
        self.fast_net = network.subnetwork(sub_species, fast)
        translation = [k for k in fast if network.stoichiometry[:, k].sum() > 0]
        annihilation = [k for k in fast if network.stoichiometry[:, k].sum() < 0]
        if len(translation) != 1 or len(annihilation) != 1:
            raise ValueError("expected one producing and one annihilating fast reaction")
        p1, p2 = network.propensities[translation[0]], network.propensities[annihilation[0]]
        if not (isinstance(p1, MassAction) and isinstance(p2, MassAction)):
            raise ValueError("fast reactions must be mass action")
        self.theta1, self.theta2 = float(p1.rate), float(p2.rate)
        # species roles in the fast pair
        pair = [i for i in sub_species if network.reactants[i, annihilation[0]]]
        self.t_idx, self.a_idx = pair
        self.m_idx = [i for i in sub_species if i not in pair][0]
        self.cache: dict[tuple[int, ...], FastConditional] = {}
        self.classification: dict[int, tuple[str, str]] = {}  # y -> (free, restricted)
        self._template: dict[tuple[int, ...], np.ndarray] = {}

    def _representative(self, slow: tuple[int, ...]) -> np.ndarray:
        """A full state with the given slow coordinates and min(x_T, x_A) = 0."""
        L = self.partition.L
        d = self.network.d
        # solve L x = slow with x_T, x_A >= 0 and min = 0; L is unimodular on the other coordinates
        best = None
        y_row = None
        for j in range(L.shape[0]):
            if L[j, self.t_idx] != 0 or L[j, self.a_idx] != 0:
                y_row = j
        for t_val, a_val in ((0, None), (None, 0)):
            x = np.zeros(d, dtype=np.int64)
            # coordinates outside the pair are read off rows that are unit vectors
            for j in range(L.shape[0]):
                if j == y_row:
                    continue
                nz = np.flatnonzero(L[j])
                if len(nz) != 1 or L[j, nz[0]] != 1:
                    raise ValueError("slow variables are not in the expected form")
                x[nz[0]] = slow[j]
            cT, cA = L[y_row, self.t_idx], L[y_row, self.a_idx]
            if t_val == 0:
                if (slow[y_row]) % cA:
                    continue
                x[self.a_idx] = slow[y_row] // cA
            else:
                if (slow[y_row]) % cT:
                    continue
                x[self.t_idx] = slow[y_row] // cT
            if (x >= 0).all() and tuple(L @ x) == tuple(slow):
                best = x
                break
        if best is None:
            raise CertificationUnavailable(slow, "no nonnegative state with these slow coordinates")
        return best

    def __call__(self, slow: tuple[int, ...]) -> FastConditional:
        hit = self.cache.get(slow)
        if hit is not None:
            return hit
        x = self._representative(slow)
        sub_x0 = tuple(int(x[i]) for i in self.sub_species)
        y = int(x[self.t_idx] - x[self.a_idx])
        try:
            dss = find_decomposed_state_space(self.fast_net, sub_x0, require_compatible=True)
            red = reduce_network(dss)
            res = find_irreducible(red, dss.bounded_space.states)
        except Exception as exc:
            raise CertificationUnavailable(slow, str(exc)) from None
        mine = [c for c in res.certificates if c.state_set.contains(self.fast_net.species, sub_x0)]
        if res.verdict != "Complete" or len(mine) != 1:
            raise CertificationUnavailable(slow, f"verdict {res.verdict}")
        cert = mine[0]
        names = self.fast_net.species
        self.classification[y] = (",".join(red.free_names), ",".join(red.restricted_names))
        x1 = int(x[self.m_idx])
        dist = toxin_qsa_distribution(x1, y, self.theta1, self.theta2, self.tail_tol)
        states = np.tile(x, (len(dist.values), 1))
        states[:, self.t_idx] += dist.values
        states[:, self.a_idx] += dist.values
        # every state must lie in the certified class
        for row in states[:: max(1, len(states) // 4)]:
            if not cert.state_set.contains(names, [int(row[i]) for i in self.sub_species]):
                raise CertificationUnavailable(slow, "closed form left the certified class")
        cond = FastConditional(states, dist.probs, dist.tail_bound)
        self.cache[slow] = cond
        return cond


@dataclass
class SlowEnsembleResult:
    final: np.ndarray  # (N, m) slow states at t_final
    events: np.ndarray
    seed: int
    t_final: float
    distinct_slow_states: int = 0

    def mean(self, j: int) -> float:
        return float(self.final[:, j].mean())

    def confidence_interval(self, j: int, z: float = 1.96) -> tuple[float, float]:
        v = self.final[:, j].astype(float)
        half = z * v.std(ddof=1) / math.sqrt(len(v))
        return float(v.mean() - half), float(v.mean() + half)


class _SlowRates:
    """λ̂ rows cached per slow state, evaluated for a batch of slow states."""

    def __init__(self, network, partition, provider, tail_tol):
        self.partition = partition
        self.provider = provider
        self.rates = compile_propensities(network)
        self.tail_tol = tail_tol
        self.cache: dict[tuple[int, ...], np.ndarray] = {}

    def __call__(self, S: np.ndarray) -> np.ndarray:
        S = np.asarray(S, dtype=np.int64)
        uniq, inv = np.unique(S, axis=0, return_inverse=True)
        rows = np.empty((len(uniq), len(self.partition.slow)))
        for j, s in enumerate(uniq):
            key = tuple(int(v) for v in s)
            val = self.cache.get(key)
            if val is None:
                val = qsa_slow_propensities(key, self.partition, self.provider, self.rates, self.tail_tol)
                self.cache[key] = val
            rows[j] = val
        return rows[np.asarray(inv).reshape(-1)]


def sssa_simulate(
    network: ReactionNetwork,
    partition: FastSlowPartition,
    fast_stationary: Callable[[tuple[int, ...]], FastConditional],
    x0: Sequence[int],
    t_final: float,
    seed: int,
    n_traj: int = 1,
    record: bool = False,
    tail_tol: float = 1e-8,
) -> SlowEnsembleResult | Trajectory:
    """Jump process on the slow variables with QSA-averaged slow rates.

    With ``record=True`` and one trajectory the full slow path is returned.
    """
    slow_stoich = (partition.L @ network.stoichiometry[:, list(partition.slow)]).T.astype(np.int64)
    rates = _SlowRates(network, partition, fast_stationary, tail_tol)
    s0 = np.array(partition.slow_state(x0), dtype=np.int64)
    S0 = np.tile(s0, (n_traj, 1))
    idx = np.arange(n_traj)
    S, steps, paths = _jump_loop(rates, slow_stoich, None, S0, idx, t_final, seed, record)
    if record:
        times, states, ks = paths[0]
        names = tuple(f"s{j + 1}" for j in range(partition.L.shape[0]))
        return Trajectory(np.array(times), np.array(states), np.array([partition.slow[k] for k in ks], dtype=np.int64),
                          seed, t_final, 0, names)
    return SlowEnsembleResult(S, steps, seed, t_final, len(rates.cache))
