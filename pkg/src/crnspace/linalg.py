"""Exact rational and integer linear algebra.

Everything here works on plain Python integers and
:class:`fractions.Fraction`; matrices are lists of rows.  Sizes in this
domain are tiny (tens of rows), so clarity wins over speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

Matrix = list[list[Fraction]]


class NoSolution(ValueError):
    """The linear system has no solution."""


class NonUnique(ValueError):
    """The linear system has infinitely many solutions."""


def to_fraction_matrix(M: Iterable[Iterable]) -> Matrix:
    return [[Fraction(v) for v in row] for row in M]


def transpose(M: Sequence[Sequence]) -> list[list]:
    if not M:
        return []
    return [list(col) for col in zip(*M)]


def matmul(A: Sequence[Sequence], B: Sequence[Sequence]) -> list[list]:
    Bt = transpose(B)
    return [[sum((a * b for a, b in zip(row, col)), 0) for col in Bt] for row in A]


def matvec(A: Sequence[Sequence], x: Sequence) -> list:
    return [sum((a * b for a, b in zip(row, x)), 0) for row in A]


def rref(M: Iterable[Iterable]) -> tuple[Matrix, list[int]]:
    """Reduced row echelon form and the list of pivot columns."""
    R = to_fraction_matrix(M)
    rows = len(R)
    cols = len(R[0]) if rows else 0
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        p = next((i for i in range(r, rows) if R[i][c] != 0), None)
        if p is None:
            continue
        R[r], R[p] = R[p], R[r]
        inv = 1 / R[r][c]
        R[r] = [v * inv for v in R[r]]
        for i in range(rows):
            if i != r and R[i][c] != 0:
                f = R[i][c]
                R[i] = [a - f * b for a, b in zip(R[i], R[r])]
        pivots.append(c)
        r += 1
    return R, pivots


def rank(M: Iterable[Iterable]) -> int:
    """Rank over the rationals."""
    M = [list(row) for row in M]
    if not M or not M[0]:
        return 0
    return len(rref(M)[1])


def primitive(v: Sequence) -> list[int]:
    """Scale a rational vector to coprime integers, first nonzero entry positive."""
    fr = [Fraction(x) for x in v]
    lcm = 1
    for x in fr:
        lcm = lcm * x.denominator // math.gcd(lcm, x.denominator)
    ints = [int(x * lcm) for x in fr]
    g = 0
    for x in ints:
        g = math.gcd(g, x)
    if g == 0:
        return ints
    ints = [x // g for x in ints]
    lead = next(x for x in ints if x != 0)
    return [-x for x in ints] if lead < 0 else ints


def nullspace_basis(M: Sequence[Sequence], ncols: int | None = None) -> list[list[int]]:
    """Primitive integer basis vectors v with M v = 0."""
    if ncols is None:
        ncols = len(M[0]) if M else 0
    if not M:
        return [[int(i == j) for i in range(ncols)] for j in range(ncols)]
    R, pivots = rref(M)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for r, p in enumerate(pivots):
            v[p] = -R[r][f]
        basis.append(primitive(v))
    return basis


def left_nullspace_basis(M: Sequence[Sequence], nrows: int | None = None) -> list[list[int]]:
    """Primitive integer basis of {γ : γᵀ M = 0}, returned as a list of vectors.

    ``nrows`` is needed only when ``M`` has zero columns.
    """
    if nrows is None:
        nrows = len(M)
    if not M or not M[0]:
        return [[int(i == j) for i in range(nrows)] for j in range(nrows)]
    return nullspace_basis(transpose(M), nrows)


def linear_solve(A: Sequence[Sequence], b: Sequence) -> list[Fraction]:
    """Unique solution of ``A x = b``."""
    rows = len(A)
    cols = len(A[0]) if rows else 0
    aug = [list(A[i]) + [b[i]] for i in range(rows)]
    R, pivots = rref(aug)
    if cols in pivots:
        raise NoSolution("inconsistent linear system")
    if len(pivots) < cols:
        raise NonUnique("linear system has a nontrivial kernel")
    x = [Fraction(0)] * cols
    for r, p in enumerate(pivots):
        x[p] = R[r][cols]
    return x


def inverse(A: Sequence[Sequence]) -> Matrix:
    n = len(A)
    aug = [list(A[i]) + [int(i == j) for j in range(n)] for i in range(n)]
    R, pivots = rref(aug)
    if pivots[:n] != list(range(n)):
        raise NoSolution("matrix is singular")
    return [row[n:] for row in R]


# -- linear programming ------------------------------------------------------------

@dataclass(frozen=True)
class LpOutcome:
    """Result of :func:`lp_min`; ``status`` is Optimal, Infeasible or Unbounded."""

    status: str
    value: Fraction | None = None
    witness: tuple[Fraction, ...] | None = None

    @property
    def optimal(self) -> bool:
        return self.status == "Optimal"


def _simplex(T: list[list[Fraction]], basis: list[int], ncols: int, allowed: int) -> str:
    """Minimize the objective stored in the last row of tableau ``T``.

    Columns ``>= allowed`` never enter.  Bland's rule guarantees termination.
    """
    m = len(T) - 1
    while True:
        obj = T[m]
        enter = next((j for j in range(allowed) if obj[j] < 0), None)
        if enter is None:
            return "Optimal"
        best = None
        leave = None
        for i in range(m):
            a = T[i][enter]
            if a > 0:
                ratio = T[i][ncols] / a
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    best, leave = ratio, i
        if leave is None:
            return "Unbounded"
        piv = T[leave][enter]
        T[leave] = [v / piv for v in T[leave]]
        for i in range(m + 1):
            if i != leave and T[i][enter] != 0:
                f = T[i][enter]
                T[i] = [a - f * b for a, b in zip(T[i], T[leave])]
        basis[leave] = enter


def lp_min(
    objective: Sequence,
    eq_constraints: tuple[Sequence[Sequence], Sequence] | None = None,
    ineq_constraints: tuple[Sequence[Sequence], Sequence] | None = None,
    nonneg: bool = False,
) -> LpOutcome:
    """Minimize ``objective · x`` subject to ``A x = b`` and ``G x >= h``.

    Variables are free unless ``nonneg`` is set.  Exact two-phase simplex.
    """
    n = len(objective)
    A, b = eq_constraints if eq_constraints else ([], [])
    G, h = ineq_constraints if ineq_constraints else ([], [])
    # standard form: x = xp - xm (when free), slack s for each inequality
    nvar = n if nonneg else 2 * n
    ns = len(G)
    rows: list[list[Fraction]] = []
    rhs: list[Fraction] = []

    def expand(row: Sequence) -> list[Fraction]:
        r = [Fraction(v) for v in row]
        return r if nonneg else r + [-v for v in r]

    for row, val in zip(A, b):
        rows.append(expand(row) + [Fraction(0)] * ns)
        rhs.append(Fraction(val))
    for k, (row, val) in enumerate(zip(G, h)):
        slack = [Fraction(0)] * ns
        slack[k] = Fraction(-1)
        rows.append(expand(row) + slack)
        rhs.append(Fraction(val))
    for i in range(len(rows)):
        if rhs[i] < 0:
            rows[i] = [-v for v in rows[i]]
            rhs[i] = -rhs[i]
    m = len(rows)
    width = nvar + ns
    ncols = width + m
    T = [rows[i] + [Fraction(int(i == j)) for j in range(m)] + [rhs[i]] for i in range(m)]
    # phase one objective: sum of artificials, expressed in nonbasic columns
    phase1 = [Fraction(0)] * (ncols + 1)
    for i in range(m):
        phase1 = [a - b for a, b in zip(phase1, T[i])]
    for i in range(m):
        phase1[width + i] = Fraction(0)
    T.append(phase1)
    basis = list(range(width, width + m))
    _simplex(T, basis, ncols, ncols)
    if T[m][ncols] != 0:
        return LpOutcome("Infeasible")
    # drive remaining artificials out of the basis
    for i in range(m):
        if basis[i] >= width:
            j = next((j for j in range(width) if T[i][j] != 0), None)
            if j is None:
                continue
            piv = T[i][j]
            T[i] = [v / piv for v in T[i]]
            for r in range(m + 1):
                if r != i and T[r][j] != 0:
                    f = T[r][j]
                    T[r] = [a - f * bb for a, bb in zip(T[r], T[i])]
            basis[i] = j
    cost = expand(objective) + [Fraction(0)] * ns + [Fraction(0)] * m
    obj = cost + [Fraction(0)]
    for i in range(m):
        cb = obj[basis[i]]
        if cb != 0:
            obj = [a - cb * bb for a, bb in zip(obj, T[i])]
    T[m] = obj
    status = _simplex(T, basis, ncols, width)
    if status == "Unbounded":
        return LpOutcome("Unbounded")
    sol = [Fraction(0)] * width
    for i in range(m):
        if basis[i] < width:
            sol[basis[i]] = T[i][ncols]
    x = sol[:n] if nonneg else [sol[j] - sol[n + j] for j in range(n)]
    value = sum((Fraction(c) * v for c, v in zip(objective, x)), Fraction(0))
    return LpOutcome("Optimal", value, tuple(x))


# -- integer normal forms and cone membership ----------------------------------

def restricted_hnf(M: Sequence[Sequence[int]]) -> tuple[list[list[int]], list[list[int]]]:
    """Echelon-like form using only ``row_j <- a*row_j + b*row_i`` with a, b > 0.

    Returns the transformed rows together with, for each row, the
    nonnegative integer combination of the original rows that produced it.
    """
    rows = [list(map(int, r)) for r in M]
    combos = [[int(i == j) for j in range(len(rows))] for i in range(len(rows))]
    ncols = len(rows[0]) if rows else 0
    active = list(range(len(rows)))
    for c in range(ncols):
        candidates = [i for i in active if rows[i][c] > 0]
        if not candidates:
            continue
        piv = min(candidates, key=lambda i: (rows[i][c], i))
        p = rows[piv][c]
        for i in active:
            e = rows[i][c]
            if i == piv or e >= 0:
                continue
            a, b = p // math.gcd(p, -e), -e // math.gcd(p, -e)
            rows[i] = [a * u + b * v for u, v in zip(rows[i], rows[piv])]
            combos[i] = [a * u + b * v for u, v in zip(combos[i], combos[piv])]
        active.remove(piv)
    return rows, combos


def integer_lattice_contains(M: Sequence[Sequence[int]], target: Sequence[int]) -> bool:
    """Whether ``target`` is an integer combination of the columns of ``M``."""
    d = len(target)
    cols = [[int(M[i][k]) for i in range(d)] for k in range(len(M[0]) if d and M else 0)]
    t = [int(v) for v in target]
    basis: list[tuple[int, list[int]]] = []
    for i in range(d):
        # gcd-eliminate row i among remaining columns
        pool = [col for col in cols if col[i] != 0]
        rest = [col for col in cols if col[i] == 0]
        while len(pool) > 1:
            pool.sort(key=lambda col: abs(col[i]))
            head = pool[0]
            nxt = []
            for col in pool[1:]:
                q = col[i] // head[i]
                reduced = [u - q * v for u, v in zip(col, head)]
                (nxt if reduced[i] != 0 else rest).append(reduced)
            pool = [head] + nxt
        if pool:
            basis.append((i, pool[0]))
        cols = rest
    for i, col in basis:
        if t[i] % col[i] != 0:
            return False
        q = t[i] // col[i]
        t = [u - q * v for u, v in zip(t, col)]
        # pivots are in increasing row order and earlier rows of later columns are zero
    return all(v == 0 for v in t)


@dataclass(frozen=True)
class ConeMembership:
    """Verdict of :func:`nonneg_int_combination`: Yes, No or Undecided."""

    verdict: str
    coefficients: tuple[int, ...] | None = None
    reason: str = ""


def nonneg_int_combination(
    M: Sequence[Sequence[int]],
    target: Sequence[int],
    coeff_cap: int = 64,
    node_limit: int = 20000,
) -> ConeMembership:
    """Decide whether ``M a = target`` has a solution ``a`` in N0^cols.

    Tries a single column, the restricted normal form, then an exact LP
    relaxation followed by branch and bound with ``a_k <= coeff_cap``.
    """
    if coeff_cap < 1:
        raise ValueError("coeff_cap must be positive")
    d = len(target)
    K = len(M[0]) if d and M and M[0] else 0
    t = [int(v) for v in target]
    if all(v == 0 for v in t):
        return ConeMembership("Yes", tuple([0] * K))
    if K == 0:
        return ConeMembership("No", reason="no columns")
    for k in range(K):
        if all(int(M[i][k]) == t[i] for i in range(d)):
            return ConeMembership("Yes", tuple(int(j == k) for j in range(K)))
    # restricted normal form on the rows (reaction vectors) negated so target is e-like
    if sum(1 for v in t if v != 0) == 1:
        i0 = next(i for i, v in enumerate(t) if v != 0)
        sign = 1 if t[i0] > 0 else -1
        order = [j for j in range(d) if j != i0] + [i0]
        rows = [[sign * int(M[j][k]) for j in order] for k in range(K)]
        red, combos = restricted_hnf(rows)
        goal = [0] * (d - 1) + [abs(t[i0])]
        for row, combo in zip(red, combos):
            if row == goal:
                return ConeMembership("Yes", tuple(combo))
    if not integer_lattice_contains(M, t):
        return ConeMembership("No", reason="target outside the integer lattice of the columns")
    zeros = [0] * K
    relax = lp_min(zeros, (M, t), None, nonneg=True)
    if not relax.optimal:
        return ConeMembership("No", reason="rational relaxation infeasible")
    # branch and bound over the box [0, coeff_cap]^K, minimizing the total count
    ones = [1] * K
    nodes = 0
    stack: list[tuple[list[int], list[int]]] = [([0] * K, [coeff_cap] * K)]
    while stack:
        lo, hi = stack.pop()
        nodes += 1
        if nodes > node_limit:
            return ConeMembership("Undecided", reason=f"branch-and-bound node limit {node_limit} reached")
        G = [[int(j == k) for j in range(K)] for k in range(K)] + [
            [-int(j == k) for j in range(K)] for k in range(K)
        ]
        h = lo + [-v for v in hi]
        out = lp_min(ones, (M, t), (G, h), nonneg=True)
        if not out.optimal:
            continue
        x = out.witness
        frac = next((k for k in range(K) if x[k].denominator != 1), None)
        if frac is None:
            coeffs = tuple(int(v) for v in x)
            return ConeMembership("Yes", coeffs)
        f = math.floor(x[frac])
        up_lo = list(lo)
        up_lo[frac] = f + 1
        down_hi = list(hi)
        down_hi[frac] = f
        if up_lo[frac] <= hi[frac]:
            stack.append((up_lo, list(hi)))
        if lo[frac] <= down_hi[frac]:
            stack.append((list(lo), down_hi))
    return ConeMembership(
        "Undecided",
        reason=f"no solution with coefficients <= {coeff_cap} although the rational relaxation is feasible",
    )


def semipositive_left_nullspace(M: Sequence[Sequence[int]], max_rows: int = 20000) -> list[list[int]]:
    """Minimal-support vectors γ >= 0, γ != 0 with γᵀ M = 0 (Farkas' algorithm).

    These are the extreme rays of the cone of semi-positive conservation
    relations, each scaled to primitive integers.
    """
    d = len(M)
    K = len(M[0]) if d else 0
    rows = [([int(v) for v in M[i]], [int(i == j) for j in range(d)]) for i in range(d)]
    for c in range(K):
        keep = [r for r in rows if r[0][c] == 0]
        pos = [r for r in rows if r[0][c] > 0]
        neg = [r for r in rows if r[0][c] < 0]
        for p in pos:
            for n in neg:
                a, b = -n[0][c], p[0][c]
                g = math.gcd(a, b)
                a, b = a // g, b // g
                lhs = [a * u + b * v for u, v in zip(p[0], n[0])]
                rhs = [a * u + b * v for u, v in zip(p[1], n[1])]
                keep.append((lhs, rhs))
        # drop rows whose support strictly contains another row's support
        supports = [frozenset(j for j, v in enumerate(r[1]) if v) for r in keep]
        minimal = []
        seen = set()
        for i, (r, s) in enumerate(zip(keep, supports)):
            if any(t < s for t in supports):
                continue
            if s in seen:
                continue
            seen.add(s)
            minimal.append(r)
        rows = minimal
        if len(rows) > max_rows:
            raise ValueError("too many intermediate rows in invariant computation")
    return sorted((primitive(r[1]) for r in rows), reverse=True)
