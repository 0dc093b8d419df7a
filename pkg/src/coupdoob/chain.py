"""Finite Markov chains: n-step laws, total variation, invariant measures and
support-based equivalence / non-singularity checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

__all__ = [
    "ChainError",
    "Dist",
    "FiniteChain",
    "ChainStructure",
    "n_step",
    "total_variation",
    "invariant_measures",
    "structure",
    "check_equivalence",
    "check_nonsingular",
    "convergence_curve",
    "support_sequences",
]

ROW_TOL = 1e-12
INVARIANCE_TOL = 1e-10


class ChainError(ValueError):
    """Invalid chain, distribution or state label."""


def _as_label_tuple(states: Iterable[Hashable]) -> tuple:
    states = tuple(states)
    if len(set(states)) != len(states):
        raise ChainError("duplicate state labels")
    if not states:
        raise ChainError("a chain needs at least one state")
    return states


@dataclass(frozen=True, eq=False)
class Dist:
    """Probability vector over an ordered tuple of state labels."""

    states: tuple
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.shape != (len(self.states),):
            raise ChainError(
                f"weights have shape {w.shape}, expected ({len(self.states)},)"
            )
        if np.any(w < 0):
            raise ChainError("negative probability in distribution")
        if abs(w.sum() - 1.0) > ROW_TOL:
            raise ChainError(f"distribution sums to {w.sum()!r}, not 1")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @classmethod
    def point(cls, states: Sequence, x) -> "Dist":
        states = tuple(states)
        try:
            i = states.index(x)
        except ValueError:
            raise ChainError(f"unknown state {x!r}") from None
        w = np.zeros(len(states))
        w[i] = 1.0
        return cls(states, w)

    def __getitem__(self, x) -> float:
        try:
            return float(self.weights[self.states.index(x)])
        except ValueError:
            raise ChainError(f"unknown state {x!r}") from None

    @property
    def support(self) -> frozenset:
        return frozenset(s for s, w in zip(self.states, self.weights) if w > 0)

    def as_dict(self) -> dict:
        return {s: float(w) for s, w in zip(self.states, self.weights) if w > 0}

    def __repr__(self):
        return f"Dist({self.as_dict()!r})"


@dataclass(frozen=True, eq=False)
class FiniteChain:
    """Row-stochastic transition matrix over labelled states.

    The matrix is stored densely and made read-only; ``rows`` gives the sparse
    per-state view.
    """

    states: tuple
    matrix: np.ndarray
    _index: dict = field(init=False, repr=False)

    def __post_init__(self):
        states = _as_label_tuple(self.states)
        P = np.array(self.matrix, dtype=float)
        n = len(states)
        if P.shape != (n, n):
            raise ChainError(f"matrix has shape {P.shape}, expected ({n}, {n})")
        if not np.all(np.isfinite(P)):
            raise ChainError("non-finite transition probability")
        if np.any(P < 0):
            i = int(np.argwhere(P < 0)[0, 0])
            raise ChainError(f"negative transition probability in row {states[i]!r}")
        sums = P.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_TOL)
        if bad.size:
            i = int(bad[0])
            raise ChainError(f"row {states[i]!r} sums to {sums[i]!r}, not 1")
        P.flags.writeable = False
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "matrix", P)
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(states)})

    @classmethod
    def from_matrix(cls, matrix, states: Sequence | None = None) -> "FiniteChain":
        matrix = np.asarray(matrix, dtype=float)
        if states is None:
            states = range(matrix.shape[0])
        return cls(tuple(states), matrix)

    @classmethod
    def from_rows(cls, states: Sequence, rows: Mapping[Hashable, Mapping]) -> "FiniteChain":
        states = _as_label_tuple(states)
        index = {s: i for i, s in enumerate(states)}
        P = np.zeros((len(states), len(states)))
        for s in states:
            if s not in rows:
                raise ChainError(f"missing row for state {s!r}")
        for s, row in rows.items():
            if s not in index:
                raise ChainError(f"row given for unknown state {s!r}")
            for t, prob in row.items():
                if t not in index:
                    raise ChainError(f"row {s!r} references unknown state {t!r}")
                P[index[s], index[t]] = float(prob)
        return cls(states, P)

    @property
    def size(self) -> int:
        return len(self.states)

    def index(self, x) -> int:
        try:
            return self._index[x]
        except (KeyError, TypeError):
            raise ChainError(f"unknown state {x!r}") from None

    @property
    def rows(self) -> dict:
        return {
            s: {t: float(p) for t, p in zip(self.states, self.matrix[i]) if p > 0}
            for i, s in enumerate(self.states)
        }

    def row(self, x) -> Dist:
        return Dist(self.states, self.matrix[self.index(x)])

    def power(self, n: int) -> "FiniteChain":
        """The n-step chain, built by repeated multiplication."""
        if n < 1:
            raise ChainError("power needs n >= 1")
        M = self.matrix
        for _ in range(n - 1):
            M = M @ self.matrix
        return FiniteChain(self.states, M)

    def adjacency(self) -> np.ndarray:
        """Boolean digraph of strictly positive transitions."""
        return self.matrix > 0


def _start_vector(chain: FiniteChain, start) -> np.ndarray:
    if isinstance(start, Dist):
        if start.states != chain.states:
            raise ChainError("distribution is over a different state list")
        return np.array(start.weights)
    v = np.zeros(chain.size)
    v[chain.index(start)] = 1.0
    return v


def n_step(chain: FiniteChain, x, n: int) -> Dist:
    """Law of X_n under P_x (``x`` may also be an initial Dist)."""
    if n < 0:
        raise ChainError("n must be >= 0")
    v = _start_vector(chain, x)
    for _ in range(n):
        v = v @ chain.matrix
    return Dist(chain.states, v)


def total_variation(d1: Dist, d2: Dist) -> float:
    """Sum of absolute differences; 2 for singular measures."""
    if d1.states != d2.states:
        raise ChainError("distributions are over different state lists")
    return float(np.abs(d1.weights - d2.weights).sum())


@dataclass(frozen=True)
class ChainStructure:
    """Communicating classes in order of their smallest state index.

    ``periods[k]`` is None for transient classes.
    """

    states: tuple
    classes: tuple  # tuple of tuples of state labels
    recurrent: tuple  # bool per class
    periods: tuple

    @property
    def recurrent_classes(self) -> list:
        return [c for c, r in zip(self.classes, self.recurrent) if r]

    @property
    def transient_states(self) -> list:
        return [s for c, r in zip(self.classes, self.recurrent) if not r for s in c]

    def class_of(self, x) -> int:
        for k, c in enumerate(self.classes):
            if x in c:
                return k
        raise ChainError(f"unknown state {x!r}")


def _class_indices(chain: FiniteChain) -> list[np.ndarray]:
    A = csr_matrix(chain.adjacency())
    _, labels = connected_components(A, directed=True, connection="strong")
    groups: dict[int, list[int]] = {}
    for i, lab in enumerate(labels):
        groups.setdefault(int(lab), []).append(i)
    return sorted((np.array(g) for g in groups.values()), key=lambda g: g[0])


def _period(adj: np.ndarray, members: np.ndarray) -> int:
    # gcd of level[u] + 1 - level[v] over edges inside the class
    inside = set(members.tolist())
    level = {int(members[0]): 0}
    queue = [int(members[0])]
    while queue:
        u = queue.pop(0)
        for v in np.flatnonzero(adj[u]):
            v = int(v)
            if v in inside and v not in level:
                level[v] = level[u] + 1
                queue.append(v)
    d = 0
    for u in inside:
        for v in np.flatnonzero(adj[u]):
            v = int(v)
            if v in inside:
                d = gcd(d, level[u] + 1 - level[v])
    return abs(d)


def structure(chain: FiniteChain) -> ChainStructure:
    adj = chain.adjacency()
    groups = _class_indices(chain)
    classes, recurrent, periods = [], [], []
    for g in groups:
        outside = np.ones(chain.size, dtype=bool)
        outside[g] = False
        closed = not adj[np.ix_(g, outside)].any()
        classes.append(tuple(chain.states[i] for i in g))
        recurrent.append(closed)
        periods.append(_period(adj, g) if closed else None)
    return ChainStructure(chain.states, tuple(classes), tuple(recurrent), tuple(periods))


def _gth_stationary(P: np.ndarray) -> np.ndarray:
    """Grassmann-Taksar-Heyman elimination for an irreducible stochastic matrix."""
    A = np.array(P, dtype=float)
    n = A.shape[0]
    for k in range(n - 1, 0, -1):
        s = A[k, :k].sum()
        A[:k, k] /= s
        A[:k, :k] += np.outer(A[:k, k], A[k, :k])
    pi = np.zeros(n)
    pi[0] = 1.0
    for k in range(1, n):
        pi[k] = pi[:k] @ A[:k, k]
    return pi / pi.sum()


def invariant_measures(chain: FiniteChain) -> list[Dist]:
    """Extreme invariant probability measures, one per recurrent class.

    Every invariant measure of the chain is a convex combination of these.
    """
    st = structure(chain)
    out = []
    for cls, rec in zip(st.classes, st.recurrent):
        if not rec:
            continue
        idx = np.array([chain.index(s) for s in cls])
        pi = _gth_stationary(chain.matrix[np.ix_(idx, idx)])
        w = np.zeros(chain.size)
        w[idx] = pi
        out.append(Dist(chain.states, w))
    return out


def support_sequences(chain: FiniteChain, n_max: int):
    """Yield (n, S_n) for n = 1..n_max where S_n[x, y] is True iff P_n(x, y) > 0.

    Iterates boolean reachability (integer products, no float thresholds) and
    stops early once the sequence of support matrices has become periodic,
    since later values only repeat earlier ones.
    """
    A = chain.adjacency().astype(np.int64)
    S = A.copy()
    seen = set()
    for n in range(1, n_max + 1):
        S = S > 0
        key = np.packbits(S).tobytes()
        if key in seen:
            return
        seen.add(key)
        yield n, S
        S = S.astype(np.int64) @ A


def _pair_search(chain: FiniteChain, x, y, n_max: int, test) -> int | None:
    if n_max < 1:
        raise ChainError("n_max must be >= 1")
    i, j = chain.index(x), chain.index(y)
    A = chain.adjacency().astype(np.int64)
    sx = A[i] > 0
    sy = A[j] > 0
    seen = set()
    for n in range(1, n_max + 1):
        if test(sx, sy):
            return n
        key = (np.packbits(sx).tobytes(), np.packbits(sy).tobytes())
        if key in seen:
            return None
        seen.add(key)
        sx = (sx.astype(np.int64) @ A) > 0
        sy = (sy.astype(np.int64) @ A) > 0
    return None


def check_equivalence(chain: FiniteChain, x, y, n_max: int) -> int | None:
    """Smallest n <= n_max with supp P_n(x, .) == supp P_n(y, .), else None."""
    return _pair_search(chain, x, y, n_max, lambda a, b: bool(np.array_equal(a, b)))


def check_nonsingular(chain: FiniteChain, x, y, n_max: int) -> int | None:
    """Smallest n <= n_max with supp P_n(x, .) meeting supp P_n(y, .), else None."""
    return _pair_search(chain, x, y, n_max, lambda a, b: bool(np.any(a & b)))


def invariance_residual(chain: FiniteChain, mu: Dist) -> float:
    if mu.states != chain.states:
        raise ChainError("distribution is over a different state list")
    return float(np.abs(mu.weights @ chain.matrix - mu.weights).max())


def convergence_curve(chain: FiniteChain, x, mu: Dist, n_max: int) -> np.ndarray:
    """||P_n(x, .) - mu|| for n = 0..n_max.

    ``mu`` must be invariant; the curve is then non-increasing, which is
    asserted with 1e-12 slack.
    """
    res = invariance_residual(chain, mu)
    if res > INVARIANCE_TOL:
        raise ChainError(f"mu is not invariant (residual {res:.3g})")
    v = _start_vector(chain, x)
    out = np.empty(n_max + 1)
    for n in range(n_max + 1):
        out[n] = np.abs(v - mu.weights).sum()
        v = v @ chain.matrix
    assert np.all(np.diff(out) <= 1e-12), "TV to an invariant law increased"
    return out
