"""Splitting representation, maximal / independent / hybrid coupling kernels
and Doeblin-type pair sets on finite chains."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .chain import ChainError, Dist, FiniteChain, ROW_TOL

__all__ = [
    "SplittingParts",
    "JointDist",
    "CouplingKernel",
    "DoeblinSet",
    "AssumptionsFail",
    "split",
    "maximal_coupling_row",
    "maximal_kernel",
    "independent_kernel",
    "doeblin_set",
    "select_doeblin",
    "hybrid_kernel",
]

# slack on the C_{N,p} membership test so that exact boundary cases
# (TV == 2(1-p) in real arithmetic) are not lost to rounding
MEMBERSHIP_TOL = 1e-12
EXACT_PAIR_CAP = 10_000


class AssumptionsFail(Exception):
    """No pair of distinct states has overlapping N-step laws for N <= N_max."""


def _split_rows(A: np.ndarray, B: np.ndarray):
    """Vectorised splitting of row pairs (A[k], B[k]).

    Returns overlap masses, the normalised common parts and the normalised
    residuals.  A part with zero raw mass is replaced by the point mass on
    the first state; it then carries weight 0 in every reconstruction.
    """
    G = np.minimum(A, B)
    R1 = A - G
    R2 = B - G
    overlap = G.sum(axis=1)
    placeholder = np.zeros(A.shape[1])
    placeholder[0] = 1.0

    def normalise(M):
        s = M.sum(axis=1)
        out = np.where(s[:, None] > 0, M / np.where(s > 0, s, 1.0)[:, None], placeholder)
        return out

    # rows equal up to rounding: residual raw mass is exactly 0 then
    overlap = np.where(R1.sum(axis=1) == 0, 1.0, np.minimum(overlap, 1.0))
    return overlap, normalise(G), normalise(R1), normalise(R2)


@dataclass(frozen=True, eq=False)
class SplittingParts:
    """P(x_i, .) = overlap_mass * common_part + (1 - overlap_mass) * residual_i."""

    overlap_mass: float
    common_part: Dist
    residual_1: Dist
    residual_2: Dist


def split(chain: FiniteChain, x1, x2) -> SplittingParts:
    i, j = chain.index(x1), chain.index(x2)
    p, G, R1, R2 = _split_rows(chain.matrix[[i]], chain.matrix[[j]])
    s = chain.states
    return SplittingParts(float(p[0]), Dist(s, G[0]), Dist(s, R1[0]), Dist(s, R2[0]))


@dataclass(frozen=True, eq=False)
class JointDist:
    """Law on ordered state pairs; ``weights[i, j]`` is the mass of (s_i, s_j)."""

    states: tuple
    weights: np.ndarray

    def __post_init__(self):
        W = np.array(self.weights, dtype=float)
        n = len(self.states)
        if W.shape != (n, n):
            raise ChainError(f"joint weights have shape {W.shape}, expected ({n}, {n})")
        if np.any(W < 0) or abs(W.sum() - 1.0) > ROW_TOL:
            raise ChainError("joint weights are not a probability law")
        W.flags.writeable = False
        object.__setattr__(self, "weights", W)

    @classmethod
    def point(cls, states, x1, x2) -> "JointDist":
        states = tuple(states)
        W = np.zeros((len(states), len(states)))
        try:
            W[states.index(x1), states.index(x2)] = 1.0
        except ValueError:
            raise ChainError(f"unknown state in pair {(x1, x2)!r}") from None
        return cls(states, W)

    @classmethod
    def product(cls, d1: Dist, d2: Dist) -> "JointDist":
        if d1.states != d2.states:
            raise ChainError("marginals are over different state lists")
        return cls(d1.states, np.outer(d1.weights, d2.weights))

    def items(self):
        """Nonzero ((s1, s2), mass) entries in row-major order."""
        for i, j in zip(*np.nonzero(self.weights)):
            yield (self.states[i], self.states[j]), float(self.weights[i, j])

    def as_dict(self) -> dict:
        return dict(self.items())

    def __getitem__(self, pair) -> float:
        a, b = pair
        return float(self.weights[self.states.index(a), self.states.index(b)])

    @property
    def diagonal_mass(self) -> float:
        return float(np.trace(self.weights))

    def marginals(self) -> tuple[np.ndarray, np.ndarray]:
        return self.weights.sum(axis=1), self.weights.sum(axis=0)


@dataclass(frozen=True, eq=False)
class DoeblinSet:
    """Pairs whose N-step laws overlap by at least p."""

    states: tuple
    N: int
    p: float
    mask: np.ndarray  # mask[i, j] iff (s_i, s_j) is a member
    masses: tuple  # (mu x mu)(C) for each supplied ipm

    @property
    def members(self) -> frozenset:
        s = self.states
        return frozenset((s[i], s[j]) for i, j in zip(*np.nonzero(self.mask)))

    def __contains__(self, pair) -> bool:
        a, b = pair
        return bool(self.mask[self.states.index(a), self.states.index(b)])

    @property
    def mass(self) -> float:
        return self.masses[0] if self.masses else float("nan")


class CouplingKernel:
    """Markov kernel on pairs of states of ``chain.power(step)``.

    Pairs in ``members`` use the maximal coupling row, all other pairs the
    product (independent) row.  Rows are built on demand and cached; the
    cache is write-once per key and duplicate construction is harmless.
    """

    def __init__(self, chain: FiniteChain, kind: str, members: np.ndarray,
                 step: int = 1, doeblin: DoeblinSet | None = None):
        if step < 1:
            raise ChainError("step must be >= 1")
        n = chain.size
        mask = np.array(members, dtype=bool)
        if mask.shape != (n, n):
            raise ChainError("member mask has the wrong shape")
        mask.flags.writeable = False
        self.base_chain = chain
        self.step = step
        self.kind = kind
        self.members = mask
        self.doeblin = doeblin
        self._rows: dict = {}

    def __repr__(self):
        return f"CouplingKernel(kind={self.kind!r}, step={self.step}, n={self.base_chain.size})"

    @property
    def states(self) -> tuple:
        return self.base_chain.states

    @cached_property
    def chain(self) -> FiniteChain:
        """The chain whose steps this kernel couples (the step-th power)."""
        return self.base_chain if self.step == 1 else self.base_chain.power(self.step)

    @cached_property
    def tables(self):
        """(pair indices, overlap, common, residual_1, residual_2) for member pairs."""
        P = self.chain.matrix
        a, b = np.nonzero(self.members)
        overlap, G, R1, R2 = _split_rows(P[a], P[b])
        return (a, b), overlap, G, R1, R2

    @cached_property
    def _member_slot(self) -> np.ndarray:
        slot = -np.ones(self.members.shape, dtype=np.int64)
        (a, b), *_ = self.tables
        slot[a, b] = np.arange(a.size)
        return slot

    def row_weights(self, i: int, j: int) -> np.ndarray:
        P = self.chain.matrix
        k = self._member_slot[i, j]
        if k < 0:
            return np.outer(P[i], P[j])
        _, overlap, G, R1, R2 = self.tables
        W = (1.0 - overlap[k]) * np.outer(R1[k], R2[k])
        W[np.diag_indices_from(W)] += overlap[k] * G[k]
        return W

    def row(self, x1, x2) -> JointDist:
        key = (x1, x2)
        hit = self._rows.get(key)
        if hit is not None:
            return hit
        i, j = self.chain.index(x1), self.chain.index(x2)
        return self._rows.setdefault(key, JointDist(self.states, self.row_weights(i, j)))

    def matrix(self) -> np.ndarray:
        """Dense (n^2 x n^2) kernel, pair (i, j) at flat index i*n + j."""
        n = self.chain.size
        if n * n > EXACT_PAIR_CAP:
            raise ChainError("product space exceeds the exact-mode cap")
        K = np.empty((n * n, n * n))
        for i in range(n):
            for j in range(n):
                K[i * n + j] = self.row_weights(i, j).ravel()
        return K


def maximal_coupling_row(chain: FiniteChain, x1, x2) -> JointDist:
    """Maximal coupling of P(x1, .) and P(x2, .) built from the splitting."""
    parts = split(chain, x1, x2)
    p = parts.overlap_mass
    W = (1.0 - p) * np.outer(parts.residual_1.weights, parts.residual_2.weights)
    W[np.diag_indices_from(W)] += p * parts.common_part.weights
    return JointDist(chain.states, W)


def maximal_kernel(chain: FiniteChain, step: int = 1) -> CouplingKernel:
    n = chain.size
    return CouplingKernel(chain, "maximal", np.ones((n, n), dtype=bool), step)


def independent_kernel(chain: FiniteChain, step: int = 1) -> CouplingKernel:
    n = chain.size
    return CouplingKernel(chain, "independent", np.zeros((n, n), dtype=bool), step)


def _pairwise_tv(P: np.ndarray) -> np.ndarray:
    return np.abs(P[:, None, :] - P[None, :, :]).sum(axis=2)


def _doeblin_from_tv(states, tv, N, p, mus) -> DoeblinSet:
    mask = tv <= 2.0 * (1.0 - p) + MEMBERSHIP_TOL
    np.fill_diagonal(mask, True)
    mask.flags.writeable = False
    masses = tuple(float(m.weights @ mask @ m.weights) for m in mus)
    return DoeblinSet(states, N, float(p), mask, masses)


def doeblin_set(chain: FiniteChain, N: int, p: float, mus=None) -> DoeblinSet:
    """Pairs (x, y) with ||P_N(x, .) - P_N(y, .)|| <= 2(1 - p).

    ``mus`` defaults to the extreme ipms; the (mu x mu)-mass of the set is
    reported for each.
    """
    if N < 1:
        raise ChainError("N must be >= 1")
    if not 0.0 < p < 1.0:
        raise ChainError("p must lie in (0, 1)")
    if mus is None:
        from .chain import invariant_measures
        mus = invariant_measures(chain)
    tv = _pairwise_tv(chain.power(N).matrix)
    return _doeblin_from_tv(chain.states, tv, N, p, mus)


def select_doeblin(chain: FiniteChain, mu: Dist, N_max: int) -> DoeblinSet:
    """Pick (N, p) maximising the per-step coupling rate 1 - (1 - p*m)^(1/N),
    m = (mu x mu)(C_{N,p}), over N <= N_max and the achievable overlaps p.

    Ties (within 1e-12) go to the smaller N, then the larger p.
    """
    if N_max < 1:
        raise ChainError("N_max must be >= 1")
    if chain.size == 1:
        return doeblin_set(chain, 1, 0.5, [mu])
    n = chain.size
    off = ~np.eye(n, dtype=bool)
    best = None
    M = chain.matrix
    for N in range(1, N_max + 1):
        if N > 1:
            M = M @ chain.matrix
        tv = _pairwise_tv(M)
        candidates = np.unique(1.0 - tv[off & (tv < 2.0)] / 2.0)
        for p in candidates[::-1]:
            p = float(min(p, 1.0 - 1e-12))
            if p <= 0.0:
                continue
            C = _doeblin_from_tv(chain.states, tv, N, p, [mu])
            rate = 1.0 - (1.0 - p * C.masses[0]) ** (1.0 / N)
            if best is None or rate > best[0] + 1e-12:
                best = (rate, C)
    if best is None:
        raise AssumptionsFail(
            f"no pair of distinct states has overlapping laws for N <= {N_max}"
        )
    return best[1]


def hybrid_kernel(chain: FiniteChain, C: DoeblinSet) -> CouplingKernel:
    """Maximal rows on C, independent rows elsewhere, over the C.N-step chain."""
    if C.states != chain.states:
        raise ChainError("Doeblin set is over a different state list")
    return CouplingKernel(chain, "hybrid", C.mask, step=C.N, doeblin=C)
