"""Seeded simulation of single and coupled paths.

Replicas are simulated in vectorised chunks; every replica draws from its own
counter-based stream (see ``_streams``), so results do not depend on the
chunking or on the number of worker threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _streams
from .analysis import attempt_bound
from .chain import ChainError, FiniteChain
from .countable import BirthDeathChain, CountableChain
from .coupling import CouplingKernel, DoeblinSet

__all__ = [
    "PathSample",
    "CoupledSample",
    "McEstimate",
    "AttemptStats",
    "CountableCoupling",
    "simulate_paths",
    "sample_path",
    "simulate_coupled",
    "sample_coupled",
    "estimate_hit_probability",
    "estimate_visit_probability",
    "estimate_uncoupled_tail",
    "attempt_statistics",
    "nonconvergence_lower_bound",
]


@dataclass(frozen=True)
class PathSample:
    trajectory: tuple
    seed: int
    length: int


@dataclass(frozen=True)
class CoupledSample:
    first: tuple
    second: tuple
    seed: int
    length: int
    coupling_time: int | None  # first n with first[n] == second[n]


@dataclass(frozen=True)
class McEstimate:
    point: float
    stderr: float
    n_samples: int

    @classmethod
    def from_samples(cls, x: np.ndarray) -> "McEstimate":
        x = np.asarray(x, dtype=float)
        n = x.size
        sd = float(x.std(ddof=1)) if n > 1 else 0.0
        return cls(float(x.mean()), float(sd / np.sqrt(n)), n)


def _last_positive(W: np.ndarray) -> np.ndarray:
    pos = W > 0
    return W.shape[1] - 1 - np.argmax(pos[:, ::-1], axis=1)


class _CdfTable:
    """Row-wise inverse CDFs of a stochastic matrix.

    ``draw(rows, u)`` returns, for each sample, the number of cumulative
    weights of its row that are <= u, clipped to the row's last positive
    entry.  Small tables gather one column at a time; large ones group the
    samples by row and use ``searchsorted``.
    """

    SMALL = 32

    def __init__(self, W: np.ndarray):
        self.cum = np.cumsum(W, axis=1)
        self.cols = np.ascontiguousarray(self.cum.T)
        self.last = _last_positive(W)

    def draw(self, rows: np.ndarray, u: np.ndarray) -> np.ndarray:
        n = self.cum.shape[1]
        if n <= self.SMALL:
            k = np.zeros(u.shape, dtype=np.int64)
            for col in self.cols:
                k += u >= col[rows]
        else:
            k = np.empty(u.shape, dtype=np.int64)
            order = np.argsort(rows, kind="stable")
            bounds = np.flatnonzero(np.diff(rows[order])) + 1
            for grp in np.split(order, bounds):
                if grp.size:
                    k[grp] = np.searchsorted(self.cum[rows[grp[0]]], u[grp], side="right")
        return np.minimum(k, self.last[rows])


class _FiniteStepper:
    def __init__(self, chain: FiniteChain):
        self.table = _CdfTable(chain.matrix)

    def __call__(self, x, u):
        return self.table.draw(x, u)


class _CountableStepper:
    def __init__(self, chain: CountableChain):
        self.chain = chain

    def __call__(self, x, u):
        out = np.empty_like(x)
        for r, (s, v) in enumerate(zip(x.tolist(), u.tolist())):
            acc = 0.0
            row = [(t, float(p)) for t, p in self.chain.transitions(s) if p > 0]
            out[r] = row[-1][0]
            for t, p in row:
                acc += p
                if v < acc:
                    out[r] = t
                    break
        return out


def _stepper(chain):
    if isinstance(chain, FiniteChain):
        return _FiniteStepper(chain)
    if isinstance(chain, BirthDeathChain):
        return chain.vectorised_step
    if isinstance(chain, CountableChain):
        return _CountableStepper(chain)
    raise ChainError(f"cannot simulate {type(chain).__name__}")


def _start_index(chain, x0) -> int:
    if isinstance(chain, FiniteChain):
        return chain.index(x0)
    return chain._check_state(x0)


def _run_chunks(fn, replicas: int, threads: int | None):
    jobs = list(_streams.chunks(replicas))
    threads = min(threads or _streams.thread_cap(), len(jobs)) or 1
    if threads == 1:
        return [fn(lo, hi) for lo, hi in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def simulate_paths(chain, x0, n: int, seed: int, replicas: int,
                   threads: int | None = None) -> np.ndarray:
    """(replicas, n + 1) array of paths; finite chains give state indices."""
    if n < 0 or replicas < 1:
        raise ChainError("need n >= 0 and replicas >= 1")
    step = _stepper(chain)
    start = _start_index(chain, x0)

    def run(lo, hi):
        keys = _streams.stream_keys(seed, np.arange(lo, hi))
        X = np.empty((hi - lo, n + 1), dtype=np.int64)
        X[:, 0] = start
        for t in range(n):
            X[:, t + 1] = step(X[:, t], _streams.uniforms(keys, t))
        return X

    return np.concatenate(_run_chunks(run, replicas, threads))


def sample_path(chain, x0, n: int, seed: int) -> PathSample:
    """One reproducible path (the stream of replica 0)."""
    X = simulate_paths(chain, x0, n, seed, 1, threads=1)[0]
    if isinstance(chain, FiniteChain):
        traj = tuple(chain.states[i] for i in X)
    else:
        traj = tuple(int(i) for i in X)
    return PathSample(traj, seed, n)


class CountableCoupling:
    """Coupling rule for countable chains, built row by row on the fly.

    Pairs whose one-step laws overlap by at least ``p`` use the maximal
    coupling; other pairs move independently.  ``p=None`` couples maximally
    everywhere.
    """

    def __init__(self, chain: CountableChain, p: float | None = None):
        self.chain = chain
        self.p = p

    def _law(self, x) -> dict:
        return {t: float(q) for t, q in self.chain.transitions(x) if q > 0}

    def step(self, x1: int, x2: int, u0: float, u1: float, u2: float) -> tuple[int, int]:
        a, b = self._law(x1), self._law(x2)
        support = sorted(set(a) | set(b))
        g = {y: min(a.get(y, 0.0), b.get(y, 0.0)) for y in support}
        overlap = 1.0 if x1 == x2 else sum(g.values())
        if self.p is not None and overlap < self.p and x1 != x2:
            return _draw(a, u1), _draw(b, u2)
        if u0 < overlap:
            y = _draw(g, u1)
            return y, y
        r1 = {y: a.get(y, 0.0) - g[y] for y in support}
        r2 = {y: b.get(y, 0.0) - g[y] for y in support}
        return _draw(r1, u1), _draw(r2, u2)


def _draw(weights: dict, u: float) -> int:
    items = [(y, w) for y, w in sorted(weights.items()) if w > 0]
    total = sum(w for _, w in items)
    acc = 0.0
    for y, w in items:
        acc += w / total
        if u < acc:
            return y
    return items[-1][0]


class _KernelStepper:
    def __init__(self, S: CouplingKernel):
        P = S.chain.matrix
        (a, b), overlap, G, R1, R2 = S.tables
        self.slot = S._member_slot
        self.overlap = overlap
        self.P = _CdfTable(P)
        if a.size:
            self.G, self.R1, self.R2 = _CdfTable(G), _CdfTable(R1), _CdfTable(R2)

    def __call__(self, x1, x2, u0, u1, u2):
        y1 = self.P.draw(x1, u1)
        y2 = self.P.draw(x2, u2)
        k = self.slot[x1, x2]
        m = k >= 0
        if m.any():
            km = k[m]
            joint = u0[m] < self.overlap[km]
            yg = self.G.draw(km, u1[m])
            r1 = self.R1.draw(km, u1[m])
            r2 = self.R2.draw(km, u2[m])
            y1[m] = np.where(joint, yg, r1)
            y2[m] = np.where(joint, yg, r2)
        return y1, y2


def _coupled_runner(S, z0, n: int, seed: int):
    if isinstance(S, CouplingKernel):
        step = _KernelStepper(S)
        start = (S.chain.index(z0[0]), S.chain.index(z0[1]))
    elif isinstance(S, CountableCoupling):
        start = (S.chain._check_state(z0[0]), S.chain._check_state(z0[1]))

        def step(x1, x2, u0, u1, u2):
            out = [S.step(*args) for args in zip(x1.tolist(), x2.tolist(),
                                                 u0.tolist(), u1.tolist(), u2.tolist())]
            arr = np.array(out, dtype=np.int64).reshape(-1, 2)
            return arr[:, 0], arr[:, 1]
    else:
        raise ChainError(f"cannot simulate coupling {type(S).__name__}")

    def run(lo, hi):
        keys = _streams.stream_keys(seed, np.arange(lo, hi))
        Z1 = np.empty((hi - lo, n + 1), dtype=np.int64)
        Z2 = np.empty_like(Z1)
        Z1[:, 0], Z2[:, 0] = start
        for t in range(n):
            u0, u1, u2 = (_streams.uniforms(keys, 3 * t + d) for d in range(3))
            Z1[:, t + 1], Z2[:, t + 1] = step(Z1[:, t], Z2[:, t], u0, u1, u2)
        return Z1, Z2

    return run


def _coupling_times(Z1, Z2) -> np.ndarray:
    eq = Z1 == Z2
    return np.where(eq.any(axis=1), eq.argmax(axis=1), -1)


def simulate_coupled(S, z0, n: int, seed: int, replicas: int, threads: int | None = None):
    """Arrays (Z1, Z2, T); T is the first diagonal time, -1 if not within n."""
    if n < 0 or replicas < 1:
        raise ChainError("need n >= 0 and replicas >= 1")
    parts = _run_chunks(_coupled_runner(S, z0, n, seed), replicas, threads)
    Z1 = np.concatenate([p[0] for p in parts])
    Z2 = np.concatenate([p[1] for p in parts])
    return Z1, Z2, _coupling_times(Z1, Z2)


def sample_coupled(S, z0, n: int, seed: int) -> CoupledSample:
    Z1, Z2, T = simulate_coupled(S, z0, n, seed, 1, threads=1)
    if isinstance(S, CouplingKernel):
        lab = S.states
        first = tuple(lab[i] for i in Z1[0])
        second = tuple(lab[i] for i in Z2[0])
    else:
        first, second = tuple(int(i) for i in Z1[0]), tuple(int(i) for i in Z2[0])
    t = int(T[0])
    return CoupledSample(first, second, seed, n, None if t < 0 else t)


def estimate_uncoupled_tail(S, z0, n: int, replicas: int, seed: int,
                            threads: int | None = None) -> list[McEstimate]:
    """Estimates of P(Z1_t != Z2_t) for t = 0..n."""
    Z1, Z2, _ = simulate_coupled(S, z0, n, seed, replicas, threads)
    neq = Z1 != Z2
    return [McEstimate.from_samples(neq[:, t]) for t in range(n + 1)]


def estimate_hit_probability(chain, x0, target, horizon: int, replicas: int,
                             seed: int, threads: int | None = None) -> McEstimate:
    """Fraction of replicas visiting ``target`` at some time 0..horizon."""
    return estimate_visit_probability(chain, x0, [target], horizon, replicas, seed,
                                      start=0, threads=threads)


def estimate_visit_probability(chain, x0, targets, horizon: int, replicas: int,
                               seed: int, start: int = 0,
                               threads: int | None = None) -> McEstimate:
    """Fraction of replicas visiting ``targets`` at some time in [start, horizon]."""
    if replicas < 1:
        raise ChainError("replicas must be >= 1")
    if not 0 <= start <= horizon:
        raise ChainError("need 0 <= start <= horizon")
    step = _stepper(chain)
    x_start = _start_index(chain, x0)
    goal = np.array(sorted({_start_index(chain, t) for t in targets}), dtype=np.int64)
    if goal.size == 0:
        raise ChainError("targets must be nonempty")
    # nearest-neighbour chains cannot cover more than one unit per step, so a
    # walker farther from every target than the remaining steps is dropped
    skip_free = isinstance(chain, BirthDeathChain)

    def run(lo, hi):
        hit = np.zeros(hi - lo, dtype=bool)
        x = np.full(hi - lo, x_start, dtype=np.int64)
        alive = np.arange(hi - lo)
        keys = _streams.stream_keys(seed, np.arange(lo, hi))
        if start == 0 and x_start in goal:
            hit[:] = True
            return hit
        for t in range(1, horizon + 1):
            x = step(x, _streams.uniforms(keys, t - 1))
            if t < start:
                continue
            reached = np.isin(x, goal) if goal.size > 1 else x == goal[0]
            hit[alive[reached]] = True
            # compaction is the costly part; do it every few steps
            if t % 8 == 0 or t == start:
                keep = ~hit[alive]
                if skip_free:
                    dist = np.abs(x[:, None] - goal[None, :]).min(axis=1)
                    keep &= dist <= horizon - t
                x, alive, keys = x[keep], alive[keep], keys[keep]
                if alive.size == 0:
                    break
        return hit

    hits = np.concatenate(_run_chunks(run, replicas, threads))
    return McEstimate.from_samples(hits)


def nonconvergence_lower_bound(est: McEstimate, censoring_bias: float = 1e-3) -> float:
    """Lower bound on lim ||P_n(x, .) - delta_target|| for an absorbing target.

    The limit equals 2 (1 - P_x(ever hit)); the hit probability is bounded
    above by the estimate plus three standard errors plus the horizon
    censoring bias.
    """
    return 2.0 * (1.0 - (est.point + 3.0 * est.stderr + censoring_bias))


@dataclass(frozen=True, eq=False)
class AttemptStats:
    """Coupling-attempt statistics over replicas.

    ``visit_times[r, k-1]`` is tau_k (k-th visit of Z to C after time 0, -1 if
    censored); ``success[r, k-1]`` is T <= tau_k.  ``bound[k-1]`` is the
    guaranteed lower bound for ``p_hat[k-1]``.
    """

    p: float
    visit_times: np.ndarray
    coupling_times: np.ndarray
    success: np.ndarray
    p_hat: np.ndarray
    stderr: np.ndarray
    bound: np.ndarray
    start_in_c: bool

    def satisfies_bound(self, n_sigma: float = 3.0) -> np.ndarray:
        return self.p_hat >= self.bound - n_sigma * self.stderr


def attempt_statistics(S, C: DoeblinSet, z0, replicas: int, horizon: int, seed: int,
                       k_max: int = 10, threads: int | None = None) -> AttemptStats:
    """Visit times tau_k to C, coupling times and empirical P(T <= tau_k).

    When z0 lies in C, the attempt made at time 0 counts as the first, and
    P(T <= tau_k) >= 1 - (1 - p)^k.  Otherwise the first attempt happens at
    tau_1 and the guaranteed bound is 1 - (1 - p)^(k - 1).
    """
    if replicas < 1:
        raise ChainError("replicas must be >= 1")
    Z1, Z2, T = simulate_coupled(S, z0, horizon, seed, replicas, threads)
    inC = C.mask[Z1, Z2]
    inC[:, 0] = False
    visits = np.cumsum(inC, axis=1)
    tau = np.full((replicas, k_max), -1, dtype=np.int64)
    for k in range(1, k_max + 1):
        reached = visits[:, -1] >= k
        tau[reached, k - 1] = np.argmax(visits[reached] >= k, axis=1)
    # Delta lies in C, so a coupled replica keeps visiting C: a censored tau_k
    # after an observed T still satisfies T <= tau_k
    coupled = T[:, None] >= 0
    success = coupled & ((tau < 0) | (T[:, None] <= tau))
    start_in_c = z0 in C
    p_hat = success.mean(axis=0)
    stderr = np.array([McEstimate.from_samples(success[:, k]).stderr for k in range(k_max)])
    shift = 0 if start_in_c else 1
    bound = np.array([float(attempt_bound(C.p, max(k - shift, 0))) for k in range(1, k_max + 1)])
    return AttemptStats(C.p, tau, T, success, p_hat, stderr, bound, start_in_c)
