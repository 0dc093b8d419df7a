"""Exact evolution of coupled chains, recurrence probabilities and the
convergence-theorem checker."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chain import (
    ChainError,
    Dist,
    FiniteChain,
    invariant_measures,
    structure,
    support_sequences,
)
from .coupling import EXACT_PAIR_CAP, CouplingKernel, JointDist

__all__ = [
    "ExactModeError",
    "CouplingAnalysis",
    "RecurrenceReport",
    "DoobVerdict",
    "evolve_coupled",
    "evolve_all_pairs",
    "attempt_bound",
    "recurrence_psi",
    "verify_doob",
    "CONVERGENCE_THRESHOLD",
]

CONVERGENCE_THRESHOLD = 1e-8


class ExactModeError(ChainError):
    """Product space too large for exact evolution; use Monte Carlo instead."""


@dataclass(frozen=True, eq=False)
class CouplingAnalysis:
    """Curves indexed by steps of the coupled chain (``step`` base steps each)."""

    step: int
    uncoupled_tail: np.ndarray  # P(Z1_n != Z2_n)
    tv_curve: np.ndarray  # ||law(Z1_n) - law(Z2_n)||, from the marginal chain
    bound_slack: np.ndarray  # 2 * tail - tv

    @property
    def base_steps(self) -> np.ndarray:
        return np.arange(self.uncoupled_tail.size) * self.step


def _check_cap(S: CouplingKernel):
    n = S.chain.size
    if n * n > EXACT_PAIR_CAP:
        raise ExactModeError(
            f"{n * n} state pairs exceed the exact-mode cap of {EXACT_PAIR_CAP}; "
            "use the Monte Carlo routines"
        )


def _coupled_step(S: CouplingKernel, M: np.ndarray) -> np.ndarray:
    """One step of the pair law(s) M (shape (..., n, n)) under S."""
    P = S.chain.matrix
    (a, b), overlap, G, R1, R2 = S.tables
    out = P.T @ np.where(S.members, 0.0, M) @ P
    if a.size:
        w = M[..., a, b]
        out = out + np.einsum("...k,ki,kj->...ij", w * (1.0 - overlap), R1, R2, optimize=True)
        idx = np.arange(P.shape[0])
        out[..., idx, idx] += (w * overlap) @ G
    return out


def _off_diagonal_mass(M: np.ndarray) -> np.ndarray:
    n = M.shape[-1]
    return np.where(np.eye(n, dtype=bool), 0.0, M).sum(axis=(-2, -1))


def evolve_coupled(S: CouplingKernel, z0, n_max: int) -> CouplingAnalysis:
    """Exact law of Z_n from a pair or an initial JointDist, n = 0..n_max."""
    _check_cap(S)
    if isinstance(z0, JointDist):
        if z0.states != S.states:
            raise ChainError("initial law is over a different state list")
        W = z0
    else:
        W = JointDist.point(S.states, *z0)
    P = S.chain.matrix
    M = np.array(W.weights)
    v1, v2 = W.marginals()
    tail = np.empty(n_max + 1)
    tv = np.empty(n_max + 1)
    for n in range(n_max + 1):
        tail[n] = _off_diagonal_mass(M)
        tv[n] = np.abs(v1 - v2).sum()
        if n < n_max:
            M = _coupled_step(S, M)
            v1 = v1 @ P
            v2 = v2 @ P
    return CouplingAnalysis(S.step, tail, tv, 2.0 * tail - tv)


def evolve_all_pairs(S: CouplingKernel, n_max: int, chunk: int = 256):
    """Tails and TV curves from every point pair at once.

    Returns arrays of shape (n, n, n_max + 1): ``tail[i, j]`` is the uncoupled
    tail from (s_i, s_j) and ``tv[i, j]`` the matching TV curve.
    """
    _check_cap(S)
    n = S.chain.size
    P = S.chain.matrix
    tail = np.empty((n * n, n_max + 1))
    for lo in range(0, n * n, chunk):
        hi = min(lo + chunk, n * n)
        M = np.zeros((hi - lo, n, n))
        M.reshape(hi - lo, -1)[np.arange(hi - lo), np.arange(lo, hi)] = 1.0
        for t in range(n_max + 1):
            tail[lo:hi, t] = _off_diagonal_mass(M)
            if t < n_max:
                M = _coupled_step(S, M)
    tv = np.empty((n, n, n_max + 1))
    V = np.eye(n)
    for t in range(n_max + 1):
        tv[:, :, t] = np.abs(V[:, None, :] - V[None, :, :]).sum(axis=2)
        V = V @ P
    return tail.reshape(n, n, n_max + 1), tv


def attempt_bound(p, k: int):
    """1 - (1 - p)^k: the solution of p_{k+1} = p(1 - p_k) + p_k, p_0 = 0.

    A lower bound for the probability that the coupling has succeeded within
    k attempts.  Exact for ``Fraction`` inputs.
    """
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    if k < 0:
        raise ValueError("k must be >= 0")
    return 1 - (1 - p) ** k


@dataclass(frozen=True, eq=False)
class RecurrenceReport:
    states: tuple
    psi: np.ndarray
    target_set: frozenset
    classes_hit: tuple

    def __getitem__(self, x) -> float:
        return float(self.psi[self.states.index(x)])

    def harmonic_residual(self, chain: FiniteChain) -> float:
        return float(np.abs(chain.matrix @ self.psi - self.psi).max())


def recurrence_psi(chain: FiniteChain, B) -> RecurrenceReport:
    """P_x(X_n in B infinitely often) for every x.

    Equals the probability of absorption into the recurrent classes that meet
    B; transient states get it from the harmonic linear system.
    """
    B = frozenset(B)
    if not B:
        raise ChainError("target set must be nonempty")
    bidx = {chain.index(b) for b in B}
    st = structure(chain)
    n = chain.size
    psi = np.zeros(n)
    hit = []
    for cls, rec in zip(st.classes, st.recurrent):
        idx = [chain.index(s) for s in cls]
        if rec and bidx.intersection(idx):
            psi[idx] = 1.0
            hit.append(cls)
    T = np.array([chain.index(s) for s in st.transient_states], dtype=int)
    if T.size:
        P = chain.matrix
        A = np.eye(T.size) - P[np.ix_(T, T)]
        rhs = P[T] @ psi
        x = np.linalg.solve(A, rhs)
        x += np.linalg.solve(A, rhs - A @ x)
        psi[T] = np.clip(x, 0.0, 1.0)
    psi.flags.writeable = False
    return RecurrenceReport(chain.states, psi, B, tuple(hit))


LABELS = ("theorem1", "corollary1", "theorem2", "theorem2-partial", "no-assumptions")


@dataclass(frozen=True, eq=False)
class DoobVerdict:
    """Assumption checks and observed convergence for one finite chain.

    Assumption maps send ordered pairs to the smallest witnessing n (or None).
    Per-ipm fields follow the order of ``ipms``.
    """

    states: tuple
    ipms: tuple
    thm1_assumption: dict
    cor1_assumption: dict
    thm2_assumption: tuple  # one pair map per extreme ipm, over supp x supp
    first_below: tuple  # per ipm: {x: first n with ||P_n(x,.) - mu|| < threshold}
    monotone: bool
    n_max: int
    horizon: int
    threshold: float = CONVERGENCE_THRESHOLD
    classification: str = field(default="")
    summary: str = field(default="")

    @property
    def ipm_count(self) -> int:
        return len(self.ipms)

    @property
    def thm1_holds(self) -> bool:
        return all(v is not None for v in self.thm1_assumption.values())

    @property
    def cor1_holds(self) -> bool:
        return all(v is not None for v in self.cor1_assumption.values())

    @property
    def thm2_holds(self) -> tuple:
        return tuple(all(v is not None for v in m.values()) for m in self.thm2_assumption)

    @property
    def conclusion_allx_per_ipm(self) -> tuple:
        return tuple(all(v is not None for v in fb.values()) for fb in self.first_below)

    @property
    def conclusion_mu_ae_per_ipm(self) -> tuple:
        return tuple(
            all(fb[x] is not None for x in mu.support)
            for mu, fb in zip(self.ipms, self.first_below)
        )

    @property
    def conclusion_allx(self) -> bool:
        return self.ipm_count == 1 and self.conclusion_allx_per_ipm[0]

    @property
    def conclusion_mu_ae(self) -> bool:
        return all(self.conclusion_mu_ae_per_ipm)

    def to_dict(self) -> dict:
        def pairs(m):
            return {f"{a}|{b}": v for (a, b), v in m.items()}

        return {
            "states": [str(s) for s in self.states],
            "classification": self.classification,
            "summary": self.summary,
            "ipm_count": self.ipm_count,
            "ipms": [[float(w) for w in mu.weights] for mu in self.ipms],
            "thm1_holds": self.thm1_holds,
            "cor1_holds": self.cor1_holds,
            "thm2_holds": list(self.thm2_holds),
            "conclusion_allx": self.conclusion_allx,
            "conclusion_mu_ae": self.conclusion_mu_ae,
            "conclusion_mu_ae_per_ipm": list(self.conclusion_mu_ae_per_ipm),
            "monotone": self.monotone,
            "n_max": self.n_max,
            "horizon": self.horizon,
            "threshold": self.threshold,
            "thm1_assumption": pairs(self.thm1_assumption),
            "cor1_assumption": pairs(self.cor1_assumption),
            "thm2_assumption": [pairs(m) for m in self.thm2_assumption],
            "first_below": [{str(x): v for x, v in fb.items()} for fb in self.first_below],
        }


def _pair_assumptions(chain: FiniteChain, n_max: int):
    n = chain.size
    eq_first = np.full((n, n), -1)
    ns_first = np.full((n, n), -1)
    for t, S in support_sequences(chain, n_max):
        eq = (S[:, None, :] == S[None, :, :]).all(axis=2)
        Si = S.astype(np.int64)
        ns = (Si @ Si.T) > 0
        eq_first[(eq_first < 0) & eq] = t
        ns_first[(ns_first < 0) & ns] = t
        if (eq_first >= 0).all():
            break
    s = chain.states

    def as_map(first):
        return {
            (s[i], s[j]): (int(first[i, j]) if first[i, j] >= 0 else None)
            for i in range(n)
            for j in range(n)
        }

    return as_map(eq_first), as_map(ns_first)


def _first_below(chain: FiniteChain, ipms, horizon: int, threshold: float):
    n = chain.size
    P = chain.matrix
    V = np.eye(n)
    first = np.full((len(ipms), n), -1)
    prev = None
    monotone = True
    mus = np.array([mu.weights for mu in ipms])
    for t in range(horizon + 1):
        D = np.abs(V[None, :, :] - mus[:, None, :]).sum(axis=2)
        if prev is not None and np.any(D > prev + 1e-12):
            monotone = False
        first[(first < 0) & (D < threshold)] = t
        if (first >= 0).all():
            break
        prev = D
        V = V @ P
    return tuple(
        {chain.states[x]: (int(first[k, x]) if first[k, x] >= 0 else None) for x in range(n)}
        for k in range(len(ipms))
    ), monotone


def _classify(v: DoobVerdict) -> tuple[str, str]:
    k = v.ipm_count
    ipm_text = "unique ipm" if k == 1 else f"{k} extreme ipms"
    if v.thm1_holds:
        if v.conclusion_allx:
            return "theorem1", "Theorem 1 applies; conclusion verified"
        return "theorem1", "Theorem 1 applies; conclusion NOT verified within horizon"
    if v.cor1_holds:
        if v.conclusion_allx:
            how = "verified for every start"
        elif v.conclusion_mu_ae:
            how = "verified mu-a.e. only"
        else:
            how = "NOT verified within horizon"
        return "corollary1", f"only Corollary 1 assumptions hold; conclusion {how}"
    per = v.thm2_holds
    if all(per):
        conc = "verified" if v.conclusion_mu_ae else "NOT verified"
        unique = "" if k == 1 else "; no uniqueness"
        return "theorem2", (
            f"Theorem 2 assumptions hold for each of {k} extreme ipm(s){unique}; "
            f"mu-a.e. conclusion {conc}"
        )
    if any(per):
        return "theorem2-partial", (
            f"Theorem 2 assumptions hold for {sum(per)} of {k} extreme ipms"
        )
    conv = "TV convergence observed" if v.conclusion_allx else "no TV convergence"
    return "no-assumptions", f"assumptions fail; {ipm_text}; {conv}"


def verify_doob(chain: FiniteChain, n_max: int = 100, horizon: int = 10_000,
                threshold: float = CONVERGENCE_THRESHOLD) -> DoobVerdict:
    """Check the equivalence / non-singularity assumptions and observe convergence.

    Assumptions are decided on exact boolean supports up to ``n_max`` steps
    (iteration stops early once the support sequence repeats, so verdicts are
    then exact for every n).  Convergence to each extreme ipm is read off the
    TV curves, declared when they drop below ``threshold`` within ``horizon``.
    """
    if n_max < 1 or horizon < 0:
        raise ChainError("n_max must be >= 1 and horizon >= 0")
    if chain.size * chain.size > EXACT_PAIR_CAP:
        raise ExactModeError("chain too large for exact verification")
    ipms = tuple(invariant_measures(chain))
    thm1, cor1 = _pair_assumptions(chain, n_max)
    thm2 = tuple(
        {(x, y): cor1[(x, y)] for x in mu.states if x in mu.support
         for y in mu.states if y in mu.support}
        for mu in ipms
    )
    first, monotone = _first_below(chain, ipms, horizon, threshold)
    v = DoobVerdict(chain.states, ipms, thm1, cor1, thm2, first, monotone,
                    n_max, horizon, threshold)
    label, text = _classify(v)
    object.__setattr__(v, "classification", label)
    object.__setattr__(v, "summary", text)
    return v
