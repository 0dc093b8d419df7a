"""Named fixture chains and random chain generators."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .chain import ChainError, FiniteChain, structure
from .countable import BirthDeathChain

__all__ = ["GalleryEntry", "ENTRIES", "build", "entry", "parse_spec", "random_chain"]


@dataclass(frozen=True)
class GalleryEntry:
    name: str
    description: str
    defaults: tuple
    constructor: Callable = field(repr=False)
    expected_verdict: dict = field(default_factory=dict)
    countable: bool = False


def _two_state(a=0.5, b=0.2) -> FiniteChain:
    a, b = float(a), float(b)
    if not (0 <= a <= 1 and 0 <= b <= 1):
        raise ChainError("two-state parameters must lie in [0, 1]")
    return FiniteChain.from_matrix([[1 - a, a], [b, 1 - b]])


def _swap() -> FiniteChain:
    return FiniteChain.from_matrix([[0.0, 1.0], [1.0, 0.0]])


def _identity(k=2) -> FiniteChain:
    k = int(k)
    if k < 1:
        raise ChainError("identity needs k >= 1")
    return FiniteChain.from_matrix(np.eye(k))


def _disconnected(a=0.5, b=0.2, c=0.3, d=0.6) -> FiniteChain:
    # two closed aperiodic 2-state blocks {0, 1} and {2, 3}
    P = np.zeros((4, 4))
    P[:2, :2] = _two_state(a, b).matrix
    P[2:, 2:] = _two_state(c, d).matrix
    return FiniteChain.from_matrix(P)


def _counterexample() -> BirthDeathChain:
    return BirthDeathChain(Fraction(1), Fraction(0), Fraction(1, 3), Fraction(0), Fraction(2, 3))


def _remark3() -> BirthDeathChain:
    return BirthDeathChain(Fraction(1, 2), Fraction(1, 2), Fraction(2, 3), Fraction(0),
                           Fraction(1, 3))


ENTRIES: dict[str, GalleryEntry] = {
    e.name: e
    for e in [
        GalleryEntry(
            "doob-counterexample",
            "birth-death on Z+: 0 absorbing, down 1/3, up 2/3",
            (),
            _counterexample,
            {"ipm_count": 1, "ipm": "delta_0", "cor1_holds": True, "thm1_holds": False,
             "converges_from": [0], "hit_zero_from_i": "2^-i"},
            countable=True,
        ),
        GalleryEntry(
            "remark3-drift-down",
            "birth-death on Z+: p00 = p01 = 1/2, down 2/3, up 1/3",
            (),
            _remark3,
            {"ipm_count": 1, "thm1_holds": False, "cor1_holds": True,
             "converges_from": "all"},
            countable=True,
        ),
        GalleryEntry(
            "disconnected-two-classes",
            "two closed 2-state blocks; Theorem 2 per block, no uniqueness",
            (0.5, 0.2, 0.3, 0.6),
            _disconnected,
            {"classification": "theorem2", "ipm_count": 2, "thm2_holds": [True, True]},
        ),
        GalleryEntry(
            "two-state",
            "rows (1-a, a), (b, 1-b)",
            (0.5, 0.2),
            _two_state,
            {"classification": "theorem1", "ipm_count": 1, "conclusion_allx": True},
        ),
        GalleryEntry(
            "swap",
            "deterministic 2-cycle",
            (),
            _swap,
            {"classification": "no-assumptions", "ipm_count": 1, "conclusion_allx": False},
        ),
        GalleryEntry(
            "identity",
            "k absorbing states",
            (2,),
            _identity,
            {"classification": "theorem2", "ipm_count": 2},
        ),
    ]
}


def entry(name: str) -> GalleryEntry:
    try:
        return ENTRIES[name]
    except KeyError:
        raise ChainError(f"unknown gallery chain {name!r}") from None


def build(name: str, *params):
    """Construct a gallery chain; missing parameters take the entry defaults."""
    e = entry(name)
    if len(params) > len(e.defaults):
        raise ChainError(f"{name} takes at most {len(e.defaults)} parameters")
    full = tuple(params) + e.defaults[len(params):]
    return e.constructor(*full)


def parse_spec(text: str):
    """``NAME[:p1,p2,...]`` -> built chain."""
    name, _, rest = text.partition(":")
    params = []
    for tok in filter(None, (t.strip() for t in rest.split(","))):
        try:
            params.append(Fraction(tok) if "/" in tok else float(tok))
        except ValueError:
            raise ChainError(f"bad gallery parameter {tok!r}") from None
    return build(name.strip(), *params)


def _is_irreducible(chain: FiniteChain) -> bool:
    return len(structure(chain).classes) == 1


def _is_aperiodic(chain: FiniteChain) -> bool:
    st = structure(chain)
    return all(p == 1 for p in st.periods if p is not None)


def random_chain(n_states: int, sparsity: float = 1.0, seed: int = 0, *,
                 irreducible: bool = False, aperiodic: bool = False,
                 alpha: float = 1.0, max_tries: int = 10_000) -> FiniteChain:
    """Random chain with Dirichlet(alpha) rows on random supports.

    Each row has ``max(1, round(sparsity * n_states))`` targets.  The flags are
    enforced by rejection; the result is deterministic for a given seed.
    """
    if n_states < 2:
        raise ChainError("n_states must be >= 2")
    if not 0.0 < sparsity <= 1.0:
        raise ChainError("sparsity must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    k = max(1, round(sparsity * n_states))
    for _ in range(max_tries):
        P = np.zeros((n_states, n_states))
        for i in range(n_states):
            cols = rng.choice(n_states, size=k, replace=False)
            P[i, cols] = rng.dirichlet(np.full(k, alpha))
        P /= P.sum(axis=1, keepdims=True)
        chain = FiniteChain.from_matrix(P)
        if irreducible and not _is_irreducible(chain):
            continue
        if aperiodic and not _is_aperiodic(chain):
            continue
        return chain
    raise ChainError("rejection sampling did not produce a chain with the requested flags")
