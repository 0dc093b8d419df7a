"""Countable chains on the nonnegative integers.

Two forms exist: the parametric birth-death family (vectorisable, exact
rational parameters) and an in-library callback form.  Neither materialises
a global matrix; n-step laws from a point start have finite support and are
propagated exactly as sparse dictionaries.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping

import numpy as np

from .chain import ChainError, FiniteChain

__all__ = ["CountableChain", "BirthDeathChain", "CallbackChain"]


def _frac(v) -> Fraction:
    if isinstance(v, float):
        return Fraction(v).limit_denominator(10**12)
    return Fraction(v)


class CountableChain:
    """Base class: a chain on {0, 1, 2, ...} with finitely many targets per state."""

    def transitions(self, x: int) -> list[tuple[int, Fraction]]:
        """Targets of ``x`` in fixed increasing order, with their probabilities."""
        raise NotImplementedError

    def _check_state(self, x) -> int:
        if isinstance(x, (bool, np.bool_)) or not isinstance(x, (int, np.integer)) or x < 0:
            raise ChainError(f"unknown state {x!r}: states are integers >= 0")
        return int(x)

    def successors(self, x: int) -> list[int]:
        return [t for t, p in self.transitions(x) if p > 0]

    def n_step(self, x: int, n: int) -> dict[int, float]:
        """Exact law of X_n from x, as a sparse {state: probability} map."""
        law = {self._check_state(x): 1.0}
        for _ in range(n):
            law = self._propagate(law)
        return law

    def _propagate(self, law: Mapping[int, float]) -> dict[int, float]:
        nxt: dict[int, float] = {}
        for s in sorted(law):
            for t, p in self._float_row(s):
                nxt[t] = nxt.get(t, 0.0) + law[s] * p
        return nxt

    def _float_row(self, x: int) -> list[tuple[int, float]]:
        return [(t, float(p)) for t, p in self.transitions(x) if p > 0]

    def support(self, x: int, n: int) -> frozenset:
        cur = {self._check_state(x)}
        for _ in range(n):
            cur = {t for s in cur for t in self.successors(s)}
        return frozenset(cur)

    def _pair_search(self, x, y, n_max, test) -> int | None:
        if n_max < 1:
            raise ChainError("n_max must be >= 1")
        sx = {self._check_state(x)}
        sy = {self._check_state(y)}
        for n in range(1, n_max + 1):
            sx = {t for s in sx for t in self.successors(s)}
            sy = {t for s in sy for t in self.successors(s)}
            if test(sx, sy):
                return n
        return None

    def check_equivalence(self, x, y, n_max: int) -> int | None:
        return self._pair_search(x, y, n_max, lambda a, b: a == b)

    def check_nonsingular(self, x, y, n_max: int) -> int | None:
        return self._pair_search(x, y, n_max, lambda a, b: bool(a & b))

    def truncate(self, size: int) -> tuple[FiniteChain, str]:
        """Finite chain on 0..size-1 plus an absorbing overflow state.

        Mass that would leave {0..size-1} is routed to the overflow state, so
        the leaked mass of any n-step law is its weight there.  Returns the
        chain and the overflow label.
        """
        if size < 1:
            raise ChainError("truncation size must be >= 1")
        overflow = f">={size}"
        P = np.zeros((size + 1, size + 1))
        for s in range(size):
            for t, p in self.transitions(s):
                P[s, t if t < size else size] += float(p)
        P[size, size] = 1.0
        return FiniteChain(tuple(range(size)) + (overflow,), P), overflow

    def tv_to(self, law: Mapping[int, float], mu: Callable[[int], float]) -> float:
        """||law - mu|| for an ipm given pointwise, using that mu has mass 1."""
        inside = sum(abs(w - mu(s)) for s, w in law.items())
        mu_inside = sum(mu(s) for s in law)
        return inside + max(0.0, 1.0 - mu_inside)

    def convergence_curve(self, x: int, mu: Callable[[int], float], n_max: int,
                          stop_below: float | None = None) -> np.ndarray:
        """||P_n(x, .) - mu|| for n = 0..n_max, from exact finite-support laws.

        With ``stop_below`` the curve is cut after its first value below it.
        """
        law = {self._check_state(x): 1.0}
        out = []
        for n in range(n_max + 1):
            out.append(self.tv_to(law, mu))
            if stop_below is not None and out[-1] < stop_below:
                break
            law = self._propagate(law)
        return np.array(out)


@dataclass(frozen=True)
class BirthDeathChain(CountableChain):
    """Nearest-neighbour chain with its own rule at 0.

    From 0: stay w.p. ``zero_hold``, go to 1 w.p. ``zero_up``.  From i >= 1:
    i-1 w.p. ``down``, stay w.p. ``hold``, i+1 w.p. ``up``.
    """

    zero_hold: Fraction
    zero_up: Fraction
    down: Fraction
    hold: Fraction
    up: Fraction

    def __post_init__(self):
        for name in ("zero_hold", "zero_up", "down", "hold", "up"):
            v = _frac(getattr(self, name))
            if v < 0:
                raise ChainError(f"{name} must be >= 0")
            object.__setattr__(self, name, v)
        if self.zero_hold + self.zero_up != 1:
            raise ChainError("probabilities at 0 must sum to 1")
        if self.down + self.hold + self.up != 1:
            raise ChainError("interior probabilities must sum to 1")

    def transitions(self, x):
        x = self._check_state(x)
        if x == 0:
            return [(0, self.zero_hold), (1, self.zero_up)]
        return [(x - 1, self.down), (x, self.hold), (x + 1, self.up)]

    def _float_row(self, x):
        if x == 0:
            row = ((0, float(self.zero_hold)), (1, float(self.zero_up)))
        else:
            row = ((x - 1, float(self.down)), (x, float(self.hold)), (x + 1, float(self.up)))
        return [(t, p) for t, p in row if p > 0]

    def invariant(self) -> Callable[[int], float]:
        """Pointwise unique ipm (detailed balance)."""
        if self.zero_up == 0:
            return lambda i: 1.0 if i == 0 else 0.0
        if self.up >= self.down:
            raise ChainError("no invariant probability measure: no downward drift")
        r = self.up / self.down
        first = self.zero_up / self.down
        total = 1 + first / (1 - r)
        mu0 = float(1 / total)
        mu1 = float(first / total)
        ratio = float(r)

        def mu(i: int) -> float:
            if i == 0:
                return mu0
            return mu1 * ratio ** (i - 1)

        return mu

    def hit_zero_probability(self, i: int) -> Fraction:
        """Probability of ever reaching 0 from i (gambler's ruin)."""
        i = self._check_state(i)
        if i == 0 or self.up <= self.down:
            return Fraction(1)
        return (self.down / self.up) ** i

    def vectorised_step(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Inverse-CDF step over targets in increasing order."""
        cuts = self._cuts()
        move = (u >= cuts[0]).astype(np.int64) + (u >= cuts[1]) - 1
        at_zero = x == 0
        if at_zero.any():
            move[at_zero] = u[at_zero] >= cuts[2]
        return x + move

    def _cuts(self):
        c = self.__dict__.get("_cut_cache")
        if c is None:
            c = (float(self.down), float(self.down + self.hold), float(self.zero_hold))
            object.__setattr__(self, "_cut_cache", c)
        return c


class CallbackChain(CountableChain):
    """Countable chain given by ``fn(state) -> [(target, prob), ...]``.

    Not serialisable; each row is checked on first use.
    """

    def __init__(self, fn: Callable[[int], list]):
        self._fn = fn

    def transitions(self, x):
        x = self._check_state(x)
        row = sorted((int(t), _frac(p)) for t, p in self._fn(x))
        if any(p < 0 for _, p in row) or sum(p for _, p in row) != 1:
            raise ChainError(f"row {x} is not a probability vector")
        if any(t < 0 for t, _ in row):
            raise ChainError(f"row {x} has a negative target")
        return row
