"""Simulator for the doubling-or-deletion adversary game on isotropic rows.

Every row starts at weight 1. On each move the adversary names a row ``i``
with ``w_i != 0`` and ``2 w_i |a_i|^2 <= 1/c``; a fair coin then either
doubles ``w_i`` or sets it to zero. The adversary wins as soon as
``sum_i w_i a_i a_i^T`` leaves the two-sided ``(1 +- eps)`` band around the
identity, and loses once no legal move remains.

Besides the weights, the state keeps the running maxima ``w'_i`` and the
per-row move counts, from which the monitored matrices can be rebuilt
exactly:

* variation  ``V = sum_i w'_i^2 (a_i a_i^T)^2``
* quadratic variation ``W_k = sum_{moves} w_old^2 (a_i a_i^T)^2``
* martingale ``Y_k = G_k - G_0``
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from .linalg import GramAccumulator, as_arrays, gram, spectral_check

__all__ = [
    "GameConfig",
    "GameStatus",
    "GameState",
    "MonitorReadings",
    "IllegalMoveError",
    "GameBudgetError",
    "NotIsotropicError",
    "default_c",
    "new_game",
    "eligible",
    "play_move",
    "run_game",
    "monitor_report",
    "builtin_strategies",
    "STRATEGY_NAMES",
]

ISOTROPY_TOL = 1e-6
AUDIT_EVERY = 1024
AUDIT_TOL = 1e-9


def default_c(epsilon: float, dim: int, scale: float = 1.0) -> float:
    """``scale * 100 * ln(max(d, 2)) / eps^2``."""
    return scale * 100.0 * math.log(max(dim, 2)) / epsilon ** 2


class IllegalMoveError(ValueError):
    pass


class GameBudgetError(RuntimeError):
    pass


class NotIsotropicError(ValueError):
    pass


class GameStatus(str, enum.Enum):
    RUNNING = "running"
    ADVERSARY_WON = "adversary_won"
    ADVERSARY_LOST = "adversary_lost"


@dataclass
class GameConfig:
    epsilon: float
    c: Optional[float] = None
    rng_seed: int = 0
    max_moves: Optional[int] = None

    def __post_init__(self):
        if not 0 < self.epsilon < 0.5:
            raise ValueError(f"epsilon must lie in (0, 1/2), got {self.epsilon}")
        if self.c is not None and not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")

    def resolve_c(self, dim: int) -> float:
        return self.c if self.c is not None else default_c(self.epsilon, dim)


@dataclass
class MonitorReadings:
    variation_norm: float
    quadratic_variation_norm: float
    martingale_norm: float

    def to_dict(self) -> dict:
        return {
            "variation_norm": self.variation_norm,
            "quadratic_variation_norm": self.quadratic_variation_norm,
            "martingale_norm": self.martingale_norm,
        }


def _max_doublings(sq_norms: np.ndarray, inv_c: float) -> np.ndarray:
    """Largest ``B`` with ``2^B s <= 1/c``; -1 for ignored rows.

    Zero rows are also marked -1: they could be doubled forever without
    affecting the Gram matrix.
    """
    B = np.full(sq_norms.shape, -1, dtype=np.int64)
    for i, s in enumerate(sq_norms):
        if s == 0 or s > inv_c:
            continue
        k = max(int(math.floor(math.log2(inv_c / s))), 0)
        while k > 0 and math.ldexp(s, k) > inv_c:
            k -= 1
        while math.ldexp(s, k + 1) <= inv_c:
            k += 1
        B[i] = k
    return B


@dataclass
class GameState:
    rows: np.ndarray
    epsilon: float
    c: float
    rng: np.random.Generator
    max_moves: int
    sq_norms: np.ndarray = field(init=False)
    weights: np.ndarray = field(init=False)
    max_weights: np.ndarray = field(init=False)
    moves_per_row: np.ndarray = field(init=False)
    max_doublings: np.ndarray = field(init=False)
    gram: np.ndarray = field(init=False)
    initial_gram: np.ndarray = field(init=False)
    quadratic_variation: np.ndarray = field(init=False)
    variation: np.ndarray = field(init=False)
    move_count: int = 0
    status: GameStatus = GameStatus.RUNNING
    won_at_move: Optional[int] = None
    last_move: int = -1
    log: List[tuple] = field(default_factory=list)

    def __post_init__(self):
        n, d = self.rows.shape
        self.inv_c = 1.0 / self.c
        self.sq_norms = np.einsum("ij,ij->i", self.rows, self.rows)
        self.weights = np.ones(n)
        self.max_weights = np.ones(n)
        self.moves_per_row = np.zeros(n, dtype=np.int64)
        self.max_doublings = _max_doublings(self.sq_norms, self.inv_c)
        self.gram = gram(self.rows).matrix
        self.initial_gram = self.gram.copy()
        self.quadratic_variation = np.zeros((d, d))
        active = self.active
        self.variation = gram(self.rows[active], self.sq_norms[active]).matrix
        self._identity = GramAccumulator.identity(d)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    @property
    def active(self) -> np.ndarray:
        """Rows that take part in the game (not ignored for being too long)."""
        return self.max_doublings >= 0

    def eligible_mask(self) -> np.ndarray:
        return self.active & (self.weights != 0) & (2.0 * self.weights * self.sq_norms <= self.inv_c)

    def eligible_indices(self) -> np.ndarray:
        return np.flatnonzero(self.eligible_mask())

    def move_bound(self) -> int:
        return int(np.sum(self.max_doublings + 1))

    def gram_accumulator(self) -> GramAccumulator:
        return GramAccumulator(self.gram.copy())

    def in_band(self) -> bool:
        """Same verdict as ``spectral_check(G, I, eps).passed``, from one eigvalsh call."""
        ev = np.linalg.eigvalsh(self.gram)
        return bool(1 - self.epsilon <= ev[0] and ev[-1] <= 1 + self.epsilon)

    def spectral_report(self):
        return spectral_check(GramAccumulator(self.gram.copy()), self._identity, self.epsilon)


def new_game(rows, config: GameConfig) -> GameState:
    """Start a game with every weight at 1.

    ``rows`` must be isotropic to within ``1e-6`` (Frobenius). Rows too long
    to ever be doubled are kept in the Gram matrix but never become eligible.
    """
    A, _ = as_arrays(rows)
    n, d = A.shape
    G = gram(A).matrix
    err = float(np.linalg.norm(G - np.eye(d)))
    if err > ISOTROPY_TOL:
        raise NotIsotropicError(f"rows are not isotropic: ||sum a a^T - I||_F = {err:.3e}")
    c = config.resolve_c(d)
    state = GameState(
        rows=A.copy(),
        epsilon=config.epsilon,
        c=c,
        rng=np.random.default_rng(config.rng_seed),
        max_moves=0,
    )
    state.max_moves = config.max_moves if config.max_moves is not None else state.move_bound()
    if not state.in_band():
        state.status = GameStatus.ADVERSARY_WON
        state.won_at_move = 0
    elif not state.eligible_mask().any():
        state.status = GameStatus.ADVERSARY_LOST
    return state


def eligible(state: GameState, i: int) -> bool:
    if not 0 <= i < state.n:
        raise IndexError(f"row index {i} out of range for {state.n} rows")
    w = state.weights[i]
    return bool(state.max_doublings[i] >= 0 and w != 0 and 2.0 * w * state.sq_norms[i] <= state.inv_c)


def _audit(state: GameState) -> None:
    fresh = gram(state.rows, state.weights).matrix
    drift = float(np.linalg.norm(fresh - state.gram)) / max(float(np.linalg.norm(fresh)), 1.0)
    if drift > AUDIT_TOL:
        raise RuntimeError(f"incremental Gram drifted by {drift:.3e}")
    state.gram = fresh


def play_move(state: GameState, i: int, coin: Optional[bool] = None, *,
              augmented: bool = False) -> GameState:
    """Flip the coin for row ``i``: heads doubles its weight, tails zeroes it.

    ``coin`` forces the outcome (used to replay recorded trajectories); by
    default it is drawn from the game's generator. With ``augmented`` the
    move is allowed after the adversary has already won.
    """
    if state.status is GameStatus.ADVERSARY_LOST or (
        state.status is GameStatus.ADVERSARY_WON and not augmented
    ):
        raise IllegalMoveError(f"game is over ({state.status.value})")
    if not eligible(state, i):
        raise IllegalMoveError(
            f"row {i} is not eligible (w={state.weights[i]}, |a|^2={state.sq_norms[i]:.3e}, 1/c={state.inv_c:.3e})"
        )
    heads = bool(state.rng.integers(2)) if coin is None else bool(coin)
    a = state.rows[i]
    w = state.weights[i]
    outer = np.outer(a, a)
    if heads:
        state.weights[i] = 2 * w
        state.gram += w * outer
        if 2 * w > state.max_weights[i]:
            state.variation += (4 * w * w - state.max_weights[i] ** 2) * state.sq_norms[i] * outer
            state.max_weights[i] = 2 * w
    else:
        state.weights[i] = 0.0
        state.gram -= w * outer
    # E[X_j^2 | past] = w^2 (a a^T)^2 = w^2 |a|^2 a a^T
    state.quadratic_variation += w * w * state.sq_norms[i] * outer
    state.moves_per_row[i] += 1
    state.move_count += 1
    state.last_move = i
    state.log.append((i, float(w), heads))

    if state.move_count % AUDIT_EVERY == 0:
        _audit(state)
    if state.status is GameStatus.RUNNING and not state.in_band():
        state.status = GameStatus.ADVERSARY_WON
        state.won_at_move = state.move_count
    return state


Strategy = Callable[[GameState], int]


def run_game(state: GameState, strategy: Strategy, augmented: bool = False) -> GameState:
    """Play until the adversary wins or runs out of legal moves.

    With ``augmented`` play continues after a win until no legal move
    remains; the final status still records the win.
    """
    if state.status is not GameStatus.RUNNING:
        return state
    while True:
        if state.status is GameStatus.ADVERSARY_WON and not augmented:
            break
        idx = state.eligible_indices()
        if idx.size == 0:
            if state.status is GameStatus.RUNNING:
                state.status = GameStatus.ADVERSARY_LOST
            break
        if state.move_count >= state.max_moves:
            raise GameBudgetError(f"game exceeded {state.max_moves} moves")
        play_move(state, int(strategy(state)), augmented=augmented)
    return state


def _spectral_norm_psd(M: np.ndarray) -> float:
    if M.size == 0:
        return 0.0
    return float(max(np.max(np.abs(np.linalg.eigvalsh(M))), 0.0))


def monitor_report(state: GameState) -> MonitorReadings:
    """Monitor norms rebuilt from the weights and move counts, not the running sums."""
    active = state.active
    A = state.rows[active]
    s = state.sq_norms[active]
    V = gram(A, state.max_weights[active] ** 2 * s).matrix
    # a row moved m times was flipped at weights 1, 2, ..., 2^(m-1)
    m = state.moves_per_row[active].astype(np.float64)
    W = gram(A, (np.power(4.0, m) - 1.0) / 3.0 * s).matrix
    Y = gram(state.rows, state.weights).matrix - state.initial_gram
    return MonitorReadings(
        variation_norm=_spectral_norm_psd(V),
        quadratic_variation_norm=_spectral_norm_psd(W),
        martingale_norm=_spectral_norm_psd(Y),
    )


# --- strategies -------------------------------------------------------------

def sequential(state: GameState) -> int:
    return int(state.eligible_indices()[0])


def round_robin(state: GameState) -> int:
    idx = state.eligible_indices()
    after = idx[idx > state.last_move]
    return int(after[0] if after.size else idx[0])


def uniform_random(seed: int = 0) -> Strategy:
    def pick(state: GameState) -> int:
        idx = state.eligible_indices()
        rng = np.random.default_rng([seed, state.move_count])
        return int(idx[rng.integers(idx.size)])

    pick.__name__ = "uniform_random"
    return pick


def greedy_weight(state: GameState) -> int:
    idx = state.eligible_indices()
    return int(idx[np.argmax(state.weights[idx] * state.sq_norms[idx])])


def greedy_spectral(state: GameState) -> int:
    """Pick the row with the largest weighted mass along the worst direction of ``G - I``."""
    idx = state.eligible_indices()
    vals, vecs = np.linalg.eigh(state.gram - np.eye(state.dim))
    v = vecs[:, np.argmax(np.abs(vals))]
    score = state.weights[idx] * (state.rows[idx] @ v) ** 2
    return int(idx[np.argmax(score)])


STRATEGY_NAMES = ("sequential", "round_robin", "uniform_random", "greedy_weight", "greedy_spectral")


def builtin_strategies(seed: int = 0) -> Dict[str, Strategy]:
    return {
        "sequential": sequential,
        "round_robin": round_robin,
        "uniform_random": uniform_random(seed),
        "greedy_weight": greedy_weight,
        "greedy_spectral": greedy_spectral,
    }
