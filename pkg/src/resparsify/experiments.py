"""Seeded experiment drivers shared by the CLI and the acceptance tests.

Trial ``t`` of a run with base seed ``s`` draws everything from
``SeedSequence(s + t)``, so results do not depend on scheduling; trials are
folded in index order.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import Iterable, Optional

import numpy as np

from .bounds import game_bounds
from .game import (
    STRATEGY_NAMES,
    GameConfig,
    GameStatus,
    builtin_strategies,
    monitor_report,
    new_game,
    run_game,
)
from .linalg import gram, spectral_check
from .sparsifier import SparsifierConfig, StreamingSparsifier
from .streams import isotropic_rows

THREADS_ENV = "RESPARSIFY_THREADS"


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _u64(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1, np.uint64)[0])


def game_trial(trial: int, *, dim: int, n_rows: int, epsilon: float, strategy: str,
               seed: int, augmented: bool = False, row_gen: str = "gaussian",
               c: Optional[float] = None) -> dict:
    """Play one seeded game and return its final readings."""
    rows_ss, coin_ss, strat_ss = np.random.SeedSequence(seed + trial).spawn(3)
    rows = isotropic_rows(row_gen, n_rows, dim, np.random.default_rng(rows_ss))
    state = new_game(rows, GameConfig(epsilon, c=c, rng_seed=_u64(coin_ss)))
    eligible_at_start = int(state.eligible_mask().sum())
    run_game(state, builtin_strategies(_u64(strat_ss))[strategy], augmented=augmented)
    mon = monitor_report(state)
    return {
        "status": state.status.value,
        "moves": state.move_count,
        "won_at_move": state.won_at_move,
        "eligible_at_start": eligible_at_start,
        "c": state.c,
        **mon.to_dict(),
    }


def _quantiles(x: np.ndarray) -> dict:
    if x.size == 0:
        return {"q50": 0.0, "q95": 0.0, "max": 0.0}
    return {
        "q50": float(np.quantile(x, 0.5, method="higher")),
        "q95": float(np.quantile(x, 0.95, method="higher")),
        "max": float(np.max(x)),
    }


def run_game_trials(*, dim: int, n_rows: int, epsilon: float, strategy: str, trials: int,
                    seed: int, augmented: bool = False, row_gen: str = "gaussian",
                    c: Optional[float] = None, threads: int = 1) -> dict:
    """Run ``trials`` independent games and aggregate them into a game report."""
    if strategy not in STRATEGY_NAMES:
        raise ValueError(f"unknown strategy {strategy!r}; built-ins: {', '.join(STRATEGY_NAMES)}")
    t0 = time.perf_counter()
    fn = partial(game_trial, dim=dim, n_rows=n_rows, epsilon=epsilon, strategy=strategy,
                 seed=seed, augmented=augmented, row_gen=row_gen, c=c)
    if threads > 1 and trials > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            per_trial = list(pool.map(fn, range(trials)))
    else:
        per_trial = [fn(t) for t in range(trials)]
    elapsed = time.perf_counter() - t0

    c_used = per_trial[0]["c"] if per_trial else GameConfig(epsilon, c=c).resolve_c(dim)
    moves = np.array([r["moves"] for r in per_trial], dtype=np.int64)
    wins = sum(r["status"] == GameStatus.ADVERSARY_WON.value for r in per_trial)
    var_c = np.array([r["variation_norm"] for r in per_trial]) * c_used
    qv_c = np.array([r["quadratic_variation_norm"] for r in per_trial]) * c_used
    return {
        "schema_version": 1,
        "kind": "game",
        "seed": seed,
        "config": {
            "dim": dim, "rows": n_rows, "epsilon": epsilon, "c": c_used,
            "row_gen": row_gen, "threads": threads,
        },
        "wall_clock_seconds": elapsed,
        "bounds": game_bounds(dim, epsilon, c_used),
        "trials": trials,
        "strategy": strategy,
        "augmented": augmented,
        "win_rate": wins / trials if trials else 0.0,
        "moves": {
            "mean": float(moves.mean()) if trials else 0.0,
            "min": int(moves.min()) if trials else 0,
            "max": int(moves.max()) if trials else 0,
        },
        "variation_norm_times_c": _quantiles(var_c),
        "quadratic_variation_norm_times_c": _quantiles(qv_c),
        "per_trial": per_trial,
    }


def run_sparsify(chunks: Iterable[np.ndarray], config: SparsifierConfig, round_hook=None):
    """Stream ``chunks`` through a sparsifier and certify the result.

    Returns ``(sparsifier, output_rows_or_None, report)``; the output is None
    when the sparsifier failed.
    """
    t0 = time.perf_counter()
    sp = StreamingSparsifier(config, round_hook=round_hook)
    output = None
    spectral = None
    try:
        for block in chunks:
            sp.ingest_many(block)
    except Exception:
        if not sp.failed:
            raise
    if not sp.failed:
        output = sp.finalize()
        spectral = spectral_check(gram(output, dim=config.dim), sp.input_gram(), config.epsilon)
    elapsed = time.perf_counter() - t0
    report = {
        "schema_version": 1,
        "kind": "sparsify",
        "seed": config.rng_seed,
        "config": config.to_dict(),
        "wall_clock_seconds": elapsed,
        "bounds": game_bounds(config.dim, config.epsilon, config.c),
        "rows_seen": sp.rows_seen,
        "rounds": len(sp.rounds),
        "output_rows": 0 if output is None else int(output.shape[0]),
        "peak_buffer": sp.peak_size,
        "spectral": None if spectral is None else spectral.to_dict(),
        "stale_ratios": [r.stale_ratio for r in sp.rounds if r.stale_ratio is not None],
        "round_log": [r.to_dict() for r in sp.rounds],
        "failure": sp.failure_reason,
    }
    return sp, output, report
