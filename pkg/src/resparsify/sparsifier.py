"""One-pass streaming row sampler with periodic resparsification.

Rows are appended with weight 1. Once the buffer holds more than
``high_capacity`` rows, leverage scores are computed once for the whole
buffer and then rows whose stored score is below ``1/(4c)`` are put
through fair coin flips (heads doubles both weight and stored score,
tails drops the row) until at most ``low_capacity`` rows remain. Stored
scores are deliberately not refreshed inside a round.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Optional

import numpy as np

from .game import default_c
from .linalg import (
    DimensionError,
    GramAccumulator,
    SpectralReport,
    emit_matrix,
    gram,
    leverage_scores,
    spectral_check,
)

__all__ = [
    "PICK_ORDERS",
    "SparsifierConfig",
    "SparsifierFailure",
    "RoundInfo",
    "StreamingSparsifier",
    "stale_leverage_audit",
    "streaming_sample",
]

PICK_ORDERS = ("ascending", "uniform", "insertion")
EXHAUSTED = "eligible rows exhausted"


class SparsifierFailure(RuntimeError):
    pass


@dataclass
class SparsifierConfig:
    epsilon: float
    dim: int
    rng_seed: int = 0
    scale: float = 1.0
    c: Optional[float] = None
    high_capacity: Optional[int] = None
    low_capacity: Optional[int] = None
    leverage_threshold: Optional[float] = None
    certify_each_round: bool = False
    audit_stale_leverage: bool = False
    record_events: bool = False
    pick_order: str = "ascending"

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.pick_order not in PICK_ORDERS:
            raise ValueError(f"pick_order must be one of {PICK_ORDERS}")
        if self.c is None:
            self.c = default_c(self.epsilon, self.dim, self.scale)
        if self.high_capacity is None:
            self.high_capacity = math.ceil(20 * self.dim * self.c)
        if self.low_capacity is None:
            self.low_capacity = math.ceil(10 * self.dim * self.c)
        if self.leverage_threshold is None:
            self.leverage_threshold = 1.0 / (4.0 * self.c)
        if not 0 < self.low_capacity < self.high_capacity:
            raise ValueError(
                f"need 0 < low_capacity < high_capacity, got {self.low_capacity}, {self.high_capacity}"
            )
        if not 0 < self.leverage_threshold < 1:
            raise ValueError(f"leverage_threshold must lie in (0, 1), got {self.leverage_threshold}")

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "dim": self.dim,
            "rng_seed": self.rng_seed,
            "scale": self.scale,
            "c": self.c,
            "high_capacity": self.high_capacity,
            "low_capacity": self.low_capacity,
            "leverage_threshold": self.leverage_threshold,
            "certify_each_round": self.certify_each_round,
            "pick_order": self.pick_order,
        }


@dataclass
class RoundInfo:
    index: int
    rows_seen: int
    size_before: int
    size_after: int
    flips: int
    stale_ratio: Optional[float] = None
    certificate: Optional[SpectralReport] = None

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "rows_seen": self.rows_seen,
            "size_before": self.size_before,
            "size_after": self.size_after,
            "flips": self.flips,
            "stale_ratio": self.stale_ratio,
            "certificate": None if self.certificate is None else self.certificate.to_dict(),
        }


class _Coins:
    """Fair coins drawn from a generator in blocks."""

    def __init__(self, rng: np.random.Generator, block: int = 8192):
        self._rng = rng
        self._block = block
        self._bits: List[int] = []
        self._pos = 0

    def flip(self) -> bool:
        if self._pos == len(self._bits):
            self._bits = self._rng.integers(0, 2, size=self._block, dtype=np.uint8).tolist()
            self._pos = 0
        bit = self._bits[self._pos]
        self._pos += 1
        return bit == 1


def stale_leverage_audit(rows, weights, leverage_estimates, reference: GramAccumulator) -> float:
    """Largest ratio of true leverage (w.r.t. ``reference``) to stored estimate.

    Rows with a zero estimate carry no information and are skipped.
    """
    true = leverage_scores(rows, weights, reference=reference)
    est = np.asarray(leverage_estimates, dtype=np.float64)
    ok = est > 0
    if not ok.any():
        return 1.0
    return float(np.max(true[ok] / est[ok]))


class StreamingSparsifier:
    """Bounded-memory sparsifier fed one row (or one chunk of rows) at a time.

    The buffer is a preallocated ``(high_capacity + 1, d)`` array, so its
    length can never exceed ``high_capacity + 1``.
    """

    def __init__(self, config: SparsifierConfig,
                 round_hook: Optional[Callable[["StreamingSparsifier"], None]] = None):
        self.config = config
        d = config.dim
        cap = config.high_capacity + 1
        self._rows = np.empty((cap, d))
        self._w = np.empty(cap)
        self._lev = np.full(cap, np.nan)
        self._origin = np.empty(cap, dtype=np.int64)
        self._len = 0
        # rows at buffer positions >= _pending have not been folded into the prefix Gram
        self._pending = 0
        self._prefix = np.zeros((d, d))
        seeds = np.random.SeedSequence(config.rng_seed).spawn(2)
        self._coins = _Coins(np.random.default_rng(seeds[0]))
        self._picker = np.random.default_rng(seeds[1])
        self.round_hook = round_hook
        self.rows_seen = 0
        self.rounds: List[RoundInfo] = []
        self.peak_size = 0
        self.failed = False
        self.failure_reason: Optional[str] = None
        self.events: List[tuple] = []

    # --- views ---------------------------------------------------------

    def __len__(self) -> int:
        return self._len

    @property
    def rows(self) -> np.ndarray:
        return self._rows[: self._len]

    @property
    def weights(self) -> np.ndarray:
        return self._w[: self._len]

    @property
    def leverage_estimates(self) -> np.ndarray:
        return self._lev[: self._len]

    @property
    def origin_ids(self) -> np.ndarray:
        return self._origin[: self._len]

    def _fold_pending(self) -> None:
        if self._pending < self._len:
            fresh = self._rows[self._pending : self._len]
            self._prefix += fresh.T @ fresh
            self._pending = self._len

    def input_gram(self) -> GramAccumulator:
        """Gram matrix of every row seen so far."""
        self._fold_pending()
        P = self._prefix
        return GramAccumulator(np.triu(P) + np.triu(P, 1).T)

    def buffer_gram(self) -> GramAccumulator:
        return gram(self.rows, self.weights)

    # --- ingestion -----------------------------------------------------

    def _check_live(self) -> None:
        if self.failed:
            raise SparsifierFailure(f"sparsifier has failed: {self.failure_reason}")

    def ingest(self, row) -> None:
        self._check_live()
        a = np.asarray(row, dtype=np.float64)
        if a.shape != (self.config.dim,):
            raise DimensionError(f"row has shape {a.shape}, expected ({self.config.dim},)")
        if not np.all(np.isfinite(a)):
            raise ValueError(f"row {self.rows_seen} has non-finite entries")
        j = self._len
        self._rows[j] = a
        self._w[j] = 1.0
        self._lev[j] = np.nan
        self._origin[j] = self.rows_seen
        self._len += 1
        self.rows_seen += 1
        self.peak_size = max(self.peak_size, self._len)
        if self._len > self.config.high_capacity:
            self.resparsify()

    def ingest_many(self, rows) -> None:
        """Same effect as calling :meth:`ingest` on each row in order."""
        A = np.asarray(rows, dtype=np.float64)
        if A.ndim != 2 or A.shape[1] != self.config.dim:
            raise DimensionError(f"rows have shape {A.shape}, expected (*, {self.config.dim})")
        if not np.all(np.isfinite(A)):
            bad = int(np.flatnonzero(~np.all(np.isfinite(A), axis=1))[0])
            raise ValueError(f"row {self.rows_seen + bad} has non-finite entries")
        pos = 0
        while pos < A.shape[0]:
            self._check_live()
            take = min(A.shape[0] - pos, self.config.high_capacity + 1 - self._len)
            j = self._len
            self._rows[j : j + take] = A[pos : pos + take]
            self._w[j : j + take] = 1.0
            self._lev[j : j + take] = np.nan
            self._origin[j : j + take] = np.arange(self.rows_seen, self.rows_seen + take)
            self._len += take
            self.rows_seen += take
            pos += take
            self.peak_size = max(self.peak_size, self._len)
            if self._len > self.config.high_capacity:
                self.resparsify()

    def consume(self, source: Iterable, chunk: int = 65536) -> "StreamingSparsifier":
        """Drain an iterator of rows (or of row chunks, if 2-d arrays are yielded)."""
        batch = []
        for item in source:
            arr = np.asarray(item, dtype=np.float64)
            if arr.ndim == 2:
                if batch:
                    self.ingest_many(np.array(batch))
                    batch = []
                self.ingest_many(arr)
                continue
            batch.append(arr)
            if len(batch) >= chunk:
                self.ingest_many(np.array(batch))
                batch = []
        if batch:
            self.ingest_many(np.array(batch))
        return self

    # --- resparsification ----------------------------------------------

    def resparsify(self) -> None:
        self._check_live()
        cfg = self.config
        n = self._len
        if n <= cfg.low_capacity:
            return
        self._fold_pending()
        A = self._rows[:n]
        w = self._w[:n]
        lev = self._lev[:n]
        lev[:] = leverage_scores(A, w)

        stale = None
        if cfg.audit_stale_leverage:
            stale = stale_leverage_audit(A, w, lev, self.input_gram())
        if self.round_hook is not None:
            self.round_hook(self)

        excess = n - cfg.low_capacity
        loop = {
            "ascending": self._loop_ascending,
            "uniform": self._loop_uniform,
            "insertion": self._loop_insertion,
        }[cfg.pick_order]
        removed, flips = loop(w, lev, excess)

        keep = np.flatnonzero(w > 0)
        m = keep.size
        self._rows[:m] = A[keep]
        self._w[:m] = w[keep]
        self._lev[:m] = lev[keep]
        self._origin[:m] = self._origin[:n][keep]
        self._len = m
        self._pending = m

        info = RoundInfo(len(self.rounds), self.rows_seen, n, m, flips, stale)
        if removed < excess:
            self.failed = True
            self.failure_reason = EXHAUSTED
        elif cfg.certify_each_round:
            info.certificate = spectral_check(self.buffer_gram(), self.input_gram(), cfg.epsilon)
        self.rounds.append(info)

    def _flip(self, j: int, w: np.ndarray, lev: np.ndarray) -> bool:
        heads = self._coins.flip()
        if self.config.record_events:
            self.events.append((int(self._origin[j]), float(w[j]), heads))
        if heads:
            w[j] *= 2.0
            lev[j] *= 2.0
        else:
            w[j] = 0.0
        return heads

    def _loop_ascending(self, w, lev, excess):
        thr = self.config.leverage_threshold
        vals = lev.tolist()
        heap = [(vals[j], j) for j in range(len(vals)) if vals[j] < thr]
        heapq.heapify(heap)
        removed = flips = 0
        while removed < excess and heap:
            _, j = heapq.heappop(heap)
            flips += 1
            if self._flip(j, w, lev):
                if lev[j] < thr:
                    heapq.heappush(heap, (float(lev[j]), j))
            else:
                removed += 1
        return removed, flips

    def _loop_uniform(self, w, lev, excess):
        thr = self.config.leverage_threshold
        pool = np.flatnonzero(lev < thr).tolist()
        removed = flips = 0
        while removed < excess and pool:
            k = int(self._picker.integers(len(pool)))
            j = pool[k]
            flips += 1
            heads = self._flip(j, w, lev)
            if not heads or lev[j] >= thr:
                removed += not heads
                pool[k] = pool[-1]
                pool.pop()
        return removed, flips

    def _loop_insertion(self, w, lev, excess):
        thr = self.config.leverage_threshold
        removed = flips = 0
        for j in range(len(w)):
            while removed < excess and lev[j] < thr and w[j] > 0:
                flips += 1
                if not self._flip(j, w, lev):
                    removed += 1
            if removed >= excess:
                break
        return removed, flips

    # --- output --------------------------------------------------------

    def stale_leverage_audit(self) -> float:
        """Audit the stored estimates of the current buffer against all rows seen."""
        lev = self.leverage_estimates
        known = ~np.isnan(lev)
        return stale_leverage_audit(self.rows[known], self.weights[known], lev[known],
                                    self.input_gram())

    def finalize(self) -> np.ndarray:
        """Return the sparsifier as plain rows (each scaled by ``sqrt(weight)``)."""
        self._check_live()
        self._fold_pending()
        return emit_matrix(self.rows, self.weights)


def streaming_sample(rows, epsilon: float, **config) -> np.ndarray:
    """Run the streaming sampler over ``rows`` and return the output matrix."""
    A = np.asarray(rows, dtype=np.float64)
    sp = StreamingSparsifier(SparsifierConfig(epsilon=epsilon, dim=A.shape[1], **config))
    sp.ingest_many(A)
    return sp.finalize()
