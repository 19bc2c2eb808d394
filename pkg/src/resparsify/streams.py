"""Synthetic row families used by the experiments and tests."""

from __future__ import annotations

from typing import Iterator

import numpy as np

from .linalg import isotropize

ROW_GENERATORS = ("gaussian", "duplicated-basis")


def gaussian_rows(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal((n, d))


def duplicated_basis_rows(n: int, d: int) -> np.ndarray:
    """Row ``k`` is the basis vector ``e_{k mod d}``; needs ``n >= d``."""
    if n < d:
        raise ValueError("need at least d rows to span R^d")
    A = np.zeros((n, d))
    A[np.arange(n), np.arange(n) % d] = 1.0
    return A


def isotropic_rows(kind: str, n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` rows in ``R^d`` with ``sum a a^T = I``."""
    if kind == "gaussian":
        A = gaussian_rows(n, d, rng)
    elif kind == "duplicated-basis":
        A = duplicated_basis_rows(n, d)
    else:
        raise ValueError(f"unknown row generator {kind!r}; expected one of {ROW_GENERATORS}")
    return isotropize(A)


def rescaled_isotropic_gaussian(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Isotropic Gaussian rows scaled by ``sqrt(n/d)`` so the mean squared row norm is 1."""
    return isotropic_rows("gaussian", n, d, rng) * np.sqrt(n / d)


def chunked(A: np.ndarray, chunk: int = 65536) -> Iterator[np.ndarray]:
    for start in range(0, A.shape[0], chunk):
        yield A[start : start + chunk]
