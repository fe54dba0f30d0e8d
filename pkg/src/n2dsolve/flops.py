"""Deterministic flop accounting for the dense kernels.

Complexity measurements in this package use flop counts, not wall time, so
results are reproducible. Counts follow the standard dense-kernel formulas;
what matters for the scaling fits is that they are applied consistently.
"""

from __future__ import annotations

import threading


def lu_flops(n: int) -> int:
    return int(round(2 * n**3 / 3))


def lu_solve_flops(n: int, nrhs: int) -> int:
    return 2 * n * n * nrhs


def matmul_flops(m: int, k: int, n: int) -> int:
    return 2 * m * k * n


def qr_flops(m: int, n: int) -> int:
    return int(round(2 * m * n * n - 2 * n**3 / 3))


def qr_apply_flops(m: int, n: int, nrhs: int) -> int:
    # apply Q^T (Householder form) then back-substitute
    return (4 * m * n - 2 * n * n) * nrhs + n * n * nrhs


def svd_flops(m: int, n: int) -> int:
    a, b = max(m, n), min(m, n)
    return 6 * a * b * b + 11 * b**3


class FlopCounter:
    """Build-wide counter with leaf / merge / solve buckets.

    Increments may come from concurrent leaf builds, hence the lock.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self.leaf = 0
        self.merge = 0
        self.solve = 0

    def add(self, bucket: str, n: int) -> None:
        with self._lock:
            setattr(self, bucket, getattr(self, bucket) + int(n))

    @property
    def total(self) -> int:
        return self.leaf + self.merge + self.solve

    @property
    def build(self) -> int:
        return self.leaf + self.merge


def fit_loglog_slope(xs, ys) -> float:
    """Least-squares slope of log(y) against log(x)."""
    import numpy as np

    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(ys, dtype=float))
    lx = lx - lx.mean()
    return float(np.dot(lx, ly - ly.mean()) / np.dot(lx, lx))
