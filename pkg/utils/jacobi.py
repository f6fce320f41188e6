import logging
from typing import Tuple

import numpy as np

from models.errors import ConvergenceError

logger = logging.getLogger(__name__)

MAX_SWEEPS = 100
OFF_DIAGONAL_TOLERANCE = 1e-12


def _offNorm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.sqrt(np.sum(off * off)))


def jacobiEigen(matrix: np.ndarray, tolerance: float = OFF_DIAGONAL_TOLERANCE,
                maxSweeps: int = MAX_SWEEPS) -> Tuple[np.ndarray, np.ndarray]:
    """
    Cyclic Jacobi eigen-decomposition of a small symmetric matrix.

    Returns (eigenvalues, eigenvectors) with eigenvectors as columns, sorted by
    descending eigenvalue, each column signed so its largest-magnitude loading is positive.
    Converged when the off-diagonal Frobenius norm is <= tolerance * ||A||_F.
    """
    a = np.array(matrix, dtype = np.float64)
    n = a.shape[0]
    if a.ndim != 2 or a.shape != (n, n):
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.allclose(a, a.T, rtol = 0, atol = 1e-12 * max(1.0, np.abs(a).max())):
        raise ValueError("matrix is not symmetric")
    a = (a + a.T) / 2.0

    v = np.eye(n)
    threshold = tolerance * np.linalg.norm(a)

    sweeps = 0
    while _offNorm(a) > threshold:
        if sweeps >= maxSweeps:
            raise ConvergenceError(f"Jacobi did not converge in {maxSweeps} sweeps "
                                   f"(off-diagonal norm {_offNorm(a):.3e})")
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p, q] == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                rotation = np.eye(n)
                rotation[p, p] = c
                rotation[q, q] = c
                rotation[p, q] = s
                rotation[q, p] = -s
                a = rotation.T @ a @ rotation
                a[p, q] = a[q, p] = 0.0
                v = v @ rotation

    logger.debug(f"Jacobi converged after {sweeps} sweeps for {n}x{n} matrix")

    values = np.diag(a).copy()
    order = np.argsort(-values, kind = "stable")
    values = values[order]
    vectors = v[:, order]

    for j in range(n):
        pivot = np.argmax(np.abs(vectors[:, j]))
        if vectors[pivot, j] < 0:
            vectors[:, j] = -vectors[:, j]

    return values, vectors
