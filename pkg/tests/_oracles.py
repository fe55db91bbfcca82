"""Brute-force linear algebra oracles, independent of the library's SVD path.

The decompositions here are computed by one-sided Jacobi orthogonalization
written out in elementary numpy arithmetic (no ``np.linalg`` calls at all),
so agreement with the package is a meaningful cross-check rather than a
tautology.  Jacobi is slow but achieves high relative accuracy on the small
matrices these tests use, which lets the comparisons run at 1e-10 and below.
"""

from __future__ import annotations

import numpy as np


def _norm(v: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.abs(v) ** 2)))


def jacobi_right_vectors(a: np.ndarray, max_sweeps: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """One-sided Jacobi factorization ``a = U diag(s) Wᴴ``.

    Returns ``(s, w)`` with singular values descending and ``w`` unitary
    (columns are right singular vectors); ``a @ w[:, k]`` has norm ``s[k]``.
    Rotations are applied until every column pair is orthogonal to roughly
    machine precision.
    """
    b = np.array(a, dtype=np.complex128)
    n = b.shape[1]
    w = np.eye(n, dtype=np.complex128)
    # columns this far below the matrix scale are numerically zero; rotating
    # them against each other only churns noise (and can reach denormals)
    floor = (1e-20 * _norm(b)) ** 2
    for _ in range(max_sweeps):
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                x = b[:, i]
                y = b[:, j]
                aa = float(np.sum(np.abs(x) ** 2))
                bb = float(np.sum(np.abs(y) ** 2))
                c = complex(np.sum(np.conj(x) * y))
                if aa <= floor or bb <= floor or abs(c) <= 1e-15 * np.sqrt(aa * bb):
                    continue
                rotated = True
                phase = c / abs(c)
                tau = (bb - aa) / (2.0 * abs(c))
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                cs = 1.0 / np.sqrt(1.0 + t * t)
                sn = t * cs
                # unitary 2x2 right-multiplication on the (i, j) column pair
                bi = cs * x - sn * np.conj(phase) * y
                bj = sn * x + cs * np.conj(phase) * y
                b[:, i] = bi
                b[:, j] = bj
                wi = cs * w[:, i] - sn * np.conj(phase) * w[:, j]
                wj = sn * w[:, i] + cs * np.conj(phase) * w[:, j]
                w[:, i] = wi
                w[:, j] = wj
        if not rotated:
            break
    norms = np.array([_norm(b[:, k]) for k in range(n)])
    order = np.argsort(norms)[::-1]
    return norms[order], w[:, order]


def jacobi_singular_values(a: np.ndarray) -> np.ndarray:
    s, _ = jacobi_right_vectors(a)
    return s[: min(a.shape)]


def jacobi_null_vector(a: np.ndarray) -> np.ndarray:
    """Unit right vector for the smallest singular value."""
    _, w = jacobi_right_vectors(a)
    v = w[:, -1]
    return v / _norm(v)


def jacobi_rank(a: np.ndarray, rel_tol: float) -> int:
    s = jacobi_singular_values(a)
    if s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rel_tol * s[0]))


def jacobi_left_null_basis(a: np.ndarray, rel_tol: float) -> np.ndarray:
    """Orthonormal basis of the left null space, via Jacobi on ``aᴴ``."""
    s, w = jacobi_right_vectors(a.conj().T)
    top = s[0]
    if top == 0.0:
        return w
    return w[:, s <= rel_tol * top]


def projector(basis: np.ndarray) -> np.ndarray:
    return basis @ basis.conj().T


def random_complex_matrix(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2.0)


def random_rank_matrix(
    rng: np.random.Generator, rows: int, cols: int, rank: int
) -> np.ndarray:
    left = random_complex_matrix(rng, rows, rank)
    right = random_complex_matrix(rng, rank, cols)
    return left @ right
