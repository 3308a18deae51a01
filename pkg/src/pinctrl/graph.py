"""Graph Laplacians and the spectral norms used by the stability certificate.

Matrices are dense ``numpy`` arrays; the networks handled here are small.
"""

from __future__ import annotations

import numpy as np

ROW_SUM_TOL = 1e-12


class GraphError(ValueError):
    """Raised for malformed adjacency or Laplacian matrices."""


def validate_adjacency(adj) -> np.ndarray:
    A = np.asarray(adj, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise GraphError(f"adjacency must be square, got shape {A.shape}")
    if A.shape[0] < 1:
        raise GraphError("adjacency must have at least one node")
    if not np.all(np.isfinite(A)):
        i, j = np.argwhere(~np.isfinite(A))[0]
        raise GraphError(f"adjacency entry ({i}, {j}) is not finite")
    neg = np.argwhere(A < 0)
    if len(neg):
        i, j = neg[0]
        raise GraphError(f"adjacency entry ({i}, {j}) is negative: {A[i, j]}")
    diag = np.flatnonzero(np.diag(A) != 0)
    if len(diag):
        i = diag[0]
        raise GraphError(f"adjacency diagonal entry ({i}, {i}) is nonzero: {A[i, i]}")
    return A


def validate_laplacian(L) -> np.ndarray:
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise GraphError(f"Laplacian must be square, got shape {L.shape}")
    off = L - np.diag(np.diag(L))
    bad = np.argwhere(off > 0)
    if len(bad):
        i, j = bad[0]
        raise GraphError(f"Laplacian off-diagonal entry ({i}, {j}) is positive: {L[i, j]}")
    rows = np.abs(L.sum(axis=1))
    if rows.max(initial=0.0) > ROW_SUM_TOL:
        i = int(np.argmax(rows))
        raise GraphError(f"Laplacian row {i} sums to {L[i].sum()!r}, expected 0")
    return L


def build_laplacian(adj) -> np.ndarray:
    """Return ``L = D - A`` for a nonnegative, zero-diagonal adjacency matrix."""
    A = validate_adjacency(adj)
    L = np.diag(A.sum(axis=1)) - A
    return validate_laplacian(L)


def complete_adjacency(n: int, weight: float = 1.0) -> np.ndarray:
    A = np.full((n, n), float(weight))
    np.fill_diagonal(A, 0.0)
    return A


def path_adjacency(n: int, weight: float = 1.0) -> np.ndarray:
    A = np.zeros((n, n))
    idx = np.arange(n - 1)
    A[idx, idx + 1] = A[idx + 1, idx] = weight
    return A


def ring_adjacency(n: int, weight: float = 1.0) -> np.ndarray:
    A = path_adjacency(n, weight)
    if n > 2:
        A[0, -1] = A[-1, 0] = weight
    return A


GRAPHS = {
    "complete": complete_adjacency,
    "path": path_adjacency,
    "ring": ring_adjacency,
    "empty": lambda n, weight=1.0: np.zeros((n, n)),
}


def laplacian_spectral_norm(L) -> float:
    """Largest singular value of ``L``.

    Symmetric matrices go through the symmetric eigensolver; anything else
    falls back to a full SVD.
    """
    L = np.asarray(L, dtype=float)
    if np.array_equal(L, L.T):
        return float(np.max(np.abs(np.linalg.eigvalsh(L))))
    return float(np.linalg.svd(L, compute_uv=False)[0])


def kron_identity_norm(L, p: int) -> float:
    """Spectral norm of ``L ⊗ I_p``, which equals that of ``L`` for any p >= 1."""
    if int(p) != p or p < 1:
        raise ValueError(f"p must be a positive integer, got {p!r}")
    return laplacian_spectral_norm(L)
