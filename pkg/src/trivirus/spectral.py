"""Spectral quantities and matrix classifications used by the stability theorems."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.sparse.csgraph import connected_components

# Band around the critical values (radius 1, abscissa 0) inside which a
# verdict is reported as inconclusive.
CRITICAL_TOL = 1e-8


def _check_square(M, name="matrix") -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def spectral_radius(M) -> float:
    M = _check_square(M)
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def spectral_abscissa(M) -> float:
    M = _check_square(M)
    return float(np.max(np.linalg.eigvals(M).real))


def is_irreducible(M) -> bool:
    """True iff the digraph with an edge ``i -> j`` for each ``M[i, j] > 0`` is strongly connected."""
    M = _check_square(M)
    if M.shape[0] == 1:
        return True
    n_comp, _ = connected_components(M > 0, directed=True, connection="strong")
    return n_comp == 1


def elementwise_order(A, B) -> str:
    """Strongest relation ``A ? B`` in the entrywise partial order.

    Returns ``">>"`` (every entry strictly larger), ``">"`` (``A >= B`` and
    ``A != B``), ``">="`` (only when ``A == B``), or ``"incomparable"``.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")
    if np.all(A > B):
        return ">>"
    if np.all(A >= B):
        return ">" if np.any(A != B) else ">="
    return "incomparable"


def is_greater(A, B) -> bool:
    """``A > B`` meaning ``A >= B`` entrywise and ``A != B``."""
    return elementwise_order(A, B) in (">", ">>")


def perron_vectors(M) -> tuple[float, np.ndarray, np.ndarray]:
    """Perron root with right and left eigenvectors, each scaled to unit 1-norm.

    For an irreducible nonnegative (or Metzler) matrix the dominant
    eigenvalue is real and simple with strictly positive eigenvectors.
    """
    M = _check_square(M)
    w, V = np.linalg.eig(M)
    i = int(np.argmax(w.real))
    right = np.real(V[:, i])
    wl, U = np.linalg.eig(M.T)
    left = np.real(U[:, int(np.argmax(wl.real))])
    right = right / right.sum()
    left = left / left.sum()
    return float(w[i].real), right, left


def power_iteration(M, tol: float = 1e-12, max_iter: int = 100_000, shift: float = 1.0):
    """Dominant eigenpair of a nonnegative irreducible matrix by shifted power iteration.

    The shift ``M + shift*I`` makes the matrix primitive, so the iteration
    converges even for periodic patterns such as cycles. Used only to
    cross-check the dense eigensolver.
    """
    M = _check_square(M)
    A = M + shift * np.eye(M.shape[0])
    v = np.ones(M.shape[0]) / M.shape[0]
    lam = 0.0
    for _ in range(max_iter):
        w = A @ v
        new_lam = w.sum() / v.sum()
        w = w / w.sum()
        if np.max(np.abs(w - v)) < tol and abs(new_lam - lam) < tol * max(1.0, abs(new_lam)):
            return new_lam - shift, w
        v, lam = w, new_lam
    raise RuntimeError("power iteration did not converge")


@dataclass(frozen=True)
class SpectralSummary:
    spectral_radius: float
    spectral_abscissa: float
    right_vector: Optional[np.ndarray]
    left_vector: Optional[np.ndarray]
    irreducible: bool


def summarize(M) -> SpectralSummary:
    """Radius, abscissa and (for irreducible Metzler matrices) Perron vectors."""
    M = _check_square(M)
    eig = np.linalg.eigvals(M)
    off = M - np.diag(np.diag(M))
    metzler = bool(np.all(off >= 0))
    irreducible = metzler and is_irreducible(np.abs(off) + np.eye(M.shape[0]))
    right = left = None
    if irreducible:
        _, right, left = perron_vectors(M)
    return SpectralSummary(
        spectral_radius=float(np.max(np.abs(eig))),
        spectral_abscissa=float(np.max(eig.real)),
        right_vector=right,
        left_vector=left,
        irreducible=irreducible,
    )


@dataclass(frozen=True)
class MetzlerClass:
    is_metzler: bool
    is_hurwitz: bool
    # -M is a singular M-matrix: M Metzler with spectral abscissa 0.
    is_singular_m_matrix_negation: bool
    abscissa: float


def classify_metzler(M, tol: float = CRITICAL_TOL) -> MetzlerClass:
    M = _check_square(M)
    off = M - np.diag(np.diag(M))
    metzler = bool(np.all(off >= 0))
    s = spectral_abscissa(M)
    return MetzlerClass(
        is_metzler=metzler,
        is_hurwitz=s < 0,
        is_singular_m_matrix_negation=metzler and abs(s) <= tol,
        abscissa=s,
    )


def sign_verdict(value: float, critical: float, tol: float = CRITICAL_TOL) -> int:
    """-1 / 0 / +1 for below / within ``tol`` of / above the critical value."""
    if value > critical + tol:
        return 1
    if value < critical - tol:
        return -1
    return 0
