"""Small 3-vector, rotation and 3x3 Hermitian helpers.

The eigenvalue path is the trigonometric solution of the characteristic
cubic; it is vectorised over leading batch dimensions because the spectrum
fitter evaluates thousands of 3x3 Hamiltonians per start grid.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError

__all__ = [
    "unit",
    "rotation_matrix",
    "rot_y",
    "rot_z",
    "is_rotation",
    "orthonormal_frame",
    "eigvalsh3",
    "eigensolve_hermitian3",
]

_HERMITIAN_TOL = 1e-10
# relative eigenvalue gap below which eigenvectors come from LAPACK instead
_DEGENERATE_GAP = 1e-4


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if not np.isfinite(n) or n == 0.0:
        raise InvalidInputError("cannot normalise a zero or non-finite vector")
    return v / n


def rotation_matrix(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation by ``angle`` (rad) about the unit vector ``axis``."""
    k = unit(axis)
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    s, c = np.sin(angle), np.cos(angle)
    return np.eye(3) + s * kx + (1.0 - c) * (kx @ kx)


def rot_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def is_rotation(r, tol: float = 1e-12) -> bool:
    r = np.asarray(r, dtype=float)
    if r.shape != (3, 3):
        return False
    return bool(
        np.allclose(r.T @ r, np.eye(3), atol=tol, rtol=0.0)
        and abs(np.linalg.det(r) - 1.0) <= tol
    )


def orthonormal_frame(n) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Right-handed frame (x, y, z) with z = n.

    The transverse pair is fixed by crossing with the lab basis vector along
    the smallest-magnitude component of ``n`` (ties go to the lowest index),
    so the same axis always yields the same frame.
    """
    z = np.asarray(n, dtype=float)
    if abs(np.linalg.norm(z) - 1.0) > 1e-12:
        raise InvalidInputError("axis must be a unit vector")
    pivot = np.zeros(3)
    pivot[int(np.argmin(np.abs(z)))] = 1.0
    x = np.cross(pivot, z)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return x, y, z


def _check_hermitian(m: np.ndarray) -> None:
    if m.shape[-2:] != (3, 3):
        raise InvalidInputError(f"expected (..., 3, 3) matrices, got {m.shape}")
    scale = max(1.0, float(np.max(np.abs(m))) if m.size else 1.0)
    dev = np.max(np.abs(m - np.conj(np.swapaxes(m, -1, -2)))) if m.size else 0.0
    if dev > _HERMITIAN_TOL * scale:
        raise InvalidInputError(f"matrix is not Hermitian (deviation {dev:.3g})")


def eigvalsh3(m) -> np.ndarray:
    """Ascending eigenvalues of (batched) 3x3 Hermitian matrices, closed form."""
    m = np.asarray(m)
    _check_hermitian(m)
    a11 = m[..., 0, 0].real
    a22 = m[..., 1, 1].real
    a33 = m[..., 2, 2].real
    a12, a13, a23 = m[..., 0, 1], m[..., 0, 2], m[..., 1, 2]

    q = (a11 + a22 + a33) / 3.0
    p1 = np.abs(a12) ** 2 + np.abs(a13) ** 2 + np.abs(a23) ** 2
    d1, d2, d3 = a11 - q, a22 - q, a33 - q
    p2 = d1 * d1 + d2 * d2 + d3 * d3 + 2.0 * p1
    p = np.sqrt(p2 / 6.0)

    safe_p = np.where(p > 0.0, p, 1.0)
    # det((A - qI) / p) / 2 for a Hermitian matrix; the imaginary part cancels
    det = (
        d1 * d2 * d3
        + 2.0 * (a12 * a23 * np.conj(a13)).real
        - d1 * np.abs(a23) ** 2
        - d2 * np.abs(a13) ** 2
        - d3 * np.abs(a12) ** 2
    )
    r = np.clip(det / (2.0 * safe_p**3), -1.0, 1.0)
    phi = np.arccos(r) / 3.0

    hi = q + 2.0 * p * np.cos(phi)
    lo = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    mid = 3.0 * q - hi - lo
    out = np.stack([lo, mid, hi], axis=-1)
    # triple degeneracy: p == 0 and the formula collapses to q
    out = np.where((p > 0.0)[..., None], out, q[..., None])
    return np.sort(out, axis=-1)


def eigensolve_hermitian3(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors (columns).

    Eigenvalues come from :func:`eigvalsh3`. Eigenvectors are built from
    cross products of rows of ``M - lambda I``; when two eigenvalues are
    closer than a small fraction of the spectral scale that construction is
    ill-conditioned and LAPACK's iterative solver is used instead.
    """
    m = np.asarray(m, dtype=complex)
    if m.shape != (3, 3):
        raise InvalidInputError(f"expected a 3x3 matrix, got {m.shape}")
    vals = eigvalsh3(m)
    scale = max(float(np.max(np.abs(vals))), float(np.linalg.norm(m)), 1e-300)
    gaps = np.diff(vals)
    if np.min(gaps) < _DEGENERATE_GAP * scale:
        w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
        return w, v

    vecs = np.empty((3, 3), dtype=complex)
    for k, lam in enumerate(vals):
        a = m - lam * np.eye(3)
        cands = (
            np.cross(a[0], a[1]),
            np.cross(a[0], a[2]),
            np.cross(a[1], a[2]),
        )
        # bilinear cross product: orthogonal (unconjugated) to both rows
        v = max(cands, key=lambda c: float(np.linalg.norm(c)))
        vecs[:, k] = v / np.linalg.norm(v)
    # one modified Gram-Schmidt sweep to clean rounding in orthogonality
    for k in range(3):
        for j in range(k):
            vecs[:, k] -= np.vdot(vecs[:, j], vecs[:, k]) * vecs[:, j]
        vecs[:, k] /= np.linalg.norm(vecs[:, k])
    return vals, vecs
