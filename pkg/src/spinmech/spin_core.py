"""NV ground-state spin-1 Hamiltonian and the spin torque it generates.

All Hamiltonians are in cycles (Hz). Spin operators act on the ordered basis
``(|+1>, |0>, |-1>)``; index 1 is the ``m_S = 0`` state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.constants import hbar, h as planck

from .errors import DegenerateLabelingError, InvalidInputError
from .vector3 import eigensolve_hermitian3, eigvalsh3, orthonormal_frame, rotation_matrix

__all__ = [
    "HBAR",
    "PLANCK",
    "SX",
    "SY",
    "SZ",
    "IDX_PLUS",
    "IDX_ZERO",
    "IDX_MINUS",
    "SpinConstants",
    "check_axis",
    "check_density_matrix",
    "build_hamiltonian",
    "build_hamiltonian_in_frame",
    "transition_frequencies",
    "transition_pair",
    "spin_torque",
    "spin_torque_numeric",
    "per_spin_torque_scale",
]

HBAR = hbar
PLANCK = planck

IDX_PLUS, IDX_ZERO, IDX_MINUS = 0, 1, 2

_S2 = 1.0 / np.sqrt(2.0)
SX = _S2 * np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex)
SY = _S2 * np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex)
SZ = np.diag([1.0, 0.0, -1.0]).astype(complex)
_SZ2 = SZ @ SZ
_SVEC = np.stack([SX, SY, SZ])


@dataclass(frozen=True)
class SpinConstants:
    """Zero-field splitting and electron gyromagnetic ratio, both in cycles."""

    d_zfs: float = 2.87e9  # Hz
    gamma_e: float = 28.0e9  # Hz/T

    def __post_init__(self):
        if not (self.d_zfs > 0 and self.gamma_e > 0):
            raise InvalidInputError("d_zfs and gamma_e must be positive")


DEFAULT_CONSTANTS = SpinConstants()


def check_axis(axis, name: str = "axis") -> np.ndarray:
    n = np.asarray(axis, dtype=float)
    if n.shape != (3,) or not np.all(np.isfinite(n)):
        raise InvalidInputError(f"{name} must be a finite 3-vector")
    if abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise InvalidInputError(f"{name} must be normalised (|n| = {np.linalg.norm(n):.15g})")
    return n


def _check_field(field) -> np.ndarray:
    b = np.asarray(field, dtype=float)
    if b.shape != (3,) or not np.all(np.isfinite(b)):
        raise InvalidInputError("field must be a finite 3-vector in tesla")
    return b


def check_density_matrix(rho, tol: float = 1e-12) -> np.ndarray:
    """Validate a 3x3 density matrix and return it as a complex array."""
    r = np.asarray(rho, dtype=complex)
    if r.shape != (3, 3):
        raise InvalidInputError(f"density matrix must be 3x3, got {r.shape}")
    if np.max(np.abs(r - r.conj().T)) > tol:
        raise InvalidInputError("density matrix is not Hermitian")
    if abs(np.trace(r) - 1.0) > tol:
        raise InvalidInputError(f"density matrix trace is {np.trace(r).real:.15g}")
    if np.min(np.linalg.eigvalsh(r)) < -1e-10:
        raise InvalidInputError("density matrix has a negative eigenvalue")
    return r


def build_hamiltonian_in_frame(field, frame, constants: SpinConstants = DEFAULT_CONSTANTS):
    """Hamiltonian with the NV frame given explicitly as ``(x', y', z')``."""
    b = np.asarray(field, dtype=float)
    x, y, z = frame
    bx, by, bz = b @ x, b @ y, b @ z
    g = constants.gamma_e
    return constants.d_zfs * _SZ2 + g * (bx * SX + by * SY + bz * SZ)


def build_hamiltonian(field, axis, constants: SpinConstants = DEFAULT_CONSTANTS) -> np.ndarray:
    """NV Hamiltonian (Hz) for a lab-frame field and NV axis.

    >>> np.round(np.linalg.eigvalsh(build_hamiltonian([0, 0, 0], [0, 0, 1])) / 1e9, 3)
    array([0.  , 2.87, 2.87])
    """
    b = _check_field(field)
    n = check_axis(axis)
    return build_hamiltonian_in_frame(b, orthonormal_frame(n), constants)


def _labels(vecs: np.ndarray) -> np.ndarray:
    # overlaps[e, bare] = |<bare|e>|^2
    return np.argmax(np.abs(vecs.T) ** 2, axis=1)


def transition_frequencies(H) -> tuple[float, float]:
    """Return ``(f_minus, f_plus)``: the 0 -> -1 and 0 -> +1 transition frequencies.

    Eigenstates are labelled by their largest overlap with the bare states, not
    by energy order. Raises :class:`DegenerateLabelingError` when two
    non-degenerate eigenstates claim the same bare label.
    """
    vals, vecs = eigensolve_hermitian3(H)
    labels = _labels(vecs)
    if len(set(labels.tolist())) < 3:
        scale = max(float(np.max(np.abs(vals))), 1.0)
        clash = [
            (i, j)
            for i in range(3)
            for j in range(i + 1, 3)
            if labels[i] == labels[j] and abs(vals[i] - vals[j]) > 1e-9 * scale
        ]
        if clash:
            raise DegenerateLabelingError(
                f"eigenstates {clash[0]} both resemble bare state index {labels[clash[0][0]]}"
            )
        # clashes only inside degenerate subspaces: any consistent assignment
        # gives the same energies, so take the best permutation of overlaps
        ov = np.abs(vecs.T) ** 2
        perms = ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0))
        best = max(perms, key=lambda p: sum(ov[e, p[e]] for e in range(3)))
        labels = np.array(best)
    energy = {int(lab): float(vals[e]) for e, lab in enumerate(labels)}
    e0 = energy[IDX_ZERO]
    return energy[IDX_MINUS] - e0, energy[IDX_PLUS] - e0


def transition_pair(H) -> tuple[float, float]:
    """Both transition frequencies from the lowest level, ascending.

    Below the level anti-crossing the lowest level is the ``m_S = 0``-like
    state, so this is label-free and never fails; used where only the set of
    lines matters.
    """
    w = eigvalsh3(H)
    return float(w[..., 1] - w[..., 0]), float(w[..., 2] - w[..., 0])


def _torque_generator(field, axis, rotation_axis, constants):
    """dH/dtheta (Hz) for a rigid rotation of the NV frame about rotation_axis.

    Rotating the frame vectors e_i -> R(theta) e_i changes the field components
    b_i = B . e_i at the rate B . (u x e_i).
    """
    b = _check_field(field)
    n = check_axis(axis)
    u = check_axis(rotation_axis, "rotation_axis")
    frame = orthonormal_frame(n)
    rates = [b @ np.cross(u, e) for e in frame]
    return constants.gamma_e * (rates[0] * SX + rates[1] * SY + rates[2] * SZ)


def spin_torque(rho, field, axis, rotation_axis, constants: SpinConstants = DEFAULT_CONSTANTS) -> float:
    """Per-spin torque (N m) about ``rotation_axis``, from the rotation generator.

    ``rho`` is expressed in the NV basis attached to ``axis``; the crystal
    (and with it that basis) rotates rigidly.
    """
    r = check_density_matrix(rho, tol=1e-10)
    dh = _torque_generator(field, axis, rotation_axis, constants)
    return float(-np.trace(r @ dh).real * PLANCK)


def spin_torque_numeric(
    rho,
    field,
    axis,
    rotation_axis,
    constants: SpinConstants = DEFAULT_CONSTANTS,
    step: float = 1e-6,
) -> float:
    """Central-difference counterpart of :func:`spin_torque`."""
    r = check_density_matrix(rho, tol=1e-10)
    n = check_axis(axis)
    u = check_axis(rotation_axis, "rotation_axis")
    frame = orthonormal_frame(n)

    def h_at(theta):
        rot = rotation_matrix(u, theta)
        return build_hamiltonian_in_frame(field, [rot @ e for e in frame], constants)

    dh = (h_at(step) - h_at(-step)) / (2.0 * step)
    return float(-np.trace(r @ dh).real * PLANCK)


def per_spin_torque_scale(field_magnitude: float, constants: SpinConstants = DEFAULT_CONSTANTS) -> float:
    """Torque of one fully polarised spin at right angles to the field, N m."""
    if field_magnitude < 0:
        raise InvalidInputError("field magnitude must be non-negative")
    return HBAR * 2.0 * np.pi * constants.gamma_e * field_magnitude
