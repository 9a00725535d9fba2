"""The symmetric operator F(lambda) = sum arctan(lambda_i) and its calculus.

Provides the closed-form symmetric eigensolve for n in {1, 2, 3}, the
matrix derivative F^ij = (I + A^2)^{-1}, the two structure sums
sum 1/(1+lambda_i^2) and sum lambda_i^2/(1+lambda_i^2) whose pointwise
total is exactly n, and the constants (mu1, mu2, Lambda1) that bound the
sums uniformly along the flow.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SpectralData",
    "StructureConstants",
    "sym_eigen",
    "F_value",
    "F_derivative",
    "structure_sums",
    "structure_constants",
    "eigenvalues_2x2",
]


@dataclass(frozen=True)
class SpectralData:
    """Eigenvalues (ascending) and orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self):
        V = self.eigenvectors
        return V @ np.diag(self.eigenvalues) @ V.T


@dataclass(frozen=True)
class StructureConstants:
    """Uniform bounds for the structure sums along the flow.

    mu1 bounds min lambda from above, mu2 bounds max lambda from below,
    and Lambda1 = min(1/(1+mu1^2), mu2^2/(1+mu2^2)) is the common lower
    bound of both structure sums; delta is the p-oscillation allowance.
    """

    mu1: float
    mu2: float
    Lambda1: float
    delta: float
    Fmax0: float
    Fmin0: float
    n: int


def _check_symmetric(A, tol=1e-12):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if A.shape[0] > 3:
        raise ValueError("closed-form eigensolve supports n <= 3 only")
    if np.max(np.abs(A - A.T)) > tol:
        raise ValueError("matrix is not symmetric within 1e-12")
    return 0.5 * (A + A.T)


def _fix_sign(v):
    k = int(np.argmax(np.abs(v)))
    return v if v[k] > 0 or (v[k] == 0 and v[0] >= 0) else -v


def sym_eigen(A):
    """Closed-form spectral decomposition of a symmetric n x n matrix, n <= 3.

    Eigenvalues are sorted ascending; each eigenvector's largest-magnitude
    component is made positive.
    """
    A = _check_symmetric(A)
    n = A.shape[0]
    if n == 1:
        return SpectralData(np.array([A[0, 0]]), np.array([[1.0]]))
    if n == 2:
        return _eigen_2(A)
    return _eigen_3(A)


def _eigen_2(A):
    mean = 0.5 * (A[0, 0] + A[1, 1])
    off = A[0, 1]
    half_diff = 0.5 * (A[0, 0] - A[1, 1])
    r = np.hypot(half_diff, off)
    lam = np.array([mean - r, mean + r])
    if r < 1e-300:
        V = np.eye(2)
    else:
        # eigenvector for lam[0]: (A - lam0 I) v = 0
        v0 = np.array([-off, A[0, 0] - lam[0]])
        if np.linalg.norm(v0) < 1e-300:
            v0 = np.array([lam[0] - A[1, 1], off])
        v0 /= np.linalg.norm(v0)
        v1 = np.array([-v0[1], v0[0]])
        V = np.stack([_fix_sign(v0), _fix_sign(v1)], axis=1)
    return SpectralData(lam, V)


def _eigen_3(A):
    # trigonometric solution of the characteristic cubic
    q = np.trace(A) / 3.0
    B = A - q * np.eye(3)
    p2 = np.sum(B * B) / 6.0
    if p2 < 1e-300:
        return SpectralData(np.full(3, q), np.eye(3))
    p = np.sqrt(p2)
    detB = np.linalg.det(B / p)
    r = max(-1.0, min(1.0, detB / 2.0))
    phi = np.arccos(r) / 3.0
    lam = np.sort(q + 2.0 * p * np.cos(phi - 2.0 * np.pi * np.array([0, 1, 2]) / 3.0))
    vecs = []
    for k in range(3):
        Mk = A - lam[k] * np.eye(3)
        # null vector from the largest cross product of row pairs
        cross = [np.cross(Mk[i], Mk[j]) for i, j in ((0, 1), (0, 2), (1, 2))]
        norms = [np.linalg.norm(c) for c in cross]
        v = cross[int(np.argmax(norms))]
        if np.linalg.norm(v) < 1e-14:
            v = np.eye(3)[k]
        v = v / np.linalg.norm(v)
        for prev in vecs:  # guard repeated eigenvalues
            v = v - (v @ prev) * prev
        nv = np.linalg.norm(v)
        if nv < 1e-10:
            v = np.eye(3)[k]
            for prev in vecs:
                v = v - (v @ prev) * prev
            nv = np.linalg.norm(v)
        vecs.append(v / nv)
    V = np.stack([_fix_sign(v) for v in vecs], axis=1)
    return SpectralData(lam, V)


def eigenvalues_2x2(uxx, uyy, uxy):
    """Vectorised eigenvalue pair (ascending) of [[uxx, uxy], [uxy, uyy]]."""
    mean = 0.5 * (uxx + uyy)
    r = np.sqrt(0.25 * (uxx - uyy) ** 2 + uxy ** 2)
    return mean - r, mean + r


def F_value(A):
    """sum arctan(lambda_i(A)); lies in (-n pi/2, n pi/2)."""
    lam = sym_eigen(A).eigenvalues
    return float(np.sum(np.arctan(lam)))


def F_derivative(A):
    """dF/dA = (I + A^2)^{-1}, symmetric with spectrum in (0, 1]."""
    A = _check_symmetric(A)
    return np.linalg.inv(np.eye(A.shape[0]) + A @ A)


def structure_sums(A):
    """(sum 1/(1+lam^2), sum lam^2/(1+lam^2)); the two add up to n exactly."""
    lam = sym_eigen(A).eigenvalues
    w = 1.0 / (1.0 + lam ** 2)
    return float(np.sum(w)), float(np.sum(lam ** 2 * w))


def structure_constants(Fmax0, Fmin0, delta, n):
    """Bounds (mu1, mu2, Lambda1) from the initial operator range and delta.

    Requires 0 <= delta < min(n pi/2 - Fmax0, Fmin0); within that window
    mu1 = tan((Fmax0 + delta)/n) bounds min lambda from above and
    mu2 = tan((Fmin0 - delta)/n) bounds max lambda from below.
    """
    delta_max = min(n * np.pi / 2.0 - Fmax0, Fmin0)
    if delta < 0 or delta >= delta_max:
        raise ValueError(
            f"delta = {delta:.6g} outside the admissible interval [0, {delta_max:.6g})")
    mu1 = float(np.tan((Fmax0 + delta) / n))
    mu2 = float(np.tan((Fmin0 - delta) / n))
    Lambda1 = min(1.0 / (1.0 + mu1 ** 2), mu2 ** 2 / (1.0 + mu2 ** 2))
    return StructureConstants(mu1=mu1, mu2=mu2, Lambda1=Lambda1, delta=float(delta),
                              Fmax0=float(Fmax0), Fmin0=float(Fmin0), n=int(n))
