"""Dense complex matrix kernel.

Operators are plain ``numpy`` arrays of dtype ``complex128``.  Everything here is a pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import unitary_group

MAX_DIM = 4096
HERMITIAN_TOL = 1e-10
CLIP_TOL = 1e-9


class DimensionError(ValueError):
    """Raised when matrix shapes do not fit the requested operation."""


def as_matrix(m) -> np.ndarray:
    """Return ``m`` as a finite 2-D complex array."""
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise DimensionError(f"expected a matrix, got array of shape {a.shape}")
    if max(a.shape) > MAX_DIM:
        raise DimensionError(f"dimension {max(a.shape)} exceeds the cap of {MAX_DIM}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def _square(m) -> np.ndarray:
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    return a


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.asarray(m)).T


def hermitian_part(m) -> np.ndarray:
    a = _square(m)
    return (a + a.conj().T) / 2


def ket(i: int, d: int) -> np.ndarray:
    v = np.zeros(d, dtype=np.complex128)
    v[i] = 1.0
    return v


def projector(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.complex128).ravel()
    return np.outer(v, v.conj())


def basis_projector(i: int, d: int) -> np.ndarray:
    """The matrix unit |i><i| in dimension ``d``."""
    p = np.zeros((d, d), dtype=np.complex128)
    p[i, i] = 1.0
    return p


def tensor(*ms) -> np.ndarray:
    """Kronecker product of one or more matrices, left to right."""
    if not ms:
        raise DimensionError("tensor needs at least one operand")
    out = as_matrix(ms[0])
    for m in ms[1:]:
        out = np.kron(out, as_matrix(m))
    if max(out.shape) > MAX_DIM:
        raise DimensionError(f"dimension {max(out.shape)} exceeds the cap of {MAX_DIM}")
    return out


def partial_trace(m, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Trace out every subsystem of ``m`` whose index is not in ``keep``.

    ``dims`` lists the subsystem dimensions in tensor order.  Kept
    subsystems stay in their original relative order.
    """
    a = _square(m)
    dims = [int(x) for x in dims]
    if any(x < 1 for x in dims):
        raise DimensionError(f"subsystem dimensions must be positive, got {dims}")
    if int(np.prod(dims)) != a.shape[0]:
        raise DimensionError(f"dims {dims} do not multiply to matrix size {a.shape[0]}")
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise DimensionError(f"keep indices {keep} out of range for {len(dims)} subsystems")
    n = len(dims)
    t = a.reshape(dims + dims)
    # descending order keeps lower axis indices valid after each contraction
    for i in sorted(set(range(n)) - set(keep), reverse=True):
        t = np.trace(t, axis1=i, axis2=i + t.ndim // 2)
    dk = int(np.prod([dims[k] for k in keep])) if keep else 1
    return t.reshape(dk, dk)


def dephase(m) -> np.ndarray:
    """Completely dephasing map: keep only the diagonal."""
    a = _square(m)
    return np.diag(np.diag(a))


@dataclass(frozen=True)
class HermitianEigen:
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # columns


def check_hermitian(m, tol: float = HERMITIAN_TOL) -> np.ndarray:
    a = _square(m)
    dev = np.max(np.abs(a - a.conj().T)) if a.size else 0.0
    if dev > tol * max(1.0, np.max(np.abs(a))):
        raise ValueError(f"matrix is not Hermitian (max deviation {dev:.3e})")
    return (a + a.conj().T) / 2


def hermitian_eigen(m, tol: float = HERMITIAN_TOL) -> HermitianEigen:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending."""
    h = check_hermitian(m, tol)
    w, v = np.linalg.eigh(h)
    order = np.argsort(w)[::-1]
    return HermitianEigen(w[order], v[:, order])


def eigvalsh(m) -> np.ndarray:
    """Ascending eigenvalues of the Hermitian part of ``m``."""
    return np.linalg.eigvalsh(hermitian_part(m))


def trace_norm(m) -> float:
    a = _square(m)
    if a.size == 0:
        return 0.0
    if np.allclose(a, a.conj().T, atol=1e-12, rtol=0):
        return float(np.sum(np.abs(np.linalg.eigvalsh((a + a.conj().T) / 2))))
    return float(np.sum(np.linalg.svd(a, compute_uv=False)))


def is_psd(m, tol: float = 1e-9) -> bool:
    a = _square(m)
    if np.max(np.abs(a - a.conj().T), initial=0.0) > max(tol, 1e-12):
        return False
    return bool(eigvalsh(a)[0] >= -tol)


def clip_spectrum(m, tol: float = CLIP_TOL) -> np.ndarray:
    """Zero eigenvalues in (-tol, 0); anything more negative is an error."""
    w, v = np.linalg.eigh(hermitian_part(m))
    if w[0] < -tol:
        raise ValueError(f"matrix has eigenvalue {w[0]:.3e} below -{tol:g}")
    w = np.clip(w, 0.0, None)
    return (v * w) @ v.conj().T


def psd_sqrt(m) -> np.ndarray:
    w, v = np.linalg.eigh(hermitian_part(m))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary."""
    if d == 1:
        return np.exp(2j * np.pi * rng.random()) * np.ones((1, 1), dtype=np.complex128)
    return unitary_group.rvs(d, random_state=rng).astype(np.complex128)
