"""Quantum objects and membership tests for the coherence free classes.

Channels are stored by their Choi matrix with the input system first,
``J = sum_{i,i'} |i><i'| (x) N(|i><i'|)``.  Output systems are listed in
``dims_out``; discrimination channels use ``(k, d)`` for the label register
``B`` followed by the reference copy ``A'``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import linalg as la

PURE_TOL = 1e-10
ORTHOGONAL_TOL = 1e-8
POVM_TOL = 1e-9
KRAUS_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.amplitudes, dtype=np.complex128).ravel()
        if v.size == 0:
            raise ValueError("a state needs at least one amplitude")
        if abs(np.linalg.norm(v) - 1) > PURE_TOL:
            raise ValueError(f"amplitudes have norm {np.linalg.norm(v):.12g}, expected 1")
        object.__setattr__(self, "amplitudes", v)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def density(self) -> "DensityMatrix":
        return DensityMatrix(la.projector(self.amplitudes))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        m = la.as_matrix(self.matrix)
        if m.shape[0] != m.shape[1]:
            raise ValueError(f"density matrix must be square, got {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > 1e-10:
            raise ValueError("density matrix is not Hermitian")
        m = (m + m.conj().T) / 2
        if abs(np.trace(m).real - 1) > 1e-10:
            raise ValueError(f"density matrix has trace {np.trace(m).real:.12g}")
        if np.linalg.eigvalsh(m)[0] < -1e-9:
            raise ValueError("density matrix is not positive semidefinite")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def sanitized(cls, m, tol: float = 1e-6) -> "DensityMatrix":
        """Clean up a solver-produced state: symmetrize, clip, renormalize.

        Raises if ``m`` is further than ``tol`` from a density matrix.
        """
        m = la.as_matrix(m)
        if np.max(np.abs(m - m.conj().T)) > tol:
            raise ValueError("matrix too far from Hermitian to sanitize")
        w, v = np.linalg.eigh((m + m.conj().T) / 2)
        if w[0] < -tol or abs(w.sum() - 1) > tol:
            raise ValueError(f"matrix too far from a state (min eig {w[0]:.2e}, trace {w.sum():.8f})")
        w = np.clip(w, 0.0, None)
        w /= w.sum()
        return cls((v * w) @ v.conj().T)

    def eigenvalues(self) -> np.ndarray:
        """Descending spectrum with sub-tolerance negatives clipped to zero."""
        w = np.linalg.eigvalsh(self.matrix)[::-1]
        return np.where((w < 0) & (w > -la.CLIP_TOL), 0.0, w)

    def is_pure(self, tol: float = 1e-8) -> bool:
        return bool(self.eigenvalues()[0] >= 1 - tol)

    def pure_vector(self, tol: float = 1e-8) -> np.ndarray:
        if not self.is_pure(tol):
            raise ValueError("state is not pure")
        w, v = np.linalg.eigh(self.matrix)
        return v[:, -1]


def as_density(rho) -> DensityMatrix:
    if isinstance(rho, DensityMatrix):
        return rho
    if isinstance(rho, PureState):
        return rho.density()
    return DensityMatrix(rho)


@dataclass(frozen=True, eq=False)
class StateEnsemble:
    items: tuple[tuple[float, DensityMatrix], ...]

    def __post_init__(self):
        items = tuple((float(p), as_density(r)) for p, r in self.items)
        if not items:
            raise ValueError("an ensemble needs at least one state")
        probs = np.array([p for p, _ in items])
        if np.any(probs < 0):
            raise ValueError("ensemble probabilities must be nonnegative")
        if abs(probs.sum() - 1) > 1e-10:
            raise ValueError(f"ensemble probabilities sum to {probs.sum():.12g}")
        dims = {r.dim for _, r in items}
        if len(dims) != 1:
            raise ValueError(f"ensemble states have mixed dimensions {sorted(dims)}")
        object.__setattr__(self, "items", items)

    @classmethod
    def from_states(cls, states: Iterable, probs: Sequence[float] | None = None) -> "StateEnsemble":
        states = [s.density() if isinstance(s, PureState) else
                  (PureState(s).density() if np.ndim(s) == 1 else as_density(s)) for s in states]
        if probs is None:
            probs = [1.0 / len(states)] * len(states)
        if len(probs) != len(states):
            raise ValueError("one probability per state is required")
        return cls(tuple(zip(probs, states)))

    @property
    def dim(self) -> int:
        return self.items[0][1].dim

    @property
    def k(self) -> int:
        return len(self.items)

    def __len__(self) -> int:
        return len(self.items)

    @property
    def probs(self) -> np.ndarray:
        return np.array([p for p, _ in self.items])

    @property
    def states(self) -> list[DensityMatrix]:
        return [r for _, r in self.items]

    def is_uniform(self, tol: float = 1e-12) -> bool:
        return bool(np.ptp(self.probs) <= tol)

    def pure_vectors(self, tol: float = 1e-8) -> list[np.ndarray]:
        return [r.pure_vector(tol) for r in self.states]

    def is_orthogonal_pure(self, tol: float = ORTHOGONAL_TOL) -> bool:
        try:
            vecs = self.pure_vectors()
        except ValueError:
            return False
        g = np.array(vecs).conj() @ np.array(vecs).T
        return bool(np.max(np.abs(g - np.eye(len(vecs)))) <= tol)


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    dim_in: int
    dims_out: tuple[int, ...]
    choi: np.ndarray

    def __post_init__(self):
        dims_out = tuple(int(x) for x in np.atleast_1d(self.dims_out))
        object.__setattr__(self, "dims_out", dims_out)
        c = la.as_matrix(self.choi)
        n = self.dim_in * self.dim_out
        if c.shape != (n, n):
            raise ValueError(f"Choi matrix has shape {c.shape}, expected {(n, n)}")
        object.__setattr__(self, "choi", c)

    @property
    def dim_out(self) -> int:
        return int(np.prod(self.dims_out))

    def blocks(self) -> np.ndarray:
        """Choi as a (d_in, d_out, d_in, d_out) tensor: [i, a, i', b] = N(|i><i'|)[a, b]."""
        return self.choi.reshape(self.dim_in, self.dim_out, self.dim_in, self.dim_out)

    def image_of_unit(self, i: int, j: int) -> np.ndarray:
        """N(|i><j|)."""
        return self.blocks()[i, :, j, :]


@dataclass(frozen=True, eq=False)
class POVM:
    effects: tuple[np.ndarray, ...]

    def __post_init__(self):
        tol = POVM_TOL
        effects = tuple(la.as_matrix(e) for e in self.effects)
        if not effects:
            raise ValueError("a POVM needs at least one effect")
        d = effects[0].shape[0]
        for e in effects:
            if e.shape != (d, d):
                raise ValueError("POVM effects must be square and share a dimension")
            if not la.is_psd(e, tol):
                raise ValueError("POVM effect is not Hermitian PSD")
        if np.max(np.abs(sum(effects) - np.eye(d))) > tol:
            raise ValueError("POVM effects do not sum to the identity")
        object.__setattr__(self, "effects", tuple((e + e.conj().T) / 2 for e in effects))

    @property
    def dim(self) -> int:
        return self.effects[0].shape[0]

    def __len__(self) -> int:
        return len(self.effects)


@dataclass(frozen=True, eq=False)
class KrausSet:
    operators: tuple[np.ndarray, ...]

    def __post_init__(self):
        ops = tuple(la.as_matrix(k) for k in self.operators)
        if not ops:
            raise ValueError("a Kraus set needs at least one operator")
        shape = ops[0].shape
        if any(k.shape != shape for k in ops):
            raise ValueError("Kraus operators must share a shape")
        object.__setattr__(self, "operators", ops)
        err = self.completeness_error()
        if err > KRAUS_TOL:
            raise ValueError(f"Kraus operators violate completeness by {err:.2e}")

    @property
    def dim_in(self) -> int:
        return self.operators[0].shape[1]

    @property
    def dim_out(self) -> int:
        return self.operators[0].shape[0]

    def completeness_error(self) -> float:
        s = sum(k.conj().T @ k for k in self.operators)
        return float(np.max(np.abs(s - np.eye(self.dim_in))))


# ---------------------------------------------------------------------------
# constructions


def maximally_coherent(d: int) -> PureState:
    if d < 1:
        raise ValueError("dimension must be at least 1")
    return PureState(np.full(d, 1 / np.sqrt(d), dtype=np.complex128))


def weyl_gates(d: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fourier (generalized Hadamard), cyclic shift and clock matrices."""
    if d < 2:
        raise ValueError("Weyl gates need d >= 2")
    omega = np.exp(2j * np.pi / d)
    idx = np.arange(d)
    h = omega ** np.outer(idx, idx) / np.sqrt(d)
    x = np.zeros((d, d), dtype=np.complex128)
    x[(idx + 1) % d, idx] = 1.0
    z = np.diag(omega ** idx)
    return h, x, z


def mcs_states(d: int) -> np.ndarray:
    """Columns H X^j |0>, j = 0..d-1: an orthonormal basis of maximally coherent states."""
    if d == 1:
        return np.ones((1, 1), dtype=np.complex128)
    h, x, _ = weyl_gates(d)
    e0 = la.ket(0, d)
    return np.column_stack([h @ np.linalg.matrix_power(x, j) @ e0 for j in range(d)])


def mcs_ensemble(d: int, k: int) -> StateEnsemble:
    """Uniform ensemble of the first ``k`` mutually orthogonal maximally coherent states."""
    if d < 1 or not 1 <= k <= d:
        raise ValueError(f"need 1 <= k <= d, got d={d}, k={k}")
    vecs = mcs_states(d)
    return StateEnsemble.from_states([PureState(vecs[:, j]) for j in range(k)])


def basis_ensemble(d: int, unitary: np.ndarray | None = None, probs=None) -> StateEnsemble:
    """The d columns of ``unitary`` (computational basis by default)."""
    u = np.eye(d, dtype=np.complex128) if unitary is None else np.asarray(unitary)
    return StateEnsemble.from_states([PureState(u[:, j]) for j in range(d)], probs)


def identity_channel(d: int) -> QuantumChannel:
    return choi_from_kraus(KrausSet((np.eye(d),)))


def unitary_channel(u: np.ndarray) -> QuantumChannel:
    return choi_from_kraus(KrausSet((np.asarray(u),)))


def dephasing_channel(d: int) -> QuantumChannel:
    return choi_from_kraus(KrausSet(tuple(la.basis_projector(i, d) for i in range(d))))


def channel_action(n: QuantumChannel, m) -> np.ndarray:
    """Linear action N(m) = Tr_in[(m^T (x) I) J] on an arbitrary matrix."""
    m = la.as_matrix(m)
    if m.shape != (n.dim_in, n.dim_in):
        raise la.DimensionError(f"input has shape {m.shape}, channel expects dimension {n.dim_in}")
    return np.einsum("ij,iajb->ab", m, n.blocks())


def apply_channel(n: QuantumChannel, rho) -> DensityMatrix:
    rho = as_density(rho)
    return DensityMatrix.sanitized(channel_action(n, rho.matrix), tol=1e-7)


def choi_from_kraus(k: KrausSet, dims_out: Sequence[int] | None = None) -> QuantumChannel:
    din, dout = k.dim_in, k.dim_out
    j = np.zeros((din * dout, din * dout), dtype=np.complex128)
    for op in k.operators:
        v = op.T.reshape(-1)  # v[i*dout + a] = op[a, i]
        j += np.outer(v, v.conj())
    return QuantumChannel(din, tuple(dims_out) if dims_out else (dout,), j)


def qc_channel_from_povm(m: POVM, out_dim: int | None = None) -> QuantumChannel:
    """Measure-and-record channel rho -> sum_q tr(E_q rho)|q><q|."""
    k = len(m) if out_dim is None else int(out_dim)
    if k < len(m):
        raise ValueError(f"output dimension {k} is smaller than the number of effects {len(m)}")
    j = sum(np.kron(e.T, la.basis_projector(q, k)) for q, e in enumerate(m.effects))
    return QuantumChannel(m.dim, (k,), j)


def io_kraus_from_povm(m: POVM, tol: float = 1e-13) -> KrausSet:
    """Incoherent Kraus operators sqrt(lam) |q><psi| from each effect's spectrum."""
    k = len(m)
    ops = []
    for q, e in enumerate(m.effects):
        w, v = np.linalg.eigh(e)
        for lam, vec in zip(w, v.T):
            if lam > tol:
                ops.append(np.sqrt(lam) * np.outer(la.ket(q, k), vec.conj()))
    return KrausSet(tuple(ops))


# ---------------------------------------------------------------------------
# membership checks


def is_cptp(n: QuantumChannel, tol: float = 1e-8) -> bool:
    if not la.is_psd(n.choi, tol):
        return False
    marg = la.partial_trace(n.choi, [n.dim_in, n.dim_out], keep=[0])
    return bool(np.max(np.abs(marg - np.eye(n.dim_in))) <= tol)


def _offdiag_max(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - np.diag(np.diag(m))), initial=0.0))


def is_mio(n: QuantumChannel, tol: float = 1e-8) -> bool:
    """Incoherent inputs map to incoherent outputs (checked on each |m><m|)."""
    return all(_offdiag_max(n.image_of_unit(i, i)) <= tol for i in range(n.dim_in))


def is_dio(n: QuantumChannel, tol: float = 1e-8) -> bool:
    """The channel commutes with complete dephasing."""
    t = n.blocks()
    out_dephased = np.zeros_like(t)
    idx = np.arange(n.dim_out)
    out_dephased[:, idx, :, idx] = t[:, idx, :, idx]
    in_dephased = np.zeros_like(t)
    ins = np.arange(n.dim_in)
    in_dephased[ins, :, ins, :] = t[ins, :, ins, :]
    return bool(np.linalg.norm((out_dephased - in_dephased).ravel()) <= tol)


def is_incoherent_kraus(k: KrausSet, tol: float = 1e-8) -> bool:
    for op in k.operators:
        for i in range(k.dim_in):
            col = op[:, i]
            if _offdiag_max(np.outer(col, col.conj())) > tol:
                return False
    return True


def is_incoherent_povm(m: POVM, tol: float = 1e-8) -> bool:
    return all(_offdiag_max(e) <= tol for e in m.effects)


# ---------------------------------------------------------------------------
# ensemble functionals


def average_state(e: StateEnsemble) -> DensityMatrix:
    return DensityMatrix.sanitized(sum(p * r.matrix for p, r in e.items), tol=1e-9)


ENTROPY_SNAP = 1e-12


def _snap(s: float) -> float:
    """Entropies within rounding noise of zero are reported as exactly zero."""
    return 0.0 if s < ENTROPY_SNAP else float(s)


def entropy_vn(rho) -> float:
    w = as_density(rho).eigenvalues()
    w = w[w > ENTROPY_SNAP]
    return _snap(-np.sum(w * np.log2(w)))


def entropy_min(rho) -> float:
    return _snap(-np.log2(as_density(rho).eigenvalues()[0]))
